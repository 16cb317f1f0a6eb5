#pragma once

// Interaction datasets: CSV ingestion, chronological splits, the inductive
// (held-out node) protocol and negative destination sampling.
//
// CSV layout: header `src,dst,t[,label][,f0,...]`, one interaction per row.
// Raw node ids are arbitrary tokens and are remapped to dense ids in order of
// first appearance after a stable sort by time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tgsample/ctdg.hpp"
#include "tgsample/error.hpp"
#include "tgsample/random.hpp"

namespace tgsample {

struct Dataset {
  std::string name;
  std::vector<Event> events;
  std::size_t num_nodes = 0;
  std::size_t d_edge = 0;
  std::size_t d_node = 0;
  bool bipartite = false;
  bool has_labels = false;
  /// Proof-paired negative destination per event (synthetic data only);
  /// empty when negatives are drawn at random.
  std::vector<NodeId> paired_negative;

  [[nodiscard]] bool has_paired_negatives() const { return !paired_negative.empty(); }

  [[nodiscard]] std::span<const double> edge_features(std::size_t event_index) const {
    return events[event_index].edge_feat;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    out.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::out_of_range&) {
    fail(ErrorCode::NonFiniteFeature, "value out of range on line " + std::to_string(line_no));
  } catch (const std::invalid_argument&) {
    // stod rejects "nan"/"inf" spellings only on some platforms; treat the
    // common ones as non-finite rather than malformed.
    std::string lower = cell;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "nan" || lower == "inf" || lower == "-inf" || lower == "+inf") {
      fail(ErrorCode::NonFiniteFeature, "non-finite value on line " + std::to_string(line_no));
    }
    fail(ErrorCode::MalformedRow, "cannot parse '" + cell + "' on line " + std::to_string(line_no));
  }
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Finalizes a dataset built from raw rows: stable time sort and dense ids in
/// order of first appearance.
inline void normalize_dataset(Dataset& ds, std::vector<std::string>& raw_src, std::vector<std::string>& raw_dst) {
  const std::size_t n = ds.events.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ds.events[a].t < ds.events[b].t; });
  std::unordered_map<std::string, NodeId> ids;
  auto id_of = [&](const std::string& raw) {
    auto [it, inserted] = ids.try_emplace(raw, static_cast<NodeId>(ids.size()));
    return it->second;
  };
  std::vector<Event> sorted;
  sorted.reserve(n);
  for (const auto i : order) {
    Event e = std::move(ds.events[i]);
    e.src = id_of(raw_src[i]);
    e.dst = id_of(raw_dst[i]);
    sorted.push_back(std::move(e));
  }
  ds.events = std::move(sorted);
  ds.num_nodes = ids.size();
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::EmptyFile, path + " has no header");
  const auto header = detail::split_csv_line(line);
  require(header.size() >= 3 && header[0] == "src" && header[1] == "dst" && header[2] == "t",
          ErrorCode::MalformedRow, "header must start with src,dst,t in " + path);
  std::size_t first_feat = 3;
  Dataset ds;
  if (header.size() > 3 && header[3] == "label") {
    ds.has_labels = true;
    first_feat = 4;
  }
  ds.d_edge = header.size() - first_feat;
  const auto slash = path.find_last_of('/');
  ds.name = slash == std::string::npos ? path : path.substr(slash + 1);

  std::vector<std::string> raw_src;
  std::vector<std::string> raw_dst;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                        " columns, expected " + std::to_string(header.size()));
    }
    Event e;
    e.t = detail::parse_double(cells[2], line_no);
    if (!std::isfinite(e.t) || e.t < 0.0) {
      fail(ErrorCode::MalformedRow, "timestamp must be finite and non-negative on line " + std::to_string(line_no));
    }
    if (ds.has_labels) e.label = static_cast<int>(detail::parse_double(cells[3], line_no));
    e.edge_feat.reserve(ds.d_edge);
    for (std::size_t c = first_feat; c < cells.size(); ++c) {
      const double v = detail::parse_double(cells[c], line_no);
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteFeature, "line " + std::to_string(line_no));
      e.edge_feat.push_back(v);
    }
    raw_src.push_back(std::move(cells[0]));
    raw_dst.push_back(std::move(cells[1]));
    ds.events.push_back(std::move(e));
  }
  if (ds.events.empty()) fail(ErrorCode::EmptyFile, path + " has no rows");
  normalize_dataset(ds, raw_src, raw_dst);
  for (const auto& e : ds.events) {
    if (e.src == e.dst) fail(ErrorCode::SelfLoop, "self-loop in " + path);
  }
  // bipartite when no node is ever both a source and a destination
  std::vector<unsigned char> role(ds.num_nodes, 0);
  for (const auto& e : ds.events) {
    role[static_cast<std::size_t>(e.src)] |= 1;
    role[static_cast<std::size_t>(e.dst)] |= 2;
  }
  ds.bipartite = std::none_of(role.begin(), role.end(), [](unsigned char r) { return r == 3; });
  return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out << "src,dst,t";
  if (ds.has_labels) out << ",label";
  for (std::size_t f = 0; f < ds.d_edge; ++f) out << ",f" << f;
  out << '\n';
  for (const auto& e : ds.events) {
    out << e.src << ',' << e.dst << ',' << detail::format_double(e.t);
    if (ds.has_labels) out << ',' << e.label.value_or(0);
    for (const double v : e.edge_feat) out << ',' << detail::format_double(v);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::Io, "short write to " + path);
}

/// Proof-paired negatives as `event_index,neg_dst` rows.
inline void write_eval_pairs(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out << "event_index,neg_dst\n";
  for (std::size_t i = 0; i < ds.paired_negative.size(); ++i) out << i << ',' << ds.paired_negative[i] << '\n';
}

inline void load_eval_pairs(Dataset& ds, const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<NodeId> neg(ds.events.size(), -1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == 2, ErrorCode::MalformedRow, "eval pair line " + std::to_string(line_no));
    const auto idx = static_cast<std::size_t>(std::stoull(cells[0]));
    require(idx < neg.size(), ErrorCode::IndexOutOfRange, "eval pair event index " + cells[0]);
    neg[idx] = std::stoll(cells[1]);
  }
  ds.paired_negative = std::move(neg);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  double inductive_node_frac = 0.10;
  std::uint64_t seed = 0;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const { return end - begin; }
  [[nodiscard]] bool contains(std::size_t i) const { return i >= begin && i < end; }
};

struct ChronoSplit {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Contiguous ranges by event count (floor for train and validation, the
/// remainder to test). A boundary that falls inside a group of equal
/// timestamps moves forward so the whole group joins the earlier split.
inline ChronoSplit chrono_split(const Dataset& ds, const SplitSpec& spec = {}) {
  const std::size_t n = ds.events.size();
  require(n >= 10, ErrorCode::TooFewEvents, "need at least 10 events, have " + std::to_string(n));
  require(std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) < 1e-9 && spec.train_frac > 0 &&
              spec.val_frac > 0 && spec.test_frac > 0,
          ErrorCode::InvalidArgument, "split fractions must be positive and sum to 1");
  auto settle = [&](std::size_t b) {
    while (b > 0 && b < n && ds.events[b].t == ds.events[b - 1].t) ++b;
    return b;
  };
  const auto train_end = settle(static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n))));
  const auto raw_val_end =
      static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n))) +
      static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
  const auto val_end = settle(std::max(raw_val_end, train_end));
  if (train_end == 0 || train_end >= val_end || val_end >= n) {
    fail(ErrorCode::UnsplittableStream, "equal-timestamp groups leave an empty split");
  }
  return {{0, train_end}, {train_end, val_end}, {val_end, n}};
}

inline void write_split_manifest(const ChronoSplit& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path);
  out << "split,start_index,end_index\n";
  out << "train," << s.train.begin << ',' << s.train.end << '\n';
  out << "val," << s.val.begin << ',' << s.val.end << '\n';
  out << "test," << s.test.begin << ',' << s.test.end << '\n';
}

struct InductiveView {
  std::vector<bool> is_new;
  std::vector<std::size_t> train_events;  // training events with no new endpoint
  std::vector<std::size_t> val_events;    // validation events touching a new node
  std::vector<std::size_t> test_events;   // test events touching a new node
};

inline InductiveView inductive_view(const Dataset& ds, const ChronoSplit& split, std::vector<bool> is_new) {
  require(is_new.size() == ds.num_nodes, ErrorCode::InvalidArgument, "new-node mask size");
  InductiveView view;
  auto touches = [&](std::size_t i) {
    const auto& e = ds.events[i];
    return is_new[static_cast<std::size_t>(e.src)] || is_new[static_cast<std::size_t>(e.dst)];
  };
  for (auto i = split.train.begin; i < split.train.end; ++i) {
    if (!touches(i)) view.train_events.push_back(i);
  }
  for (auto i = split.val.begin; i < split.val.end; ++i) {
    if (touches(i)) view.val_events.push_back(i);
  }
  for (auto i = split.test.begin; i < split.test.end; ++i) {
    if (touches(i)) view.test_events.push_back(i);
  }
  view.is_new = std::move(is_new);
  return view;
}

/// Marks round(frac * num_nodes) seeded-random nodes as unseen, drops their
/// training events and keeps only evaluation events that touch them.
inline InductiveView inductive_mask(const Dataset& ds, const ChronoSplit& split, double frac, std::uint64_t seed) {
  require(frac > 0.0 && frac < 1.0, ErrorCode::InvalidArgument, "inductive fraction must be in (0, 1)");
  const auto n = ds.num_nodes;
  const auto count = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, "inductive"));
  for (std::size_t i = 0; i < count && i < n; ++i) {
    std::swap(ids[i], ids[i + rng.below(n - i)]);
  }
  std::vector<bool> is_new(n, false);
  for (std::size_t i = 0; i < count && i < n; ++i) is_new[ids[i]] = true;
  auto view = inductive_view(ds, split, std::move(is_new));
  if (view.val_events.empty() && view.test_events.empty()) {
    fail(ErrorCode::EmptyEvalSet, "inductive fraction leaves no evaluation events");
  }
  return view;
}

// ---------------------------------------------------------------------------
// Negative sampling

/// Destination universe: the item side (every node seen as a destination) for
/// bipartite data, all nodes otherwise.
class NegativeSampler {
 public:
  explicit NegativeSampler(const Dataset& ds) : bipartite_(ds.bipartite) {
    if (ds.bipartite) {
      std::vector<bool> seen(ds.num_nodes, false);
      for (const auto& e : ds.events) {
        if (!seen[static_cast<std::size_t>(e.dst)]) {
          seen[static_cast<std::size_t>(e.dst)] = true;
          universe_.push_back(e.dst);
        }
      }
      std::sort(universe_.begin(), universe_.end());
    } else {
      universe_.resize(ds.num_nodes);
      std::iota(universe_.begin(), universe_.end(), NodeId{0});
    }
  }

  /// Same source and time; destination uniform over the universe minus the
  /// positive destination (and minus the source for non-bipartite data).
  Event sample(const Event& positive, Rng& rng) const {
    std::vector<NodeId> excluded{positive.dst};
    if (!bipartite_) excluded.push_back(positive.src);
    std::size_t present = 0;
    for (const auto x : excluded) {
      if (std::binary_search(universe_.begin(), universe_.end(), x)) ++present;
    }
    if (excluded.size() == 2 && excluded[0] == excluded[1] && present == 2) present = 1;
    const auto available = universe_.size() - present;
    require(available >= 1, ErrorCode::DegenerateUniverse, "no destination left after exclusion");
    // draw an index among the non-excluded entries, then skip past exclusions
    auto pick = static_cast<std::size_t>(rng.below(available));
    std::vector<std::size_t> skip;
    for (const auto x : excluded) {
      const auto it = std::lower_bound(universe_.begin(), universe_.end(), x);
      if (it != universe_.end() && *it == x) skip.push_back(static_cast<std::size_t>(it - universe_.begin()));
    }
    std::sort(skip.begin(), skip.end());
    skip.erase(std::unique(skip.begin(), skip.end()), skip.end());
    for (const auto s : skip) {
      if (pick >= s) ++pick;
    }
    Event neg;
    neg.src = positive.src;
    neg.dst = universe_[pick];
    neg.t = positive.t;
    neg.label = 0;
    return neg;
  }

  [[nodiscard]] const std::vector<NodeId>& universe() const { return universe_; }

 private:
  std::vector<NodeId> universe_;
  bool bipartite_;
};

inline Event negative_sample(const Event& positive, const Dataset& ds, Rng& rng) {
  return NegativeSampler(ds).sample(positive, rng);
}

}  // namespace tgsample
