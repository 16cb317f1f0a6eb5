#pragma once

// Neighbor-selection strategies over a node's history.
//
// Every strategy returns a SampledNeighborhood with k slots: the selected
// records first, in ascending time order, followed by invalid padding. The
// shared slot order makes strategies that select the same records produce
// bit-identical backbone inputs.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "tgsample/ctdg.hpp"
#include "tgsample/error.hpp"
#include "tgsample/random.hpp"

namespace tgsample {

enum class Strategy { Truncation, Uniform, Nlb, Flash };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Truncation: return "truncation";
    case Strategy::Uniform: return "uniform";
    case Strategy::Nlb: return "nlb";
    case Strategy::Flash: return "flash";
  }
  return "unknown";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "truncation") return Strategy::Truncation;
  if (s == "uniform") return Strategy::Uniform;
  if (s == "nlb") return Strategy::Nlb;
  if (s == "flash") return Strategy::Flash;
  fail(ErrorCode::InvalidArgument, "unknown strategy '" + std::string(s) + "' (truncation|uniform|nlb|flash)");
}

struct SampledNeighborhood {
  Strategy strategy = Strategy::Truncation;
  std::vector<NeighborRecord> slots;
  std::vector<bool> valid;
  std::vector<double> scores;  // 0 for heuristic strategies

  [[nodiscard]] std::size_t capacity() const { return slots.size(); }

  [[nodiscard]] std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  }

  /// The valid records, oldest first.
  [[nodiscard]] std::vector<NeighborRecord> selected() const {
    std::vector<NeighborRecord> out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (valid[i]) out.push_back(slots[i]);
    }
    return out;
  }
};

namespace detail {

/// Fills a neighborhood from history positions (any order) and their scores.
inline SampledNeighborhood make_neighborhood(Strategy strategy, History h, std::size_t k,
                                             std::vector<std::size_t> positions,
                                             const std::vector<double>& scores_by_position = {}) {
  std::sort(positions.begin(), positions.end());
  SampledNeighborhood out;
  out.strategy = strategy;
  out.slots.assign(k, NeighborRecord{});
  out.valid.assign(k, false);
  out.scores.assign(k, 0.0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.slots[i] = h[positions[i]];
    out.valid[i] = true;
    if (!scores_by_position.empty()) out.scores[i] = scores_by_position[positions[i]];
  }
  return out;
}

}  // namespace detail

/// The min(k, |H|) most recent records (rank <= k).
inline SampledNeighborhood sample_truncation(History h, std::size_t k) {
  const auto take = std::min(k, h.size());
  std::vector<std::size_t> positions(take);
  std::iota(positions.begin(), positions.end(), h.size() - take);
  return detail::make_neighborhood(Strategy::Truncation, h, k, std::move(positions));
}

/// Positions of a uniformly random size-min(k, n) subset of [0, n), drawn by a
/// partial Fisher-Yates shuffle.
inline std::vector<std::size_t> uniform_subset(std::size_t n, std::size_t k, Rng& rng) {
  const auto take = std::min(k, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(take);
  return idx;
}

inline SampledNeighborhood sample_uniform(History h, std::size_t k, Rng& rng) {
  return detail::make_neighborhood(Strategy::Uniform, h, k, uniform_subset(h.size(), k, rng));
}

/// Indices of the k largest scores. Ties are ordered by a seeded random
/// permutation, so constant scores reduce to a uniform draw. O(n log k).
inline std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k, Rng& rng) {
  const auto n = scores.size();
  const auto take = std::min(k, n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i + 1 < n; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
  std::vector<std::size_t> tiebreak(n);
  for (std::size_t i = 0; i < n; ++i) tiebreak[perm[i]] = i;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return tiebreak[a] < tiebreak[b];
                    });
  idx.resize(take);
  return idx;
}

/// Candidate pool for scoring: the `pool` most recent records
/// (pool == 0 means the whole history).
inline History candidate_pool(History h, std::size_t pool) {
  if (pool == 0 || h.size() <= pool) return h;
  return h.subspan(h.size() - pool);
}

// ---------------------------------------------------------------------------
// No-Look-Back style buffer

/// Fixed k-slot per-node buffer maintained in O(1) per interaction.
///
/// Once full, the i-th record seen by a node replaces a uniformly chosen slot
/// with probability k/i (reservoir sampling), so each past record is held
/// with probability k/|H|. Reading the buffer never scans the history.
class NlbBuffer {
 public:
  NlbBuffer(std::size_t k, std::uint64_t seed) : k_(k), rng_(derive_seed(seed, "nlb")) {}

  void update(NodeId v, const NeighborRecord& record) {
    auto& node = node_slot(v);
    ++node.seen;
    if (node.records.size() < k_) {
      node.records.push_back(record);
      return;
    }
    if (k_ == 0) return;
    const auto j = rng_.below(node.seen);
    if (j < k_) node.records[j] = record;
  }

  /// Records both endpoints of an interaction.
  void observe(NodeId src, NodeId dst, Timestamp t, std::size_t edge_index) {
    update(src, {dst, t, edge_index});
    if (src != dst) update(dst, {src, t, edge_index});
  }

  [[nodiscard]] SampledNeighborhood sample(NodeId v) const {
    SampledNeighborhood out;
    out.strategy = Strategy::Nlb;
    out.slots.assign(k_, NeighborRecord{});
    out.valid.assign(k_, false);
    out.scores.assign(k_, 0.0);
    if (v < 0 || static_cast<std::size_t>(v) >= nodes_.size()) return out;
    auto records = nodes_[static_cast<std::size_t>(v)].records;
    std::stable_sort(records.begin(), records.end(), [](const NeighborRecord& a, const NeighborRecord& b) {
      return a.t != b.t ? a.t < b.t : a.edge_index < b.edge_index;
    });
    for (std::size_t i = 0; i < records.size(); ++i) {
      out.slots[i] = records[i];
      out.valid[i] = true;
    }
    return out;
  }

  [[nodiscard]] std::size_t capacity() const { return k_; }

 private:
  struct Node {
    std::vector<NeighborRecord> records;
    std::uint64_t seen = 0;
  };

  Node& node_slot(NodeId v) {
    require(v >= 0, ErrorCode::InvalidArgument, "negative node id");
    if (static_cast<std::size_t>(v) >= nodes_.size()) nodes_.resize(static_cast<std::size_t>(v) + 1);
    return nodes_[static_cast<std::size_t>(v)];
  }

  std::size_t k_;
  Rng rng_;
  std::vector<Node> nodes_;
};

}  // namespace tgsample
