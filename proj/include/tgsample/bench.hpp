#pragma once

// Throughput harness.
//
// End-to-end: every strategy streams the same workload through sampling,
// aggregation and the link head (forward only), with identical backbone
// weights. One warm-up pass is discarded, then the median of `repetitions`
// timed passes is reported, normalized to truncation.
//
// Sampling-only: selection from a single node's history of fixed size, to
// show how each strategy's cost grows with |H|. FLASH scores the whole
// history here (no candidate cap).

#include <algorithm>
#include <chrono>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tgsample/flash.hpp"
#include "tgsample/samplers.hpp"
#include "tgsample/trainer.hpp"
#include "tgsample/workload.hpp"

namespace tgsample {

struct BenchConfig {
  std::vector<Strategy> strategies{Strategy::Truncation, Strategy::Uniform, Strategy::Nlb, Strategy::Flash};
  ModelConfig model;
  std::size_t repetitions = 5;
  std::size_t max_events = 0;  // events predicted per end-to-end pass; 0 = all
  std::vector<std::size_t> micro_sizes{10, 100, 1000};
  std::size_t micro_queries = 2000;
  bool end_to_end = true;
};

struct StrategyRow {
  Strategy strategy = Strategy::Truncation;
  std::size_t events = 0;
  double wall_ms = 0.0;  // median
  double edges_per_sec = 0.0;
  double relative_pct = 0.0;
  std::vector<double> samples_ms;
};

struct MicroRow {
  Strategy strategy = Strategy::Truncation;
  std::size_t history = 0;
  double ns_per_query = 0.0;  // median
};

struct BenchReport {
  std::string workload;
  std::size_t nodes = 0;
  std::size_t events = 0;
  std::size_t k = 0;
  std::size_t pool = 0;
  std::size_t threads = 1;
  std::vector<StrategyRow> rows;
  std::vector<MicroRow> micro;

  [[nodiscard]] const MicroRow& micro_at(Strategy s, std::size_t history) const {
    for (const auto& m : micro) {
      if (m.strategy == s && m.history == history) return m;
    }
    fail(ErrorCode::InvalidArgument, "no micro measurement for that strategy and size");
  }
};

inline constexpr std::size_t kMinBenchEvents = 10000;

inline double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::InvalidArgument, "median of nothing");
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

namespace detail {

inline double now_ms() {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

/// One forward-only pass over the stream; returns the number of predictions.
inline std::size_t stream_pass(const Model& model, const Dataset& ds, std::size_t max_events, std::uint64_t seed) {
  std::vector<std::size_t> all(ds.events.size());
  std::iota(all.begin(), all.end(), 0);
  StreamState st(ds, std::move(all), model.config().k, derive_seed(seed, "nlb"));
  PairRngs rngs{Rng(derive_seed(seed, "sampler")), Rng(derive_seed(seed, "reference"))};
  const auto limit = max_events ? std::min(max_events, ds.events.size()) : ds.events.size();
  volatile double sink = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& e = ds.events[i];
    st.advance_to(e.t);
    nn::Tape tape(false);
    sink = sink + nn::val(forward_pair(tape, model, st, ds, e.src, e.dst, e.t, 1, rngs, false).p).item();
  }
  return limit;
}

inline std::vector<NeighborRecord> micro_history(std::size_t size) {
  std::vector<NeighborRecord> h(size);
  for (std::size_t i = 0; i < size; ++i) h[i] = {static_cast<NodeId>(1 + i % 7), static_cast<double>(i + 1), i};
  return h;
}

}  // namespace detail

/// Sampling-only cost per query at each history size.
inline std::vector<MicroRow> run_micro(const BenchConfig& cfg) {
  std::vector<MicroRow> out;
  const auto k = cfg.model.k;
  for (const auto size : cfg.micro_sizes) {
    const auto records = detail::micro_history(size);
    const History h(records);
    std::vector<Event> events(size);
    const EdgeFeatures edges{events, 0};
    nn::ParamStore store(derive_seed(cfg.model.seed, "params"));
    const auto m = NodeEmbedding::create(store, 8, cfg.model.d_m);
    const auto scorer = FlashScorer::create(store, m, 0, cfg.model.flash);
    NlbBuffer nlb(k, cfg.model.seed);
    for (const auto& r : records) nlb.update(0, r);
    const ScoreQuery q{0, 1, static_cast<double>(size + 1)};
    for (const auto s : cfg.strategies) {
      // FLASH queries cost far more; scale its count so each size takes similar time
      const auto queries = s == Strategy::Flash ? std::max<std::size_t>(20, cfg.micro_queries * 10 / std::max<std::size_t>(size, 10)) : cfg.micro_queries * 50;
      Rng rng(derive_seed(cfg.model.seed, "micro"));
      std::vector<double> samples;
      volatile std::size_t sink = 0;
      for (std::size_t rep = 0; rep <= cfg.repetitions; ++rep) {
        const auto start = detail::now_ms();
        for (std::size_t i = 0; i < queries; ++i) {
          SampledNeighborhood nb;
          switch (s) {
            case Strategy::Truncation: nb = sample_truncation(h, k); break;
            case Strategy::Uniform: nb = sample_uniform(h, k, rng); break;
            case Strategy::Nlb: nb = nlb.sample(0); break;
            case Strategy::Flash: nb = flash_select(h, q, scorer, edges, k, 0, rng, cfg.model.threads); break;
          }
          sink = sink + nb.valid_count();
        }
        if (rep > 0) samples.push_back((detail::now_ms() - start) * 1e6 / static_cast<double>(queries));
      }
      out.push_back({s, size, median(samples)});
    }
  }
  return out;
}

inline BenchReport run_bench(const Dataset& ds, const BenchConfig& cfg) {
  const auto measured = cfg.max_events ? std::min(cfg.max_events, ds.events.size()) : ds.events.size();
  require(measured >= kMinBenchEvents, ErrorCode::WorkloadTooSmall,
          "workload has " + std::to_string(measured) + " events; timing needs at least " + std::to_string(kMinBenchEvents));
  require(cfg.repetitions >= 1, ErrorCode::InvalidArgument, "need at least one timed repetition");
  BenchReport report;
  report.workload = ds.name;
  report.nodes = ds.num_nodes;
  report.events = measured;
  report.k = cfg.model.k;
  report.pool = cfg.model.pool;
  report.threads = cfg.model.threads;
  if (cfg.end_to_end) {
    for (const auto s : cfg.strategies) {
      auto mc = cfg.model;
      mc.strategy = s;
      const Model model(ds.num_nodes, ds.d_edge, mc);
      StrategyRow row;
      row.strategy = s;
      for (std::size_t rep = 0; rep <= cfg.repetitions; ++rep) {
        const auto start = detail::now_ms();
        row.events = detail::stream_pass(model, ds, cfg.max_events, mc.seed);
        if (rep > 0) row.samples_ms.push_back(detail::now_ms() - start);
      }
      row.wall_ms = median(row.samples_ms);
      row.edges_per_sec = static_cast<double>(row.events) / (row.wall_ms / 1000.0);
      report.rows.push_back(std::move(row));
    }
    const auto base = std::find_if(report.rows.begin(), report.rows.end(),
                                   [](const StrategyRow& r) { return r.strategy == Strategy::Truncation; });
    for (auto& r : report.rows) {
      r.relative_pct = base != report.rows.end() ? 100.0 * r.edges_per_sec / base->edges_per_sec : 0.0;
    }
  }
  report.micro = run_micro(cfg);
  return report;
}

inline void write_bench_jsonl(const BenchReport& r, std::ostream& out) {
  const nlohmann::json workload = {{"workload", r.workload}, {"nodes", r.nodes}, {"events", r.events},
                                   {"k", r.k},               {"pool", r.pool},   {"threads", r.threads}};
  for (const auto& row : r.rows) {
    auto j = workload;
    j["kind"] = "end_to_end";
    j["strategy"] = to_string(row.strategy);
    j["wall_ms"] = row.wall_ms;
    j["edges_per_sec"] = row.edges_per_sec;
    j["relative_pct"] = row.relative_pct;
    j["samples_ms"] = row.samples_ms;
    out << j.dump() << '\n';
  }
  for (const auto& m : r.micro) {
    auto j = workload;
    j["kind"] = "sampling_only";
    j["strategy"] = to_string(m.strategy);
    j["history"] = m.history;
    j["ns_per_query"] = m.ns_per_query;
    out << j.dump() << '\n';
  }
}

inline void write_bench_table(const BenchReport& r, std::ostream& out) {
  char line[160];
  out << "workload " << r.workload << ": " << r.nodes << " nodes, " << r.events << " events, k=" << r.k
      << ", N=" << r.pool << ", threads=" << r.threads << "\n";
  if (!r.rows.empty()) {
    std::snprintf(line, sizeof line, "%-12s %14s %12s %10s\n", "strategy", "edges/sec", "median ms", "relative");
    out << line;
    for (const auto& row : r.rows) {
      std::snprintf(line, sizeof line, "%-12s %14.1f %12.2f %9.1f%%\n", std::string(to_string(row.strategy)).c_str(),
                    row.edges_per_sec, row.wall_ms, row.relative_pct);
      out << line;
    }
  }
  out << "\nsampling only, ns per query\n";
  std::snprintf(line, sizeof line, "%-12s", "strategy");
  out << line;
  std::vector<std::size_t> sizes;
  for (const auto& m : r.micro) {
    if (std::find(sizes.begin(), sizes.end(), m.history) == sizes.end()) sizes.push_back(m.history);
  }
  for (const auto s : sizes) {
    std::snprintf(line, sizeof line, " %12s", ("|H|=" + std::to_string(s)).c_str());
    out << line;
  }
  out << "\n";
  std::vector<Strategy> strategies;
  for (const auto& m : r.micro) {
    if (std::find(strategies.begin(), strategies.end(), m.strategy) == strategies.end()) strategies.push_back(m.strategy);
  }
  for (const auto st : strategies) {
    std::snprintf(line, sizeof line, "%-12s", std::string(to_string(st)).c_str());
    out << line;
    for (const auto s : sizes) {
      std::snprintf(line, sizeof line, " %12.1f", r.micro_at(st, s).ns_per_query);
      out << line;
    }
    out << "\n";
  }
}

/// Single- versus multi-threaded FLASH scoring throughput (candidates/sec)
/// over one history of `size` records.
struct ScalingResult {
  double single = 0.0;
  double multi = 0.0;
};

inline ScalingResult scoring_scaling(std::size_t size, std::size_t threads, std::size_t repetitions, std::uint64_t seed) {
  nn::ParamStore store(derive_seed(seed, "params"));
  const auto m = NodeEmbedding::create(store, 8, 16);
  const auto scorer = FlashScorer::create(store, m, 0);
  const auto records = detail::micro_history(size);
  std::vector<Event> events(size);
  const EdgeFeatures edges{events, 0};
  const auto cands = make_candidates(History(records), 0);
  const ScoreQuery q{0, 1, static_cast<double>(size + 1)};
  auto measure = [&](std::size_t t) {
    std::vector<double> samples;
    for (std::size_t rep = 0; rep <= repetitions; ++rep) {
      const auto start = detail::now_ms();
      const auto s = scorer.score_values_parallel(q, cands, edges, t);
      if (rep > 0) samples.push_back(static_cast<double>(s.size()) / ((detail::now_ms() - start) / 1000.0));
    }
    return median(samples);
  };
  return {measure(1), measure(threads)};
}

}  // namespace tgsample
