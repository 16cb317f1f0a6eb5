#pragma once

// Adversarial dynamic graphs from the expressivity results, each with one
// matched negative per positive event.
//
//   thm1_cycle        2k+1 nodes: v (id 0), A (ids 1..k), B (ids k+1..2k).
//                     At t with t mod 4 in {1,2} v meets all of A, otherwise
//                     all of B. The k most recent neighbors of v repeat with
//                     period 2 while the next destination has period 4.
//   thm2_alternating  a (0), b (1), c (2). Odd t: (a,b); even t: (a,c).
//   lemma1_bipartite  v1 (0) with v2 (1) / v3 (2). Each step goes to the
//                     destination not chosen the previous time the N most
//                     recent neighbors of v1 looked the same.
//
// Simultaneous events are serialized in node-id order. Time starts at 1.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tgsample/dataio.hpp"
#include "tgsample/error.hpp"
#include "tgsample/random.hpp"

namespace tgsample {

enum class SyntheticKind { Thm1Cycle, Thm2Alternating, Lemma1Bipartite };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Thm1Cycle;
  std::size_t k = 2;  // |A| = |B| for thm1_cycle, truncation size N for lemma1_bipartite
  std::size_t horizon = 1000;
  std::uint64_t seed = 0;
};

inline std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Thm1Cycle: return "thm1_cycle";
    case SyntheticKind::Thm2Alternating: return "thm2_alternating";
    case SyntheticKind::Lemma1Bipartite: return "lemma1_bipartite";
  }
  return "unknown";
}

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "thm1_cycle" || s == "thm1") return SyntheticKind::Thm1Cycle;
  if (s == "thm2_alternating" || s == "thm2") return SyntheticKind::Thm2Alternating;
  if (s == "lemma1_bipartite" || s == "lemma1") return SyntheticKind::Lemma1Bipartite;
  fail(ErrorCode::InvalidArgument, "unknown synthetic kind '" + s + "'");
}

namespace detail {

inline void push_event(Dataset& ds, NodeId src, NodeId dst, double t, NodeId negative) {
  Event e;
  e.src = src;
  e.dst = dst;
  e.t = t;
  ds.events.push_back(std::move(e));
  ds.paired_negative.push_back(negative);
}

}  // namespace detail

inline Dataset gen_thm1(std::size_t k, std::size_t horizon, std::uint64_t seed = 0) {
  require(k >= 1, ErrorCode::InvalidArgument, "thm1 needs k >= 1");
  require(horizon >= 8, ErrorCode::InvalidArgument, "thm1 needs horizon >= 8");
  Dataset ds;
  ds.name = "thm1_cycle_k" + std::to_string(k);
  ds.num_nodes = 2 * k + 1;
  ds.events.reserve(k * horizon);
  Rng rng(derive_seed(seed, "thm1-negatives"));
  const auto a_node = [](std::size_t i) { return static_cast<NodeId>(1 + i); };
  const auto b_node = [k](std::size_t i) { return static_cast<NodeId>(1 + k + i); };
  for (std::size_t t = 1; t <= horizon; ++t) {
    const bool with_a = (t % 4 == 1) || (t % 4 == 2);
    for (std::size_t i = 0; i < k; ++i) {
      const auto pick = static_cast<std::size_t>(rng.below(k));
      const NodeId dst = with_a ? a_node(i) : b_node(i);
      const NodeId neg = with_a ? b_node(pick) : a_node(pick);
      detail::push_event(ds, 0, dst, static_cast<double>(t), neg);
    }
  }
  return ds;
}

inline Dataset gen_thm2(std::size_t horizon) {
  require(horizon >= 4, ErrorCode::InvalidArgument, "thm2 needs horizon >= 4");
  Dataset ds;
  ds.name = "thm2_alternating";
  ds.num_nodes = 3;
  ds.events.reserve(horizon);
  for (std::size_t t = 1; t <= horizon; ++t) {
    const bool odd = t % 2 == 1;
    detail::push_event(ds, 0, odd ? 1 : 2, static_cast<double>(t), odd ? 2 : 1);
  }
  return ds;
}

/// Toggle-table realization: the destination for a truncated-history key is
/// the opposite of the one chosen the last time the key occurred. Unseen keys
/// take the opposite of the most recent destination (v2 on an empty history).
inline Dataset gen_lemma1(std::size_t n_trunc, std::size_t horizon) {
  require(n_trunc >= 1, ErrorCode::InvalidArgument, "lemma1 needs N >= 1");
  require(horizon >= 4, ErrorCode::InvalidArgument, "lemma1 needs horizon >= 4");
  constexpr NodeId v2 = 1;
  constexpr NodeId v3 = 2;
  Dataset ds;
  ds.name = "lemma1_bipartite_n" + std::to_string(n_trunc);
  ds.num_nodes = 3;
  ds.bipartite = true;
  std::vector<NodeId> history;
  std::map<std::vector<NodeId>, NodeId> last_choice;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const auto from = history.size() > n_trunc ? history.end() - static_cast<std::ptrdiff_t>(n_trunc) : history.begin();
    std::vector<NodeId> key(from, history.end());
    NodeId dst;
    if (const auto it = last_choice.find(key); it != last_choice.end()) {
      dst = it->second == v2 ? v3 : v2;
    } else {
      dst = (history.empty() || history.back() == v3) ? v2 : v3;
    }
    last_choice[key] = dst;
    history.push_back(dst);
    detail::push_event(ds, 0, dst, static_cast<double>(t), dst == v2 ? v3 : v2);
  }
  return ds;
}

inline Dataset generate(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::Thm1Cycle: return gen_thm1(spec.k, spec.horizon, spec.seed);
    case SyntheticKind::Thm2Alternating: return gen_thm2(spec.horizon);
    case SyntheticKind::Lemma1Bipartite: return gen_lemma1(spec.k, spec.horizon);
  }
  fail(ErrorCode::InvalidArgument, "unknown synthetic kind");
}

}  // namespace tgsample
