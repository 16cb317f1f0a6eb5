#pragma once

// Synthetic interaction streams with messaging-like structure, used by the
// benchmark harness and as a stand-in for a small real dataset.
//
// Nodes join at uniformly spread times and open a conversation when they
// join. Each event either continues a recent conversation (short gap,
// direction flipped at random) or opens a new one from an activity-weighted
// source to a past partner or an activity-weighted stranger. Activity
// weights are Pareto distributed, so a few nodes dominate the stream.

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "tgsample/dataio.hpp"
#include "tgsample/random.hpp"

namespace tgsample {

struct WorkloadSpec {
  std::size_t nodes = 1000;
  std::size_t events = 100000;
  std::uint64_t seed = 0;
  double span = 1.6e7;          // seconds covered by the stream
  double continue_prob = 0.7;   // event continues an open conversation
  double revisit_prob = 0.5;    // new conversation goes to a past partner
  double mean_length = 8.0;     // messages per conversation
  std::size_t open_window = 64; // conversations that can still continue
};

inline Dataset gen_workload(const WorkloadSpec& spec) {
  require(spec.nodes >= 3, ErrorCode::InvalidArgument, "workload needs at least 3 nodes");
  require(spec.events >= spec.nodes, ErrorCode::InvalidArgument, "workload needs at least one event per node");
  Rng rng(derive_seed(spec.seed, "workload"));
  const auto n = spec.nodes;

  std::vector<double> weight(n);
  for (auto& w : weight) w = std::pow(1.0 - rng.uniform01(), -1.0 / 1.5);
  std::vector<double> join(n);
  for (auto& j : join) j = rng.uniform(0.0, 0.6 * spec.span);
  std::vector<std::size_t> join_order(n);
  std::iota(join_order.begin(), join_order.end(), 0);
  std::sort(join_order.begin(), join_order.end(), [&](std::size_t a, std::size_t b) { return join[a] < join[b]; });
  join[join_order.front()] = 0.0;

  struct Conversation {
    std::size_t a;
    std::size_t b;
    std::size_t left;
  };
  std::deque<Conversation> open;
  std::vector<std::vector<std::size_t>> partners(n);
  std::vector<std::size_t> joined;
  std::vector<double> cumulative;
  std::size_t next_join = 0;

  auto weighted_joined = [&](std::size_t exclude) {
    for (;;) {
      const double r = rng.uniform01() * cumulative.back();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
      const auto v = joined[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), joined.size() - 1)];
      if (v != exclude) return v;
    }
  };
  auto length = [&] {
    return 1 + static_cast<std::size_t>(std::floor(std::log(1.0 - rng.uniform01()) / std::log(1.0 - 1.0 / spec.mean_length)));
  };

  Dataset ds;
  ds.name = "workload_n" + std::to_string(n) + "_e" + std::to_string(spec.events);
  ds.num_nodes = n;
  ds.events.reserve(spec.events);
  const double mean_gap = spec.span / static_cast<double>(spec.events);
  double t = 0.0;
  for (std::size_t i = 0; i < spec.events; ++i) {
    const bool burst = !open.empty() && rng.uniform01() < spec.continue_prob;
    t += (burst ? 0.2 : 1.8) * mean_gap * -std::log(1.0 - rng.uniform01());
    std::size_t src = 0;
    std::size_t dst = 0;
    // a node whose join time has passed opens a conversation right away; the
    // remaining nodes are forced in once the stream nears its end
    const bool force_join = next_join < n && (join[join_order[next_join]] <= t || spec.events - i <= n - next_join);
    if (force_join || joined.size() < 2) {
      src = join_order[next_join++];
      joined.push_back(src);
      cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + weight[src]);
      if (joined.size() < 2) {
        src = join_order[next_join++];
        joined.push_back(src);
        cumulative.push_back(cumulative.back() + weight[src]);
      }
      dst = weighted_joined(src);
      open.push_back({src, dst, length()});
    } else if (burst) {
      // recent conversations are more likely to continue
      const auto pick = open.size() - 1 - std::min<std::size_t>(open.size() - 1, static_cast<std::size_t>(std::floor(-std::log(1.0 - rng.uniform01()) * 6.0)));
      auto& c = open[pick];
      src = rng.uniform01() < 0.5 ? c.a : c.b;
      dst = src == c.a ? c.b : c.a;
      if (--c.left == 0) open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
    } else {
      src = weighted_joined(n);
      const auto& past = partners[src];
      if (!past.empty() && rng.uniform01() < spec.revisit_prob) {
        const auto back = std::min<std::size_t>(past.size() - 1, static_cast<std::size_t>(std::floor(-std::log(1.0 - rng.uniform01()) * 3.0)));
        dst = past[past.size() - 1 - back];
      } else {
        dst = weighted_joined(src);
      }
      open.push_back({src, dst, length()});
    }
    while (open.size() > spec.open_window) open.pop_front();
    partners[src].push_back(dst);
    partners[dst].push_back(src);
    Event e;
    e.src = static_cast<NodeId>(src);
    e.dst = static_cast<NodeId>(dst);
    e.t = std::round(t);
    ds.events.push_back(std::move(e));
  }
  return ds;
}

/// Messaging-network stand-in with the size of the UCI forum dataset:
/// 1,899 nodes and 59,835 events.
inline Dataset gen_uci_shaped(std::uint64_t seed) {
  WorkloadSpec spec;
  spec.nodes = 1899;
  spec.events = 59835;
  spec.seed = seed;
  auto ds = gen_workload(spec);
  ds.name = "uci_shaped";
  return ds;
}

}  // namespace tgsample
