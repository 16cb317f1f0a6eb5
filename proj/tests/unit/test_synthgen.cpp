#include <gtest/gtest.h>

#include <map>
#include <set>

#include "tgsample/samplers.hpp"
#include "tgsample/synthgen.hpp"

using namespace tgsample;

namespace {

std::vector<std::pair<NodeId, NodeId>> edges_at(const Dataset& ds, double t) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& e : ds.events) {
    if (e.t == t) out.emplace_back(e.src, e.dst);
  }
  return out;
}

HistoryStore replay(const Dataset& ds) {
  HistoryStore s;
  for (const auto& e : ds.events) s.append(e);
  return s;
}

std::set<NodeId> truncated_set(const HistoryStore& s, NodeId v, double t, std::size_t k) {
  std::set<NodeId> out;
  for (const auto& r : sample_truncation(s.query(v, t), k).selected()) out.insert(r.neighbor);
  return out;
}

}  // namespace

TEST(Thm1, CycleStructure) {
  const auto ds = gen_thm1(2, 16, 0);
  // v = 0, A = {1, 2}, B = {3, 4}
  EXPECT_EQ(edges_at(ds, 1), (std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}}));
  EXPECT_EQ(edges_at(ds, 4), (std::vector<std::pair<NodeId, NodeId>>{{0, 3}, {0, 4}}));
  EXPECT_EQ(ds.events.size(), 2u * 16u);
  EXPECT_EQ(ds.num_nodes, 5u);
  EXPECT_EQ(gen_thm1(7, 100, 0).events.size(), 700u);
}

TEST(Thm1, NegativesComeFromTheOppositeSet) {
  const std::size_t k = 4;
  const auto ds = gen_thm1(k, 200, 9);
  ASSERT_EQ(ds.paired_negative.size(), ds.events.size());
  auto in_a = [&](NodeId x) { return x >= 1 && x <= static_cast<NodeId>(k); };
  std::set<NodeId> used;
  for (std::size_t i = 0; i < ds.events.size(); ++i) {
    EXPECT_NE(in_a(ds.events[i].dst), in_a(ds.paired_negative[i]));
    EXPECT_NE(ds.paired_negative[i], 0);
    used.insert(ds.paired_negative[i]);
  }
  EXPECT_EQ(used.size(), 2 * k);
  EXPECT_EQ(gen_thm1(k, 200, 9).paired_negative, ds.paired_negative);
  EXPECT_NE(gen_thm1(k, 200, 10).paired_negative, ds.paired_negative);
}

TEST(Thm1, TruncatedNeighborhoodRepeatsWithPeriodTwo) {
  for (const std::size_t k : {1u, 2u, 5u}) {
    const auto ds = gen_thm1(k, 64, 0);
    const auto s = replay(ds);
    const auto a_like = truncated_set(s, 0, 6.0, k);   // 6 mod 4 = 2
    const auto b_like = truncated_set(s, 0, 8.0, k);   // 8 mod 4 = 0
    EXPECT_NE(a_like, b_like);
    for (double t = 5.0; t <= 64.0; t += 1.0) {
      const auto m = static_cast<int>(t) % 4;
      EXPECT_EQ(truncated_set(s, 0, t, k), (m == 2 || m == 3) ? a_like : b_like) << "t=" << t;
    }
  }
}

TEST(Thm1, Errors) {
  EXPECT_THROW(gen_thm1(0, 10), Error);
  EXPECT_THROW(gen_thm1(2, 7), Error);
}

TEST(Thm2, Alternates) {
  const auto ds = gen_thm2(10);
  EXPECT_EQ(edges_at(ds, 1), (std::vector<std::pair<NodeId, NodeId>>{{0, 1}}));
  EXPECT_EQ(edges_at(ds, 2), (std::vector<std::pair<NodeId, NodeId>>{{0, 2}}));
  int with_b = 0;
  for (const auto& e : ds.events) with_b += e.dst == 1;
  EXPECT_EQ(ds.events.size(), 10u);
  EXPECT_EQ(with_b, 5);
  for (std::size_t i = 0; i < ds.events.size(); ++i) EXPECT_EQ(ds.paired_negative[i], 3 - ds.events[i].dst);
  EXPECT_THROW(gen_thm2(3), Error);
}

TEST(Thm2, LeafHistoriesOnlyHoldTheHub) {
  const auto s = replay(gen_thm2(200));
  for (const NodeId leaf : {1, 2}) {
    const auto h = s.query(leaf, 100.0);
    EXPECT_FALSE(h.empty());
    for (const auto& r : h) EXPECT_EQ(r.neighbor, 0);
  }
}

TEST(Thm2, HubHistoryIsHalfC) {
  for (const std::size_t horizon : {11u, 100u, 1001u}) {
    const auto s = replay(gen_thm2(horizon));
    const auto h = s.full(0);
    double c = 0;
    for (const auto& r : h) c += r.neighbor == 2;
    EXPECT_LE(std::abs(c / static_cast<double>(h.size()) - 0.5), 1.0 / static_cast<double>(horizon));
  }
}

TEST(Lemma1, ColdStartAndToggle) {
  const auto ds = gen_lemma1(2, 200);
  ASSERT_GE(ds.events.size(), 2u);
  EXPECT_EQ(ds.events[0].dst, 1);
  EXPECT_EQ(ds.events[1].dst, 2);
  EXPECT_TRUE(ds.bipartite);
  for (std::size_t i = 0; i < ds.events.size(); ++i) EXPECT_EQ(ds.paired_negative[i], 3 - ds.events[i].dst);
  EXPECT_THROW(gen_lemma1(0, 10), Error);
}

TEST(Lemma1, EveryKeyPrecedesBothDestinationsEqually) {
  for (const std::size_t n : {1u, 2u, 3u, 4u}) {
    const auto ds = gen_lemma1(n, 4000);
    std::map<std::vector<NodeId>, std::pair<int, int>> counts;
    std::vector<NodeId> hist;
    for (const auto& e : ds.events) {
      const auto from = hist.size() > n ? hist.end() - static_cast<std::ptrdiff_t>(n) : hist.begin();
      auto& c = counts[std::vector<NodeId>(from, hist.end())];
      (e.dst == 1 ? c.first : c.second) += 1;
      hist.push_back(e.dst);
    }
    bool some_key_repeats = false;
    for (const auto& [key, c] : counts) {
      EXPECT_LE(std::abs(c.first - c.second), 1);
      some_key_repeats = some_key_repeats || (c.first > 0 && c.second > 0);
    }
    EXPECT_TRUE(some_key_repeats);
  }
}

TEST(Generate, DispatchesAndIsDeterministic) {
  const SyntheticSpec spec{SyntheticKind::Thm1Cycle, 3, 40, 5};
  const auto a = generate(spec);
  const auto b = generate(spec);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].dst, b.events[i].dst);
  EXPECT_EQ(parse_synthetic_kind("lemma1"), SyntheticKind::Lemma1Bipartite);
  EXPECT_EQ(parse_synthetic_kind(to_string(SyntheticKind::Thm2Alternating)), SyntheticKind::Thm2Alternating);
  EXPECT_THROW(parse_synthetic_kind("thm3"), Error);
}
