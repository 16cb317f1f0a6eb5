#include <gtest/gtest.h>

#include <set>

#include "tgsample/ctdg.hpp"
#include "tgsample/random.hpp"

using namespace tgsample;

namespace {

std::vector<std::pair<NodeId, Timestamp>> flat(History h) {
  std::vector<std::pair<NodeId, Timestamp>> out;
  for (const auto& r : h) out.emplace_back(r.neighbor, r.t);
  return out;
}

}  // namespace

TEST(HistoryStore, AppendRecordsBothEndpoints) {
  HistoryStore s;
  s.append(1, 2, 5.0);
  EXPECT_EQ(flat(s.query(1, 6.0)), (std::vector<std::pair<NodeId, Timestamp>>{{2, 5.0}}));
  EXPECT_EQ(flat(s.query(2, 6.0)), (std::vector<std::pair<NodeId, Timestamp>>{{1, 5.0}}));
}

TEST(HistoryStore, QueryIsStrictlyBefore) {
  HistoryStore s;
  s.append(1, 2, 5.0);
  EXPECT_TRUE(s.query(1, 5.0).empty());
}

TEST(HistoryStore, RejectsOutOfOrderEvents) {
  HistoryStore s;
  s.append(1, 2, 5.0);
  try {
    s.append(1, 2, 3.0);
    FAIL() << "expected MonotonicityViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MonotonicityViolation);
  }
}

TEST(HistoryStore, RejectsSelfLoopsUnlessAllowed) {
  HistoryStore strict;
  try {
    strict.append(3, 3, 1.0);
    FAIL() << "expected SelfLoop";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SelfLoop);
  }
  HistoryStore lenient(true);
  lenient.append(3, 3, 1.0);
  EXPECT_EQ(lenient.query(3, 2.0).size(), 1u);
}

TEST(HistoryStore, MultisetSemantics) {
  HistoryStore s;
  s.append(0, 7, 1.0);
  s.append(0, 7, 3.0);
  EXPECT_EQ(flat(s.query(0, 4.0)), (std::vector<std::pair<NodeId, Timestamp>>{{7, 1.0}, {7, 3.0}}));
  EXPECT_EQ(flat(s.query(0, 2.0)), (std::vector<std::pair<NodeId, Timestamp>>{{7, 1.0}}));
  EXPECT_TRUE(s.query(99, 10.0).empty());
}

TEST(HistoryStore, EqualTimestampsKeepInsertionOrder) {
  HistoryStore s;
  s.append(0, 1, 2.0);
  s.append(0, 2, 2.0);
  s.append(0, 3, 2.0);
  const auto h = s.query(0, 3.0);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0].neighbor, 1);
  EXPECT_EQ(h[1].neighbor, 2);
  EXPECT_EQ(h[2].neighbor, 3);
  EXPECT_EQ(h[0].edge_index, 0u);
  EXPECT_EQ(h[2].edge_index, 2u);
}

TEST(HistoryStore, MatchesBruteForceFilter) {
  Rng rng(11);
  struct E {
    NodeId s, d;
    double t;
  };
  std::vector<E> events;
  double t = 0.0;
  for (int i = 0; i < 2000; ++i) {
    t += static_cast<double>(rng.below(3));  // many equal timestamps
    NodeId a = static_cast<NodeId>(rng.below(25));
    NodeId b = static_cast<NodeId>(rng.below(25));
    if (a == b) b = (b + 1) % 25;
    events.push_back({a, b, t});
  }
  HistoryStore s;
  for (const auto& e : events) s.append(e.s, e.d, e.t);
  for (int q = 0; q < 300; ++q) {
    const NodeId v = static_cast<NodeId>(rng.below(26));
    const double qt = rng.uniform(0.0, t + 1.0);
    std::vector<std::pair<NodeId, Timestamp>> expect;
    for (const auto& e : events) {
      if (e.t >= qt) continue;
      if (e.s == v) expect.emplace_back(e.d, e.t);
      else if (e.d == v) expect.emplace_back(e.s, e.t);
    }
    EXPECT_EQ(flat(s.query(v, qt)), expect);
  }
}

TEST(HistoryStore, HistoryGrowsWithTime) {
  Rng rng(5);
  HistoryStore s;
  double t = 0.0;
  for (int i = 0; i < 500; ++i) {
    t += rng.uniform01();
    s.append(static_cast<NodeId>(rng.below(5)), 5 + static_cast<NodeId>(rng.below(5)), t);
  }
  for (NodeId v = 0; v < 10; ++v) {
    std::size_t prev = 0;
    for (double q = 0.0; q < t + 1; q += 7.3) {
      const auto n = s.query(v, q).size();
      EXPECT_GE(n, prev);
      prev = n;
    }
  }
}

TEST(RankOf, MostRecentIsRankOne) {
  const std::vector<NeighborRecord> h{{10, 1.0, 0}, {11, 2.0, 1}, {12, 3.0, 2}};
  EXPECT_EQ(rank_of(h, 2), 1u);
  EXPECT_EQ(rank_of(h, 0), 3u);
  EXPECT_EQ(rank_of(History(h).first(1), 0), 1u);
}

TEST(RankOf, IsABijectionAndRejectsBadIndex) {
  std::vector<NeighborRecord> h(17);
  std::set<std::size_t> ranks;
  for (std::size_t i = 0; i < h.size(); ++i) ranks.insert(rank_of(h, i));
  EXPECT_EQ(ranks.size(), h.size());
  EXPECT_EQ(*ranks.begin(), 1u);
  EXPECT_EQ(*ranks.rbegin(), h.size());
  EXPECT_THROW(rank_of(h, 17), Error);
}
