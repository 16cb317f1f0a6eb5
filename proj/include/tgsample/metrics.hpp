#pragma once

// Ranking and classification metrics.
//
// Ties are resolved by mid-rank everywhere: an item tied with others is
// placed at the average of the positions the tied group occupies.
//   AP   each positive contributes (positives above + (tied positives + 1)/2)
//        divided by (items above + (tied items + 1)/2).
//   AUC  P(pos > neg) + 0.5 P(pos == neg).
//   MRR  rank of the positive = 1 + #greater negatives + #equal negatives / 2.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "tgsample/error.hpp"

namespace tgsample {

struct ScoredLabels {
  std::vector<double> scores;
  std::vector<int> labels;
};

namespace detail {

inline void check_labels(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::ShapeMismatch, "scores and labels differ in length");
  for (const auto y : labels) require(y == 0 || y == 1, ErrorCode::InvalidArgument, "labels must be 0 or 1");
}

/// Index order by descending score, with the tie groups as [begin, end) runs.
struct TieGroups {
  std::vector<std::size_t> order;
  std::vector<std::pair<std::size_t, std::size_t>> runs;
};

inline TieGroups tie_groups(std::span<const double> scores) {
  TieGroups g;
  g.order.resize(scores.size());
  std::iota(g.order.begin(), g.order.end(), 0);
  std::stable_sort(g.order.begin(), g.order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t i = 0; i < g.order.size();) {
    std::size_t j = i + 1;
    while (j < g.order.size() && scores[g.order[j]] == scores[g.order[i]]) ++j;
    g.runs.emplace_back(i, j);
    i = j;
  }
  return g;
}

}  // namespace detail

inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  detail::check_labels(scores, labels);
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  require(positives > 0, ErrorCode::DegenerateLabels, "average precision needs at least one positive");
  const auto g = detail::tie_groups(scores);
  double total = 0.0;
  double pos_above = 0.0;
  for (const auto& [b, e] : g.runs) {
    double tied_pos = 0.0;
    for (auto i = b; i < e; ++i) tied_pos += labels[g.order[i]];
    if (tied_pos > 0.0) {
      const double hits = pos_above + (tied_pos + 1.0) / 2.0;
      const double rank = static_cast<double>(b) + (static_cast<double>(e - b) + 1.0) / 2.0;
      total += tied_pos * hits / rank;
    }
    pos_above += tied_pos;
  }
  return total / static_cast<double>(positives);
}

inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_labels(scores, labels);
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n_neg = static_cast<double>(labels.size()) - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorCode::DegenerateLabels, "ROC-AUC needs both positives and negatives");
  // walk groups from the lowest score up, counting negatives strictly below
  const auto g = detail::tie_groups(scores);
  double wins = 0.0;
  double neg_below = 0.0;
  for (auto it = g.runs.rbegin(); it != g.runs.rend(); ++it) {
    double p = 0.0;
    double q = 0.0;
    for (auto i = it->first; i < it->second; ++i) (labels[g.order[i]] ? p : q) += 1.0;
    wins += p * (neg_below + 0.5 * q);
    neg_below += q;
  }
  return wins / (n_pos * n_neg);
}

inline double accuracy_at_threshold(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  detail::check_labels(scores, labels);
  require(!scores.empty(), ErrorCode::EmptyEvalSet, "accuracy of an empty set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hit += static_cast<int>(scores[i] >= threshold) == labels[i];
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

inline double average_precision(const ScoredLabels& sl) { return average_precision(sl.scores, sl.labels); }
inline double roc_auc(const ScoredLabels& sl) { return roc_auc(sl.scores, sl.labels); }
inline double accuracy_at_threshold(const ScoredLabels& sl, double threshold = 0.5) {
  return accuracy_at_threshold(sl.scores, sl.labels, threshold);
}

/// One query: the positive's score and its negatives' scores.
struct RankQuery {
  double positive = 0.0;
  std::vector<double> negatives;
};

inline double reciprocal_rank(const RankQuery& q) {
  double rank = 1.0;
  for (const auto s : q.negatives) {
    if (s > q.positive) rank += 1.0;
    else if (s == q.positive) rank += 0.5;
  }
  return 1.0 / rank;
}

inline double mrr(std::span<const RankQuery> queries) {
  require(!queries.empty(), ErrorCode::EmptyEvalSet, "MRR of no queries");
  double total = 0.0;
  for (const auto& q : queries) total += reciprocal_rank(q);
  return total / static_cast<double>(queries.size());
}

/// Per-pair MRR for one-negative evaluation: query i ranks scores[i] against neg[i].
inline double mrr_pairs(std::span<const double> pos, std::span<const double> neg) {
  require(pos.size() == neg.size(), ErrorCode::ShapeMismatch, "positive and negative score counts differ");
  std::vector<RankQuery> q(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) q[i] = {pos[i], {neg[i]}};
  return mrr(q);
}

struct Metrics {
  double ap = 0.0;
  double auc = 0.0;
  double acc = 0.0;
  double mrr = 0.0;
  std::size_t pairs = 0;
};

/// Metrics of matched (positive, negative) probability pairs.
inline Metrics pair_metrics(std::span<const double> pos, std::span<const double> neg) {
  require(!pos.empty(), ErrorCode::EmptyEvalSet, "no evaluation pairs");
  ScoredLabels sl;
  sl.scores.assign(pos.begin(), pos.end());
  sl.scores.insert(sl.scores.end(), neg.begin(), neg.end());
  sl.labels.assign(pos.size(), 1);
  sl.labels.resize(pos.size() + neg.size(), 0);
  return {average_precision(sl), roc_auc(sl), accuracy_at_threshold(sl), mrr_pairs(pos, neg), pos.size()};
}

}  // namespace tgsample
