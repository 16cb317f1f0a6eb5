#pragma once

// Frequency-test helpers shared by unit and acceptance tests.

#include <boost/math/distributions/chi_squared.hpp>

#include <vector>

namespace tgtest {

/// Upper-tail p-value of Pearson's chi-square statistic for observed counts
/// against a uniform expectation.
inline double chi_square_uniform_p(const std::vector<double>& counts) {
  double total = 0.0;
  for (const auto c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (const auto c : counts) stat += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace tgtest
