#pragma once

#include <cflab/error.hpp>

#include <cmath>
#include <span>

namespace cflab {

struct PredictionPair {
  double predicted = 0.0;
  double actual = 0.0;
};

/// Mean absolute error normalized by the rating range R:
/// (1 / (n R)) sum |predicted - actual|.
inline double mae(std::span<const PredictionPair> pairs, double range) {
  if (pairs.empty()) throw UndefinedStatistic("MAE of an empty prediction list");
  if (!(range > 0.0)) throw UsageError("MAE needs a positive rating range");
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.predicted - p.actual);
  return sum / (static_cast<double>(pairs.size()) * range);
}

}  // namespace cflab
