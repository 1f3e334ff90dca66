#pragma once

#include <cflab/correlation.hpp>
#include <cflab/error.hpp>
#include <cflab/similarity.hpp>

#include <cstddef>

namespace cflab {

// predict_item_mean and predict_user_mean live in similarity.hpp because the
// weighted predictor falls back on them.

/// q v'(j, b) + (1 - q) m(b), where v' is the weighted prediction over
/// `raw` (raw Pearson similarities, no mean-field fill).
inline Prediction predict_blend(const RatingMatrix& m, const SimilarityMatrix& raw,
                                std::size_t user, std::size_t item, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("blend weight q must lie in [0, 1]");
  const auto personal = predict_weighted(m, raw, user, item);
  const auto average = predict_item_mean(m, user, item);
  return {m.scale().clamp(q * personal.value + (1.0 - q) * average.value),
          personal.fallback || average.fallback};
}

}  // namespace cflab
