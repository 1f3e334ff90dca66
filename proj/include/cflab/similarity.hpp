#pragma once

#include <cflab/ratings.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string_view>

namespace cflab {

enum class Provenance { raw_pearson, meanfield_filled, amplified, spectral_cosine };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::raw_pearson: return "raw_pearson";
    case Provenance::meanfield_filled: return "meanfield_filled";
    case Provenance::amplified: return "amplified";
    case Provenance::spectral_cosine: return "spectral_cosine";
  }
  return "unknown";
}

/// Dense symmetric users x users weights. The diagonal is kept at zero and
/// never enters a prediction.
struct SimilarityMatrix {
  Eigen::MatrixXd weights;
  Provenance provenance = Provenance::raw_pearson;

  std::size_t size() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

/// A predicted vote. `fallback` marks predictions that came from the
/// item mean / global mean / midpoint chain rather than from the method.
struct Prediction {
  double value = 0.0;
  bool fallback = false;
};

/// m(item); global mean when the item has no votes; scale midpoint when the
/// matrix is empty.
inline Prediction predict_item_mean(const RatingMatrix& m, std::size_t /*user*/, std::size_t item) {
  if (auto mean = m.item_mean(item)) return {*mean, false};
  if (auto g = m.global_mean()) return {*g, true};
  return {m.scale().midpoint(), true};
}

/// <v_user>, with the same fallback chain as predict_item_mean.
inline Prediction predict_user_mean(const RatingMatrix& m, std::size_t user, std::size_t /*item*/) {
  if (auto mean = m.user_mean(user)) return {*mean, false};
  if (auto g = m.global_mean()) return {*g, true};
  return {m.scale().midpoint(), true};
}

/// Similarity-weighted deviation from the user's mean:
///
///   v'(j, b) = <v_j> + sum_i S(j, i) (v(i, b) - <v_i>) / sum_i |S(j, i)|
///
/// where i runs over the users other than j who rated b. The result is
/// clamped to the vote scale. When b has no raters, j has no votes, or every
/// rater has zero weight, the item-mean prediction is returned as a fallback.
inline Prediction predict_weighted(const RatingMatrix& m, const SimilarityMatrix& s,
                                   std::size_t user, std::size_t item) {
  const auto raters = m.item_votes(item);
  const auto own_mean = m.user_mean(user);
  if (raters.empty() || !own_mean) return {predict_item_mean(m, user, item).value, true};

  double num = 0.0, denom = 0.0;
  for (const auto& r : raters) {
    if (r.index == user) continue;
    const double w = s(user, r.index);
    num += w * (r.vote - *m.user_mean(r.index));
    denom += std::abs(w);
  }
  if (denom == 0.0) return {predict_item_mean(m, user, item).value, true};
  return {m.scale().clamp(*own_mean + num / denom), false};
}

}  // namespace cflab
