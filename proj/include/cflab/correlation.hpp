#pragma once

#include <cflab/ratings.hpp>
#include <cflab/similarity.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace cflab {

/// Which mean is subtracted from a user's votes before correlating them.
enum class Centering {
  global,   // mean over all of the user's votes
  overlap,  // mean over the items the pair has in common
};

struct CorrelationOptions {
  std::size_t min_overlap = 3;  // n_c
  double gamma = 1.0;           // case-amplification exponent
  bool mean_field = true;       // replace unknown (zero) correlations by their population mean
  Centering centering = Centering::global;
};

namespace detail {

/// Overlap sums below this are treated as zero variance.
inline double variance_floor(const Scale& scale, double n_overlap) {
  const double r = scale.range();
  return 1e-24 * r * r * n_overlap;
}

inline std::optional<double> correlation_from_sums(double cross, double sq_i, double sq_j,
                                                   double n_overlap, std::size_t min_overlap,
                                                   const Scale& scale) {
  if (n_overlap < static_cast<double>(std::max<std::size_t>(min_overlap, 2))) return std::nullopt;
  const double floor = variance_floor(scale, n_overlap);
  if (sq_i <= floor || sq_j <= floor) return std::nullopt;
  return std::clamp(cross / std::sqrt(sq_i * sq_j), -1.0, 1.0);
}

}  // namespace detail

/// Pearson correlation of users i and j over their commonly rated items, or
/// nothing when the pair shares fewer than `min_overlap` items (never fewer
/// than 2) or either centered vote vector on the overlap has zero variance.
inline std::optional<double> pearson_if_defined(const RatingMatrix& m, std::size_t i,
                                                std::size_t j, std::size_t min_overlap = 3,
                                                Centering centering = Centering::global) {
  auto short_user = i, long_user = j;
  if (m.user_count(i) > m.user_count(j)) std::swap(short_user, long_user);
  // (vote of short_user, vote of long_user) on each common item.
  std::vector<std::pair<double, double>> common;
  for (const auto& e : m.user_votes(short_user))
    if (auto other = m.vote(long_user, e.index)) common.emplace_back(e.vote, *other);
  if (common.size() < std::max<std::size_t>(min_overlap, 2)) return std::nullopt;
  const double n = static_cast<double>(common.size());

  double mean_a = 0.0, mean_b = 0.0;
  if (centering == Centering::global) {
    mean_a = *m.user_mean(short_user);
    mean_b = *m.user_mean(long_user);
  } else {
    for (const auto& [x, y] : common) {
      mean_a += x;
      mean_b += y;
    }
    mean_a /= n;
    mean_b /= n;
  }
  double cross = 0.0, sq_a = 0.0, sq_b = 0.0;
  for (const auto& [x, y] : common) {
    cross += (x - mean_a) * (y - mean_b);
    sq_a += (x - mean_a) * (x - mean_a);
    sq_b += (y - mean_b) * (y - mean_b);
  }
  return detail::correlation_from_sums(cross, sq_a, sq_b, n, min_overlap, m.scale());
}

/// Pearson correlation with 0 standing for "unknown".
inline double pearson(const RatingMatrix& m, std::size_t i, std::size_t j,
                      std::size_t min_overlap = 3, Centering centering = Centering::global) {
  return pearson_if_defined(m, i, j, min_overlap, centering).value_or(0.0);
}

/// All pairwise correlations. `defined(i, j)` tells whether the pair
/// qualified; undefined pairs and the diagonal hold 0.
struct PearsonTable {
  Eigen::MatrixXd value;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> defined;
};

inline PearsonTable pearson_table(const RatingMatrix& m, std::size_t min_overlap = 3,
                                  Centering centering = Centering::global) {
  const auto n_users = static_cast<Eigen::Index>(m.n_users());
  const auto n_items = static_cast<Eigen::Index>(m.n_items());
  PearsonTable t{Eigen::MatrixXd::Zero(n_users, n_users),
                 Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n_users, n_users, false)};

  if (centering == Centering::overlap) {
    for (Eigen::Index i = 0; i < n_users; ++i)
      for (Eigen::Index j = i + 1; j < n_users; ++j) {
        if (auto c = pearson_if_defined(m, static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                        min_overlap, centering)) {
          t.value(i, j) = t.value(j, i) = *c;
          t.defined(i, j) = t.defined(j, i) = true;
        }
      }
    return t;
  }

  // Globally centered votes vanish on EMPTY cells, so every overlap-restricted
  // sum is a matrix product with the 0/1 mask.
  Eigen::MatrixXd centered = Eigen::MatrixXd::Zero(n_users, n_items);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n_users, n_items);
  for (Eigen::Index u = 0; u < n_users; ++u) {
    const auto mean = m.user_mean(static_cast<std::size_t>(u));
    for (const auto& e : m.user_votes(static_cast<std::size_t>(u))) {
      const auto item = static_cast<Eigen::Index>(e.index);
      centered(u, item) = e.vote - *mean;
      mask(u, item) = 1.0;
    }
  }
  const Eigen::MatrixXd squared = centered.cwiseProduct(centered);

  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index r0 = 0; r0 < n_users; r0 += kBlock) {
    const auto rows = std::min(kBlock, n_users - r0);
    const Eigen::MatrixXd counts = mask.middleRows(r0, rows) * mask.transpose();
    const Eigen::MatrixXd cross = centered.middleRows(r0, rows) * centered.transpose();
    const Eigen::MatrixXd sq_row = squared.middleRows(r0, rows) * mask.transpose();
    const Eigen::MatrixXd sq_col = mask.middleRows(r0, rows) * squared.transpose();
    for (Eigen::Index a = 0; a < rows; ++a) {
      const auto i = r0 + a;
      for (Eigen::Index j = i + 1; j < n_users; ++j) {
        if (auto c = detail::correlation_from_sums(cross(a, j), sq_row(a, j), sq_col(a, j),
                                                   counts(a, j), min_overlap, m.scale())) {
          t.value(i, j) = t.value(j, i) = *c;
          t.defined(i, j) = t.defined(j, i) = true;
        }
      }
    }
  }
  return t;
}

/// Replaces every exact-zero off-diagonal weight by the mean of the nonzero
/// off-diagonal weights (0 if there are none).
inline void apply_mean_field(SimilarityMatrix& s) {
  auto& w = s.weights;
  const auto n = w.rows();
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (w(i, j) != 0.0) {
        sum += w(i, j);
        ++count;
      }
  const double fill = count == 0 ? 0.0 : sum / static_cast<double>(count);
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (w(i, j) == 0.0) w(i, j) = w(j, i) = fill;
  s.provenance = Provenance::meanfield_filled;
}

/// Case amplification: w -> sign(w) |w|^gamma off the diagonal.
inline void apply_amplification(SimilarityMatrix& s, double gamma) {
  auto& w = s.weights;
  const auto n = w.rows();
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      const double v = w(i, j);
      w(i, j) = w(j, i) = std::copysign(std::pow(std::abs(v), gamma), v);
    }
  s.provenance = Provenance::amplified;
}

/// Pearson similarities, then the mean-field fill, then case amplification
/// (skipped at gamma = 1).
inline SimilarityMatrix build_similarity(const RatingMatrix& m, const CorrelationOptions& opt = {}) {
  SimilarityMatrix s{pearson_table(m, opt.min_overlap, opt.centering).value, Provenance::raw_pearson};
  if (opt.mean_field) apply_mean_field(s);
  if (opt.gamma != 1.0) apply_amplification(s, opt.gamma);
  return s;
}

/// Raw Pearson similarities: no fill, no amplification.
inline SimilarityMatrix raw_similarity(const RatingMatrix& m, std::size_t min_overlap = 3,
                                       Centering centering = Centering::global) {
  return {pearson_table(m, min_overlap, centering).value, Provenance::raw_pearson};
}

inline Prediction predict_correlation(const RatingMatrix& m, const SimilarityMatrix& s,
                                      std::size_t user, std::size_t item) {
  return predict_weighted(m, s, user, item);
}

}  // namespace cflab
