#pragma once

#include <cflab/error.hpp>
#include <cflab/metrics.hpp>
#include <cflab/ratings.hpp>
#include <cflab/similarity.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace cflab {

enum class Kernel {
  quadratic,  // 1 - (d / max d)^2
  gaussian,   // exp(-d^2 / width^2)
};

struct SpectralOptions {
  std::size_t k = 10;
  Kernel kernel = Kernel::quadratic;
  std::optional<double> width;  // gaussian width; max pairwise distance when unset
  bool center_users = false;    // subtract each user's mean after imputation
  double tol = 1e-10;
};

/// Dense users x items votes with EMPTY cells replaced by the item mean
/// (global mean for items without votes, scale midpoint for an empty matrix).
/// With `center_users`, each row then has the user's own mean subtracted.
inline Eigen::MatrixXd fill_empty(const RatingMatrix& m, bool center_users = false) {
  const auto n_users = static_cast<Eigen::Index>(m.n_users());
  const auto n_items = static_cast<Eigen::Index>(m.n_items());
  Eigen::MatrixXd dense(n_users, n_items);
  for (Eigen::Index i = 0; i < n_items; ++i)
    dense.col(i).setConstant(predict_item_mean(m, 0, static_cast<std::size_t>(i)).value);
  for (Eigen::Index u = 0; u < n_users; ++u)
    for (const auto& e : m.user_votes(static_cast<std::size_t>(u)))
      dense(u, static_cast<Eigen::Index>(e.index)) = e.vote;
  if (center_users) {
    for (Eigen::Index u = 0; u < n_users; ++u)
      if (auto mean = m.user_mean(static_cast<std::size_t>(u))) dense.row(u).array() -= *mean;
  }
  return dense;
}

/// Dense symmetric user-user weights in [0, 1] with unit diagonal.
using OverlapMatrix = Eigen::MatrixXd;

/// Pairwise Euclidean distances between the rows of `dense`, computed
/// directly so that identical users are at distance exactly 0.
inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& dense) {
  const Eigen::MatrixXd cols = dense.transpose();
  const auto n = cols.cols();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (cols.col(i) - cols.col(j)).norm();
  return d;
}

inline OverlapMatrix overlap_matrix(const Eigen::MatrixXd& dense, Kernel kernel = Kernel::quadratic,
                                    std::optional<double> width = std::nullopt) {
  if (dense.rows() < 2) throw UsageError("overlap matrix needs at least 2 users");
  const Eigen::MatrixXd d = pairwise_distances(dense);
  const double max_d = d.maxCoeff();
  const auto n = d.rows();
  if (kernel == Kernel::quadratic) {
    if (max_d == 0.0) return OverlapMatrix::Ones(n, n);
    return (1.0 - (d / max_d).array().square()).matrix();
  }
  const double w = width.value_or(max_d);
  if (!(w >= 0.0)) throw UsageError("gaussian kernel width must be non-negative");
  if (w == 0.0) return OverlapMatrix::Ones(n, n);
  return (-(d / w).array().square()).exp().matrix();
}

/// sqrt of the row sums of `omega`: the null vector of its normalized Laplacian.
inline Eigen::VectorXd sqrt_degree(const OverlapMatrix& omega) {
  return omega.rowwise().sum().cwiseSqrt();
}

/// L = D^-1/2 (D - omega) D^-1/2 with D_ii = sum_j omega_ij.
inline Eigen::MatrixXd normalized_laplacian(const OverlapMatrix& omega) {
  const Eigen::VectorXd degree = omega.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw DataError("overlap matrix has a row with zero degree");
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd l = -(inv_sqrt.asDiagonal() * omega * inv_sqrt.asDiagonal());
  l.diagonal().array() += 1.0;
  // Exact symmetry; the triple product can differ in the last bit.
  return 0.5 * (l + l.transpose());
}

struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // one unit-norm column per eigenvalue
  std::vector<double> residuals;
  bool degenerate = false;  // a kept eigenvalue is (numerically) repeated

  std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
};

namespace detail {

/// Flips `v` so that its largest-magnitude entry (first one on ties) is positive.
inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

}  // namespace detail

/// The k smallest eigenpairs of symmetric `l`, ascending, each eigenvector
/// sign-normalized. When `null_vector` is given it is used as the first
/// eigenvector and the rest of a degenerate null space is re-orthogonalized
/// against it. Throws ConvergenceError when a residual |L y - lambda y|
/// exceeds tol |L|.
inline LaplacianSpectrum smallest_eigenpairs(const Eigen::MatrixXd& l, std::size_t k,
                                             double tol = 1e-10,
                                             std::optional<Eigen::VectorXd> null_vector = std::nullopt) {
  const auto n = static_cast<std::size_t>(l.rows());
  if (l.rows() != l.cols()) throw UsageError("eigensolver needs a square matrix");
  if (k < 2 || k > n) {
    std::ostringstream os;
    os << "requested " << k << " eigenpairs of a " << n << "x" << n << " matrix";
    throw UsageError(os.str());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(l);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("symmetric eigensolver did not converge", {});
  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();
  const double norm = std::max(values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double cluster_gap = 1e-8 * std::max(1.0, norm);

  if (null_vector) {
    Eigen::Index c = 1;
    while (c < values.size() && values(c) - values(0) <= cluster_gap) ++c;
    const Eigen::VectorXd q0 = null_vector->normalized();
    if (c > 1) {
      Eigen::MatrixXd rest = vectors.leftCols(c);
      rest -= q0 * (q0.transpose() * rest);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(rest, Eigen::ComputeThinU);
      vectors.block(0, 1, vectors.rows(), c - 1) = svd.matrixU().leftCols(c - 1);
    }
    vectors.col(0) = q0;
    values(0) = q0.dot(l * q0);
  }

  LaplacianSpectrum s;
  const auto kk = static_cast<Eigen::Index>(k);
  s.eigenvalues = values.head(kk);
  s.eigenvectors = vectors.leftCols(kk);
  for (Eigen::Index j = 0; j < kk; ++j) detail::canonical_sign(s.eigenvectors.col(j));
  const auto last = std::min<Eigen::Index>(kk, values.size() - 1);
  for (Eigen::Index j = 0; j < last; ++j)
    if (values(j + 1) - values(j) <= cluster_gap) s.degenerate = true;

  bool ok = true;
  for (Eigen::Index j = 0; j < kk; ++j) {
    const double r = (l * s.eigenvectors.col(j) - s.eigenvalues(j) * s.eigenvectors.col(j)).norm();
    s.residuals.push_back(r);
    if (r > tol * norm) ok = false;
  }
  if (!ok) throw ConvergenceError("eigenpair residuals above tolerance", s.residuals);
  return s;
}

/// Per-user coordinates (y_1(i), ..., y_{k-1}(i)).
inline Eigen::MatrixXd user_embedding(const LaplacianSpectrum& spectrum, std::size_t k) {
  if (k < 2) throw UsageError("embedding dimension k must be at least 2");
  if (k > spectrum.size()) throw UsageError("spectrum holds fewer than k eigenvectors");
  return spectrum.eigenvectors.middleCols(1, static_cast<Eigen::Index>(k) - 1);
}

/// Cosine similarities between user embeddings; the diagonal and every row
/// of a user with a zero embedding are 0.
inline SimilarityMatrix cosine_similarity(const Eigen::MatrixXd& coords) {
  Eigen::MatrixXd unit = coords;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    const double nrm = unit.row(i).norm();
    if (nrm == 0.0)
      unit.row(i).setZero();
    else
      unit.row(i) /= nrm;
  }
  SimilarityMatrix s{unit * unit.transpose(), Provenance::spectral_cosine};
  s.weights = (0.5 * (s.weights + s.weights.transpose())).cwiseMax(-1.0).cwiseMin(1.0);
  s.weights.diagonal().setZero();
  return s;
}

inline SimilarityMatrix embed_and_similarity(const LaplacianSpectrum& spectrum, std::size_t k) {
  return cosine_similarity(user_embedding(spectrum, k));
}

/// Imputation, overlap graph and Laplacian spectrum of `m` with `k` pairs.
inline LaplacianSpectrum rating_spectrum(const RatingMatrix& m, const SpectralOptions& opt,
                                         std::size_t k) {
  const OverlapMatrix omega = overlap_matrix(fill_empty(m, opt.center_users), opt.kernel, opt.width);
  return smallest_eigenpairs(normalized_laplacian(omega), k, opt.tol, sqrt_degree(omega));
}

/// The full pipeline at dimension opt.k.
inline SimilarityMatrix build_spectral_similarity(const RatingMatrix& m, const SpectralOptions& opt = {}) {
  return embed_and_similarity(rating_spectrum(m, opt, opt.k), opt.k);
}

inline Prediction predict_spectral(const RatingMatrix& m, const SimilarityMatrix& s,
                                   std::size_t user, std::size_t item) {
  return predict_weighted(m, s, user, item);
}

struct KSelection {
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, double>> scores;  // (k, holdout MAE) per candidate
};

/// Picks the candidate k with the lowest MAE on a random holdout of the
/// known votes; ties go to the smaller k.
inline KSelection select_k(const RatingMatrix& train, std::span<const std::size_t> candidates,
                           double holdout_fraction = 0.1, std::uint64_t seed = 1,
                           SpectralOptions opt = {}) {
  if (candidates.empty()) throw UsageError("select_k needs at least one candidate");
  std::size_t k_max = 0;
  for (auto k : candidates) {
    if (k < 2 || k > train.n_users())
      throw UsageError("candidate k = " + std::to_string(k) + " outside [2, " +
                       std::to_string(train.n_users()) + "]");
    k_max = std::max(k_max, k);
  }
  if (candidates.size() == 1) return {candidates[0], {}};
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw UsageError("holdout fraction must lie in (0, 1)");

  auto votes = train.ratings();
  std::mt19937_64 rng(seed);
  std::shuffle(votes.begin(), votes.end(), rng);
  const auto n_hold = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(votes.size())));
  if (n_hold == 0 || n_hold >= votes.size())
    throw DataError("not enough training votes to hold out for k selection");

  RatingMatrix fit(train.n_users(), train.n_items(), train.scale());
  for (std::size_t v = n_hold; v < votes.size(); ++v) fit.insert(votes[v]);
  const auto spectrum = rating_spectrum(fit, opt, k_max);
  const double range = train.scale().range() > 0.0 ? train.scale().range() : 1.0;

  KSelection out;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (auto k : sorted) {
    const auto s = embed_and_similarity(spectrum, k);
    std::vector<PredictionPair> pairs;
    pairs.reserve(n_hold);
    for (std::size_t v = 0; v < n_hold; ++v)
      pairs.push_back({predict_weighted(fit, s, votes[v].user, votes[v].item).value, votes[v].vote});
    const double err = mae(pairs, range);
    out.scores.emplace_back(k, err);
    if (err < best) {
      best = err;
      out.k = k;
    }
  }
  return out;
}

struct ClusterDiagnostic {
  std::vector<double> y1;
  std::vector<std::pair<double, double>> y1_y2;
};

/// Components of the first two non-trivial eigenvectors, per user.
inline ClusterDiagnostic cluster_diagnostic(const LaplacianSpectrum& spectrum) {
  if (spectrum.size() < 3) throw UsageError("cluster diagnostic needs 3 eigenvectors");
  ClusterDiagnostic d;
  const auto& y = spectrum.eigenvectors;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    d.y1.push_back(y(i, 1));
    d.y1_y2.emplace_back(y(i, 1), y(i, 2));
  }
  return d;
}

/// `user_index,y1` rows.
inline void write_y1_csv(std::ostream& out, const ClusterDiagnostic& d) {
  out << "user_index,y1\n" << std::setprecision(12);
  for (std::size_t i = 0; i < d.y1.size(); ++i) out << i << ',' << d.y1[i] << '\n';
}

/// `user_index,y1,y2` rows.
inline void write_y1_y2_csv(std::ostream& out, const ClusterDiagnostic& d) {
  out << "user_index,y1,y2\n" << std::setprecision(12);
  for (std::size_t i = 0; i < d.y1_y2.size(); ++i)
    out << i << ',' << d.y1_y2[i].first << ',' << d.y1_y2[i].second << '\n';
}

}  // namespace cflab
