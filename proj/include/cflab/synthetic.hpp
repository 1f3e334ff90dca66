#pragma once

#include <cflab/correlation.hpp>
#include <cflab/error.hpp>
#include <cflab/ingest.hpp>
#include <cflab/ratings.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace cflab {

enum class SeedDistribution { uniform, gaussian };

/// Requested off-diagonal moments of an N x N correlation matrix.
struct CorrelationTarget {
  std::size_t n_users = 250;
  double mean = 0.0;  // mu
  double std = 0.1;   // sigma
  SeedDistribution dist = SeedDistribution::uniform;
  double tol_mean = 0.01;
  double tol_std = 0.02;
  std::size_t max_iter = 200;
  std::uint64_t seed = 1;
};

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and (population) standard deviation of the strict upper triangle.
inline Moments off_diagonal_moments(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      sum += a(i, j);
      ++count;
    }
  if (count == 0) return {};
  const double mean = sum / static_cast<double>(count);
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) sq += (a(i, j) - mean) * (a(i, j) - mean);
  return {mean, std::sqrt(sq / static_cast<double>(count))};
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// Symmetric matrix with unit diagonal whose off-diagonal entries are i.i.d.
/// draws of the seed distribution with the target mean and std.
inline Eigen::MatrixXd seed_symmetric(const CorrelationTarget& t) {
  if (t.std < 0.0) throw UsageError("target std must be non-negative");
  const auto n = static_cast<Eigen::Index>(t.n_users);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  std::mt19937_64 rng(t.seed);
  const double half_width = std::sqrt(3.0) * t.std;
  std::uniform_real_distribution<double> uniform(t.mean - half_width, t.mean + half_width);
  std::normal_distribution<double> gaussian(t.mean, t.std);
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i) {
      double v = t.mean;
      if (t.std > 0.0) v = t.dist == SeedDistribution::uniform ? uniform(rng) : gaussian(rng);
      a(i, j) = a(j, i) = v;
    }
  return a;
}

/// Nearest-correlation style projection: eigendecompose, clip negative
/// eigenvalues to zero, and rescale rows so that B B^T has unit diagonal.
///
///   B = sqrt(T) E sqrt(L'),  T_i = 1 / sum_m E_im^2 L'_m,  C = B B^T
inline Eigen::MatrixXd psd_project(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("eigendecomposition failed in psd_project", {});
  const Eigen::VectorXd clipped = solver.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd& e = solver.eigenvectors();
  const Eigen::VectorXd row_scale = e.cwiseAbs2() * clipped;
  const double floor = 1e-14 * std::max(1.0, clipped.maxCoeff());
  for (Eigen::Index i = 0; i < row_scale.size(); ++i)
    if (row_scale(i) <= floor)
      throw DataError("psd_project: row " + std::to_string(i) + " vanishes after eigenvalue clipping");
  const Eigen::MatrixXd b =
      row_scale.cwiseSqrt().cwiseInverse().asDiagonal() * e * clipped.cwiseSqrt().asDiagonal();
  Eigen::MatrixXd c = b * b.transpose();
  return 0.5 * (c + c.transpose());
}

struct CorrelationResult {
  Eigen::MatrixXd matrix;
  Moments moments;
  double min_eigenvalue = 0.0;
  std::size_t iterations = 0;
};

/// Alternates psd_project with an affine correction of the off-diagonal
/// entries toward the target moments, until the projected matrix is PSD and
/// both moments are within tolerance. Throws ConvergenceError carrying
/// (mean, std, min eigenvalue) of the last iterate otherwise.
inline CorrelationResult valid_correlation_matrix(const CorrelationTarget& t) {
  if (!(t.mean > -1.0 && t.mean < 1.0)) throw UsageError("target mean must lie in (-1, 1)");
  Eigen::MatrixXd a = seed_symmetric(t);
  const auto n = a.rows();
  CorrelationResult r;
  for (std::size_t it = 1; it <= t.max_iter; ++it) {
    r.matrix = psd_project(a);
    r.moments = off_diagonal_moments(r.matrix);
    r.min_eigenvalue = min_eigenvalue(r.matrix);
    r.iterations = it;
    if (std::abs(r.moments.mean - t.mean) <= t.tol_mean &&
        std::abs(r.moments.std - t.std) <= t.tol_std && r.min_eigenvalue >= -1e-8)
      return r;
    // Shift and rescale the off-diagonal part of the projection, starting
    // from the current iterate so that corrections accumulate.
    const double gain = r.moments.std > 0.0 ? t.std / r.moments.std : 1.0;
    for (Eigen::Index j = 1; j < n; ++j)
      for (Eigen::Index i = 0; i < j; ++i) {
        const double v = t.mean + gain * (r.matrix(i, j) - r.moments.mean);
        a(i, j) = a(j, i) = v;
      }
    a.diagonal().setOnes();
  }
  std::ostringstream os;
  os << "correlation matrix did not reach mean " << t.mean << ", std " << t.std << " within "
     << t.max_iter << " iterations (achieved mean " << r.moments.mean << ", std "
     << r.moments.std << ", min eigenvalue " << r.min_eigenvalue << ")";
  throw ConvergenceError(os.str(), {r.moments.mean, r.moments.std, r.min_eigenvalue});
}

enum class VoteMode { unimodal, bimodal };

struct SyntheticVotes {
  Eigen::MatrixXd votes;  // users x items
  VoteMode mode = VoteMode::unimodal;
  std::vector<int> group;  // per user: +1 / -1 in bimodal mode, empty otherwise

  std::size_t n_users() const noexcept { return static_cast<std::size_t>(votes.rows()); }
  std::size_t n_items() const noexcept { return static_cast<std::size_t>(votes.cols()); }
};

/// F with F F^T = C, from the eigendecomposition with negative eigenvalues
/// clipped to 0.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success) throw DataError("covariance factorization failed");
  return solver.eigenvectors() * solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// M items, each a draw of an N-dimensional zero-mean Gaussian with
/// covariance C.
inline SyntheticVotes sample_votes(const Eigen::MatrixXd& c, std::size_t n_items, std::uint64_t seed) {
  const Eigen::MatrixXd f = covariance_factor(c);
  const auto n = c.rows();
  const auto m = static_cast<Eigen::Index>(n_items);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(n, m);
  for (Eigen::Index col = 0; col < m; ++col)
    for (Eigen::Index row = 0; row < n; ++row) z(row, col) = normal(rng);
  return {f * z, VoteMode::unimodal, {}};
}

/// sample_votes with the first half of the users (rounded up) shifted by
/// +offset and the rest by -offset.
inline SyntheticVotes sample_votes_bimodal(const Eigen::MatrixXd& c, std::size_t n_items,
                                           double offset, std::uint64_t seed) {
  if (offset < 0.0) throw UsageError("bimodal offset must be non-negative");
  auto out = sample_votes(c, n_items, seed);
  out.mode = VoteMode::bimodal;
  const auto n = out.votes.rows();
  const auto half = (n + 1) / 2;
  out.group.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = i < half ? 1 : -1;
    out.group[static_cast<std::size_t>(i)] = g;
    out.votes.row(i).array() += g * offset;
  }
  return out;
}

/// Every cell as a triple; the scale is the observed vote range.
inline Dataset to_dataset(const SyntheticVotes& v) {
  Dataset ds;
  ds.n_users = v.n_users();
  ds.n_items = v.n_items();
  ds.scale = {v.votes.minCoeff(), v.votes.maxCoeff()};
  ds.triples.reserve(ds.n_users * ds.n_items);
  for (std::size_t u = 0; u < ds.n_users; ++u)
    for (std::size_t i = 0; i < ds.n_items; ++i)
      ds.triples.push_back(
          {u, i, v.votes(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(i)), std::nullopt});
  return ds;
}

struct CorrelationDistribution {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_pairs = 0;
  std::vector<std::size_t> histogram;  // equal-width bins over [-1, 1]
};

/// Moments and histogram of the pairwise Pearson correlations over the pairs
/// sharing at least `min_overlap` items with non-degenerate variance.
inline CorrelationDistribution correlation_distribution(const RatingMatrix& m,
                                                        std::size_t min_overlap = 3,
                                                        std::size_t bins = 40) {
  if (m.n_users() < 2) throw UsageError("correlation distribution needs at least 2 users");
  if (bins == 0) throw UsageError("histogram needs at least one bin");
  const auto t = pearson_table(m, min_overlap);
  CorrelationDistribution d;
  d.histogram.assign(bins, 0);
  double sum = 0.0;
  const auto n = t.value.rows();
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (t.defined(i, j)) {
        sum += t.value(i, j);
        ++d.n_pairs;
        ++d.histogram[vote_bin(t.value(i, j), {-1.0, 1.0}, bins)];
      }
  if (d.n_pairs == 0) throw UndefinedStatistic("no user pair has enough common items");
  d.mean = sum / static_cast<double>(d.n_pairs);
  double sq = 0.0;
  for (Eigen::Index j = 1; j < n; ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (t.defined(i, j)) sq += (t.value(i, j) - d.mean) * (t.value(i, j) - d.mean);
  d.std = std::sqrt(sq / static_cast<double>(d.n_pairs));
  return d;
}

/// Generator parameters as `key=value` lines.
struct GeneratorRecord {
  CorrelationTarget target;
  std::size_t n_items = 0;
  VoteMode mode = VoteMode::unimodal;
  double offset = 0.0;
  std::uint64_t vote_seed = 0;
  CorrelationResult achieved;
};

inline void write_generator_metadata(std::ostream& out, const GeneratorRecord& g) {
  out << std::setprecision(12);
  out << "users=" << g.target.n_users << '\n'
      << "items=" << g.n_items << '\n'
      << "mu=" << g.target.mean << '\n'
      << "sigma=" << g.target.std << '\n'
      << "dist=" << (g.target.dist == SeedDistribution::uniform ? "uniform" : "gaussian") << '\n'
      << "tol_mean=" << g.target.tol_mean << '\n'
      << "tol_std=" << g.target.tol_std << '\n'
      << "max_iter=" << g.target.max_iter << '\n'
      << "matrix_seed=" << g.target.seed << '\n'
      << "vote_seed=" << g.vote_seed << '\n'
      << "mode=" << (g.mode == VoteMode::bimodal ? "bimodal" : "unimodal") << '\n'
      << "offset=" << g.offset << '\n'
      << "achieved_mean=" << g.achieved.moments.mean << '\n'
      << "achieved_std=" << g.achieved.moments.std << '\n'
      << "achieved_min_eigenvalue=" << g.achieved.min_eigenvalue << '\n'
      << "iterations=" << g.achieved.iterations << '\n';
}

}  // namespace cflab
