#pragma once

// Conversions between the oracle's plain containers and library types.

#include "oracles.hpp"

#include <cflab/ratings.hpp>
#include <cflab/similarity.hpp>

#include <Eigen/Dense>

namespace fixture {

inline cflab::RatingMatrix to_matrix(const oracle::Grid& g, cflab::Scale scale = {1, 5}) {
  cflab::RatingMatrix m(g.size(), g.empty() ? 0 : g[0].size(), scale);
  for (std::size_t u = 0; u < g.size(); ++u)
    for (std::size_t i = 0; i < g[u].size(); ++i)
      if (g[u][i]) m.insert(u, i, *g[u][i]);
  return m;
}

inline oracle::Dense to_dense(const Eigen::MatrixXd& a) {
  oracle::Dense d(static_cast<std::size_t>(a.rows()), std::vector<double>(static_cast<std::size_t>(a.cols())));
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) d[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = a(r, c);
  return d;
}

inline Eigen::MatrixXd to_eigen(const oracle::Dense& d) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.empty() ? 0 : d[0].size()));
  for (std::size_t r = 0; r < d.size(); ++r)
    for (std::size_t c = 0; c < d[r].size(); ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = d[r][c];
  return a;
}

inline cflab::SimilarityMatrix similarity(const oracle::Dense& d) {
  return {to_eigen(d), cflab::Provenance::raw_pearson};
}

}  // namespace fixture
