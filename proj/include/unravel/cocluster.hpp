#pragma once

// Bipartite spectral co-clustering of a rectangular similarity matrix.
//
// Rows and columns are embedded together from the singular vectors of
// A_n = D1^{-1/2} A D2^{-1/2} (D1, D2 the row and column sums) and grouped by
// one k-means run, so every cluster may hold functions from both sides.

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/kmeans.hpp"
#include "unravel/spectral.hpp"

namespace unravel {

struct SingularResult {
  Eigen::VectorXd values;  // descending
  Eigen::MatrixXd left;    // column i pairs with values(i)
  Eigen::MatrixXd right;
};

enum class Side { Row, Col };

struct CoPartition {
  std::vector<FunctionId> labels;
  std::vector<Side> sides;
  std::vector<int> assignment;  // parallel to labels
  int cluster_count = 0;
  std::vector<FunctionId> dropped;  // all-zero rows/columns left out of the clustering

  struct CoCluster {
    std::vector<FunctionId> rows;
    std::vector<FunctionId> cols;
  };

  std::vector<CoCluster> clusters() const {
    std::vector<CoCluster> out(static_cast<std::size_t>(cluster_count));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto& c = out[static_cast<std::size_t>(assignment[i])];
      (sides[i] == Side::Row ? c.rows : c.cols).push_back(labels[i]);
    }
    return out;
  }
};

// Top-m singular triplets, values descending. Each pair (u, v) is flipped so
// the largest-magnitude component of the stacked vector is positive.
inline SingularResult svd_largest(const Eigen::MatrixXd& a, int m) {
  const Eigen::Index limit = std::min(a.rows(), a.cols());
  if (m < 1 || m > limit) throw ArgumentError("singular triplet count out of range: " + std::to_string(m));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SingularResult out{svd.singularValues().head(m), svd.matrixU().leftCols(m), svd.matrixV().leftCols(m)};
  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::VectorXd stacked(out.left.rows() + out.right.rows());
    stacked << out.left.col(c), out.right.col(c);
    Eigen::Index pivot = 0;
    for (Eigen::Index r = 1; r < stacked.size(); ++r) {
      if (std::abs(stacked(r)) > std::abs(stacked(pivot))) pivot = r;
    }
    if (stacked(pivot) < 0.0) {
      out.left.col(c) *= -1.0;
      out.right.col(c) *= -1.0;
    }
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Eigen::Index c = 0; c < m; ++c) {
    worst = std::max(worst, (a * out.right.col(c) - out.values(c) * out.left.col(c)).norm());
  }
  if (worst > 1e-7 * scale * static_cast<double>(std::max<Eigen::Index>(limit, 1))) {
    throw NumericError("singular triplet residual exceeds budget", worst);
  }
  return out;
}

struct Biadjacency {
  Eigen::MatrixXd normalized;          // A_n over kept rows and columns
  Eigen::VectorXd row_degree;          // D1 diagonal
  Eigen::VectorXd col_degree;          // D2 diagonal
  std::vector<std::size_t> kept_rows;  // indices into the input labels
  std::vector<std::size_t> kept_cols;
  std::vector<FunctionId> dropped;
};

inline Biadjacency normalized_biadjacency(const RectSimilarityMatrix& s) {
  const auto& a = s.entries();
  Biadjacency out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a.row(i).sum() > 0.0) {
      out.kept_rows.push_back(static_cast<std::size_t>(i));
    } else {
      out.dropped.push_back(s.row_labels()[static_cast<std::size_t>(i)]);
    }
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (a.col(j).sum() > 0.0) {
      out.kept_cols.push_back(static_cast<std::size_t>(j));
    } else {
      out.dropped.push_back(s.col_labels()[static_cast<std::size_t>(j)]);
    }
  }
  const auto r = static_cast<Eigen::Index>(out.kept_rows.size());
  const auto c = static_cast<Eigen::Index>(out.kept_cols.size());
  Eigen::MatrixXd kept(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      kept(i, j) = a(static_cast<Eigen::Index>(out.kept_rows[i]), static_cast<Eigen::Index>(out.kept_cols[j]));
    }
  }
  out.row_degree = kept.rowwise().sum();
  out.col_degree = kept.colwise().sum().transpose();
  const Eigen::VectorXd row_scale = out.row_degree.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd col_scale = out.col_degree.cwiseSqrt().cwiseInverse();
  out.normalized = row_scale.asDiagonal() * kept * col_scale.asDiagonal();
  return out;
}

// Cluster-count guesses from a descending singular spectrum:
// gap(k) = σ_k - σ_{k+1} for k in [2, n_min-1], largest first, ties to smaller k.
inline std::vector<int> singular_gap_guesses(std::span<const double> singular_values, int q_max, std::size_t n_min,
                                             double tolerance = 1e-9) {
  if (n_min < 3) throw AnalysisError("too few rows or columns for model selection: " + std::to_string(n_min));
  if (singular_values.size() < n_min) throw ArgumentError("singular gap guesses need n_min singular values");
  std::vector<std::pair<int, double>> gaps;
  for (std::size_t k = 2; k + 1 <= n_min; ++k) {
    gaps.emplace_back(static_cast<int>(k), singular_values[k - 1] - singular_values[k]);
  }
  return detail::rank_gaps(gaps, q_max, tolerance);
}

namespace detail {

inline void require_structure(const Eigen::VectorXd& singular_values, double tolerance) {
  if (singular_values.size() < 2 || singular_values(1) <= tolerance * std::max(1.0, singular_values(0))) {
    throw AnalysisError("insufficient structure: normalized co-change matrix has rank < 2");
  }
}

inline CoPartition cocluster_from_biadjacency(const RectSimilarityMatrix& s, const Biadjacency& b, int k,
                                              const AnalysisConfig& config) {
  const auto rows = b.normalized.rows();
  const auto cols = b.normalized.cols();
  const auto limit = static_cast<int>(std::min(rows, cols));
  if (k < 2 || k > limit) {
    throw ArgumentError("co-cluster count " + std::to_string(k) + " outside [2, " + std::to_string(limit) + "]");
  }

  // Deflating the trivial pair (D1^{1/2}1, D2^{1/2}1) / sqrt(total), whose
  // singular value is 1, and taking the leading vectors of what remains
  // discards the first triplet without depending on how a repeated top
  // singular value happens to be resolved.
  const double total = b.row_degree.sum();
  const Eigen::VectorXd u0 = b.row_degree.cwiseSqrt() / std::sqrt(total);
  const Eigen::VectorXd v0 = b.col_degree.cwiseSqrt() / std::sqrt(total);
  const Eigen::MatrixXd deflated = b.normalized - u0 * v0.transpose();
  const int vectors = std::bit_width(static_cast<unsigned>(k - 1));  // ceil(log2 k)
  const auto triplets = svd_largest(deflated, vectors);

  Eigen::MatrixXd points(rows + cols, vectors);
  points.topRows(rows) = b.row_degree.cwiseSqrt().cwiseInverse().asDiagonal() * triplets.left;
  points.bottomRows(cols) = b.col_degree.cwiseSqrt().cwiseInverse().asDiagonal() * triplets.right;
  const auto assignment = canonical_labels(kmeans_deterministic(points, k, config.seed, config.kmeans_max_iter));

  CoPartition out;
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.labels.push_back(s.row_labels()[b.kept_rows[static_cast<std::size_t>(i)]]);
    out.sides.push_back(Side::Row);
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    out.labels.push_back(s.col_labels()[b.kept_cols[static_cast<std::size_t>(j)]]);
    out.sides.push_back(Side::Col);
  }
  out.assignment = assignment;
  out.cluster_count = k;
  out.dropped = b.dropped;
  return out;
}

}  // namespace detail

inline CoPartition cocluster_partition(const RectSimilarityMatrix& s, int k, const AnalysisConfig& config) {
  const auto b = normalized_biadjacency(s);
  const auto limit = static_cast<int>(std::min(b.normalized.rows(), b.normalized.cols()));
  if (k < 2 || k > limit) {
    throw ArgumentError("co-cluster count " + std::to_string(k) + " outside [2, " + std::to_string(limit) + "]");
  }
  const auto spectrum = svd_largest(b.normalized, 2);
  detail::require_structure(spectrum.values, config.eig_tolerance);
  return detail::cocluster_from_biadjacency(s, b, k, config);
}

}  // namespace unravel
