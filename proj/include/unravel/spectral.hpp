#pragma once

// Normalized-cut spectral clustering with spectral-gap model selection.
//
// The affinity graph is embedded with the eigenvectors of the symmetric
// normalized Laplacian L = I - D^{-1/2} S D^{-1/2}; rows of the embedding are
// scaled to unit length and grouped with deterministic k-means.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unravel/core_model.hpp"
#include "unravel/errors.hpp"
#include "unravel/kmeans.hpp"

namespace unravel {

struct SpectrumResult {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // column i pairs with eigenvalue i
};

struct LaplacianResult {
  Eigen::MatrixXd laplacian;           // over the kept labels only
  std::vector<std::size_t> kept;       // indices into the input labels
  std::vector<FunctionId> isolated;    // zero-degree labels, input order
};

struct Partition {
  std::vector<FunctionId> labels;
  std::vector<int> assignment;  // parallel to labels, cluster index in [0, cluster_count)
  int cluster_count = 0;

  // Members of each cluster in label order, indexed by cluster.
  std::vector<std::vector<FunctionId>> clusters() const {
    std::vector<std::vector<FunctionId>> out(static_cast<std::size_t>(cluster_count));
    for (std::size_t i = 0; i < labels.size(); ++i) out[static_cast<std::size_t>(assignment[i])].push_back(labels[i]);
    return out;
  }
};

namespace detail {

// Flips each column so its largest-magnitude component (first on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index pivot = 0;
    for (Eigen::Index r = 1; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > std::abs(vectors(pivot, c))) pivot = r;
    }
    if (vectors(pivot, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

// Walks candidate ks in ascending order; a later k must beat the current best
// by more than `tolerance`, so near-ties go to the smaller k. Gaps within
// `tolerance` of zero separate numerically identical values and are skipped.
inline std::vector<int> rank_gaps(const std::vector<std::pair<int, double>>& gaps, int q_max, double tolerance) {
  std::vector<std::pair<int, double>> pool;
  for (const auto& g : gaps) {
    if (g.second > tolerance) pool.push_back(g);
  }
  std::vector<int> out;
  while (!pool.empty() && static_cast<int>(out.size()) < q_max) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (pool[i].second > pool[best].second + tolerance) best = i;
    }
    out.push_back(pool[best].first);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

}  // namespace detail

inline LaplacianResult normalized_laplacian(const SimilarityMatrix& s) {
  const auto& a = s.entries();
  const Eigen::VectorXd degree = a.rowwise().sum();
  LaplacianResult out;
  for (Eigen::Index i = 0; i < degree.size(); ++i) {
    if (degree(i) > 0.0) {
      out.kept.push_back(static_cast<std::size_t>(i));
    } else {
      out.isolated.push_back(s.labels()[static_cast<std::size_t>(i)]);
    }
  }
  if (out.kept.empty()) throw AnalysisError("no signal: every function has an empty similarity row");

  const auto n = static_cast<Eigen::Index>(out.kept.size());
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt(i) = 1.0 / std::sqrt(degree(static_cast<Eigen::Index>(out.kept[i])));
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto w = a(static_cast<Eigen::Index>(out.kept[i]), static_cast<Eigen::Index>(out.kept[j]));
      l(i, j) -= inv_sqrt(i) * w * inv_sqrt(j);
    }
  }
  out.laplacian = 0.5 * (l + l.transpose());
  return out;
}

// The m smallest eigenpairs of a symmetric matrix, eigenvalues ascending and
// eigenvector signs normalized.
inline SpectrumResult eig_smallest(const Eigen::MatrixXd& l, int m, double tolerance = 1e-9) {
  const Eigen::Index n = l.rows();
  if (l.cols() != n) throw ArgumentError("eigen decomposition needs a square matrix");
  if (m < 1 || m > n) throw ArgumentError("eigenpair count out of range: " + std::to_string(m));
  if (n > 0 && (l - l.transpose()).cwiseAbs().maxCoeff() > tolerance) {
    throw ArgumentError("matrix is not symmetric within tolerance");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(l);
  if (solver.info() != Eigen::Success) {
    throw NumericError("symmetric eigensolver did not converge", std::numeric_limits<double>::infinity());
  }
  SpectrumResult out{solver.eigenvalues().head(m), solver.eigenvectors().leftCols(m)};
  detail::fix_signs(out.eigenvectors);

  const double scale = std::max(1.0, l.cwiseAbs().maxCoeff());
  double worst = 0.0;
  for (Eigen::Index c = 0; c < m; ++c) {
    worst = std::max(worst, (l * out.eigenvectors.col(c) - out.eigenvalues(c) * out.eigenvectors.col(c)).norm());
  }
  if (worst > 1e-7 * scale * static_cast<double>(std::max<Eigen::Index>(n, 1))) {
    throw NumericError("eigenpair residual exceeds budget", worst);
  }
  return out;
}

// Cluster-count guesses from an ascending spectrum: gap(k) = λ_{k+1} - λ_k
// for k in [2, n-1], largest gap first, ties to the smaller k.
inline std::vector<int> spectral_gap_guesses(std::span<const double> eigenvalues, int q_max, std::size_t n,
                                             double tolerance = 1e-9) {
  if (n < 3) throw AnalysisError("target too small for model selection: " + std::to_string(n) + " labels");
  if (eigenvalues.size() < n) throw ArgumentError("spectral gap guesses need all n eigenvalues");
  std::vector<std::pair<int, double>> gaps;
  for (std::size_t k = 2; k + 1 <= n; ++k) gaps.emplace_back(static_cast<int>(k), eigenvalues[k] - eigenvalues[k - 1]);
  return detail::rank_gaps(gaps, q_max, tolerance);
}

namespace detail {

inline Partition ncut_from_spectrum(const SimilarityMatrix& s, const LaplacianResult& lap,
                                    const SpectrumResult& spectrum, int k, const AnalysisConfig& config) {
  const auto n = static_cast<int>(lap.kept.size());
  if (k < 2 || k > n - 1) {
    throw ArgumentError("cluster count " + std::to_string(k) + " outside [2, " + std::to_string(n - 1) + "]");
  }
  Eigen::MatrixXd embedding = spectrum.eigenvectors.leftCols(k);
  for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  auto assignment = canonical_labels(kmeans_deterministic(embedding, k, config.seed, config.kmeans_max_iter));

  Partition out;
  for (std::size_t i = 0; i < lap.kept.size(); ++i) {
    out.labels.push_back(s.labels()[lap.kept[i]]);
    out.assignment.push_back(assignment[i]);
  }
  int next = k;
  for (const auto& id : lap.isolated) {
    out.labels.push_back(id);
    out.assignment.push_back(next++);
  }
  out.cluster_count = next;
  return out;
}

}  // namespace detail

// Groups the non-isolated labels into k clusters; isolated labels are
// appended as singleton clusters k, k+1, ...
inline Partition ncut_partition(const SimilarityMatrix& s, int k, const AnalysisConfig& config) {
  const auto lap = normalized_laplacian(s);
  const auto n = static_cast<int>(lap.kept.size());
  if (k < 2 || k > n - 1) {
    throw ArgumentError("cluster count " + std::to_string(k) + " outside [2, " + std::to_string(n - 1) + "]");
  }
  const auto spectrum = eig_smallest(lap.laplacian, k, config.eig_tolerance);
  return detail::ncut_from_spectrum(s, lap, spectrum, k, config);
}

}  // namespace unravel
