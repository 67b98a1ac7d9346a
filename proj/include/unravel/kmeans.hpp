#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unravel/errors.hpp"

namespace unravel {

namespace detail {

// Index of the row with lexicographically smallest coordinates, ties by index.
inline Eigen::Index lexicographic_min_row(const Eigen::MatrixXd& points) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < points.rows(); ++i) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      if (points(i, d) < points(best, d)) {
        best = i;
        break;
      }
      if (points(i, d) > points(best, d)) break;
    }
  }
  return best;
}

// Relabels clusters in order of first appearance so equal groupings compare equal.
inline std::vector<int> canonical_labels(const std::vector<int>& assignment) {
  std::vector<int> remap;
  std::vector<int> out(assignment.size());
  int next = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto a = static_cast<std::size_t>(assignment[i]);
    if (a >= remap.size()) remap.resize(a + 1, -1);
    if (remap[a] < 0) remap[a] = next++;
    out[i] = remap[a];
  }
  return out;
}

}  // namespace detail

// Lloyd's k-means with farthest-first seeding. Rows of `points` are the
// observations. The first center is the lexicographically smallest point and
// each further center is the point farthest from the chosen ones (ties by
// index). Empty clusters are repaired by moving in the point farthest from
// its own center. `seed` is accepted for interface stability; the procedure
// itself is deterministic.
inline std::vector<int> kmeans_deterministic(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int max_iter) {
  (void)seed;
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) {
    throw ArgumentError("k-means needs 1 <= k <= points (k=" + std::to_string(k) + ", points=" + std::to_string(n) + ")");
  }

  Eigen::MatrixXd centers(k, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  Eigen::Index next = detail::lexicographic_min_row(points);
  for (int c = 0; c < k; ++c) {
    centers.row(c) = points.row(next);
    chosen[static_cast<std::size_t>(next)] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), (points.row(i) - centers.row(c)).squaredNorm());
    }
    Eigen::Index far = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (chosen[static_cast<std::size_t>(i)]) continue;
      if (far < 0 || nearest(i) > nearest(far)) far = i;
    }
    next = far;
  }

  auto assign = [&](std::vector<int>& labels) {
    std::vector<double> dist(static_cast<std::size_t>(n));
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      labels[static_cast<std::size_t>(i)] = best;
      dist[static_cast<std::size_t>(i)] = best_d;
      ++sizes[static_cast<std::size_t>(best)];
    }
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index donor = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto from = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        if (sizes[from] < 2) continue;
        if (donor < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(donor)]) donor = i;
      }
      // k <= n guarantees a cluster with at least two points while one is empty.
      --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(donor)])];
      labels[static_cast<std::size_t>(donor)] = c;
      dist[static_cast<std::size_t>(donor)] = 0.0;
      sizes[static_cast<std::size_t>(c)] = 1;
      centers.row(c) = points.row(donor);
    }
  };

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  assign(labels);
  std::vector<int> fresh(labels.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    centers.setZero();
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
      ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) centers.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);
    assign(fresh);
    if (fresh == labels) break;
    labels.swap(fresh);
  }
  return labels;
}

}  // namespace unravel
