#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "unravel/cocluster.hpp"

namespace unravel {
namespace {

std::set<std::set<FunctionId>> grouped(const CoPartition& p) {
  std::vector<std::vector<FunctionId>> groups;
  for (const auto& c : p.clusters()) {
    auto all = c.rows;
    all.insert(all.end(), c.cols.begin(), c.cols.end());
    groups.push_back(all);
  }
  return oracle::as_sets(groups);
}

RectSimilarityMatrix example_blocks() {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 4);
  m.block(0, 0, 2, 2).setOnes();
  m.block(2, 2, 1, 2).setOnes();
  return RectSimilarityMatrix({"t1", "t2", "t3"}, {"c1", "c2", "c3", "c4"}, m);
}

TEST(CoclusterPartition, RecoversExampleBlocks) {
  AnalysisConfig config;
  const auto p = cocluster_partition(example_blocks(), 2, config);
  EXPECT_EQ(grouped(p), (std::set<std::set<FunctionId>>{{"t1", "t2", "c1", "c2"}, {"t3", "c3", "c4"}}));
  EXPECT_TRUE(p.dropped.empty());
}

TEST(CoclusterPartition, UniformMatrixHasNoStructure) {
  AnalysisConfig config;
  const RectSimilarityMatrix ones({"t1", "t2", "t3"}, {"c1", "c2", "c3"}, Eigen::MatrixXd::Ones(3, 3));
  try {
    cocluster_partition(ones, 2, config);
    FAIL() << "expected AnalysisError";
  } catch (const AnalysisError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient structure"), std::string::npos);
  }
}

TEST(CoclusterPartition, KOutOfRange) {
  AnalysisConfig config;
  EXPECT_THROW(cocluster_partition(example_blocks(), 4, config), ArgumentError);
  EXPECT_THROW(cocluster_partition(example_blocks(), 1, config), ArgumentError);
}

TEST(CoclusterPartition, ZeroRowsAndColumnsAreDropped) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 5);
  m.block(0, 0, 2, 2).setOnes();
  m.block(2, 2, 1, 2).setOnes();
  AnalysisConfig config;
  const auto p = cocluster_partition(RectSimilarityMatrix({"t1", "t2", "t3", "t4"}, {"c1", "c2", "c3", "c4", "c5"}, m),
                                     2, config);
  EXPECT_EQ(p.dropped, (std::vector<FunctionId>{"t4", "c5"}));
  EXPECT_EQ(grouped(p), (std::set<std::set<FunctionId>>{{"t1", "t2", "c1", "c2"}, {"t3", "c3", "c4"}}));
}

TEST(CoclusterPartition, FourNoisyBlocks) {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(0.0, 0.08);
  const int r = 12, c = 16;
  Eigen::MatrixXd m(r, c);
  std::vector<FunctionId> rows, cols;
  for (int i = 0; i < r; ++i) rows.push_back("t" + std::to_string(10 + i));
  for (int j = 0; j < c; ++j) cols.push_back("c" + std::to_string(10 + j));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = (i / 3 == j / 4) ? 0.9 : u(rng);
  }
  AnalysisConfig config;
  const auto p = cocluster_partition(RectSimilarityMatrix(rows, cols, m), 4, config);
  std::set<std::set<FunctionId>> want;
  for (int b = 0; b < 4; ++b) {
    std::set<FunctionId> g;
    for (int i = 0; i < 3; ++i) g.insert(rows[static_cast<std::size_t>(3 * b + i)]);
    for (int j = 0; j < 4; ++j) g.insert(cols[static_cast<std::size_t>(4 * b + j)]);
    want.insert(g);
  }
  EXPECT_EQ(grouped(p), want);
}

TEST(SingularGapGuesses, HandComputedGaps) {
  const std::vector<double> sigma{1.0, 0.9, 0.85, 0.2, 0.1};
  EXPECT_EQ(singular_gap_guesses(sigma, 3, 5), (std::vector<int>{3, 4, 2}));
}

TEST(SingularGapGuesses, EqualGapsAndTooSmall) {
  const std::vector<double> sigma{1.0, 0.8, 0.6, 0.4, 0.2, 0.0};
  EXPECT_EQ(singular_gap_guesses(sigma, 3, 6), (std::vector<int>{2, 3, 4}));
  EXPECT_THROW(singular_gap_guesses(sigma, 3, 2), AnalysisError);
}

TEST(SingularGapGuesses, TwoPerfectBlocksPickTwo) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
  m.block(0, 0, 2, 2).setOnes();
  m.block(2, 2, 2, 2).setOnes();
  const auto b = normalized_biadjacency(RectSimilarityMatrix({"t1", "t2", "t3", "t4"}, {"c1", "c2", "c3", "c4"}, m));
  const auto s = svd_largest(b.normalized, 4);
  EXPECT_NEAR(s.values(1), 1.0, 1e-12);
  EXPECT_NEAR(s.values(2), 0.0, 1e-12);
  const std::vector<double> sigma(s.values.data(), s.values.data() + 4);
  EXPECT_EQ(singular_gap_guesses(sigma, 3, 4).at(0), 2);
}

TEST(SvdLargest, RandomRectangularResiduals) {
  std::mt19937_64 rng(59);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const int r = 1 + static_cast<int>(rng() % 25);
    const int c = 1 + static_cast<int>(rng() % 25);
    Eigen::MatrixXd a(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) a(i, j) = g(rng);
    }
    const int m = std::min(r, c);
    const auto s = svd_largest(a, m);
    for (int k = 0; k < m; ++k) {
      EXPECT_LE((a * s.right.col(k) - s.values(k) * s.left.col(k)).norm(), 1e-7);
      EXPECT_LE((a.transpose() * s.left.col(k) - s.values(k) * s.right.col(k)).norm(), 1e-7);
      if (k + 1 < m) {
        EXPECT_GE(s.values(k), s.values(k + 1));
      }
    }
  }
  EXPECT_THROW(svd_largest(Eigen::MatrixXd::Ones(2, 3), 3), ArgumentError);
}

}  // namespace
}  // namespace unravel
