#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kilab/geometry_rng.hpp"

using namespace kilab;

TEST(SeedPath, SamePathSameStream) {
  const SeedPath a(7, {1, 2});
  const SeedPath b = SeedPath(7).child(1).child(2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.key(), b.key());
  auto ea = a.engine();
  auto eb = b.engine();
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ea(), eb());
}

TEST(SeedPath, DistinctPathsDiffer) {
  const SeedPath root(7);
  EXPECT_NE(root.child(1).key(), root.child(2).key());
  EXPECT_NE(root.child(1).child(2).key(), root.child(2).child(1).key());
  EXPECT_NE(SeedPath(7).key(), SeedPath(8).key());
  EXPECT_NE(root.child(Purpose::design_points).key(), root.child(Purpose::noise).key());
}

TEST(SeedPath, ToString) { EXPECT_EQ(SeedPath(42, {3, 1}).to_string(), "42/3/1"); }

TEST(SampleSphere, ThreePointsOnS2AreUnit) {
  const auto pts = sample_sphere(2, 3, SeedPath(1));
  ASSERT_EQ(pts.coordinates.rows(), 3);
  ASSERT_EQ(pts.coordinates.cols(), 3);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(pts.coordinates.row(i).norm(), 1.0, 1e-12);
}

TEST(SampleSphere, RowNormsAcrossDimensions) {
  for (int d : {1, 3, 17, 64}) {
    const auto pts = sample_sphere(d, 2000, SeedPath(5, {static_cast<std::uint64_t>(d)}));
    const Eigen::VectorXd norms = pts.coordinates.rowwise().norm();
    EXPECT_LT((norms.array() - 1.0).abs().maxCoeff(), 1e-12) << "d=" << d;
  }
}

TEST(SampleSphere, CoordinateMeansNearZero) {
  const auto pts = sample_sphere(5, 10000, SeedPath(11));
  const Eigen::RowVectorXd mean = pts.coordinates.colwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 4.0 / std::sqrt(10000.0));
}

TEST(SampleSphere, SquaredInnerProductMoment) {
  const int d = 3;
  const auto pts = sample_sphere(d, 10000, SeedPath(12));
  // disjoint pairs (2i, 2i+1)
  const Eigen::Index pairs = 5000;
  Eigen::VectorXd t2(pairs);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    const double t = pts.coordinates.row(2 * i).dot(pts.coordinates.row(2 * i + 1));
    t2(i) = t * t;
  }
  const double mean = t2.mean();
  const double sd = std::sqrt((t2.array() - mean).square().sum() / (pairs - 1));
  EXPECT_NEAR(mean, 1.0 / (d + 1), 3.0 * sd / std::sqrt(static_cast<double>(pairs)));
}

TEST(SampleSphere, Deterministic) {
  const auto a = sample_sphere(6, 50, SeedPath(3, {9}));
  const auto b = sample_sphere(6, 50, SeedPath(3, {9}));
  EXPECT_TRUE(a.coordinates == b.coordinates);
}

TEST(SampleSphere, RejectsDegenerateArguments) {
  EXPECT_THROW(sample_sphere(0, 5, SeedPath(1)), UsageError);
  EXPECT_THROW(sample_sphere(3, 0, SeedPath(1)), UsageError);
}

TEST(SpherePoints, GramHasUnitDiagonal) {
  const auto pts = sample_sphere(4, 20, SeedPath(2));
  const Eigen::MatrixXd g = pts.gram();
  for (Eigen::Index i = 0; i < 20; ++i) EXPECT_EQ(g(i, i), 1.0);
  EXPECT_TRUE(g.isApprox(g.transpose()));
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1.0);
}

TEST(SampleNoise, ZeroVarianceIsZero) {
  const auto e = sample_noise(5, 0.0, SeedPath(1));
  EXPECT_EQ(e.size(), 5);
  EXPECT_TRUE(e.isZero(0.0));
}

TEST(SampleNoise, UnitVariance) {
  const auto e = sample_noise(100000, 1.0, SeedPath(21));
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / (e.size() - 1);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleNoise, MeanNearZero) {
  const auto e = sample_noise(100000, 0.25, SeedPath(22));
  EXPECT_LT(std::abs(e.mean()), 4.0 * 0.5 / std::sqrt(1e5));
}

TEST(SampleNoise, NegativeVarianceRejected) { EXPECT_THROW(sample_noise(3, -1.0, SeedPath(1)), UsageError); }

TEST(SampleDirection, UnitAndDeterministic) {
  const auto w = sample_direction(9, SeedPath(4));
  EXPECT_EQ(w.size(), 10);
  EXPECT_NEAR(w.norm(), 1.0, 1e-12);
  EXPECT_TRUE(w == sample_direction(9, SeedPath(4)));
}
