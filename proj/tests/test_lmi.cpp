#include <gtest/gtest.h>

#include <random>

#include "lmswitch/lmi.hpp"
#include "oracles.hpp"

using namespace lmswitch;

namespace {

// A^T P + P A < 0 with P > lower*I.
LmiSystem lyapunov_system(const Mat& a, double lower = 1e-6) {
  const std::size_t n = a.rows();
  auto p = AffineExpr::variable("P", n, n);
  auto expr = a.transpose() * p + p * a;
  return build_system({LmiVar::symmetric("P", n, lower)}, {{"lyap", expr, 0.0}});
}

Mat random_mat(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Mat m(n, n);
  for (double& v : m.data()) v = u(rng);
  return m;
}

}  // namespace

TEST(BuildSystem, ScalarLyapunov) {
  auto sys = build_system({LmiVar::scalar("p", 1e-6)}, {{"c", AffineExpr::scaled("p", Mat{{-2.0}}), 0.0}});
  EXPECT_EQ(sys.unknowns(), 1u);
}

TEST(BuildSystem, UndeclaredVariable) {
  EXPECT_THROW(build_system({LmiVar::scalar("p")}, {{"c", AffineExpr::scaled("Z", Mat{{-1.0}}), 0.0}}), LmiError);
}

TEST(BuildSystem, DimensionMismatch) {
  auto p = AffineExpr::variable("P", 3, 3);
  EXPECT_THROW(build_system({LmiVar::symmetric("P", 2)}, {{"c", p, 0.0}}), DimensionError);
}

TEST(BuildSystem, RejectsNonSymmetric) {
  auto y = AffineExpr::variable("Y", 2, 2);
  EXPECT_THROW(build_system({LmiVar::full("Y", 2, 2)}, {{"c", y, 0.0}}), LmiError);
}

TEST(BuildSystem, ObserverShapeForExampleOne) {
  const Mat a1{{-2, 0.3}, {-2, 1}}, a2{{1, 2}, {-0.3, -4}}, d{{1, 1}, {1, -1}};
  auto om = AffineExpr::variable("Omega", 2, 2);
  std::vector<LmiConstraint> cons;
  for (int i = 0; i < 2; ++i) {
    const std::string y = "Y" + std::to_string(i + 1);
    auto m = om * (i == 0 ? a1 : a2) - AffineExpr::variable(y, 2, 2) * d;
    cons.push_back({"phi" + std::to_string(i + 1), m + m.transpose() + 0.2 * om, 0.0});
  }
  auto sys = build_system({LmiVar::symmetric("Omega", 2, 1e-6), LmiVar::full("Y1", 2, 2), LmiVar::full("Y2", 2, 2)}, cons);
  EXPECT_EQ(sys.unknowns(), 3u + 4u + 4u);
  const auto r = solve(sys);
  ASSERT_TRUE(r.feasible()) << r.message;
  EXPECT_GT(certify(sys, r.assignment), 0.0);
}

TEST(Solve, ScalarStableAndUnstable) {
  auto stable = build_system({LmiVar::scalar("p", 1e-6)}, {{"c", AffineExpr::scaled("p", Mat{{-2.0}}), 0.0}});
  auto r = solve(stable);
  ASSERT_TRUE(r.feasible());
  EXPECT_GT(r.assignment.scalar("p"), 1e-6);
  EXPECT_GT(r.certified_margin, 0.0);

  auto unstable = build_system({LmiVar::scalar("p", 1e-6)}, {{"c", AffineExpr::scaled("p", Mat{{2.0}}), 0.0}});
  EXPECT_FALSE(solve(unstable).feasible());
}

TEST(Solve, TwoByTwoLyapunov) {
  auto sys = lyapunov_system(Mat{{-0.5, 1.15}, {-1.15, -1.5}});
  auto r = solve(sys);
  ASSERT_TRUE(r.feasible()) << r.message;
  EXPECT_TRUE(is_positive_definite(SymMat(r.assignment.at("P"))));
  EXPECT_NEAR(certify(sys, r.assignment), r.certified_margin, 1e-12 * (1 + std::abs(r.certified_margin)));
}

TEST(Solve, FirstFeasibleMode) {
  auto sys = lyapunov_system(Mat{{-0.5, 1.15}, {-1.15, -1.5}});
  SolveOptions opt;
  opt.maximize_margin = false;
  auto r = solve(sys, opt);
  ASSERT_TRUE(r.feasible());
  EXPECT_GT(certify(sys, r.assignment), 0.0);
}

TEST(Solve, Deterministic) {
  auto sys = lyapunov_system(Mat{{-1, 3}, {0, -0.2}});
  auto r1 = solve(sys);
  auto r2 = solve(sys);
  EXPECT_EQ(r1.assignment, r2.assignment);
  EXPECT_EQ(r1.iterations, r2.iterations);
}

TEST(Solve, ScaleSanity) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    Mat a = random_mat(rng, 2);
    a -= Mat::identity(2) * (oracle::abscissa(a) + (k % 2 ? -0.3 : 0.3));
    const bool base = solve(lyapunov_system(a)).feasible();
    for (double c : {1e-3, 1e3}) EXPECT_EQ(solve(lyapunov_system(a * c, 0.0)).feasible(), base) << k << " " << c;
  }
}

TEST(Certify, ScalarAndViolated) {
  auto sys = build_system({LmiVar::scalar("p", 1e-6)}, {{"c", AffineExpr::scaled("p", Mat{{-2.0}}), 0.0}});
  Assignment a;
  a.set_scalar("p", 1.0);
  EXPECT_DOUBLE_EQ(certify(sys, a), 2.0);
  a.set_scalar("p", -1.0);
  EXPECT_DOUBLE_EQ(certify(sys, a), -2.0);
  EXPECT_THROW(certify(sys, Assignment{}), LmiError);
}

TEST(Certify, MarginIsPartOfConstraint) {
  auto sys = build_system({LmiVar::scalar("p", 1e-6)}, {{"c", AffineExpr::scaled("p", Mat{{-2.0}}), 0.5}});
  Assignment a;
  a.set_scalar("p", 1.0);
  EXPECT_DOUBLE_EQ(certify(sys, a), 1.5);
}

TEST(BlockBuilder, MirrorsUpperBlocks) {
  BlockBuilder b({1, 2});
  b.set(0, 0, Mat{{1}});
  b.set(0, 1, AffineExpr::variable("Y", 1, 2));
  b.set(1, 1, -1.0 * AffineExpr::variable("P", 2, 2));
  const AffineExpr e = b.build();
  Assignment a;
  a.set("Y", Mat{{2, 3}});
  a.set("P", Mat{{4, 5}, {5, 6}});
  const Mat v = e.evaluate(a);
  const Mat expected{{1, 2, 3}, {2, -4, -5}, {3, -5, -6}};
  EXPECT_EQ(v, expected);
  EXPECT_THROW(b.set(1, 0, Mat(2, 1)), DimensionError);
}

TEST(Solve, HurwitzAndUnstableSuite) {
  std::mt19937_64 rng(1234);
  for (int k = 0; k < 16; ++k) {
    const std::size_t n = 2 + k % 2;
    const Mat a = random_mat(rng, n);
    const double ab = oracle::abscissa(a);
    const double delta = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const Mat hurwitz = a - Mat::identity(n) * (ab + delta);
    const Mat unstable = a - Mat::identity(n) * (ab - delta);
    auto sh = lyapunov_system(hurwitz);
    auto rh = solve(sh);
    EXPECT_TRUE(rh.feasible()) << k << ": " << rh.message;
    if (rh.feasible()) {
      EXPECT_GT(certify(sh, rh.assignment), 0.0);
    }
    EXPECT_FALSE(solve(lyapunov_system(unstable)).feasible()) << k;
  }
}

TEST(Solve, BoundsAreRespected) {
  auto sys = build_system({LmiVar::symmetric("P", 2, 1.0, 10.0)},
                          {{"c", -1.0 * AffineExpr::variable("P", 2, 2), 0.0}});
  auto r = solve(sys);
  ASSERT_TRUE(r.feasible());
  const auto w = sym_eigenvalues(SymMat(r.assignment.at("P")));
  EXPECT_GT(w.front(), 1.0);
  EXPECT_LE(w.back(), 10.0);
}
