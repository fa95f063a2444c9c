#include <gtest/gtest.h>

#include <random>

#include "lmswitch/config.hpp"
#include "lmswitch/dwell_design.hpp"
#include "oracles.hpp"

using namespace lmswitch;

namespace {

struct Ex1 {
  ProblemConfig cfg = example1();
  SwitchedPlant plant = cfg.plant();
  DwellCertificate cert = solve_lyapunov_metzler(plant, MetzlerMatrix(cfg.metzler), cfg.zeta, cfg.dwell);
  PFlow flow{plant, cert};
};

const Ex1& ex1() {
  static const Ex1 e;
  return e;
}

double rel_err(const Mat& a, const Mat& ref) { return max_abs_diff(a, ref) / std::max(1e-300, frobenius_norm(ref)); }

}  // namespace

TEST(Metzler, AcceptsExamples) {
  EXPECT_NO_THROW(MetzlerMatrix(example1().metzler));
  EXPECT_NO_THROW(MetzlerMatrix(example2().metzler));
  EXPECT_NO_THROW(MetzlerMatrix(Mat{{0.0}}));
}

TEST(Metzler, RejectsNegativeOffDiagonal) {
  EXPECT_THROW(MetzlerMatrix(Mat{{1, -1}, {1, -1}}), std::invalid_argument);
}

TEST(Metzler, RejectsNonZeroRowSum) {
  EXPECT_THROW(MetzlerMatrix(Mat{{-1, 1.001}, {1, -1}}), std::invalid_argument);
}

TEST(Metzler, RowSumToleranceScalesWithEntries) {
  EXPECT_NO_THROW(MetzlerMatrix(Mat{{-1e6, 1e6 + 1e-7}, {1e6, -1e6}}));
}

TEST(Metzler, RejectsReducible) {
  // Mode 3 is absorbing.
  EXPECT_THROW(MetzlerMatrix(Mat{{-1, 1, 0}, {0, -1, 1}, {0, 0, 0}}), std::invalid_argument);
  EXPECT_FALSE(MetzlerMatrix::irreducible(Mat{{0, 0}, {0, 0}}));
  EXPECT_TRUE(MetzlerMatrix::irreducible(example2().metzler));
}

TEST(ComputeY, ZeroDynamicsNoOutput) {
  const SymMat x(Mat{{2, 0.5}, {0.5, 1}});
  const auto y = compute_y(Mat(2, 2), SymMat(Mat(2, 2)), x, 0.0, 3.0);
  EXPECT_LT(max_abs_diff(y.y1, x), 1e-14);
  EXPECT_LT(frobenius_norm(y.y2), 1e-14);
}

TEST(ComputeY, ConstantIntegrand) {
  const auto y = compute_y(Mat(2, 2), SymMat(Mat::identity(2)), SymMat(Mat::identity(2)), 0.0, 1.0);
  EXPECT_LT(max_abs_diff(y.y1, Mat::identity(2)), 1e-14);
  EXPECT_LT(max_abs_diff(y.y2, Mat::identity(2)), 1e-14);
}

TEST(ComputeY, ExampleOneAgainstSimpson) {
  const auto& e = ex1();
  for (std::size_t j = 0; j < 2; ++j) {
    const Mat& a = e.plant.modes[j].a;
    const auto y = compute_y(a, e.plant.ctc(), e.cert.x[j], 0.1, 0.1);
    const Mat az = a + Mat::identity(2) * 0.1;
    const Mat y2 = oracle::simpson_gram(az, e.plant.ctc(), 0.1, 100000);
    const Mat ez = oracle::taylor_expm(az * 0.1);
    EXPECT_LT(max_abs_diff(y.y2, y2), 1e-8);
    EXPECT_LT(rel_err(y.y1, ez.transpose() * e.cert.x[j].mat() * ez), 1e-10);
    EXPECT_GT(lambda_min(y.y1), 0.0);
    EXPECT_GE(lambda_min(y.y2), -1e-18);
  }
}

TEST(ComputeY, RejectsNonPositiveHorizon) {
  EXPECT_THROW(compute_y(Mat(1, 1), SymMat(Mat(1, 1)), SymMat(Mat{{1.0}}), 0.1, 0.0), std::invalid_argument);
}

TEST(LyapunovMetzler, ExampleOneFeasible) {
  const auto& e = ex1();
  EXPECT_GT(e.cert.lm_margin, 0.0);
  const auto [margin, xmin] = recertify(e.plant, e.cert);
  EXPECT_GT(margin, 0.0);
  EXPECT_GT(xmin, 0.0);
}

TEST(LyapunovMetzler, ExampleTwoFeasible) {
  const auto c = example2();
  const auto cert = solve_lyapunov_metzler(c.plant(), MetzlerMatrix(c.metzler), c.zeta, c.dwell);
  EXPECT_GT(cert.lm_margin, 0.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(lambda_max(lyapunov_metzler_lhs(c.plant(), cert, i)), 0.0);
}

TEST(LyapunovMetzler, SingleModeMatchesHurwitzTest) {
  const Mat c = Mat::identity(2);
  for (const Mat& a : {Mat{{-1, 2}, {0, -3}}, Mat{{-0.05, 1}, {0, -0.05}}, Mat{{0.2, 0}, {0, -1}}}) {
    SwitchedPlant p{{{a, Mat::identity(2), {}}}, c};
    const bool hurwitz = oracle::is_hurwitz(a + Mat::identity(2) * 0.1);
    bool ok = true;
    try {
      solve_lyapunov_metzler(p, MetzlerMatrix(Mat{{0.0}}), 0.1, 1.0);
    } catch (const DesignFailure&) {
      ok = false;
    }
    EXPECT_EQ(ok, hurwitz);
  }
}

TEST(LyapunovMetzler, LargeDecayRateFails) {
  const auto c = example1();
  EXPECT_THROW(solve_lyapunov_metzler(c.plant(), MetzlerMatrix(c.metzler), 30.0, c.dwell), DesignFailure);
}

TEST(LyapunovMetzler, RejectsWrongPiSize) {
  const auto c = example1();
  EXPECT_THROW(solve_lyapunov_metzler(c.plant(), MetzlerMatrix(example2().metzler), 0.1, 0.1), DimensionError);
}

TEST(PFlow, TerminalAndInitialValues) {
  const auto& e = ex1();
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(max_abs_diff(eval_P(e.flow, i, 0.1), e.cert.x[i]), 0.0);
    EXPECT_LT(rel_err(eval_P(e.flow, i, 0.0), e.cert.entry(i)), 1e-12);
  }
}

TEST(PFlow, RejectsOutsideInterval) {
  EXPECT_THROW(eval_P(ex1().flow, 0, -0.01), std::out_of_range);
  EXPECT_THROW(eval_P(ex1().flow, 0, 0.11), std::out_of_range);
  EXPECT_THROW(eval_P(ex1().flow, 2, 0.05), std::out_of_range);
}

TEST(PFlow, MatchesRk4Oracle) {
  const auto& e = ex1();
  for (std::size_t i = 0; i < 2; ++i)
    for (double t : {0.0, 0.025, 0.05, 0.0999}) {
      const Mat ref = oracle::rk4_pflow(e.flow.az(i), e.plant.ctc(), e.cert.x[i], 0.1, t, 10000);
      EXPECT_LT(rel_err(eval_P(e.flow, i, t), ref), 1e-6) << "mode " << i << " t " << t;
    }
}

TEST(PFlow, PositiveDefiniteOnGrid) {
  const auto& e = ex1();
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 0; k <= 1000; ++k) EXPECT_TRUE(is_positive_definite(eval_P(e.flow, i, 0.1 * k / 1000.0)));
}

TEST(PBound, TrivialAndScalarCases) {
  SwitchedPlant p0{{{Mat(2, 2), Mat::identity(2), {}}}, Mat(1, 2)};
  DwellCertificate c0;
  c0.zeta = 0.0;
  c0.dwell = 1.0;
  c0.x = {SymMat(Mat{{3, 1}, {1, 2}})};
  EXPECT_NEAR(p_bound(PFlow(p0, c0), 0), spectral_norm(c0.x[0]), 1e-12);

  SwitchedPlant p1{{{Mat{{-1.0}}, Mat{{1.0}}, {}}}, Mat{{1.0}}};
  DwellCertificate c1;
  c1.zeta = 0.0;
  c1.dwell = 1.0;
  c1.x = {SymMat(Mat{{1.0}})};
  EXPECT_NEAR(p_bound(PFlow(p1, c1), 0), 2.0 * std::exp(2.0), 1e-9);
  EXPECT_NEAR(p_bound(PFlow(p1, c1), 0), 14.778, 1e-3);
}

TEST(PBound, DominatesGrid) {
  const auto& e = ex1();
  for (std::size_t i = 0; i < 2; ++i) {
    const double bound = p_bound(e.flow, i);
    for (int k = 0; k <= 1000; ++k) EXPECT_LE(spectral_norm(eval_P(e.flow, i, 0.1 * k / 1000.0)), bound);
  }
}

TEST(PModulus, VanishesAtZeroAndIncreases) {
  const auto& e = ex1();
  // X is only defined up to scale, so the limit is checked relative to Pbar.
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(p_modulus(e.flow, i, 1e-12), 1e-9 * p_bound(e.flow, i));
  double prev = 0.0;
  for (int k = -12; k <= 0; ++k) {
    const double v = p_modulus(e.flow, 0, std::pow(10.0, k));
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(PModulus, BoundsIncrementsOnRandomPairs) {
  const auto& e = ex1();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ut(0.0, 0.1), um(1e-5, 0.05);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t i = k % 2;
    const double mu = um(rng);
    const double t0 = ut(rng);
    const double t1 = std::min(0.1, t0 + 0.999 * mu * std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    const double diff = spectral_norm(eval_P(e.flow, i, t1) - eval_P(e.flow, i, t0));
    EXPECT_LT(diff, p_modulus(e.flow, i, mu));
  }
}

TEST(GridStencil, MeetsThresholdAndIsMonotone) {
  const auto& e = ex1();
  const auto& m = e.cfg.modes[0];
  const double ld = spectral_norm(*m.gain * m.d);
  const double mu = grid_stencil(e.flow, 0, 1e-4, 1e-6, *m.gain, m.d);
  EXPECT_GT(mu, 0.0);
  EXPECT_LT(p_modulus(e.flow, 0, mu), 1e-4 / (2.0 * (0.1 - 1e-6 + ld)));
  double prev = 0.0;
  for (double eps : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
    const double s = grid_stencil(e.flow, 0, eps, 1e-6, ld);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(GridStencil, AlphaNearZetaEnlargesStencil) {
  const auto& e = ex1();
  const double ld = 1.0;
  const double near = grid_stencil(e.flow, 1, 1e-3, 0.1 - 1e-9, ld);
  const double far = grid_stencil(e.flow, 1, 1e-3, 1e-6, ld);
  EXPECT_GT(near, far);
  EXPECT_LT(p_modulus(e.flow, 1, near), 1e-3 / (2.0 * ld));
}

TEST(GridStencil, RejectsAlphaOutsideRange) {
  EXPECT_THROW(grid_stencil(ex1().flow, 0, 1e-3, 0.2, 1.0), PreconditionError);
  EXPECT_THROW(grid_stencil(ex1().flow, 0, 1e-3, 0.0, 1.0), PreconditionError);
  EXPECT_THROW(grid_stencil(ex1().flow, 0, 0.0, 1e-6, 1.0), PreconditionError);
}
