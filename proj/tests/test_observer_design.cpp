#include <gtest/gtest.h>

#include "lmswitch/config.hpp"
#include "lmswitch/observer_design.hpp"
#include "oracles.hpp"

using namespace lmswitch;

namespace {

SwitchedPlant ex1_plant() { return example1().plant(); }

std::vector<Mat> given_gains(const ProblemConfig& c) {
  std::vector<Mat> g;
  for (const auto& m : c.modes) g.push_back(*m.gain);
  return g;
}

}  // namespace

TEST(DesignGains, AlreadyStableSingleMode) {
  SwitchedPlant p{{{-Mat::identity(2), Mat::identity(2), {}}}, Mat::identity(2)};
  const auto d = design_gains(p, 0.5);
  EXPECT_GT(d.margin, 0.0);
  // L = 0 with Omega = I is admissible: Phi = -Omega.
  const auto v = verify_gains(p, {Mat(2, 2)}, 0.5);
  EXPECT_TRUE(v.ok) << v.message;
}

TEST(DesignGains, ExampleOneSynthesised) {
  const auto d = design_gains(ex1_plant(), 0.1);
  ASSERT_EQ(d.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(d.synthesized[i]);
    EXPECT_EQ(max_abs_diff(d.u[i], ex1_plant().modes[i].a - d.gains[i] * ex1_plant().modes[i].d), 0.0);
    EXPECT_LT(lambda_max(phi_matrix(d.u[i], d.omega, 0.1)), 0.0);
    // Rate-eta stability: U_i + eta I is Hurwitz.
    EXPECT_LE(oracle::abscissa(d.u[i]), -0.1 + 1e-6);
  }
  EXPECT_GT(lambda_min(d.omega), 0.0);
}

TEST(DesignGains, UnobservablePairNamesMode) {
  SwitchedPlant p = ex1_plant();
  p.modes[1].d = Mat{{1, 0}, {0, 0}};
  p.modes[1].a = Mat{{-1, 0}, {0, -1}};  // x2 never reaches the output
  try {
    design_gains(p, 0.1);
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("mode 2"), std::string::npos);
  }
}

TEST(DesignGains, ZeroOutputRowIsUnobservable) {
  SwitchedPlant p{{{Mat{{0, 1}, {0, 0}}, Mat{{0, 0}}, {}}}, Mat::identity(2)};
  EXPECT_THROW(design_gains(p, 0.1), PreconditionError);
}

TEST(DesignGains, RejectsNonPositiveEta) { EXPECT_THROW(design_gains(ex1_plant(), 0.0), PreconditionError); }

TEST(DesignGains, GainListSizeMismatch) {
  EXPECT_THROW(design_gains(ex1_plant(), 0.1, {std::optional<Mat>(Mat(2, 2))}), DimensionError);
}

TEST(VerifyGains, ExampleOneCorrectedGains) {
  const auto v = verify_gains(ex1_plant(), given_gains(example1()), 0.1);
  ASSERT_TRUE(v.ok) << v.message;
  EXPECT_GT(v.margin, 0.0);
}

TEST(VerifyGains, ExampleOnePrintedFirstGainFails) {
  const auto c = example1(true);
  // A1 - L1 D is not Hurwitz for the printed L1, so no Omega can exist.
  EXPECT_FALSE(oracle::is_hurwitz(c.modes[0].a - *c.modes[0].gain * c.modes[0].d));
  EXPECT_FALSE(verify_gains(c.plant(), given_gains(c), 0.1).ok);
}

TEST(VerifyGains, ExampleTwoPrintedGainsModesOneTwo) {
  const auto c = example2();
  SwitchedPlant p = c.plant();
  p.modes.pop_back();
  const auto v = verify_gains(p, {*c.modes[0].gain, *c.modes[1].gain}, 0.1);
  EXPECT_TRUE(v.ok) << v.message;
}

TEST(VerifyGains, UnstableErrorDynamicsFail) {
  SwitchedPlant p{{{Mat{{1.0}}, Mat{{1.0}}, {}}}, Mat{{1.0}}};
  EXPECT_FALSE(verify_gains(p, {Mat{{0.5}}}, 0.1).ok);  // U = 0.5
}

TEST(VerifyGains, ScalingOmegaKeepsVerdict) {
  const auto v = verify_gains(ex1_plant(), given_gains(example1()), 0.1);
  ASSERT_TRUE(v.ok);
  const auto d = design_gains(ex1_plant(), 0.1, example1().gains());
  for (double c : {1e-3, 1.0, 7.5, 1e3})
    for (const auto& u : d.u) EXPECT_LT(lambda_max(phi_matrix(u, v.omega * c, 0.1)), 0.0);
}

TEST(DesignGains, ExampleTwoSynthesisesThirdGain) {
  const auto c = example2();
  const auto d = design_gains(c.plant(), c.eta, c.gains(), c.observer_options());
  EXPECT_FALSE(d.synthesized[0]);
  EXPECT_FALSE(d.synthesized[1]);
  EXPECT_TRUE(d.synthesized[2]);
  EXPECT_TRUE(oracle::is_hurwitz(d.u[2]));
  EXPECT_GT(d.margin, 0.0);
}

TEST(DesignGains, RoundTripThroughVerification) {
  const auto d = design_gains(ex1_plant(), 0.1);
  const auto v = verify_gains(ex1_plant(), d.gains, 0.1);
  ASSERT_TRUE(v.ok) << v.message;
  EXPECT_GT(v.margin, d.margin / 10.0);
}

TEST(MaxFeasibleEta, BracketsTheAbscissa) {
  // Scalar mode with fixed gain: U = -2, so any eta < 2 is feasible.
  SwitchedPlant p{{{Mat{{-1.0}}, Mat{{1.0}}, {}}}, Mat{{1.0}}};
  const auto eta = max_feasible_eta(p, {Mat{{1.0}}}, 0.1, 5.0, 1e-3);
  ASSERT_TRUE(eta.has_value());
  EXPECT_NEAR(*eta, 2.0, 0.01);
  EXPECT_LE(*eta, 2.0);
}
