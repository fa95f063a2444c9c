#pragma once

// Observer gains L_i with a common quadratic certificate Omega:
//   U_i = A_i - L_i D_i,   U_i^T Omega + Omega U_i + 2 eta Omega < 0.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmswitch/lmi.hpp"
#include "lmswitch/matnum.hpp"
#include "lmswitch/plant.hpp"

namespace lmswitch {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DesignFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObserverDesign {
  std::vector<Mat> gains;   ///< L_i, n x m_i
  SymMat omega;
  double eta = 0.1;
  std::vector<Mat> u;       ///< U_i = A_i - L_i D_i
  std::vector<Mat> ld;      ///< L_i D_i
  double margin = 0.0;      ///< min_i -lambda_max(Phi_i(eta, Omega))
  std::vector<bool> synthesized;  ///< true where L_i came from the LMI solve
  std::vector<std::string> warnings;

  std::size_t size() const { return gains.size(); }
};

/// Phi_i(eta, Omega) = U^T Omega + Omega U + 2 eta Omega.
inline SymMat phi_matrix(const Mat& u, const SymMat& omega, double eta) {
  return SymMat(u.transpose() * omega.mat() + omega.mat() * u + omega.mat() * (2.0 * eta));
}

namespace detail {

inline void check_observable(const SwitchedPlant& plant) {
  for (std::size_t i = 0; i < plant.size(); ++i) {
    const auto& m = plant.modes[i];
    if (observability_rank(m.a, m.d) < plant.n())
      throw PreconditionError("mode " + std::to_string(i + 1) + ": pair (A, D) is not observable");
  }
}

}  // namespace detail

struct ObserverOptions {
  double omega_max = 1e4;   ///< I <= Omega <= omega_max I
  double gain_bound = 10.0;  ///< spectral bound on synthesised Y_i = Omega L_i
  SolveOptions solver{};
};

/// Synthesises gains for the modes whose entry in `fixed` is empty and keeps
/// the given gains elsewhere; Omega is common to all modes. An empty `fixed`
/// means every gain is synthesised.
inline ObserverDesign design_gains(const SwitchedPlant& plant, double eta,
                                   const std::vector<std::optional<Mat>>& fixed = {},
                                   const ObserverOptions& opt = {}) {
  plant.validate();
  if (!(eta > 0.0)) throw PreconditionError("eta must be positive");
  if (!fixed.empty() && fixed.size() != plant.size())
    throw DimensionError("gain list has " + std::to_string(fixed.size()) + " entries for " +
                         std::to_string(plant.size()) + " modes");
  detail::check_observable(plant);
  const std::size_t n = plant.n();

  std::vector<LmiVar> vars{LmiVar::symmetric("Omega", n, 1.0, opt.omega_max)};
  std::vector<LmiConstraint> cons;
  const auto om = AffineExpr::variable("Omega", n, n);
  for (std::size_t i = 0; i < plant.size(); ++i) {
    const auto& m = plant.modes[i];
    const std::string tag = std::to_string(i + 1);
    const bool given = !fixed.empty() && fixed[i].has_value();
    AffineExpr half;
    if (given) {
      const Mat& l = *fixed[i];
      if (l.rows() != n || l.cols() != m.d.rows())
        throw DimensionError("mode " + tag + ": gain must be " + std::to_string(n) + "x" + std::to_string(m.d.rows()));
      half = om * (m.a - l * m.d);
    } else {
      vars.push_back(LmiVar::full("Y" + tag, n, m.d.rows(), opt.gain_bound));
      half = om * m.a - AffineExpr::variable("Y" + tag, n, m.d.rows()) * m.d;
    }
    cons.push_back({"Phi" + tag, half + half.transpose() + (2.0 * eta) * om, 0.0});
  }

  const auto sys = build_system(vars, cons);
  const auto res = solve(sys, opt.solver);
  if (!res.feasible())
    throw DesignFailure("observer LMIs (eta = " + std::to_string(eta) + ") infeasible or undecided: " + res.message);

  ObserverDesign d;
  d.eta = eta;
  d.omega = SymMat(res.assignment.at("Omega"));
  const auto w = sym_eigenvalues(d.omega);
  if (w.back() > 1e12 * w.front()) d.warnings.push_back("Omega is ill-conditioned (condition number above 1e12)");
  for (std::size_t i = 0; i < plant.size(); ++i) {
    const auto& m = plant.modes[i];
    const bool given = !fixed.empty() && fixed[i].has_value();
    Mat l = given ? *fixed[i] : spd_solve(d.omega, res.assignment.at("Y" + std::to_string(i + 1)));
    d.u.push_back(m.a - l * m.d);
    d.ld.push_back(l * m.d);
    d.gains.push_back(std::move(l));
    d.synthesized.push_back(!given);
  }
  // Certify with the recovered gains, not the solver's Y.
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& u : d.u) margin = std::min(margin, -lambda_max(phi_matrix(u, d.omega, eta)));
  d.margin = margin;
  if (!(margin > 0.0)) throw DesignFailure("recovered observer gains fail re-certification (margin " + std::to_string(margin) + ")");
  return d;
}

struct GainVerification {
  bool ok = false;
  SymMat omega;
  double margin = 0.0;
  std::string message;
};

/// Searches for Omega > 0 certifying the given gains. Does not throw on
/// infeasibility.
inline GainVerification verify_gains(const SwitchedPlant& plant, const std::vector<Mat>& gains, double eta,
                                     const ObserverOptions& opt = {}) {
  std::vector<std::optional<Mat>> fixed(gains.begin(), gains.end());
  if (fixed.size() != plant.size()) throw DimensionError("one gain per mode is required");
  GainVerification v;
  try {
    const auto d = design_gains(plant, eta, fixed, opt);
    v.ok = true;
    v.omega = d.omega;
    v.margin = d.margin;
  } catch (const DesignFailure& e) {
    v.message = e.what();
  }
  return v;
}

/// Largest eta in [lo, hi] (to within `tol`) for which design_gains succeeds.
inline std::optional<double> max_feasible_eta(const SwitchedPlant& plant, const std::vector<std::optional<Mat>>& fixed,
                                              double lo, double hi, double tol = 1e-3) {
  auto ok = [&](double eta) {
    try {
      design_gains(plant, eta, fixed);
      return true;
    } catch (const DesignFailure&) {
      return false;
    }
  };
  if (!ok(lo)) return std::nullopt;
  if (ok(hi)) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace lmswitch
