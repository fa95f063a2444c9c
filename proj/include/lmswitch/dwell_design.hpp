#pragma once

// Lyapunov-Metzler dwell-time certificates and the time-varying matrices
//   P_i(t) = e^{Az_i^T (T-t)} X_i e^{Az_i (T-t)} + int_0^{T-t} e^{Az_i^T s} C^T C e^{Az_i s} ds,
// with Az_i = A_i + zeta I, together with the continuity bounds that justify
// checking time-dependent LMIs on a finite grid.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmswitch/lmi.hpp"
#include "lmswitch/matnum.hpp"
#include "lmswitch/observer_design.hpp"
#include "lmswitch/plant.hpp"

namespace lmswitch {

class MetzlerMatrix {
 public:
  MetzlerMatrix() = default;
  /// Validates sign pattern, zero row sums and irreducibility.
  explicit MetzlerMatrix(Mat pi) : pi_(std::move(pi)) { validate(); }

  std::size_t dim() const { return pi_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return pi_(i, j); }
  const Mat& mat() const { return pi_; }

  /// True when the directed graph i -> j (Pi_ij > 0, i != j) is strongly
  /// connected.
  static bool irreducible(const Mat& pi) {
    const std::size_t n = pi.rows();
    if (n <= 1) return true;
    // Tarjan's algorithm; irreducible iff a single component covers all nodes.
    std::vector<int> index(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    int counter = 0;
    std::size_t components = 0;
    std::function<void(std::size_t)> visit = [&](std::size_t v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      for (std::size_t w = 0; w < n; ++w) {
        if (w == v || !(pi(v, w) > 0.0)) continue;
        if (index[w] < 0) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        ++components;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
        } while (w != v);
      }
    };
    for (std::size_t v = 0; v < n; ++v)
      if (index[v] < 0) visit(v);
    return components == 1;
  }

 private:
  void validate() const {
    if (!pi_.square() || pi_.rows() == 0) throw std::invalid_argument("Metzler matrix must be square and non-empty");
    if (!pi_.all_finite()) throw std::invalid_argument("Metzler matrix has non-finite entries");
    const std::size_t n = pi_.rows();
    double scale = 0.0;
    for (double v : pi_.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && pi_(i, j) < 0.0)
          throw std::invalid_argument("Metzler matrix has negative off-diagonal entry (" + std::to_string(i + 1) + "," +
                                      std::to_string(j + 1) + ")");
        sum += pi_(i, j);
      }
      if (std::abs(sum) > 1e-12 * std::max(scale, 1.0))
        throw std::invalid_argument("Metzler matrix row " + std::to_string(i + 1) + " does not sum to zero");
    }
    if (!irreducible(pi_)) throw std::invalid_argument("Metzler matrix is reducible");
  }

  Mat pi_;
};

struct YTerms {
  SymMat y1;
  SymMat y2;
};

/// Y1 = e^{Az^T T} X e^{Az T}, Y2 = int_0^T e^{Az^T s} C^T C e^{Az s} ds.
inline YTerms compute_y(const Mat& a, const SymMat& ctc, const SymMat& x, double zeta, double t) {
  if (x.dim() != a.rows() || ctc.dim() != a.rows()) throw DimensionError("compute_y shape mismatch");
  if (!(t > 0.0)) throw std::invalid_argument("compute_y: T must be positive");
  const Mat az = a + Mat::identity(a.rows()) * zeta;
  const auto eg = exp_gram(az, ctc, t);
  return {congruence(eg.exp, x), eg.gram};
}

struct DwellCertificate {
  MetzlerMatrix pi;
  double zeta = 0.1;
  double dwell = 0.1;
  std::vector<SymMat> x;
  std::vector<SymMat> y1;
  std::vector<SymMat> y2;
  double lm_margin = 0.0;

  std::size_t size() const { return x.size(); }
  /// Y1_j + Y2_j, i.e. P_j(0).
  SymMat entry(std::size_t j) const { return y1[j] + y2[j]; }
};

/// Left-hand side of the Lyapunov-Metzler inequality for mode i.
inline SymMat lyapunov_metzler_lhs(const SwitchedPlant& plant, const DwellCertificate& cert, std::size_t i) {
  const Mat& a = plant.modes[i].a;
  const Mat& x = cert.x[i].mat();
  Mat v = a.transpose() * x + x * a + plant.ctc().mat() + x * (2.0 * cert.zeta);
  for (std::size_t j = 0; j < cert.size(); ++j)
    if (j != i) v += (cert.entry(j).mat() - x) * cert.pi(i, j);
  return SymMat(v);
}

/// Minimum over modes of -lambda_max(lhs_i), and min lambda_min(X_i).
inline std::pair<double, double> recertify(const SwitchedPlant& plant, const DwellCertificate& cert) {
  double margin = std::numeric_limits<double>::infinity();
  double xmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cert.size(); ++i) {
    margin = std::min(margin, -lambda_max(lyapunov_metzler_lhs(plant, cert, i)));
    xmin = std::min(xmin, lambda_min(cert.x[i]));
  }
  return {margin, xmin};
}

struct LmOptions {
  double x_upper = 1e4;
  SolveOptions solver{};
};

/// Solves the coupled Lyapunov-Metzler LMIs for X_i; the system is affine in
/// the X_j because Y1_j is a congruence of X_j and Y2_j is constant.
inline DwellCertificate solve_lyapunov_metzler(const SwitchedPlant& plant, const MetzlerMatrix& pi, double zeta,
                                               double dwell, const LmOptions& opt = {}) {
  plant.validate();
  if (pi.dim() != plant.size())
    throw DimensionError("Metzler matrix is " + std::to_string(pi.dim()) + "x" + std::to_string(pi.dim()) + " for " +
                         std::to_string(plant.size()) + " modes");
  if (!(zeta > 0.0)) throw PreconditionError("zeta must be positive");
  if (!(dwell > 0.0)) throw PreconditionError("dwell time must be positive");
  const std::size_t n = plant.n(), l = plant.size();
  const SymMat ctc = plant.ctc();

  std::vector<Mat> e(l);
  std::vector<SymMat> y2(l);
  for (std::size_t j = 0; j < l; ++j) {
    const auto eg = exp_gram(plant.modes[j].a + Mat::identity(n) * zeta, ctc, dwell);
    e[j] = eg.exp;
    y2[j] = eg.gram;
  }

  std::vector<LmiVar> vars;
  std::vector<LmiConstraint> cons;
  for (std::size_t i = 0; i < l; ++i) vars.push_back(LmiVar::symmetric("X" + std::to_string(i + 1), n, 0.0, opt.x_upper));
  for (std::size_t i = 0; i < l; ++i) {
    const Mat& a = plant.modes[i].a;
    const auto xi = AffineExpr::variable("X" + std::to_string(i + 1), n, n);
    AffineExpr lhs = a.transpose() * xi + xi * a + (2.0 * zeta) * xi;
    lhs += ctc.mat();
    for (std::size_t j = 0; j < l; ++j) {
      if (j == i || pi(i, j) == 0.0) continue;
      const auto xj = AffineExpr::variable("X" + std::to_string(j + 1), n, n);
      lhs += pi(i, j) * (e[j].transpose() * xj * e[j] - xi);
      lhs += y2[j].mat() * pi(i, j);
    }
    cons.push_back({"LM" + std::to_string(i + 1), lhs, 0.0});
  }
  const auto sys = build_system(vars, cons);
  const auto res = solve(sys, opt.solver);

  DwellCertificate cert;
  cert.pi = pi;
  cert.zeta = zeta;
  cert.dwell = dwell;
  for (std::size_t j = 0; j < l; ++j) {
    cert.x.emplace_back(res.assignment.at("X" + std::to_string(j + 1)));
    cert.y1.push_back(congruence(e[j], cert.x[j]));
    cert.y2.push_back(y2[j]);
  }
  const auto [margin, xmin] = recertify(plant, cert);
  cert.lm_margin = margin;
  if (!res.feasible() || !(margin > 0.0) || !(xmin > 0.0)) {
    std::string msg = "Lyapunov-Metzler LMIs infeasible or undecided; worst eigenvalue per mode:";
    for (std::size_t i = 0; i < l; ++i) msg += " " + std::to_string(lambda_max(lyapunov_metzler_lhs(plant, cert, i)));
    throw DesignFailure(msg);
  }
  return cert;
}

/// Closed-form evaluator of P_i(t) on [0, T].
class PFlow {
 public:
  PFlow() = default;
  PFlow(const SwitchedPlant& plant, const DwellCertificate& cert)
      : dwell_(cert.dwell), zeta_(cert.zeta), ctc_(plant.ctc()), x_(cert.x) {
    const std::size_t n = plant.n();
    for (const auto& m : plant.modes) az_.push_back(m.a + Mat::identity(n) * cert.zeta);
    ctc_norm_ = spectral_norm(ctc_);
    for (const auto& a : az_) az_norm_.push_back(spectral_norm(a));
  }

  std::size_t size() const { return x_.size(); }
  double dwell() const { return dwell_; }
  double zeta() const { return zeta_; }
  const Mat& az(std::size_t i) const { return az_[i]; }
  const SymMat& x(std::size_t i) const { return x_[i]; }
  const SymMat& ctc() const { return ctc_; }
  double az_norm(std::size_t i) const { return az_norm_[i]; }
  double ctc_norm() const { return ctc_norm_; }

  SymMat eval(std::size_t i, double t) const {
    if (i >= size()) throw std::out_of_range("eval_P: mode index out of range");
    const double tol = 1e-12 * std::max(1.0, dwell_);
    if (!(t >= -tol && t <= dwell_ + tol)) throw std::out_of_range("eval_P: t outside [0, T]");
    const double s = std::clamp(dwell_ - t, 0.0, dwell_);
    if (s == 0.0) return x_[i];
    const auto eg = exp_gram(az_[i], ctc_, s);
    return congruence(eg.exp, x_[i]) + eg.gram;
  }

  /// Propagator over a backward step delta: P(t - delta) = E^T P(t) E + G.
  ExpGram step(std::size_t i, double delta) const { return exp_gram(az_[i], ctc_, delta); }

 private:
  double dwell_ = 0.0;
  double zeta_ = 0.0;
  SymMat ctc_;
  std::vector<SymMat> x_;
  std::vector<Mat> az_;
  std::vector<double> az_norm_;
  double ctc_norm_ = 0.0;
};

inline SymMat eval_P(const PFlow& flow, std::size_t i, double t) { return flow.eval(i, t); }

/// (||X_i|| + T ||C^T C||) e^{2 T ||Az_i||}.
inline double p_bound(const PFlow& flow, std::size_t i) {
  return (spectral_norm(flow.x(i)) + flow.dwell() * flow.ctc_norm()) * std::exp(2.0 * flow.dwell() * flow.az_norm(i));
}

/// mu e^{2||Az|| mu} ||C^T C|| + [2(e^{||Az|| mu} - 1) + (e^{||Az|| mu} - 1)^2] Pbar_i.
inline double p_modulus(const PFlow& flow, std::size_t i, double mu) {
  const double a = flow.az_norm(i);
  const double g = std::expm1(a * mu);
  return mu * std::exp(2.0 * a * mu) * flow.ctc_norm() + (2.0 * g + g * g) * p_bound(flow, i);
}

/// Largest mu (within bisection accuracy) with p_modulus(mu) < target.
inline double modulus_inverse(const PFlow& flow, std::size_t i, double target) {
  if (!(target > 0.0)) throw std::domain_error("modulus_inverse: target must be positive");
  double hi = 1.0;
  while (p_modulus(flow, i, hi) < target) {
    hi *= 2.0;
    if (hi > 1e300) return hi;
  }
  double lo = hi;
  while (p_modulus(flow, i, lo) >= target) {
    lo *= 0.5;
    if (lo < 1e-300) throw std::domain_error("grid_stencil: threshold unattainable in floating point");
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (p_modulus(flow, i, mid) < target ? lo : hi) = mid;
  }
  return lo;
}

/// Admissible grid stencil for mode i: the largest mu with
/// p_modulus(mu) < 0.99 * eps / (2 (zeta - alpha + ||L_i D_i||)).
inline double grid_stencil(const PFlow& flow, std::size_t i, double eps, double alpha, double ld_norm) {
  const double zeta = flow.zeta();
  if (!(alpha > 0.0 && alpha < zeta)) throw PreconditionError("alpha must lie in (0, zeta)");
  if (!(eps > 0.0)) throw PreconditionError("grid margin eps must be positive");
  return modulus_inverse(flow, i, 0.99 * eps / (2.0 * (zeta - alpha + ld_norm)));
}

inline double grid_stencil(const PFlow& flow, std::size_t i, double eps, double alpha, const Mat& l, const Mat& d) {
  return grid_stencil(flow, i, eps, alpha, spectral_norm(l * d));
}

}  // namespace lmswitch
