#pragma once

// Time-dependent stability LMIs Psi_i(t), their synthesis in (Q, W, gamma)
// on a grid, grid-to-continuum verification, and the derived constants.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmswitch/dwell_design.hpp"
#include "lmswitch/lmi.hpp"
#include "lmswitch/matnum.hpp"
#include "lmswitch/observer_design.hpp"

namespace lmswitch {

struct TuningParams {
  double h = 0.05;
  double alpha = 1e-6;
  std::vector<double> kappa;  ///< Lipschitz constants used in Psi, one per mode
  double eps = 0.0;           ///< grid margin; <= 0 selects it from the solution
  double stencil = 0.01;      ///< uniform solve-grid spacing

  double hold_gain() const { return h * h * std::exp(2.0 * alpha * h); }
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Psi_i with P given; blocks follow the block layout (phi, e, delta_e, w).
inline SymMat psi_from_p(const SymMat& p, const Mat& u, const Mat& ld, double kappa, double zeta, const SymMat& q,
                         const SymMat& w, double gamma, const TuningParams& tp) {
  const std::size_t n = p.dim();
  const double c = tp.hold_gain();
  const double gk = gamma * kappa * kappa;
  const Mat id = Mat::identity(n);
  const Mat& pm = p.mat();
  const Mat& qm = q.mat();
  const Mat& wm = w.mat();
  const Mat ut = u.transpose();
  const Mat pld = pm * ld;
  const Mat utw = ut * wm;
  Mat s(4 * n, 4 * n);
  auto put = [&](std::size_t r, std::size_t cc, const Mat& b) {
    s.set_block(r * n, cc * n, b);
    if (r != cc) s.set_block(cc * n, r * n, b.transpose());
  };
  put(0, 0, pm * (-2.0 * (zeta - tp.alpha)) + id * gk);
  put(0, 1, pld + id * gk);
  put(0, 2, -pld);
  put(1, 1, ut * qm + qm * u + qm * (2.0 * tp.alpha) + id * gk + utw * u * c);
  put(1, 2, qm * ld + utw * ld * c);
  put(1, 3, qm + utw * c);
  put(2, 2, wm * (-std::numbers::pi * std::numbers::pi / 4.0) + ld.transpose() * wm * ld * c);
  put(2, 3, ld.transpose() * wm * c);
  put(3, 3, id * (-gamma) + wm * c);
  return SymMat(s);
}

}  // namespace detail

/// Psi_i(t) evaluated numerically.
inline SymMat assemble_psi(std::size_t i, double t, const SymMat& q, const SymMat& w, double gamma,
                           const TuningParams& tp, const ObserverDesign& obs, const PFlow& flow) {
  if (i >= obs.size() || i >= flow.size() || i >= tp.kappa.size()) throw std::out_of_range("assemble_psi: mode out of range");
  const std::size_t n = flow.x(i).dim();
  if (q.dim() != n || w.dim() != n) throw DimensionError("assemble_psi: Q and W must be n x n");
  return detail::psi_from_p(flow.eval(i, t), obs.u[i], obs.ld[i], tp.kappa[i], flow.zeta(), q, w, gamma, tp);
}

/// Psi_i with P fixed, as an affine expression in the variables Q, W, gamma.
inline AffineExpr psi_expr(const SymMat& p, const Mat& u, const Mat& ld, double kappa, double zeta,
                           const TuningParams& tp) {
  const std::size_t n = p.dim();
  const double c = tp.hold_gain();
  const double k2 = kappa * kappa;
  const Mat id = Mat::identity(n);
  const auto q = AffineExpr::variable("Q", n, n);
  const auto w = AffineExpr::variable("W", n, n);
  const auto gk = AffineExpr::scaled("gamma", id * k2);
  const Mat pld = p.mat() * ld;
  const Mat ut = u.transpose();
  BlockBuilder b({n, n, n, n});
  b.set(0, 0, AffineExpr(p.mat() * (-2.0 * (zeta - tp.alpha))) + gk);
  b.set(0, 1, AffineExpr(pld) + gk);
  b.set(0, 2, -pld);
  b.set(1, 1, ut * q + q * u + (2.0 * tp.alpha) * q + gk + c * (ut * w * u));
  b.set(1, 2, q * ld + c * (ut * w * ld));
  b.set(1, 3, q + c * (ut * w));
  b.set(2, 2, (-std::numbers::pi * std::numbers::pi / 4.0) * w + c * (ld.transpose() * w * ld));
  b.set(2, 3, c * (ld.transpose() * w));
  b.set(3, 3, AffineExpr::scaled("gamma", -id) + c * w);
  return b.build();
}

/// Uniform grid 0 = tau_0 < ... < tau_N = T with spacing at most `stencil`.
inline std::vector<double> uniform_grid(double dwell, double stencil) {
  if (!(stencil > 0.0)) throw PreconditionError("grid stencil must be positive");
  const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(dwell / stencil - 1e-9)));
  std::vector<double> g(m + 1);
  for (std::size_t k = 0; k <= m; ++k) g[k] = dwell * static_cast<double>(k) / static_cast<double>(m);
  g.back() = dwell;
  return g;
}

struct StabilityCertificate {
  SymMat q;
  SymMat w;
  double gamma = 0.0;
  double worst_eig = 0.0;  ///< max over modes and solve-grid points of lambda_max(Psi_i)
  double eps = 0.0;        ///< margin used for the grid-to-continuum argument
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
  double m = 1.0;
  TuningParams tuning;
  double zeta = 0.0;
  std::vector<std::vector<double>> grid;  ///< per mode, the points used in the LMI solve
  std::vector<double> mu;                 ///< admissible stencil per mode for eps
  std::vector<double> fine_stencil;       ///< verification-grid spacing per mode (< mu)
  std::size_t fine_points = 0;
  bool continuum_verified = false;  ///< every verification-grid point met Psi < -eps I
  int rounds = 0;
  int solver_iterations = 0;

  double envelope(double t, double r) const { return m * std::exp(-2.0 * tuning.alpha * t) * r * r; }
};

struct SynthesisOptions {
  double q_bound = 1e3;      ///< Q, W < q_bound * max ||P|| * I
  double gamma_bound = 1e5;  ///< gamma < gamma_bound * max ||P||
  double gamma_cap = 0.0;    ///< > 0: absolute upper bound on gamma as well
  int max_rounds = 8;
  std::size_t max_fine_points = 5'000'000;  ///< per mode
  SolveOptions solver{};
};

namespace detail {

struct FineSweep {
  std::vector<std::pair<std::size_t, double>> violations;  // (mode, t)
  std::size_t points = 0;
  std::vector<double> pmin, pmax;  // per mode extreme eigenvalues of P on the fine grid
  std::vector<double> spacing;     // per mode largest fine spacing
};

// Checks -Psi_i(t) - eps I > 0 at every point of the solve grid refined so
// that the spacing stays below mu_i. P is propagated backward across each
// interval from the closed form at its right node. Only the leading block
// depends on P, so each point costs an n x n Schur-complement Cholesky:
// with K = (trailing 3n x 3n block)^{-1} and off-diagonal row P G + H,
//   S(P) = 2(zeta - alpha) P - (gamma kappa^2 + eps) I - P M1 P - P M2 - M2^T P - M3.
inline FineSweep fine_sweep(const ObserverDesign& obs, const PFlow& flow, const StabilityCertificate& cert,
                            const SynthesisOptions& opt) {
  const std::size_t n = flow.x(0).dim();
  const double zeta = flow.zeta();
  const double a2 = 2.0 * (zeta - cert.tuning.alpha);
  FineSweep out;
  out.pmin.assign(flow.size(), std::numeric_limits<double>::infinity());
  out.pmax.assign(flow.size(), -std::numeric_limits<double>::infinity());
  out.spacing.assign(flow.size(), 0.0);
  std::vector<double> buf(n * n), eig(n * n);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const auto& g = cert.grid[i];
    const double mu = cert.mu[i];
    std::size_t total = 1;
    for (std::size_t j = 0; j + 1 < g.size(); ++j)
      total += static_cast<std::size_t>(std::floor((g[j + 1] - g[j]) / mu)) + 1;
    if (total > opt.max_fine_points)
      throw InfeasibleError("verification grid for mode " + std::to_string(i + 1) + " needs " + std::to_string(total) +
                            " points (limit " + std::to_string(opt.max_fine_points) + "); margin too small");
    const double gk = cert.gamma * cert.tuning.kappa[i] * cert.tuning.kappa[i];
    const SymMat full = -detail::psi_from_p(SymMat(n), obs.u[i], obs.ld[i], cert.tuning.kappa[i], zeta, cert.q,
                                            cert.w, cert.gamma, cert.tuning);
    Mat tail = full.mat().block(n, n, 3 * n, 3 * n) - Mat::identity(3 * n) * cert.eps;
    Mat tl = tail;
    const bool tail_ok = cholesky_inplace(tl.data().data(), 3 * n);
    Mat m1, m2, m3;
    if (tail_ok) {
      Mat gm(n, 3 * n), hm(n, 3 * n);
      gm.set_block(0, 0, -obs.ld[i]);
      gm.set_block(0, n, obs.ld[i]);
      hm.set_block(0, 0, Mat::identity(n) * (-gk));
      const Mat kg = spd_solve(SymMat(tail), gm.transpose());
      const Mat kh = spd_solve(SymMat(tail), hm.transpose());
      m1 = gm * kg;
      m2 = gm * kh;
      m3 = hm * kh;
    }
    std::vector<double> pm1(n * n), pm2(n * n);
    // Eigenvalues of P are computed only occasionally; in between, Weyl's
    // inequality with the accumulated Frobenius drift bounds them.
    double lref = std::numeric_limits<double>::infinity();
    for (double t : g) lref = std::min(lref, lambda_min(flow.eval(i, t)));
    const double drift_cap = 1e-3 * std::abs(lref);
    std::vector<double> prev(n * n);
    double drift = 0.0, smin = 0.0, smax = 0.0;
    auto check = [&](const double* p, double t, bool fresh) {
      ++out.points;
      bool ok = tail_ok;
      if (ok) {
        const double* a1 = m1.data().data();
        const double* a2m = m2.data().data();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < n; ++c) {
            double v1 = 0.0, v2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
              v1 += p[r * n + k] * a1[k * n + c];
              v2 += p[r * n + k] * a2m[k * n + c];
            }
            pm1[r * n + c] = v1;
            pm2[r * n + c] = v2;
          }
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c <= r; ++c) {
            double v = 0.0;
            for (std::size_t k = 0; k < n; ++k) v += pm1[r * n + k] * p[k * n + c];
            buf[r * n + c] = a2 * p[r * n + c] - v - pm2[r * n + c] - pm2[c * n + r] - m3(r, c);
          }
        for (std::size_t r = 0; r < n; ++r) buf[r * n + r] -= gk + cert.eps;
        ok = cholesky_inplace(buf.data(), n);
      }
      if (!ok) out.violations.emplace_back(i, t);
      if (!fresh) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < n * n; ++k) d2 += (p[k] - prev[k]) * (p[k] - prev[k]);
        drift += std::sqrt(d2);
      }
      std::copy(p, p + n * n, prev.begin());
      if (fresh || drift > drift_cap) {
        std::copy(p, p + n * n, eig.begin());
        jacobi_inplace(eig.data(), n, nullptr);
        smin = std::numeric_limits<double>::infinity();
        smax = -smin;
        for (std::size_t k = 0; k < n; ++k) {
          smin = std::min(smin, eig[k * n + k]);
          smax = std::max(smax, eig[k * n + k]);
        }
        drift = 0.0;
      }
      out.pmin[i] = std::min(out.pmin[i], smin - drift);
      out.pmax[i] = std::max(out.pmax[i], smax + drift);
    };
    std::map<double, ExpGram> steps;
    std::vector<double> p(n * n), tmp(n * n);
    auto load = [&](double t) {
      const SymMat v = flow.eval(i, t);
      std::copy(v.mat().data().begin(), v.mat().data().end(), p.begin());
    };
    load(g.front());
    check(p.data(), g.front(), true);
    for (std::size_t j = 0; j + 1 < g.size(); ++j) {
      const double span = g[j + 1] - g[j];
      const auto r = static_cast<std::size_t>(std::floor(span / mu)) + 1;
      const double delta = span / static_cast<double>(r);
      out.spacing[i] = std::max(out.spacing[i], delta);
      auto it = steps.find(delta);
      if (it == steps.end()) it = steps.emplace(delta, flow.step(i, delta)).first;
      const double* e = it->second.exp.data().data();
      const double* gg = it->second.gram.mat().data().data();
      load(g[j + 1]);
      check(p.data(), g[j + 1], true);
      for (std::size_t k = 1; k < r; ++k) {
        // p <- e^T p e + gg
        for (std::size_t rr = 0; rr < n; ++rr)
          for (std::size_t c = 0; c < n; ++c) {
            double v = 0.0;
            for (std::size_t q = 0; q < n; ++q) v += p[rr * n + q] * e[q * n + c];
            tmp[rr * n + c] = v;
          }
        for (std::size_t rr = 0; rr < n; ++rr)
          for (std::size_t c = rr; c < n; ++c) {
            double v = gg[rr * n + c];
            for (std::size_t q = 0; q < n; ++q) v += e[q * n + rr] * tmp[q * n + c];
            p[rr * n + c] = p[c * n + rr] = v;
          }
        check(p.data(), g[j + 1] - static_cast<double>(k) * delta, false);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Solves for (Q, W, gamma) with Psi_i < 0 on the solve grid, then confirms
/// Psi_i(t) < -eps I on a verification grid fine enough for the continuity
/// modulus, adding any violating points to the solve grid and re-solving.
inline StabilityCertificate synthesize(const ObserverDesign& obs, const PFlow& flow, const TuningParams& tp,
                                       const SynthesisOptions& opt = {}) {
  const std::size_t l = flow.size();
  const std::size_t n = flow.x(0).dim();
  const double zeta = flow.zeta();
  if (obs.size() != l || tp.kappa.size() != l) throw DimensionError("synthesize: mode count mismatch");
  if (!(tp.alpha > 0.0 && tp.alpha < zeta)) throw PreconditionError("alpha must lie in (0, zeta)");
  if (!(tp.h > 0.0)) throw PreconditionError("h must be positive");
  for (double k : tp.kappa)
    if (k < 0.0) throw PreconditionError("kappa must be non-negative");

  StabilityCertificate cert;
  cert.tuning = tp;
  cert.zeta = zeta;
  cert.grid.assign(l, uniform_grid(flow.dwell(), tp.stencil));

  double pscale = 0.0;
  for (std::size_t i = 0; i < l; ++i)
    for (double t : cert.grid[i]) pscale = std::max(pscale, lambda_max(flow.eval(i, t)));

  const double gamma_upper = opt.gamma_cap > 0.0 ? std::min(opt.gamma_cap, opt.gamma_bound * pscale) : opt.gamma_bound * pscale;
  const std::string hint = "; reduce h, alpha or kappa";
  for (int round = 1; round <= opt.max_rounds; ++round) {
    cert.rounds = round;
    std::vector<LmiConstraint> cons;
    for (std::size_t i = 0; i < l; ++i)
      for (double t : cert.grid[i])
        cons.push_back({"Psi" + std::to_string(i + 1) + "@" + std::to_string(t),
                        psi_expr(flow.eval(i, t), obs.u[i], obs.ld[i], tp.kappa[i], zeta, tp),
                        tp.eps > 0.0 ? tp.eps : 0.0});
    const auto sys = build_system({LmiVar::symmetric("Q", n, 0.0, opt.q_bound * pscale),
                                   LmiVar::symmetric("W", n, 0.0, opt.q_bound * pscale),
                                   LmiVar::scalar("gamma", 0.0, gamma_upper)},
                                  cons);
    const auto res = solve(sys, opt.solver);
    cert.solver_iterations += res.iterations;
    if (!res.feasible()) throw InfeasibleError("stability LMIs infeasible or undecided: " + res.message + hint);
    cert.q = SymMat(res.assignment.at("Q"));
    cert.w = SymMat(res.assignment.at("W"));
    cert.gamma = res.assignment.scalar("gamma");

    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < l; ++i)
      for (double t : cert.grid[i])
        worst = std::max(worst, lambda_max(assemble_psi(i, t, cert.q, cert.w, cert.gamma, tp, obs, flow)));
    cert.worst_eig = worst;
    if (!(worst < 0.0) || !(tp.eps <= 0.0 || worst < -tp.eps))
      throw InfeasibleError("re-certification failed: worst eigenvalue " + std::to_string(worst) + hint);
    cert.eps = tp.eps > 0.0 ? tp.eps : -worst / 2.0;

    // Refine eps (when automatic) until the verification grid is clean, or
    // fall back to adding violating points to the solve grid.
    for (int inner = 0; inner < 6; ++inner) {
      cert.mu.assign(l, 0.0);
      for (std::size_t i = 0; i < l; ++i)
        cert.mu[i] = grid_stencil(flow, i, cert.eps, tp.alpha, spectral_norm(obs.ld[i]));
      const auto sweep = detail::fine_sweep(obs, flow, cert, opt);
      cert.fine_points = sweep.points;
      cert.fine_stencil = sweep.spacing;
      if (sweep.violations.empty()) {
        cert.continuum_verified = true;
        cert.c1 = std::numeric_limits<double>::infinity();
        cert.c2 = 0.0;
        for (std::size_t i = 0; i < l; ++i) {
          const double th = p_modulus(flow, i, sweep.spacing[i]);
          cert.c1 = std::min(cert.c1, sweep.pmin[i] - th);
          cert.c2 = std::max(cert.c2, sweep.pmax[i] + th);
        }
        const auto qe = sym_eigenvalues(cert.q);
        cert.c3 = qe.front();
        cert.c4 = qe.back();
        if (!(cert.c1 > 0.0)) throw InfeasibleError("continuity correction exceeds min eigenvalue of P; C1 not positive");
        cert.m = cert.c4 / std::min(cert.c1, cert.c3);
        return cert;
      }
      double vmax = -std::numeric_limits<double>::infinity();
      for (const auto& [i, t] : sweep.violations)
        vmax = std::max(vmax, lambda_max(assemble_psi(i, t, cert.q, cert.w, cert.gamma, tp, obs, flow)));
      if (tp.eps > 0.0 || !(vmax < 0.0)) {
        // Add the worst violator of each solve interval.
        for (std::size_t i = 0; i < l; ++i) {
          std::map<std::size_t, std::pair<double, double>> per_interval;
          for (const auto& [m, t] : sweep.violations) {
            if (m != i) continue;
            const auto& g = cert.grid[i];
            const auto j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), t) - g.begin());
            const double lm = lambda_max(assemble_psi(i, t, cert.q, cert.w, cert.gamma, tp, obs, flow));
            auto it = per_interval.find(j);
            if (it == per_interval.end() || lm > it->second.first) per_interval[j] = {lm, t};
          }
          for (const auto& [j, v] : per_interval) cert.grid[i].push_back(v.second);
          std::sort(cert.grid[i].begin(), cert.grid[i].end());
          cert.grid[i].erase(std::unique(cert.grid[i].begin(), cert.grid[i].end()), cert.grid[i].end());
        }
        break;
      }
      cert.eps = -vmax / 2.0;
    }
  }
  throw InfeasibleError("could not verify Psi < 0 between grid points after " + std::to_string(opt.max_rounds) +
                        " rounds" + hint);
}

/// synthesize() followed by a search for the smallest gamma that still
/// certifies, to within a factor 1 + rel_tol. Useful when gamma enters a
/// reported bound, as in the affine case.
inline StabilityCertificate synthesize_min_gamma(const ObserverDesign& obs, const PFlow& flow, const TuningParams& tp,
                                                 const SynthesisOptions& opt = {}, double rel_tol = 0.05) {
  StabilityCertificate best = synthesize(obs, flow, tp, opt);
  auto attempt = [&](double cap) -> std::optional<StabilityCertificate> {
    SynthesisOptions o = opt;
    o.gamma_cap = cap;
    try {
      return synthesize(obs, flow, tp, o);
    } catch (const InfeasibleError&) {
      return std::nullopt;
    }
  };
  double hi = best.gamma, lo = 0.0;
  for (int k = 0; k < 16; ++k) {  // decades down until the cap fails
    const double cap = hi / 10.0;
    auto c = attempt(cap);
    if (!c) {
      lo = cap;
      break;
    }
    best = std::move(*c);
    hi = std::min(cap, best.gamma);
  }
  while (lo > 0.0 && hi > lo * (1.0 + rel_tol)) {
    const double cap = std::sqrt(lo * hi);
    if (auto c = attempt(cap)) {
      best = std::move(*c);
      hi = std::min(cap, best.gamma);
    } else {
      lo = cap;
    }
  }
  return best;
}

struct FinerReport {
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t points = 0;
  std::size_t violations = 0;  ///< points with lambda_max >= 0
};

/// lambda_max(Psi_i) on the certificate's solve grid with r - 1 extra points
/// inserted in each interval.
inline FinerReport verify_finer(const ObserverDesign& obs, const PFlow& flow, const StabilityCertificate& cert,
                                std::size_t r) {
  if (r < 1) throw std::invalid_argument("verify_finer: refinement factor must be at least 1");
  FinerReport rep;
  auto visit = [&](std::size_t i, double t) {
    const double lm = lambda_max(assemble_psi(i, t, cert.q, cert.w, cert.gamma, cert.tuning, obs, flow));
    rep.worst = std::max(rep.worst, lm);
    ++rep.points;
    if (!(lm < 0.0)) ++rep.violations;
  };
  for (std::size_t i = 0; i < cert.grid.size(); ++i) {
    const auto& g = cert.grid[i];
    visit(i, g.front());
    for (std::size_t j = 0; j + 1 < g.size(); ++j) {
      for (std::size_t k = 1; k < r; ++k)
        visit(i, g[j] + (g[j + 1] - g[j]) * static_cast<double>(k) / static_cast<double>(r));
      visit(i, g[j + 1]);
    }
  }
  return rep;
}

struct ReducedCheck {
  bool holds = false;
  double worst = 0.0;
};

/// Gamma_i(t) = [[-2 zeta P_i(t), P_i(t) L_i D_i], [*, U_i^T Q + Q U_i]] < 0
/// at every grid point of every mode.
inline ReducedCheck reduced_check(const ObserverDesign& obs, const PFlow& flow, const SymMat& q,
                                  const std::vector<double>& grid) {
  const std::size_t n = q.dim();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < flow.size(); ++i) {
    for (double t : grid) {
      const SymMat p = flow.eval(i, t);
      Mat g(2 * n, 2 * n);
      const Mat pld = p.mat() * obs.ld[i];
      g.set_block(0, 0, p.mat() * (-2.0 * flow.zeta()));
      g.set_block(0, n, pld);
      g.set_block(n, 0, pld.transpose());
      g.set_block(n, n, obs.u[i].transpose() * q.mat() + q.mat() * obs.u[i]);
      worst = std::max(worst, lambda_max(SymMat(g)));
    }
  }
  return {worst < 0.0, worst};
}

/// Searches for Q > 0 with Gamma_i(t) < 0 on the grid for every mode. The
/// reduced condition is what Psi tends to as h, alpha and kappa shrink, so
/// when it fails no tuning of those parameters can succeed.
inline FeasibilityResult reduced_feasible(const ObserverDesign& obs, const PFlow& flow, const std::vector<double>& grid,
                                          const SolveOptions& opt = {}) {
  const std::size_t n = flow.x(0).dim();
  const auto q = AffineExpr::variable("Q", n, n);
  std::vector<LmiConstraint> cons;
  for (std::size_t i = 0; i < flow.size(); ++i)
    for (double t : grid) {
      const SymMat p = flow.eval(i, t);
      BlockBuilder b({n, n});
      b.set(0, 0, p.mat() * (-2.0 * flow.zeta()));
      b.set(0, 1, p.mat() * obs.ld[i]);
      b.set(1, 1, obs.u[i].transpose() * q + q * obs.u[i]);
      cons.push_back({"Gamma" + std::to_string(i + 1), b.build(), 0.0});
    }
  SolveOptions o = opt;
  o.maximize_margin = false;
  return solve(build_system({LmiVar::symmetric("Q", n, 1e-6)}, cons), o);
}

/// t -> M e^{-2 alpha t} R^2.
inline std::function<double(double)> decay_envelope(const StabilityCertificate& cert, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("decay_envelope: R must be positive");
  return [m = cert.m, a = cert.tuning.alpha, r](double t) { return m * std::exp(-2.0 * a * t) * r * r; };
}

/// 3 M ||C^T C|| R^2 / (2 alpha eps_J).
inline double cost_error_horizon(const StabilityCertificate& cert, const Mat& c, double r, double eps_j) {
  if (!(eps_j > 0.0) || !(r > 0.0)) throw std::invalid_argument("cost_error_horizon: R and eps_J must be positive");
  return 3.0 * cert.m * spectral_norm(c.transpose() * c) * r * r / (2.0 * cert.tuning.alpha * eps_j);
}

struct UltimateBound {
  double phi_e = 0.0;  ///< limsup of ||phi||^2 + ||e||^2
  double x = 0.0;      ///< limsup of ||x||^2
};

inline UltimateBound ultimate_bound(const StabilityCertificate& cert, double b_bar) {
  for (double k : cert.tuning.kappa)
    if (k != 0.0) throw PreconditionError("ultimate_bound requires a certificate synthesised with kappa = 0");
  if (b_bar < 0.0) throw std::invalid_argument("ultimate_bound: B must be non-negative");
  const double pe = cert.gamma * b_bar * b_bar / (2.0 * cert.tuning.alpha * std::min(cert.c1, cert.c3));
  return {pe, 2.0 * pe};
}

}  // namespace lmswitch
