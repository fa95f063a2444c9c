#pragma once

// Closed-loop hybrid simulation: plant, sampled-data observer and the
// observer-driven dwell-time switching law.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmswitch/certify.hpp"
#include "lmswitch/dwell_design.hpp"
#include "lmswitch/matnum.hpp"
#include "lmswitch/observer_design.hpp"
#include "lmswitch/plant.hpp"

namespace lmswitch {

struct SwitchState {
  std::size_t mode = 0;
  double last_switch = 0.0;
  double dwell = 0.0;

  bool in_dwell(double t) const { return t - last_switch < dwell; }
};

namespace detail {

// min over j != i of phi^T (Y1_j + Y2_j - X_i) phi, with the minimiser.
inline std::pair<double, std::size_t> trigger_value(std::span<const double> phi, std::size_t i,
                                                    const std::vector<SymMat>& entry, const DwellCertificate& cert) {
  const double xi = quad_form(cert.x[i], phi);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = i;
  for (std::size_t j = 0; j < entry.size(); ++j) {
    if (j == i) continue;
    const double v = quad_form(entry[j], phi);
    if (v < best) {  // strict: lowest index wins ties
      best = v;
      arg = j;
    }
  }
  return {best - xi, arg};
}

}  // namespace detail

/// One evaluation of the switching law at time t. Returns the state unchanged
/// during dwell or when no j != i has phi^T (Y1_j + Y2_j - X_i) phi < 0;
/// otherwise switches to argmin_j phi^T (Y1_j + Y2_j) phi and restarts dwell.
inline SwitchState switching_decision(std::span<const double> phi, double t, const SwitchState& state,
                                      const DwellCertificate& cert) {
  if (state.mode >= cert.size()) throw std::out_of_range("switching_decision: mode out of range");
  if (state.in_dwell(t) || cert.size() < 2) return state;
  std::vector<SymMat> entry;
  for (std::size_t j = 0; j < cert.size(); ++j) entry.push_back(cert.entry(j));
  const auto [g, j] = detail::trigger_value(phi, state.mode, entry, cert);
  if (!(g < 0.0)) return state;
  return {j, t, state.dwell};
}

enum class SamplingSchedule { uniform, jittered };

struct SimConfig {
  Vec x0;
  double duration = 20.0;
  double step = 0.0;           ///< <= 0 selects sample_period / 20
  double sample_period = 0.0;  ///< h_s; <= 0 selects max_sample_period
  double max_sample_period = 0.0;  ///< certified h
  SamplingSchedule schedule = SamplingSchedule::uniform;
  std::size_t initial_mode = 0;  ///< 0-based
  std::uint64_t seed = 1;
};

struct SwitchEvent {
  double time = 0.0;
  std::size_t from = 0;
  std::size_t to = 0;
  double vphi_before = 0.0;
  double vphi_after = 0.0;
};

struct Trace {
  std::size_t n = 0;
  double step = 0.0;
  double dwell = 0.0;
  double max_sample_period = 0.0;
  std::vector<double> times;
  std::vector<Vec> x, phi, e;
  std::vector<std::size_t> sigma;  ///< 0-based
  std::vector<double> vphi;
  std::vector<double> j, j_hat;
  std::vector<double> sample_times;
  std::vector<SwitchEvent> switches;

  std::size_t size() const { return times.size(); }
  std::vector<double> switch_times() const {
    std::vector<double> s;
    for (const auto& ev : switches) s.push_back(ev.time);
    return s;
  }
};

struct CostSeries {
  std::vector<double> j;
  std::vector<double> j_hat;
};

/// Running averages (1/t) int_0^t z^T z with z = C x (J) or z = C phi (J_hat),
/// by the trapezoid rule on the trace grid. At t = 0 the integrand value is used.
inline CostSeries eval_costs(const Trace& tr, const Mat& c) {
  if (tr.size() == 0) throw std::invalid_argument("eval_costs: empty trace");
  const SymMat ctc(c.transpose() * c);
  CostSeries out;
  out.j.resize(tr.size());
  out.j_hat.resize(tr.size());
  double ix = 0.0, ip = 0.0;
  double fx = quad_form(ctc, tr.x[0]), fp = quad_form(ctc, tr.phi[0]);
  out.j[0] = fx;
  out.j_hat[0] = fp;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double gx = quad_form(ctc, tr.x[k]), gp = quad_form(ctc, tr.phi[k]);
    const double dt = tr.times[k] - tr.times[k - 1];
    ix += 0.5 * dt * (fx + gx);
    ip += 0.5 * dt * (fp + gp);
    fx = gx;
    fp = gp;
    const double t = tr.times[k] - tr.times[0];
    out.j[k] = t > 0.0 ? ix / t : gx;
    out.j_hat[k] = t > 0.0 ? ip / t : gp;
  }
  return out;
}

namespace detail {

class ClosedLoop {
 public:
  ClosedLoop(const SwitchedPlant& plant, const ObserverDesign& obs) : plant_(plant), obs_(obs), n_(plant.n()) {}

  // d/dt (x, phi) with the innovation v held.
  void rhs(std::size_t mode, const Vec& z, const Vec& v, Vec& dz) const {
    const Mat& a = plant_.modes[mode].a;
    dz.assign(2 * n_, 0.0);
    for (std::size_t r = 0; r < n_; ++r) {
      double sx = 0.0, sp = 0.0;
      for (std::size_t c = 0; c < n_; ++c) {
        sx += a(r, c) * z[c];
        sp += a(r, c) * z[n_ + c];
      }
      dz[r] = sx;
      dz[n_ + r] = sp + v[r];
    }
    plant_.modes[mode].f.accumulate(std::span<const double>(z.data(), n_), std::span<double>(dz.data(), n_));
  }

  Vec rk4(std::size_t mode, const Vec& z, const Vec& v, double dt) const {
    Vec k1, k2, k3, k4, w(z.size());
    rhs(mode, z, v, k1);
    for (std::size_t q = 0; q < z.size(); ++q) w[q] = z[q] + 0.5 * dt * k1[q];
    rhs(mode, w, v, k2);
    for (std::size_t q = 0; q < z.size(); ++q) w[q] = z[q] + 0.5 * dt * k2[q];
    rhs(mode, w, v, k3);
    for (std::size_t q = 0; q < z.size(); ++q) w[q] = z[q] + dt * k3[q];
    rhs(mode, w, v, k4);
    Vec out(z.size());
    for (std::size_t q = 0; q < z.size(); ++q) out[q] = z[q] + dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
    return out;
  }

  // L_i D_i e_hold
  Vec innovation(std::size_t mode, const Vec& e_hold) const { return obs_.ld[mode] * e_hold; }

 private:
  const SwitchedPlant& plant_;
  const ObserverDesign& obs_;
  std::size_t n_;
};

inline std::span<const double> phi_part(const Vec& z, std::size_t n) { return {z.data() + n, n}; }

}  // namespace detail

/// V_phi = phi^T P_i(s) phi with s the time since the last switch, clamped to
/// the dwell so that P_i = X_i afterwards.
inline double v_phi(const PFlow& flow, std::size_t mode, double elapsed, std::span<const double> phi) {
  const double s = std::clamp(elapsed, 0.0, flow.dwell());
  return quad_form(flow.eval(mode, s), phi);
}

/// Fixed-step RK4 simulation with sampling instants on the step grid and
/// switching instants refined by bisection inside the step.
inline Trace simulate(const SwitchedPlant& plant, const ObserverDesign& obs, const DwellCertificate& cert,
                      const SimConfig& cfg) {
  plant.validate();
  const std::size_t n = plant.n(), l = plant.size();
  if (obs.size() != l || cert.size() != l) throw DimensionError("simulate: mode count mismatch");
  if (cfg.x0.size() != n) throw DimensionError("simulate: x0 must have length " + std::to_string(n));
  if (cfg.initial_mode >= l) throw PreconditionError("simulate: initial mode out of range");
  if (!(cfg.duration > 0.0)) throw PreconditionError("simulate: duration must be positive");
  if (!(cfg.max_sample_period > 0.0)) throw PreconditionError("simulate: certified sampling bound h must be positive");
  const double hs = cfg.sample_period > 0.0 ? cfg.sample_period : cfg.max_sample_period;
  if (hs > cfg.max_sample_period * (1.0 + 1e-12))
    throw PreconditionError("simulate: sampling period exceeds the certified bound h");
  const double dt = cfg.step > 0.0 ? cfg.step : hs / 20.0;
  if (dt > hs * (1.0 + 1e-12)) throw PreconditionError("simulate: step exceeds the sampling period");
  const double ratio = hs / dt;
  const auto per_sample = static_cast<std::int64_t>(std::llround(ratio));
  if (per_sample < 1 || std::abs(ratio - static_cast<double>(per_sample)) > 1e-9 * ratio)
    throw PreconditionError("simulate: step must divide the sampling period");
  if (dt > cert.dwell) throw PreconditionError("simulate: step exceeds the dwell time");

  const PFlow flow(plant, cert);
  std::vector<SymMat> entry;
  for (std::size_t j = 0; j < l; ++j) entry.push_back(cert.entry(j));
  const detail::ClosedLoop loop(plant, obs);
  std::mt19937_64 rng(cfg.seed);
  const std::int64_t jitter_lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(0.5 * per_sample - 1e-9)));
  std::uniform_int_distribution<std::int64_t> jitter(jitter_lo, per_sample);
  auto next_gap = [&]() { return cfg.schedule == SamplingSchedule::jittered ? jitter(rng) : per_sample; };

  const auto steps = static_cast<std::int64_t>(std::ceil(cfg.duration / dt - 1e-9));
  Trace tr;
  tr.n = n;
  tr.step = dt;
  tr.dwell = cert.dwell;
  tr.max_sample_period = cfg.max_sample_period;
  tr.times.reserve(static_cast<std::size_t>(steps) + 1);

  Vec z(2 * n, 0.0);
  std::copy(cfg.x0.begin(), cfg.x0.end(), z.begin());
  SwitchState st{cfg.initial_mode, 0.0, cert.dwell};
  Vec e_hold(n, 0.0);
  std::int64_t next_sample = 0;

  auto record = [&](double t) {
    tr.times.push_back(t);
    Vec x(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    Vec p(z.begin() + static_cast<std::ptrdiff_t>(n), z.end());
    Vec e(n);
    for (std::size_t q = 0; q < n; ++q) e[q] = x[q] - p[q];
    tr.vphi.push_back(v_phi(flow, st.mode, t - st.last_switch, p));
    tr.x.push_back(std::move(x));
    tr.phi.push_back(std::move(p));
    tr.e.push_back(std::move(e));
    tr.sigma.push_back(st.mode);
  };

  for (std::int64_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k == next_sample) {
      for (std::size_t q = 0; q < n; ++q) e_hold[q] = z[q] - z[n + q];
      tr.sample_times.push_back(t);
      next_sample += next_gap();
    }
    auto fires = [&](const Vec& s) { return detail::trigger_value(detail::phi_part(s, n), st.mode, entry, cert).first < 0.0; };
    auto do_switch = [&](const Vec& zs, double tau) {
      const auto phis = detail::phi_part(zs, n);
      const std::size_t to = detail::trigger_value(phis, st.mode, entry, cert).second;
      SwitchEvent ev{tau, st.mode, to, v_phi(flow, st.mode, tau - st.last_switch, phis), 0.0};
      st = {to, tau, cert.dwell};
      ev.vphi_after = v_phi(flow, st.mode, 0.0, phis);
      tr.switches.push_back(ev);
    };
    // A switch exactly at a grid instant is applied before the row is recorded.
    if (l >= 2 && !st.in_dwell(t) && fires(z)) do_switch(z, t);
    record(t);
    if (k == steps) break;

    const Vec v = loop.innovation(st.mode, e_hold);
    Vec znext = loop.rk4(st.mode, z, v, dt);
    const double t1 = static_cast<double>(k + 1) * dt;
    const double a = std::max(t, st.last_switch + st.dwell);
    if (l >= 2 && a <= t1) {
      auto state_at = [&](double tau) { return tau <= t ? z : loop.rk4(st.mode, z, v, tau - t); };
      double tau = -1.0;
      if (a > t && fires(state_at(a))) {
        tau = a;
      } else if (fires(znext)) {
        double lo = a, hi = t1;
        while (hi - lo > dt * 1e-3) {
          const double mid = 0.5 * (lo + hi);
          (fires(state_at(mid)) ? hi : lo) = mid;
        }
        tau = hi;
      }
      if (tau >= 0.0) {
        const Vec zs = state_at(tau);
        do_switch(zs, tau);
        znext = t1 - tau > 0.0 ? loop.rk4(st.mode, zs, loop.innovation(st.mode, e_hold), t1 - tau) : zs;
      }
    }
    z = std::move(znext);
  }
  const auto costs = eval_costs(tr, plant.c);
  tr.j = costs.j;
  tr.j_hat = costs.j_hat;
  return tr;
}

struct TraceCheckOptions {
  double envelope_slack = 0.01;  ///< relative slack on M e^{-2 alpha t} R^2
  double dwell_tol = -1.0;       ///< < 0 selects the trace step
  double jump_rel_tol = 1e-9;
};

struct TraceReport {
  bool dwell_ok = true;
  bool jump_ok = true;
  bool envelope_ok = true;
  bool sampling_ok = true;
  bool cost_ok = true;
  double min_gap = std::numeric_limits<double>::infinity();  ///< first switch time included
  double max_jump = -std::numeric_limits<double>::infinity();
  double max_envelope_ratio = 0.0;  ///< max (|phi|^2 + |e|^2) / (M e^{-2 alpha t} R^2)
  double max_sample_gap = 0.0;
  double max_cost_ratio = 0.0;  ///< max over t >= 1 of t |J - J_hat| / (3 M ||C^T C|| R^2 / (2 alpha))
  std::vector<std::string> failures;

  bool ok() const { return dwell_ok && jump_ok && envelope_ok && sampling_ok && cost_ok; }
};

/// Dwell compliance, V_phi jump signs at switches, decay envelope, sampling
/// compliance, and the cost-estimate bound.
inline TraceReport check_trace(const Trace& tr, const StabilityCertificate& cert, const Mat& c, double r,
                               const TraceCheckOptions& opt = {}) {
  if (tr.size() == 0) throw std::invalid_argument("check_trace: empty trace");
  if (cert.q.dim() != tr.n) throw DimensionError("check_trace: certificate and trace dimensions differ");
  if (!(r > 0.0)) throw std::invalid_argument("check_trace: R must be positive");
  TraceReport rep;
  const double tol = opt.dwell_tol >= 0.0 ? opt.dwell_tol : tr.step;
  double prev = tr.times.front();
  for (const auto& ev : tr.switches) {
    rep.min_gap = std::min(rep.min_gap, ev.time - prev);
    prev = ev.time;
  }
  if (rep.min_gap < tr.dwell - tol) {
    rep.dwell_ok = false;
    rep.failures.push_back("dwell: inter-switch gap " + std::to_string(rep.min_gap) + " below T = " + std::to_string(tr.dwell));
  }
  // A mode change between recorded rows with no switch event is a violation too.
  {
    std::size_t ev = 0;
    for (std::size_t k = 1; k < tr.size(); ++k) {
      while (ev < tr.switches.size() && tr.switches[ev].time <= tr.times[k - 1]) ++ev;
      std::size_t m = tr.sigma[k - 1];
      std::size_t e2 = ev;
      while (e2 < tr.switches.size() && tr.switches[e2].time <= tr.times[k]) m = tr.switches[e2++].to;
      if (m != tr.sigma[k]) {
        rep.dwell_ok = false;
        rep.failures.push_back("dwell: mode changes at t = " + std::to_string(tr.times[k]) + " without a switching event");
        break;
      }
    }
  }
  for (const auto& ev : tr.switches) {
    const double jump = ev.vphi_after - ev.vphi_before;
    rep.max_jump = std::max(rep.max_jump, jump);
    if (jump > opt.jump_rel_tol * (1.0 + std::abs(ev.vphi_before))) {
      rep.jump_ok = false;
      rep.failures.push_back("jump: V_phi increases by " + std::to_string(jump) + " at t = " + std::to_string(ev.time));
    }
  }
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k] - tr.times.front();
    const double lhs = dot(tr.phi[k], tr.phi[k]) + dot(tr.e[k], tr.e[k]);
    const double env = cert.envelope(t, r);
    rep.max_envelope_ratio = std::max(rep.max_envelope_ratio, lhs / env);
    if (lhs > env * (1.0 + opt.envelope_slack) && rep.envelope_ok) {
      rep.envelope_ok = false;
      rep.failures.push_back("envelope: |phi|^2 + |e|^2 exceeds M e^{-2 alpha t} R^2 at t = " + std::to_string(t));
    }
  }
  for (std::size_t k = 1; k < tr.sample_times.size(); ++k)
    rep.max_sample_gap = std::max(rep.max_sample_gap, tr.sample_times[k] - tr.sample_times[k - 1]);
  if (rep.max_sample_gap > tr.max_sample_period * (1.0 + 1e-9)) {
    rep.sampling_ok = false;
    rep.failures.push_back("sampling: gap " + std::to_string(rep.max_sample_gap) + " exceeds h");
  }
  if (!tr.j.empty()) {
    const double bound = 3.0 * cert.m * spectral_norm(c.transpose() * c) * r * r / (2.0 * cert.tuning.alpha);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double t = tr.times[k] - tr.times.front();
      if (t < 1.0) continue;
      rep.max_cost_ratio = std::max(rep.max_cost_ratio, t * std::abs(tr.j[k] - tr.j_hat[k]) / bound);
    }
    if (rep.max_cost_ratio > 1.0) {
      rep.cost_ok = false;
      rep.failures.push_back("cost: t |J - J_hat| exceeds 3 M ||C^T C|| R^2 / (2 alpha)");
    }
  }
  return rep;
}

/// Trace as CSV: time, x1..xn, phi1..phin, e1..en, sigma (1-based), Vphi, J, Jhat.
inline void write_trace_csv(std::ostream& os, const Trace& tr) {
  os << "time";
  for (const char* p : {"x", "phi", "e"})
    for (std::size_t q = 0; q < tr.n; ++q) os << ',' << p << q + 1;
  os << ",sigma,Vphi,J,Jhat\n";
  os.precision(17);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << tr.times[k];
    for (const auto* v : {&tr.x[k], &tr.phi[k], &tr.e[k]})
      for (double d : *v) os << ',' << d;
    os << ',' << tr.sigma[k] + 1 << ',' << tr.vphi[k] << ',' << (tr.j.empty() ? 0.0 : tr.j[k]) << ','
       << (tr.j_hat.empty() ? 0.0 : tr.j_hat[k]) << '\n';
  }
}

/// Events as CSV: kind, time, from_mode, to_mode (1-based; sampling rows repeat
/// the active mode).
inline void write_events_csv(std::ostream& os, const Trace& tr) {
  os << "kind,time,from_mode,to_mode\n";
  os.precision(17);
  auto mode_at = [&](double t) {
    std::size_t m = tr.sigma.empty() ? 0 : tr.sigma.front();
    for (const auto& ev : tr.switches) {
      if (ev.time > t) break;
      m = ev.to;
    }
    return m + 1;
  };
  std::size_t si = 0, wi = 0;
  while (si < tr.sample_times.size() || wi < tr.switches.size()) {
    const bool take_sample =
        wi >= tr.switches.size() || (si < tr.sample_times.size() && tr.sample_times[si] <= tr.switches[wi].time);
    if (take_sample) {
      const std::size_t m = mode_at(tr.sample_times[si]);
      os << "sample," << tr.sample_times[si++] << ',' << m << ',' << m << '\n';
    } else {
      const auto& ev = tr.switches[wi++];
      os << "switch," << ev.time << ',' << ev.from + 1 << ',' << ev.to + 1 << '\n';
    }
  }
}

}  // namespace lmswitch
