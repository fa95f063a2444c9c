#pragma once

// Command implementations behind the lmswitch executable. Each returns the
// process exit code: 0 ok, 1 input error, 2 infeasible, 3 trace check failed.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "lmswitch/certify.hpp"
#include "lmswitch/config.hpp"
#include "lmswitch/dwell_design.hpp"
#include "lmswitch/observer_design.hpp"
#include "lmswitch/sim.hpp"
#include "lmswitch/svg.hpp"

namespace lmswitch::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kInfeasible = 2, kCheckFailed = 3 };

struct Options {
  std::string config;  ///< path to *.config.json
  std::string out = ".";
  std::string design;       ///< design certificate; default <out>/<name>.design.cert.json
  std::string certificate;  ///< stability certificate; default <out>/<name>.stability.cert.json
  bool plot = false;
  std::optional<double> grid_stencil;
  std::optional<std::uint64_t> seed;
  std::size_t finer = 10;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

namespace fs = std::filesystem;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline ProblemConfig load(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  ProblemConfig c = load_config(o.config);
  if (o.grid_stencil) {
    if (!(*o.grid_stencil > 0.0)) throw ConfigError("--grid-stencil must be positive");
    c.stencil = *o.grid_stencil;
  }
  if (o.seed) c.sim.seed = *o.seed;
  if (o.finer < 1) throw ConfigError("--finer must be at least 1");
  return c;
}

inline fs::path design_path(const Options& o, const ProblemConfig& c) {
  return o.design.empty() ? fs::path(o.out) / (c.name + ".design.cert.json") : fs::path(o.design);
}

inline fs::path certificate_path(const Options& o, const ProblemConfig& c) {
  return o.certificate.empty() ? fs::path(o.out) / (c.name + ".stability.cert.json") : fs::path(o.certificate);
}

// Runs f, mapping exceptions onto exit codes.
template <class F>
int guarded(Streams io, const char* verb, F&& f) {
  try {
    return f();
  } catch (const InfeasibleError& e) {
    io.err << verb << ": infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const DesignFailure& e) {
    io.err << verb << ": infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::invalid_argument& e) {
    io.err << verb << ": input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::out_of_range& e) {
    io.err << verb << ": input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    io.err << verb << ": error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace detail

/// Observer gains (designed or verified) and the Lyapunov-Metzler certificate.
inline DesignBundle run_design(const ProblemConfig& cfg, Streams io) {
  const SwitchedPlant plant = cfg.plant();
  DesignBundle b;
  try {
    b.observer = design_gains(plant, cfg.eta, cfg.gains(), cfg.observer_options());
  } catch (const DesignFailure& e) {
    if (!cfg.all_gains_given()) throw;
    throw DesignFailure(std::string("given observer gains fail verification: ") + e.what());
  }
  for (const auto& w : b.observer.warnings) io.err << "warning: " << w << '\n';
  b.dwell = solve_lyapunov_metzler(plant, MetzlerMatrix(cfg.metzler), cfg.zeta, cfg.dwell);
  io.out << "observer: margin " << detail::num(b.observer.margin) << " (eta " << detail::num(cfg.eta) << ")\n";
  for (std::size_t i = 0; i < b.observer.size(); ++i) {
    io.out << "  L" << i + 1 << (b.observer.synthesized[i] ? " (synthesised) =" : " (given) =");
    for (double v : b.observer.gains[i].data()) io.out << ' ' << detail::num(v);
    io.out << '\n';
  }
  io.out << "lyapunov-metzler: margin " << detail::num(b.dwell.lm_margin) << '\n';
  return b;
}

inline StabilityDocument run_certify(const ProblemConfig& cfg, const DesignBundle& b, std::size_t finer, Streams io) {
  const SwitchedPlant plant = cfg.plant();
  const PFlow flow(plant, b.dwell);
  StabilityDocument doc;
  try {
    bool affine = cfg.b_bar.has_value();
    for (const auto& m : cfg.modes) affine = affine && m.kappa == 0.0;
    // gamma enters the ultimate bound, so it is minimised in the affine case
    doc.cert = affine ? synthesize_min_gamma(b.observer, flow, cfg.tuning()) : synthesize(b.observer, flow, cfg.tuning());
  } catch (const InfeasibleError& e) {
    std::string msg = e.what();
    const auto red = reduced_feasible(b.observer, flow, uniform_grid(cfg.dwell, cfg.stencil));
    if (!red.feasible())
      msg += "; the reduced condition Gamma < 0 also fails, so no (h, alpha, kappa) can succeed: revisit L_i or Pi";
    throw InfeasibleError(msg);
  }
  doc.finer = verify_finer(b.observer, flow, doc.cert, finer);
  doc.finer_factor = finer;
  const auto& c = doc.cert;
  io.out << "stability: worst eigenvalue " << detail::num(c.worst_eig) << ", eps " << detail::num(c.eps) << ", gamma "
         << detail::num(c.gamma) << '\n';
  io.out << "  C1 " << detail::num(c.c1) << "  C2 " << detail::num(c.c2) << "  C3 " << detail::num(c.c3) << "  C4 "
         << detail::num(c.c4) << "  M " << detail::num(c.m) << '\n';
  io.out << "  verification grid: " << c.fine_points << " points, continuum "
         << (c.continuum_verified ? "verified" : "NOT verified") << '\n';
  io.out << "  finer x" << finer << ": worst " << detail::num(doc.finer->worst) << ", violations "
         << doc.finer->violations << '\n';
  return doc;
}

struct SimulationOutcome {
  Trace trace;
  TraceReport report;
  std::optional<UltimateBound> ultimate;
  double tail_max_x2 = 0.0;  ///< max ||x||^2 over the final 20% of the horizon
};

inline SimulationOutcome run_simulate(const ProblemConfig& cfg, const DesignBundle& b, const StabilityCertificate& cert,
                                      Streams io) {
  const SwitchedPlant plant = cfg.plant();
  SimulationOutcome o;
  o.trace = simulate(plant, b.observer, b.dwell, cfg.sim_config());
  o.report = check_trace(o.trace, cert, plant.c, norm2(cfg.sim.x0));
  const double t_tail = 0.8 * o.trace.times.back();
  for (std::size_t k = 0; k < o.trace.size(); ++k)
    if (o.trace.times[k] >= t_tail) o.tail_max_x2 = std::max(o.tail_max_x2, dot(o.trace.x[k], o.trace.x[k]));
  io.out << "simulation: " << o.trace.switches.size() << " switches, min gap " << detail::num(o.report.min_gap)
         << ", final |x| " << detail::num(norm2(o.trace.x.back())) << '\n';
  io.out << "  checks: dwell " << (o.report.dwell_ok ? "ok" : "FAIL") << ", V_phi jumps "
         << (o.report.jump_ok ? "ok" : "FAIL") << ", envelope " << (o.report.envelope_ok ? "ok" : "FAIL")
         << ", sampling " << (o.report.sampling_ok ? "ok" : "FAIL") << ", cost bound "
         << (o.report.cost_ok ? "ok" : "FAIL") << '\n';
  if (cfg.b_bar) {
    bool affine = true;
    for (double k : cert.tuning.kappa) affine = affine && k == 0.0;
    if (affine) {
      o.ultimate = ultimate_bound(cert, *cfg.b_bar);
      io.out << "  ultimate bound on |x|^2: " << detail::num(o.ultimate->x) << ", observed max over final 20%: "
             << detail::num(o.tail_max_x2) << '\n';
    }
  }
  return o;
}

inline void write_simulation(const detail::fs::path& dir, const SimulationOutcome& o, bool plot, const std::string& title) {
  detail::fs::create_directories(dir);
  std::ofstream t(dir / "trace.csv");
  write_trace_csv(t, o.trace);
  std::ofstream e(dir / "events.csv");
  write_events_csv(e, o.trace);
  if (plot) {
    std::ofstream s(dir / "trace.svg");
    write_trace_svg(s, o.trace, title);
  }
}

inline int cmd_design(const Options& opt, Streams io) {
  return detail::guarded(io, "design", [&] {
    const ProblemConfig cfg = detail::load(opt);
    const auto b = run_design(cfg, io);
    const auto path = detail::design_path(opt, cfg);
    write_json_file(path, design_document(cfg, b));
    io.out << "wrote " << path.string() << '\n';
    return int(kOk);
  });
}

inline DesignBundle load_design(const Options& opt, const ProblemConfig& cfg) {
  const auto path = detail::design_path(opt, cfg);
  if (!detail::fs::exists(path)) throw ConfigError("design certificate not found: " + path.string() + " (run design first)");
  return design_from_document(cfg.plant(), read_json_file(path));
}

inline int cmd_certify(const Options& opt, Streams io) {
  return detail::guarded(io, "certify", [&] {
    const ProblemConfig cfg = detail::load(opt);
    const auto b = load_design(opt, cfg);
    const auto doc = run_certify(cfg, b, opt.finer, io);
    const auto path = detail::certificate_path(opt, cfg);
    write_json_file(path, stability_document(cfg, doc));
    io.out << "wrote " << path.string() << '\n';
    return int(kOk);
  });
}

inline int cmd_simulate(const Options& opt, Streams io) {
  return detail::guarded(io, "simulate", [&] {
    const ProblemConfig cfg = detail::load(opt);
    const auto b = load_design(opt, cfg);
    const auto cpath = detail::certificate_path(opt, cfg);
    if (!detail::fs::exists(cpath)) throw ConfigError("stability certificate not found: " + cpath.string() + " (run certify first)");
    const auto cert = stability_from_document(read_json_file(cpath));
    const auto o = run_simulate(cfg, b, cert, io);
    write_simulation(opt.out, o, opt.plot, cfg.name);
    io.out << "wrote " << (detail::fs::path(opt.out) / "trace.csv").string() << '\n';
    if (!o.report.ok()) {
      for (const auto& f : o.report.failures) io.err << "simulate: check failed: " << f << '\n';
      return int(kCheckFailed);
    }
    return int(kOk);
  });
}

/// Full pipeline on a built-in example, written to <out>/ex<id>/.
inline int cmd_reproduce(int id, const Options& opt, Streams io) {
  const auto base = builtin_example(id);
  if (!base) {
    io.err << "reproduce: unknown example " << id << " (expected 1 or 2)\n";
    return kInputError;
  }
  return detail::guarded(io, "reproduce", [&] {
    ProblemConfig cfg = *base;
    if (opt.grid_stencil) cfg.stencil = *opt.grid_stencil;
    if (opt.seed) cfg.sim.seed = *opt.seed;
    validate(cfg);
    const auto dir = detail::fs::path(opt.out) / ("ex" + std::to_string(id));
    const auto t0 = std::chrono::steady_clock::now();
    io.out << "example " << id << ": " << cfg.note << '\n';
    const auto b = run_design(cfg, io);
    const auto doc = run_certify(cfg, b, opt.finer, io);
    const auto o = run_simulate(cfg, b, doc.cert, io);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_json_file(dir / (cfg.name + ".config.json"), to_json(cfg));
    write_json_file(dir / (cfg.name + ".design.cert.json"), design_document(cfg, b));
    write_json_file(dir / (cfg.name + ".stability.cert.json"), stability_document(cfg, doc));
    write_simulation(dir, o, true, "Example " + std::to_string(id));

    std::ostringstream s;
    s << "quantity                      value\n";
    s << "observer margin               " << detail::num(b.observer.margin) << '\n';
    s << "lyapunov-metzler margin       " << detail::num(b.dwell.lm_margin) << '\n';
    s << "psi worst eigenvalue          " << detail::num(doc.cert.worst_eig) << '\n';
    s << "psi finer (x" << opt.finer << ") worst         " << detail::num(doc.finer->worst) << '\n';
    s << "M                             " << detail::num(doc.cert.m) << '\n';
    s << "switches                      " << o.trace.switches.size() << '\n';
    s << "min dwell gap                 " << detail::num(o.report.min_gap) << '\n';
    s << "terminal |x|                  " << detail::num(norm2(o.trace.x.back())) << '\n';
    s << "trace checks                  " << (o.report.ok() ? "pass" : "FAIL") << '\n';
    s << "runtime (s)                   " << detail::num(secs) << '\n';
    std::ofstream(dir / "summary.txt") << s.str();
    io.out << s.str() << "wrote " << dir.string() << '\n';
    if (!o.report.ok()) {
      for (const auto& f : o.report.failures) io.err << "reproduce: check failed: " << f << '\n';
      return int(kCheckFailed);
    }
    return int(kOk);
  });
}

}  // namespace lmswitch::cli
