#pragma once

// JSON problem configs and certificate documents.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmswitch/certify.hpp"
#include "lmswitch/dwell_design.hpp"
#include "lmswitch/observer_design.hpp"
#include "lmswitch/plant.hpp"
#include "lmswitch/sim.hpp"

namespace lmswitch {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModeConfig {
  Mat a;
  Mat d;
  std::optional<Mat> gain;  ///< absent: synthesised
  Nonlinearity f;
  double kappa = 0.0;  ///< Lipschitz constant used in Psi

  friend bool operator==(const ModeConfig&, const ModeConfig&) = default;
};

struct SimulationConfig {
  Vec x0;
  double duration = 20.0;
  double step = 0.0;
  double sample_period = 0.0;
  SamplingSchedule schedule = SamplingSchedule::uniform;
  std::size_t initial_mode = 1;  ///< 1-based, as in the file
  std::uint64_t seed = 1;

  friend bool operator==(const SimulationConfig&, const SimulationConfig&) = default;
};

struct ProblemConfig {
  int schema_version = kSchemaVersion;
  std::string name = "problem";
  std::string note;
  std::vector<ModeConfig> modes;
  Mat c;
  Mat metzler;
  double zeta = 0.1;
  double dwell = 0.1;
  double h = 0.05;
  double alpha = 1e-6;
  double eps = 0.0;  ///< <= 0: automatic
  double eta = 0.1;
  double stencil = 0.01;
  double gain_bound = 10.0;
  double omega_max = 1e4;
  SimulationConfig sim;
  std::optional<double> b_bar;  ///< bound on ||B_i|| for the affine variant

  friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;

  SwitchedPlant plant() const {
    SwitchedPlant p;
    for (const auto& m : modes) p.modes.push_back({m.a, m.d, m.f});
    p.c = c;
    return p;
  }
  std::vector<std::optional<Mat>> gains() const {
    std::vector<std::optional<Mat>> g;
    for (const auto& m : modes) g.push_back(m.gain);
    return g;
  }
  bool all_gains_given() const {
    for (const auto& m : modes)
      if (!m.gain) return false;
    return true;
  }
  TuningParams tuning() const {
    TuningParams tp;
    tp.h = h;
    tp.alpha = alpha;
    tp.eps = eps;
    tp.stencil = stencil;
    for (const auto& m : modes) tp.kappa.push_back(m.kappa);
    return tp;
  }
  ObserverOptions observer_options() const {
    ObserverOptions o;
    o.gain_bound = gain_bound;
    o.omega_max = omega_max;
    return o;
  }
  SimConfig sim_config() const {
    SimConfig s;
    s.x0 = sim.x0;
    s.duration = sim.duration;
    s.step = sim.step;
    s.sample_period = sim.sample_period;
    s.max_sample_period = h;
    s.schedule = sim.schedule;
    s.initial_mode = sim.initial_mode - 1;
    s.seed = sim.seed;
    return s;
  }
};

// ---- matrices ---------------------------------------------------------------

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json to_json(const Vec& v) { return json(v); }

inline Mat mat_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ConfigError(what + ": rows must be non-empty arrays");
  const std::size_t cols = j[0].size();
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(what + ": ragged rows");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ConfigError(what + ": non-numeric entry");
      const double v = j[i][k].get<double>();
      if (!std::isfinite(v)) throw ConfigError(what + ": non-finite entry");
      m(i, k) = v;
    }
  }
  return m;
}

inline Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array");
  Vec v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(what + ": non-numeric entry");
    v.push_back(e.get<double>());
  }
  return v;
}

namespace detail {

inline double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) throw ConfigError(std::string("'") + key + "' must be finite");
  return v;
}

inline const json& req(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return j[key];
}

}  // namespace detail

// ---- problem config ---------------------------------------------------------

inline json to_json(const Nonlinearity& f) {
  json j{{"kind", to_string(f.kind)}};
  if (f.kind == NonlinearityKind::norm_saturation || f.kind == NonlinearityKind::sine) j["kappa"] = f.kappa;
  if (f.kind == NonlinearityKind::constant) j["b"] = f.b;
  return j;
}

inline Nonlinearity nonlinearity_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("nonlinearity must be an object");
  Nonlinearity f;
  try {
    f.kind = nonlinearity_kind_from_string(detail::req(j, "kind").get<std::string>());
  } catch (const json::exception&) {
    throw ConfigError("nonlinearity kind must be a string");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (f.kind == NonlinearityKind::norm_saturation || f.kind == NonlinearityKind::sine) f.kappa = detail::num(j, "kappa", 0.0);
  if (f.kind == NonlinearityKind::constant) f.b = vec_from_json(detail::req(j, "b"), "nonlinearity.b");
  return f;
}

inline json to_json(const ProblemConfig& c) {
  json modes = json::array();
  for (const auto& m : c.modes) {
    json jm{{"A", to_json(m.a)}, {"D", to_json(m.d)}, {"nonlinearity", to_json(m.f)}, {"kappa", m.kappa}};
    jm["L"] = m.gain ? to_json(*m.gain) : json(nullptr);
    modes.push_back(std::move(jm));
  }
  json j{{"schema_version", c.schema_version},
         {"name", c.name},
         {"note", c.note},
         {"modes", modes},
         {"C", to_json(c.c)},
         {"metzler", to_json(c.metzler)},
         {"zeta", c.zeta},
         {"dwell", c.dwell},
         {"h", c.h},
         {"alpha", c.alpha},
         {"eps", c.eps},
         {"eta", c.eta},
         {"grid", {{"stencil", c.stencil}}},
         {"observer", {{"gain_bound", c.gain_bound}, {"omega_max", c.omega_max}}},
         {"simulation",
          {{"x0", c.sim.x0},
           {"duration", c.sim.duration},
           {"step", c.sim.step},
           {"sample_period", c.sim.sample_period},
           {"schedule", c.sim.schedule == SamplingSchedule::jittered ? "jittered" : "uniform"},
           {"initial_mode", c.sim.initial_mode},
           {"seed", c.sim.seed}}}};
  if (c.b_bar) j["b_bar"] = *c.b_bar;
  return j;
}

/// Checks shapes and value ranges; throws ConfigError.
inline void validate(const ProblemConfig& c) {
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  if (c.modes.size() < 2) throw ConfigError("at least two modes are required");
  const std::size_t n = c.modes[0].a.rows();
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    const auto& m = c.modes[i];
    const std::string tag = "mode " + std::to_string(i + 1);
    if (m.a.rows() != n || m.a.cols() != n) throw ConfigError(tag + ": A must be " + std::to_string(n) + "x" + std::to_string(n));
    if (m.d.cols() != n) throw ConfigError(tag + ": D must have " + std::to_string(n) + " columns");
    if (m.gain && (m.gain->rows() != n || m.gain->cols() != m.d.rows()))
      throw ConfigError(tag + ": L must be " + std::to_string(n) + "x" + std::to_string(m.d.rows()));
    if (m.f.kind == NonlinearityKind::constant && m.f.b.size() != n)
      throw ConfigError(tag + ": constant nonlinearity must have length " + std::to_string(n));
    if (m.f.kappa < 0.0 || m.kappa < 0.0) throw ConfigError(tag + ": kappa must be non-negative");
  }
  if (c.c.cols() != n) throw ConfigError("C must have " + std::to_string(n) + " columns");
  if (c.metzler.rows() != c.modes.size() || c.metzler.cols() != c.modes.size())
    throw ConfigError("metzler must be " + std::to_string(c.modes.size()) + "x" + std::to_string(c.modes.size()));
  try {
    MetzlerMatrix check(c.metzler);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(c.zeta, "zeta");
  positive(c.dwell, "dwell");
  positive(c.h, "h");
  positive(c.alpha, "alpha");
  positive(c.eta, "eta");
  positive(c.stencil, "grid.stencil");
  positive(c.gain_bound, "observer.gain_bound");
  positive(c.omega_max, "observer.omega_max");
  if (!(c.alpha < c.zeta)) throw ConfigError("alpha must be smaller than zeta");
  if (c.sim.x0.size() != n) throw ConfigError("simulation.x0 must have length " + std::to_string(n));
  positive(c.sim.duration, "simulation.duration");
  if (c.sim.step < 0.0 || c.sim.sample_period < 0.0) throw ConfigError("simulation step and sample_period must be >= 0");
  if (c.sim.initial_mode < 1 || c.sim.initial_mode > c.modes.size())
    throw ConfigError("simulation.initial_mode must lie in 1.." + std::to_string(c.modes.size()));
  if (c.b_bar && *c.b_bar < 0.0) throw ConfigError("b_bar must be non-negative");
}

inline ProblemConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ProblemConfig c;
  try {
    c.schema_version = detail::req(j, "schema_version").get<int>();
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("note")) c.note = j["note"].get<std::string>();
    const auto& modes = detail::req(j, "modes");
    if (!modes.is_array()) throw ConfigError("'modes' must be an array");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const auto& jm = modes[i];
      const std::string tag = "modes[" + std::to_string(i) + "]";
      ModeConfig m;
      m.a = mat_from_json(detail::req(jm, "A"), tag + ".A");
      m.d = mat_from_json(detail::req(jm, "D"), tag + ".D");
      if (jm.contains("L") && !jm["L"].is_null()) m.gain = mat_from_json(jm["L"], tag + ".L");
      if (jm.contains("nonlinearity")) m.f = nonlinearity_from_json(jm["nonlinearity"]);
      m.kappa = detail::num(jm, "kappa", m.f.kappa);
      c.modes.push_back(std::move(m));
    }
    c.c = mat_from_json(detail::req(j, "C"), "C");
    c.metzler = mat_from_json(detail::req(j, "metzler"), "metzler");
    c.zeta = detail::num(j, "zeta", c.zeta);
    c.dwell = detail::num(j, "dwell", c.dwell);
    c.h = detail::num(j, "h", c.h);
    c.alpha = detail::num(j, "alpha", c.alpha);
    c.eps = detail::num(j, "eps", c.eps);
    c.eta = detail::num(j, "eta", c.eta);
    if (j.contains("grid")) c.stencil = detail::num(j["grid"], "stencil", c.stencil);
    if (j.contains("observer")) {
      c.gain_bound = detail::num(j["observer"], "gain_bound", c.gain_bound);
      c.omega_max = detail::num(j["observer"], "omega_max", c.omega_max);
    }
    const std::size_t n = c.modes.empty() ? 0 : c.modes[0].a.rows();
    c.sim.x0 = Vec(n, 1.0);
    if (j.contains("simulation")) {
      const auto& s = j["simulation"];
      if (s.contains("x0")) c.sim.x0 = vec_from_json(s["x0"], "simulation.x0");
      c.sim.duration = detail::num(s, "duration", c.sim.duration);
      c.sim.step = detail::num(s, "step", c.sim.step);
      c.sim.sample_period = detail::num(s, "sample_period", c.sim.sample_period);
      if (s.contains("schedule")) {
        const auto k = s["schedule"].get<std::string>();
        if (k == "uniform") c.sim.schedule = SamplingSchedule::uniform;
        else if (k == "jittered") c.sim.schedule = SamplingSchedule::jittered;
        else throw ConfigError("simulation.schedule must be 'uniform' or 'jittered'");
      }
      if (s.contains("initial_mode")) c.sim.initial_mode = s["initial_mode"].get<std::size_t>();
      if (s.contains("seed")) c.sim.seed = s["seed"].get<std::uint64_t>();
    }
    if (j.contains("b_bar") && !j["b_bar"].is_null()) c.b_bar = detail::num(j, "b_bar", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  validate(c);
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline ProblemConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

namespace detail {

// Indented like dump(2), but arrays of scalars stay on one line so matrices
// read row by row.
inline void pretty(std::ostream& os, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  const std::string inner(static_cast<std::size_t>(indent + 2), ' ');
  if (j.is_object()) {
    if (j.empty()) {
      os << "{}";
      return;
    }
    os << "{\n";
    std::size_t k = 0;
    for (auto it = j.begin(); it != j.end(); ++it, ++k) {
      os << inner << json(it.key()).dump() << ": ";
      pretty(os, it.value(), indent + 2);
      os << (k + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << '}';
  } else if (j.is_array()) {
    bool flat = true;
    for (const auto& e : j) flat = flat && !e.is_structured();
    if (flat) {
      os << j.dump();
      return;
    }
    os << "[\n";
    for (std::size_t k = 0; k < j.size(); ++k) {
      os << inner;
      pretty(os, j[k], indent + 2);
      os << (k + 1 < j.size() ? ",\n" : "\n");
    }
    os << pad << ']';
  } else {
    os << j.dump();
  }
}

}  // namespace detail

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  detail::pretty(out, j, 0);
  out << '\n';
}

// ---- built-in examples ------------------------------------------------------

/// Example 1 with the sign-corrected L_1 (see `note`). `printed_gains` keeps
/// L_1 exactly as printed.
inline ProblemConfig example1(bool printed_gains = false) {
  ProblemConfig c;
  c.name = printed_gains ? "ex1_printed" : "ex1";
  const Mat d{{1, 1}, {1, -1}};
  const Mat l1 = printed_gains ? Mat{{-1.5, -0.85}, {-0.85, 1.5}} : Mat{{1.5, 0.85}, {0.85, -1.5}};
  c.note = printed_gains ? "Example 1 with L1 exactly as printed; A1 - L1 D is not Hurwitz for this gain."
                         : "Example 1; L1 is the printed gain with its sign flipped so that A1 - L1 D is Hurwitz.";
  c.modes = {{Mat{{-2, 0.3}, {-2, 1}}, d, l1, Nonlinearity::norm_saturation(0.002), 0.002},
             {Mat{{1, 2}, {-0.3, -4}}, d, Mat{{1.5, 0.85}, {0.85, -3.5}}, Nonlinearity::norm_saturation(0.002), 0.002}};
  c.c = Mat::identity(2) * 1e-5;
  c.metzler = Mat{{-21.21, 21.21}, {21.21, -21.21}};
  c.zeta = 0.1;
  c.dwell = 0.1;
  c.h = 0.05;
  c.alpha = 1e-6;
  c.eta = 0.1;
  c.stencil = 0.01;
  c.sim.x0 = {1.0, 1.0};
  c.sim.duration = 20.0;
  return c;
}

/// Example 1 plant with constant nonlinearities B_i and kappa = 0.
inline ProblemConfig example1_affine() {
  ProblemConfig c = example1();
  c.name = "ex1_affine";
  c.note = "Example 1 with f_i replaced by the constants B_i = [0.05, 0.05] and kappa = 0.";
  for (auto& m : c.modes) {
    m.f = Nonlinearity::constant({0.05, 0.05});
    m.kappa = 0.0;
  }
  c.b_bar = 0.1;
  c.sim.duration = 200.0;
  return c;
}

/// Example 2; L3 is synthesised with the printed L1, L2 fixed.
inline ProblemConfig example2() {
  ProblemConfig c;
  c.name = "ex2";
  c.note = "Example 2 with eta = 1, beta = 1.1; L3 is synthesised and kappa3 = 0.002 by analogy with kappa1, kappa2.";
  const double e = 1.0, b = 1.1;
  const Mat d{{1, 1, 1}};
  c.modes = {{Mat{{-e, 0, 0}, {0, 0, 0}, {0, b, 0}}, d, Mat{{-0.51}, {0.53}, {0.53}}, Nonlinearity::sine(0.002), 0.002},
             {Mat{{0, 0, b}, {0, -e, 0}, {0, 0, 0}}, d, Mat{{0.53}, {-0.51}, {0.53}}, Nonlinearity::sine(0.002), 0.002},
             {Mat{{0, 0, 0}, {b, 0, 0}, {0, 0, -e}}, d, std::nullopt, Nonlinearity::sine(0.002), 0.002}};
  c.c = Mat::identity(3);
  c.metzler = Mat{{-10, 0, 10}, {10, -10, 0}, {0, 10, -10}};
  c.zeta = 0.1;
  c.dwell = 2.1;
  c.h = 0.2;
  c.alpha = 1e-6;
  c.eta = 0.1;
  c.stencil = 0.01;
  c.sim.x0 = {1.0, 1.0, 1.0};
  c.sim.duration = 60.0;
  return c;
}

inline std::optional<ProblemConfig> builtin_example(int id) {
  if (id == 1) return example1();
  if (id == 2) return example2();
  return std::nullopt;
}

// ---- certificates -----------------------------------------------------------

struct DesignBundle {
  ObserverDesign observer;
  DwellCertificate dwell;
};

inline json to_json(const ObserverDesign& o) {
  json gains = json::array(), syn = json::array();
  for (std::size_t i = 0; i < o.size(); ++i) {
    gains.push_back(to_json(o.gains[i]));
    syn.push_back(static_cast<bool>(o.synthesized[i]));
  }
  return {{"eta", o.eta}, {"omega", to_json(o.omega.mat())}, {"gains", gains}, {"synthesized", syn},
          {"margin", o.margin}, {"warnings", o.warnings}};
}

inline json to_json(const DwellCertificate& d) {
  json x = json::array(), y1 = json::array(), y2 = json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    x.push_back(to_json(d.x[i].mat()));
    y1.push_back(to_json(d.y1[i].mat()));
    y2.push_back(to_json(d.y2[i].mat()));
  }
  return {{"metzler", to_json(d.pi.mat())}, {"zeta", d.zeta}, {"dwell", d.dwell}, {"X", x}, {"Y1", y1}, {"Y2", y2},
          {"lm_margin", d.lm_margin}};
}

inline json design_document(const ProblemConfig& cfg, const DesignBundle& b) {
  return {{"schema_version", kSchemaVersion}, {"kind", "design"}, {"config", cfg.name},
          {"observer", to_json(b.observer)}, {"dwell", to_json(b.dwell)}};
}

/// Rebuilds the observer from saved gains and Omega; the margin is recomputed
/// from the plant, not trusted from the file.
inline ObserverDesign observer_from_json(const SwitchedPlant& plant, const json& j) {
  ObserverDesign o;
  try {
    o.eta = j.at("eta").get<double>();
    o.omega = SymMat(mat_from_json(j.at("omega"), "observer.omega"));
    const auto& g = j.at("gains");
    if (!g.is_array() || g.size() != plant.size()) throw ConfigError("observer.gains must have one entry per mode");
    for (std::size_t i = 0; i < plant.size(); ++i) {
      Mat l = mat_from_json(g[i], "observer.gains");
      if (l.rows() != plant.n() || l.cols() != plant.modes[i].d.rows()) throw ConfigError("observer gain shape mismatch");
      o.u.push_back(plant.modes[i].a - l * plant.modes[i].d);
      o.ld.push_back(l * plant.modes[i].d);
      o.gains.push_back(std::move(l));
      o.synthesized.push_back(j.contains("synthesized") ? j["synthesized"].at(i).get<bool>() : false);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed observer section: ") + e.what());
  }
  if (o.omega.dim() != plant.n()) throw ConfigError("observer.omega shape mismatch");
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& u : o.u) margin = std::min(margin, -lambda_max(phi_matrix(u, o.omega, o.eta)));
  o.margin = margin;
  return o;
}

/// Rebuilds the dwell certificate from Pi, zeta, T and X_i; Y1, Y2 and the
/// margin are recomputed.
inline DwellCertificate dwell_from_json(const SwitchedPlant& plant, const json& j) {
  DwellCertificate d;
  try {
    d.pi = MetzlerMatrix(mat_from_json(j.at("metzler"), "dwell.metzler"));
    d.zeta = j.at("zeta").get<double>();
    d.dwell = j.at("dwell").get<double>();
    const auto& xs = j.at("X");
    if (!xs.is_array() || xs.size() != plant.size()) throw ConfigError("dwell.X must have one entry per mode");
    for (std::size_t i = 0; i < plant.size(); ++i) {
      d.x.emplace_back(mat_from_json(xs[i], "dwell.X"));
      if (d.x.back().dim() != plant.n()) throw ConfigError("dwell.X shape mismatch");
      const auto y = compute_y(plant.modes[i].a, plant.ctc(), d.x.back(), d.zeta, d.dwell);
      d.y1.push_back(y.y1);
      d.y2.push_back(y.y2);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dwell section: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  d.lm_margin = recertify(plant, d).first;
  return d;
}

inline DesignBundle design_from_document(const SwitchedPlant& plant, const json& j) {
  if (!j.is_object() || j.value("kind", "") != "design") throw ConfigError("not a design certificate");
  if (j.value("schema_version", 0) != kSchemaVersion) throw ConfigError("unsupported certificate schema_version");
  return {observer_from_json(plant, j.at("observer")), dwell_from_json(plant, j.at("dwell"))};
}

struct StabilityDocument {
  StabilityCertificate cert;
  std::optional<FinerReport> finer;
  std::size_t finer_factor = 0;
};

inline json stability_document(const ProblemConfig& cfg, const StabilityDocument& s) {
  const auto& c = s.cert;
  json grid = json::array();
  for (const auto& g : c.grid) grid.push_back(g);
  json j{{"schema_version", kSchemaVersion},
         {"kind", "stability"},
         {"config", cfg.name},
         {"Q", to_json(c.q.mat())},
         {"W", to_json(c.w.mat())},
         {"gamma", c.gamma},
         {"worst_eig", c.worst_eig},
         {"eps", c.eps},
         {"C1", c.c1},
         {"C2", c.c2},
         {"C3", c.c3},
         {"C4", c.c4},
         {"M", c.m},
         {"zeta", c.zeta},
         {"tuning",
          {{"h", c.tuning.h}, {"alpha", c.tuning.alpha}, {"kappa", c.tuning.kappa}, {"eps", c.tuning.eps},
           {"stencil", c.tuning.stencil}}},
         {"grid", grid},
         {"mu", c.mu},
         {"fine_stencil", c.fine_stencil},
         {"fine_points", c.fine_points},
         {"continuum_verified", c.continuum_verified},
         {"rounds", c.rounds},
         {"solver_iterations", c.solver_iterations}};
  if (s.finer)
    j["finer"] = {{"r", s.finer_factor}, {"worst", s.finer->worst}, {"points", s.finer->points},
                  {"violations", s.finer->violations}};
  return j;
}

inline StabilityCertificate stability_from_document(const json& j) {
  if (!j.is_object() || j.value("kind", "") != "stability") throw ConfigError("not a stability certificate");
  if (j.value("schema_version", 0) != kSchemaVersion) throw ConfigError("unsupported certificate schema_version");
  StabilityCertificate c;
  try {
    c.q = SymMat(mat_from_json(j.at("Q"), "Q"));
    c.w = SymMat(mat_from_json(j.at("W"), "W"));
    c.gamma = j.at("gamma").get<double>();
    c.worst_eig = j.at("worst_eig").get<double>();
    c.eps = j.at("eps").get<double>();
    c.c1 = j.at("C1").get<double>();
    c.c2 = j.at("C2").get<double>();
    c.c3 = j.at("C3").get<double>();
    c.c4 = j.at("C4").get<double>();
    c.m = j.at("M").get<double>();
    c.zeta = j.at("zeta").get<double>();
    const auto& t = j.at("tuning");
    c.tuning.h = t.at("h").get<double>();
    c.tuning.alpha = t.at("alpha").get<double>();
    c.tuning.kappa = t.at("kappa").get<std::vector<double>>();
    c.tuning.eps = t.at("eps").get<double>();
    c.tuning.stencil = t.at("stencil").get<double>();
    c.grid = j.at("grid").get<std::vector<std::vector<double>>>();
    c.mu = j.at("mu").get<std::vector<double>>();
    c.fine_stencil = j.at("fine_stencil").get<std::vector<double>>();
    c.fine_points = j.at("fine_points").get<std::size_t>();
    c.continuum_verified = j.at("continuum_verified").get<bool>();
    c.rounds = j.at("rounds").get<int>();
    c.solver_iterations = j.at("solver_iterations").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed stability certificate: ") + e.what());
  }
  return c;
}

}  // namespace lmswitch
