#pragma once

// Strict affine linear matrix inequalities in symmetric, rectangular and
// scalar variables, a log-det barrier feasibility solver, and certification
// of solutions by eigenvalue checks that never look at solver internals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lmswitch/matnum.hpp"

namespace lmswitch {

class LmiError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VarKind { symmetric, full, scalar };

/// Decision variable. `lower` (symmetric and scalar only) requests
/// Var > lower * I strictly; `upper` is a hard magnitude bound that keeps the
/// search region bounded.
struct LmiVar {
  std::string name;
  VarKind kind = VarKind::symmetric;
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::optional<double> lower;
  double upper = 1e6;

  static LmiVar symmetric(std::string name, std::size_t dim, std::optional<double> lower = 0.0,
                          double upper = 1e6) {
    return {std::move(name), VarKind::symmetric, dim, dim, lower, upper};
  }
  static LmiVar scalar(std::string name, std::optional<double> lower = 0.0, double upper = 1e6) {
    return {std::move(name), VarKind::scalar, 1, 1, lower, upper};
  }
  static LmiVar full(std::string name, std::size_t rows, std::size_t cols, double upper = 1e6) {
    return {std::move(name), VarKind::full, rows, cols, std::nullopt, upper};
  }
};

/// Values for a set of named variables (scalars are 1x1).
class Assignment {
 public:
  void set(const std::string& name, Mat value) { values_[name] = std::move(value); }
  void set_scalar(const std::string& name, double v) { values_[name] = Mat{{v}}; }
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  const Mat& at(const std::string& name) const {
    const auto it = values_.find(name);
    if (it == values_.end()) throw LmiError("assignment has no value for variable '" + name + "'");
    return it->second;
  }
  double scalar(const std::string& name) const { return at(name)(0, 0); }
  const std::map<std::string, Mat>& values() const { return values_; }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  std::map<std::string, Mat> values_;
};

/// Matrix-valued affine function of the variables:
///   constant + sum_k left_k * V_k(^T) * right_k + sum_s coef_s * s
class AffineExpr {
 public:
  struct MatTerm {
    std::string var;
    Mat left;
    Mat right;
    bool transposed = false;
  };
  struct ScalarTerm {
    std::string var;
    Mat coef;
  };

  AffineExpr() = default;
  AffineExpr(std::size_t rows, std::size_t cols) : constant_(rows, cols) {}
  explicit AffineExpr(Mat constant) : constant_(std::move(constant)) {}

  /// The matrix variable `name` itself, of the given shape.
  static AffineExpr variable(const std::string& name, std::size_t rows, std::size_t cols) {
    AffineExpr e(rows, cols);
    e.mat_terms_.push_back({name, Mat::identity(rows), Mat::identity(cols), false});
    return e;
  }
  /// Scalar variable `name` multiplying a constant matrix.
  static AffineExpr scaled(const std::string& name, Mat coef) {
    AffineExpr e(coef.rows(), coef.cols());
    e.scalar_terms_.push_back({name, std::move(coef)});
    return e;
  }

  std::size_t rows() const { return constant_.rows(); }
  std::size_t cols() const { return constant_.cols(); }
  const Mat& constant() const { return constant_; }
  const std::vector<MatTerm>& mat_terms() const { return mat_terms_; }
  const std::vector<ScalarTerm>& scalar_terms() const { return scalar_terms_; }

  AffineExpr transpose() const {
    AffineExpr t(constant_.transpose());
    for (const auto& m : mat_terms_) t.mat_terms_.push_back({m.var, m.right.transpose(), m.left.transpose(), !m.transposed});
    for (const auto& s : scalar_terms_) t.scalar_terms_.push_back({s.var, s.coef.transpose()});
    return t;
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    if (rows() != o.rows() || cols() != o.cols()) throw DimensionError("AffineExpr shape mismatch in +");
    constant_ += o.constant_;
    mat_terms_.insert(mat_terms_.end(), o.mat_terms_.begin(), o.mat_terms_.end());
    scalar_terms_.insert(scalar_terms_.end(), o.scalar_terms_.begin(), o.scalar_terms_.end());
    return *this;
  }
  AffineExpr& operator+=(const Mat& c) {
    constant_ += c;
    return *this;
  }
  AffineExpr& operator*=(double s) {
    constant_ *= s;
    for (auto& m : mat_terms_) m.left *= s;
    for (auto& t : scalar_terms_) t.coef *= s;
    return *this;
  }

  friend AffineExpr operator*(const Mat& m, const AffineExpr& e) {
    AffineExpr r(m * e.constant_);
    for (const auto& t : e.mat_terms_) r.mat_terms_.push_back({t.var, m * t.left, t.right, t.transposed});
    for (const auto& t : e.scalar_terms_) r.scalar_terms_.push_back({t.var, m * t.coef});
    return r;
  }
  friend AffineExpr operator*(const AffineExpr& e, const Mat& m) {
    AffineExpr r(e.constant_ * m);
    for (const auto& t : e.mat_terms_) r.mat_terms_.push_back({t.var, t.left, t.right * m, t.transposed});
    for (const auto& t : e.scalar_terms_) r.scalar_terms_.push_back({t.var, t.coef * m});
    return r;
  }

  /// Evaluates the expression directly from its terms.
  Mat evaluate(const Assignment& a) const {
    Mat v = constant_;
    for (const auto& t : mat_terms_) {
      const Mat& x = a.at(t.var);
      v += t.left * (t.transposed ? x.transpose() : x) * t.right;
    }
    for (const auto& t : scalar_terms_) v += t.coef * a.scalar(t.var);
    return v;
  }

 private:
  Mat constant_;
  std::vector<MatTerm> mat_terms_;
  std::vector<ScalarTerm> scalar_terms_;
};

inline AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
inline AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
  AffineExpr nb = b;
  nb *= -1.0;
  return a += nb;
}
inline AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
inline AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
inline AffineExpr operator+(AffineExpr a, const Mat& c) { return a += c; }

/// Assembles a symmetric block matrix from its upper-triangular blocks;
/// the strictly lower blocks are the transposes. Unset blocks are zero.
class BlockBuilder {
 public:
  explicit BlockBuilder(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    offsets_.resize(dims_.size(), 0);
    for (std::size_t k = 1; k < dims_.size(); ++k) offsets_[k] = offsets_[k - 1] + dims_[k - 1];
    total_ = offsets_.empty() ? 0 : offsets_.back() + dims_.back();
  }

  void set(std::size_t r, std::size_t c, const AffineExpr& e) {
    if (r > c) throw DimensionError("BlockBuilder::set expects an upper-triangular block");
    if (e.rows() != dims_[r] || e.cols() != dims_[c]) throw DimensionError("BlockBuilder block shape mismatch");
    blocks_.push_back({r, c, e});
  }
  void set(std::size_t r, std::size_t c, const Mat& m) { set(r, c, AffineExpr(m)); }

  AffineExpr build() const {
    AffineExpr out(total_, total_);
    for (const auto& b : blocks_) {
      const Mat er = embed(b.r);
      const Mat ec = embed(b.c);
      out += er * b.expr * ec.transpose();
      if (b.r != b.c) out += ec * b.expr.transpose() * er.transpose();
    }
    return out;
  }

  std::size_t total() const { return total_; }

 private:
  struct Entry {
    std::size_t r, c;
    AffineExpr expr;
  };
  Mat embed(std::size_t k) const {
    Mat e(total_, dims_[k]);
    for (std::size_t i = 0; i < dims_[k]; ++i) e(offsets_[k] + i, i) = 1.0;
    return e;
  }

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
  std::vector<Entry> blocks_;
};

/// expr < -margin * I (strict).
struct LmiConstraint {
  std::string name;
  AffineExpr expr;
  double margin = 0.0;
};

enum class FeasibilityStatus { feasible, infeasible_or_undecided };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::infeasible_or_undecided;
  Assignment assignment;
  double certified_margin = -std::numeric_limits<double>::infinity();
  double normalized_margin = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string message;

  bool feasible() const { return status == FeasibilityStatus::feasible; }
};

struct SolveOptions {
  double target_margin = 1e-6;  ///< relative to each constraint's Frobenius scale
  int max_iterations = 400;     ///< Newton-step budget
  bool maximize_margin = true;  ///< keep following the central path after feasibility
  double relative_gap = 1e-4;
  double stall_improvement = 1e-2;  ///< stop once a tenfold weight gains less than this (relative)
};

class LmiSystem;
LmiSystem build_system(std::vector<LmiVar> vars, std::vector<LmiConstraint> constraints);

/// Validated system: variables resolved, constraints compiled to dense
/// coefficient matrices over the stacked unknown vector.
class LmiSystem {
 public:
  struct Compiled {
    std::size_t dim = 0;
    Mat f0;
    std::vector<std::pair<std::size_t, Mat>> coefs;
    double scale = 1.0;
    bool slack = true;  ///< participates in the common margin variable
  };

  const std::vector<LmiVar>& variables() const { return vars_; }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  std::size_t unknowns() const { return unknowns_; }
  const std::vector<Compiled>& compiled() const { return compiled_; }

  const LmiVar& variable(const std::string& name) const { return vars_.at(index_of(name)); }

  Vec to_vector(const Assignment& a) const {
    Vec x(unknowns_, 0.0);
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto& var = vars_[v];
      const Mat& m = a.at(var.name);
      std::size_t k = offsets_[v];
      if (var.kind == VarKind::symmetric) {
        for (std::size_t i = 0; i < var.rows; ++i)
          for (std::size_t j = i; j < var.cols; ++j) x[k++] = 0.5 * (m(i, j) + m(j, i));
      } else {
        for (double val : m.data()) x[k++] = val;
      }
    }
    return x;
  }

  Assignment from_vector(const Vec& x) const {
    Assignment a;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto& var = vars_[v];
      Mat m(var.rows, var.cols);
      std::size_t k = offsets_[v];
      if (var.kind == VarKind::symmetric) {
        for (std::size_t i = 0; i < var.rows; ++i)
          for (std::size_t j = i; j < var.cols; ++j) {
            m(i, j) = x[k];
            m(j, i) = x[k];
            ++k;
          }
      } else {
        for (double& val : m.data()) val = x[k++];
      }
      a.set(var.name, std::move(m));
    }
    return a;
  }

 private:
  friend LmiSystem build_system(std::vector<LmiVar>, std::vector<LmiConstraint>);

  std::size_t index_of(const std::string& name) const {
    for (std::size_t v = 0; v < vars_.size(); ++v)
      if (vars_[v].name == name) return v;
    throw LmiError("undeclared variable '" + name + "'");
  }

  std::vector<LmiVar> vars_;
  std::vector<LmiConstraint> constraints_;
  std::vector<std::size_t> offsets_;
  std::size_t unknowns_ = 0;
  std::vector<Compiled> compiled_;  // user constraints first, then bound constraints
};

namespace detail {

inline std::size_t basis_count(const LmiVar& v) {
  switch (v.kind) {
    case VarKind::symmetric: return v.rows * (v.rows + 1) / 2;
    case VarKind::full: return v.rows * v.cols;
    case VarKind::scalar: return 1;
  }
  return 0;
}

// Basis element b of variable v as a dense matrix.
inline Mat basis_element(const LmiVar& v, std::size_t b) {
  Mat e(v.rows, v.cols);
  if (v.kind == VarKind::symmetric) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < v.rows; ++i)
      for (std::size_t j = i; j < v.cols; ++j, ++k)
        if (k == b) {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
          return e;
        }
  } else {
    e.data()[b] = 1.0;
  }
  return e;
}

inline bool nearly_symmetric(const Mat& m) {
  const double scale = std::max(frobenius_norm(m), 1e-300);
  return max_abs_diff(m, m.transpose()) <= 1e-10 * scale;
}

}  // namespace detail

/// Validates and compiles a system. Throws LmiError for undeclared variables
/// or inconsistent declarations and DimensionError for shape mismatches.
inline LmiSystem build_system(std::vector<LmiVar> vars, std::vector<LmiConstraint> constraints) {
  LmiSystem sys;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    const auto& var = vars[v];
    if (var.name.empty()) throw LmiError("variable with empty name");
    for (std::size_t w = 0; w < v; ++w)
      if (vars[w].name == var.name) throw LmiError("duplicate variable '" + var.name + "'");
    if (var.rows == 0 || var.cols == 0) throw DimensionError("variable '" + var.name + "' has zero dimension");
    if (var.kind == VarKind::symmetric && var.rows != var.cols)
      throw DimensionError("symmetric variable '" + var.name + "' must be square");
    if (var.kind == VarKind::scalar && (var.rows != 1 || var.cols != 1))
      throw DimensionError("scalar variable '" + var.name + "' must be 1x1");
    if (var.lower && *var.lower < 0.0) throw LmiError("variable '" + var.name + "' has negative lower bound");
    if (var.lower && var.kind == VarKind::full) throw LmiError("full variable '" + var.name + "' cannot carry a definiteness bound");
    if (!(var.upper > 0.0)) throw LmiError("variable '" + var.name + "' needs a positive upper bound");
    if (var.lower && *var.lower >= var.upper) throw LmiError("variable '" + var.name + "' has lower >= upper");
  }
  sys.vars_ = std::move(vars);
  sys.offsets_.resize(sys.vars_.size());
  for (std::size_t v = 0; v < sys.vars_.size(); ++v) {
    sys.offsets_[v] = sys.unknowns_;
    sys.unknowns_ += detail::basis_count(sys.vars_[v]);
  }

  auto finish = [](LmiSystem::Compiled& c, bool slack, bool normalise) {
    c.slack = slack;
    double s2 = 0.0;
    for (double v : c.f0.data()) s2 += v * v;
    for (const auto& [idx, m] : c.coefs)
      for (double v : m.data()) s2 += v * v;
    c.scale = (normalise && s2 > 0.0) ? std::sqrt(s2) : 1.0;
  };

  for (const auto& con : constraints) {
    const auto& e = con.expr;
    if (e.rows() != e.cols() || e.rows() == 0)
      throw DimensionError("constraint '" + con.name + "' is not a square matrix expression");
    if (con.margin < 0.0) throw LmiError("constraint '" + con.name + "' has negative margin");
    const std::size_t m = e.rows();
    std::vector<std::optional<Mat>> coef(sys.unknowns_);
    auto add = [&](std::size_t idx, const Mat& c) {
      if (!coef[idx]) coef[idx] = Mat(m, m);
      *coef[idx] += c;
    };
    for (const auto& t : e.mat_terms()) {
      const std::size_t v = sys.index_of(t.var);
      const auto& var = sys.vars_[v];
      if (var.kind == VarKind::scalar) throw LmiError("scalar variable '" + t.var + "' used as a matrix in '" + con.name + "'");
      const std::size_t r = t.transposed ? var.cols : var.rows;
      const std::size_t c = t.transposed ? var.rows : var.cols;
      if (t.left.cols() != r || t.right.rows() != c || t.left.rows() != m || t.right.cols() != m)
        throw DimensionError("term in '" + t.var + "' has inconsistent shape in constraint '" + con.name + "'");
      for (std::size_t b = 0; b < detail::basis_count(var); ++b) {
        Mat eb = detail::basis_element(var, b);
        if (t.transposed) eb = eb.transpose();
        add(sys.offsets_[v] + b, t.left * eb * t.right);
      }
    }
    for (const auto& t : e.scalar_terms()) {
      const std::size_t v = sys.index_of(t.var);
      if (sys.vars_[v].kind != VarKind::scalar) throw LmiError("matrix variable '" + t.var + "' used as a scalar in '" + con.name + "'");
      if (t.coef.rows() != m || t.coef.cols() != m)
        throw DimensionError("scalar term in '" + t.var + "' has inconsistent shape in constraint '" + con.name + "'");
      add(sys.offsets_[v], t.coef);
    }
    LmiSystem::Compiled c;
    c.dim = m;
    if (!detail::nearly_symmetric(e.constant())) throw LmiError("constraint '" + con.name + "' is not symmetric");
    c.f0 = SymMat(e.constant()).mat();
    for (std::size_t idx = 0; idx < coef.size(); ++idx) {
      if (!coef[idx]) continue;
      if (!detail::nearly_symmetric(*coef[idx])) throw LmiError("constraint '" + con.name + "' is not symmetric");
      Mat sym = SymMat(*coef[idx]).mat();
      if (frobenius_norm(sym) == 0.0) continue;
      c.coefs.emplace_back(idx, std::move(sym));
    }
    finish(c, true, true);
    // margin is absolute: expr + margin*I < 0
    for (std::size_t i = 0; i < m; ++i) c.f0(i, i) += con.margin;
    sys.compiled_.push_back(std::move(c));
  }

  // Bounds: lower as slacked constraints (lower*I - V < 0), upper as hard
  // constraints (V - upper*I < 0, and -V - upper*I < 0 when no lower bound).
  for (std::size_t v = 0; v < sys.vars_.size(); ++v) {
    const auto& var = sys.vars_[v];
    const std::size_t nb = detail::basis_count(var);
    if (var.kind == VarKind::full) {
      // [[-u I, V], [V^T, -u I]] < 0  <=>  ||V|| < u
      const std::size_t r = var.rows, cc = var.cols, m = r + cc;
      LmiSystem::Compiled c;
      c.dim = m;
      c.f0 = Mat(m, m);
      for (std::size_t i = 0; i < m; ++i) c.f0(i, i) = -var.upper;
      for (std::size_t b = 0; b < nb; ++b) {
        Mat g(m, m);
        const std::size_t i = b / cc, j = b % cc;
        g(i, r + j) = 1.0;
        g(r + j, i) = 1.0;
        c.coefs.emplace_back(sys.offsets_[v] + b, std::move(g));
      }
      finish(c, false, false);
      sys.compiled_.push_back(std::move(c));
      continue;
    }
    const std::size_t m = var.rows;
    auto make = [&](double sign, double shift, bool slack) {
      LmiSystem::Compiled c;
      c.dim = m;
      c.f0 = Mat::identity(m) * shift;
      for (std::size_t b = 0; b < nb; ++b) c.coefs.emplace_back(sys.offsets_[v] + b, detail::basis_element(var, b) * sign);
      finish(c, slack, false);
      return c;
    };
    if (var.lower) sys.compiled_.push_back(make(-1.0, *var.lower, true));
    sys.compiled_.push_back(make(1.0, -var.upper, false));
    if (!var.lower) sys.compiled_.push_back(make(-1.0, -var.upper, false));
  }
  sys.constraints_ = std::move(constraints);
  return sys;
}

/// Minimum over the user constraints of -lambda_max(expr + margin*I),
/// evaluated directly from the expressions with sym_eig.
inline double certify(const LmiSystem& sys, const Assignment& a) {
  for (const auto& v : sys.variables())
    if (!a.contains(v.name)) throw LmiError("assignment is missing variable '" + v.name + "'");
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& con : sys.constraints()) {
    Mat val = con.expr.evaluate(a);
    for (std::size_t i = 0; i < val.rows(); ++i) val(i, i) += con.margin;
    worst = std::min(worst, -lambda_max(SymMat(val)));
  }
  return worst;
}

/// True when every lower bound holds strictly and every upper bound holds.
inline bool bounds_satisfied(const LmiSystem& sys, const Assignment& a) {
  for (const auto& v : sys.variables()) {
    const Mat& m = a.at(v.name);
    if (v.kind == VarKind::full) {
      if (spectral_norm(m) > v.upper) return false;
      continue;
    }
    const auto w = sym_eigenvalues(SymMat(m));
    if (v.lower && !(w.front() > *v.lower)) return false;
    if (w.back() > v.upper) return false;
  }
  return true;
}

namespace detail {

// Primal log-det barrier for
//   minimise t  s.t.  G_k(x) < t I (slacked, normalised),  H_b(x) < 0 (hard)
// with Newton centering and a geometric barrier-weight schedule.
class BarrierSolver {
 public:
  BarrierSolver(const LmiSystem& sys, const SolveOptions& opt) : sys_(sys), opt_(opt) {
    n_ = sys.unknowns() + 1;
    for (const auto& c : sys.compiled()) degree_ += static_cast<double>(c.dim);
  }

  FeasibilityResult run() {
    Vec z = initial_point();
    FeasibilityResult res;
    double weight = 1.0;
    double prev_t = std::numeric_limits<double>::infinity();
    int iters = 0;
    bool stalled = false;
    const double target = opt_.target_margin;
    auto reached = [&](const Vec& p) { return p.back() < -target; };

    while (iters < opt_.max_iterations) {
      // centering
      // Once the target is met, centering only polishes the margin.
      const int inner_cap = reached(z) ? 15 : 60;
      for (int inner = 0; inner < inner_cap && iters < opt_.max_iterations; ++inner) {
        Vec g;
        Mat h;  // triangular Hessian factor
        if (!derivatives(z, weight, g, h)) {
          stalled = true;
          break;
        }
        Vec dz = newton_direction(h, g);
        double dec = -dot(g, dz);
        ++iters;
        if (!(dec > 0.0) || !std::isfinite(dec)) break;
        const double f0 = objective(z, weight);
        double step = 1.0;
        Vec trial(n_);
        bool moved = false;
        double f1 = f0;
        while (step > 1e-14) {
          for (std::size_t i = 0; i < n_; ++i) trial[i] = z[i] + step * dz[i];
          f1 = objective(trial, weight);
          if (std::isfinite(f1) && f1 <= f0 - 0.25 * step * dec) {
            moved = true;
            break;
          }
          step *= 0.5;
        }
        if (!moved) {
          stalled = true;
          break;
        }
        // Along log-like rays a full Newton step only doubles the scale;
        // keep extending while the objective still drops.
        if (step == 1.0) {
          Vec longer(n_);
          for (int k = 0; k < 30; ++k) {
            for (std::size_t i = 0; i < n_; ++i) longer[i] = z[i] + 2.0 * step * dz[i];
            const double f2 = objective(longer, weight);
            if (!(std::isfinite(f2) && f2 < f1)) break;
            step *= 2.0;
            f1 = f2;
            trial.swap(longer);
          }
        }
        z = trial;
        if (!opt_.maximize_margin && reached(z)) break;
        if (dec * 0.5 < 1e-7) break;
      }
      if (!opt_.maximize_margin && reached(z)) break;
      const double gap = degree_ / weight;
      if (z.back() - 1.05 * gap > -target) break;  // optimum cannot reach the target
      if (opt_.maximize_margin && gap <= opt_.relative_gap * std::max(std::abs(z.back()), target)) break;
      if (opt_.maximize_margin && reached(z) && prev_t - z.back() < opt_.stall_improvement * std::abs(z.back())) break;
      prev_t = z.back();
      if (stalled) break;
      weight *= 10.0;
    }

    res.iterations = iters;
    Vec x(z.begin(), z.end() - 1);
    res.assignment = sys_.from_vector(x);
    // Independent re-certification from the expressions.
    double normalized = std::numeric_limits<double>::infinity();
    double raw = std::numeric_limits<double>::infinity();
    const auto& cons = sys_.constraints();
    for (std::size_t k = 0; k < cons.size(); ++k) {
      Mat val = cons[k].expr.evaluate(res.assignment);
      for (std::size_t i = 0; i < val.rows(); ++i) val(i, i) += cons[k].margin;
      const double m = -lambda_max(SymMat(val));
      raw = std::min(raw, m);
      normalized = std::min(normalized, m / sys_.compiled()[k].scale);
    }
    res.certified_margin = raw;
    res.normalized_margin = normalized;
    const bool ok = normalized > target && raw > 0.0 && bounds_satisfied(sys_, res.assignment);
    res.status = ok ? FeasibilityStatus::feasible : FeasibilityStatus::infeasible_or_undecided;
    if (!ok) {
      res.message = "no point with margin " + std::to_string(target) + " found (best normalised margin " +
                    std::to_string(normalized) + (stalled ? ", solver stalled" : "") + ")";
    }
    return res;
  }

 private:
  Vec initial_point() const {
    Vec z(n_, 0.0);
    std::size_t k = 0;
    for (const auto& v : sys_.variables()) {
      const std::size_t nb = basis_count(v);
      if (v.kind == VarKind::full) {
        k += nb;
        continue;
      }
      double start = 1.0;
      if (v.lower) start = std::max(start, 2.0 * *v.lower);
      start = std::min(start, 0.5 * v.upper);
      if (v.kind == VarKind::scalar) {
        z[k++] = start;
      } else {
        for (std::size_t i = 0; i < v.rows; ++i)
          for (std::size_t j = i; j < v.cols; ++j) z[k++] = (i == j) ? start : 0.0;
      }
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& c : sys_.compiled()) {
      if (!c.slack) continue;
      worst = std::max(worst, lambda_max(SymMat(value(c, z))));
    }
    if (!std::isfinite(worst)) worst = 0.0;
    z.back() = worst + std::max(1.0, 0.1 * std::abs(worst));
    return z;
  }

  // Normalised G(x) for slacked constraints, raw H(x) for hard ones.
  static Mat value(const LmiSystem::Compiled& c, const Vec& z) {
    Mat g = c.f0;
    for (const auto& [idx, m] : c.coefs) {
      const double x = z[idx];
      if (x == 0.0) continue;
      auto gd = g.data();
      auto md = m.data();
      for (std::size_t q = 0; q < gd.size(); ++q) gd[q] += x * md[q];
    }
    if (c.scale != 1.0) g *= 1.0 / c.scale;
    return g;
  }

  // S = t I - G(x) (slacked) or -H(x) (hard).
  Mat slack_matrix(const LmiSystem::Compiled& c, const Vec& z) const {
    Mat s = value(c, z);
    s *= -1.0;
    if (c.slack)
      for (std::size_t i = 0; i < c.dim; ++i) s(i, i) += z.back();
    return s;
  }

  double objective(const Vec& z, double weight) const {
    double f = weight * z.back();
    for (const auto& c : sys_.compiled()) {
      Mat s = slack_matrix(c, z);
      if (!cholesky_inplace(s.data().data(), c.dim)) return std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < c.dim; ++i) f -= 2.0 * std::log(s(i, i));
    }
    return f;
  }

  // L^{-1} D L^{-T} for symmetric D, with L the lower Cholesky factor stored
  // in the lower triangle of `l` (row-major, m x m). `tmp` and `out` are m x m.
  static void whiten(const double* l, const double* d, std::size_t m, double* tmp, double* out) {
    // tmp = L^{-1} D, column by column
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < m; ++i) {
        double v = d[i * m + c];
        const double* li = l + i * m;
        for (std::size_t k = 0; k < i; ++k) v -= li[k] * tmp[k * m + c];
        tmp[i * m + c] = v / li[i];
      }
    // out = L^{-1} tmp^T; out is symmetric
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < m; ++i) {
        double v = tmp[c * m + i];
        const double* li = l + i * m;
        for (std::size_t k = 0; k < i; ++k) v -= li[k] * out[k * m + c];
        out[i * m + c] = v / li[i];
      }
  }

  // Folds the rows `a` (p x n, row-major) into the upper-triangular factor
  // `r` (n x n) with Householder reflections, so that afterwards
  // r^T r = r_old^T r_old + a^T a.
  static void qr_append(double* r, double* a, std::size_t p, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < p; ++i) s += a[i * n + j] * a[i * n + j];
      if (s == 0.0) continue;
      const double alpha = r[j * n + j];
      const double norm = std::sqrt(alpha * alpha + s);
      const double beta = alpha > 0.0 ? -norm : norm;
      const double v0 = alpha - beta;
      const double tau = (beta - alpha) / beta;
      for (std::size_t i = 0; i < p; ++i) a[i * n + j] /= v0;  // v = [1; a(:, j) / v0]
      for (std::size_t k = j + 1; k < n; ++k) {
        double w = r[j * n + k];
        for (std::size_t i = 0; i < p; ++i) w += a[i * n + j] * a[i * n + k];
        w *= tau;
        r[j * n + k] -= w;
        for (std::size_t i = 0; i < p; ++i) a[i * n + k] -= w * a[i * n + j];
      }
      r[j * n + j] = beta;
      for (std::size_t i = 0; i < p; ++i) a[i * n + j] = 0.0;
    }
  }

  // Gradient g and a triangular factor r of the Hessian (r^T r = H), built
  // from the Jacobian rows directly rather than from H, which would square
  // its condition number.
  bool derivatives(const Vec& z, double weight, Vec& g, Mat& r) const {
    g.assign(n_, 0.0);
    r = Mat(n_, n_);
    g.back() = weight;
    const std::size_t tidx = n_ - 1;
    std::vector<double> tmp, dmat, rows;
    std::vector<std::vector<double>> bs;
    const double rt2 = std::sqrt(2.0);
    for (const auto& c : sys_.compiled()) {
      const std::size_t m = c.dim;
      Mat l = slack_matrix(c, z);
      if (!cholesky_inplace(l.data().data(), m)) return false;
      const std::size_t nb = c.coefs.size() + (c.slack ? 1 : 0);
      std::vector<std::size_t> idx;
      idx.reserve(nb);
      bs.resize(std::max(bs.size(), nb));
      tmp.resize(m * m);
      dmat.resize(m * m);
      const double inv_scale = 1.0 / c.scale;
      std::size_t a = 0;
      for (const auto& [k, f] : c.coefs) {
        idx.push_back(k);
        const auto fd = f.data();
        for (std::size_t q = 0; q < m * m; ++q) dmat[q] = -inv_scale * fd[q];  // dS/dx_k
        bs[a].resize(m * m);
        whiten(l.data().data(), dmat.data(), m, tmp.data(), bs[a].data());
        ++a;
      }
      if (c.slack) {
        idx.push_back(tidx);
        std::fill(dmat.begin(), dmat.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) dmat[i * m + i] = 1.0;
        bs[a].resize(m * m);
        whiten(l.data().data(), dmat.data(), m, tmp.data(), bs[a].data());
        ++a;
      }
      const std::size_t p = m * (m + 1) / 2;
      rows.assign(p * n_, 0.0);
      for (std::size_t b = 0; b < nb; ++b) {
        const double* bb = bs[b].data();
        double tr = 0.0;
        std::size_t row = 0;
        for (std::size_t i = 0; i < m; ++i) {
          tr += bb[i * m + i];
          rows[row++ * n_ + idx[b]] = bb[i * m + i];
          for (std::size_t j = i + 1; j < m; ++j) rows[row++ * n_ + idx[b]] = rt2 * bb[i * m + j];
        }
        g[idx[b]] -= tr;
      }
      qr_append(r.data().data(), rows.data(), p, n_);
    }
    return true;
  }

  Vec newton_direction(const Mat& r, const Vec& g) const {
    double rmax = 0.0;
    for (std::size_t i = 0; i < n_; ++i) rmax = std::max(rmax, std::abs(r(i, i)));
    const double floor = std::max(rmax * 1e-14, 1e-300);
    auto diag = [&](std::size_t i) {
      const double d = r(i, i);
      return std::abs(d) < floor ? (d < 0.0 ? -floor : floor) : d;
    };
    Vec y(n_);
    for (std::size_t i = 0; i < n_; ++i) {  // r^T y = -g
      double v = -g[i];
      for (std::size_t k = 0; k < i; ++k) v -= r(k, i) * y[k];
      y[i] = v / diag(i);
    }
    for (std::size_t ii = n_; ii-- > 0;) {  // r dz = y
      double v = y[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) v -= r(ii, k) * y[k];
      y[ii] = v / diag(ii);
    }
    return y;
  }

  const LmiSystem& sys_;
  SolveOptions opt_;
  std::size_t n_ = 0;
  double degree_ = 0.0;
};

}  // namespace detail

/// Searches for an assignment meeting every constraint with normalised
/// margin above `opt.target_margin`. Deterministic for a given system and
/// options. A feasible status is only reported after re-certification.
inline FeasibilityResult solve(const LmiSystem& sys, const SolveOptions& opt = {}) {
  detail::BarrierSolver solver(sys, opt);
  return solver.run();
}

}  // namespace lmswitch
