#pragma once

// Switched plant data: known matrices per mode plus the simulation-only
// nonlinearity that the controller never sees.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmswitch/matnum.hpp"

namespace lmswitch {

enum class NonlinearityKind { zero, norm_saturation, sine, constant };

struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::zero;
  double kappa = 0.0;
  Vec b;  ///< constant term for NonlinearityKind::constant

  friend bool operator==(const Nonlinearity&, const Nonlinearity&) = default;

  static Nonlinearity zero() { return {}; }
  static Nonlinearity norm_saturation(double kappa) { return {NonlinearityKind::norm_saturation, kappa, {}}; }
  static Nonlinearity sine(double kappa) { return {NonlinearityKind::sine, kappa, {}}; }
  static Nonlinearity constant(Vec b) { return {NonlinearityKind::constant, 0.0, std::move(b)}; }

  /// Adds f(x) into out.
  void accumulate(std::span<const double> x, std::span<double> out) const {
    switch (kind) {
      case NonlinearityKind::zero:
        return;
      case NonlinearityKind::norm_saturation: {
        const double r = norm2(x);
        const double v = kappa * r / (1.0 + r);
        for (double& o : out) o += v;
        return;
      }
      case NonlinearityKind::sine:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += kappa * std::sin(x[i]);
        return;
      case NonlinearityKind::constant:
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
        return;
    }
  }

  Vec operator()(std::span<const double> x) const {
    Vec out(x.size(), 0.0);
    accumulate(x, out);
    return out;
  }

  /// Global Lipschitz constant of f in the Euclidean norm.
  double lipschitz(std::size_t n) const {
    switch (kind) {
      case NonlinearityKind::norm_saturation: return kappa * std::sqrt(static_cast<double>(n));
      case NonlinearityKind::sine: return kappa;
      default: return 0.0;
    }
  }
};

inline std::string to_string(NonlinearityKind k) {
  switch (k) {
    case NonlinearityKind::zero: return "zero";
    case NonlinearityKind::norm_saturation: return "norm_saturation";
    case NonlinearityKind::sine: return "sine";
    case NonlinearityKind::constant: return "constant";
  }
  return "zero";
}

inline NonlinearityKind nonlinearity_kind_from_string(const std::string& s) {
  if (s == "zero") return NonlinearityKind::zero;
  if (s == "norm_saturation") return NonlinearityKind::norm_saturation;
  if (s == "sine") return NonlinearityKind::sine;
  if (s == "constant") return NonlinearityKind::constant;
  throw std::invalid_argument("unknown nonlinearity kind '" + s + "'");
}

struct PlantMode {
  Mat a;
  Mat d;
  Nonlinearity f;
};

struct SwitchedPlant {
  std::vector<PlantMode> modes;
  Mat c;

  std::size_t n() const { return modes.empty() ? 0 : modes.front().a.rows(); }
  std::size_t size() const { return modes.size(); }
  SymMat ctc() const { return SymMat(c.transpose() * c); }

  void validate() const {
    if (modes.empty()) throw std::invalid_argument("plant has no modes");
    const std::size_t nn = n();
    if (nn == 0) throw DimensionError("plant state dimension is zero");
    for (std::size_t i = 0; i < modes.size(); ++i) {
      const auto& m = modes[i];
      const std::string tag = "mode " + std::to_string(i + 1);
      if (m.a.rows() != nn || m.a.cols() != nn) throw DimensionError(tag + ": A must be " + std::to_string(nn) + "x" + std::to_string(nn));
      if (m.d.rows() == 0 || m.d.cols() != nn) throw DimensionError(tag + ": D must have " + std::to_string(nn) + " columns");
      if (!m.a.all_finite() || !m.d.all_finite()) throw std::invalid_argument(tag + ": non-finite entries");
      if (m.f.kind == NonlinearityKind::constant && m.f.b.size() != nn)
        throw DimensionError(tag + ": constant term must have length " + std::to_string(nn));
      if (m.f.kappa < 0.0) throw std::invalid_argument(tag + ": negative nonlinearity gain");
    }
    if (c.cols() != nn || c.rows() == 0) throw DimensionError("C must have " + std::to_string(nn) + " columns");
  }
};

}  // namespace lmswitch
