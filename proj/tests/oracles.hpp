#pragma once

// Slow, independent reference computations used only by the tests.

#include <cmath>
#include <cstddef>
#include <vector>

#include "lmswitch/matnum.hpp"

namespace oracle {

using lmswitch::Mat;
using lmswitch::SymMat;

// e^A by integrating X' = A X from X(0) = I with classic RK4.
inline Mat rk4_expm(const Mat& a, int steps = 20000) {
  const std::size_t n = a.rows();
  const double h = 1.0 / steps;
  Mat x = Mat::identity(n);
  for (int s = 0; s < steps; ++s) {
    const Mat k1 = a * x;
    const Mat k2 = a * (x + k1 * (h / 2));
    const Mat k3 = a * (x + k2 * (h / 2));
    const Mat k4 = a * (x + k3 * h);
    x += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6);
  }
  return x;
}

// Truncated Taylor series with scaling and squaring; fine for small norms.
inline Mat taylor_expm(const Mat& a, int terms = 30) {
  const std::size_t n = a.rows();
  int squarings = 0;
  double nrm = lmswitch::norm1(a);
  while (nrm > 0.5) {
    nrm /= 2;
    ++squarings;
  }
  const Mat b = a * std::ldexp(1.0, -squarings);
  Mat sum = Mat::identity(n);
  Mat term = Mat::identity(n);
  for (int k = 1; k <= terms; ++k) {
    term = term * b * (1.0 / k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

// Composite Simpson rule for int_0^T e^{A^T s} M e^{A s} ds.
inline Mat simpson_gram(const Mat& a, const Mat& m, double t, int panels = 100000) {
  if (panels % 2) ++panels;
  const std::size_t n = a.rows();
  const double h = t / panels;
  const Mat step = taylor_expm(a * h);
  Mat e = Mat::identity(n);
  Mat acc(n, n);
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += (e.transpose() * m * e) * w;
    e = e * step;
  }
  return acc * (h / 3);
}

// P(t) from -P' = Az^T P + P Az + M, P(T) = X, integrated backward with RK4.
inline Mat rk4_pflow(const Mat& az, const Mat& m, const Mat& x, double big_t, double t, int steps = 10000) {
  const double span = big_t - t;
  if (span <= 0.0) return x;
  const double h = span / steps;
  // In reversed time s = T - t: dP/ds = Az^T P + P Az + M.
  auto f = [&](const Mat& p) { return az.transpose() * p + p * az + m; };
  Mat p = x;
  for (int s = 0; s < steps; ++s) {
    const Mat k1 = f(p);
    const Mat k2 = f(p + k1 * (h / 2));
    const Mat k3 = f(p + k2 * (h / 2));
    const Mat k4 = f(p + k3 * h);
    p += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6);
  }
  return p;
}

inline double power_norm(const Mat& a, int iters = 5000) {
  const Mat ata = a.transpose() * a;
  std::vector<double> v(a.cols());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    std::vector<double> w = ata * std::span<const double>(v);
    double nw = 0.0;
    for (double c : w) nw += c * c;
    nw = std::sqrt(nw);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
    lam = nw;
  }
  return std::sqrt(lam);
}

// Monic characteristic polynomial coefficients [1, c1, ..., cn] by
// Faddeev-LeVerrier.
inline std::vector<double> charpoly(const Mat& a) {
  const std::size_t n = a.rows();
  std::vector<double> c(n + 1, 0.0);
  c[0] = 1.0;
  Mat m(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    Mat mk = a * m;
    for (std::size_t i = 0; i < n; ++i) mk(i, i) += c[k - 1];
    const Mat amk = a * mk;
    c[k] = -lmswitch::trace(amk) / static_cast<double>(k);
    m = mk;
  }
  return c;
}

// Routh-Hurwitz test: all roots in the open left half-plane.
inline bool routh_hurwitz(const std::vector<double>& poly) {
  const std::size_t n = poly.size() - 1;
  for (double c : poly)
    if (!(c > 0.0)) return false;
  std::vector<double> r0, r1;
  for (std::size_t i = 0; i <= n; i += 2) r0.push_back(poly[i]);
  for (std::size_t i = 1; i <= n; i += 2) r1.push_back(poly[i]);
  for (std::size_t row = 2; row <= n; ++row) {
    if (r1.empty() || !(r1[0] > 0.0)) return false;
    std::vector<double> r2;
    for (std::size_t j = 0; j + 1 < r0.size(); ++j) {
      const double b = (j + 1 < r1.size()) ? r1[j + 1] : 0.0;
      r2.push_back((r1[0] * r0[j + 1] - r0[0] * b) / r1[0]);
    }
    r0 = r1;
    r1 = r2;
  }
  return r1.empty() || r1[0] > 0.0;
}

inline bool is_hurwitz(const Mat& a) { return routh_hurwitz(charpoly(a)); }

// Spectral abscissa below -delta. A zero eigenvalue can leave a round-off
// sized positive constant coefficient that Routh-Hurwitz accepts; a small
// delta rejects it.
inline bool is_hurwitz_margin(const Mat& a, double delta) {
  return is_hurwitz(a + Mat::identity(a.rows()) * delta);
}

// Spectral abscissa by bisection on the shift s with A - sI Hurwitz.
inline double abscissa(const Mat& a) {
  const std::size_t n = a.rows();
  double bound = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += std::abs(a(i, j));
    bound = std::max(bound, r);
  }
  double lo = -bound - 1.0, hi = bound + 1.0;  // A - hi I is Hurwitz, A - lo I is not
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (is_hurwitz(a - Mat::identity(n) * mid))
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
