#pragma once

// Dense real matrix numerics for small systems: matrix exponential,
// exponential Gramians, symmetric eigendecomposition, norms and ranks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lmswitch {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vec = std::vector<double>;

/// Row-major dense real matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      if (row.size() != cols_) throw DimensionError("ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat diagonal(std::span<const double> d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  static Mat column(std::span<const double> v) {
    Mat m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }
  static Mat row(std::span<const double> v) {
    Mat m(1, v.size());
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Mat transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block out of range");
    Mat b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
  }

  void set_block(std::size_t r0, std::size_t c0, const Mat& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw DimensionError("block out of range");
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(r0 + i, c0 + j) = b(i, j);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Mat& operator+=(const Mat& o) {
    check_same(o, "+");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Mat& operator-=(const Mat& o) {
    check_same(o, "-");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Mat& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  void check_same(const Mat& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string("shape mismatch in operator") + op);
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(Mat a, double s) { return a *= s; }
inline Mat operator*(double s, Mat a) { return a *= s; }
inline Mat operator-(Mat a) { return a *= -1.0; }

inline Mat operator*(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Vec operator*(const Mat& a, std::span<const double> v) {
  if (a.cols() != v.size()) throw DimensionError("matvec shape mismatch");
  Vec out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

inline double trace(const Mat& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

inline double frobenius_norm(const Mat& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

/// Induced 1-norm (maximum absolute column sum).
inline double norm1(const Mat& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Symmetric matrix. Symmetry holds exactly: construction from a general
/// matrix stores (S + S^T)/2 and element writes update both triangles.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(std::size_t n) : m_(n, n) {}
  explicit SymMat(const Mat& m) : m_(m.rows(), m.cols()) {
    if (!m.square()) throw DimensionError("SymMat from non-square matrix");
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
      m_(i, i) = m(i, i);
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
    }
  }
  SymMat(std::initializer_list<std::initializer_list<double>> init) : SymMat(Mat(init)) {}

  static SymMat identity(std::size_t n) { return SymMat(Mat::identity(n)); }
  static SymMat scaled_identity(std::size_t n, double s) { return SymMat(Mat::identity(n) * s); }

  std::size_t dim() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Mat& mat() const { return m_; }
  operator const Mat&() const { return m_; }  // NOLINT: read-only view is always safe

  SymMat& operator+=(const SymMat& o) {
    m_ += o.m_;
    return *this;
  }
  SymMat& operator-=(const SymMat& o) {
    m_ -= o.m_;
    return *this;
  }
  SymMat& operator*=(double s) {
    m_ *= s;
    return *this;
  }

  friend bool operator==(const SymMat&, const SymMat&) = default;

 private:
  Mat m_;
};

inline SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
inline SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }
inline SymMat operator*(SymMat a, double s) { return a *= s; }
inline SymMat operator*(double s, SymMat a) { return a *= s; }
inline SymMat operator-(SymMat a) { return a *= -1.0; }

/// A^T S A.
inline SymMat congruence(const Mat& a, const SymMat& s) { return SymMat(a.transpose() * s.mat() * a); }

/// M + M^T for a general square M.
inline SymMat sym_part2(const Mat& m) { return SymMat(m + m.transpose()); }

inline double quad_form(const SymMat& s, std::span<const double> v) {
  if (s.dim() != v.size()) throw DimensionError("quad_form size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) row += s(i, j) * v[j];
    acc += v[i] * row;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Linear solves

/// Solves A X = B by LU with partial pivoting. Throws std::domain_error when
/// A is numerically singular.
inline Mat lu_solve(Mat a, Mat b) {
  if (!a.square() || a.rows() != b.rows()) throw DimensionError("lu_solve shape mismatch");
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (a(piv, k) == 0.0 || !std::isfinite(a(piv, k))) throw std::domain_error("lu_solve: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = b(ii, j);
      for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * b(k, j);
      b(ii, j) = s / a(ii, ii);
    }
  }
  return b;
}

namespace detail {

// In-place lower Cholesky of an n x n row-major buffer; only the lower
// triangle is read and written. Returns false when not positive definite.
inline bool cholesky_inplace(double* a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  return true;
}

// Cyclic Jacobi on a symmetric n x n row-major buffer. On return the
// diagonal of `a` holds the eigenvalues; if `v` is non-null it receives the
// eigenvectors as columns.
inline void jacobi_inplace(double* a, std::size_t n, double* v) {
  if (v != nullptr)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) v[i * n + j] = (i == j) ? 1.0 : 0.0;
  double fro2 = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) fro2 += a[k] * a[k];
  if (fro2 == 0.0) return;
  const double tol2 = 1e-30 * fro2;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off2 = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off2 += 2.0 * a[p * n + q] * a[p * n + q];
    if (off2 <= tol2) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        if (v != nullptr)
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v[k * n + p];
            const double vkq = v[k * n + q];
            v[k * n + p] = c * vkp - s * vkq;
            v[k * n + q] = s * vkp + c * vkq;
          }
      }
    }
  }
}

}  // namespace detail

/// Lower-triangular Cholesky factor, or nullopt if S is not positive definite.
inline std::optional<Mat> cholesky(const SymMat& s) {
  Mat l = s.mat();
  if (!detail::cholesky_inplace(l.data().data(), l.rows())) return std::nullopt;
  for (std::size_t i = 0; i < l.rows(); ++i)
    for (std::size_t j = i + 1; j < l.cols(); ++j) l(i, j) = 0.0;
  return l;
}

inline bool is_positive_definite(const SymMat& s) { return cholesky(s).has_value(); }

/// Solves S X = B for symmetric positive-definite S.
inline Mat spd_solve(const SymMat& s, const Mat& b) {
  if (s.dim() != b.rows()) throw DimensionError("spd_solve shape mismatch");
  const auto l = cholesky(s);
  if (!l) throw std::domain_error("spd_solve: matrix is not positive definite");
  const std::size_t n = s.dim();
  Mat x = b;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = x(i, c);
      for (std::size_t k = 0; k < i; ++k) v -= (*l)(i, k) * x(k, c);
      x(i, c) = v / (*l)(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) v -= (*l)(k, ii) * x(k, c);
      x(ii, c) = v / (*l)(ii, ii);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Matrix exponential

/// e^A by scaling and squaring with the degree-13 Pade approximant; the
/// number of squarings is chosen from the 1-norm of A.
inline Mat expm(const Mat& a) {
  if (!a.square()) throw DimensionError("expm requires a square matrix");
  if (!a.all_finite()) throw std::domain_error("expm: non-finite input");
  const std::size_t n = a.rows();
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;
  const double nrm = norm1(a);
  int squarings = 0;
  if (nrm > theta13) squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
  const Mat as = a * std::ldexp(1.0, -squarings);
  const Mat id = Mat::identity(n);
  const Mat a2 = as * as;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  const Mat u = as * u_inner;
  const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  Mat r = lu_solve(v - u, v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

struct ExpGram {
  Mat exp;       ///< e^{A T}
  SymMat gram;   ///< integral over [0, T] of e^{A^T s} M e^{A s} ds
};

/// e^{AT} together with the exponential Gramian over [0, T], from one
/// exponential of the block matrix [[-A^T, M], [0, A]] T. T = 0 is allowed.
inline ExpGram exp_gram(const Mat& a, const SymMat& m, double t) {
  if (!a.square() || a.rows() != m.dim()) throw DimensionError("exp_gram shape mismatch");
  const std::size_t n = a.rows();
  if (t == 0.0) return {Mat::identity(n), SymMat(n)};
  Mat h(2 * n, 2 * n);
  h.set_block(0, 0, -a.transpose() * t);
  h.set_block(0, n, m.mat() * t);
  h.set_block(n, n, a * t);
  const Mat e = expm(h);
  Mat eat = e.block(n, n, n, n);
  const Mat f12 = e.block(0, n, n, n);
  return {eat, SymMat(eat.transpose() * f12)};
}

/// Integral over [0, T] of e^{A^T s} M e^{A s} ds.
inline SymMat gram_integral(const Mat& a, const SymMat& m, double t) {
  if (!a.square() || a.rows() != m.dim()) throw DimensionError("gram_integral shape mismatch");
  if (!(t > 0.0)) throw std::invalid_argument("gram_integral: T must be positive");
  return exp_gram(a, m, t).gram;
}

// ---------------------------------------------------------------------------
// Spectra

struct EigResult {
  std::vector<double> values;  ///< ascending
  Mat vectors;                 ///< orthonormal eigenvectors as columns
  std::size_t dim() const { return values.size(); }
};

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
inline EigResult sym_eig(const SymMat& s) {
  if (!s.mat().all_finite()) throw std::domain_error("sym_eig: non-finite input");
  const std::size_t n = s.dim();
  Mat a = s.mat();
  Mat v(n, n);
  detail::jacobi_inplace(a.data().data(), n, v.data().data());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  EigResult r{std::vector<double>(n), Mat(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    r.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = v(i, order[k]);
  }
  return r;
}

/// Eigenvalues only (ascending); no eigenvector accumulation.
inline std::vector<double> sym_eigenvalues(const SymMat& s) {
  const std::size_t n = s.dim();
  Mat a = s.mat();
  detail::jacobi_inplace(a.data().data(), n, nullptr);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = a(i, i);
  std::sort(w.begin(), w.end());
  return w;
}

inline double lambda_max(const SymMat& s) { return s.dim() == 0 ? 0.0 : sym_eigenvalues(s).back(); }
inline double lambda_min(const SymMat& s) { return s.dim() == 0 ? 0.0 : sym_eigenvalues(s).front(); }

/// Singular values (descending) by one-sided Jacobi.
inline std::vector<double> singular_values(const Mat& a_in) {
  const Mat a = a_in.rows() >= a_in.cols() ? a_in : a_in.transpose();
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Mat u = a;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
      }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, j) * u(i, j);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Induced 2-norm, sqrt(lambda_max(A^T A)).
inline double spectral_norm(const Mat& a) {
  if (a.empty()) return 0.0;
  const Mat ata = a.rows() >= a.cols() ? a.transpose() * a : a * a.transpose();
  return std::sqrt(std::max(0.0, lambda_max(SymMat(ata))));
}

struct DefiniteCheck {
  bool holds = false;
  double lambda_max = 0.0;
};

/// True iff lambda_max(S) < -margin (strict).
inline DefiniteCheck is_negative_definite(const SymMat& s, double margin) {
  const double lmax = lambda_max(s);
  return {lmax < -margin, lmax};
}

/// Numerical rank of col{D, DA, ..., DA^{n-1}}; singular values above
/// max(rows, cols) * machine-epsilon * sigma_max count.
inline std::size_t observability_rank(const Mat& a, const Mat& d) {
  if (!a.square()) throw DimensionError("observability_rank: A must be square");
  if (d.cols() != a.rows()) throw DimensionError("observability_rank: D column count must match A");
  const std::size_t n = a.rows();
  const std::size_t m = d.rows();
  Mat obs(n * m, n);
  Mat blk = d;
  for (std::size_t k = 0; k < n; ++k) {
    obs.set_block(k * m, 0, blk);
    blk = blk * a;
  }
  const auto sv = singular_values(obs);
  if (sv.empty() || sv.front() == 0.0) return 0;
  const double tol = static_cast<double>(std::max(obs.rows(), obs.cols())) *
                     std::numeric_limits<double>::epsilon() * sv.front();
  return static_cast<std::size_t>(std::count_if(sv.begin(), sv.end(), [&](double s) { return s > tol; }));
}

}  // namespace lmswitch
