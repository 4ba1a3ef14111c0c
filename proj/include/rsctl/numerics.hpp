#pragma once

// Scalar-generic numerical kernels shared by the solvers.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rsctl/errors.hpp"

namespace rsctl {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Thomas factorization of a tridiagonal matrix, reusable across right-hand sides.
/// `lower[k]` multiplies unknown k-1 in row k, `upper[k]` multiplies unknown k+1.
template <class Scalar>
class TridiagonalFactor {
 public:
  TridiagonalFactor() = default;

  void factor(const VectorX<Scalar>& lower, const VectorX<Scalar>& diag, const VectorX<Scalar>& upper) {
    const Eigen::Index n = diag.size();
    lower_ = lower;
    inv_pivot_.resize(n);
    upper_mod_.resize(n);
    Scalar pivot = diag[0];
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k > 0) pivot = diag[k] - lower[k] * upper_mod_[k - 1];
      if (!(std::abs(pivot) > std::numeric_limits<Scalar>::min()) || !std::isfinite(static_cast<double>(pivot)))
        throw NumericError("tridiagonal solve: zero or non-finite pivot", {{"row", std::to_string(k)}});
      inv_pivot_[k] = Scalar(1) / pivot;
      upper_mod_[k] = (k + 1 < n) ? upper[k] * inv_pivot_[k] : Scalar(0);
    }
  }

  /// Solve in place.
  void solve(VectorX<Scalar>& rhs) const {
    const Eigen::Index n = rhs.size();
    rhs[0] *= inv_pivot_[0];
    for (Eigen::Index k = 1; k < n; ++k) rhs[k] = (rhs[k] - lower_[k] * rhs[k - 1]) * inv_pivot_[k];
    for (Eigen::Index k = n - 2; k >= 0; --k) rhs[k] -= upper_mod_[k] * rhs[k + 1];
  }

 private:
  VectorX<Scalar> lower_, inv_pivot_, upper_mod_;
};

template <class Scalar>
VectorX<Scalar> solve_tridiagonal(const VectorX<Scalar>& lower, const VectorX<Scalar>& diag,
                                  const VectorX<Scalar>& upper, VectorX<Scalar> rhs) {
  TridiagonalFactor<Scalar> f;
  f.factor(lower, diag, upper);
  f.solve(rhs);
  return rhs;
}

namespace detail {
template <class Scalar, class F>
Scalar simpson_recurse(F& f, Scalar a, Scalar b, Scalar fa, Scalar fm, Scalar fb, Scalar whole, Scalar tol,
                       int depth, bool& failed) {
  const Scalar m = (a + b) / 2;
  const Scalar lm = (a + m) / 2, rm = (m + b) / 2;
  const Scalar flm = f(lm), frm = f(rm);
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar delta = left + right - whole;
  if (std::abs(delta) <= 15 * tol) return left + right + delta / 15;
  if (depth <= 0) {
    failed = true;
    return left + right + delta / 15;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, failed) +
         simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, failed);
}
}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance `tol`.
/// The interval is pre-split into `initial_panels` panels so narrow features are seen.
template <class Scalar, class F>
Scalar adaptive_simpson(F&& f, Scalar a, Scalar b, Scalar tol, int max_depth = 48, int initial_panels = 4) {
  if (!(b > a)) return Scalar(0);
  bool failed = false;
  Scalar total = 0;
  const Scalar width = (b - a) / initial_panels;
  for (int p = 0; p < initial_panels; ++p) {
    const Scalar lo = a + p * width;
    const Scalar hi = (p + 1 == initial_panels) ? b : lo + width;
    const Scalar flo = f(lo), fhi = f(hi), fmid = f((lo + hi) / 2);
    const Scalar whole = (hi - lo) / 6 * (flo + 4 * fmid + fhi);
    total += detail::simpson_recurse(f, lo, hi, flo, fmid, fhi, whole, tol / initial_panels, max_depth, failed);
  }
  if (failed || !std::isfinite(static_cast<double>(total)))
    throw NumericError("adaptive quadrature did not converge",
                       {{"interval", "[" + std::to_string(static_cast<double>(a)) + ", " +
                                         std::to_string(static_cast<double>(b)) + ")"},
                        {"tolerance", std::to_string(static_cast<double>(tol))}});
  return total;
}

/// One classical fourth-order Runge-Kutta step of size h (negative h integrates backward).
template <class Vec, class F>
Vec rk4_step(F&& rhs, double s, const Vec& y, double h) {
  const Vec k1 = rhs(s, y);
  const Vec k2 = rhs(s + h / 2, (y + (h / 2) * k1).eval());
  const Vec k3 = rhs(s + h / 2, (y + (h / 2) * k2).eval());
  const Vec k4 = rhs(s + h, (y + h * k3).eval());
  return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

/// First derivative at node k: central inside, second-order one-sided at the ends.
template <class Vec>
typename Vec::Scalar first_difference(const Vec& v, Eigen::Index k, typename Vec::Scalar dx) {
  const Eigen::Index n = v.size();
  if (k == 0) return (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dx);
  if (k == n - 1) return (3 * v[n - 1] - 4 * v[n - 2] + v[n - 3]) / (2 * dx);
  return (v[k + 1] - v[k - 1]) / (2 * dx);
}

/// Second derivative at node k: central inside, second-order one-sided at the ends.
template <class Vec>
typename Vec::Scalar second_difference(const Vec& v, Eigen::Index k, typename Vec::Scalar dx) {
  const Eigen::Index n = v.size();
  if (k == 0) return (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (dx * dx);
  if (k == n - 1) return (2 * v[n - 1] - 5 * v[n - 2] + 4 * v[n - 3] - v[n - 4]) / (dx * dx);
  return (v[k + 1] - 2 * v[k] + v[k - 1]) / (dx * dx);
}

/// Lagrange interpolation through four (xs, ys) points.
template <class Scalar>
Scalar lagrange_cubic(const Scalar* xs, const Scalar* ys, Scalar x) {
  Scalar out = 0;
  for (int a = 0; a < 4; ++a) {
    Scalar w = 1;
    for (int b = 0; b < 4; ++b)
      if (b != a) w *= (x - xs[b]) / (xs[a] - xs[b]);
    out += w * ys[a];
  }
  return out;
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

/// Ordinary least-squares line through (x, y) pairs.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Standard normal cumulative distribution.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace rsctl
