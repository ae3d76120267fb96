#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace cocyclelab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Row-major [[a, b], [c, d]].
struct Mat2 {
  double a = 1, b = 0, c = 0, d = 1;

  static constexpr Mat2 identity() { return {1, 0, 0, 1}; }
  static Mat2 rotation(double theta) {
    double s = std::sin(theta), co = std::cos(theta);
    return {co, -s, s, co};
  }
  static Mat2 diag_exp(double r) { return {std::exp(r), 0, 0, std::exp(-r)}; }
  static constexpr Mat2 diag(double l) { return {l, 0, 0, 1.0 / l}; }
  // S_t = [[t, -1], [1, 0]]
  static constexpr Mat2 schrodinger(double t) { return {t, -1, 1, 0}; }

  constexpr double det() const { return a * d - b * c; }
  constexpr double trace() const { return a + d; }
  constexpr Mat2 inverse() const { return {d, -b, -c, a}; }  // unimodular inverse
  constexpr Mat2 transpose() const { return {a, c, b, d}; }

  // Largest singular value, closed form.
  double norm() const {
    double p = std::hypot(a + d, c - b);
    double q = std::hypot(a - d, b + c);
    return 0.5 * (p + q);
  }
  double frobenius() const { return std::sqrt(a * a + b * b + c * c + d * d); }
  double max_abs() const {
    return std::fmax(std::fmax(std::fabs(a), std::fabs(b)), std::fmax(std::fabs(c), std::fabs(d)));
  }

  // Divide by sqrt(det) so that det = 1 again (det must be positive).
  Mat2 renormalized() const {
    double s = 1.0 / std::sqrt(det());
    return {a * s, b * s, c * s, d * s};
  }
  constexpr Mat2 scaled(double s) const { return {a * s, b * s, c * s, d * s}; }

  // Angle of the rotation factor in the polar decomposition A = R_phi P, P symmetric positive.
  double polar_angle() const { return std::atan2(c - b, a + d); }

  std::array<double, 2> apply(double x, double y) const { return {a * x + b * y, c * x + d * y}; }
};

constexpr Mat2 operator*(const Mat2& m, const Mat2& n) {
  return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
}
constexpr Mat2 operator+(const Mat2& m, const Mat2& n) { return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d}; }
constexpr Mat2 operator-(const Mat2& m, const Mat2& n) { return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d}; }
constexpr bool operator==(const Mat2& m, const Mat2& n) { return m.a == n.a && m.b == n.b && m.c == n.c && m.d == n.d; }

// Distance in PSL(2,R): min over the sign.
inline double psl_distance(const Mat2& m, const Mat2& n) {
  return std::fmin((m - n).max_abs(), (m + n).max_abs());
}

// Matrix exponential of a traceless matrix.
inline Mat2 exp_traceless(const Mat2& g) {
  double q = g.a * g.a + g.b * g.c;  // -det(g)
  double ch, sh;                      // cosh(sqrt q), sinh(sqrt q)/sqrt q
  if (q > 1e-300) {
    double s = std::sqrt(q);
    ch = std::cosh(s);
    sh = std::sinh(s) / s;
  } else if (q < -1e-300) {
    double s = std::sqrt(-q);
    ch = std::cos(s);
    sh = std::sin(s) / s;
  } else {
    ch = 1.0;
    sh = 1.0;
  }
  return {ch + sh * g.a, sh * g.b, sh * g.c, ch + sh * g.d};
}

// Product accumulated with a separate log-scale factor: value = exp(log_scale) * m.
struct ScaledMat2 {
  Mat2 m;
  double log_scale = 0.0;
  double log_norm() const { return std::log(m.norm()) + log_scale; }
};

}  // namespace cocyclelab
