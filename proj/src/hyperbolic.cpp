#include "cocyclelab/hyperbolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cocyclelab {

namespace {

constexpr double kEdge = 1e-12;

cplx mobius_to_origin(cplx a, cplx z) { return (z - a) / (1.0 - std::conj(a) * z); }
cplx mobius_from_origin(cplx a, cplx w) { return (w + a) / (1.0 + std::conj(a) * w); }

// lift of the induced circle map: F(phi + pi) = F(phi) + pi, F(phi) = angle of A u(phi)
double lift(const Mat2& A, double phi) {
  double pm = A.polar_angle();
  double u0 = std::cos(phi), u1 = std::sin(phi);
  auto Au = A.apply(u0, u1);
  double cp = std::cos(pm), sp = std::sin(pm);
  double p0 = cp * Au[0] + sp * Au[1], p1 = -sp * Au[0] + cp * Au[1];
  return phi + pm + std::atan2(u0 * p1 - u1 * p0, u0 * p0 + u1 * p1);
}

double rho(double L, double t) { return std::sin(L) / (std::sin(t) * std::sin(L - t)); }

}  // namespace

DiskPoint::DiskPoint(cplx z) : z_(z) {
  double r = std::abs(z);
  if (!(r < 1.0 - kEdge)) throw std::domain_error("disk point on or outside the unit circle");
  h_ = (1.0 - r) * (1.0 + r);
}

DiskPoint::DiskPoint(cplx z, double one_minus_r2) : z_(z), h_(one_minus_r2) {
  if (!(std::abs(z) < 1.0 - kEdge) || !(h_ > 0.0)) throw std::domain_error("disk point on or outside the unit circle");
}

DiskPoint disk_action(const Mat2& A, const DiskPoint& p) {
  const cplx al(0.5 * (A.a + A.d), 0.5 * (A.b - A.c));
  const cplx be(0.5 * (A.a - A.d), -0.5 * (A.b + A.c));
  cplx z = p.z();
  const cplx den = std::conj(be) * z + std::conj(al);
  cplx w = (al * z + be) / den;
  if (!(std::abs(w) < 1.0 - kEdge)) throw std::domain_error("disk action: image within 1e-12 of the boundary");
  return DiskPoint(w, p.one_minus_r2() / std::norm(den));
}

double hyp_dist(const DiskPoint& p, const DiskPoint& q) {
  const double den = std::abs(1.0 - std::conj(p.z()) * q.z());
  double r = std::abs(p.z() - q.z()) / den;
  if (r < 0.5) return 2.0 * std::atanh(r);
  // 1 - r^2 = (1 - |p|^2)(1 - |q|^2) / |1 - conj(p) q|^2, free of cancellation near the circle
  double h = p.one_minus_r2() * q.one_minus_r2() / (den * den);
  return 2.0 * std::log1p(std::min(r, 1.0)) - std::log(h);
}

DiskPoint geodesic_point(const DiskPoint& a, const DiskPoint& b, double s) {
  cplx bb = mobius_to_origin(a.z(), b.z());
  double r = std::abs(bb);
  if (r == 0.0) return a;
  cplx w = std::tanh(s * std::atanh(r)) * (bb / r);
  return DiskPoint(mobius_from_origin(a.z(), w));
}

Mat2 spd_to(const DiskPoint& p) {
  double r = std::abs(p.z());
  if (r == 0.0) return Mat2::identity();
  double s = std::atanh(r);
  double chi = -0.5 * std::arg(p.z());
  return Mat2::rotation(chi) * Mat2::diag_exp(s) * Mat2::rotation(-chi);
}

Mat2 phi_adjust(const DiskPoint& p1, const DiskPoint& p2) {
  if (p1.z() == p2.z()) return Mat2::identity();
  const Mat2 M2 = spd_to(p2), M1i = spd_to(p1).inverse();
  const Mat2 X = M2 * M1i;
  const Mat2 Y = M2 * Mat2{0, -1, 1, 0} * M1i;
  // M2 R_theta M1^{-1} is symmetric when cos(theta) A + sin(theta) B = 0
  double A = X.b - X.c, B = Y.b - Y.c;
  double th = std::atan2(-A, B);
  Mat2 P = M2 * Mat2::rotation(th) * M1i;
  if (P.trace() < 0) P = P.scaled(-1.0);
  double off = 0.5 * (P.b + P.c);
  P.b = off;
  P.c = off;
  return P;
}

PsiResult psi_n_adjust(const std::vector<Mat2>& mats, const DiskPoint& p, const DiskPoint& q) {
  const size_t n = mats.size();
  if (n == 0) throw std::invalid_argument("psi_n_adjust: need n >= 1");
  // forward images p_i and pulled-back targets q_i
  std::vector<DiskPoint> ps(n + 1), qs(n + 1);
  ps[0] = p;
  for (size_t i = 0; i < n; ++i) ps[i + 1] = disk_action(mats[i], ps[i]);
  qs[n] = q;
  for (size_t i = n; i-- > 0;) qs[i] = disk_action(mats[i].inverse(), qs[i + 1]);

  PsiResult r;
  r.distance = hyp_dist(ps[n], q);
  r.step_bound = std::expm1(r.distance / (2.0 * static_cast<double>(n)));
  r.mats.reserve(n);
  DiskPoint z = p;
  for (size_t i = 0; i < n; ++i) {
    double s = static_cast<double>(i + 1) / static_cast<double>(n);
    DiskPoint target = i + 1 == n ? q : geodesic_point(ps[i + 1], qs[i + 1], s);
    DiskPoint moved = disk_action(mats[i], z);
    Mat2 corr = phi_adjust(moved, target);
    r.max_correction = std::fmax(r.max_correction, (corr - Mat2::identity()).norm());
    r.mats.push_back(corr * mats[i]);
    z = disk_action(corr, moved);
  }
  r.residual = std::abs(z.z() - q.z());
  if (r.max_correction > r.step_bound * (1.0 + 1e-6) + 1e-12)
    throw std::logic_error("psi_n_adjust: correction exceeds e^{d/2n} - 1");
  return r;
}

ProjInterval::ProjInterval(double s, double l) : start(s), length(l) {
  if (!(l > 0.0 && l < kPi)) throw std::invalid_argument("projective interval length must lie in (0, pi)");
}

std::optional<double> ProjInterval::offset(double phi) const {
  double t = std::fmod(phi - start, kPi);
  if (t < 0) t += kPi;
  if (t > 0.0 && t < length) return t;
  return std::nullopt;
}

double proj_image(const Mat2& A, double phi) {
  double t = std::fmod(lift(A, phi), kPi);
  return t < 0 ? t + kPi : t;
}

double proj_derivative(const Mat2& A, double phi) {
  auto v = A.apply(std::cos(phi), std::sin(phi));
  return A.det() / (v[0] * v[0] + v[1] * v[1]);
}

ProjInterval image(const Mat2& A, const ProjInterval& I) {
  double a = lift(A, I.start), b = lift(A, I.start + I.length);
  return ProjInterval(a, b - a);
}

double hilbert_norm(const ProjInterval& I, double phi, double dphi) {
  auto t = I.offset(phi);
  if (!t) throw std::domain_error("hilbert_norm: point not interior to the interval");
  return rho(I.length, *t) * std::fabs(dphi);
}

double hilbert_dist(const ProjInterval& I, double phi1, double phi2) {
  auto t1 = I.offset(phi1), t2 = I.offset(phi2);
  if (!t1 || !t2) throw std::domain_error("hilbert_dist: point not interior to the interval");
  auto coord = [&](double t) { return std::log(std::sin(t) / std::sin(I.length - t)); };
  return std::fabs(coord(*t1) - coord(*t2));
}

double birkhoff_ratio(const ProjInterval& I, const ProjInterval& J, int samples) {
  double best = 0.0;
  for (int k = 0; k < samples; ++k) {
    double phi = J.start + J.length * (k + 0.5) / samples;
    best = std::fmax(best, hilbert_norm(I, phi, 1.0) / hilbert_norm(J, phi, 1.0));
  }
  return best;
}

double birkhoff_bound(const ProjInterval& I, const ProjInterval& J) {
  return std::tanh(0.25 * hilbert_dist(I, J.start, J.start + J.length));
}

WindingConstants winding_constants(double eps) {
  if (!(eps > 0 && eps < 0.5 * kPi)) throw std::invalid_argument("winding constants: eps must lie in (0, pi/2)");
  WindingConstants k;
  k.eps = eps;
  // rho is smallest at the midpoint, where it equals 2 cot(L/2)
  k.C1 = 2.0 * std::tan(0.5 * eps);
  k.C2 = 2.0 / std::tan(0.5 * eps);
  // inf over |I| in (eps, pi - eps] and phi in J of rho_J / rho_I, J concentric with |J| = |I| - eps
  auto ratio = [eps](double L, double u) {
    // u in (0,1): position inside J
    double LJ = L - eps, t = u * LJ;
    return rho(LJ, t) / rho(L, t + 0.5 * eps);
  };
  const int NL = 600, NU = 600;
  double best = std::numeric_limits<double>::infinity(), bL = 0, bU = 0;
  for (int i = 1; i <= NL; ++i) {
    double L = eps + (kPi - 2 * eps) * i / NL;
    for (int j = 0; j < NU; ++j) {
      double u = (j + 0.5) / NU;
      double r = ratio(L, u);
      if (r < best) {
        best = r;
        bL = L;
        bU = u;
      }
    }
  }
  // local refinement around the grid minimum
  double hL = (kPi - 2 * eps) / NL, hU = 1.0 / NU;
  for (int it = 0; it < 60; ++it) {
    for (int a = -2; a <= 2; ++a)
      for (int b = -2; b <= 2; ++b) {
        double L = std::clamp(bL + a * hL, eps + 1e-12, kPi - eps);
        double u = std::clamp(bU + b * hU, 1e-9, 1 - 1e-9);
        double r = ratio(L, u);
        if (r < best) {
          best = r;
          bL = L;
          bU = u;
        }
      }
    hL *= 0.5;
    hU *= 0.5;
  }
  k.tau = best;
  k.c = std::sqrt(k.C1 / k.C2);
  k.lambda = std::sqrt(k.tau);
  return k;
}

double winding_lift(const std::vector<Mat2>& mats, double v_angle, double theta) {
  double x = v_angle + theta;
  for (const auto& A : mats) x = lift(A, x) + theta;
  return x;
}

WindingSolution winding_solve(const std::vector<Mat2>& mats, double v_angle, double w_angle, double eps) {
  return winding_solve(mats, v_angle, w_angle, winding_constants(eps));
}

WindingSolution winding_solve(const std::vector<Mat2>& mats, double v_angle, double w_angle,
                              const WindingConstants& k) {
  const double eps = k.eps;
  WindingSolution sol;
  sol.constants = k;
  const double n = static_cast<double>(mats.size());
  sol.log_norm_bound = std::log(k.c) + n * std::log(k.lambda);

  double glo = winding_lift(mats, v_angle, -eps), ghi = winding_lift(mats, v_angle, eps);
  double kmin = std::ceil((glo - w_angle) / kPi), kmax = std::floor((ghi - w_angle) / kPi);
  double best = std::numeric_limits<double>::infinity();
  for (double kk = kmin; kk <= kmax; kk += 1.0) {
    double target = w_angle + kk * kPi;
    double lo = -eps, hi = eps;
    for (int it = 0; it < 200 && hi - lo > 0; ++it) {
      double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (winding_lift(mats, v_angle, mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    double th = std::fabs(winding_lift(mats, v_angle, lo) - target) <= std::fabs(winding_lift(mats, v_angle, hi) - target) ? lo : hi;
    if (std::fabs(th) < std::fabs(best)) best = th;
  }

  // product norm of the unrotated product on the unit vector v
  double x = std::cos(v_angle), y = std::sin(v_angle), logs = 0.0;
  for (const auto& A : mats) {
    auto u = A.apply(x, y);
    double nn = std::hypot(u[0], u[1]);
    logs += std::log(nn);
    x = u[0] / nn;
    y = u[1] / nn;
  }
  sol.log_product_norm = logs;

  if (std::isfinite(best)) {
    sol.found = true;
    sol.theta = best;
    Mat2 R = Mat2::rotation(best);
    auto u = R.apply(std::cos(v_angle), std::sin(v_angle));
    for (const auto& A : mats) {
      auto t = A.apply(u[0], u[1]);
      t = R.apply(t[0], t[1]);
      double nn = std::hypot(t[0], t[1]);
      u = {t[0] / nn, t[1] / nn};
    }
    sol.residual = std::fabs(u[0] * std::sin(w_angle) - u[1] * std::cos(w_angle));
  } else {
    sol.crosscheck_ok = sol.log_product_norm >= sol.log_norm_bound;
  }
  return sol;
}

}  // namespace cocyclelab
