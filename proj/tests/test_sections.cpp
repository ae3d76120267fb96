#include "doctest.h"

#include <cmath>
#include <complex>
#include <random>

#include "cocyclelab/sections.hpp"

using namespace cocyclelab;

namespace {

// Mean-zero solution of psi(x + alpha) - psi(x) = p(x) - c0 from the Fourier coefficients.
double fourier_solution(const TrigPolynomial& p, double alpha, double x) {
  double v = 0.0;
  for (const auto& t : p.terms) {
    std::complex<double> den = std::polar(1.0, 2 * M_PI * t.k * alpha) - 1.0;
    v += std::real(std::complex<double>(t.a, -t.b) * std::polar(1.0, 2 * M_PI * t.k * x) / den);
  }
  return v;
}

TrigPolynomial cos1() {
  TrigPolynomial p;
  p.terms = {{1, 1.0, 0.0}};
  return p;
}

cplx zero_fiber(const Point&) { return {0.0, 0.0}; }

}  // namespace

TEST_CASE("closed-form Birkhoff sums of trigonometric polynomials") {
  auto base = BaseSystem::rotation(kGolden);
  TrigPolynomial p;
  p.c0 = 0.4;
  p.terms = {{1, 1.0, -0.5}, {3, 0.2, 0.7}};
  for (double x : {0.0, 0.123, 0.77}) {
    for (std::int64_t j : {0, 1, 7, 100, 2500}) {
      long double s = 0;
      for (std::int64_t m = 0; m < j; ++m) s += p(base.rotate(x, m)) - p.c0;
      CHECK(p.centered_sum(base, x, j) == doctest::Approx(static_cast<double>(s)).epsilon(1e-10).scale(1.0));
      CHECK(std::fabs(p.centered_sum(base, x, j)) <= p.centered_sup(base, j) + 1e-12);
    }
  }
  CHECK(p.centered_bound(base) >= p.centered_sup(base, 12345));
}

TEST_CASE("rotation hit search agrees with a scan") {
  auto base = BaseSystem::rotation(kGolden);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    double x = U(rng), a = U(rng);
    double L = std::pow(10.0, -1.0 - 3.0 * U(rng));
    std::int64_t J = 300 + static_cast<std::int64_t>(U(rng) * 20000);
    bool open = trial % 2 == 0;
    std::int64_t naive = -1;
    for (std::int64_t j = 0; j < J; ++j) {
      double off = wrap01(base.rotate(x, j) - a);
      if (open ? (off > 0 && off < L) : off <= L) {
        naive = j;
        break;
      }
    }
    CHECK(first_rotation_hit(base, x, a, L, J, open) == naive);
  }
}

TEST_CASE("an invariant y0 with Lambda = X is returned unchanged") {
  auto base = BaseSystem::rotation(kGolden);
  auto p = cos1();
  auto F = SkewProduct::real_line(base, Observable::of(p), 0.0);
  Tower K = build_rotation_tower(base, 13);
  FiberFn y0 = [p](const Point& x) { return cplx(fourier_solution(p, kGolden, x[0]), 0.0); };
  auto sec = almost_invariant_section(F, K, LambdaSet::Whole, y0);
  const auto& r = sec.report();
  CHECK(r.lambda_ok);
  CHECK(r.max_lambda_gap == 0.0);
  CHECK(r.support_ok);
  CHECK(r.max_residual_inside < 1e-12);
}

TEST_CASE("real-line section over the n=5 tower") {
  auto base = BaseSystem::rotation(kGolden);
  auto F = SkewProduct::real_line(base, Observable::of(cos1()), 0.0);
  Tower K = build_rotation_tower(base, 5);
  auto sec = almost_invariant_section(F, K, LambdaSet::Empty, zero_fiber);
  const auto& r = sec.report();
  CHECK(r.support_ok);
  CHECK(r.max_residual_outside < 1e-14);
  CHECK(r.max_residual_inside > 1e-3);  // the section is not invariant: the support is real
  CHECK(r.ell_lo >= K.n);
  CHECK(r.ell_hi >= K.n);
  CHECK(r.ell_lo <= K.N);
  CHECK(r.bound_all_j_ok);
  CHECK(r.bound_proof_ok);
  // the sup over j of |S_j| for cos is 1/sin(pi alpha)
  CHECK(r.A_1N <= 1.0 / std::sin(M_PI * kGolden) + 1e-12);
  // pullbacks shorter than n are not covered by the [n, N] range
  CHECK(r.A_1N > r.A_nN);
  CHECK(r.M_sup > r.bound);
  // at the knots the section matches the pullback of y0 = 0
  double u = r.knots[1];
  CHECK(std::fabs(sec.interior_value(Point(wrap01(K.lo + u))).real()) < 1e-15);
}

TEST_CASE("rotation-valued disk cocycle keeps the zero section") {
  auto base = BaseSystem::rotation(kGolden);
  Cocycle c(base, [](const Point& x) { return Mat2::rotation(0.4 + std::sin(kTwoPi * x[0])); }, "rot");
  Tower K = build_rotation_tower(base, 13);
  auto sec = almost_invariant_section(SkewProduct::disk(c), K, LambdaSet::Empty, zero_fiber);
  CHECK(sec.report().M_sup < 1e-13);
  CHECK(sec.report().ok());
}

TEST_CASE("a tower whose knots collide cannot be resolved") {
  auto base = BaseSystem::rotation(kGolden);
  Tower K = build_rotation_tower(base, 5);
  K.len = 1e-17;
  auto F = SkewProduct::real_line(base, Observable::of(cos1()), 0.0);
  CHECK_THROWS_AS(almost_invariant_section(F, K, LambdaSet::Empty, zero_fiber), SectionError);
}

TEST_CASE("constant phi gives psi = 0") {
  auto base = BaseSystem::rotation(kGolden);
  TrigPolynomial p;
  p.c0 = 0.7;
  auto s = solve_cohomological(base, Observable::of(p));
  for (double x : {0.0, 0.25, 0.6180339887}) {
    CHECK(s.psi_tilde(Point(x)) == 0.0);
    CHECK(s.phi_tilde(Point(x)) == 0.7);
  }
}

TEST_CASE("exact boundary data come back unchanged") {
  auto base = BaseSystem::rotation(kGolden);
  auto p = cos1();
  ScalarFn psi = [p](const Point& x) { return fourier_solution(p, kGolden, x[0]); };
  auto s = cohomological_boundary(base, Observable::of(p), psi, 0.0);
  CHECK(s.boundary);
  CHECK(s.sup_change == 0.0);
  CHECK(s.residual < 1e-12);
}

TEST_CASE("tower solver against the Fourier oracle") {
  auto base = BaseSystem::rotation(kGolden);
  auto p = cos1();
  CobOptions o;
  o.eps = 1e-3;
  o.min_n = 1000000;
  auto s = solve_cohomological(base, Observable::of(p), o);
  CHECK(s.residual <= 1e-12);
  CHECK(s.sup_change < o.eps);
  CHECK(s.n >= 1000000);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 10000; ++i) {
    double x = (i + 0.5) / 10000.0;
    double d = s.psi_tilde(Point(x)) - fourier_solution(p, kGolden, x);
    lo = std::fmin(lo, d);
    hi = std::fmax(hi, d);
  }
  CHECK(hi - lo <= 1e-6);
}

TEST_CASE("coarse towers obey the eps budget and are exact") {
  auto base = BaseSystem::rotation(kGolden);
  TrigPolynomial p;
  p.c0 = -0.2;
  p.terms = {{1, 0.5, 0.5}, {2, 0.0, 0.3}};
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    CobOptions o;
    o.eps = eps;
    auto s = solve_cohomological(base, Observable::of(p), o);
    CHECK(s.sup_change < eps);
    CHECK(s.residual <= 1e-12);
    CHECK(s.n >= s.j0);
  }
}

TEST_CASE("generic observable on a skew-shift base") {
  auto base = BaseSystem::skew_shift(kGolden);
  Observable phi = Observable::of([](const Point& x) { return std::cos(kTwoPi * x[0]) + 0.1 * std::sin(kTwoPi * x[1]); });
  CobOptions o;
  o.eps = 0.05;
  o.mesh = 1024;
  o.growth_horizon = 512;
  auto s = solve_cohomological(base, phi, o);
  CHECK(s.sup_change < o.eps);
  CHECK(s.residual <= 1e-10);
  CHECK(std::fabs(s.c) < 1e-2);
}

TEST_CASE("parameter family with T* = {0}") {
  auto base = BaseSystem::rotation(kGolden);
  std::vector<FamilyPoint> pts;
  for (double t : {0.0, 0.25, 0.5, 1.0}) {
    TrigPolynomial p;
    p.terms = {{1, t, 0.0}};
    FamilyPoint fp{t, Observable::of(p), std::nullopt};
    if (t == 0.0) fp.psi = [](const Point&) { return 0.0; };
    pts.push_back(fp);
  }
  auto eps = [](double) { return 1e-2; };
  auto sol = solve_cohomological_family(base, pts, eps);
  REQUIRE(sol.t.size() == 4);
  CHECK(sol.sigma[0] == 1.0);
  CHECK(sol.sup_change[0] == 0.0);
  CHECK(sol.psi_tilde[0](Point(0.3)) == 0.0);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(sol.residual[i] <= 1e-12);
    CHECK(sol.sup_change[i] < 1e-2);
  }
  CHECK(sol.radius > 0.0);
}

TEST_CASE("path over (0,1] blends exact stages") {
  auto base = BaseSystem::rotation(kGolden);
  TrigPolynomial p;
  p.terms = {{1, 0.3, 0.0}};
  Observable phi = Observable::of(p);
  CobPath path(base, phi, [](double t) { return 0.05 * t; }, 4);
  REQUIRE(path.nodes().size() == 5);
  for (double t : {1.0, 0.7, 0.3, 0.1, 0.0625, 0.01}) {
    double worst = 0, change = 0;
    for (int i = 0; i < 400; ++i) {
      Point x((i + 0.5) / 400);
      double lhs = path.phi_tilde(t, x);
      double rhs = path.psi_tilde(t, base.step(x)) - path.psi_tilde(t, x) + path.c(t);
      worst = std::fmax(worst, std::fabs(lhs - rhs));
      change = std::fmax(change, std::fabs(lhs - phi(x)));
    }
    CHECK(worst <= 1e-12);
    CHECK(change < 0.05 * std::fmax(t, 0.0625) * 2.0 + 1e-15);
  }
  CHECK_THROWS(path.phi_tilde(0.0, Point(0.1)));
}

TEST_CASE("conjugacy to rotations: rotation-valued input") {
  auto base = BaseSystem::rotation(kGolden);
  Cocycle c(base, [](const Point& x) { return Mat2::rotation(1 + std::cos(kTwoPi * x[0])); }, "rot");
  auto r = conjugate_to_rotations(c, 1e-2);
  REQUIRE_FALSE(r.refused);
  CHECK(r.sup_change <= 1e-12);
  CHECK(r.rotation_residual <= 1e-12);
  CHECK(psl_distance(r.B(Point(0.3)), Mat2::identity()) <= 1e-12);
}

TEST_CASE("conjugacy to rotations: small shear") {
  auto base = BaseSystem::rotation(kGolden);
  Cocycle c(base,
            [](const Point& x) {
              return Mat2::rotation(kTwoPi * 0.3 + 0.2 * std::cos(kTwoPi * x[0])) * Mat2{1, 1e-3, 0, 1};
            },
            "shear");
  auto r = conjugate_to_rotations(c, 1e-2);
  REQUIRE_FALSE(r.refused);
  CHECK(r.growth < r.gamma);
  CHECK(r.sup_change < 1e-2);
  CHECK(r.rotation_residual <= 1e-8);
  CHECK(r.invariance_residual <= 1e-10);
  CHECK(r.n > r.n0 - 1);
  CHECK(r.section.support_ok);
  REQUIRE(r.perturbed.has_value());
  // the perturbed cocycle is conjugate to rotations: its products stay bounded
  Point x(0.17);
  auto P = iterate(*r.perturbed, x, 5000);
  double cond = r.B(x).norm() * r.B(base.iterate(x, 5000)).norm();
  CHECK(std::exp(P.log_norm()) <= cond * (1 + 1e-6));
}

TEST_CASE("hyperbolic constant cocycle is refused") {
  auto base = BaseSystem::rotation(kGolden);
  auto r = conjugate_to_rotations(Cocycle::constant(base, Mat2::diag(2.0)), 1e-2);
  CHECK(r.refused);
  CHECK(r.growth == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(r.reason.find("growth") != std::string::npos);
}

TEST_CASE("UH reduction: constant diagonal") {
  auto base = BaseSystem::rotation(kGolden);
  ReduceOptions o;
  o.t_grid = {1.0, 0.5};
  auto r = reduce_uh_to_constant(Cocycle::constant(base, Mat2::diag(2.0)), o);
  REQUIRE_FALSE(r.refused);
  CHECK(psl_distance(r.B(Point(0.4)), Mat2::identity()) <= 1e-12);
  CHECK(r.phi(Point(0.4)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (auto& p : r.path) CHECK(p.sup_dist <= 1e-12);
}

TEST_CASE("UH reduction: the Anzai example") {
  auto wp = anzai_winding_pair();
  auto r = reduce_uh_to_constant(wp.a1);
  REQUIRE_FALSE(r.refused);
  CHECK(r.c == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(r.frame_residual <= 1e-9);
  CHECK(r.monotone);
  for (auto& p : r.path) CHECK(p.conjugation_residual <= 1e-7);
  CHECK(r.path.back().sup_dist < 1e-3);
}

TEST_CASE("UH reduction: varying expansion matches the Lyapunov exponent") {
  auto base = BaseSystem::rotation(kGolden);
  Cocycle c(base, [](const Point& x) { return Mat2::diag_exp(std::log(2.0) + 0.3 * std::cos(kTwoPi * x[0])); }, "var");
  ReduceOptions o;
  o.t_grid = {1.0, 0.5, 0.25};
  o.eps_scale = 0.2;
  auto r = reduce_uh_to_constant(c, o);
  REQUIRE_FALSE(r.refused);
  CHECK(std::fabs(r.c - r.lyapunov) <= std::fmax(3 * r.lyapunov_err, 1e-5));
  CHECK(r.monotone);
  for (auto& p : r.path) {
    CHECK(p.conjugation_residual <= 1e-10);
    CHECK(p.sup_dist < 0.2 * p.t * 3.0);
  }
}

TEST_CASE("non-UH input is refused by the reduction") {
  auto base = BaseSystem::rotation(kGolden);
  auto r = reduce_uh_to_constant(Cocycle::constant(base, Mat2::rotation(1.0)));
  CHECK(r.refused);
}
