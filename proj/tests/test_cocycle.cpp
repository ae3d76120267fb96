#include "doctest.h"

#include <cmath>
#include <random>

#include "cocyclelab/cocycle.hpp"

using namespace cocyclelab;

namespace {

double dist_inf(const Mat2& a, const Mat2& b) { return (a - b).max_abs(); }

Cocycle amo(double lambda, double E) {
  return Cocycle::schrodinger(BaseSystem::rotation(kGolden), E, amo_potential(lambda));
}

}  // namespace

TEST_CASE("iterates of constant cocycles") {
  auto rot = BaseSystem::rotation(kGolden);
  auto r6 = iterate(Cocycle::constant(rot, Mat2::rotation(kPi / 3)), Point(0.2), 6);
  CHECK(dist_inf(r6.m, Mat2::identity()) < 1e-14);
  CHECK(r6.log_scale == 0.0);

  auto d10 = iterate(Cocycle::constant(rot, Mat2::diag(2.0)), Point(0.2), 10);
  CHECK(d10.m.a == doctest::Approx(1024.0));
  CHECK(d10.m.d == doctest::Approx(1.0 / 1024.0));

  // free Schrodinger at E = 0: S^4 = Id
  auto free = Cocycle::schrodinger(rot, 0.0, zero_potential());
  CHECK(dist_inf(iterate(free, Point(0.7), 4).m, Mat2::identity()) < 1e-15);
}

TEST_CASE("huge products stay in scaled form") {
  auto c = Cocycle::constant(BaseSystem::rotation(kGolden), Mat2::diag(2.0));
  auto p = iterate(c, Point(0.0), 3000);
  CHECK(p.log_scale > 0.0);
  CHECK(p.log_norm() == doctest::Approx(3000 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("negative iterates invert") {
  auto c = amo(0.7, 0.4);
  Point x(0.31);
  for (int n : {1, 5, 40}) {
    auto fwd = iterate(c, x, n);
    Point y = c.base().iterate(x, n);
    auto back = iterate(c, y, -n);
    CHECK(dist_inf(back.m * fwd.m, Mat2::identity()) < 1e-14 * fwd.m.norm() * fwd.m.norm() + 1e-14);
  }
}

TEST_CASE("cocycle identity A^(m+n)(x) = A^m(f^n x) A^n(x)") {
  std::vector<Cocycle> cs = {amo(0.5, 0.3), amo(2.0, 0.0),
                             Cocycle::schrodinger(BaseSystem::skew_shift(kGolden), 1.0,
                                                  Potential{[](const Point& x) { return std::cos(kTwoPi * x[1]); }, "c", {}}),
                             swap_example(BaseSystem::rotation(kGolden), 0.0, 0.5, 0.0, 0.2)};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0, 1);
  for (const auto& c : cs) {
    double worst = 0;
    for (int trial = 0; trial < 30; ++trial) {
      Point x;
      x.dim = c.base().dim();
      for (int k = 0; k < x.dim; ++k) x[k] = U(rng);
      for (int m = 0; m <= 20; m += 5)
        for (int n = 0; n <= 20; n += 4) {
          Mat2 lhs = iterate(c, x, m + n).m;
          Mat2 rhs = iterate(c, c.base().iterate(x, n), m).m * iterate(c, x, n).m;
          worst = std::fmax(worst, dist_inf(lhs, rhs) / std::fmax(1.0, lhs.max_abs()));
        }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("determinant drift over a long product") {
  // elliptic-ish product: rotation by a varying angle composed with a mild shear
  auto base = BaseSystem::rotation(kGolden);
  Cocycle c(base, [](const Point& x) { return Mat2::rotation(1.0 + 0.2 * std::cos(kTwoPi * x[0])) * Mat2{1, 0.01, 0, 1}; }, "c");
  auto p = iterate(c, Point(0.1), 1000000);
  REQUIRE(p.log_scale == 0.0);
  CHECK(std::fabs(p.m.det() - 1.0) <= 1e-6);
}

TEST_CASE("Lyapunov exponents against closed forms") {
  auto rot = BaseSystem::rotation(kGolden);
  auto d = lyapunov_exponent(Cocycle::constant(rot, Mat2::diag(2.0)), Point(0.0), 10000, 100);
  CHECK(d.value == doctest::Approx(std::log(2.0)).epsilon(1e-3));
  auto r = lyapunov_exponent(Cocycle::constant(rot, Mat2::rotation(1.0)), Point(0.0), 10000, 100);
  CHECK(std::fabs(r.value) < 1e-3);
  // supercritical almost Mathieu on the spectrum: L = log(lambda)
  auto a = lyapunov_exponent(amo(2.0, 0.0), Point(0.0), 1000000, 1000);
  CHECK(a.value >= std::log(2.0) - 0.05);
  CHECK(a.value <= std::log(2.0) + 0.05);
}

TEST_CASE("uniform hyperbolicity decisions") {
  auto rot = BaseSystem::rotation(kGolden);
  UHOptions o;
  o.horizon = 256;
  o.grid = 128;
  auto d = uh_test(Cocycle::constant(rot, Mat2::diag(2.0)), o);
  CHECK(d.outcome == UHOutcome::UH);
  CHECK(d.cert.lambda > 1.8);
  CHECK(d.cert.lambda <= 2.0 + 1e-12);
  CHECK(uh_test(Cocycle::constant(rot, Mat2::rotation(1.0)), o).outcome == UHOutcome::NotUH);
  CHECK(uh_test(amo(0.5, 5.0), o).outcome == UHOutcome::UH);
  // E = 0 lies in the spectrum of the subcritical almost Mathieu operator
  CHECK(uh_test(amo(0.5, 0.0), o).outcome != UHOutcome::UH);
}

TEST_CASE("UH certificate holds on a 10x denser grid") {
  UHOptions o;
  o.horizon = 256;
  o.grid = 64;
  auto c = amo(0.5, 5.0);
  auto res = uh_test(c, o);
  REQUIRE(res.outcome == UHOutcome::UH);
  const double logc = std::log(res.cert.c), logl = std::log(res.cert.lambda);
  int bad = 0;
  for (const auto& x : sample_grid(c.base(), 10 * o.grid)) {
    ScaledMat2 P{Mat2::identity(), 0.0};
    Point y = x;
    for (int m = 1; m <= o.horizon; ++m) {
      P.m = c(y) * P.m;
      y = c.base().step(y);
      if (P.log_norm() < logc + m * logl) ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("periodic bases use monodromy squaring") {
  auto base = BaseSystem::periodic(1, 3);
  auto pot = periodic_sampler({0.0, 1.0, -1.0}, 1, 3);
  auto in_gap = uh_test(Cocycle::schrodinger(base, 5.0, pot));
  CHECK(in_gap.outcome == UHOutcome::UH);
  CHECK(in_gap.cert.residual < 1e-8);
  auto on_band = uh_test(Cocycle::schrodinger(base, 0.0, pot));
  CHECK(on_band.outcome == UHOutcome::NotUH);
}

TEST_CASE("conjugation") {
  auto rot = BaseSystem::rotation(kGolden);
  auto c = amo(0.5, 5.0);
  auto same = conjugate(c, [](const Point&) { return Mat2::identity(); });
  CHECK(dist_inf(same(Point(0.3)), c(Point(0.3))) == 0.0);

  // constant conjugacy: B A B^-1
  Mat2 B{1, 0.5, 0, 1};
  auto k = conjugate(Cocycle::constant(rot, Mat2::diag(2.0)), [B](const Point&) { return B; });
  CHECK(dist_inf(k(Point(0.0)), B * Mat2::diag(2.0) * B.inverse()) < 1e-15);

  // bounded conjugacy preserves the exponent
  auto cb = conjugate(c, [](const Point& x) { return Mat2{1, 0.5 * std::cos(kTwoPi * x[0]), 0, 1}; });
  auto l1 = lyapunov_exponent(c, Point(0.1), 200000, 1000);
  auto l2 = lyapunov_exponent(cb, Point(0.1), 200000, 1000);
  CHECK(std::fabs(l1.value - l2.value) < 1e-3);
  CHECK(uh_test(cb, UHOptions{256, 64}).outcome == UHOutcome::UH);
}

TEST_CASE("induced cocycle") {
  auto rot = BaseSystem::rotation(kGolden);
  auto c = amo(0.5, 5.0);
  // Z = X: the induced cocycle is the cocycle itself
  auto whole = induced_cocycle(c, 0.0, 1.0);
  auto st = whole.step(Point(0.3));
  CHECK(st.r == 1);
  CHECK(dist_inf(st.A.m, c(Point(0.3))) == 0.0);

  // product of the induced steps equals the product along the orbit
  auto ic = induced_cocycle(c, 0.1, 0.2);
  Point x(0.15);
  ScaledMat2 P{Mat2::identity(), 0.0};
  std::int64_t total = 0;
  Point y = x;
  for (int i = 0; i < 5; ++i) {
    auto s = ic.step(y);
    CHECK(ic.in_Z(s.next));
    P.m = s.A.m * P.m;
    total += s.r;
    y = s.next;
  }
  auto direct = iterate(c, x, total);
  CHECK(dist_inf(P.m, direct.m) / direct.m.max_abs() < 1e-10);

  // L(A_Z) = L(A) / mu(Z) for a constant cocycle
  auto k = 12;
  auto cf = ContinuedFraction::of_double(kGolden);
  double len = std::fabs(static_cast<double>(cf.q[static_cast<size_t>(k)]) * kGolden - static_cast<double>(cf.p[static_cast<size_t>(k)]));
  auto icd = induced_cocycle(Cocycle::constant(rot, Mat2::diag(2.0)), 0.0, len);
  auto e = lyapunov_induced(icd, Point(0.0), 20000, 200);
  double expect = std::log(2.0) / len;
  CHECK(std::fabs(e.value - expect) <= 3 * e.stderr_ + 1e-9 * expect);
}

TEST_CASE("swap example") {
  auto rot = BaseSystem::rotation(kGolden);
  auto ctrl = swap_example(rot, 0.0, 0.5, 0.0, 0.0);
  auto l0 = lyapunov_exponent(ctrl, Point(0.1), 200000, 1000);
  CHECK(l0.value == doctest::Approx(0.5 * std::log(2.0)).epsilon(2e-3));
  auto full = swap_example(rot, 0.0, 0.5, 0.0, 0.5);
  CHECK(std::fabs(lyapunov_exponent(full, Point(0.1), 200000, 1000).value) < 1e-2);
  auto irr = swap_example(rot, 0.0, 0.5, 0.0, 0.5 / std::sqrt(kPi));
  CHECK(std::fabs(lyapunov_exponent(irr, Point(0.1), 1000000, 1000).value) <= 1e-2);
  CHECK_THROWS(swap_example(rot, 0.0, 0.5, 0.4, 0.2));
}

TEST_CASE("winding of the unstable direction") {
  auto pair = anzai_winding_pair();
  CHECK(unstable_winding(pair.a0, pair.loop) == 0);
  CHECK(unstable_winding(pair.a1, pair.loop) == 1);
  auto reversed = [&](double s) { return pair.loop(1.0 - s); };
  CHECK(unstable_winding(pair.a1, reversed) == -1);
  // the two cocycles are pointwise in SL(2,R) and continuous in x
  for (int i = 0; i < 100; ++i) {
    Point p((i + 0.5) / 100, 0.37);
    CHECK(pair.a1(p).det() == doctest::Approx(1.0));
  }
}
