#include "doctest.h"

#include <cmath>
#include <random>

#include "cocyclelab/base_dynamics.hpp"

using namespace cocyclelab;

constexpr double kTwoPiLocal = 6.283185307179586;

TEST_CASE("step on the built-in systems") {
  auto half = BaseSystem::periodic(1, 2);
  CHECK(half.step(Point(0.25))[0] == doctest::Approx(0.75));

  auto ss = BaseSystem::skew_shift(kGolden);
  Point y = ss.step(Point(0.0, 0.0));
  CHECK(y[0] == doctest::Approx(kGolden));
  CHECK(y[1] == 0.0);

  auto az = BaseSystem::anzai(kGolden, anzai_delta(2), "delta2");
  Point z = az.step(Point(0.25, 0.0));
  CHECK(z[0] == doctest::Approx(wrap01(0.25 + kGolden)));
  CHECK(z[1] == doctest::Approx(0.0));
}

TEST_CASE("wrap stays in [0,1)") {
  CHECK(wrap01(1.0) == 0.0);
  CHECK(wrap01(-1e-300) < 1.0);
  CHECK(wrap01(-0.25) == doctest::Approx(0.75));
  CHECK(circle_dist(0.01, 0.99) == doctest::Approx(0.02));
}

TEST_CASE("inverse undoes step for every kind") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0, 1);
  std::vector<BaseSystem> systems = {BaseSystem::rotation(kGolden), BaseSystem::torus({kGolden, std::sqrt(2.0) - 1}),
                                     BaseSystem::skew_shift(kGolden),
                                     BaseSystem::anzai(kGolden, anzai_delta(3), "delta3")};
  for (auto& s : systems) {
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
      Point p;
      p.dim = s.dim();
      for (int k = 0; k < s.dim(); ++k) p[k] = U(rng);
      worst = std::fmax(worst, torus_dist(s.step_inverse(s.step(p)), p));
      worst = std::fmax(worst, torus_dist(s.step(s.step_inverse(p)), p));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  auto ss = BaseSystem::skew_shift(kGolden);
  CHECK_THROWS_AS(ss.step(Point(0.1)), std::invalid_argument);
}

TEST_CASE("rational alpha needs periodic mode") {
  CHECK_THROWS_AS(BaseSystem::rotation(0.5), std::invalid_argument);
  CHECK_THROWS_AS(BaseSystem::rotation(2.0 / 7.0), std::invalid_argument);
  CHECK_NOTHROW(BaseSystem::periodic(2, 7));
  BaseOptions o;
  o.periodic_mode = true;
  CHECK_NOTHROW(BaseSystem::rotation(0.5, o));
}

TEST_CASE("iterate matches repeated steps") {
  auto r = BaseSystem::rotation(kGolden);
  Point x(0.123);
  Point y = x;
  for (int i = 0; i < 1000; ++i) y = r.step(y);
  CHECK(circle_dist(r.iterate(x, 1000)[0], y[0]) < 1e-12);
  CHECK(circle_dist(r.iterate(r.iterate(x, 1000), -1000)[0], x[0]) < 1e-14);
  auto per = BaseSystem::periodic(2, 5);
  CHECK(per.iterate(Point(0.0), 3)[0] == doctest::Approx(0.2));
}

TEST_CASE("continued fraction of the golden mean") {
  auto cf = ContinuedFraction::of_double(kGolden);
  REQUIRE(cf.q.size() > 30);
  CHECK(cf.terms[0] == 0);
  for (int k = 1; k < 30; ++k) CHECK(cf.terms[static_cast<size_t>(k)] == 1);
  std::vector<std::int64_t> fib = {1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89};
  for (size_t k = 0; k < fib.size(); ++k) CHECK(cf.q[k] == fib[k]);
  CHECK(cf.first_index_with_q_at_least(89) == 10);
  auto back = ContinuedFraction::from_terms({0, 2, 3});
  CHECK(back.value() == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("Birkhoff averages") {
  auto r = BaseSystem::rotation(kGolden);
  CHECK(birkhoff_average(r, [](const Point&) { return 1.0; }, Point(0.3), 100) == 1.0);
  double m = birkhoff_average(r, [](const Point& p) { return std::cos(kTwoPiLocal * p[0]); }, Point(0.0), 100000);
  CHECK(std::fabs(m) < 1e-4);
  double h = birkhoff_average(r, [](const Point& p) { return p[0] < 0.5 ? 1.0 : 0.0; }, Point(0.0), 100000);
  CHECK(std::fabs(h - 0.5) < 1e-3);
}

TEST_CASE("trig Birkhoff error decays like 1/n") {
  auto r = BaseSystem::rotation(kGolden);
  auto g = [](const Point& p) { return std::cos(kTwoPiLocal * p[0]) + 0.5 * std::sin(3 * kTwoPiLocal * p[0]); };
  for (std::int64_t n : {1000, 10000, 100000, 1000000}) {
    double e = std::fabs(birkhoff_average(r, g, Point(0.1), n));
    CHECK(e <= 5.0 / std::pow(static_cast<double>(n), 0.9));
  }
}

TEST_CASE("anzai delta") {
  auto d1 = anzai_delta(1);
  CHECK(d1(0.0) == 0.0);
  CHECK(d1(0.5) == 1.0);
  CHECK(anzai_delta(3)(1.0 / 6.0) == doctest::Approx(1.0));
  CHECK_THROWS(anzai_delta(0));
  for (int k : {1, 2, 5}) {
    auto d = anzai_delta(k);
    const int M = 1000000;
    double s = 0;
    for (int i = 0; i < M; ++i) s += d((i + 0.5) / M);
    CHECK(std::fabs(s / M - 0.5) < 1e-5);
  }
}

TEST_CASE("system spec parsing") {
  CHECK(parse_system("rotation:golden").alpha() == doctest::Approx(kGolden));
  auto p = parse_system("rotation:1/2");
  CHECK(p.periodic_mode());
  CHECK(p.period_q() == 2);
  CHECK(parse_system("anzai:golden:delta3").dim() == 2);
  CHECK(parse_system("torus:golden,sqrt2").dim() == 2);
  CHECK(parse_system("rotation:cf:0,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1")
            .alpha() == doctest::Approx(kGolden).epsilon(1e-12));
  CHECK_THROWS(parse_system("bogus:1"));
}
