#include "doctest.h"

#include <cmath>

#include "cocyclelab/towers.hpp"

using namespace cocyclelab;

namespace {

// Naive oracle: walk every grid orbit explicitly.
struct Naive {
  bool good = true, spanning = true;
};
Naive naive_check(double alpha, const Tower& t, int grid) {
  Naive r;
  for (int g = 0; g < grid; ++g) {
    double x = static_cast<double>(g) / grid;
    if (t.offset(x) <= t.len) {
      double y = x;
      for (std::int64_t i = 1; i < t.n; ++i) {
        y = wrap01(y + alpha);
        if (t.offset(y) <= t.len) r.good = false;
      }
    }
    bool covered = false;
    double y = x;
    for (std::int64_t i = 0; i < t.N && !covered; ++i) {
      if (t.offset(y) <= t.len) covered = true;
      y = wrap01(y - alpha);
    }
    if (!covered) r.spanning = false;
  }
  return r;
}

}  // namespace

TEST_CASE("golden towers certify and agree with the naive oracle") {
  auto sys = BaseSystem::rotation(kGolden);
  std::int64_t fib[] = {5, 13, 34, 89};
  for (auto n : fib) {
    Tower t = build_rotation_tower(sys, n, 100000);
    CHECK(t.certified);
    CHECK(t.n == n);
    CHECK(t.N <= 3 * t.n - 1);
    CHECK(t.d == 1);
    auto o = naive_check(kGolden, t, 20000);
    CHECK(o.good);
    CHECK(o.spanning);
    auto rep = certify(sys, t, 100000);
    CHECK(rep.pass());
    CHECK(rep.max_boundary_hits == 1);
  }
}

TEST_CASE("n=5 tower geometry") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t = build_rotation_tower(sys, 5);
  double d5 = std::fabs(5 * kGolden - 3);
  CHECK(t.lo == 0.0);
  CHECK(t.len >= d5);
  CHECK(t.len <= d5 * 1.01);
  CHECK(t.N == 13);
}

TEST_CASE("trivial tower") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t = build_rotation_tower(sys, 1);
  CHECK(t.whole());
  CHECK(t.n == 1);
  CHECK(t.N == 1);
  CHECK(t.certified);
}

TEST_CASE("the unwidened convergent interval is only 2-mild") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t;
  t.lo = 0;
  t.len = std::fabs(5 * kGolden - 3);
  t.n = 5;
  t.N = 13;
  t.d = 1;
  auto rep = certify(sys, t, 100000);
  CHECK(rep.good);
  CHECK(rep.spanning);
  CHECK_FALSE(rep.mild);
  CHECK(rep.max_boundary_hits == 2);
}

TEST_CASE("a fat interval fails goodness with a witness") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t;
  t.lo = 0;
  t.len = 0.5;
  t.n = 2;
  t.N = 3;
  auto rep = certify(sys, t, 100000);
  CHECK_FALSE(rep.good);
  REQUIRE_FALSE(rep.witnesses.empty());
  double x = rep.witnesses.front();
  CHECK(t.offset(x) <= t.len);
  CHECK(t.offset(wrap01(x + kGolden)) <= t.len);
}

TEST_CASE("whole space spans with N=1") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t;
  t.len = 1.0;
  t.n = 1;
  t.N = 1;
  auto rep = certify(sys, t, 1000);
  CHECK(rep.spanning);
  CHECK(rep.pass());
}

TEST_CASE("N > 3n-1 raises") {
  // alpha = [0; 1, 1, 7, ...]: q = 1, 1, 2, 15 so the n=2 tower needs N = 17.
  auto sys = BaseSystem::rotation_cf({0, 1, 1, 7, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  CHECK_THROWS_AS(build_rotation_tower(sys, 2), CertificationError);
}

TEST_CASE("lifting through the first coordinate") {
  auto rot = BaseSystem::rotation(kGolden);
  Tower t = build_rotation_tower(rot, 5);
  auto ss = BaseSystem::skew_shift(kGolden);
  Tower l = lift_tower_through_factor(t, ss);
  CHECK(l.n == 5);
  CHECK(l.N == t.N);
  CHECK(l.lifted_dim == 2);
  CHECK(l.contains(Point(0.0, 0.7)));
  auto az = BaseSystem::anzai(kGolden, anzai_delta(3), "delta3");
  Tower t89 = build_rotation_tower(rot, 89);
  Tower l89 = lift_tower_through_factor(t89, az);
  CHECK(l89.n == 89);
  CHECK(l89.len == t89.len);
  Tower same = lift_tower_through_factor(t, rot);
  CHECK(same.len == t.len);
  CHECK(same.lifted_dim == 1);
  CHECK_THROWS(lift_tower_through_factor(t, BaseSystem::skew_shift(std::sqrt(2.0) - 1)));
}

TEST_CASE("entry times are bounded by N") {
  auto sys = BaseSystem::rotation(kGolden);
  Tower t = build_rotation_tower(sys, 13);
  for (int g = 0; g < 1000; ++g) {
    auto e = entry_time(sys, t, Point((g + 0.5) / 1000.0), t.N);
    CHECK(e >= 0);
    CHECK(e < t.N);
  }
}
