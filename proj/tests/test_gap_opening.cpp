#include "cocyclelab/gap_opening.hpp"

#include <cmath>

#include "doctest.h"

using namespace cocyclelab;

namespace {

const BaseSystem golden = BaseSystem::rotation(kGolden);
const Mat2 S0 = Mat2::schrodinger(0.0);

Mat2 four_step(const MatFn& A, const BaseSystem& base, const Point& x) {
  Point y = x;
  Mat2 m = Mat2::identity();
  for (int i = 0; i < 4; ++i) {
    m = A(y) * m;
    y = base.step(y);
  }
  return m;
}

}  // namespace

TEST_CASE("unperturbed cocycle is returned unchanged") {
  auto p = LocalizedPerturbation::tent(golden, 0.1, 0.02, 0.01, 0.0);
  auto r = project_to_schrodinger(p);
  REQUIRE_FALSE(r.refused);
  CHECK(r.E == 0.0);
  CHECK(r.off_tower_exact);
  for (int k = 0; k < 2000; ++k) {
    Point x(k / 2000.0);
    CHECK(r.phi_image(x) == S0);
    CHECK(r.psi(x) == Mat2::identity());
  }
}

TEST_CASE("projection of a tent perturbation") {
  for (double s : {1e-4, 1e-6, 1e-8}) {
    auto p = LocalizedPerturbation::tent(golden, 0.1, 0.02, 0.01, s);
    auto r = project_to_schrodinger(p);
    REQUIRE_FALSE(r.refused);
    CHECK(r.s_form_residual <= 1e-10);
    CHECK(r.conjugation_residual <= 1e-10);
    CHECK(r.off_tower_exact);
    // A_hat^4 = exp(s w G) on K with G nilpotent, so |A_hat^4 - id| = s w = |A_hat - S_0|
    CHECK(r.E == doctest::Approx(std::sqrt(r.perturbation_size)).epsilon(1e-9));
    // the middle floor carries E exactly and the others are O(E)
    CHECK(r.image_distance == doctest::Approx(r.E).epsilon(1e-3));

    // independent check of the factorization and of the boundary values on K'
    for (int k = 0; k <= 64; ++k) {
      Point x(wrap01(p.kp_lo + p.kp_len * k / 64.0));
      Mat2 prod = Mat2::identity();
      for (int i = 0; i < 4; ++i) prod = Mat2::schrodinger(r.E_i[static_cast<size_t>(i)](x)) * prod;
      CHECK((prod - four_step(p.A_hat, golden, x)).max_abs() <= 1e-14);
      CHECK(r.E_i[2](x) == doctest::Approx(r.E * p.bump(x)));
    }
    for (double end : {p.kp_lo, p.kp_lo + p.kp_len})
      for (int i = 0; i < 4; ++i) CHECK(std::fabs(r.E_i[static_cast<size_t>(i)](Point(wrap01(end)))) <= 1e-15);
  }
}

TEST_CASE("image distance shrinks with the perturbation") {
  double prev = 1.0;
  for (double s : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    auto r = project_to_schrodinger(LocalizedPerturbation::tent(golden, 0.3, 0.05, 0.02, s));
    REQUIRE_FALSE(r.refused);
    CHECK(r.image_distance < prev);
    prev = r.image_distance;
  }
  CHECK(prev <= 2e-5);
}

TEST_CASE("other generators and constant profiles") {
  auto r = project_to_schrodinger(
      LocalizedPerturbation::constant_on_K(golden, 0.6, 0.03, 0.01, 1e-4, Mat2{1.0, 0.3, -0.7, -1.0}));
  REQUIRE_FALSE(r.refused);
  CHECK(r.s_form_residual <= 1e-10);
  CHECK(r.conjugation_residual <= 1e-10);
  CHECK(r.image_distance > 1e-3);
  CHECK(r.image_distance < 5e-2);
}

TEST_CASE("projection over a skew-shift base") {
  auto base = BaseSystem::skew_shift(kGolden);
  auto p = LocalizedPerturbation::tent(base, 0.2, 0.02, 0.01, 1e-5, Mat2{0.0, 0.0, 1.0, 0.0});
  auto r = project_to_schrodinger(p);
  REQUIRE_FALSE(r.refused);
  CHECK(r.conjugation_residual <= 1e-10);
  CHECK(r.s_form_residual <= 1e-10);
}

TEST_CASE("projection refusals") {
  auto big = project_to_schrodinger(LocalizedPerturbation::tent(golden, 0.1, 0.02, 0.01, 1.0));
  CHECK(big.refused);
  CHECK(big.perturbation_size > 0.25);
  CHECK(big.reason.find("perturbation size") != std::string::npos);

  auto slow = project_to_schrodinger(
      LocalizedPerturbation::tent(BaseSystem::rotation(std::sqrt(2.0) / 100), 0.1, 0.02, 0.01, 1e-4));
  CHECK(slow.refused);
  CHECK(slow.reason.find("meets K'") != std::string::npos);

  CHECK_THROWS(LocalizedPerturbation::tent(golden, 0.1, 0.02, 0.01, 1e-4, Mat2{1.0, 0.0, 0.0, 1.0}));
}

TEST_CASE("periodic ramp opens the gap at 1/2") {
  auto base = BaseSystem::periodic(1, 2);
  OpenGapOptions o;
  o.method = ProfileMethod::Floquet;
  o.E_lo = -3;
  o.E_hi = 3;
  o.E_steps = 1201;
  std::vector<double> ts = {0.0, 0.1, 0.25, 0.5};
  auto rep = open_gap_demo(
      base, [](double t) { return periodic_sampler({t, -t}, 1, 2); }, 0.5, ts, o);
  REQUIRE(rep.rows.size() == 4);
  CHECK_FALSE(rep.rows[0].open);
  const double h = 6.0 / 1200;
  for (size_t k = 1; k < 4; ++k) {
    const auto& row = rep.rows[k];
    REQUIRE(row.open);
    // bands of (t, -t) are +-[t, sqrt(t^2 + 4)]
    auto bands = periodic_spectrum_exact({ts[k], -ts[k]});
    REQUIRE(bands.gaps.size() == 1);
    CHECK(bands.gaps[0].second - bands.gaps[0].first == doctest::Approx(2 * ts[k]).epsilon(1e-9));
    CHECK(std::fabs(row.width - 2 * ts[k]) <= 2 * h);
    CHECK(row.label_residual <= 1e-9);
    CHECK(row.rho == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(row.resolution_ok);
  }
  auto a = rho_constancy_audit(rep);
  CHECK(a.expected == 0.25);
  CHECK(a.constant);
  CHECK_FALSE(a.complete);
  REQUIRE(a.missing_t.size() == 1);
  CHECK(a.missing_t[0] == 0.0);
}

TEST_CASE("almost Mathieu ramp opens the golden gap") {
  OpenGapOptions o;
  o.E_lo = 0.0;
  o.E_hi = 1.5;
  o.E_steps = 301;
  o.n = 10000;
  o.rho_n = 50000;
  auto rep = open_gap_demo(
      golden, [](double t) { return amo_potential(t); }, kGolden, {0.0, 0.3}, o);
  CHECK_FALSE(rep.rows[0].open);
  REQUIRE(rep.rows[1].open);
  CHECK(rep.rows[1].width > 10 * rep.rows[1].profile_error);
  CHECK(rep.rows[1].gap.label == doctest::Approx(kGolden));
  CHECK(std::fabs(rep.rows[1].rho - (1 - kGolden) / 2) <= 5e-3);
  CHECK(rep.rows[1].resolution_ok);
}

TEST_CASE("zero path never opens a gap") {
  OpenGapOptions o;
  o.E_steps = 301;
  o.n = 5000;
  auto rep = open_gap_demo(
      golden, [](double) { return zero_potential(); }, kGolden, {0.0, 0.5, 1.0}, o);
  for (const auto& row : rep.rows) CHECK_FALSE(row.open);
  auto a = rho_constancy_audit(rep);
  CHECK(a.rho.empty());
  CHECK_FALSE(a.constant);
}

TEST_CASE("single parameter audit") {
  OpenGapReport rep;
  rep.target = 0.5;
  OpenGapRow row;
  row.t = 1.0;
  row.open = true;
  row.rho = 0.25;
  rep.rows.push_back(row);
  auto a = rho_constancy_audit(rep);
  CHECK(a.constant);
  CHECK(a.complete);
  CHECK(a.spread == 0.0);
}

TEST_CASE("failures in the path are reported per parameter") {
  OpenGapOptions o;
  o.method = ProfileMethod::Floquet;
  o.E_steps = 101;
  auto rep = open_gap_demo(
      golden, [](double) { return amo_potential(0.5); }, kGolden, {0.0}, o);
  REQUIRE(rep.rows.size() == 1);
  CHECK_FALSE(rep.rows[0].open);
  CHECK(rep.rows[0].note.find("failed") == 0);
}
