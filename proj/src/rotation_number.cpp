#include "cocyclelab/rotation_number.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cocyclelab/parallel.hpp"

namespace cocyclelab {

namespace {

constexpr int kCutSamples = 4096;
constexpr int kUnwrapStart = 4096;
constexpr int kUnwrapMax = 1 << 20;

double branch(double raw, double cut) {
  double v = raw;
  while (v <= cut) v += kTwoPi;
  while (v > cut + kTwoPi) v -= kTwoPi;
  return v;
}

}  // namespace

Lift::Lift(const Cocycle& c, double theta) : c_(c), theta_(theta) {
  if (c.is_schrodinger()) {
    // atan2(2, E - v) is continuous in (0, pi), giving F(x, 1/4) = 1/2
    tag_ = "schrodinger";
    cut_ = -kPi;
    return;
  }
  if (c.constant_value()) {
    tag_ = "constant";
    cut_ = -kPi;
    return;
  }
  const auto& base = c.base();
  auto pts = sample_grid(base, kCutSamples);
  std::vector<double> raw;
  raw.reserve(pts.size());
  for (const auto& p : pts) raw.push_back(c(p).polar_angle());
  std::sort(raw.begin(), raw.end());
  double gap = raw.front() + kTwoPi - raw.back(), mid = raw.back() + 0.5 * gap;
  for (size_t i = 0; i + 1 < raw.size(); ++i) {
    double g = raw[i + 1] - raw[i];
    if (g > gap) {
      gap = g;
      mid = raw[i] + 0.5 * g;
    }
  }
  if (gap >= 0.5 * kPi) {
    tag_ = "cut";
    cut_ = mid;
    return;
  }
  if (base.dim() != 1) throw std::runtime_error("lift: no continuous determination of the polar angle found");
  // unwrap along a mesh of the circle, refining on quarter-turn jumps
  for (int M = kUnwrapStart; M <= kUnwrapMax; M *= 2) {
    std::vector<double> tab(static_cast<size_t>(M) + 1);
    tab[0] = c(Point(0.0)).polar_angle();
    bool ok = true;
    for (int j = 1; j <= M; ++j) {
      double r = c(Point(j == M ? 0.0 : static_cast<double>(j) / M)).polar_angle();
      double prev = tab[static_cast<size_t>(j) - 1];
      double u = r + kTwoPi * std::nearbyint((prev - r) / kTwoPi);
      if (std::fabs(u - prev) > 0.5 * kPi) {
        ok = false;
        break;
      }
      tab[static_cast<size_t>(j)] = u;
    }
    if (!ok) continue;
    if (std::fabs(tab.back() - tab.front()) > kPi) throw std::runtime_error("lift: cocycle is not homotopic to a constant");
    tab.pop_back();
    table_ = std::move(tab);
    tag_ = "unwrapped";
    return;
  }
  throw std::runtime_error("lift: polar angle jumps by more than a quarter turn at every mesh resolution");
}

double Lift::polar(const Point& x) const {
  double raw = c_(x).polar_angle();
  if (table_.empty()) return branch(raw, cut_) + theta_;
  auto M = table_.size();
  auto j = static_cast<size_t>(std::llround(wrap01(x[0]) * static_cast<double>(M))) % M;
  double ref = table_[j];
  return raw + kTwoPi * std::nearbyint((ref - raw) / kTwoPi) + theta_;
}

double Lift::step(const Point& x, double t) const {
  Mat2 A = c_(x);
  double raw = A.polar_angle();
  double pm = table_.empty() ? branch(raw, cut_) : polar(x) - theta_;
  double u0 = std::cos(kTwoPi * t), u1 = std::sin(kTwoPi * t);
  auto Au = A.apply(u0, u1);
  double cp = std::cos(raw), sp = std::sin(raw);
  double p0 = cp * Au[0] + sp * Au[1], p1 = -sp * Au[0] + cp * Au[1];
  double inc = std::atan2(u0 * p1 - u1 * p0, u0 * p0 + u1 * p1);
  return t + (pm + theta_ + inc) / kTwoPi;
}

RotationEstimate rho(const Cocycle& c, const Point& x0, std::int64_t n, double t0) { return rho(Lift(c), x0, n, t0); }

RotationEstimate rho(const Lift& lift, const Point& x0, std::int64_t n, double t0) {
  if (n < 2) throw std::invalid_argument("rho: need n >= 2");
  const auto& c = lift.cocycle();
  const auto& base = c.base();
  // carry the unit vector and accumulate the angle increments
  double u0 = std::cos(kTwoPi * t0), u1 = std::sin(kTwoPi * t0);
  double t = t0, t_half = t0;
  const std::int64_t h = n / 2;
  Point x = x0;
  const double th = lift.theta();
  for (std::int64_t k = 0; k < n; ++k) {
    if (k == h) t_half = t;
    Mat2 A = c(x);
    double raw = A.polar_angle();
    double pm = lift.polar(x) - th;
    auto Au = A.apply(u0, u1);
    double cp = std::cos(raw), sp = std::sin(raw);
    double p0 = cp * Au[0] + sp * Au[1], p1 = -sp * Au[0] + cp * Au[1];
    double inc = std::atan2(u0 * p1 - u1 * p0, u0 * p0 + u1 * p1);
    t += (pm + th + inc) / kTwoPi;
    double ct = std::cos(th), st = std::sin(th);
    double v0 = ct * Au[0] - st * Au[1], v1 = st * Au[0] + ct * Au[1];
    double nn = std::hypot(v0, v1);
    u0 = v0 / nn;
    u1 = v1 / nn;
    x = base.step(x);
  }
  RotationEstimate r;
  r.n = n;
  r.rho = (t - t0) / static_cast<double>(n);
  double r1 = (t_half - t0) / static_cast<double>(h), r2 = (t - t_half) / static_cast<double>(n - h);
  r.error = std::fmax(1.0 / static_cast<double>(n), std::fabs(r1 - r2));
  r.determination = lift.normalization();
  return r;
}

Profile rho_profile(const Cocycle& c, const std::vector<double>& thetas, const Point& x0, std::int64_t n) {
  Profile p;
  p.points.resize(thetas.size());
  parallel_for(thetas.size(), [&](size_t i) {
    auto e = rho(Lift(c, thetas[i]), x0, n);
    p.points[i] = {thetas[i], e.rho, e.error};
  });
  for (size_t i = 0; i + 1 < p.points.size(); ++i) {
    const auto &a = p.points[i], &b = p.points[i + 1];
    if (b.theta >= a.theta && b.rho < a.rho - 3 * std::fmax(a.err, b.err)) {
      p.monotone = false;
      p.violations.push_back(i);
    }
  }
  return p;
}

std::string to_string(Locking l) {
  switch (l) {
    case Locking::Locked: return "Locked";
    case Locking::SemiLocked: return "SemiLocked";
    case Locking::Unlocked: return "Unlocked";
    case Locking::Inconclusive: return "Inconclusive";
  }
  return "?";
}

LockingEvidence classify_locking(const Cocycle& c, const LockingOptions& opts) {
  const double h = opts.h;
  Point x0 = opts.x0;
  for (int k = x0.dim; k < c.base().dim(); ++k) x0[k] = x0[0];
  x0.dim = c.base().dim();
  std::vector<double> coarse = {-h, 0.0, h}, fine = {-h / 4, 0.0, h / 4};
  auto pc = rho_profile(c, coarse, x0, opts.n);
  auto pf = rho_profile(c, fine, x0, 2 * opts.n);
  LockingEvidence ev;
  ev.rho0 = pc.points[1].rho;
  ev.err0 = pc.points[1].err;
  ev.err_coarse = std::fmax(ev.err0, std::fmax(pc.points[0].err, pc.points[2].err));
  ev.err_fine = std::fmax(pf.points[1].err, std::fmax(pf.points[0].err, pf.points[2].err));
  ev.d_left = ev.rho0 - pc.points[0].rho;
  ev.d_right = pc.points[2].rho - ev.rho0;
  ev.d_left_fine = pf.points[1].rho - pf.points[0].rho;
  ev.d_right_fine = pf.points[2].rho - pf.points[1].rho;
  auto side = [&](double dc, double df) -> std::string {
    if (std::fabs(dc) <= 2 * ev.err_coarse && std::fabs(df) <= 2 * ev.err_fine) return "flat";
    if (dc > 3 * ev.err_coarse && df > 3 * ev.err_fine) return "increasing";
    return "unclear";
  };
  ev.left = side(ev.d_left, ev.d_left_fine);
  ev.right = side(ev.d_right, ev.d_right_fine);
  if (ev.left == "flat" && ev.right == "flat")
    ev.verdict = Locking::Locked;
  else if ((ev.left == "flat" && ev.right == "increasing") || (ev.left == "increasing" && ev.right == "flat"))
    ev.verdict = Locking::SemiLocked;
  else if (ev.left == "increasing" && ev.right == "increasing")
    ev.verdict = Locking::Unlocked;
  else
    ev.verdict = Locking::Inconclusive;
  ev.uh = uh_test(c, opts.uh).outcome;
  ev.agrees_with_uh = ev.verdict != Locking::Inconclusive && ev.uh != UHOutcome::Inconclusive &&
                      ((ev.verdict == Locking::Locked) == (ev.uh == UHOutcome::UH));
  return ev;
}

double group_residual(double value, const BaseSystem& base, int kmax) {
  auto dist_z = [](double v) { return std::fabs(v - std::nearbyint(v)); };
  if (base.periodic_mode() && base.period_q() > 0) {
    double q = static_cast<double>(base.period_q());
    return dist_z(value * q) / q;
  }
  const auto& al = base.alphas();
  double best = dist_z(value);
  std::vector<int> k(al.size(), -kmax);
  while (true) {
    double s = value;
    for (size_t i = 0; i < al.size(); ++i) s -= k[i] * al[i];
    best = std::fmin(best, dist_z(s));
    size_t i = 0;
    while (i < k.size() && k[i] == kmax) k[i++] = -kmax;
    if (i == k.size()) break;
    ++k[i];
  }
  return best;
}

std::vector<CuratedCocycle> curated_locking_set() {
  auto rot = BaseSystem::rotation(kGolden);
  const double parabolic = std::acos(0.8);  // trace of R_phi diag(2,1/2) equals 2
  auto pair = anzai_winding_pair();
  auto ss = BaseSystem::skew_shift(kGolden);
  return {
      {"diag(2,1/2)", Cocycle::constant(rot, Mat2::diag(2.0), "diag(2,1/2)"), Locking::Locked},
      {"diag(3,1/3)", Cocycle::constant(rot, Mat2::diag(3.0), "diag(3,1/3)"), Locking::Locked},
      {"R(0.3)diag(2,1/2)", Cocycle::constant(rot, Mat2::rotation(0.3) * Mat2::diag(2.0), "R(0.3)diag(2,1/2)"), Locking::Locked},
      {"R(2pi golden)", Cocycle::constant(rot, Mat2::rotation(kTwoPi * kGolden), "R(2pi golden)"), Locking::Unlocked},
      {"R(1)", Cocycle::constant(rot, Mat2::rotation(1.0), "R(1)"), Locking::Unlocked},
      {"amo(0.5) E=0", Cocycle::schrodinger(rot, 0.0, amo_potential(0.5)), Locking::Unlocked},
      {"amo(0.5) E=5", Cocycle::schrodinger(rot, 5.0, amo_potential(0.5)), Locking::Locked},
      {"free E=0", Cocycle::schrodinger(rot, 0.0, zero_potential()), Locking::Unlocked},
      {"free E=3", Cocycle::schrodinger(rot, 3.0, zero_potential()), Locking::Locked},
      {"anzai A0", pair.a0, Locking::Locked},
      {"anzai A1", pair.a1, Locking::Locked},
      {"skew-shift cos E=4",
       Cocycle::schrodinger(ss, 4.0, Potential{[](const Point& x) { return std::cos(kTwoPi * x[1]); }, "cos(2pi y)", {}}),
       Locking::Locked},
      {"parabolic R(acos 0.8)diag(2,1/2)", Cocycle::constant(rot, Mat2::rotation(parabolic) * Mat2::diag(2.0), "parabolic"),
       Locking::SemiLocked},
  };
}

}  // namespace cocyclelab
