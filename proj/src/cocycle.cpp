#include "cocyclelab/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cocyclelab {

namespace {

constexpr double kScaleCap = 1e150;
// det = ad - bc is only trustworthy while the entries are moderate.
constexpr double kRenormCap = 1e4;

double proj_angle(double x, double y) {
  double a = std::atan2(y, x);
  a = std::fmod(a, kPi);
  if (a < 0) a += kPi;
  if (a >= kPi) a -= kPi;
  return a;
}

// Angle of the top left singular vector.
double top_left_singular_angle(const Mat2& m) {
  double p = m.a * m.a + m.b * m.b, s = m.c * m.c + m.d * m.d, r = m.a * m.c + m.b * m.d;
  double t = 0.5 * std::atan2(2 * r, p - s);
  return proj_angle(std::cos(t), std::sin(t));
}

// Angle of the bottom right singular vector.
double bottom_right_singular_angle(const Mat2& m) {
  double p = m.a * m.a + m.c * m.c, s = m.b * m.b + m.d * m.d, r = m.a * m.b + m.c * m.d;
  double t = 0.5 * std::atan2(2 * r, p - s) + 0.5 * kPi;
  return proj_angle(std::cos(t), std::sin(t));
}

void rescale(ScaledMat2& s) {
  double mx = s.m.max_abs();
  if (mx > kScaleCap || (s.log_scale != 0.0 && mx < 1.0 / kScaleCap)) {
    s.m = s.m.scaled(1.0 / mx);
    s.log_scale += std::log(mx);
  }
}

std::int64_t mod_inverse(std::int64_t a, std::int64_t m) {
  std::int64_t g = m, x = 0, x1 = 1, aa = ((a % m) + m) % m;
  while (aa != 0) {
    std::int64_t q = g / aa;
    std::int64_t t = g - q * aa;
    g = aa;
    aa = t;
    t = x - q * x1;
    x = x1;
    x1 = t;
  }
  if (g != 1) throw std::invalid_argument("periodic sampler: p and q must be coprime");
  return ((x % m) + m) % m;
}

double sin_between(double t1, double t2) { return std::fabs(std::sin(t1 - t2)); }

}  // namespace

Potential zero_potential() { return {[](const Point&) { return 0.0; }, "zero", {}}; }

Potential constant_potential(double c) {
  std::ostringstream os;
  os.precision(17);
  os << "const:" << c;
  return {[c](const Point&) { return c; }, os.str(), {}};
}

Potential amo_potential(double lambda) {
  std::ostringstream os;
  os.precision(17);
  os << "amo:" << lambda;
  return {[lambda](const Point& x) { return 2.0 * lambda * std::cos(kTwoPi * x[0]); }, os.str(), {}};
}

Potential periodic_sampler(const std::vector<double>& seq, std::int64_t p, std::int64_t q, double x0) {
  if (q <= 0 || static_cast<std::int64_t>(seq.size()) != q)
    throw std::invalid_argument("periodic sampler: sequence length must equal q");
  std::int64_t pinv = q == 1 ? 0 : mod_inverse(p, q);
  std::ostringstream os;
  os.precision(17);
  os << "seq:";
  for (size_t i = 0; i < seq.size(); ++i) os << (i ? "," : "") << seq[i];
  Potential pot;
  pot.name = os.str();
  pot.sequence = seq;
  pot.v = [seq, pinv, q, x0](const Point& x) {
    auto j = static_cast<std::int64_t>(std::llround(wrap01(x[0] - x0) * static_cast<double>(q))) % q;
    std::int64_t k = q == 1 ? 0 : (j * pinv) % q;
    return seq[static_cast<size_t>(k)];
  };
  return pot;
}

Potential parse_potential(const std::string& spec, const BaseSystem& base) {
  if (spec == "zero") return zero_potential();
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown potential '" + spec + "'");
  std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  if (kind == "const") return constant_potential(std::stod(arg));
  if (kind == "amo") return amo_potential(std::stod(arg));
  if (kind == "seq") {
    if (!base.periodic_mode() || base.period_q() <= 0)
      throw std::invalid_argument("seq potentials need a rational rotation p/q");
    std::vector<double> seq;
    std::string cur;
    for (char ch : arg + ",") {
      if (ch == ',') {
        if (!cur.empty()) seq.push_back(std::stod(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    return periodic_sampler(seq, base.period_p(), base.period_q());
  }
  throw std::invalid_argument("unknown potential '" + spec + "'");
}

Cocycle::Cocycle(BaseSystem base, MatFn A, std::string label)
    : base_(std::move(base)), A_(std::move(A)), label_(std::move(label)) {}

Cocycle Cocycle::constant(BaseSystem base, const Mat2& A, std::string label) {
  Cocycle c(std::move(base), [A](const Point&) { return A; }, std::move(label));
  c.constant_ = A;
  return c;
}

Cocycle Cocycle::schrodinger(BaseSystem base, double E, Potential v) {
  const ScalarFn& f = v.v;
  Cocycle c(std::move(base), [E, f](const Point& x) { return Mat2::schrodinger(E - f(x)); },
            "schrodinger(E=" + std::to_string(E) + "," + v.name + ")");
  c.schrodinger_ = true;
  c.E_ = E;
  c.v_ = std::move(v);
  return c;
}

Cocycle Cocycle::with_energy(double E) const {
  if (!schrodinger_) throw std::logic_error("with_energy: not a Schrodinger cocycle");
  return schrodinger(base_, E, v_);
}

Cocycle Cocycle::rotated(double theta) const {
  Mat2 R = Mat2::rotation(theta);
  MatFn f = A_;
  Cocycle out(base_, [R, f](const Point& x) { return R * f(x); }, label_ + "*R(" + std::to_string(theta) + ")");
  if (constant_) out.constant_ = R * *constant_;
  return out;
}

ScaledMat2 iterate(const Cocycle& c, const Point& x, std::int64_t n) {
  ScaledMat2 s{Mat2::identity(), 0.0};
  const auto& base = c.base();
  if (n >= 0) {
    Point y = x;
    for (std::int64_t i = 0; i < n; ++i) {
      s.m = c(y) * s.m;
      if ((i & 63) == 63) {
        if (s.log_scale == 0.0 && s.m.max_abs() < kRenormCap) s.m = s.m.renormalized();
      }
      rescale(s);
      y = base.step(y);
    }
  } else {
    Point y = x;
    for (std::int64_t i = 0; i < -n; ++i) {
      y = base.step_inverse(y);
      s.m = c(y).inverse() * s.m;
      if ((i & 63) == 63) {
        if (s.log_scale == 0.0 && s.m.max_abs() < kRenormCap) s.m = s.m.renormalized();
      }
      rescale(s);
    }
  }
  return s;
}

Estimate lyapunov_exponent(const Cocycle& c, const Point& x0, std::int64_t n, std::int64_t block) {
  if (block < 1 || n < block) throw std::invalid_argument("lyapunov_exponent: need n >= block >= 1");
  Mat2 hat = Mat2::identity();
  Point y = x0;
  double total = 0.0;
  std::vector<double> rates;
  std::int64_t done = 0;
  while (done < n) {
    std::int64_t len = std::min(block, n - done);
    ScaledMat2 P{Mat2::identity(), 0.0};
    for (std::int64_t i = 0; i < len; ++i) {
      P.m = c(y) * P.m;
      rescale(P);
      y = c.base().step(y);
    }
    Mat2 nm = P.m * hat;
    double nrm = nm.norm();
    double inc = std::log(nrm) + P.log_scale;
    total += inc;
    if (len == block) rates.push_back(inc / static_cast<double>(block));
    hat = nm.scaled(1.0 / nrm);
    done += len;
  }
  Estimate e;
  e.n = n;
  e.value = total / static_cast<double>(n);
  if (rates.size() >= 2) {
    double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
    double ss = 0;
    for (double r : rates) ss += (r - mean) * (r - mean);
    double sd = std::sqrt(ss / static_cast<double>(rates.size() - 1));
    e.stderr_ = sd / std::sqrt(static_cast<double>(rates.size()));
  }
  return e;
}

std::string to_string(UHOutcome o) {
  switch (o) {
    case UHOutcome::UH: return "UH";
    case UHOutcome::NotUH: return "NotUH";
    case UHOutcome::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::vector<Point> sample_grid(const BaseSystem& base, int grid) {
  std::vector<Point> pts;
  int dim = base.dim();
  int side = dim == 1 ? grid : static_cast<int>(std::ceil(std::pow(static_cast<double>(grid), 1.0 / dim)));
  side = std::max(side, 1);
  int total = 1;
  for (int k = 0; k < dim; ++k) total *= side;
  pts.reserve(static_cast<size_t>(total));
  for (int idx = 0; idx < total; ++idx) {
    Point p;
    p.dim = dim;
    int r = idx;
    for (int k = 0; k < dim; ++k) {
      p[k] = (static_cast<double>(r % side) + 0.5) / side;
      r /= side;
    }
    pts.push_back(p);
  }
  return pts;
}

double unstable_direction(const Cocycle& c, const Point& x, int m) {
  Point start = c.base().iterate(x, -m);
  return top_left_singular_angle(iterate(c, start, m).m);
}

double stable_direction(const Cocycle& c, const Point& x, int m) {
  return bottom_right_singular_angle(iterate(c, x, m).m);
}

namespace {

double image_angle(const Mat2& A, double theta) {
  auto v = A.apply(std::cos(theta), std::sin(theta));
  return proj_angle(v[0], v[1]);
}

// Eigen-direction of a hyperbolic matrix for the eigenvalue of modulus > 1 (sign = +1) or < 1.
double eigen_angle(const Mat2& M, int sign) {
  double tr = M.trace(), det = M.det();
  double disc = std::sqrt(std::fmax(tr * tr / 4 - det, 0.0));
  double mu = tr / 2 + (tr >= 0 ? sign : -sign) * disc;
  // (M - mu) v = 0
  double v1x = M.b, v1y = mu - M.a;
  double v2x = mu - M.d, v2y = M.c;
  if (std::hypot(v1x, v1y) >= std::hypot(v2x, v2y)) return proj_angle(v1x, v1y);
  return proj_angle(v2x, v2y);
}

UHResult uh_periodic(const Cocycle& c, const UHOptions& opts) {
  const auto& base = c.base();
  const std::int64_t q = base.period_q();
  UHResult res;
  std::vector<Point> orbit;
  Point x(opts.periodic_x0);
  for (std::int64_t k = 0; k < q; ++k) {
    orbit.push_back(x);
    x = Point(base.rotate(opts.periodic_x0, k + 1));
  }
  double min_slope = std::numeric_limits<double>::infinity();
  std::vector<Mat2> mono(static_cast<size_t>(q));
  std::vector<std::vector<double>> g(static_cast<size_t>(q));
  for (std::int64_t k = 0; k < q; ++k) {
    ScaledMat2 M = iterate(c, orbit[static_cast<size_t>(k)], q);
    mono[static_cast<size_t>(k)] = M.m;
    // squaring with the norm pulled out each time
    double nrm = M.m.norm();
    Mat2 S = M.m.scaled(1.0 / nrm);
    double ls = std::log(nrm) + M.log_scale;
    auto& gk = g[static_cast<size_t>(k)];
    gk.push_back(ls);
    for (int j = 1; j <= opts.periodic_squarings; ++j) {
      S = S * S;
      ls *= 2;
      double s2 = S.norm();
      S = S.scaled(1.0 / s2);
      ls += std::log(s2);
      gk.push_back(ls);
    }
    int J = opts.periodic_squarings;
    double slope = (gk[static_cast<size_t>(J)] - gk[static_cast<size_t>(J - 1)]) /
                   (std::ldexp(1.0, J - 1) * static_cast<double>(q));
    if (slope < min_slope) {
      min_slope = slope;
      res.witness = orbit[static_cast<size_t>(k)];
    }
  }
  res.growth = min_slope;
  double loglam = 0.9 * min_slope;
  if (!(loglam > std::log(opts.lambda_min))) {
    res.outcome = UHOutcome::NotUH;
    res.reason = "minimal growth exponent below log(lambda_min)";
    return res;
  }
  double cmin = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k < q; ++k) {
    Point y = orbit[static_cast<size_t>(k)];
    ScaledMat2 P{Mat2::identity(), 0.0};
    for (std::int64_t m = 1; m <= q; ++m) {
      P.m = c(y) * P.m;
      y = Point(base.rotate(y[0], 1));
      cmin = std::fmin(cmin, std::log(P.m.norm()) + P.log_scale - static_cast<double>(m) * loglam);
    }
    const auto& gk = g[static_cast<size_t>(k)];
    for (size_t j = 0; j < gk.size(); ++j)
      cmin = std::fmin(cmin, gk[j] - std::ldexp(1.0, static_cast<int>(j)) * static_cast<double>(q) * loglam);
  }
  auto& cert = res.cert;
  cert.lambda = std::exp(loglam);
  cert.c = 0.5 * std::exp(cmin);
  cert.horizon = static_cast<std::int64_t>(std::ldexp(1.0, opts.periodic_squarings)) * q;
  cert.residual = 0;
  cert.min_angle = 1;
  for (std::int64_t k = 0; k < q; ++k) {
    double eu = eigen_angle(mono[static_cast<size_t>(k)], +1);
    double es = eigen_angle(mono[static_cast<size_t>(k)], -1);
    cert.fields.push_back({orbit[static_cast<size_t>(k)], eu, es});
  }
  for (std::int64_t k = 0; k < q; ++k) {
    const auto& here = cert.fields[static_cast<size_t>(k)];
    const auto& next = cert.fields[static_cast<size_t>((k + 1) % q)];
    Mat2 A = c(here.x);
    cert.residual = std::fmax(cert.residual, sin_between(image_angle(A, here.unstable), next.unstable));
    cert.residual = std::fmax(cert.residual, sin_between(image_angle(A, here.stable), next.stable));
    cert.min_angle = std::fmin(cert.min_angle, sin_between(here.unstable, here.stable));
  }
  if (cert.residual > opts.residual_tol || cert.min_angle < opts.angle_tol) {
    res.outcome = UHOutcome::Inconclusive;
    res.reason = "growth positive but invariant splitting did not close";
    return res;
  }
  res.outcome = UHOutcome::UH;
  return res;
}

}  // namespace

UHResult uh_test(const Cocycle& c, const UHOptions& opts) {
  if (opts.horizon < 16) throw std::invalid_argument("uh_test: horizon must be >= 16");
  const auto& base = c.base();
  if (base.periodic_mode() && base.period_q() > 0) return uh_periodic(c, opts);

  UHResult res;
  auto grid = sample_grid(base, opts.grid);
  const int H = opts.horizon;
  std::vector<double> minG(static_cast<size_t>(H) + 1, std::numeric_limits<double>::infinity());
  minG[0] = 0;
  double worst_end = std::numeric_limits<double>::infinity();
  for (const auto& x : grid) {
    ScaledMat2 P{Mat2::identity(), 0.0};
    Point y = x;
    for (int m = 1; m <= H; ++m) {
      P.m = c(y) * P.m;
      rescale(P);
      y = base.step(y);
      double g = std::log(P.m.norm()) + P.log_scale;
      minG[static_cast<size_t>(m)] = std::fmin(minG[static_cast<size_t>(m)], g);
      if (m == H && g < worst_end) {
        worst_end = g;
        res.witness = x;
      }
    }
  }
  double slope = (minG[static_cast<size_t>(H)] - minG[static_cast<size_t>(H / 2)]) / (H - H / 2);
  res.growth = slope;
  double loglam = 0.9 * slope;
  if (!(loglam > std::log(opts.lambda_min))) {
    res.outcome = UHOutcome::NotUH;
    res.reason = "minimal growth exponent below log(lambda_min)";
    return res;
  }
  double cmin = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= H; ++m) cmin = std::fmin(cmin, minG[static_cast<size_t>(m)] - m * loglam);
  auto& cert = res.cert;
  cert.lambda = std::exp(loglam);
  cert.c = 0.5 * std::exp(cmin);
  cert.horizon = H;
  cert.residual = 0;
  cert.min_angle = 1;
  for (const auto& x : grid) {
    double eu = unstable_direction(c, x, H), es = stable_direction(c, x, H);
    Point fx = base.step(x);
    Mat2 A = c(x);
    double eu1 = unstable_direction(c, fx, H), es1 = stable_direction(c, fx, H);
    cert.residual = std::fmax(cert.residual, sin_between(image_angle(A, eu), eu1));
    cert.residual = std::fmax(cert.residual, sin_between(image_angle(A, es), es1));
    cert.min_angle = std::fmin(cert.min_angle, sin_between(eu, es));
    cert.fields.push_back({x, eu, es});
  }
  if (cert.residual > opts.residual_tol || cert.min_angle < opts.angle_tol) {
    res.outcome = UHOutcome::Inconclusive;
    res.reason = "growth positive but invariant splitting did not close";
    return res;
  }
  res.outcome = UHOutcome::UH;
  return res;
}

Cocycle conjugate(const Cocycle& c, const MatFn& B) {
  MatFn A = c.fn();
  BaseSystem base = c.base();
  return Cocycle(
      base,
      [A, B, base](const Point& x) {
        Mat2 bx = B(x);
        double det = bx.det();
        Mat2 binv = bx.inverse().scaled(1.0 / det);
        return B(base.step(x)) * A(x) * binv;
      },
      c.label() + "^B");
}

InducedCocycle::InducedCocycle(Cocycle c, double lo, double len, std::int64_t cap)
    : c_(std::move(c)), lo_(lo), len_(len), cap_(cap) {
  if (!(len > 0)) throw std::invalid_argument("induced cocycle: Z must have positive measure");
}

bool InducedCocycle::in_Z(const Point& x) const { return len_ >= 1.0 || wrap01(x[0] - lo_) <= len_; }

InducedStep InducedCocycle::step(const Point& x) const {
  const auto& base = c_.base();
  InducedStep s;
  s.A = {c_(x), 0.0};
  Point y = base.step(x);
  s.r = 1;
  while (!in_Z(y)) {
    s.A.m = c_(y) * s.A.m;
    rescale(s.A);
    y = base.step(y);
    if (++s.r > cap_) {
      std::ostringstream os;
      os.precision(17);
      os << "return time exceeds cap " << cap_ << " from x=" << x[0];
      throw std::runtime_error(os.str());
    }
  }
  s.next = y;
  return s;
}

InducedCocycle induced_cocycle(const Cocycle& c, double lo, double len) { return InducedCocycle(c, lo, len); }

Estimate lyapunov_induced(const InducedCocycle& ic, const Point& x0, std::int64_t returns, std::int64_t block) {
  if (block < 1 || returns < block) throw std::invalid_argument("lyapunov_induced: need returns >= block >= 1");
  if (!ic.in_Z(x0)) throw std::invalid_argument("lyapunov_induced: start point must lie in Z");
  Mat2 hat = Mat2::identity();
  Point y = x0;
  double total = 0.0;
  std::vector<double> rates;
  std::int64_t done = 0;
  while (done < returns) {
    std::int64_t len = std::min(block, returns - done);
    ScaledMat2 P{Mat2::identity(), 0.0};
    for (std::int64_t i = 0; i < len; ++i) {
      auto st = ic.step(y);
      P.m = st.A.m * P.m;
      P.log_scale += st.A.log_scale;
      rescale(P);
      y = st.next;
    }
    Mat2 nm = P.m * hat;
    double nrm = nm.norm();
    double inc = std::log(nrm) + P.log_scale;
    total += inc;
    if (len == block) rates.push_back(inc / static_cast<double>(block));
    hat = nm.scaled(1.0 / nrm);
    done += len;
  }
  Estimate e;
  e.n = returns;
  e.value = total / static_cast<double>(returns);
  if (rates.size() >= 2) {
    double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
    double ss = 0;
    for (double r : rates) ss += (r - mean) * (r - mean);
    e.stderr_ = std::sqrt(ss / static_cast<double>(rates.size() - 1)) / std::sqrt(static_cast<double>(rates.size()));
  }
  return e;
}

Cocycle swap_example(const BaseSystem& base, double z_lo, double z_len, double y_lo, double y_len) {
  if (wrap01(y_lo - z_lo) + y_len > z_len + 1e-15) throw std::invalid_argument("swap_example: Y must lie in Z");
  const Mat2 D = Mat2::diag(2.0);
  const Mat2 JD = Mat2{0, -1, 1, 0} * D;
  return Cocycle(
      base,
      [=](const Point& x) {
        double u = wrap01(x[0] - z_lo);
        if (u >= z_len) return Mat2::identity();
        double w = wrap01(x[0] - y_lo);
        if (y_len > 0 && w < y_len) return JD;
        return D;
      },
      "swap");
}

int unstable_winding(const Cocycle& c, const std::function<Point(double)>& loop, const WindingOptions& opts) {
  for (int M = opts.samples; M <= opts.max_samples; M *= 2) {
    std::vector<double> th(static_cast<size_t>(M) + 1);
    for (int i = 0; i <= M; ++i) th[static_cast<size_t>(i)] = unstable_direction(c, loop(static_cast<double>(i) / M), opts.power_steps);
    double total = 0;
    bool jumpy = false;
    for (int i = 0; i < M; ++i) {
      double d = th[static_cast<size_t>(i) + 1] - th[static_cast<size_t>(i)];
      d -= kPi * std::nearbyint(d / kPi);
      if (std::fabs(d) > 0.25 * kPi) {
        jumpy = true;
        break;
      }
      total += d;
    }
    if (jumpy) continue;
    double w = total / kPi;
    if (std::fabs(w - std::nearbyint(w)) > 1e-6) throw std::runtime_error("unstable winding is not integral; loop not closed?");
    return static_cast<int>(std::nearbyint(w));
  }
  throw std::runtime_error("unstable direction field jumps along the loop at every resolution");
}

WindingPair anzai_winding_pair(double alpha, double y0) {
  auto d3 = anzai_delta(3);
  CircleFn phi = [alpha, d3](double x) { return alpha + 0.05 * (d3(x) - 0.5); };
  BaseSystem base = BaseSystem::anzai(alpha, phi, "alpha+0.05(delta3-1/2)");
  const Mat2 D = Mat2::diag(2.0);
  Cocycle a0 = Cocycle::constant(base, D, "A0");
  Cocycle a1(
      base,
      [d3, D](const Point& x) {
        double u = x[0] - x[1];
        double w = -0.05 * (d3(x[0]) - 0.5);  // u(fx) - u(x), as a real number
        return Mat2::rotation(kPi * (u + w)) * D * Mat2::rotation(-kPi * u);
      },
      "A1");
  return {a0, a1, [y0](double s) { return Point(wrap01(s), y0); }};
}

}  // namespace cocyclelab
