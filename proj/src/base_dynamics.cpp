#include "cocyclelab/base_dynamics.hpp"

#include <cmath>
#include <sstream>

namespace cocyclelab {

double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

double circle_dist(double a, double b) {
  double d = std::fabs(wrap01(a) - wrap01(b));
  return std::fmin(d, 1.0 - d);
}

double torus_dist(const Point& a, const Point& b) {
  double m = 0;
  for (int i = 0; i < a.dim; ++i) m = std::fmax(m, circle_dist(a[i], b[i]));
  return m;
}

CircleFn anzai_delta(int k) {
  if (k <= 0) throw std::invalid_argument("anzai_delta: k must be >= 1");
  return [k](double x) {
    double y = static_cast<double>(k) * x;
    return 2.0 * std::fabs(y - std::nearbyint(y));
  };
}

ContinuedFraction ContinuedFraction::of_double(double x, int max_terms) {
  // x = num/den exactly, den a power of two.
  int e = 0;
  double m = std::frexp(x, &e);
  using u128 = unsigned __int128;
  u128 num = static_cast<u128>(std::ldexp(m, 53));
  int shift = 53 - e;
  if (shift > 120 || shift < 0) throw std::invalid_argument("continued fraction: alpha out of range");
  u128 den = static_cast<u128>(1) << shift;
  ContinuedFraction cf;
  while (den != 0 && static_cast<int>(cf.terms.size()) < max_terms) {
    u128 a = num / den;
    cf.terms.push_back(static_cast<std::int64_t>(a));
    u128 r = num - a * den;
    num = den;
    den = r;
  }
  return from_terms(cf.terms);
}

ContinuedFraction ContinuedFraction::from_terms(const std::vector<std::int64_t>& terms) {
  ContinuedFraction cf;
  cf.terms = terms;
  std::int64_t pm2 = 0, pm1 = 1, qm2 = 1, qm1 = 0;
  for (auto a : terms) {
    std::int64_t pk = a * pm1 + pm2, qk = a * qm1 + qm2;
    if (qk > (std::int64_t{1} << 52)) break;
    cf.p.push_back(pk);
    cf.q.push_back(qk);
    pm2 = pm1;
    pm1 = pk;
    qm2 = qm1;
    qm1 = qk;
  }
  cf.terms.resize(cf.p.size());
  return cf;
}

double ContinuedFraction::value() const {
  if (terms.empty()) return 0.0;
  long double v = 0.0L;
  for (size_t i = terms.size(); i-- > 1;) v = 1.0L / (static_cast<long double>(terms[i]) + v);
  return static_cast<double>(static_cast<long double>(terms[0]) + v);
}

int ContinuedFraction::first_index_with_q_at_least(std::int64_t n) const {
  for (size_t k = 0; k < q.size(); ++k)
    if (q[k] >= n) return static_cast<int>(k);
  return -1;
}

std::string to_string(BaseKind k) {
  switch (k) {
    case BaseKind::Rotation: return "rotation";
    case BaseKind::Torus: return "torus";
    case BaseKind::SkewShift: return "skewshift";
    case BaseKind::Anzai: return "anzai";
  }
  return "?";
}

namespace {

void reject_rational(double alpha, const BaseOptions& opts) {
  if (opts.periodic_mode) return;
  double a = wrap01(alpha);
  if (a == 0.0) throw std::invalid_argument("alpha is rational (0); enable periodic mode");
  auto cf = ContinuedFraction::of_double(a);
  for (size_t k = 0; k < cf.q.size(); ++k) {
    if (cf.q[k] > opts.rational_denominator_bound) break;
    double err = std::fabs(static_cast<double>(cf.q[k]) * a - static_cast<double>(cf.p[k]));
    if (err <= static_cast<double>(cf.q[k]) * opts.rational_tolerance) {
      std::ostringstream os;
      os << "alpha=" << alpha << " is within tolerance of " << cf.p[k] << "/" << cf.q[k]
         << "; enable periodic mode for rational rotations";
      throw std::invalid_argument(os.str());
    }
  }
}

}  // namespace

BaseSystem BaseSystem::rotation(double alpha, BaseOptions opts) {
  reject_rational(alpha, opts);
  BaseSystem s;
  s.kind_ = BaseKind::Rotation;
  s.dim_ = 1;
  s.alphas_ = {wrap01(alpha)};
  s.cf_ = ContinuedFraction::of_double(s.alphas_[0]);
  s.periodic_ = opts.periodic_mode;
  return s;
}

BaseSystem BaseSystem::rotation_cf(const std::vector<std::int64_t>& terms, BaseOptions opts) {
  return rotation(ContinuedFraction::from_terms(terms).value(), opts);
}

BaseSystem BaseSystem::periodic(std::int64_t p, std::int64_t q) {
  if (q <= 0) throw std::invalid_argument("periodic: q must be positive");
  BaseOptions o;
  o.periodic_mode = true;
  BaseSystem s = rotation(static_cast<double>(p) / static_cast<double>(q), o);
  s.p_ = ((p % q) + q) % q;
  s.q_ = q;
  return s;
}

BaseSystem BaseSystem::torus(const std::vector<double>& alphas, BaseOptions opts) {
  if (alphas.empty() || alphas.size() > 3) throw std::invalid_argument("torus: dimension must be 1..3");
  BaseSystem s;
  s.kind_ = BaseKind::Torus;
  s.dim_ = static_cast<int>(alphas.size());
  for (double a : alphas) {
    reject_rational(a, opts);
    s.alphas_.push_back(wrap01(a));
  }
  s.cf_ = ContinuedFraction::of_double(s.alphas_[0]);
  s.periodic_ = opts.periodic_mode;
  return s;
}

BaseSystem BaseSystem::skew_shift(double alpha, BaseOptions opts) {
  BaseSystem s = rotation(alpha, opts);
  s.kind_ = BaseKind::SkewShift;
  s.dim_ = 2;
  return s;
}

BaseSystem BaseSystem::anzai(double alpha, CircleFn phi, std::string phi_name, BaseOptions opts) {
  BaseSystem s = rotation(alpha, opts);
  s.kind_ = BaseKind::Anzai;
  s.dim_ = 2;
  s.phi_ = std::move(phi);
  s.phi_name_ = std::move(phi_name);
  return s;
}

void BaseSystem::check_dim(const Point& x) const {
  if (x.dim != dim_) {
    std::ostringstream os;
    os << "dimension mismatch: point has " << x.dim << " coordinates, system " << describe() << " needs " << dim_;
    throw std::invalid_argument(os.str());
  }
}

Point BaseSystem::make_point(const std::vector<double>& coords) const {
  if (static_cast<int>(coords.size()) != dim_) throw std::invalid_argument("make_point: wrong number of coordinates");
  Point p;
  p.dim = dim_;
  for (int i = 0; i < dim_; ++i) p[i] = wrap01(coords[static_cast<size_t>(i)]);
  return p;
}

Point BaseSystem::step(const Point& x) const {
  check_dim(x);
  Point y = x;
  switch (kind_) {
    case BaseKind::Rotation:
      y[0] = wrap01(x[0] + alphas_[0]);
      break;
    case BaseKind::Torus:
      for (int i = 0; i < dim_; ++i) y[i] = wrap01(x[i] + alphas_[static_cast<size_t>(i)]);
      break;
    case BaseKind::SkewShift:
      y[0] = wrap01(x[0] + alphas_[0]);
      y[1] = wrap01(x[1] + x[0]);
      break;
    case BaseKind::Anzai:
      y[0] = wrap01(x[0] + alphas_[0]);
      y[1] = wrap01(x[1] + phi_(x[0]));
      break;
  }
  return y;
}

Point BaseSystem::step_inverse(const Point& x) const {
  check_dim(x);
  Point y = x;
  switch (kind_) {
    case BaseKind::Rotation:
      y[0] = wrap01(x[0] - alphas_[0]);
      break;
    case BaseKind::Torus:
      for (int i = 0; i < dim_; ++i) y[i] = wrap01(x[i] - alphas_[static_cast<size_t>(i)]);
      break;
    case BaseKind::SkewShift:
      y[0] = wrap01(x[0] - alphas_[0]);
      y[1] = wrap01(x[1] - y[0]);
      break;
    case BaseKind::Anzai:
      y[0] = wrap01(x[0] - alphas_[0]);
      y[1] = wrap01(x[1] - phi_(y[0]));
      break;
  }
  return y;
}

double BaseSystem::rotate(double x, std::int64_t n) const {
  if (periodic_ && q_ > 0) {
    std::int64_t k = ((n % q_) * p_) % q_;
    if (k < 0) k += q_;
    return wrap01(x + static_cast<double>(k) / static_cast<double>(q_));
  }
  double nd = static_cast<double>(n);
  double prod = nd * alphas_[0];
  double err = std::fma(nd, alphas_[0], -prod);
  double fr = (prod - std::floor(prod)) + err;
  return wrap01(x + fr);
}

Point BaseSystem::iterate(const Point& x, std::int64_t n) const {
  check_dim(x);
  if (kind_ == BaseKind::Rotation) return Point(rotate(x[0], n));
  Point y = x;
  if (n >= 0)
    for (std::int64_t i = 0; i < n; ++i) y = step(y);
  else
    for (std::int64_t i = 0; i < -n; ++i) y = step_inverse(y);
  return y;
}

std::string BaseSystem::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind_) << "(alpha=";
  for (size_t i = 0; i < alphas_.size(); ++i) os << (i ? "," : "") << alphas_[i];
  if (periodic_ && q_ > 0) os << " = " << p_ << "/" << q_;
  if (kind_ == BaseKind::Anzai) os << ", phi=" << phi_name_;
  os << ")";
  return os.str();
}

double parse_alpha(const std::string& s) {
  if (s == "golden") return kGolden;
  if (s == "sqrt2" || s == "silver") return std::sqrt(2.0) - 1.0;
  if (s == "sqrt3") return std::sqrt(3.0) - 1.0;
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    double p = std::stod(s.substr(0, slash)), q = std::stod(s.substr(slash + 1));
    return p / q;
  }
  size_t used = 0;
  double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("cannot parse alpha '" + s + "'");
  return v;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

BaseSystem parse_system(const std::string& spec) {
  auto parts = split(spec, ':');
  const std::string& kind = parts[0];
  if (parts.size() < 2) throw std::invalid_argument("system spec needs kind:alpha, got '" + spec + "'");
  if (kind == "rotation") {
    if (parts[1] == "cf") {
      if (parts.size() < 3) throw std::invalid_argument("rotation:cf needs terms");
      std::vector<std::int64_t> terms;
      for (auto& t : split(parts[2], ',')) terms.push_back(std::stoll(t));
      return BaseSystem::rotation_cf(terms);
    }
    auto slash = parts[1].find('/');
    if (slash != std::string::npos)
      return BaseSystem::periodic(std::stoll(parts[1].substr(0, slash)), std::stoll(parts[1].substr(slash + 1)));
    return BaseSystem::rotation(parse_alpha(parts[1]));
  }
  if (kind == "torus") {
    std::vector<double> a;
    for (auto& t : split(parts[1], ',')) a.push_back(parse_alpha(t));
    return BaseSystem::torus(a);
  }
  if (kind == "skewshift") return BaseSystem::skew_shift(parse_alpha(parts[1]));
  if (kind == "anzai") {
    std::string phi = parts.size() > 2 ? parts[2] : "delta1";
    if (phi.rfind("delta", 0) != 0) throw std::invalid_argument("anzai phi must be deltaK, got '" + phi + "'");
    int k = std::stoi(phi.substr(5));
    return BaseSystem::anzai(parse_alpha(parts[1]), anzai_delta(k), phi);
  }
  throw std::invalid_argument("unknown system kind '" + kind + "'");
}

OrbitBuffer make_orbit(const BaseSystem& sys, const Point& x0, std::size_t length) {
  OrbitBuffer ob;
  ob.start = x0;
  ob.points.reserve(length);
  Point x = x0;
  for (std::size_t i = 0; i < length; ++i) {
    ob.points.push_back(x);
    x = sys.step(x);
  }
  return ob;
}

double birkhoff_average(const BaseSystem& sys, const std::function<double(const Point&)>& g, const Point& x0,
                        std::int64_t n) {
  if (n < 1) throw std::invalid_argument("birkhoff_average: n must be >= 1");
  double s = 0, comp = 0;
  Point x = x0;
  for (std::int64_t j = 0; j < n; ++j) {
    // Kahan summation
    double yv = g(x) - comp;
    double t = s + yv;
    comp = (t - s) - yv;
    s = t;
    x = sys.step(x);
  }
  return s / static_cast<double>(n);
}

}  // namespace cocyclelab
