#include "cocyclelab/sections.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cocyclelab/parallel.hpp"

namespace cocyclelab {

namespace {

cplx unit(double turns) {
  double a = kTwoPi * wrap01(turns);
  return {std::cos(a), std::sin(a)};
}

std::int64_t mod_inverse(std::int64_t a, std::int64_t m) {
  __int128 t = 0, nt = 1, r = m, nr = ((a % m) + m) % m;
  while (nr != 0) {
    __int128 q = r / nr;
    __int128 tmp = t - q * nt;
    t = nt;
    nt = tmp;
    tmp = r - q * nr;
    r = nr;
    nr = tmp;
  }
  if (r != 1) throw std::logic_error("convergent numerator not invertible");
  if (t < 0) t += m;
  return static_cast<std::int64_t>(t);
}

Tower tower_for(const BaseSystem& base, std::int64_t n) {
  Tower t = build_rotation_tower(base, n);
  if (base.dim() > 1) t = lift_tower_through_factor(t, base);
  return t;
}

// Floor of the tower containing y: m in [0, n) with f^{-m} y in K, and that point.
struct FloorHit {
  std::int64_t m = -1;
  Point x;
};

FloorHit find_floor(const BaseSystem& base, const Tower& K, const Point& y) {
  FloorHit h;
  if (K.whole()) {
    h.m = 0;
    h.x = y;
    return h;
  }
  double a = wrap01(y[0] - K.lo - K.len);
  std::int64_t m = first_rotation_hit(base, 0.0, a, K.len, K.n, false);
  if (m < 0) return h;
  h.m = m;
  h.x = base.iterate(y, -m);
  return h;
}

std::vector<Point> mesh_with_tower(const BaseSystem& base, const Tower& K, int mesh, int local,
                                   const std::vector<double>& knots) {
  std::vector<Point> pts = sample_grid(base, mesh);
  if (K.whole()) return pts;
  std::vector<double> offs;
  for (size_t i = 0; i + 1 < knots.size(); ++i)
    for (int k = 0; k <= local; ++k) offs.push_back(knots[i] + (knots[i + 1] - knots[i]) * k / local);
  for (int k = 1; k <= local; ++k) {
    offs.push_back(-K.len * k / local);
    offs.push_back(K.len * (1.0 + static_cast<double>(k) / local));
  }
  if (base.dim() == 1) {
    for (double o : offs) pts.emplace_back(wrap01(K.lo + o));
  } else {
    const int side = 8;
    for (double o : offs)
      for (int s = 0; s < side; ++s) {
        Point p;
        p.dim = base.dim();
        p[0] = wrap01(K.lo + o);
        for (int k = 1; k < base.dim(); ++k) p[k] = (s + 0.5) / side;
        pts.push_back(p);
      }
  }
  return pts;
}

}  // namespace

// ---------------- trig polynomials and observables ----------------

double TrigPolynomial::operator()(double x) const {
  double s = c0;
  for (const auto& t : terms) {
    double a = kTwoPi * wrap01(t.k * x);
    s += t.a * std::cos(a) + t.b * std::sin(a);
  }
  return s;
}

double TrigPolynomial::centered_sum(const BaseSystem& base, double x, std::int64_t j) const {
  double fj = base.rotate(0.0, j);
  double fa = base.rotate(0.0, 1);
  double s = 0.0;
  for (const auto& t : terms) {
    cplx coef(t.a, -t.b);
    cplx den = unit(t.k * fa) - 1.0;
    cplx ex = unit(t.k * x);
    if (std::abs(den) < 1e-14) {
      s += static_cast<double>(j) * std::real(coef * ex);
    } else {
      s += std::real(coef * ex * (unit(t.k * fj) - 1.0) / den);
    }
  }
  return s;
}

// Triangle inequality over the terms; exact for a single term.
double TrigPolynomial::centered_sup(const BaseSystem& base, std::int64_t j) const {
  double fj = base.rotate(0.0, j), fa = base.rotate(0.0, 1);
  double s = 0.0;
  for (const auto& t : terms) {
    double den = std::abs(unit(t.k * fa) - 1.0);
    double amp = std::hypot(t.a, t.b);
    s += den < 1e-14 ? static_cast<double>(j) * amp : amp * std::abs(unit(t.k * fj) - 1.0) / den;
  }
  return s;
}

double TrigPolynomial::centered_bound(const BaseSystem& base) const {
  double fa = base.rotate(0.0, 1);
  double s = 0.0;
  for (const auto& t : terms) {
    double den = std::abs(unit(t.k * fa) - 1.0);
    if (den < 1e-14) return std::numeric_limits<double>::infinity();
    s += 2.0 * std::hypot(t.a, t.b) / den;
  }
  return s;
}

Observable Observable::of(TrigPolynomial p) {
  Observable o;
  o.f = [p](const Point& x) { return p(x[0]); };
  o.trig = std::move(p);
  return o;
}

Observable Observable::of(ScalarFn f) {
  Observable o;
  o.f = std::move(f);
  return o;
}

double Observable::centered_sum(const BaseSystem& base, const Point& x, std::int64_t j, double c) const {
  if (trig && c == trig->c0) return trig->centered_sum(base, x[0], j);
  double s = 0.0, comp = 0.0;
  Point y = x;
  for (std::int64_t m = 0; m < j; ++m) {
    double v = f(y) - c - comp;
    double t = s + v;
    comp = (t - s) - v;
    s = t;
    y = base.step(y);
  }
  return s;
}

std::int64_t first_rotation_hit(const BaseSystem& base, double x1, double a, double L, std::int64_t J, bool open) {
  if (J <= 0) return -1;
  auto inside = [&](std::int64_t j) {
    double off = wrap01(base.rotate(x1, j) - a);
    return open ? (off > 0.0 && off < L) : (off <= L);
  };
  auto scan = [&](std::int64_t upto) -> std::int64_t {
    for (std::int64_t j = 0; j < upto; ++j)
      if (inside(j)) return j;
    return -1;
  };
  if (base.periodic_mode()) return scan(std::min(J, base.period_q()));
  if (J <= 256) return scan(J);
  const auto& cf = base.cf();
  int m = cf.first_index_with_q_at_least(J);
  if (m < 0) throw std::invalid_argument("not enough convergents for the hit search");
  const std::int64_t q = cf.q[static_cast<size_t>(m)];
  const std::int64_t p = ((cf.p[static_cast<size_t>(m)] % q) + q) % q;
  const double qd = static_cast<double>(q);
  const double u = wrap01(a - x1);
  auto i_from = static_cast<std::int64_t>(std::floor(u * qd)) - 2;
  auto i_to = static_cast<std::int64_t>(std::ceil((u + L) * qd)) + 2;
  if (i_to - i_from > 4 * q || i_to - i_from > 50000000) return scan(J);
  const std::int64_t pinv = mod_inverse(p, q);
  std::int64_t best = -1;
  // frac(j alpha) lies within 1/q of (j p mod q)/q for j < q.
  for (std::int64_t i = i_from; i <= i_to; ++i) {
    std::int64_t im = ((i % q) + q) % q;
    auto j = static_cast<std::int64_t>((static_cast<__int128>(im) * pinv) % q);
    if (j >= J || (best >= 0 && j >= best)) continue;
    if (inside(j)) best = j;
  }
  return best;
}

// ---------------- skew products ----------------

SkewProduct SkewProduct::real_line(BaseSystem base, Observable g, double c) {
  SkewProduct s;
  s.kind_ = Kind::RealLine;
  s.base_ = std::move(base);
  s.g_ = std::move(g);
  s.c_ = c;
  return s;
}

SkewProduct SkewProduct::disk(Cocycle A) {
  SkewProduct s;
  s.kind_ = Kind::Disk;
  s.base_ = A.base();
  s.A_ = std::make_shared<Cocycle>(std::move(A));
  return s;
}

cplx SkewProduct::push(const Point& x, std::int64_t l, cplx y) const {
  if (l == 0) return y;
  if (kind_ == Kind::RealLine) return y.real() + g_.centered_sum(base_, x, l, c_);
  return disk_action(iterate(*A_, x, l).m, DiskPoint(y)).z();
}

cplx SkewProduct::pull(const Point& x, std::int64_t l, cplx y) const {
  if (l == 0) return y;
  if (kind_ == Kind::RealLine) return y.real() - g_.centered_sum(base_, x, l, c_);
  return disk_action(iterate(*A_, x, l).m.inverse(), DiskPoint(y)).z();
}

double SkewProduct::M(cplx y) const {
  if (kind_ == Kind::RealLine) return std::fabs(y.real());
  return hyp_dist(DiskPoint(y), DiskPoint());
}

cplx SkewProduct::interpolate(cplx a, cplx b, double s) const {
  if (kind_ == Kind::RealLine) return a.real() + s * (b.real() - a.real());
  return geodesic_point(DiskPoint(a), DiskPoint(b), s).z();
}

std::pair<double, double> SkewProduct::triple_norms(std::int64_t n, std::int64_t N, const std::vector<Point>& mesh,
                                                    int max_j_samples) const {
  const bool closed = kind_ == Kind::RealLine && g_.trig && c_ == g_.trig->c0;
  if (closed) {
    // per-j sup from the closed form, every j up to N
    (void)mesh;
    (void)max_j_samples;
    double a = 0.0, b = 0.0;
    for (std::int64_t j = 1; j <= N; ++j) {
      double v = g_.trig->centered_sup(base_, j);
      a = std::fmax(a, v);
      if (j >= n) b = std::fmax(b, v);
    }
    return {a, b};
  }
  std::vector<double> all(mesh.size(), 0.0), late(mesh.size(), 0.0);
  parallel_for(mesh.size(), [&](std::size_t i) {
    const Point& x = mesh[i];
    double a = 0.0, b = 0.0;
    if (kind_ == Kind::RealLine) {
      double s = 0.0;
      Point y = x;
      for (std::int64_t j = 1; j <= N; ++j) {
        s += g_(y) - c_;
        y = base_.step(y);
        a = std::fmax(a, std::fabs(s));
        if (j >= n) b = std::fmax(b, std::fabs(s));
      }
    } else {
      Mat2 P = Mat2::identity();
      double ls = 0.0;
      Point y = x;
      for (std::int64_t j = 1; j <= N; ++j) {
        P = (*A_)(y) * P;
        y = base_.step(y);
        double mx = P.max_abs();
        if (mx > 1e8) {
          P = P.scaled(1.0 / mx);
          ls += std::log(mx);
        }
        double v = 2.0 * (std::log(P.norm()) + ls);
        a = std::fmax(a, v);
        if (j >= n) b = std::fmax(b, v);
      }
    }
    all[i] = a;
    late[i] = b;
  });
  return {*std::max_element(all.begin(), all.end()), *std::max_element(late.begin(), late.end())};
}

// ---------------- almost invariant sections ----------------

struct Section::State {
  SkewProduct F;
  Tower K;
  LambdaSet lambda = LambdaSet::Empty;
  FiberFn y0;
  std::int64_t ell_lo = 0, ell_hi = 0;
  double e_lo = 0.0, e_hi = 0.0;
  bool cached = false;
  std::array<double, 4> knot_off{};
  std::array<cplx, 4> knot_val{};

  std::int64_t entry(const Point& x) const {
    std::int64_t l = first_rotation_hit(F.base(), x[0], K.lo, K.len, K.N + 2, true);
    if (l < 0) l = entry_time(F.base(), K, x, 4 * K.N + 4);
    if (l < 0) throw SectionError("orbit never enters int K within 4N steps");
    return l;
  }

  void knots_at(const Point& z, std::array<double, 4>& off, std::array<cplx, 4>& val) const {
    if (cached) {
      off = knot_off;
      val = knot_val;
      return;
    }
    Point pe_lo = z, pe_hi = z;
    pe_lo[0] = wrap01(K.lo + e_lo);
    pe_hi[0] = wrap01(K.lo + e_hi);
    cplx v_elo = y0(pe_lo), v_ehi = y0(pe_hi);
    // b-knots on this vertical: pull back y0 from where their own orbits enter int K
    Point pb_lo = z, pb_hi = z;
    pb_lo[0] = wrap01(K.lo);
    pb_hi[0] = wrap01(K.lo + K.len);
    cplx v_blo = F.pull(pb_lo, ell_lo, y0(F.base().iterate(pb_lo, ell_lo)));
    cplx v_bhi = F.pull(pb_hi, ell_hi, y0(F.base().iterate(pb_hi, ell_hi)));
    off[0] = 0.0;
    val[0] = v_blo;
    off[3] = K.len;
    val[3] = v_bhi;
    if (e_lo <= e_hi) {
      off[1] = e_lo, val[1] = v_elo, off[2] = e_hi, val[2] = v_ehi;
    } else {
      off[1] = e_hi, val[1] = v_ehi, off[2] = e_lo, val[2] = v_elo;
    }
  }

  cplx interior(const Point& z) const {
    std::array<double, 4> off;
    std::array<cplx, 4> val;
    knots_at(z, off, val);
    double u = K.offset(z[0]);
    if (u > K.len) u = (1.0 - u < 0.5) ? 0.0 : K.len;
    for (int i = 0; i < 3; ++i) {
      if (u <= off[static_cast<size_t>(i) + 1] || i == 2) {
        double w = off[static_cast<size_t>(i) + 1] - off[static_cast<size_t>(i)];
        double s = w > 0 ? (u - off[static_cast<size_t>(i)]) / w : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        return F.interpolate(val[static_cast<size_t>(i)], val[static_cast<size_t>(i) + 1], s);
      }
    }
    return val[3];
  }

  cplx value(const Point& x) const {
    if (lambda == LambdaSet::Whole || K.whole()) return y0(x);
    std::int64_t l = entry(x);
    if (l == 0) return interior(x);
    Point z = F.base().iterate(x, l);
    return F.pull(x, l, interior(z));
  }
};

cplx Section::operator()(const Point& x) const { return s_->value(x); }
cplx Section::interior_value(const Point& z) const { return s_->interior(z); }
const Tower& Section::tower() const { return s_->K; }
const SkewProduct& Section::skew() const { return s_->F; }

Section almost_invariant_section(const SkewProduct& F, const Tower& K, LambdaSet lambda, FiberFn y0,
                                 const SectionOptions& opts) {
  auto st = std::make_shared<Section::State>();
  st->F = F;
  st->K = K;
  st->lambda = lambda;
  st->y0 = std::move(y0);
  auto rep = std::make_shared<SectionReport>();
  rep->n = K.n;
  rep->N = K.N;
  rep->d = K.d;
  const BaseSystem& base = F.base();
  if (!K.whole()) {
    if (!(K.len > 0.0)) throw SectionError("empty tower base");
    Point plo, phi_;
    plo.dim = phi_.dim = base.dim();
    plo[0] = wrap01(K.lo);
    phi_[0] = wrap01(K.lo + K.len);
    st->ell_lo = st->entry(plo);
    st->ell_hi = st->entry(phi_);
    st->e_lo = K.offset(base.rotate(plo[0], st->ell_lo));
    st->e_hi = K.offset(base.rotate(phi_[0], st->ell_hi));
    rep->ell_lo = st->ell_lo;
    rep->ell_hi = st->ell_hi;
    std::vector<double> ks = {0.0, std::min(st->e_lo, st->e_hi), std::max(st->e_lo, st->e_hi), K.len};
    rep->knots = ks;
    double gap = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < ks.size(); ++i) gap = std::fmin(gap, ks[i + 1] - ks[i]);
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon();
    if (gap < resolution) {
      std::ostringstream os;
      os << "knots of K are " << gap << " apart; the mesh needs spacing below that, floating point resolves only "
         << resolution;
      throw SectionError(os.str());
    }
    if (base.dim() == 1 && lambda == LambdaSet::Empty) {
      st->knots_at(plo, st->knot_off, st->knot_val);
      st->cached = true;
    }
  }
  Section sec;
  sec.s_ = st;
  sec.report_ = rep;
  if (!opts.check) return sec;

  const auto& ks = rep->knots.empty() ? std::vector<double>{0.0, K.len} : rep->knots;
  rep->mesh = mesh_with_tower(base, K, opts.mesh, opts.local_points, ks);
  const size_t M = rep->mesh.size();
  rep->y.assign(M, {});
  rep->residual.assign(M, 0.0);
  rep->interior.assign(M, 0);
  std::vector<double> m_y(M), m_y0(M), lam(M, 0.0);
  parallel_for(M, [&](std::size_t i) {
    const Point& x = rep->mesh[i];
    cplx y = sec(x);
    cplx yf = sec(base.step(x));
    rep->y[i] = y;
    rep->residual[i] = std::abs(F.push(x, 1, y) - yf);
    rep->interior[i] = K.in_interior(x) ? 1 : 0;
    cplx v0 = st->y0(x);
    m_y[i] = F.M(y);
    m_y0[i] = F.M(v0);
    if (lambda == LambdaSet::Whole) lam[i] = std::abs(y - v0);
  });
  rep->M_sup = *std::max_element(m_y.begin(), m_y.end());
  rep->M_sup_y0 = *std::max_element(m_y0.begin(), m_y0.end());
  rep->max_lambda_gap = *std::max_element(lam.begin(), lam.end());
  rep->lambda_ok = rep->max_lambda_gap == 0.0;
  rep->support_ok = true;
  for (size_t i = 0; i < M; ++i) {
    double tol = opts.invariance_tol * (1.0 + std::abs(rep->y[i]));
    if (rep->interior[i]) {
      rep->max_residual_inside = std::fmax(rep->max_residual_inside, rep->residual[i]);
    } else {
      rep->max_residual_outside = std::fmax(rep->max_residual_outside, rep->residual[i]);
      if (rep->residual[i] > tol) rep->support_ok = false;
    }
  }
  if (lambda == LambdaSet::Whole || K.whole()) {
    rep->bound = rep->bound_all_j = rep->bound_proof = rep->M_sup_y0;
    rep->bound_ok = rep->bound_all_j_ok = rep->bound_proof_ok = rep->M_sup <= rep->M_sup_y0 * (1 + 1e-12) + 1e-12;
    return sec;
  }
  auto uni = sample_grid(base, std::min(opts.mesh, 1024));
  auto [a1N, anN] = F.triple_norms(K.n, K.N, uni, opts.max_j_samples);
  rep->A_1N = a1N;
  rep->A_nN = anN;
  rep->bound = rep->M_sup_y0 + K.d * anN;
  rep->bound_all_j = rep->M_sup_y0 + K.d * a1N;
  rep->bound_proof = rep->M_sup_y0 + anN + a1N;
  auto under = [&](double b) { return rep->M_sup <= b * (1 + 1e-9) + 1e-12; };
  rep->bound_ok = under(rep->bound);
  rep->bound_all_j_ok = under(rep->bound_all_j);
  rep->bound_proof_ok = under(rep->bound_proof);
  return sec;
}

// ---------------- cohomological equation ----------------

double mesh_mean(const BaseSystem& base, const ScalarFn& g, int mesh) {
  auto pts = sample_grid(base, mesh);
  std::vector<double> v(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) { v[i] = g(pts[i]); });
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

Observable tabulate(const BaseSystem& base, const ScalarFn& g, int side) {
  const int dim = base.dim();
  if (dim > 2) throw std::invalid_argument("tabulate supports dimension 1 and 2");
  const size_t S = static_cast<size_t>(side);
  auto table = std::make_shared<std::vector<double>>(dim == 1 ? S : S * S);
  parallel_for(table->size(), [&](std::size_t i) {
    Point p;
    p.dim = dim;
    p[0] = static_cast<double>(i % S) / side;
    if (dim == 2) p[1] = static_cast<double>(i / S) / side;
    (*table)[i] = g(p);
  });
  return Observable::of([table, side, dim](const Point& x) {
    auto idx = [side](double u, int& i0, int& i1, double& w) {
      double s = wrap01(u) * side;
      double fl = std::floor(s);
      i0 = static_cast<int>(fl) % side;
      i1 = (i0 + 1) % side;
      w = s - fl;
    };
    int a0, a1;
    double wa;
    idx(x[0], a0, a1, wa);
    const auto& T = *table;
    if (dim == 1) return (1 - wa) * T[static_cast<size_t>(a0)] + wa * T[static_cast<size_t>(a1)];
    int b0, b1;
    double wb;
    idx(x[1], b0, b1, wb);
    auto at = [&](int i, int j) { return T[static_cast<size_t>(j) * static_cast<size_t>(side) + static_cast<size_t>(i)]; };
    return (1 - wb) * ((1 - wa) * at(a0, b0) + wa * at(a1, b0)) + wb * ((1 - wa) * at(a0, b1) + wa * at(a1, b1));
  });
}

namespace {

struct CobState {
  BaseSystem base;
  Observable phi;
  double c = 0.0;
  Tower K;
  Section sec;

  double corr(const Point& x) const {
    Point xn = base.iterate(x, K.n);
    return sec(xn).real() - sec(x).real() - phi.centered_sum(base, x, K.n, c);
  }
  double phi_tilde(const Point& y) const {
    FloorHit h = find_floor(base, K, y);
    if (h.m < 0) return phi(y);
    return phi(y) + corr(h.x) / static_cast<double>(K.n);
  }
  double psi_tilde(const Point& y) const {
    FloorHit h = find_floor(base, K, y);
    if (h.m < 0) return sec(y).real();
    return sec(h.x).real() + phi.centered_sum(base, h.x, h.m, c) +
           static_cast<double>(h.m) * corr(h.x) / static_cast<double>(K.n);
  }
};

// sup over the mesh and j <= horizon of |S_j - jc|
double measured_centered_sup(const BaseSystem& base, const Observable& phi, double c, int mesh, int horizon) {
  auto pts = sample_grid(base, std::min(mesh, 512));
  std::vector<double> out(pts.size(), 0.0);
  parallel_for(pts.size(), [&](std::size_t i) {
    double s = 0.0, mx = 0.0;
    Point y = pts[i];
    for (int j = 0; j < horizon; ++j) {
      s += phi(y) - c;
      y = base.step(y);
      mx = std::fmax(mx, std::fabs(s));
    }
    out[i] = mx;
  });
  return *std::max_element(out.begin(), out.end());
}

void check_solution(const BaseSystem& base, const Tower& K, const Observable& phi, double c, const ScalarFn& pt,
                    const ScalarFn& ps, int mesh, double& sup_change, double& residual) {
  std::vector<Point> pts = sample_grid(base, mesh);
  if (!K.whole()) {
    // points on the bottom and top floors
    for (int k = 0; k <= 8; ++k) {
      Point p;
      p.dim = base.dim();
      p[0] = wrap01(K.lo + K.len * k / 8.0);
      for (int d = 1; d < base.dim(); ++d) p[d] = 0.37;
      pts.push_back(p);
      pts.push_back(base.iterate(p, K.n - 1));
    }
  }
  std::vector<double> ch(pts.size()), re(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    const Point& x = pts[i];
    double pv = pt(x);
    ch[i] = std::fabs(pv - phi(x));
    re[i] = std::fabs(pv - (ps(base.step(x)) - ps(x) + c));
  });
  sup_change = *std::max_element(ch.begin(), ch.end());
  residual = *std::max_element(re.begin(), re.end());
}

}  // namespace

CobSolution cohomological_boundary(const BaseSystem& base, const Observable& phi, ScalarFn psi, double c) {
  CobSolution s;
  s.boundary = true;
  s.c = c;
  s.phi_tilde = phi.f;
  s.psi_tilde = std::move(psi);
  s.tower.len = 1.0;
  check_solution(base, s.tower, phi, c, s.phi_tilde, s.psi_tilde, 512, s.sup_change, s.residual);
  return s;
}

CobSolution solve_cohomological(const BaseSystem& base, const Observable& phi, const CobOptions& opts) {
  CobSolution sol;
  sol.eps = opts.eps;
  sol.c = phi.trig ? phi.trig->c0 : mesh_mean(base, phi.f, opts.mesh);
  sol.delta = opts.eps / (7.0 * 1.01);  // [2d(d+2)+1] delta < eps with d = 1
  sol.B = phi.trig ? phi.trig->centered_bound(base)
                   : measured_centered_sup(base, phi, sol.c, opts.mesh, opts.growth_horizon);
  sol.j0 = static_cast<std::int64_t>(std::ceil(sol.B / sol.delta));
  std::int64_t target = std::max<std::int64_t>({opts.min_n, sol.j0, 2});
  for (int attempt = 0;; ++attempt) {
    if (target > opts.max_n) {
      std::ostringstream os;
      os << "required tower height " << target << " exceeds max_n=" << opts.max_n;
      throw std::runtime_error(os.str());
    }
    Tower K = tower_for(base, target);
    auto F = SkewProduct::real_line(base, phi, sol.c);
    SectionOptions so;
    so.mesh = 1024;
    auto sec = std::make_shared<Section>(
        almost_invariant_section(F, K, LambdaSet::Empty, [](const Point&) { return cplx(0.0, 0.0); }, so));
    if (!sec->report().support_ok) throw SectionError("section invariance failed outside int K");
    auto st = std::make_shared<CobState>(CobState{base, phi, sol.c, K, *sec});
    sol.phi_tilde = [st](const Point& y) { return st->phi_tilde(y); };
    sol.psi_tilde = [st](const Point& y) { return st->psi_tilde(y); };
    sol.tower = K;
    sol.n = K.n;
    sol.N = K.N;
    sol.section = sec;
    check_solution(base, K, phi, sol.c, sol.phi_tilde, sol.psi_tilde, opts.mesh, sol.sup_change, sol.residual);
    if (sol.sup_change < opts.eps || attempt >= opts.max_retries) break;
    target = 2 * K.n;
  }
  return sol;
}

FamilySolution solve_cohomological_family(const BaseSystem& base, const std::vector<FamilyPoint>& pts,
                                          const std::function<double(double)>& eps, const CobOptions& opts) {
  FamilySolution out;
  const size_t P = pts.size();
  std::vector<double> cs(P);
  for (size_t i = 0; i < P; ++i)
    cs[i] = pts[i].phi.trig ? pts[i].phi.trig->c0 : mesh_mean(base, pts[i].phi.f, opts.mesh);
  std::vector<size_t> star;
  for (size_t i = 0; i < P; ++i)
    if (pts[i].psi) star.push_back(i);
  auto nearest = [&](size_t i) {
    size_t best = star.front();
    for (size_t k : star)
      if (std::fabs(pts[k].t - pts[i].t) < std::fabs(pts[best].t - pts[i].t)) best = k;
    return best;
  };
  auto mesh = sample_grid(base, std::min(opts.mesh, 512));
  // radius of the blend around T*, halved until the centered data vary by at most eps/2
  double r = 0.0;
  if (!star.empty()) {
    double tmin = pts.front().t, tmax = tmin;
    for (auto& p : pts) tmin = std::fmin(tmin, p.t), tmax = std::fmax(tmax, p.t);
    r = std::fmax(tmax - tmin, 1e-12);
    for (int it = 0; it < 60; ++it) {
      bool ok = true;
      for (size_t i = 0; i < P && ok; ++i) {
        if (pts[i].psi) continue;
        size_t k = nearest(i);
        double dt = std::fabs(pts[k].t - pts[i].t);
        if (dt >= r) continue;
        for (const auto& x : mesh) {
          double v = (pts[i].phi(x) - cs[i]) - (pts[k].phi(x) - cs[k]);
          if (std::fabs(v) > 0.5 * eps(pts[i].t)) {
            ok = false;
            break;
          }
        }
      }
      if (ok) break;
      r *= 0.5;
    }
  }
  out.radius = r;
  out.t.resize(P);
  out.c = cs;
  out.sigma.assign(P, 0.0);
  out.sup_change.assign(P, 0.0);
  out.residual.assign(P, 0.0);
  out.phi_tilde.resize(P);
  out.psi_tilde.resize(P);
  for (size_t i = 0; i < P; ++i) {
    out.t[i] = pts[i].t;
    const double c = cs[i];
    if (pts[i].psi) {
      out.sigma[i] = 1.0;
      out.phi_tilde[i] = pts[i].phi.f;
      out.psi_tilde[i] = *pts[i].psi;
    } else {
      CobOptions o = opts;
      o.eps = 0.5 * eps(pts[i].t);
      auto s0 = std::make_shared<CobSolution>(solve_cohomological(base, pts[i].phi, o));
      double sg = 0.0;
      ScalarFn psi_star;
      if (!star.empty()) {
        size_t k = nearest(i);
        sg = std::fmax(0.0, 1.0 - std::fabs(pts[k].t - pts[i].t) / r);
        psi_star = *pts[k].psi;
      }
      out.sigma[i] = sg;
      if (sg == 0.0) {
        out.phi_tilde[i] = s0->phi_tilde;
        out.psi_tilde[i] = s0->psi_tilde;
      } else {
        BaseSystem b = base;
        out.phi_tilde[i] = [s0, psi_star, sg, c, b](const Point& x) {
          return (1 - sg) * s0->phi_tilde(x) + sg * (psi_star(b.step(x)) - psi_star(x) + c);
        };
        out.psi_tilde[i] = [s0, psi_star, sg](const Point& x) {
          return (1 - sg) * s0->psi_tilde(x) + sg * psi_star(x);
        };
      }
    }
    Tower whole;
    check_solution(base, whole, pts[i].phi, c, out.phi_tilde[i], out.psi_tilde[i], std::min(opts.mesh, 512),
                   out.sup_change[i], out.residual[i]);
  }
  return out;
}

CobPath::CobPath(BaseSystem base, Observable phi, const std::function<double(double)>& eps, int levels,
                 CobOptions opts) {
  for (int i = 0; i <= levels; ++i) {
    double t = std::ldexp(1.0, -i);
    opts.eps = eps(t);
    nodes_.push_back(t);
    stages_.push_back(solve_cohomological(base, phi, opts));
  }
}

std::pair<size_t, double> CobPath::locate(double t) const {
  if (!(t > 0.0)) throw std::invalid_argument("the path lives on (0,1]");
  if (t >= nodes_.front()) return {0, 1.0};
  for (size_t i = 0; i + 1 < nodes_.size(); ++i)
    if (t >= nodes_[i + 1]) return {i, (t - nodes_[i + 1]) / (nodes_[i] - nodes_[i + 1])};
  return {nodes_.size() - 1, 1.0};
}

double CobPath::phi_tilde(double t, const Point& x) const {
  auto [i, s] = locate(t);
  double v = stages_[i].phi_tilde(x);
  if (s >= 1.0 || i + 1 >= stages_.size()) return v;
  return s * v + (1 - s) * stages_[i + 1].phi_tilde(x);
}

double CobPath::psi_tilde(double t, const Point& x) const {
  auto [i, s] = locate(t);
  double v = stages_[i].psi_tilde(x);
  if (s >= 1.0 || i + 1 >= stages_.size()) return v;
  return s * v + (1 - s) * stages_[i + 1].psi_tilde(x);
}

double CobPath::c(double t) const {
  auto [i, s] = locate(t);
  if (s >= 1.0 || i + 1 >= stages_.size()) return stages_[i].c;
  return s * stages_[i].c + (1 - s) * stages_[i + 1].c;
}

// ---------------- conjugacy to rotations ----------------

namespace {

struct ConjState {
  Cocycle A;
  Tower K;
  Section sec;

  PsiResult column(const Point& x) const {
    std::vector<Mat2> mats;
    mats.reserve(static_cast<size_t>(K.n));
    Point y = x;
    for (std::int64_t i = 0; i < K.n; ++i) {
      mats.push_back(A(y));
      y = A.base().step(y);
    }
    return psi_n_adjust(mats, DiskPoint(sec(x)), DiskPoint(sec(y)));
  }
  Mat2 tilde(const Point& y) const {
    FloorHit h = find_floor(A.base(), K, y);
    if (h.m < 0) return A(y);
    return column(h.x).mats[static_cast<size_t>(h.m)];
  }
  cplx z(const Point& y) const {
    FloorHit h = find_floor(A.base(), K, y);
    if (h.m < 0) return sec(y);
    PsiResult col = column(h.x);
    DiskPoint p(sec(h.x));
    for (std::int64_t i = 0; i < h.m; ++i) p = disk_action(col.mats[static_cast<size_t>(i)], p);
    return p.z();
  }
};

}  // namespace

ConjRotResult conjugate_to_rotations(const Cocycle& c, double eps, const ConjRotOptions& opts,
                                     std::optional<FiberFn> invariant_section) {
  ConjRotResult r;
  const BaseSystem& base = c.base();
  auto mesh = sample_grid(base, opts.mesh);
  double C = 0.0;
  for (const auto& x : mesh) C = std::fmax(C, c(x).norm());
  r.C = C * (1.0 + 1e-4);
  r.gamma = 0.99 * std::log1p(eps / r.C) / 5.0;  // e^{[1+2d(d+1)] gamma} < 1 + eps/C, d = 1

  auto verify = [&](const MatFn& At, const FiberFn& z) {
    std::vector<double> ch(mesh.size()), rot(mesh.size()), inv(mesh.size());
    parallel_for(mesh.size(), [&](std::size_t i) {
      const Point& x = mesh[i];
      Point fx = base.step(x);
      Mat2 a = At(x);
      ch[i] = (a - c(x)).norm();
      Mat2 M = phi_adjust(DiskPoint(z(fx)), DiskPoint()) * a * phi_adjust(DiskPoint(z(x)), DiskPoint()).inverse();
      rot[i] = (M * M.transpose() - Mat2::identity()).max_abs();
      inv[i] = std::abs(disk_action(a, DiskPoint(z(x))).z() - z(fx));
    });
    r.sup_change = *std::max_element(ch.begin(), ch.end());
    r.rotation_residual = *std::max_element(rot.begin(), rot.end());
    r.invariance_residual = *std::max_element(inv.begin(), inv.end());
  };

  if (invariant_section) {
    FiberFn z = *invariant_section;
    r.perturbed = c;
    r.z_tilde = z;
    r.B = [z](const Point& x) { return phi_adjust(DiskPoint(z(x)), DiskPoint()); };
    verify(c.fn(), z);
    return r;
  }

  // growth curve sup_x log||A^n(x)|| / n at powers of two
  const int H = opts.growth_horizon;
  std::vector<int> marks;
  for (int n = 1; n <= H; n *= 2) marks.push_back(n);
  std::vector<std::vector<double>> per(mesh.size(), std::vector<double>(marks.size(), 0.0));
  parallel_for(mesh.size(), [&](std::size_t i) {
    Mat2 P = Mat2::identity();
    double ls = 0.0;
    Point y = mesh[i];
    size_t k = 0;
    for (int n = 1; n <= H; ++n) {
      P = c(y) * P;
      y = base.step(y);
      double mx = P.max_abs();
      if (mx > 1e8) {
        P = P.scaled(1.0 / mx);
        ls += std::log(mx);
      }
      if (k < marks.size() && n == marks[k]) per[i][k++] = (std::log(P.norm()) + ls) / n;
    }
  });
  for (size_t k = 0; k < marks.size(); ++k) {
    double g = 0.0;
    for (auto& row : per) g = std::fmax(g, row[k]);
    r.growth_curve.emplace_back(marks[k], g);
  }
  r.growth = r.growth_curve.back().second;
  if (r.growth >= r.gamma) {
    r.refused = true;
    std::ostringstream os;
    os.precision(6);
    os << "measured growth exponent " << r.growth << " at n=" << H << " is not below gamma=" << r.gamma;
    r.reason = os.str();
    return r;
  }
  r.n0 = H;
  for (size_t k = marks.size(); k-- > 0;) {
    if (r.growth_curve[k].second >= r.gamma) break;
    r.n0 = marks[k];
  }
  r.C1 = 0.0;
  double need = std::max({static_cast<double>(r.n0), std::log(r.C) / r.gamma, r.C1 / r.gamma});
  std::int64_t target = std::max<std::int64_t>(opts.min_n, static_cast<std::int64_t>(std::floor(need)) + 1);
  Tower K = tower_for(base, target);
  r.tower = K;
  r.n = K.n;
  r.N = K.N;
  auto F = SkewProduct::disk(c);
  Section sec = almost_invariant_section(F, K, LambdaSet::Empty, [](const Point&) { return cplx(0.0, 0.0); },
                                         opts.section);
  r.section = sec.report();
  auto st = std::make_shared<ConjState>(ConjState{c, K, sec});
  MatFn At = [st](const Point& x) { return st->tilde(x); };
  FiberFn z = [st](const Point& x) { return st->z(x); };
  r.perturbed = Cocycle(base, At, c.label() + "~");
  r.z_tilde = z;
  r.B = [st](const Point& x) { return phi_adjust(DiskPoint(st->z(x)), DiskPoint()); };
  std::vector<double> corr(mesh.size(), 0.0);
  parallel_for(mesh.size(), [&](std::size_t i) {
    FloorHit h = find_floor(base, K, mesh[i]);
    if (h.m >= 0) corr[i] = st->column(h.x).max_correction;
  });
  r.max_correction = *std::max_element(corr.begin(), corr.end());
  verify(At, z);
  return r;
}

// ---------------- UH to constant ----------------

ReduceResult reduce_uh_to_constant(const Cocycle& c, const ReduceOptions& opts) {
  ReduceResult r;
  const BaseSystem& base = c.base();
  UHResult uh = uh_test(c, opts.uh);
  if (uh.outcome != UHOutcome::UH) {
    r.refused = true;
    r.reason = "cocycle is not certified uniformly hyperbolic: " + uh.reason;
    return r;
  }
  const int m = opts.frame_steps;
  struct Frame {
    cplx u, s;
    double D;
  };
  auto frame = [c, m](const Point& x) {
    double tu = unstable_direction(c, x, m), ts = stable_direction(c, x, m);
    Frame f{{std::cos(tu), std::sin(tu)}, {std::cos(ts), std::sin(ts)}, 0.0};
    f.D = std::fabs(f.u.real() * f.s.imag() - f.u.imag() * f.s.real());
    return f;
  };
  auto Bof = [frame](const Point& x) {
    Frame f = frame(x);
    double k = 1.0 / std::sqrt(f.D);
    Mat2 Binv{f.u.real() * k, f.s.real() * k, f.u.imag() * k, f.s.imag() * k};
    if (Binv.det() < 0) Binv = Mat2{Binv.a, -Binv.b, Binv.c, -Binv.d};
    return Binv.inverse();
  };
  ScalarFn phi_exact = [c, frame](const Point& x) {
    Frame f = frame(x), g = frame(c.base().step(x));
    auto v = c(x).apply(f.u.real(), f.u.imag());
    return std::log(std::hypot(v[0], v[1])) + 0.5 * std::log(g.D) - 0.5 * std::log(f.D);
  };
  Observable phi = tabulate(base, phi_exact, base.dim() == 1 ? 4096 : 256);
  r.phi = phi.f;
  r.B = Bof;
  r.c = mesh_mean(base, phi_exact, opts.mesh);
  Point x0;
  x0.dim = base.dim();
  x0[0] = 0.1234;
  auto L = lyapunov_exponent(c, x0, 200000, 10000);
  r.lyapunov = L.value;
  r.lyapunov_err = L.stderr_;

  auto mesh = sample_grid(base, opts.mesh);
  {
    std::vector<double> fr(mesh.size());
    parallel_for(mesh.size(), [&](std::size_t i) {
      const Point& x = mesh[i];
      Mat2 rec = Bof(base.step(x)).inverse() * Mat2::diag_exp(phi(x)) * Bof(x);
      fr[i] = psl_distance(rec, c(x));
    });
    r.frame_residual = *std::max_element(fr.begin(), fr.end());
  }
  double tmin = *std::min_element(opts.t_grid.begin(), opts.t_grid.end());
  int levels = static_cast<int>(std::ceil(-std::log2(tmin) - 1e-12));
  const double scale = opts.eps_scale;
  auto path = std::make_shared<CobPath>(base, phi, [scale](double t) { return scale * t; }, std::max(levels, 0),
                                        opts.cob);
  r.A_t = [path, Bof, base](double t, const Point& x) {
    return Bof(base.step(x)).inverse() * Mat2::diag_exp(path->phi_tilde(t, x)) * Bof(x);
  };
  r.B_t = [path, Bof](double t, const Point& x) { return Mat2::diag_exp(-path->psi_tilde(t, x)) * Bof(x); };
  // B(x) is needed at x and fx for every t; cache it on the mesh
  std::vector<Mat2> Bx(mesh.size()), Bfx(mesh.size());
  parallel_for(mesh.size(), [&](std::size_t i) {
    Bx[i] = Bof(mesh[i]);
    Bfx[i] = Bof(base.step(mesh[i]));
  });
  for (double t : opts.t_grid) {
    ReducePoint p;
    p.t = t;
    std::vector<double> dist(mesh.size()), conj(mesh.size());
    const double ct = path->c(t);
    const Mat2 Dt = Mat2::diag_exp(ct);
    parallel_for(mesh.size(), [&](std::size_t i) {
      const Point& x = mesh[i];
      Point fx = base.step(x);
      Mat2 At = Bfx[i].inverse() * Mat2::diag_exp(path->phi_tilde(t, x)) * Bx[i];
      dist[i] = psl_distance(At, c(x));
      Mat2 Bt_x = Mat2::diag_exp(-path->psi_tilde(t, x)) * Bx[i];
      Mat2 Bt_fx = Mat2::diag_exp(-path->psi_tilde(t, fx)) * Bfx[i];
      conj[i] = psl_distance(Bt_fx * At * Bt_x.inverse(), Dt);
    });
    p.sup_dist = *std::max_element(dist.begin(), dist.end());
    p.conjugation_residual = *std::max_element(conj.begin(), conj.end());
    r.path.push_back(p);
  }
  r.monotone = true;
  std::vector<ReducePoint> sorted = r.path;
  std::sort(sorted.begin(), sorted.end(), [](const ReducePoint& a, const ReducePoint& b) { return a.t > b.t; });
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].sup_dist > sorted[i - 1].sup_dist + 1e-12) r.monotone = false;
  return r;
}

}  // namespace cocyclelab
