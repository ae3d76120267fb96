#include "cocyclelab/towers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cocyclelab {

namespace {

double convergent_error(double alpha, std::int64_t p, std::int64_t q) {
  return std::fabs(std::fma(static_cast<double>(q), alpha, -static_cast<double>(p)));
}

void require_rotation_factor(const BaseSystem& sys) {
  if (sys.periodic_mode()) throw std::invalid_argument("towers need an irrational rotation factor");
}

}  // namespace

Tower build_rotation_tower(const BaseSystem& sys, std::int64_t n_target, std::int64_t grid_size) {
  require_rotation_factor(sys);
  const double alpha = sys.alpha();
  const auto& cf = sys.cf();
  Tower t;
  t.alpha = alpha;
  t.cf_terms = cf.terms;
  t.lifted_dim = 1;
  BaseSystem rot = BaseSystem::rotation(alpha);
  if (n_target <= 1) {
    t.lo = 0.0;
    t.len = 1.0;
    t.n = 1;
    t.N = 1;
    t.d = 1;
  } else {
    int k = cf.first_index_with_q_at_least(n_target);
    if (k < 1 || static_cast<size_t>(k) + 1 >= cf.q.size()) {
      std::ostringstream os;
      os << "not enough convergents of alpha to reach q_k >= " << n_target;
      throw std::invalid_argument(os.str());
    }
    auto uk = static_cast<size_t>(k);
    double dk = convergent_error(alpha, cf.p[uk], cf.q[uk]);
    double dprev = convergent_error(alpha, cf.p[uk - 1], cf.q[uk - 1]);
    // Widen slightly past |q_k alpha - p_k| so that 0 and the right end lie on different orbits.
    double kappa = std::fmin(0.01, 0.5 * (dprev / dk - 1.0)) / std::sqrt(2.0);
    t.lo = 0.0;
    t.len = dk * (1.0 + kappa);
    t.n = cf.q[uk];
    t.N = cf.q[uk] + cf.q[uk + 1];
    t.d = 1;
    t.cf_index = k;
  }
  if (grid_size <= 0) grid_size = std::min<std::int64_t>(std::max<std::int64_t>(10 * t.N, 100000), 20000000);
  auto rep = certify(rot, t, grid_size);
  t.grid_size = grid_size;
  if (!rep.pass()) {
    std::ostringstream os;
    os << "tower certification failed (n=" << t.n << ", N=" << t.N << ")";
    for (auto& v : rep.violations) os << "; " << v;
    throw CertificationError(os.str(), rep);
  }
  t.certified = true;
  return t;
}

Tower lift_tower_through_factor(const Tower& t, const BaseSystem& target) {
  if (target.alpha() != t.alpha) throw std::invalid_argument("lift: target system has a different rotation factor");
  if (target.kind() == BaseKind::Torus && target.dim() > 1)
    throw std::invalid_argument("lift: torus translations are not lifted; unknown factor relationship");
  Tower out = t;
  out.lifted_dim = target.dim();
  return out;
}

std::int64_t entry_time(const BaseSystem& sys, const Tower& t, const Point& x, std::int64_t cap) {
  Point y = x;
  for (std::int64_t j = 0; j <= cap; ++j) {
    if (t.in_interior(y)) return j;
    y = sys.step(y);
  }
  return -1;
}

CertificationReport certify(const BaseSystem& sys, const Tower& t, std::int64_t grid_size) {
  CertificationReport r;
  r.grid_size = grid_size;
  r.grid_meets_10N = grid_size >= 10 * t.N;
  r.bound_ok = t.N <= (t.d + 2) * t.n - 1 || t.whole();
  if (!r.bound_ok) {
    std::ostringstream os;
    os << "N=" << t.N << " exceeds (d+2)n-1=" << (t.d + 2) * t.n - 1;
    r.violations.push_back(os.str());
  }
  if (t.whole()) {
    r.good = r.spanning = r.mild = true;
    return r;
  }
  const double alpha = sys.alpha();
  const double G = static_cast<double>(grid_size);

  // goodness: interval test, then grid orbits started in K
  r.good = true;
  for (std::int64_t i = 1; i < t.n && r.good; ++i) {
    double gap = circle_dist(sys.rotate(0.0, i), 0.0);
    if (gap <= t.len) {
      r.good = false;
      std::ostringstream os;
      os << "K meets f^" << i << "(K): |" << i << " alpha| = " << gap << " <= |K|";
      r.violations.push_back(os.str());
      double fr = sys.rotate(0.0, i);
      r.witnesses.push_back(fr <= t.len ? wrap01(t.lo) : wrap01(t.lo + 1.0 - fr));
    }
  }
  for (std::int64_t g = 0; g < grid_size && r.good; ++g) {
    double x = static_cast<double>(g) / G;
    if (t.offset(x) > t.len) continue;
    double y = x;
    for (std::int64_t i = 1; i < t.n; ++i) {
      y = wrap01(y + alpha);
      if (t.offset(y) <= t.len) {
        r.good = false;
        std::ostringstream os;
        os << "grid point x=" << x << " has f^" << i << "(x) in K";
        r.violations.push_back(os.str());
        r.witnesses.push_back(x);
        break;
      }
    }
  }

  // spanning: every grid point covered by some f^i(K), i < N
  {
    std::vector<int> cover(static_cast<size_t>(grid_size) + 1, 0);
    for (std::int64_t i = 0; i < t.N; ++i) {
      double s = sys.rotate(t.lo, i);
      auto from = static_cast<std::int64_t>(std::ceil(s * G));
      auto to = static_cast<std::int64_t>(std::floor((s + t.len) * G));
      if (to < from) continue;
      if (to - from + 1 >= grid_size) {
        cover[0] += 1;
        cover[static_cast<size_t>(grid_size)] -= 1;
        continue;
      }
      auto add = [&](std::int64_t a, std::int64_t b) {
        cover[static_cast<size_t>(a)] += 1;
        cover[static_cast<size_t>(b + 1)] -= 1;
      };
      if (to < grid_size) {
        add(from, to);
      } else if (from >= grid_size) {
        add(from - grid_size, to - grid_size);
      } else {
        add(from, grid_size - 1);
        add(0, to - grid_size);
      }
    }
    r.spanning = true;
    int run = 0;
    for (std::int64_t g = 0; g < grid_size; ++g) {
      run += cover[static_cast<size_t>(g)];
      if (run <= 0) {
        r.spanning = false;
        std::ostringstream os;
        os << "grid point " << static_cast<double>(g) / G << " not covered by f^i(K), i<" << t.N;
        r.violations.push_back(os.str());
        r.witnesses.push_back(static_cast<double>(g) / G);
        break;
      }
    }
    // interval test: max gap of {lo + i alpha, i < N} at most |K|
    if (r.spanning && t.N <= 50000000) {
      std::vector<double> pts(static_cast<size_t>(t.N));
      for (std::int64_t i = 0; i < t.N; ++i) pts[static_cast<size_t>(i)] = sys.rotate(0.0, i);
      std::sort(pts.begin(), pts.end());
      double maxgap = 1.0 - pts.back() + pts.front();
      for (size_t i = 1; i < pts.size(); ++i) maxgap = std::fmax(maxgap, pts[i] - pts[i - 1]);
      if (maxgap > t.len) {
        r.spanning = false;
        std::ostringstream os;
        os << "largest gap " << maxgap << " of the first " << t.N << " orbit points exceeds |K|";
        r.violations.push_back(os.str());
      }
    }
  }

  // mildness: only orbits through the two endpoints can meet dK
  {
    const double tol = std::fmin(1e-9, 1e-4 * t.len);
    const std::int64_t len = 10 * t.N;
    const double ends[2] = {wrap01(t.lo), wrap01(t.hi())};
    auto hits_on = [&](double start, std::int64_t from, std::int64_t to) {
      int h = 0;
      for (std::int64_t j = from; j <= to; ++j) {
        double y = sys.rotate(start, j);
        if (circle_dist(y, ends[0]) < tol || circle_dist(y, ends[1]) < tol) ++h;
      }
      return h;
    };
    for (double b : ends) r.max_boundary_hits = std::max(r.max_boundary_hits, hits_on(b, -len, len));
    const std::int64_t budget = 40000000;
    int samples = static_cast<int>(std::min<std::int64_t>(4, budget / std::max<std::int64_t>(len, 1)));
    for (int s = 0; s < samples; ++s) {
      double x = static_cast<double>((grid_size / (samples + 1)) * (s + 1)) / G;
      r.max_boundary_hits = std::max(r.max_boundary_hits, hits_on(x, 0, len - 1));
    }
    r.mild = r.max_boundary_hits <= t.d;
    if (!r.mild) {
      std::ostringstream os;
      os << "an orbit meets dK " << r.max_boundary_hits << " times, d=" << t.d;
      r.violations.push_back(os.str());
    }
  }
  return r;
}

}  // namespace cocyclelab
