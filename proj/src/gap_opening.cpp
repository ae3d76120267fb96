#include "cocyclelab/gap_opening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cocyclelab/parallel.hpp"

namespace cocyclelab {

namespace {

const Mat2 kS0 = Mat2::schrodinger(0.0);

// Offset of x in [lo, lo + len] along the circle, or a value > len.
double arc_offset(double x, double lo) { return wrap01(x - lo); }

double tent_on(double u, double len) {
  if (u > len) return 0.0;
  double s = u / len;
  return 1.0 - std::fabs(2.0 * s - 1.0);
}

LocalizedPerturbation make_perturbation(BaseSystem base, double k_lo, double k_len, double margin, double size,
                                        Mat2 G, bool tent) {
  if (k_len <= 0.0 || margin <= 0.0 || k_len + 2.0 * margin >= 1.0)
    throw std::invalid_argument("perturbation: need 0 < |K| and 0 < margin with |K'| < 1");
  if (std::fabs(G.trace()) > 1e-14) throw std::invalid_argument("perturbation: generator must be traceless");
  double gm = G.max_abs();
  if (gm > 0) G = G.scaled(1.0 / gm);
  LocalizedPerturbation p;
  p.base = base;
  p.k_lo = wrap01(k_lo);
  p.k_len = k_len;
  p.kp_lo = wrap01(k_lo - margin);
  p.kp_len = k_len + 2.0 * margin;
  const double klo = p.k_lo, kl = k_len, kplo = p.kp_lo, kpl = p.kp_len;
  p.A_hat = [=](const Point& x) {
    double u = arc_offset(x[0], klo);
    if (u > kl || size == 0.0) return kS0;
    double w = tent ? tent_on(u, kl) : 1.0;
    if (w == 0.0) return kS0;
    return kS0 * exp_traceless(G.scaled(size * w));
  };
  p.bump = [=](const Point& x) {
    double u = arc_offset(x[0], kplo);
    if (u > kpl) return 0.0;
    if (u >= margin && u <= margin + kl) return 1.0;
    return u < margin ? u / margin : (kpl - u) / margin;
  };
  return p;
}

// Floor index i in {0,1,2,3} with f^-i(y) in K', and that point; -1 off the tower.
struct TowerHit {
  int i = -1;
  Point x;
};

TowerHit floor_of(const LocalizedPerturbation& p, const Point& y) {
  TowerHit h;
  for (int i = 0; i < 4; ++i) {
    double x1 = p.base.rotate(y[0], -i);
    if (arc_offset(x1, p.kp_lo) <= p.kp_len) {
      h.i = i;
      h.x = i == 0 ? y : p.base.iterate(y, -i);
      return h;
    }
  }
  return h;
}

Mat2 product(const MatFn& A, const BaseSystem& base, const Point& x, int n) {
  Mat2 m = Mat2::identity();
  Point y = x;
  for (int k = 0; k < n; ++k) {
    m = A(y) * m;
    y = base.step(y);
  }
  return m;
}

double s_form_distance(const Mat2& m) {
  return std::fmax(std::fmax(std::fabs(m.b + 1.0), std::fabs(m.c - 1.0)), std::fabs(m.d));
}

}  // namespace

LocalizedPerturbation LocalizedPerturbation::tent(BaseSystem base, double k_lo, double k_len, double margin,
                                                  double size, Mat2 G) {
  return make_perturbation(std::move(base), k_lo, k_len, margin, size, G, true);
}

LocalizedPerturbation LocalizedPerturbation::constant_on_K(BaseSystem base, double k_lo, double k_len,
                                                           double margin, double size, Mat2 G) {
  return make_perturbation(std::move(base), k_lo, k_len, margin, size, G, false);
}

bool LocalizedPerturbation::in_K(const Point& x) const { return arc_offset(x[0], k_lo) <= k_len; }
bool LocalizedPerturbation::in_Kp(const Point& x) const { return arc_offset(x[0], kp_lo) <= kp_len; }

ProjectionResult project_to_schrodinger(const LocalizedPerturbation& p, const ProjectionOptions& opts) {
  ProjectionResult r;
  const BaseSystem& base = p.base;

  for (int i = 1; i <= 3; ++i) {
    double s = base.rotate(0.0, i);
    if (s <= p.kp_len || s >= 1.0 - p.kp_len) {
      r.refused = true;
      r.reason = "f^" + std::to_string(i) + "(K') meets K'";
      return r;
    }
  }

  std::vector<Point> mesh = sample_grid(base, opts.mesh);
  {
    Point z = mesh.empty() ? Point(0.0) : mesh[0];
    for (int k = 0; k < opts.floor_points; ++k) {
      Point x = z;
      x[0] = wrap01(p.kp_lo + p.kp_len * (k + 0.5) / opts.floor_points);
      if (base.dim() > 1) x[1] = wrap01(0.37 + 0.61 * k / opts.floor_points);
      for (int i = 0; i < 4; ++i) mesh.push_back(base.iterate(x, i));
    }
  }
  r.mesh_size = static_cast<std::int64_t>(mesh.size());

  // base cocycle must be S_0 off K
  double size = 0.0, off_K = 0.0;
  for (const auto& x : mesh) {
    Mat2 a = p.A_hat(x);
    double dist = (a - kS0).max_abs();
    size = std::fmax(size, dist);
    if (!p.in_K(x)) off_K = std::fmax(off_K, dist);
  }
  r.perturbation_size = size;
  if (off_K > 0.0) {
    r.refused = true;
    r.reason = "A_hat differs from S_0 outside K by " + std::to_string(off_K);
    return r;
  }
  if (size >= 0.25) {
    r.refused = true;
    r.reason = "perturbation size " + std::to_string(size) + " >= 1/4";
    return r;
  }

  // E from the points of K'
  std::vector<Point> kp_pts;
  for (const auto& x : mesh)
    if (p.in_Kp(x)) kp_pts.push_back(x);
  double e2 = 0.0, min_den = std::numeric_limits<double>::infinity();
  for (const auto& x : kp_pts) {
    Mat2 m = product(p.A_hat, base, x, 4) - Mat2::identity();
    e2 = std::fmax(e2, m.norm());
    min_den = std::fmin(min_den, std::fmin(std::fabs(1.0 + m.d), std::fabs(1.0 - m.d)));
  }
  r.E = std::sqrt(e2);
  r.min_denominator = kp_pts.empty() ? 1.0 : min_den;
  if (r.min_denominator < 0.5) {
    r.refused = true;
    r.reason = "|1 +- d| = " + std::to_string(r.min_denominator) + " < 1/2 at perturbation size " +
               std::to_string(size);
    return r;
  }

  const LocalizedPerturbation pp = p;
  const double E = r.E;
  // solves S_E4 S_E3 S_E2 S_E1 = A_hat^4 = id + [[a, b], [c, d]] with E3 = E bump
  auto solve = [pp, E](const Point& x) {
    Mat2 m = product(pp.A_hat, pp.base, x, 4) - Mat2::identity();
    std::array<double, 4> e{};
    e[2] = E * pp.bump(x);
    e[1] = e[2] == 0.0 ? 0.0 : -m.d / e[2];
    e[0] = -(m.c + e[2]) / (1.0 + m.d);
    e[3] = (m.b - e[1]) / (1.0 + m.d);
    return e;
  };
  for (int i = 0; i < 4; ++i)
    r.E_i[static_cast<size_t>(i)] = [solve, i](const Point& x) { return solve(x)[static_cast<size_t>(i)]; };

  r.phi_image = [pp, solve](const Point& y) {
    TowerHit h = floor_of(pp, y);
    if (h.i < 0) return pp.A_hat(y);
    return Mat2::schrodinger(solve(h.x)[static_cast<size_t>(h.i)]);
  };
  r.psi = [pp, solve](const Point& y) {
    TowerHit h = floor_of(pp, y);
    if (h.i <= 0) return Mat2::identity();
    auto e = solve(h.x);
    Mat2 phi_i = Mat2::identity();
    for (int k = 0; k < h.i; ++k) phi_i = Mat2::schrodinger(e[static_cast<size_t>(k)]) * phi_i;
    return phi_i * product(pp.A_hat, pp.base, h.x, h.i).inverse();
  };

  std::vector<double> s_form(mesh.size(), 0.0), conj(mesh.size(), 0.0), img(mesh.size(), 0.0),
      psid(mesh.size(), 0.0);
  std::vector<char> exact(mesh.size(), 1);
  parallel_for(mesh.size(), [&](std::size_t k) {
    const Point& y = mesh[k];
    Mat2 ph = r.phi_image(y);
    Mat2 ps = r.psi(y);
    img[k] = (ph - kS0).max_abs();
    psid[k] = (ps - Mat2::identity()).max_abs();
    conj[k] = (r.psi(base.step(y)) * p.A_hat(y) * ps.inverse() - ph).max_abs();
    if (floor_of(pp, y).i >= 0)
      s_form[k] = s_form_distance(ph);
    else
      exact[k] = ph == kS0 && ps == Mat2::identity();
  });
  r.s_form_residual = *std::max_element(s_form.begin(), s_form.end());
  r.conjugation_residual = *std::max_element(conj.begin(), conj.end());
  r.image_distance = *std::max_element(img.begin(), img.end());
  r.psi_distance = *std::max_element(psid.begin(), psid.end());
  r.off_tower_exact = std::all_of(exact.begin(), exact.end(), [](char c) { return c != 0; });
  return r;
}

// ---- gap opening ----

namespace {

SpectralProfile profile_for(const BaseSystem& base, const Potential& v, const std::vector<double>& grid,
                            const OpenGapOptions& o) {
  switch (o.method) {
    case ProfileMethod::Eigencount:
      return ids_by_eigencount(v, base, grid, o.L, o.x0);
    case ProfileMethod::Floquet:
      if (v.sequence.empty()) throw std::invalid_argument("floquet profile needs a periodic potential");
      return ids_floquet(v.sequence, grid);
    case ProfileMethod::Rotation:
    default:
      return ids_by_rotation(v, base, grid, o.n, o.x0);
  }
}

std::string method_name(ProfileMethod m) {
  switch (m) {
    case ProfileMethod::Eigencount:
      return "eigencount";
    case ProfileMethod::Floquet:
      return "floquet";
    default:
      return "rotation";
  }
}

// Detected gap whose plateau value is nearest the target, within tol.
bool nearest_gap(const std::vector<Gap>& gaps, double target, double tol, Gap& out) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : gaps) {
    double d = std::fabs(g.N - target);
    if (d < best) {
      best = d;
      out = g;
    }
  }
  return best <= tol;
}

}  // namespace

OpenGapReport open_gap_demo(const BaseSystem& base, const PotentialPath& path, double label,
                            const std::vector<double>& t_grid, const OpenGapOptions& opts) {
  OpenGapReport rep;
  rep.target = label;
  rep.method = method_name(opts.method);
  rep.rows.resize(t_grid.size());
  const LabelGroup G = LabelGroup::for_base(base);
  const auto grid = linspace(opts.E_lo, opts.E_hi, opts.E_steps);
  const double h = (opts.E_hi - opts.E_lo) / (opts.E_steps - 1);

  for (size_t k = 0; k < t_grid.size(); ++k) {
    OpenGapRow& row = rep.rows[k];
    row.t = t_grid[k];
    row.resolution = h;
    try {
      Potential v = path(row.t);
      SpectralProfile prof = profile_for(base, v, grid, opts);
      double err = 0.0;
      for (double e : prof.err) err = std::fmax(err, e);
      row.profile_error = std::fmax(h, err);
      auto gaps = detect_and_label_gaps(prof, G, opts.min_steps);
      row.profile = prof;
      Gap g;
      if (!nearest_gap(gaps, label, opts.label_tol, g)) {
        row.note = "no plateau within " + std::to_string(opts.label_tol) + " of the label at step " + std::to_string(h);
        continue;
      }
      std::vector<Gap> one{g};
      attach_rho(one, v, base, opts.rho_n, opts.x0);
      row.open = true;
      row.gap = one[0];
      row.width = g.width();
      row.label_residual = std::fabs(g.N - label);
      row.rho = one[0].rho;
      if (opts.refine) {
        int steps = static_cast<int>(std::ceil((g.width() + 8.0 * h) / (0.5 * h))) + 1;
        auto fine = linspace(g.E_lo - 4.0 * h, g.E_hi + 4.0 * h, steps);
        SpectralProfile fp = profile_for(base, v, fine, opts);
        auto fgaps = detect_and_label_gaps(fp, G, opts.min_steps);
        Gap fg;
        if (nearest_gap(fgaps, label, opts.label_tol, fg)) {
          row.refined_width = fg.width();
          row.resolution_ok = fg.width() >= g.width() - 2.0 * h;
        } else {
          row.resolution_ok = false;
        }
        if (!row.resolution_ok) row.note = "finer grid shrinks the gap";
      }
    } catch (const std::exception& e) {
      row.note = std::string("failed: ") + e.what();
    }
  }
  return rep;
}

RhoAudit rho_constancy_audit(const OpenGapReport& report, double tol) {
  RhoAudit a;
  a.expected = 0.5 * (1.0 - report.target);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : report.rows) {
    if (!row.open) {
      a.missing_t.push_back(row.t);
      continue;
    }
    a.t.push_back(row.t);
    a.rho.push_back(row.rho);
    lo = std::fmin(lo, row.rho);
    hi = std::fmax(hi, row.rho);
    a.max_deviation = std::fmax(a.max_deviation, std::fabs(row.rho - a.expected));
  }
  a.spread = a.rho.empty() ? 0.0 : hi - lo;
  a.complete = a.missing_t.empty();
  a.constant = !a.rho.empty() && a.spread <= tol && a.max_deviation <= tol;
  return a;
}

}  // namespace cocyclelab
