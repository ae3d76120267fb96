#include "cocyclelab/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cocyclelab/parallel.hpp"
#include "cocyclelab/rotation_number.hpp"

namespace cocyclelab {

LabelGroup::Element LabelGroup::nearest(double x) const {
  const size_t d = generators.size();
  Element best;
  best.residual = std::numeric_limits<double>::infinity();
  std::int64_t best_weight = 0;
  std::vector<std::int64_t> m(d, -window);
  while (true) {
    double s = 0;
    std::int64_t weight = 0;
    for (size_t i = 0; i < d; ++i) {
      s += static_cast<double>(m[i]) * generators[i];
      weight += std::llabs(m[i]);
    }
    auto k = static_cast<std::int64_t>(std::nearbyint(x - s));
    for (std::int64_t kk : {k - 1, k, k + 1}) {
      double val = static_cast<double>(kk) + s;
      if (!(val > 1e-12 && val < 1 - 1e-12) || std::llabs(kk) > window) continue;
      double r = std::fabs(x - val);
      std::int64_t w = weight + std::llabs(kk);
      bool better = r < best.residual - 1e-13 || (r <= best.residual + 1e-13 && w < best_weight);
      if (better) {
        best = {val, kk, m, r};
        best_weight = w;
      }
    }
    size_t i = 0;
    while (i < d && m[i] == window) m[i++] = -window;
    if (i == d) break;
    ++m[i];
  }
  return best;
}

LabelGroup LabelGroup::for_base(const BaseSystem& base) {
  LabelGroup g;
  if (base.periodic_mode() && base.period_q() > 0) {
    g.generators = {static_cast<double>(base.period_p()) / static_cast<double>(base.period_q())};
  } else if (base.kind() == BaseKind::Torus) {
    g.generators = base.alphas();
  } else {
    g.generators = {base.alpha()};
  }
  return g;
}

std::vector<double> linspace(double a, double b, int count) {
  std::vector<double> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<size_t>(i)] = count == 1 ? a : a + (b - a) * i / (count - 1);
  return out;
}

double eigencount_fraction(const std::vector<double>& v, double E) {
  std::int64_t neg = 0;
  double dprev = 0.0;
  for (size_t j = 0; j < v.size(); ++j) {
    double dj = v[j] - E - (j == 0 ? 0.0 : 1.0 / dprev);
    if (dj == 0.0) dj = -1e-300;
    if (dj < 0) ++neg;
    dprev = dj;
  }
  return static_cast<double>(neg) / static_cast<double>(v.size());
}

SpectralProfile ids_by_eigencount(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                                  std::int64_t L, const Point& x0) {
  if (L < 100) throw std::invalid_argument("ids_by_eigencount: need L >= 100");
  std::vector<double> vs(static_cast<size_t>(L));
  Point x = x0;
  for (std::int64_t j = 0; j < L; ++j) {
    vs[static_cast<size_t>(j)] = v(x);
    x = base.step(x);
  }
  SpectralProfile p;
  p.method = "eigencount";
  p.E = E_grid;
  p.N.resize(E_grid.size());
  p.err.assign(E_grid.size(), 2.0 / static_cast<double>(L));
  parallel_for(E_grid.size(), [&](size_t i) { p.N[i] = eigencount_fraction(vs, E_grid[i]); });
  return p;
}

SpectralProfile ids_by_rotation(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                                std::int64_t n, const Point& x0) {
  SpectralProfile p;
  p.method = "rotation";
  p.E = E_grid;
  p.N.resize(E_grid.size());
  p.err.resize(E_grid.size());
  parallel_for(E_grid.size(), [&](size_t i) {
    auto e = rho(Cocycle::schrodinger(base, E_grid[i], v), x0, n);
    p.N[i] = 1.0 - 2.0 * e.rho;
    p.err[i] = 2.0 * e.error;
  });
  return p;
}

double discriminant(const std::vector<double>& seq, double E) {
  // u_{k+1} = (E - v_k) u_k - u_{k-1}, columns for the two initial conditions
  double a = 1, b = 0, c = 0, d = 1;  // [[a b],[c d]]
  for (double vk : seq) {
    double t = E - vk;
    double na = t * a - c, nb = t * b - d;
    c = a;
    d = b;
    a = na;
    b = nb;
  }
  return a + d;
}

bool Bands::contains(double E) const {
  for (const auto& b : bands)
    if (E >= b.first - 1e-12 && E <= b.second + 1e-12) return true;
  return false;
}

namespace {

std::vector<double> floquet_eigenvalues(const std::vector<double>& seq, double sign) {
  const int q = static_cast<int>(seq.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    H(i, i) += seq[static_cast<size_t>(i)];
    int j = (i + 1) % q;
    double w = i == q - 1 ? sign : 1.0;
    H(i, j) += w;
    H(j, i) += w;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + q);
  return out;
}

double polish(const std::vector<double>& seq, double e, double target) {
  double h = 1e-7 * std::fmax(1.0, std::fabs(e));
  double lo = e - h, hi = e + h;
  double flo = discriminant(seq, lo) - target, fhi = discriminant(seq, hi) - target;
  if (flo * fhi > 0) return e;  // double root or tangency
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    double fm = discriminant(seq, mid) - target;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Bands periodic_spectrum_exact(const std::vector<double>& seq) {
  if (seq.empty()) throw std::invalid_argument("periodic spectrum: empty sequence");
  std::vector<std::pair<double, double>> edges;  // (energy, discriminant target)
  for (double e : floquet_eigenvalues(seq, 1.0)) edges.push_back({e, 2.0});
  for (double e : floquet_eigenvalues(seq, -1.0)) edges.push_back({e, -2.0});
  for (auto& ed : edges) ed.first = polish(seq, ed.first, ed.second);
  std::sort(edges.begin(), edges.end());
  Bands b;
  for (size_t j = 0; j + 1 < edges.size(); j += 2) b.bands.push_back({edges[j].first, edges[j + 1].first});
  for (size_t j = 0; j + 1 < b.bands.size(); ++j)
    if (b.bands[j + 1].first - b.bands[j].second > 1e-12) b.gaps.push_back({b.bands[j].second, b.bands[j + 1].first});
  return b;
}

double ids_periodic_exact(const std::vector<double>& seq, const Bands& b, double E) {
  const auto q = static_cast<double>(seq.size());
  const int nb = static_cast<int>(b.bands.size());
  if (E <= b.bands.front().first) return 0.0;
  if (E >= b.bands.back().second) return 1.0;
  for (int j = 0; j < nb; ++j) {
    const auto& band = b.bands[static_cast<size_t>(j)];
    if (E < band.first) return j / q;  // gap below band j
    if (E <= band.second) {
      double phi = std::acos(std::clamp(discriminant(seq, E) / 2.0, -1.0, 1.0));
      // the discriminant equals +2 at the top of band j iff q - 1 - j is even
      if ((nb - 1 - j) % 2 == 0) return (j + 1 - phi / kPi) / q;
      return (j + phi / kPi) / q;
    }
  }
  return 1.0;
}

SpectralProfile ids_floquet(const std::vector<double>& seq, const std::vector<double>& E_grid) {
  Bands b = periodic_spectrum_exact(seq);
  SpectralProfile p;
  p.method = "floquet";
  p.E = E_grid;
  p.N.resize(E_grid.size());
  p.err.assign(E_grid.size(), 1e-12);
  for (size_t i = 0; i < E_grid.size(); ++i) p.N[i] = ids_periodic_exact(seq, b, E_grid[i]);
  return p;
}

UHScan spectrum_by_uh_scan(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                           const UHOptions& opts, double edge_tol) {
  UHScan s;
  s.E = E_grid;
  s.outcome.resize(E_grid.size());
  auto is_out = [&](double E) { return uh_test(Cocycle::schrodinger(base, E, v), opts).outcome == UHOutcome::UH; };
  parallel_for(E_grid.size(), [&](size_t i) { s.outcome[i] = uh_test(Cocycle::schrodinger(base, E_grid[i], v), opts).outcome; });
  for (auto o : s.outcome)
    if (o == UHOutcome::Inconclusive) ++s.inconclusive;
  // refine every in/out transition
  auto refine = [&](double a, double b, bool a_out) {
    while (b - a > edge_tol) {
      double mid = 0.5 * (a + b);
      if (is_out(mid) == a_out)
        a = mid;
      else
        b = mid;
    }
    return 0.5 * (a + b);
  };
  const size_t n = E_grid.size();
  size_t i = 0;
  while (i < n) {
    if (s.outcome[i] == UHOutcome::UH) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j + 1 < n && s.outcome[j + 1] != UHOutcome::UH) ++j;
    double lo = i == 0 ? E_grid[0] : refine(E_grid[i - 1], E_grid[i], true);
    double hi = j + 1 == n ? E_grid[n - 1] : refine(E_grid[j], E_grid[j + 1], false);
    s.spectrum.push_back({lo, hi});
    i = j + 1;
  }
  return s;
}

std::vector<Gap> detect_and_label_gaps(const SpectralProfile& p, const LabelGroup& G, int min_steps) {
  std::vector<Gap> gaps;
  const size_t n = p.E.size();
  size_t i = 0;
  while (i < n) {
    double lo = p.N[i], hi = p.N[i], tol = 2 * p.err[i];
    size_t j = i;
    while (j + 1 < n) {
      double nlo = std::fmin(lo, p.N[j + 1]), nhi = std::fmax(hi, p.N[j + 1]);
      double ntol = std::fmax(tol, 2 * p.err[j + 1]);
      if (nhi - nlo > ntol) break;
      lo = nlo;
      hi = nhi;
      tol = ntol;
      ++j;
    }
    double mean = 0.5 * (lo + hi);
    if (static_cast<int>(j - i) >= min_steps && mean > tol && mean < 1 - tol) {
      Gap g;
      g.E_lo = p.E[i];
      g.E_hi = p.E[j];
      g.N = mean;
      auto el = G.nearest(mean);
      g.label = el.value;
      g.k = el.k;
      g.m = el.m.empty() ? 0 : el.m[0];
      g.residual = el.residual;
      g.flagged = !(el.residual <= G.tolerance);
      gaps.push_back(g);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return gaps;
}

void attach_rho(std::vector<Gap>& gaps, const Potential& v, const BaseSystem& base, std::int64_t n, const Point& x0) {
  parallel_for(gaps.size(), [&](size_t i) { gaps[i].rho = rho(Cocycle::schrodinger(base, gaps[i].mid(), v), x0, n).rho; });
}

AlphaSpec AlphaSpec::parse(const std::string& s) {
  AlphaSpec a;
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    a.p = std::stoll(s.substr(0, slash));
    a.q = std::stoll(s.substr(slash + 1));
    if (a.q <= 0) throw std::invalid_argument("alpha: q must be positive");
    a.value = static_cast<double>(a.p) / static_cast<double>(a.q);
  } else {
    a.value = parse_alpha(s);
  }
  return a;
}

std::vector<ButterflyCell> butterfly_sweep(const std::vector<double>& lambdas, const std::vector<AlphaSpec>& alphas,
                                           const std::vector<double>& E_grid, const UHOptions& opts) {
  constexpr int kPhases = 16;
  const size_t NL = lambdas.size(), NA = alphas.size(), NE = E_grid.size();
  // band structure per (lambda, rational alpha, phase)
  std::vector<std::vector<Bands>> bands(NL * NA);
  std::vector<std::string> band_err(NL * NA);
  parallel_for(NL * NA, [&](size_t idx) {
    const double lam = lambdas[idx / NA];
    const AlphaSpec& a = alphas[idx % NA];
    if (a.q == 0) return;
    try {
      for (int j = 0; j < kPhases; ++j) {
        double x = static_cast<double>(j) / (kPhases * static_cast<double>(a.q));
        std::vector<double> seq(static_cast<size_t>(a.q));
        for (std::int64_t k = 0; k < a.q; ++k)
          seq[static_cast<size_t>(k)] = 2 * lam * std::cos(kTwoPi * (x + static_cast<double>((k * a.p) % a.q) / static_cast<double>(a.q)));
        bands[idx].push_back(periodic_spectrum_exact(seq));
      }
    } catch (const std::exception& e) {
      band_err[idx] = e.what();
    }
  });
  std::vector<ButterflyCell> cells(NL * NA * NE);
  parallel_for(cells.size(), [&](size_t c) {
    size_t li = c / (NA * NE), ai = (c / NE) % NA, ei = c % NE;
    ButterflyCell& cell = cells[c];
    cell.lambda = lambdas[li];
    cell.alpha = alphas[ai].value;
    cell.E = E_grid[ei];
    const auto& a = alphas[ai];
    try {
      if (a.q > 0) {
        const auto& bs = bands[li * NA + ai];
        if (!band_err[li * NA + ai].empty()) throw std::runtime_error(band_err[li * NA + ai]);
        cell.in = 0;
        for (const auto& b : bs)
          if (b.contains(cell.E)) {
            cell.in = 1;
            break;
          }
      } else {
        auto out = uh_test(Cocycle::schrodinger(BaseSystem::rotation(a.value), cell.E, amo_potential(cell.lambda)), opts);
        cell.in = out.outcome == UHOutcome::UH ? 0 : out.outcome == UHOutcome::NotUH ? 1 : -1;
        if (cell.in < 0) cell.note = out.reason;
      }
    } catch (const std::exception& e) {
      cell.in = -1;
      cell.note = e.what();
    }
  });
  return cells;
}

}  // namespace cocyclelab
