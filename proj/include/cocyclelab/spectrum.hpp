#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cocyclelab/cocycle.hpp"

namespace cocyclelab {

// Z + sum_i g_i Z searched over |coefficients| <= window.
struct LabelGroup {
  std::vector<double> generators;  // besides 1
  int window = 50;
  double tolerance = 5e-3;

  struct Element {
    double value = 0.0;
    std::int64_t k = 0;           // coefficient of 1
    std::vector<std::int64_t> m;  // coefficients of the generators
    double residual = 0.0;
  };
  // Element of the group in (0,1) nearest to x.
  Element nearest(double x) const;
  // Z + alpha Z for rotation, skew-shift and Anzai bases (the first coordinate), the frequency
  // vector for tori; alpha = p/q in periodic mode.
  static LabelGroup for_base(const BaseSystem& base);
};

struct Gap {
  double E_lo = 0.0, E_hi = 0.0;
  double N = 0.0;  // measured plateau value
  double label = 0.0;
  std::int64_t k = 0, m = 0;
  double residual = 0.0;
  bool flagged = false;  // residual above the group tolerance
  double rho = 0.0;      // rotation number at the midpoint, if attached
  double width() const { return E_hi - E_lo; }
  double mid() const { return 0.5 * (E_lo + E_hi); }
};

struct SpectralProfile {
  std::vector<double> E;
  std::vector<double> N;
  std::vector<double> err;
  std::string method;  // eigencount | rotation | floquet
  std::vector<Gap> gaps;
};

std::vector<double> linspace(double a, double b, int count);

// Sturm count of the Dirichlet restriction to sites 0..L-1 along the orbit of x0, divided by L.
double eigencount_fraction(const std::vector<double>& v, double E);
SpectralProfile ids_by_eigencount(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                                  std::int64_t L, const Point& x0);
// N = 1 - 2 rho(A_E); err = 2 * rho error.
SpectralProfile ids_by_rotation(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                                std::int64_t n, const Point& x0);

// Trace of S_{E - v_{q-1}} ... S_{E - v_0}.
double discriminant(const std::vector<double>& seq, double E);

struct Bands {
  std::vector<std::pair<double, double>> bands;  // q bands in increasing order, possibly touching
  std::vector<std::pair<double, double>> gaps;   // open gaps between consecutive bands
  bool contains(double E) const;
};
// Band edges from the periodic and antiperiodic matrices, polished by bisection on the discriminant.
Bands periodic_spectrum_exact(const std::vector<double>& seq);
// Exact IDS of the periodic operator.
double ids_periodic_exact(const std::vector<double>& seq, const Bands& b, double E);
SpectralProfile ids_floquet(const std::vector<double>& seq, const std::vector<double>& E_grid);

struct UHScan {
  std::vector<double> E;
  std::vector<UHOutcome> outcome;
  // maximal runs of non-UH energies, endpoints refined by bisection when requested
  std::vector<std::pair<double, double>> spectrum;
  int inconclusive = 0;
};
UHScan spectrum_by_uh_scan(const Potential& v, const BaseSystem& base, const std::vector<double>& E_grid,
                           const UHOptions& opts = {}, double edge_tol = 1e-9);

// Plateaus of N over at least min_steps grid steps with variation <= 2 err, away from 0 and 1.
std::vector<Gap> detect_and_label_gaps(const SpectralProfile& p, const LabelGroup& G, int min_steps = 3);
// Fills Gap::rho with the rotation number of A_E at each gap midpoint.
void attach_rho(std::vector<Gap>& gaps, const Potential& v, const BaseSystem& base, std::int64_t n, const Point& x0);

struct AlphaSpec {
  double value = 0.0;
  std::int64_t p = 0, q = 0;  // q = 0: irrational, use the UH scan
  static AlphaSpec parse(const std::string& s);
};

struct ButterflyCell {
  double lambda = 0.0;
  double alpha = 0.0;
  double E = 0.0;
  int in = -1;  // 1 in spectrum, 0 out, -1 failed or inconclusive
  std::string note;
};

// Almost Mathieu spectra over (lambda, alpha, E). Rational alpha: union over 16 phases per 1/q of
// |discriminant| <= 2. Irrational alpha: UH test.
std::vector<ButterflyCell> butterfly_sweep(const std::vector<double>& lambdas, const std::vector<AlphaSpec>& alphas,
                                           const std::vector<double>& E_grid, const UHOptions& opts = {});

}  // namespace cocyclelab
