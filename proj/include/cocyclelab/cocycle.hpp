#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cocyclelab/base_dynamics.hpp"
#include "cocyclelab/mat2.hpp"

namespace cocyclelab {

using MatFn = std::function<Mat2(const Point&)>;
using ScalarFn = std::function<double(const Point&)>;

struct Potential {
  ScalarFn v;
  std::string name;
  std::vector<double> sequence;  // periodic samples, if built by periodic_sampler
  double operator()(const Point& x) const { return v(x); }
};

Potential zero_potential();
Potential constant_potential(double c);
// 2 lambda cos(2 pi x)
Potential amo_potential(double lambda);
// v(x0 + k p/q) = seq[k mod q]
Potential periodic_sampler(const std::vector<double>& seq, std::int64_t p, std::int64_t q, double x0 = 0.0);
// "zero", "const:c", "amo:lambda", "seq:a,b,..." (needs the periodic base for p, q)
Potential parse_potential(const std::string& spec, const BaseSystem& base);

class Cocycle {
 public:
  Cocycle(BaseSystem base, MatFn A, std::string label);
  static Cocycle constant(BaseSystem base, const Mat2& A, std::string label = "constant");
  static Cocycle schrodinger(BaseSystem base, double E, Potential v);

  const BaseSystem& base() const { return base_; }
  Mat2 operator()(const Point& x) const { return A_(x); }
  const MatFn& fn() const { return A_; }
  const std::string& label() const { return label_; }
  const std::optional<Mat2>& constant_value() const { return constant_; }

  bool is_schrodinger() const { return schrodinger_; }
  double energy() const { return E_; }
  const Potential& potential() const { return v_; }
  Cocycle with_energy(double E) const;
  // x -> R_theta A(x)
  Cocycle rotated(double theta) const;

 private:
  BaseSystem base_;
  MatFn A_;
  std::string label_;
  std::optional<Mat2> constant_;
  bool schrodinger_ = false;
  double E_ = 0.0;
  Potential v_;
};

// A^n(x); n < 0 gives the inverse product along the backward orbit.
ScaledMat2 iterate(const Cocycle& c, const Point& x, std::int64_t n);

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t n = 0;
};

Estimate lyapunov_exponent(const Cocycle& c, const Point& x0, std::int64_t n, std::int64_t block);

struct UHOptions {
  int horizon = 1024;
  int grid = 256;
  double lambda_min = 1.01;
  double residual_tol = 1e-8;
  double angle_tol = 1e-10;
  // In periodic mode: number of monodromy squarings replacing the horizon.
  int periodic_squarings = 40;
  double periodic_x0 = 0.0;
};

struct DirectionSample {
  Point x;
  double unstable = 0.0;  // angle in [0, pi)
  double stable = 0.0;
};

struct UHCertificate {
  double c = 0.0;
  double lambda = 1.0;
  std::int64_t horizon = 0;
  std::vector<DirectionSample> fields;
  double residual = 0.0;
  double min_angle = 0.0;
};

enum class UHOutcome { UH, NotUH, Inconclusive };
std::string to_string(UHOutcome o);

struct UHResult {
  UHOutcome outcome = UHOutcome::Inconclusive;
  UHCertificate cert;
  Point witness;
  double growth = 0.0;  // fitted min-growth exponent
  std::string reason;
};

std::vector<Point> sample_grid(const BaseSystem& base, int grid);
UHResult uh_test(const Cocycle& c, const UHOptions& opts = {});

// Projective angles in [0, pi) of the unstable and stable directions at x,
// computed from products of length m.
double unstable_direction(const Cocycle& c, const Point& x, int m);
double stable_direction(const Cocycle& c, const Point& x, int m);

Cocycle conjugate(const Cocycle& c, const MatFn& B);

struct InducedStep {
  Point next;
  ScaledMat2 A;
  std::int64_t r = 0;
};

// First return to the arc [lo, lo+len] of the first coordinate.
class InducedCocycle {
 public:
  InducedCocycle(Cocycle c, double lo, double len, std::int64_t cap = 100000000);
  InducedStep step(const Point& x) const;
  double measure() const { return len_ >= 1.0 ? 1.0 : len_; }
  bool in_Z(const Point& x) const;
  const Cocycle& cocycle() const { return c_; }

 private:
  Cocycle c_;
  double lo_, len_;
  std::int64_t cap_;
};

InducedCocycle induced_cocycle(const Cocycle& c, double lo, double len);
Estimate lyapunov_induced(const InducedCocycle& ic, const Point& x0, std::int64_t returns, std::int64_t block);

// diag(2,1/2) on Z\Y, R_{pi/2} diag(2,1/2) on Y, identity off Z.
Cocycle swap_example(const BaseSystem& base, double z_lo, double z_len, double y_lo, double y_len);

// Pair over the Anzai base (x, y) -> (x + alpha, y + phi(x)), phi = alpha + 0.05 (delta_3 - 1/2):
// A0 = diag(2,1/2) and A1 = R(pi u(fx)) diag(2,1/2) R(-pi u(x)) with u = x - y.
// Both are UH with rotation number 0; the unstable directions have degree 0 and 1 along
// the loop s -> (s, y0).
struct WindingPair {
  Cocycle a0, a1;
  std::function<Point(double)> loop;
};
WindingPair anzai_winding_pair(double alpha = kGolden, double y0 = 0.3);

struct WindingOptions {
  int samples = 256;
  int max_samples = 1 << 16;
  int power_steps = 256;
};
// Degree of the unstable direction along loop(s), s in [0,1], P^1 = R/piZ.
int unstable_winding(const Cocycle& c, const std::function<Point(double)>& loop, const WindingOptions& opts = {});

}  // namespace cocyclelab
