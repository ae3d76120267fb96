#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cocyclelab/base_dynamics.hpp"
#include "cocyclelab/cocycle.hpp"
#include "cocyclelab/hyperbolic.hpp"
#include "cocyclelab/towers.hpp"

namespace cocyclelab {

// c0 + sum a cos(2 pi k x) + b sin(2 pi k x), in the first coordinate.
struct TrigPolynomial {
  struct Term {
    int k = 1;
    double a = 0.0, b = 0.0;
  };
  double c0 = 0.0;
  std::vector<Term> terms;

  double operator()(double x) const;
  // sum_{m<j} (p(x + m alpha) - c0), closed form.
  double centered_sum(const BaseSystem& base, double x, std::int64_t j) const;
  // sup over x of |centered_sum(x, j)| and its sup over all j.
  double centered_sup(const BaseSystem& base, std::int64_t j) const;
  double centered_bound(const BaseSystem& base) const;
};

struct Observable {
  ScalarFn f;
  std::optional<TrigPolynomial> trig;

  static Observable of(TrigPolynomial p);
  static Observable of(ScalarFn f);
  double operator()(const Point& x) const { return f(x); }
  // sum_{m<j} (g(f^m x) - c)
  double centered_sum(const BaseSystem& base, const Point& x, std::int64_t j, double c) const;
};

// Smallest j in [0, J) with wrap01(rotate(x1, j) - a) in (0, L) (open) or [0, L], or -1.
std::int64_t first_rotation_hit(const BaseSystem& base, double x1, double a, double L, std::int64_t J, bool open);

// (x, w) -> (fx, w + g(x) - c) on reals, or (x, z) -> (fx, A(x) z) on the disk.
// Fiber values are complex; the real line uses the real part.
class SkewProduct {
 public:
  enum class Kind { RealLine, Disk };
  static SkewProduct real_line(BaseSystem base, Observable g, double c);
  static SkewProduct disk(Cocycle A);

  Kind kind() const { return kind_; }
  const BaseSystem& base() const { return base_; }
  cplx push(const Point& x, std::int64_t l, cplx y) const;
  // (F^l_x)^{-1} y
  cplx pull(const Point& x, std::int64_t l, cplx y) const;
  double M(cplx y) const;
  // Point at fraction s from a to b; segments in the disk are geodesics.
  cplx interpolate(cplx a, cplx b, double s) const;
  // max over j in [1, N] and over j in [n, N] of |M(F^j_x y) - M(y)|, sup over the mesh
  // (closed form for trigonometric real-line fibers).
  std::pair<double, double> triple_norms(std::int64_t n, std::int64_t N, const std::vector<Point>& mesh,
                                         int max_j_samples) const;

  const Observable& g() const { return g_; }
  double c() const { return c_; }
  const Cocycle& cocycle() const { return *A_; }

 private:
  Kind kind_ = Kind::RealLine;
  BaseSystem base_;
  Observable g_;
  double c_ = 0.0;
  std::shared_ptr<Cocycle> A_;
};

enum class LambdaSet { Empty, Whole };

using FiberFn = std::function<cplx(const Point&)>;

struct SectionOptions {
  int mesh = 2048;
  int local_points = 16;  // extra mesh points per knot interval inside K and around it
  int max_j_samples = 256;
  double invariance_tol = 1e-9;
  bool check = true;
};

struct SectionReport {
  std::vector<Point> mesh;
  std::vector<cplx> y;
  std::vector<double> residual;  // |F_x(y(x)) - y(fx)|
  std::vector<char> interior;
  std::int64_t n = 0, N = 0;
  int d = 1;
  double M_sup = 0.0;
  double M_sup_y0 = 0.0;
  double A_nN = 0.0;  // max_{j in [n,N]} |||F^j|||_M
  double A_1N = 0.0;  // max over all j in [1, N]
  double bound = 0.0;        // sup M(y0) + d A_nN
  double bound_all_j = 0.0;  // sup M(y0) + d A_1N
  double bound_proof = 0.0;  // sup M(y0) + A_nN + A_1N, what the knot construction guarantees for d = 1
  double max_residual_outside = 0.0;
  double max_residual_inside = 0.0;
  double max_lambda_gap = 0.0;
  bool support_ok = false;
  bool lambda_ok = false;
  bool bound_ok = false;
  bool bound_all_j_ok = false;
  bool bound_proof_ok = false;
  std::int64_t ell_lo = 0, ell_hi = 0;  // entry times of the two endpoints of K
  std::vector<double> knots;             // offsets 0, e, e', L
  bool ok() const { return support_ok && lambda_ok && bound_proof_ok; }
};

class Section {
 public:
  cplx operator()(const Point& x) const;
  // Value at a point of K through the knots on its vertical.
  cplx interior_value(const Point& z) const;
  const SectionReport& report() const { return *report_; }
  const Tower& tower() const;
  const SkewProduct& skew() const;

 private:
  friend Section almost_invariant_section(const SkewProduct&, const Tower&, LambdaSet, FiberFn,
                                          const SectionOptions&);
  struct State;
  std::shared_ptr<const State> s_;
  std::shared_ptr<SectionReport> report_;
};

class SectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Section supported in int K agreeing with y0 on Lambda; throws SectionError when
// the mesh cannot resolve the knots.
Section almost_invariant_section(const SkewProduct& F, const Tower& K, LambdaSet lambda, FiberFn y0,
                                 const SectionOptions& opts = {});

// ---- cohomological equation phi = psi o f - psi + c ----

struct CobOptions {
  double eps = 1e-3;
  std::int64_t min_n = 5;
  std::int64_t max_n = 60000000;
  int mesh = 2048;         // quadrature and sup estimates for generic observables
  int growth_horizon = 4096;
  int max_retries = 6;
};

struct CobSolution {
  double c = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double B = 0.0;            // sup |S_j - jc| (closed form or measured)
  std::int64_t j0 = 0;
  std::int64_t n = 1, N = 1;
  Tower tower;
  bool boundary = false;     // returned the given exact solution
  double sup_change = 0.0;   // sup |phi~ - phi| on the check mesh
  double residual = 0.0;     // sup |phi~ - (psi~ o f - psi~ + c)| on the check mesh
  ScalarFn phi_tilde, psi_tilde;
  std::shared_ptr<const Section> section;
};

CobSolution solve_cohomological(const BaseSystem& base, const Observable& phi, const CobOptions& opts = {});
// T* = T: the data already solve the equation.
CobSolution cohomological_boundary(const BaseSystem& base, const Observable& phi, ScalarFn psi, double c);

double mesh_mean(const BaseSystem& base, const ScalarFn& g, int mesh);
// Periodic (bi)linear interpolation of g from a uniform table of side points per coordinate.
Observable tabulate(const BaseSystem& base, const ScalarFn& g, int side);

// Parameter family phi(t, .) on a finite parameter sample with T* given by flags.
struct FamilyPoint {
  double t = 0.0;
  Observable phi;
  std::optional<ScalarFn> psi;  // boundary data for t in T*
};
struct FamilySolution {
  std::vector<double> t;
  std::vector<double> c, sigma, sup_change, residual;
  std::vector<ScalarFn> phi_tilde, psi_tilde;
  double radius = 0.0;
};
FamilySolution solve_cohomological_family(const BaseSystem& base, const std::vector<FamilyPoint>& pts,
                                          const std::function<double(double)>& eps, const CobOptions& opts = {});

// T = (0,1], T* empty, phi independent of t: nodes 2^-i, i = 0..levels, solved with
// eps(2^-i); linear blend between nodes, the last stage below 2^-levels.
class CobPath {
 public:
  CobPath(BaseSystem base, Observable phi, const std::function<double(double)>& eps, int levels,
          CobOptions opts = {});
  double phi_tilde(double t, const Point& x) const;
  double psi_tilde(double t, const Point& x) const;
  double c(double t) const;
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<CobSolution>& stages() const { return stages_; }

 private:
  std::pair<size_t, double> locate(double t) const;
  std::vector<double> nodes_;
  std::vector<CobSolution> stages_;
};

// ---- reduction to rotations ----

struct ConjRotOptions {
  int mesh = 512;
  int growth_horizon = 4096;
  std::int64_t min_n = 5;
  SectionOptions section;
};

struct ConjRotResult {
  bool refused = false;
  std::string reason;
  double C = 0.0, gamma = 0.0, growth = 0.0, C1 = 0.0;
  std::int64_t n0 = 0, n = 0, N = 0;
  std::vector<std::pair<std::int64_t, double>> growth_curve;  // (n, sup log||A^n||/n)
  Tower tower;
  std::optional<Cocycle> perturbed;
  MatFn B;
  FiberFn z_tilde;
  double sup_change = 0.0;       // sup ||c~ - c|| on the mesh
  double rotation_residual = 0.0; // sup ||M M^T - I|| with M = B(fx) c~(x) B(x)^{-1}
  double invariance_residual = 0.0;
  double max_correction = 0.0;
  SectionReport section;
};

ConjRotResult conjugate_to_rotations(const Cocycle& c, double eps, const ConjRotOptions& opts = {},
                                     std::optional<FiberFn> invariant_section = std::nullopt);

// ---- UH to constant hyperbolic ----

struct ReduceOptions {
  std::vector<double> t_grid = {1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  double eps_scale = 0.02;  // eps(t) = eps_scale * t
  int frame_steps = 48;
  int mesh = 512;
  UHOptions uh;
  CobOptions cob;
};

struct ReducePoint {
  double t = 0.0;
  double sup_dist = 0.0;            // sup_x dist_PSL(A_t(x), A(x))
  double conjugation_residual = 0.0; // sup_x dist_PSL(B_t(fx) A_t(x) B_t(x)^{-1}, D)
};

struct ReduceResult {
  bool refused = false;
  std::string reason;
  double c = 0.0;          // mean of phi
  double lyapunov = 0.0;   // independent estimate
  double lyapunov_err = 0.0;
  double frame_residual = 0.0;  // sup dist_PSL(A(x), B(fx)^{-1} Delta(phi(x)) B(x))
  std::vector<ReducePoint> path;
  bool monotone = false;
  std::function<Mat2(double, const Point&)> A_t, B_t;
  MatFn B;
  ScalarFn phi;
};

ReduceResult reduce_uh_to_constant(const Cocycle& c, const ReduceOptions& opts = {});

}  // namespace cocyclelab
