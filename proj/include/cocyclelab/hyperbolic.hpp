#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "cocyclelab/mat2.hpp"

namespace cocyclelab {

using cplx = std::complex<double>;

// Point of the unit disk, |z| < 1 - 1e-12.
class DiskPoint {
 public:
  DiskPoint() = default;
  explicit DiskPoint(cplx z);
  DiskPoint(double x, double y) : DiskPoint(cplx(x, y)) {}
  // z with 1 - |z|^2 known to full relative precision.
  DiskPoint(cplx z, double one_minus_r2);
  cplx z() const { return z_; }
  double one_minus_r2() const { return h_; }

 private:
  cplx z_{0.0, 0.0};
  double h_ = 1.0;
};

// Action through z = (w - i)/(w + i) from the upper half plane.
DiskPoint disk_action(const Mat2& A, const DiskPoint& p);
double hyp_dist(const DiskPoint& p, const DiskPoint& q);

// Point at fraction s in [0,1] of the geodesic segment from a to b.
DiskPoint geodesic_point(const DiskPoint& a, const DiskPoint& b, double s);

// Symmetric positive unimodular M with M.0 = p.
Mat2 spd_to(const DiskPoint& p);

// SL(2,R) matrix M with M.p1 = p2; symmetric positive, so ||M - Id|| <= e^{d/2} - 1.
Mat2 phi_adjust(const DiskPoint& p1, const DiskPoint& p2);

struct PsiResult {
  std::vector<Mat2> mats;
  double distance = 0.0;        // d(A_n...A_1 p, q)
  double step_bound = 0.0;      // e^{distance/(2n)} - 1
  double max_correction = 0.0;  // max ||Ã_i A_i^{-1} - Id||
  double residual = 0.0;        // |Ã_n...Ã_1 p - q|
};

// mats[0] is applied first. Ã_n...Ã_1 p = q with every correction below step_bound.
PsiResult psi_n_adjust(const std::vector<Mat2>& mats, const DiskPoint& p, const DiskPoint& q);

// Open arc of P^1 = R/pi: angles start + (0, length), 0 < length < pi.
struct ProjInterval {
  double start = 0.0;
  double length = 0.0;
  ProjInterval() = default;
  ProjInterval(double s, double l);
  static ProjInterval centered(double mid, double length) { return {mid - 0.5 * length, length}; }
  double midpoint() const { return start + 0.5 * length; }
  // Offset of phi inside the arc, or nullopt if outside.
  std::optional<double> offset(double phi) const;
};

double proj_image(const Mat2& A, double phi);
// Derivative of the induced map on P^1 (angle coordinate).
double proj_derivative(const Mat2& A, double phi);
// Image arc A(I), carried with the orientation.
ProjInterval image(const Mat2& A, const ProjInterval& I);

// Hilbert norm of the tangent dphi at phi in I.
double hilbert_norm(const ProjInterval& I, double phi, double dphi);
double hilbert_dist(const ProjInterval& I, double phi1, double phi2);
// sup over J of ||u||_I / ||u||_J, sampled.
double birkhoff_ratio(const ProjInterval& I, const ProjInterval& J, int samples = 2001);
double birkhoff_bound(const ProjInterval& I, const ProjInterval& J);

// Constants for the rotated-product winding statement at width eps.
struct WindingConstants {
  double eps = 0.0;
  double C1 = 0.0;  // inf of the Hilbert/angle ratio over arcs of length in [eps, pi-eps]
  double C2 = 0.0;  // sup of that ratio at midpoints
  double tau = 0.0; // concentric shrink by eps expands the Hilbert norm at least this much
  double c = 0.0;
  double lambda = 1.0;
};
WindingConstants winding_constants(double eps);

struct WindingSolution {
  bool found = false;
  double theta = 0.0;
  double residual = 0.0;         // |sin| of the angle to w
  double log_product_norm = 0.0;  // log ||A_{n-1}...A_0 v|| for unit v
  double log_norm_bound = 0.0;    // log(c lambda^n)
  bool crosscheck_ok = true;      // NoSolution implies the product norm reaches the bound
  WindingConstants constants;
};

// theta in [-eps, eps] with R A_{n-1} R ... A_0 R v parallel to w, R = R_theta.
WindingSolution winding_solve(const std::vector<Mat2>& mats, double v_angle, double w_angle, double eps);
// Same, with precomputed constants.
WindingSolution winding_solve(const std::vector<Mat2>& mats, double v_angle, double w_angle,
                              const WindingConstants& k);
// Continuous increasing lift of theta -> angle of the interleaved product applied to v.
double winding_lift(const std::vector<Mat2>& mats, double v_angle, double theta);

}  // namespace cocyclelab
