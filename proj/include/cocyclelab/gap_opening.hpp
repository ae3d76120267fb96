#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cocyclelab/cocycle.hpp"
#include "cocyclelab/spectrum.hpp"

namespace cocyclelab {

// A perturbation of the constant cocycle S_0 supported in an arc K of the first coordinate,
// with a neighbourhood K' of K whose first three iterates are disjoint from it.
struct LocalizedPerturbation {
  BaseSystem base;
  double k_lo = 0.0, k_len = 0.0;
  double kp_lo = 0.0, kp_len = 0.0;
  MatFn A_hat;
  ScalarFn bump;  // 1 on K, 0 off K', linear in between

  // A_hat = S_0 exp(size * tent_K(x) * G) for G traceless with max entry 1; K' = K grown by margin.
  static LocalizedPerturbation tent(BaseSystem base, double k_lo, double k_len, double margin, double size,
                                    Mat2 G = {0.0, 1.0, 0.0, 0.0});
  // Same with the exponent constant on K (discontinuous at the ends of K).
  static LocalizedPerturbation constant_on_K(BaseSystem base, double k_lo, double k_len, double margin, double size,
                                             Mat2 G = {0.0, 1.0, 0.0, 0.0});
  bool in_K(const Point& x) const;
  bool in_Kp(const Point& x) const;
};

struct ProjectionOptions {
  int mesh = 4096;
  int floor_points = 512;  // extra mesh points on each floor f^i(K')
};

struct ProjectionResult {
  bool refused = false;
  std::string reason;
  double perturbation_size = 0.0;  // sup ||A_hat - S_0||
  double E = 0.0;                  // sup ||A_hat^4 - id||^(1/2)
  double min_denominator = 0.0;    // min over K' of min(|1 + d|, |1 - d|)
  std::array<ScalarFn, 4> E_i;     // on K'
  MatFn phi_image;
  MatFn psi;
  double s_form_residual = 0.0;        // sup distance of the floor values from the S_t shape
  double conjugation_residual = 0.0;   // sup ||psi(fx) A_hat(x) psi(x)^-1 - phi_image(x)||
  double image_distance = 0.0;         // sup ||phi_image - S_0||
  double psi_distance = 0.0;           // sup ||psi - id||
  bool off_tower_exact = false;        // phi_image == S_0 and psi == id bit for bit off the tower
  std::int64_t mesh_size = 0;
};

ProjectionResult project_to_schrodinger(const LocalizedPerturbation& p, const ProjectionOptions& opts = {});

// ---- gap opening along a potential path ----

enum class ProfileMethod { Rotation, Eigencount, Floquet };

struct OpenGapOptions {
  double E_lo = -3.0, E_hi = 3.0;
  int E_steps = 1201;
  ProfileMethod method = ProfileMethod::Rotation;
  std::int64_t n = 20000;      // orbit length for the rotation route
  std::int64_t L = 2000;       // box size for the eigencount route
  std::int64_t rho_n = 100000;
  int min_steps = 3;
  double label_tol = 5e-3;
  bool refine = true;          // recheck open gaps on a grid twice as fine
  Point x0 = Point(0.0);
};

struct OpenGapRow {
  double t = 0.0;
  bool open = false;
  Gap gap;                      // valid when open
  double width = 0.0;
  double label_residual = 0.0;  // |measured N - target|
  double profile_error = 0.0;   // max(E step, sup err of N)
  double resolution = 0.0;      // E step
  double rho = 0.0;
  bool resolution_ok = true;    // the finer grid keeps the gap
  double refined_width = 0.0;
  std::string note;
  SpectralProfile profile;
};

struct OpenGapReport {
  double target = 0.0;
  std::string method;
  std::vector<OpenGapRow> rows;
};

using PotentialPath = std::function<Potential(double)>;

OpenGapReport open_gap_demo(const BaseSystem& base, const PotentialPath& path, double label,
                            const std::vector<double>& t_grid, const OpenGapOptions& opts = {});

struct RhoAudit {
  double expected = 0.0;  // (1 - label) / 2
  std::vector<double> t, rho;
  std::vector<double> missing_t;
  double spread = 0.0;    // max - min over open t
  double max_deviation = 0.0;
  bool complete = false;  // every t had an open gap
  bool constant = false;  // spread and deviation within tol
};

RhoAudit rho_constancy_audit(const OpenGapReport& report, double tol = 5e-3);

}  // namespace cocyclelab
