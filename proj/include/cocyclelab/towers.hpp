#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cocyclelab/base_dynamics.hpp"

namespace cocyclelab {

// Closed arc K = [lo, lo+len] on the first (rotation factor) coordinate.
struct Tower {
  double lo = 0.0;
  double len = 1.0;
  std::int64_t n = 1;
  std::int64_t N = 1;
  int d = 1;
  bool certified = false;
  std::int64_t grid_size = 0;
  int cf_index = -1;       // convergent used, -1 for K = X
  int lifted_dim = 1;      // dimension of the system the tower lives on
  std::vector<std::int64_t> cf_terms;
  double alpha = 0.0;

  bool whole() const { return len >= 1.0; }
  double hi() const { return lo + len; }
  // Offset of x above lo, in [0,1).
  double offset(double x) const { return wrap01(x - lo); }
  bool contains(const Point& p) const { return whole() || offset(p[0]) <= len; }
  bool in_interior(const Point& p) const {
    if (whole()) return true;
    double u = offset(p[0]);
    return u > 0.0 && u < len;
  }
};

struct CertificationReport {
  bool good = false;
  bool spanning = false;
  bool mild = false;
  bool bound_ok = false;   // N <= (d+2)n - 1
  bool grid_meets_10N = false;
  std::int64_t grid_size = 0;
  int max_boundary_hits = 0;
  std::vector<std::string> violations;
  std::vector<double> witnesses;
  bool pass() const { return good && spanning && mild && bound_ok; }
};

class CertificationError : public std::runtime_error {
 public:
  CertificationError(const std::string& what, CertificationReport r)
      : std::runtime_error(what), report(std::move(r)) {}
  CertificationReport report;
};

// grid_size = 0 picks min(max(10N, 1e5), 2e7).
Tower build_rotation_tower(const BaseSystem& sys, std::int64_t n_target, std::int64_t grid_size = 0);
Tower lift_tower_through_factor(const Tower& t, const BaseSystem& target);
CertificationReport certify(const BaseSystem& sys, const Tower& t, std::int64_t grid_size);

// First j >= 0 with f^j(x) in int K, or -1 if none within cap.
std::int64_t entry_time(const BaseSystem& sys, const Tower& t, const Point& x, std::int64_t cap);

}  // namespace cocyclelab
