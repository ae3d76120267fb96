#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cocyclelab/cocycle.hpp"

namespace cocyclelab {

// Vector lift in turns: F(x, t) = t + (polar(x) + inc)/2pi, where polar is a continuous
// determination of the polar angle of A(x) and inc in (-1/4, 1/4) turn comes from the
// positive factor. F(x, t+1) = F(x, t) + 1.
class Lift {
 public:
  explicit Lift(const Cocycle& c, double theta = 0.0);
  // Advances (x, t) one step; (vx, vy) is the unit vector at angle t.
  double step(const Point& x, double t) const;
  double polar(const Point& x) const;
  const std::string& normalization() const { return tag_; }
  const Cocycle& cocycle() const { return c_; }
  double theta() const { return theta_; }

 private:
  Cocycle c_;
  double theta_;
  std::string tag_;
  // continuous determination: polar angle taken in (cut, cut + 2 pi]
  double cut_ = -kPi;
  // 1D unwrapped table (empty if the cut is used)
  std::vector<double> table_;
};

struct RotationEstimate {
  double rho = 0.0;
  std::int64_t n = 0;
  double error = 0.0;
  std::string determination;  // normalization tag; values are defined mod the group of integers
};

RotationEstimate rho(const Cocycle& c, const Point& x0, std::int64_t n, double t0 = 0.0);
RotationEstimate rho(const Lift& lift, const Point& x0, std::int64_t n, double t0 = 0.0);

struct ProfilePoint {
  double theta = 0.0;
  double rho = 0.0;
  double err = 0.0;
};
struct Profile {
  std::vector<ProfilePoint> points;
  bool monotone = true;                // no decrease beyond 3x the error bars
  std::vector<size_t> violations;      // indices i with rho[i+1] < rho[i] - 3 err
};

// theta -> rho(R_theta A), evaluated in parallel.
Profile rho_profile(const Cocycle& c, const std::vector<double>& thetas, const Point& x0, std::int64_t n);

enum class Locking { Locked, SemiLocked, Unlocked, Inconclusive };
std::string to_string(Locking l);

struct LockingOptions {
  double h = 0.05;
  std::int64_t n = 100000;
  UHOptions uh{};
  Point x0 = Point(0.1234);  // padded to the base dimension
};

struct LockingEvidence {
  Locking verdict = Locking::Inconclusive;
  double rho0 = 0.0, err0 = 0.0;
  // rho(theta) - rho(0) at -h, +h (coarse) and -h/4, +h/4 (fine)
  double d_left = 0.0, d_right = 0.0, d_left_fine = 0.0, d_right_fine = 0.0;
  double err_coarse = 0.0, err_fine = 0.0;
  std::string left, right;  // "flat", "increasing", "unclear"
  UHOutcome uh = UHOutcome::Inconclusive;
  bool agrees_with_uh = false;  // Locked <=> UH
};

LockingEvidence classify_locking(const Cocycle& c, const LockingOptions& opts = {});

// Distance from value to the group Z + sum alpha_i Z of the base (|k_i| <= kmax), or to (1/q)Z
// for a periodic base.
double group_residual(double value, const BaseSystem& base, int kmax = 50);

struct CuratedCocycle {
  std::string name;
  Cocycle c;
  Locking expected;
};
// Hand-picked cocycles with known locking behaviour.
std::vector<CuratedCocycle> curated_locking_set();

}  // namespace cocyclelab
