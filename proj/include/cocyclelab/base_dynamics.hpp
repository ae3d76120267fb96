#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cocyclelab {

// Reduce to [0,1); 1.0 after rounding maps to 0.
double wrap01(double x);
// min(|a-b|, 1-|a-b|) on R/Z
double circle_dist(double a, double b);

struct Point {
  std::array<double, 3> c{};
  int dim = 1;

  Point() = default;
  explicit Point(double x) : c{x, 0, 0}, dim(1) {}
  Point(double x, double y) : c{x, y, 0}, dim(2) {}
  Point(double x, double y, double z) : c{x, y, z}, dim(3) {}
  double operator[](int i) const { return c[static_cast<size_t>(i)]; }
  double& operator[](int i) { return c[static_cast<size_t>(i)]; }
  double x() const { return c[0]; }
};

double torus_dist(const Point& a, const Point& b);

using CircleFn = std::function<double(double)>;

// Tent wave: twice the distance from k*x to Z.
CircleFn anzai_delta(int k);

struct ContinuedFraction {
  std::vector<std::int64_t> terms;  // a0; a1, a2, ...
  std::vector<std::int64_t> p, q;   // convergents p_k/q_k
  static ContinuedFraction of_double(double x, int max_terms = 60);
  static ContinuedFraction from_terms(const std::vector<std::int64_t>& terms);
  double value() const;
  // Index of the first convergent with q_k >= n, or -1.
  int first_index_with_q_at_least(std::int64_t n) const;
};

enum class BaseKind { Rotation, Torus, SkewShift, Anzai };
std::string to_string(BaseKind k);

struct BaseOptions {
  bool periodic_mode = false;
  std::int64_t rational_denominator_bound = 1000;
  double rational_tolerance = 1e-12;
};

class BaseSystem {
 public:
  static BaseSystem rotation(double alpha, BaseOptions opts = {});
  static BaseSystem rotation_cf(const std::vector<std::int64_t>& terms, BaseOptions opts = {});
  // Rotation by p/q in periodic mode.
  static BaseSystem periodic(std::int64_t p, std::int64_t q);
  static BaseSystem torus(const std::vector<double>& alphas, BaseOptions opts = {});
  static BaseSystem skew_shift(double alpha, BaseOptions opts = {});
  static BaseSystem anzai(double alpha, CircleFn phi, std::string phi_name, BaseOptions opts = {});

  BaseKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double alpha() const { return alphas_[0]; }
  const std::vector<double>& alphas() const { return alphas_; }
  bool periodic_mode() const { return periodic_; }
  std::int64_t period_p() const { return p_; }
  std::int64_t period_q() const { return q_; }
  const ContinuedFraction& cf() const { return cf_; }
  const std::string& phi_name() const { return phi_name_; }
  double phi(double x) const { return phi_(x); }

  Point step(const Point& x) const;
  Point step_inverse(const Point& x) const;
  // f^n(x); exact jump for rotations, loop otherwise.
  Point iterate(const Point& x, std::int64_t n) const;
  // Rotation by n*alpha on the first coordinate, computed with one rounding.
  double rotate(double x, std::int64_t n) const;

  Point make_point(const std::vector<double>& coords) const;
  void check_dim(const Point& x) const;
  std::string describe() const;

 private:
  BaseKind kind_ = BaseKind::Rotation;
  int dim_ = 1;
  std::vector<double> alphas_;
  CircleFn phi_;
  std::string phi_name_;
  ContinuedFraction cf_;
  bool periodic_ = false;
  std::int64_t p_ = 0, q_ = 0;
};

// Parse "rotation:golden", "rotation:0.3", "rotation:1/2", "rotation:cf:0,2,1,1",
// "torus:golden,sqrt2", "skewshift:golden", "anzai:golden:delta3".
BaseSystem parse_system(const std::string& spec);
double parse_alpha(const std::string& s);

struct OrbitBuffer {
  Point start;
  std::vector<Point> points;
};
OrbitBuffer make_orbit(const BaseSystem& sys, const Point& x0, std::size_t length);

double birkhoff_average(const BaseSystem& sys, const std::function<double(const Point&)>& g, const Point& x0,
                        std::int64_t n);

inline constexpr double kGolden = 0.6180339887498949;  // (sqrt 5 - 1)/2

}  // namespace cocyclelab
