#pragma once

#include "semibloch/wavefield.hpp"

#include <functional>
#include <string>

namespace semibloch {

// Smooth, bounded, real external potential V_ext(t, x) on the periodic box.
class ExtPotential {
public:
  using Fn = std::function<double(double t, const Point& x)>;

  ExtPotential() : ExtPotential(zero()) {}
  ExtPotential(Fn fn, double bandwidth, bool time_dependent, std::string name)
      : fn_(std::move(fn)), bandwidth_(bandwidth), time_dependent_(time_dependent), name_(std::move(name)) {}

  static ExtPotential zero();
  static ExtPotential constant(double c);
  // amplitude * cos(2 pi harmonic x_axis / box)
  static ExtPotential cosine(double amplitude, int box, int axis = 0, int harmonic = 1);
  // amplitude * cos(2 pi harmonic x_axis / box) * cos(omega t)
  static ExtPotential pulsed_cosine(double amplitude, int box, double omega, int axis = 0, int harmonic = 1);

  double operator()(double t, const Point& x) const { return fn_(t, x); }
  VectorXd sample(const Grid& g, double t) const;
  // Restriction to the line x = v + z e_axis, sampled on a 1-D grid in z.
  VectorXd sample_line(const Grid& line, double t, const Point& v, int axis) const;

  double bandwidth() const { return bandwidth_; }
  bool time_dependent() const { return time_dependent_; }
  const std::string& name() const { return name_; }
  bool is_zero() const { return name_ == "zero"; }

  double sup_norm(const Grid& g, double t0, double t1, int samples = 9) const;
  // Finite-difference estimate of sup_x |V(t) - V(s)| / |t - s| over [t0, t1].
  double lipschitz_in_time(const Grid& g, double t0, double t1, int samples = 33) const;

private:
  Fn fn_;
  double bandwidth_ = 0.0;
  bool time_dependent_ = false;
  std::string name_;
};

}  // namespace semibloch
