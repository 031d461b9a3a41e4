#include "semibloch/extpotential.hpp"

#include <algorithm>
#include <cmath>

namespace semibloch {

ExtPotential ExtPotential::zero() {
  return ExtPotential([](double, const Point&) { return 0.0; }, 0.0, false, "zero");
}

ExtPotential ExtPotential::constant(double c) {
  return ExtPotential([c](double, const Point&) { return c; }, 0.0, false, "constant");
}

ExtPotential ExtPotential::cosine(double amplitude, int box, int axis, int harmonic) {
  double k = kTwoPi * harmonic / box;
  return ExtPotential([=](double, const Point& x) { return amplitude * std::cos(k * x[std::size_t(axis)]); },
                      std::abs(k), false, "cosine");
}

ExtPotential ExtPotential::pulsed_cosine(double amplitude, int box, double omega, int axis, int harmonic) {
  double k = kTwoPi * harmonic / box;
  return ExtPotential(
      [=](double t, const Point& x) { return amplitude * std::cos(k * x[std::size_t(axis)]) * std::cos(omega * t); },
      std::abs(k), true, "pulsed_cosine");
}

VectorXd ExtPotential::sample(const Grid& g, double t) const {
  VectorXd out(Eigen::Index(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out[Eigen::Index(i)] = fn_(t, g.point(i));
  return out;
}

VectorXd ExtPotential::sample_line(const Grid& line, double t, const Point& v, int axis) const {
  VectorXd out(line.n);
  for (int j = 0; j < line.n; ++j) {
    Point x = v;
    x[std::size_t(axis)] += line.x(j);
    out[j] = fn_(t, x);
  }
  return out;
}

double ExtPotential::sup_norm(const Grid& g, double t0, double t1, int samples) const {
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    double t = samples == 1 ? t0 : t0 + (t1 - t0) * s / (samples - 1);
    worst = std::max(worst, sample(g, t).cwiseAbs().maxCoeff());
    if (!time_dependent_) break;
  }
  return worst;
}

double ExtPotential::lipschitz_in_time(const Grid& g, double t0, double t1, int samples) const {
  if (!time_dependent_ || samples < 2 || t1 <= t0) return 0.0;
  double worst = 0.0;
  double dt = (t1 - t0) / (samples - 1);
  VectorXd prev = sample(g, t0);
  for (int s = 1; s < samples; ++s) {
    VectorXd cur = sample(g, t0 + s * dt);
    worst = std::max(worst, (cur - prev).cwiseAbs().maxCoeff() / dt);
    prev = std::move(cur);
  }
  return worst;
}

}  // namespace semibloch
