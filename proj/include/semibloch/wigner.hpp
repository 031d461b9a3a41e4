#pragma once

#include "semibloch/dynamics.hpp"
#include "semibloch/wavefield.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace semibloch {

// Discrete Wigner transform of a 1-D field. Rows are x_j (every `stride`-th grid point),
// columns the half-lattice xi_s = eps pi s / L, s in [-N, N). Cell values are densities:
// sum_j sum_s W h dxi = ||f||^2, with both marginals exact.
struct WignerGrid {
  double eps = 0.0;
  int box = 0;
  int n = 0;
  int stride = 1;
  VectorXd x;
  VectorXd xi;
  MatrixXd w;  // rows x, columns xi
  double imag_residue = 0.0;

  double dx() const { return double(box) / n * stride; }
  double dxi() const { return eps * kPi / box; }
  double mass() const { return w.sum() * dx() * dxi(); }
};

WignerGrid wigner_transform(const WaveField& f, int stride = 1);

// Momentum density on the half-lattice (nonzero on even s only), |f(Xi_m)|^2 / (L dxi).
VectorXd momentum_marginal(const WaveField& f);

// Phase-space observable for Weyl quantization.
struct PhaseSymbol {
  // General symbol a(x, xi) (d = 1 only).
  std::function<double(const Point&, const Wavevector&)> general;
  // x-separable form phi(x) g(xi), any d.
  std::function<double(const Point&)> phi;
  std::function<double(const Wavevector&)> g;
  // Optional xi-interval outside which the general symbol vanishes (lets rows be skipped).
  std::optional<std::pair<double, double>> xi_support;

  static PhaseSymbol of(std::function<double(const Point&, const Wavevector&)> a,
                        std::optional<std::pair<double, double>> support = {});
  static PhaseSymbol separable(std::function<double(const Point&)> phi, std::function<double(const Wavevector&)> g);
  bool is_separable() const { return bool(phi); }
  double operator()(const Point& x, const Wavevector& xi) const { return is_separable() ? phi(x) * g(xi) : general(x, xi); }
};

// op_eps(a) f with the midpoint rule <e_m', op e_m> = a^(Xi_m' - Xi_m, eps (Xi_m + Xi_m') / 2) / L^d.
WaveField weyl_apply(const PhaseSymbol& a, const WaveField& f);

// sum W a over the Wigner grid (same discretization as weyl_apply, so the pairing identity is exact).
double wigner_pairing(const WignerGrid& w, const PhaseSymbol& a);

// (op_eps(a) f, f)
double weyl_expectation(const PhaseSymbol& a, const WaveField& f);

// tail(R) = mass at |Xi| > R / eps for each R.
std::vector<double> oscillation_tail(const WaveField& f, const std::vector<double>& radii);

// chi(eta) = 1 on |eta| <= 1, 0 on |eta| >= 2, quintic C^2 transition.
double cutoff_chi(double r);

// Two-scale observable a(x, xi, eta) = phi(x) b(xi, eta), with b(xi, eta) = b_inf(xi, eta / |eta|) for |eta| > r0.
struct TwoMicroObservable {
  std::function<double(const Point&)> phi;
  std::function<double(const Wavevector&, const Wavevector&)> core;
  std::function<double(const Wavevector&, const Wavevector&)> tail;
  double r0 = 1.0;

  double operator()(const Point& x, const Wavevector& xi, const Wavevector& eta) const {
    return phi(x) * core(xi, eta);
  }
  // max |b(xi, eta) - b_inf(xi, eta / |eta|)| at |eta| = 2 r0 and 4 r0 over sampled directions.
  double homogeneity_defect(const std::vector<Wavevector>& xis) const;
};

struct TwoMicroBracket {
  double compact = 0.0;
  double infinity = 0.0;
};

// compact = (op((a_R)_eps) f, f), infinity = (op((a^R)_eps chi((xi - sigma) / delta)) f, f).
TwoMicroBracket two_micro_bracket(const WaveField& f, const TwoMicroObservable& a, const CriticalSet& lambda,
                                  double r = 8.0, double delta = 0.5);

struct TwoMicroSample {
  Wavevector xi;
  Point v{0.0, 0.0};
  double weight = 0.0;
  DensityOperator m0;
};

struct TwoMicroReport {
  double total_mass = 0.0;
  double compact_mass = 0.0;
  double infinity_mass = 0.0;
  double offband_mass = 0.0;
  std::vector<TwoMicroSample> nu;
  std::vector<std::string> warnings;
};

struct TwoMicroOptions {
  double r = 8.0;
  double delta = 0.5;
  // Tangential frequencies sampled along a line critical set.
  std::vector<double> sigma;
  // Width of the v-cells along the line.
  double cell_width = 0.125;
  // Data counts as eps-oscillating when tail(R = 2 pi + 1) is below this.
  double oscillation_tol = 1e-4;
};

// Points: weight = ||shifted_weak_limit(f, xi*)||^2 and rank-one M0 per listed point.
// Lines {xi_axis = c} in d = 2: per (v-cell, sigma) density operator on the normal axis.
TwoMicroReport extract_two_micro_data(const WaveField& f, const CriticalSet& lambda,
                                      const TwoMicroOptions& opt = {});

// Triangular window on [t0, t1] and trapezoid weights over the snapshot times.
std::vector<double> window_weights(const std::vector<double>& times);

// Time-averaged fraction of mass at dist(eps Xi, Lambda) > margin.
double localization_defect(const Trajectory& traj, const CriticalSet& lambda, double margin);

// |int theta(t) [<W, a o phi_s> - <W, a>] dt|, phi_s(x, xi) = (x + s grad lambda(xi), xi), x taken mod L.
double invariance_defect(const Trajectory& traj, const PhaseSymbol& a, double s, const MultiplierSymbol& lambda);

}  // namespace semibloch
