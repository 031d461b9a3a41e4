#pragma once

#include "semibloch/common.hpp"
#include "semibloch/wavefield.hpp"

#include <array>
#include <map>
#include <memory>
#include <utility>
#include <vector>

namespace semibloch {

using LatticeVector = std::array<int, 2>;  // second entry zero when dim == 1
using Wavevector = Eigen::VectorXd;

// Lattice vectors k in Z^d with |k|_inf <= K, in a fixed enumeration.
class PlaneWaveBasis {
public:
  // Lexicographic enumeration, first axis slowest, each axis ascending from -K.
  PlaneWaveBasis(int dim, int cutoff);
  // Custom enumeration; must be a bijection onto the cube |k|_inf <= K.
  static PlaneWaveBasis with_order(int dim, int cutoff, std::vector<LatticeVector> order);

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  int size() const { return int(order_.size()); }
  const LatticeVector& operator[](int i) const { return order_[std::size_t(i)]; }
  // Enumeration index of k, or -1 when |k|_inf > K.
  int index_of(const LatticeVector& k) const;

private:
  int dim_;
  int cutoff_;
  std::vector<LatticeVector> order_;
  std::vector<int> lookup_;
};

// Truncated Fourier series of a real Z^d-periodic potential, V(y) = sum_k V(k) e^{2 pi i k.y}.
class PeriodicPotential {
public:
  explicit PeriodicPotential(int dim) : dim_(dim) {}

  // Missing conjugate partners are filled in; inconsistent pairs are rejected.
  static PeriodicPotential from_coefficients(int dim, const std::vector<std::pair<LatticeVector, cd>>& coeffs);
  // V(+-e_j) = amplitude on every axis, i.e. V(y) = 2 amplitude sum_j cos(2 pi y_j).
  static PeriodicPotential mathieu(int dim, double amplitude);

  int dim() const { return dim_; }
  cd coefficient(const LatticeVector& k) const;
  const std::map<LatticeVector, cd>& coefficients() const { return coeffs_; }
  int support_radius() const;
  int default_cutoff() const { return std::max(8, 2 * support_radius() + 6); }
  double evaluate(const Point& y) const;
  // Largest |Im V(y)| over an 8^d sample of the torus.
  double imaginary_residue() const;

private:
  int dim_;
  std::map<LatticeVector, cd> coeffs_;
};

// Degeneracy threshold used to flag multiplicity clusters.
inline double gap_threshold(double rho) { return 1e-8 * (1.0 + std::abs(rho)); }

struct FiberHamiltonian {
  MatrixXcd matrix;
  Wavevector xi;
  std::shared_ptr<const PlaneWaveBasis> basis;
};

// Eigen-decomposition of P(xi) restricted to the leading bands.
struct BlochFiber {
  Wavevector xi;
  std::shared_ptr<const PlaneWaveBasis> basis;
  VectorXd energies;   // ascending
  MatrixXcd vectors;   // column n = plane-wave coefficients c_{k,n}
  VectorXd gap_below;  // +inf for the lowest band
  VectorXd gap_above;  // +inf when no higher eigenvalue exists in the basis

  int bands() const { return int(energies.size()); }
  bool simple(int n) const {
    double d = gap_threshold(energies[n]);
    return gap_below[n] > d && gap_above[n] > d;
  }
  void require_simple(int n) const;
};

// H_{k,k'} = 1/2 |xi + 2 pi k|^2 delta_{k,k'} + V(k - k').
FiberHamiltonian assemble_fiber_hamiltonian(const PeriodicPotential& v,
                                            std::shared_ptr<const PlaneWaveBasis> basis,
                                            const Wavevector& xi);

// Lowest n_bands eigenpairs with deterministic phases: each vector is rotated so that
// its largest-modulus coefficient is real positive (ties go to the lowest index).
BlochFiber solve_fiber(const FiberHamiltonian& h, int n_bands);

// Convenience: assemble and solve in one step.
BlochFiber solve_fiber(const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis,
                       const Wavevector& xi, int n_bands);

// phi_n(y, xi) = sum_k c_{k,n} e^{2 pi i k.y}
cd bloch_wave_eval(const BlochFiber& fiber, int n, const Point& y);

}  // namespace semibloch
