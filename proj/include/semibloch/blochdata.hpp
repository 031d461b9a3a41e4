#pragma once

#include "semibloch/extpotential.hpp"
#include "semibloch/planewave.hpp"
#include "semibloch/wavefield.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace semibloch {

// Fraction of the squared norm allowed on fibers where band n is not simple.
// Such fibers are dropped from projections; more mass than this is rejected.
inline constexpr double kClusteredMass = 1e-12;

// Band n of P(theta) tabulated on every fiber of a grid. A grid frequency index m
// (per axis) splits as m = r + J M with M = L / eps and r in [-M/2, M/2); the fiber
// is r, its quasimomentum theta = 2 pi r / M, and J selects the plane wave.
class BandTable {
public:
  BandTable(const Grid& g, const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
            int threads = 1);

  // Band n of the one-step Strang propagator of the full equation at cell step tau = dt / eps^2,
  // restricted to the grid's modes in each fiber. It is the eigenvector of that unitary closest to
  // the exact Bloch vector, so it differs from the exact band by O(tau^2) and is invariant under
  // the discrete flow when V_ext = 0. Energies are the quasi-energies unwrapped next to rho_n.
  static BandTable split_step(const Grid& g, const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis,
                              int n, double tau, int threads = 1);

  const Grid& grid() const { return grid_; }
  int band() const { return n_; }
  int cells() const { return cells_; }
  int fiber_count() const { return int(energies_.size()); }
  const PlaneWaveBasis& basis() const { return *basis_; }
  std::shared_ptr<const PlaneWaveBasis> basis_ptr() const { return basis_; }

  // Fiber of the signed frequency index m; shift receives J.
  int fiber_of(const std::array<int, 2>& m, std::array<int, 2>& shift) const;
  Wavevector quasimomentum(int fiber) const;
  double energy(int fiber) const { return energies_[fiber]; }
  bool simple(int fiber) const { return simple_[std::size_t(fiber)] != 0; }
  // c_k(theta) of the fiber, zero outside the cutoff cube.
  cd coefficient(int fiber, const LatticeVector& k) const;

private:
  BandTable(const Grid& g, std::shared_ptr<const PlaneWaveBasis> basis, int n);

  Grid grid_;
  std::shared_ptr<const PlaneWaveBasis> basis_;
  int n_;
  int cells_;
  VectorXd energies_;
  std::vector<char> simple_;
  MatrixXcd vectors_;  // column per fiber
};

// U(x, y) = sum_k U_k(x) e^{2 pi i k.y}, one WaveField per basis vector.
struct CellField {
  std::shared_ptr<const PlaneWaveBasis> basis;
  std::vector<WaveField> comps;

  const Grid& grid() const { return comps.front().grid(); }
  double norm2() const;
  static CellField zero(const Grid& g, std::shared_ptr<const PlaneWaveBasis> basis);
};

// Named envelope families for initial data.
struct Envelope {
  enum class Family { gaussian, bump };
  Family family = Family::gaussian;
  Point center{0.0, 0.0};
  double width = 1.0;

  // gaussian: exp(-|x - c|^2 / (2 w^2)); bump: exp(1 - 1 / (1 - |x - c|^2 / w^2)) inside |x - c| < w.
  double operator()(const Point& x) const;
  WaveField sample(const Grid& g) const;
};

// Radius in Xi (ordinary frequency units) containing all but `tail` of the spectral mass.
double spectral_bandwidth(const WaveField& f, double tail = 1e-6);

enum class FiberMode { exact, frozen };

struct BandData {
  WaveField psi0;
  CellField u0;
  double hs_order = 0.0;   // s = d/2 + 1
  double hs_norm2 = 0.0;   // ||U0||^2 in H^s_eps
  double bandwidth = 0.0;  // envelope bandwidth in Xi
};

// U0_k(Xi) = v(Xi - xi0/eps) c_k(eps Xi) (exact) or c_k(xi0) (frozen), psi0 = L^eps U0.
BandData build_band_data(const WaveField& v, const Wavevector& xi0, const BandTable& table,
                         FiberMode mode = FiberMode::exact);

// psi(Xi) = sum_k U_k(Xi - 2 pi k / eps). Rejects when more than tol * ||U|| falls off the grid.
WaveField restrict_diagonal(const CellField& u, double tol = 1e-6);

// Bloch lift of psi: U_k(Xi) = psi(Xi + 2 pi k / eps) for eps Xi in the first zone.
CellField bloch_lift(const WaveField& psi, std::shared_ptr<const PlaneWaveBasis> basis);

// Pi_n(eps D) fiber by fiber on the grid.
WaveField project_band(const WaveField& psi, const BandTable& table);

// Pi_n(eps D_x) acting on the cell representation (projection of (U_k(Xi))_k onto c(eps Xi)).
CellField project_cells(const CellField& u, const BandTable& table);

// L^eps [Pi_n(eps D), V_ext] U
WaveField band_residual(const CellField& u, const VectorXd& vext, const BandTable& table);

// sum_k (2 pi)^{-d} int (1 + |eps xi|^2 + |k|^2)^s |U_k(xi)|^2 dxi, so that s = 0 gives ||U||^2.
double hs_eps_norm2(const CellField& u, double s);

// Modulate by e^{-i xi.x / eps} and keep |Xi| <= cutoff (default eps^{-1/2}).
WaveField shifted_weak_limit(const WaveField& psi, const Wavevector& xi, std::optional<double> cutoff = {});

}  // namespace semibloch
