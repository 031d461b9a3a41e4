#pragma once

#include "semibloch/bandstructure.hpp"
#include "semibloch/blochdata.hpp"
#include "semibloch/extpotential.hpp"
#include "semibloch/wavefield.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace semibloch {

// Critical set of a symbol: isolated points or the affine line {xi_axis = value}, mod 2 pi.
struct CriticalSet {
  enum class Kind { points, line };
  Kind kind = Kind::points;
  std::vector<Wavevector> points;
  int axis = 0;
  double value = 0.0;

  double distance(const Wavevector& xi) const;
  // sigma(xi): nearest point of the set (the identity projection for lines).
  Wavevector project(const Wavevector& xi) const;
};

// Fourier multiplier lambda(xi), either closed form or the tabulated Bloch band rho_n.
class MultiplierSymbol {
public:
  static MultiplierSymbol closed_form(std::shared_ptr<const BandModel> model, double growth, CriticalSet critical);
  static MultiplierSymbol bloch(PeriodicPotential v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
                                CriticalSet critical, int threads = 1);

  double operator()(const Wavevector& xi) const { return model_->value(xi); }
  Wavevector gradient(const Wavevector& xi) const { return model_->gradient(xi); }
  MatrixXd hessian(const Wavevector& xi) const { return model_->hessian(xi); }
  const CriticalSet& critical() const { return critical_; }
  double growth() const { return growth_; }
  bool tabulated() const { return tabulated_; }

  // lambda(eps Xi) at every FFT slot of g. Bloch symbols go through a per-grid BandTable.
  VectorXd table(const Grid& g) const;
  std::shared_ptr<const BandTable> band_table(const Grid& g) const;
  // max |lambda(eps Xi)| / (1 + |eps Xi|^N) over the grid.
  double growth_ratio(const Grid& g) const;

private:
  std::shared_ptr<const BandModel> model_;
  double growth_ = 2.0;
  CriticalSet critical_;
  bool tabulated_ = false;
  PeriodicPotential v_{1};
  std::shared_ptr<const PlaneWaveBasis> basis_;
  int band_ = 0;
  int threads_ = 1;
  struct Cache {
    std::mutex mu;
    std::vector<std::pair<Grid, std::shared_ptr<const BandTable>>> tables;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

struct Trajectory {
  std::string equation;
  double eps = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<WaveField> snapshots;
  std::vector<double> norms;
};

// Snapshot times start at 0 and must be monotone (decreasing for backward runs).
// dt is an upper bound; each interval between snapshots is split into equal steps.
Trajectory evolve_full(const WaveField& psi0, const PeriodicPotential& v, const ExtPotential& vext,
                       const std::vector<double>& times, double dt, double dt_limit_factor = 0.5);
Trajectory evolve_multiplier(const WaveField& u0, const MultiplierSymbol& lambda, const ExtPotential& vext,
                             const std::vector<double>& times, double dt);
Trajectory evolve_effective_mass(const WaveField& phi0, const MatrixXd& b, const ExtPotential& vext,
                                 const std::vector<double>& times, double dt);

// <psi, (-Delta / 2 + eps^{-2} V_per(x / eps)) psi>
double full_energy(const WaveField& psi, const PeriodicPotential& v);

// sum_j w_j |u_j><u_j| on a grid along the normal fibre of the critical set.
struct DensityOperator {
  VectorXd weights;
  std::vector<WaveField> orbitals;
  Point v{0.0, 0.0};  // base point on the critical set (tangential coordinates)
  Wavevector xi;      // base point in frequency

  static DensityOperator rank_one(const WaveField& u, double weight, Point v = {0.0, 0.0}, Wavevector xi = {});
  // Eigen-decomposition of sum_j |f_j><f_j|, keeping eigenvalues above rel_tol * largest.
  static DensityOperator from_columns(const std::vector<WaveField>& columns, double rel_tol = 1e-10);

  int rank() const { return int(weights.size()); }
  double trace() const { return weights.sum(); }
  double orthonormality_defect() const;
  // sum_j w_j |u_j(z)|^2
  VectorXd density() const;
  // Tr[m_phi M] for a multiplication operator sampled on the orbital grid.
  double expectation(const VectorXd& phi) const;
};

struct HeisenbergTrajectory {
  std::vector<double> times;
  std::vector<DensityOperator> states;
  std::vector<double> traces;
};

// Each orbital follows i d_t u = 1/2 <C D_z, D_z> u + V_ext(t, v + z) u with z along `axes`
// (one axis for a line in d = 2). Weights stay fixed.
HeisenbergTrajectory evolve_heisenberg(const DensityOperator& m0, const MatrixXd& curvature,
                                       const ExtPotential& vext, int axis, const std::vector<double>& times,
                                       double dt);

}  // namespace semibloch
