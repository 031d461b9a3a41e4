#pragma once

#include "semibloch/planewave.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace semibloch {

// grad rho_n(xi) = sum_k (xi + 2 pi k) |c_{k,n}|^2 (Hellmann-Feynman). Refuses clustered bands.
Wavevector band_gradient(const BlochFiber& fiber, int n);

// Effective-mass tensor d^2 rho_n(xi) from second-order perturbation theory:
// I + sum_{m != n} 2 Re[<A phi_n, phi_m> (x) <phi_m, A phi_n>] / (rho_n - rho_m), A = xi + 2 pi k.
MatrixXd band_hessian(const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
                      const Wavevector& xi);

// A scalar band function of xi with first and second derivatives. Implementations are
// pure, so a single model may be queried from several threads.
class BandModel {
public:
  virtual ~BandModel() = default;
  virtual int dim() const = 0;
  virtual double value(const Wavevector& xi) const = 0;
  virtual Wavevector gradient(const Wavevector& xi) const = 0;
  virtual MatrixXd hessian(const Wavevector& xi) const = 0;
  // False inside a multiplicity cluster, where derivatives are not defined.
  virtual bool simple(const Wavevector& xi) const { (void)xi; return true; }
};

// Bloch band rho_n of a periodic potential (n is zero-based).
class BlochBand final : public BandModel {
public:
  BlochBand(PeriodicPotential v, std::shared_ptr<const PlaneWaveBasis> basis, int n);
  int dim() const override { return basis_->dim(); }
  double value(const Wavevector& xi) const override;
  Wavevector gradient(const Wavevector& xi) const override;
  MatrixXd hessian(const Wavevector& xi) const override;
  bool simple(const Wavevector& xi) const override;
  BlochFiber fiber(const Wavevector& xi) const;
  int band() const { return n_; }

private:
  PeriodicPotential v_;
  std::shared_ptr<const PlaneWaveBasis> basis_;
  int n_;
};

// Band given in closed form.
class ClosedFormBand final : public BandModel {
public:
  using Value = std::function<double(const Wavevector&)>;
  using Gradient = std::function<Wavevector(const Wavevector&)>;
  using Hessian = std::function<MatrixXd(const Wavevector&)>;
  ClosedFormBand(int dim, Value v, Gradient g, Hessian h)
      : dim_(dim), v_(std::move(v)), g_(std::move(g)), h_(std::move(h)) {}
  int dim() const override { return dim_; }
  double value(const Wavevector& xi) const override { return v_(xi); }
  Wavevector gradient(const Wavevector& xi) const override { return g_(xi); }
  MatrixXd hessian(const Wavevector& xi) const override { return h_(xi); }

  // lambda(xi) = 1 - cos(xi_1), flat in the remaining directions.
  static ClosedFormBand cosine(int dim);
  // lambda(xi) = |xi|^2 / 2
  static ClosedFormBand quadratic(int dim);

private:
  int dim_;
  Value v_;
  Gradient g_;
  Hessian h_;
};

// rho_n sampled on the uniform grid 2 pi j / N_xi, j in [0, N_xi)^d (first axis slowest).
struct BandGrid {
  int dim = 1;
  int points_per_axis = 0;
  std::vector<Wavevector> nodes;
  VectorXd values;
  std::vector<Wavevector> gradients;  // zero where the band is clustered
  std::vector<bool> simple;
};

BandGrid sample_band(const BandModel& model, int points_per_axis, int threads = 1);

// max |rho(xi + 2 pi e_j) - rho(xi)| over the grid's boundary nodes.
double wraparound_defect(const BandModel& model, const BandGrid& grid);

struct CriticalPoint {
  Wavevector xi_star;  // folded into [-pi, pi)^d
  double grad_residual = 0.0;
  MatrixXd hessian;
  int hessian_rank = 0;
  bool degenerate = false;
};

struct ManifoldCandidate {
  std::vector<Wavevector> nodes;  // near-critical grid nodes of one connected component
  int codimension = 0;
};

struct CriticalSearch {
  std::vector<CriticalPoint> points;
  std::vector<ManifoldCandidate> manifolds;
  std::vector<Wavevector> unresolved;       // seeds where Newton did not converge
  std::vector<Wavevector> cluster_nodes;    // grid nodes skipped as multiplicity clusters
};

struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  double dedup_distance = 1e-6;
};

CriticalSearch find_critical_points(const BandGrid& grid, const BandModel& model, const NewtonOptions& opt = {},
                                    int threads = 1);

// Numerical rank of a symmetric matrix (eigenvalues above 1e-6 * max(1, |H|)).
int symmetric_rank(const MatrixXd& h);

// Distance between wavevectors modulo 2 pi Z^d.
double periodic_distance(const Wavevector& a, const Wavevector& b);

// Evaluates fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace semibloch
