#include "semibloch/planewave.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace semibloch {

namespace {

std::string describe(const Wavevector& xi) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << xi[i];
  os << ")";
  return os.str();
}

LatticeVector negate(const LatticeVector& k) { return {-k[0], -k[1]}; }

}  // namespace

PlaneWaveBasis::PlaneWaveBasis(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
  if (dim != 1 && dim != 2) throw Error("planewave: only d = 1 or 2 is supported");
  if (cutoff < 0) throw Error("planewave: negative cutoff");
  int w = 2 * cutoff + 1;
  if (dim == 1) {
    for (int a = -cutoff; a <= cutoff; ++a) order_.push_back({a, 0});
  } else {
    for (int a = -cutoff; a <= cutoff; ++a)
      for (int b = -cutoff; b <= cutoff; ++b) order_.push_back({a, b});
  }
  lookup_.assign(std::size_t(dim == 1 ? w : w * w), -1);
  for (int i = 0; i < size(); ++i) {
    const auto& k = order_[std::size_t(i)];
    int slot = dim == 1 ? k[0] + cutoff : (k[0] + cutoff) * w + (k[1] + cutoff);
    lookup_[std::size_t(slot)] = i;
  }
}

PlaneWaveBasis PlaneWaveBasis::with_order(int dim, int cutoff, std::vector<LatticeVector> order) {
  PlaneWaveBasis b(dim, cutoff);
  if (order.size() != b.order_.size()) throw Error("planewave: custom order has the wrong size");
  std::fill(b.lookup_.begin(), b.lookup_.end(), -1);
  int w = 2 * cutoff + 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& k = order[i];
    if (std::abs(k[0]) > cutoff || std::abs(k[1]) > cutoff || (dim == 1 && k[1] != 0))
      throw Error("planewave: custom order contains a vector outside the cutoff cube");
    int slot = dim == 1 ? k[0] + cutoff : (k[0] + cutoff) * w + (k[1] + cutoff);
    if (b.lookup_[std::size_t(slot)] != -1) throw Error("planewave: custom order repeats a vector");
    b.lookup_[std::size_t(slot)] = int(i);
  }
  b.order_ = std::move(order);
  return b;
}

int PlaneWaveBasis::index_of(const LatticeVector& k) const {
  if (std::abs(k[0]) > cutoff_ || std::abs(k[1]) > cutoff_) return -1;
  if (dim_ == 1 && k[1] != 0) return -1;
  int w = 2 * cutoff_ + 1;
  int slot = dim_ == 1 ? k[0] + cutoff_ : (k[0] + cutoff_) * w + (k[1] + cutoff_);
  return lookup_[std::size_t(slot)];
}

PeriodicPotential PeriodicPotential::from_coefficients(int dim,
                                                       const std::vector<std::pair<LatticeVector, cd>>& coeffs) {
  if (dim != 1 && dim != 2) throw Error("potential: only d = 1 or 2 is supported");
  PeriodicPotential v(dim);
  for (const auto& [k, c] : coeffs) {
    if (dim == 1 && k[1] != 0) throw Error("potential: 2-D lattice vector in a 1-D potential");
    if (v.coeffs_.count(k)) throw Error("potential: duplicate coefficient");
    v.coeffs_[k] = c;
  }
  auto given = v.coeffs_;
  for (const auto& [k, c] : given) {
    auto mk = negate(k);
    auto it = given.find(mk);
    if (it == given.end()) {
      v.coeffs_[mk] = std::conj(c);
    } else if (std::abs(it->second - std::conj(c)) > 1e-12 * (1.0 + std::abs(c))) {
      throw Error("potential: V(-k) != conj(V(k)); V_per would not be real-valued");
    }
  }
  auto zero = v.coeffs_.find({0, 0});
  if (zero != v.coeffs_.end()) zero->second = zero->second.real();
  return v;
}

PeriodicPotential PeriodicPotential::mathieu(int dim, double amplitude) {
  std::vector<std::pair<LatticeVector, cd>> c;
  c.push_back({{1, 0}, amplitude});
  if (dim == 2) c.push_back({{0, 1}, amplitude});
  return from_coefficients(dim, c);
}

cd PeriodicPotential::coefficient(const LatticeVector& k) const {
  auto it = coeffs_.find(k);
  return it == coeffs_.end() ? cd{0.0, 0.0} : it->second;
}

int PeriodicPotential::support_radius() const {
  int r = 0;
  for (const auto& [k, c] : coeffs_)
    if (c != cd{0.0, 0.0}) r = std::max({r, std::abs(k[0]), std::abs(k[1])});
  return r;
}

double PeriodicPotential::evaluate(const Point& y) const {
  cd s = 0.0;
  for (const auto& [k, c] : coeffs_) s += c * std::polar(1.0, kTwoPi * (k[0] * y[0] + k[1] * y[1]));
  return s.real();
}

double PeriodicPotential::imaginary_residue() const {
  double worst = 0.0;
  int ny = dim_ == 1 ? 1 : 8;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < ny; ++b) {
      cd s = 0.0;
      for (const auto& [k, c] : coeffs_) s += c * std::polar(1.0, kTwoPi * (k[0] * a / 8.0 + k[1] * b / 8.0));
      worst = std::max(worst, std::abs(s.imag()));
    }
  return worst;
}

void BlochFiber::require_simple(int n) const {
  if (n < 0 || n >= bands()) throw Error("bloch fiber: band index out of range");
  if (!simple(n)) {
    std::ostringstream os;
    os << "bloch fiber: band " << n + 1 << " is inside a multiplicity cluster at xi = " << describe(xi)
       << " (gap below " << gap_below[n] << ", gap above " << gap_above[n] << ")";
    throw Error(os.str());
  }
}

FiberHamiltonian assemble_fiber_hamiltonian(const PeriodicPotential& v,
                                            std::shared_ptr<const PlaneWaveBasis> basis,
                                            const Wavevector& xi) {
  const auto& b = *basis;
  if (v.dim() != b.dim() || xi.size() != b.dim()) throw Error("planewave: dimension mismatch");
  if (!xi.allFinite()) throw Error("planewave: non-finite wavevector");
  if (b.cutoff() < v.support_radius()) {
    std::ostringstream os;
    os << "planewave: cutoff K = " << b.cutoff() << " is smaller than the potential support radius "
       << v.support_radius() << "; use K >= " << v.default_cutoff();
    throw Error(os.str());
  }
  const int m = b.size();
  MatrixXcd h = MatrixXcd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const auto& k = b[i];
    double kin = 0.0;
    for (int a = 0; a < b.dim(); ++a) {
      double q = xi[a] + kTwoPi * k[a];
      kin += q * q;
    }
    h(i, i) = 0.5 * kin;
  }
  for (const auto& [dk, c] : v.coefficients()) {
    if (c == cd{0.0, 0.0}) continue;
    for (int j = 0; j < m; ++j) {
      const auto& kp = b[j];
      int i = b.index_of({kp[0] + dk[0], kp[1] + dk[1]});
      if (i >= 0) h(i, j) += c;
    }
  }
  return {std::move(h), xi, std::move(basis)};
}

BlochFiber solve_fiber(const FiberHamiltonian& h, int n_bands) {
  const int m = int(h.matrix.rows());
  if (n_bands < 1 || n_bands > m) throw Error("planewave: requested band count outside [1, basis size]");
  if (hermitian_defect(h.matrix) > 1e-12 * (1.0 + h.matrix.cwiseAbs().maxCoeff()))
    throw Error("planewave: fiber matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h.matrix);
  if (es.info() != Eigen::Success) {
    std::ostringstream os;
    os << "planewave: eigensolver did not converge at xi = " << describe(h.xi) << " with cutoff K = "
       << (h.basis ? h.basis->cutoff() : -1);
    throw Error(os.str());
  }
  const VectorXd& all = es.eigenvalues();
  BlochFiber f;
  f.xi = h.xi;
  f.basis = h.basis;
  f.energies = all.head(n_bands);
  f.vectors = es.eigenvectors().leftCols(n_bands);
  f.gap_below.resize(n_bands);
  f.gap_above.resize(n_bands);
  const double inf = std::numeric_limits<double>::infinity();
  for (int n = 0; n < n_bands; ++n) {
    f.gap_below[n] = n == 0 ? inf : all[n] - all[n - 1];
    f.gap_above[n] = n + 1 < m ? all[n + 1] - all[n] : inf;
    auto col = f.vectors.col(n);
    double best = -1.0;
    Eigen::Index arg = 0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      double a = std::abs(col[i]);
      if (a > best * (1.0 + 1e-12) + 1e-300) {
        best = a;
        arg = i;
      }
    }
    col *= std::conj(col[arg]) / std::abs(col[arg]);
    col[arg] = std::abs(col[arg]);
  }
  return f;
}

BlochFiber solve_fiber(const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis,
                       const Wavevector& xi, int n_bands) {
  return solve_fiber(assemble_fiber_hamiltonian(v, std::move(basis), xi), n_bands);
}

cd bloch_wave_eval(const BlochFiber& fiber, int n, const Point& y) {
  if (n < 0 || n >= fiber.bands()) throw Error("bloch wave: band index out of range");
  const auto& b = *fiber.basis;
  cd s = 0.0;
  for (int i = 0; i < b.size(); ++i) {
    const auto& k = b[i];
    s += fiber.vectors(i, n) * std::polar(1.0, kTwoPi * (k[0] * y[0] + k[1] * y[1]));
  }
  return s;
}

}  // namespace semibloch
