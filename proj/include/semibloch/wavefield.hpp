#pragma once

#include "semibloch/common.hpp"

#include <array>
#include <cstddef>

namespace semibloch {

using Point = std::array<double, 2>;  // second entry unused when dim == 1

// Periodic box [0, L)^d sampled with N points per axis, tagged with the
// semiclassical parameter eps. Frequencies live on the lattice 2 pi m / L.
struct Grid {
  int dim = 1;
  int box = 16;
  int n = 1024;
  double eps = 1.0 / 16.0;

  // N = 2^resolution * L / eps points per axis (2^resolution points per eps-cell).
  static Grid make(int dim, int box, double eps, int resolution);

  double step() const { return double(box) / n; }
  double cell_volume() const { return dim == 1 ? step() : step() * step(); }
  std::size_t size() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n); }

  // L / eps, the number of periods of V_per(x / eps) per axis.
  int cells() const;
  // L / eps integral and dividing N.
  bool commensurate() const;
  void require_commensurate() const;

  double x(int j) const { return j * step(); }
  int freq_index(int j) const { return j < n / 2 ? j : j - n; }
  double freq(int j) const { return kTwoPi * freq_index(j) / box; }
  // FFT slot of a signed frequency index; throws when outside [-N/2, N/2).
  int slot(int m) const;

  std::array<int, 2> unravel(std::size_t idx) const {
    if (dim == 1) return {int(idx), 0};
    return {int(idx / std::size_t(n)), int(idx % std::size_t(n))};
  }
  std::size_t ravel(int j0, int j1) const {
    return dim == 1 ? std::size_t(j0) : std::size_t(j0) * std::size_t(n) + std::size_t(j1);
  }
  Point point(std::size_t idx) const {
    auto j = unravel(idx);
    return {x(j[0]), dim == 2 ? x(j[1]) : 0.0};
  }
  Point frequency(std::size_t idx) const {
    auto j = unravel(idx);
    return {freq(j[0]), dim == 2 ? freq(j[1]) : 0.0};
  }

  // Lattice index of a wavevector xi / eps: xi * L / (2 pi eps); throws when off-lattice.
  int lattice_index(double xi) const;

  bool operator==(const Grid&) const = default;
};

// Complex field on a Grid stored in both views. The spectrum holds unnormalized
// DFT coefficients in FFT order; the discrete L2 norm uses quadrature weight (L/N)^d.
class WaveField {
public:
  WaveField() = default;
  explicit WaveField(const Grid& g);

  static WaveField from_values(const Grid& g, VectorXcd values);
  static WaveField from_spectrum(const Grid& g, VectorXcd spectrum);

  template <class F>
  static WaveField sample(const Grid& g, F&& f) {
    VectorXcd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[Eigen::Index(i)] = f(g.point(i));
    return from_values(g, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const VectorXcd& values() const { return values_; }
  const VectorXcd& spectrum() const { return spectrum_; }

  double norm2() const;
  double norm() const { return std::sqrt(norm2()); }
  double spectral_norm2() const;
  double parseval_defect() const { return std::abs(norm2() - spectral_norm2()); }

  // Pointwise |f|^2.
  VectorXd density() const { return values_.cwiseAbs2(); }

  WaveField operator+(const WaveField& o) const;
  WaveField operator-(const WaveField& o) const;
  WaveField operator*(cd s) const;

private:
  Grid grid_{};
  VectorXcd values_;
  VectorXcd spectrum_;
};

// Discrete L2 inner product (a, b) = h^d sum conj(a) b.
cd inner(const WaveField& a, const WaveField& b);

// Spectral coefficient -> samples of the continuous Fourier transform scaling:
// sum |c|^2 * spectral_weight(g) = ||f||^2.
inline double spectral_weight(const Grid& g) {
  double total = double(g.size());
  return g.cell_volume() / total;
}

}  // namespace semibloch
