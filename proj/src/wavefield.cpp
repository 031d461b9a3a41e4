#include "semibloch/wavefield.hpp"

#include "semibloch/fft.hpp"

#include <cmath>
#include <span>

namespace semibloch {

namespace {

std::span<cd> view(VectorXcd& v) { return {v.data(), std::size_t(v.size())}; }

bool is_pow2(long v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

Grid Grid::make(int dim, int box, double eps, int resolution) {
  if (dim != 1 && dim != 2) throw Error("grid: only d = 1 or 2 is supported");
  if (box <= 0 || eps <= 0.0 || resolution < 0) throw Error("grid: invalid box, eps or resolution");
  double cells = box / eps;
  long m = std::lround(cells);
  if (std::abs(cells - double(m)) > 1e-9 * cells)
    throw Error("grid: L / eps = " + std::to_string(cells) + " is not an integer");
  long n = m << resolution;
  if (!is_pow2(n)) throw Error("grid: N = " + std::to_string(n) + " is not a power of two");
  return Grid{dim, box, int(n), eps};
}

int Grid::cells() const {
  double c = box / eps;
  long m = std::lround(c);
  if (std::abs(c - double(m)) > 1e-9 * c)
    throw Error("grid: L / eps = " + std::to_string(c) + " is not an integer");
  return int(m);
}

bool Grid::commensurate() const {
  double c = box / eps;
  long m = std::lround(c);
  return std::abs(c - double(m)) <= 1e-9 * c && m > 0 && n % m == 0;
}

void Grid::require_commensurate() const {
  if (!commensurate())
    throw Error("grid: N = " + std::to_string(n) + " is not commensurate with L / eps = " +
                std::to_string(box / eps));
}

int Grid::slot(int m) const {
  if (m < -n / 2 || m >= n / 2)
    throw Error("grid: frequency index " + std::to_string(m) + " outside the FFT lattice");
  return m < 0 ? m + n : m;
}

int Grid::lattice_index(double xi) const {
  double q = xi * box / (kTwoPi * eps);
  long m = std::lround(q);
  if (std::abs(q - double(m)) > 1e-8 * std::max(1.0, std::abs(q)))
    throw Error("grid: xi / eps = " + std::to_string(xi / eps) +
                " is not on the FFT lattice 2 pi Z / L (would alias)");
  return int(m);
}

WaveField::WaveField(const Grid& g)
    : grid_(g), values_(VectorXcd::Zero(Eigen::Index(g.size()))),
      spectrum_(VectorXcd::Zero(Eigen::Index(g.size()))) {}

WaveField WaveField::from_values(const Grid& g, VectorXcd values) {
  if (std::size_t(values.size()) != g.size()) throw Error("wavefield: sample count does not match grid");
  WaveField f;
  f.grid_ = g;
  f.values_ = std::move(values);
  f.spectrum_.resize(f.values_.size());
  fft::forward(view(f.values_), view(f.spectrum_), g.dim, g.n);
  return f;
}

WaveField WaveField::from_spectrum(const Grid& g, VectorXcd spectrum) {
  if (std::size_t(spectrum.size()) != g.size()) throw Error("wavefield: coefficient count does not match grid");
  WaveField f;
  f.grid_ = g;
  f.spectrum_ = std::move(spectrum);
  f.values_.resize(f.spectrum_.size());
  fft::backward(view(f.spectrum_), view(f.values_), g.dim, g.n);
  f.values_ /= double(g.size());
  return f;
}

double WaveField::norm2() const { return grid_.cell_volume() * values_.squaredNorm(); }

double WaveField::spectral_norm2() const { return spectral_weight(grid_) * spectrum_.squaredNorm(); }

WaveField WaveField::operator+(const WaveField& o) const {
  if (!(grid_ == o.grid_)) throw Error("wavefield: grid mismatch");
  WaveField r;
  r.grid_ = grid_;
  r.values_ = values_ + o.values_;
  r.spectrum_ = spectrum_ + o.spectrum_;
  return r;
}

WaveField WaveField::operator-(const WaveField& o) const {
  if (!(grid_ == o.grid_)) throw Error("wavefield: grid mismatch");
  WaveField r;
  r.grid_ = grid_;
  r.values_ = values_ - o.values_;
  r.spectrum_ = spectrum_ - o.spectrum_;
  return r;
}

WaveField WaveField::operator*(cd s) const {
  WaveField r;
  r.grid_ = grid_;
  r.values_ = values_ * s;
  r.spectrum_ = spectrum_ * s;
  return r;
}

cd inner(const WaveField& a, const WaveField& b) {
  if (!(a.grid() == b.grid())) throw Error("wavefield: grid mismatch");
  return a.grid().cell_volume() * a.values().dot(b.values());
}

}  // namespace semibloch
