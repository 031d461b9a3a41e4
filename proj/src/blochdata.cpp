#include "semibloch/blochdata.hpp"

#include "semibloch/bandstructure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace semibloch {

namespace {

using Index2 = std::array<int, 2>;

Index2 signed_index(const Grid& g, std::size_t idx) {
  auto j = g.unravel(idx);
  return {g.freq_index(j[0]), g.dim == 2 ? g.freq_index(j[1]) : 0};
}

bool in_range(const Grid& g, const Index2& m) {
  for (int a = 0; a < g.dim; ++a)
    if (m[std::size_t(a)] < -g.n / 2 || m[std::size_t(a)] >= g.n / 2) return false;
  return true;
}

std::size_t slot_of(const Grid& g, const Index2& m) {
  return g.ravel(g.slot(m[0]), g.dim == 2 ? g.slot(m[1]) : 0);
}

double radius2(const Grid& g, const Index2& m) {
  double s = 0.0;
  for (int a = 0; a < g.dim; ++a) {
    double xi = kTwoPi * m[std::size_t(a)] / g.box;
    s += xi * xi;
  }
  return s;
}

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

std::string fiber_list(const BandTable& t, const std::vector<int>& fibers) {
  std::ostringstream os;
  int shown = 0;
  for (int f : fibers) {
    if (shown++ == 6) {
      os << " ...";
      break;
    }
    auto q = t.quasimomentum(f);
    os << " (";
    for (Eigen::Index a = 0; a < q.size(); ++a) os << (a ? ", " : "") << q[a];
    os << ")";
  }
  return os.str();
}

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw Error("blochdata: field and band table live on different grids");
}

}  // namespace

BandTable::BandTable(const Grid& g, const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
                     int threads)
    : grid_(g), basis_(std::move(basis)), n_(n) {
  g.require_commensurate();
  cells_ = g.cells();
  if (cells_ % 2 != 0) throw Error("band table: L / eps must be even");
  if (v.dim() != g.dim || basis_->dim() != g.dim) throw Error("band table: dimension mismatch");
  const int count = g.dim == 1 ? cells_ : cells_ * cells_;
  energies_.resize(count);
  simple_.assign(std::size_t(count), 0);
  vectors_.resize(basis_->size(), count);
  const int keep = std::min(n + 2, basis_->size());
  parallel_for(count, threads, [&](int f) {
    auto fiber = solve_fiber(v, basis_, quasimomentum(f), keep);
    energies_[f] = fiber.energies[n];
    simple_[std::size_t(f)] = fiber.simple(n) ? 1 : 0;
    vectors_.col(f) = fiber.vectors.col(n);
  });
}

BandTable::BandTable(const Grid& g, std::shared_ptr<const PlaneWaveBasis> basis, int n)
    : grid_(g), basis_(std::move(basis)), n_(n) {
  g.require_commensurate();
  cells_ = g.cells();
  if (cells_ % 2 != 0) throw Error("band table: L / eps must be even");
  if (basis_->dim() != g.dim) throw Error("band table: dimension mismatch");
  const int count = g.dim == 1 ? cells_ : cells_ * cells_;
  energies_.resize(count);
  simple_.assign(std::size_t(count), 0);
  vectors_ = MatrixXcd::Zero(basis_->size(), count);
}

BandTable BandTable::split_step(const Grid& g, const PeriodicPotential& v,
                                std::shared_ptr<const PlaneWaveBasis> basis, int n, double tau, int threads) {
  if (!(tau > 0.0)) throw Error("split-step band: tau must be positive");
  BandTable t(g, basis, n);
  if (v.dim() != g.dim) throw Error("band table: dimension mismatch");
  const int s = g.n / t.cells_;  // samples per cell and axis
  if (basis->cutoff() < s / 2) throw Error("split-step band: basis cutoff must cover the grid's shifts");
  const int ns = g.dim == 1 ? s : s * s;
  VectorXd vsamp(ns);
  for (int j = 0; j < ns; ++j)
    vsamp[j] = v.evaluate({double(g.dim == 1 ? j : j / s) / s, double(g.dim == 1 ? 0 : j % s) / s});
  // Grid frequencies r + J M of a fiber with r < 0 reach J = s/2 but not -s/2.
  auto modes_of = [&](int fib) {
    const int half = t.cells_ / 2;
    std::array<int, 2> lo{-s / 2, -s / 2};
    std::array<int, 2> r{g.dim == 1 ? fib - half : fib / t.cells_ - half, g.dim == 1 ? 0 : fib % t.cells_ - half};
    for (int a = 0; a < g.dim; ++a)
      if (r[std::size_t(a)] < 0) lo[std::size_t(a)] += 1;
    std::vector<LatticeVector> m(static_cast<std::size_t>(ns));
    for (int i = 0; i < ns; ++i)
      m[std::size_t(i)] = {lo[0] + (g.dim == 1 ? i : i / s), g.dim == 1 ? 0 : lo[1] + i % s};
    return m;
  };
  // Sample-to-mode transforms only depend on J mod s, so one matrix serves every fiber.
  const auto modes0 = modes_of(t.fiber_count() - 1);
  MatrixXcd f(ns, ns);
  for (int j = 0; j < ns; ++j) {
    int ja = g.dim == 1 ? j : j / s, jb = g.dim == 1 ? 0 : j % s;
    for (int i = 0; i < ns; ++i) {
      const auto& m = modes0[std::size_t(i)];
      f(j, i) = std::polar(1.0 / std::sqrt(double(ns)), kTwoPi * (m[0] * ja + m[1] * jb) / s);
    }
  }
  VectorXcd half(ns);
  for (int j = 0; j < ns; ++j) half[j] = std::polar(1.0, -0.5 * tau * vsamp[j]);
  const MatrixXcd p = f.adjoint() * half.asDiagonal() * f;
  const int keep = std::min(n + 2, basis->size());
  parallel_for(t.fiber_count(), threads, [&](int fib) {
    const Wavevector xi = t.quasimomentum(fib);
    const auto modes = modes_of(fib);
    auto exact = solve_fiber(v, basis, xi, keep);
    VectorXcd kin(ns), ref(ns);
    for (int i = 0; i < ns; ++i) {
      const auto& m = modes[std::size_t(i)];
      double e = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        double q = xi[a] + kTwoPi * m[std::size_t(a)];
        e += 0.5 * q * q;
      }
      kin[i] = std::polar(1.0, -tau * e);
      int bi = basis->index_of(m);
      ref[i] = exact.vectors(bi, n);
    }
    const MatrixXcd u = p * kin.asDiagonal() * p;
    Eigen::ComplexEigenSolver<MatrixXcd> es(u);
    int best = 0;
    double overlap = -1.0;
    for (int k = 0; k < ns; ++k) {
      double o = std::norm(es.eigenvectors().col(k).normalized().dot(ref));
      if (o > overlap) {
        overlap = o;
        best = k;
      }
    }
    VectorXcd w = es.eigenvectors().col(best).normalized();
    const double rho = exact.energies[n];
    double shift = -std::arg(es.eigenvalues()[best] * std::polar(1.0, tau * rho)) / tau;
    t.energies_[fib] = rho + shift;
    // A near-degenerate Floquet partner would make the choice ambiguous.
    t.simple_[std::size_t(fib)] = exact.simple(n) && overlap > 0.5 ? 1 : 0;
    for (int i = 0; i < ns; ++i) t.vectors_(basis->index_of(modes[std::size_t(i)]), fib) = w[i];
  });
  return t;
}

int BandTable::fiber_of(const Index2& m, Index2& shift) const {
  const int half = cells_ / 2;
  Index2 r{0, 0};
  shift = {0, 0};
  for (int a = 0; a < grid_.dim; ++a) {
    int j = floor_div(m[std::size_t(a)] + half, cells_);
    shift[std::size_t(a)] = j;
    r[std::size_t(a)] = m[std::size_t(a)] - j * cells_;
  }
  return grid_.dim == 1 ? r[0] + half : (r[0] + half) * cells_ + (r[1] + half);
}

Wavevector BandTable::quasimomentum(int fiber) const {
  const int half = cells_ / 2;
  Wavevector q(grid_.dim);
  if (grid_.dim == 1) {
    q[0] = kTwoPi * (fiber - half) / cells_;
  } else {
    q[0] = kTwoPi * (fiber / cells_ - half) / cells_;
    q[1] = kTwoPi * (fiber % cells_ - half) / cells_;
  }
  return q;
}

cd BandTable::coefficient(int fiber, const LatticeVector& k) const {
  int i = basis_->index_of(k);
  return i < 0 ? cd{0.0, 0.0} : vectors_(i, fiber);
}

double CellField::norm2() const {
  double s = 0.0;
  for (const auto& c : comps) s += c.norm2();
  return s;
}

CellField CellField::zero(const Grid& g, std::shared_ptr<const PlaneWaveBasis> basis) {
  CellField u;
  u.comps.assign(std::size_t(basis->size()), WaveField(g));
  u.basis = std::move(basis);
  return u;
}

double Envelope::operator()(const Point& x) const {
  double r2 = 0.0;
  for (std::size_t a = 0; a < 2; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
  if (family == Family::gaussian) return std::exp(-r2 / (2.0 * width * width));
  double q = r2 / (width * width);
  return q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
}

WaveField Envelope::sample(const Grid& g) const {
  Envelope e = *this;
  if (g.dim == 1) e.center[1] = 0.0;
  return WaveField::sample(g, [&](const Point& x) { return cd{e(x), 0.0}; });
}

double spectral_bandwidth(const WaveField& f, double tail) {
  const Grid& g = f.grid();
  std::vector<std::pair<double, double>> shells;
  shells.reserve(g.size());
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double w = std::norm(f.spectrum()[Eigen::Index(i)]);
    total += w;
    shells.emplace_back(std::sqrt(radius2(g, signed_index(g, i))), w);
  }
  std::sort(shells.begin(), shells.end());
  double outside = 0.0;
  for (auto it = shells.rbegin(); it != shells.rend(); ++it) {
    if (outside + it->second > tail * total) return it->first;
    outside += it->second;
  }
  return 0.0;
}

BandData build_band_data(const WaveField& v, const Wavevector& xi0, const BandTable& table, FiberMode mode) {
  const Grid& g = v.grid();
  require_same_grid(g, table.grid());
  if (xi0.size() != g.dim) throw Error("band data: xi0 has the wrong dimension");
  Index2 m0{0, 0};
  for (int a = 0; a < g.dim; ++a) m0[std::size_t(a)] = g.lattice_index(xi0[a]);

  BandData out;
  out.bandwidth = spectral_bandwidth(v);
  if (out.bandwidth > 0.25 / g.eps) {
    std::ostringstream os;
    os << "band data: envelope bandwidth " << out.bandwidth << " exceeds 1/(4 eps) = " << 0.25 / g.eps
       << "; widen the envelope or reduce eps";
    throw Error(os.str());
  }

  const auto& basis = table.basis();
  Index2 shift0;
  const int fiber0 = table.fiber_of(m0, shift0);
  if (mode == FiberMode::frozen && !table.simple(fiber0))
    throw Error("band data: band is clustered at" + fiber_list(table, {fiber0}));

  out.u0 = CellField::zero(g, table.basis_ptr());
  std::vector<VectorXcd> spec(std::size_t(basis.size()), VectorXcd::Zero(Eigen::Index(g.size())));
  const double total = v.spectrum().squaredNorm();
  double clustered = 0.0;
  std::vector<int> bad;
  // Eigenvectors come with arbitrary phases, and the shift relabels plane waves across the zone
  // boundary. Align every (fiber, shift) pair with the reference fiber in the absolute frame so
  // the data is smooth in Xi.
  std::map<std::array<int, 3>, cd> gauge;
  auto phase = [&](int f, const Index2& shift) {
    auto [it, fresh] = gauge.try_emplace({f, shift[0], shift[1]}, cd{1.0, 0.0});
    if (fresh) {
      cd o{0.0, 0.0};
      for (int b = 0; b < basis.size(); ++b) {
        const auto& k = basis[b];
        o += std::conj(table.coefficient(fiber0, {k[0] + shift0[0], k[1] + shift0[1]})) *
             table.coefficient(f, {k[0] + shift[0], k[1] + shift[1]});
      }
      if (std::abs(o) > 0.0) it->second = std::conj(o) / std::abs(o);
    }
    return it->second;
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index2 p = signed_index(g, i);
    Index2 q{p[0] - m0[0], p[1] - m0[1]};
    if (!in_range(g, q)) continue;
    cd val = v.spectrum()[Eigen::Index(slot_of(g, q))];
    if (val == cd{0.0, 0.0}) continue;
    Index2 shift;
    int f = mode == FiberMode::exact ? table.fiber_of(p, shift) : fiber0;
    if (mode == FiberMode::frozen) shift = shift0;
    if (!table.simple(f)) {
      clustered += std::norm(val);
      if (std::find(bad.begin(), bad.end(), f) == bad.end()) bad.push_back(f);
      continue;
    }
    if (mode == FiberMode::exact) val *= phase(f, shift);
    for (int b = 0; b < basis.size(); ++b) {
      const auto& k = basis[b];
      spec[std::size_t(b)][Eigen::Index(i)] = val * table.coefficient(f, {k[0] + shift[0], k[1] + shift[1]});
    }
  }
  if (clustered > kClusteredMass * total)
    throw Error("band data: band " + std::to_string(table.band() + 1) +
                " is clustered on the envelope support at eps*Xi =" + fiber_list(table, bad));
  for (int b = 0; b < basis.size(); ++b)
    out.u0.comps[std::size_t(b)] = WaveField::from_spectrum(g, std::move(spec[std::size_t(b)]));
  out.hs_order = g.dim / 2.0 + 1.0;
  out.hs_norm2 = hs_eps_norm2(out.u0, out.hs_order);
  out.psi0 = restrict_diagonal(out.u0);
  return out;
}

WaveField restrict_diagonal(const CellField& u, double tol) {
  const Grid& g = u.grid();
  g.require_commensurate();
  const int cells = g.cells();
  VectorXcd out = VectorXcd::Zero(Eigen::Index(g.size()));
  double dropped = 0.0;
  int reach = 0;
  for (int b = 0; b < u.basis->size(); ++b) {
    const auto& k = (*u.basis)[b];
    const VectorXcd& s = u.comps[std::size_t(b)].spectrum();
    for (std::size_t i = 0; i < g.size(); ++i) {
      cd val = s[Eigen::Index(i)];
      if (val == cd{0.0, 0.0}) continue;
      Index2 p = signed_index(g, i);
      Index2 m{p[0] + k[0] * cells, p[1] + k[1] * cells};
      if (in_range(g, m)) {
        out[Eigen::Index(slot_of(g, m))] += val;
      } else {
        dropped += std::norm(val);
        if (std::norm(val) * spectral_weight(g) > 1e-30)
          reach = std::max({reach, std::abs(m[0]), std::abs(m[1])});
      }
    }
  }
  double lost = std::sqrt(dropped * spectral_weight(g));
  if (lost > tol * std::sqrt(u.norm2())) {
    long need = g.n;
    while (need / 2 <= reach) need *= 2;
    std::ostringstream os;
    os << "restrict: " << lost << " of the norm folds beyond the grid Nyquist frequency; need N >= " << need
       << " (have " << g.n << ")";
    throw Error(os.str());
  }
  return WaveField::from_spectrum(g, std::move(out));
}

CellField bloch_lift(const WaveField& psi, std::shared_ptr<const PlaneWaveBasis> basis) {
  const Grid& g = psi.grid();
  g.require_commensurate();
  const int cells = g.cells();
  const int half = cells / 2;
  std::vector<VectorXcd> spec(std::size_t(basis->size()), VectorXcd::Zero(Eigen::Index(g.size())));
  double kept = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index2 m = signed_index(g, i);
    Index2 r{0, 0};
    LatticeVector k{0, 0};
    for (int a = 0; a < g.dim; ++a) {
      k[std::size_t(a)] = floor_div(m[std::size_t(a)] + half, cells);
      r[std::size_t(a)] = m[std::size_t(a)] - k[std::size_t(a)] * cells;
    }
    int b = basis->index_of(k);
    if (b < 0) continue;
    cd val = psi.spectrum()[Eigen::Index(i)];
    spec[std::size_t(b)][Eigen::Index(slot_of(g, r))] = val;
    kept += std::norm(val);
  }
  double lost = std::abs(psi.spectrum().squaredNorm() - kept) * spectral_weight(g);
  if (std::sqrt(lost) > 1e-10 * std::max(psi.norm(), 1e-300))
    throw Error("bloch lift: cutoff K = " + std::to_string(basis->cutoff()) +
                " does not cover the grid's plane-wave shifts; raise K");
  CellField u;
  u.basis = basis;
  for (auto& s : spec) u.comps.push_back(WaveField::from_spectrum(g, std::move(s)));
  return u;
}

WaveField project_band(const WaveField& psi, const BandTable& table) {
  const Grid& g = psi.grid();
  require_same_grid(g, table.grid());
  const int nf = table.fiber_count();
  VectorXcd dot = VectorXcd::Zero(nf);
  VectorXd cnorm = VectorXd::Zero(nf), mass = VectorXd::Zero(nf);
  std::vector<int> fib(g.size());
  std::vector<cd> coef(g.size());
  const VectorXcd& s = psi.spectrum();
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index2 shift;
    int f = table.fiber_of(signed_index(g, i), shift);
    cd c = table.coefficient(f, {shift[0], shift[1]});
    fib[i] = f;
    coef[i] = c;
    dot[f] += std::conj(c) * s[Eigen::Index(i)];
    cnorm[f] += std::norm(c);
    mass[f] += std::norm(s[Eigen::Index(i)]);
  }
  double clustered = 0.0;
  std::vector<int> bad;
  for (int f = 0; f < nf; ++f) {
    if (table.simple(f) && cnorm[f] > 0.0) {
      dot[f] /= cnorm[f];
    } else {
      if (!table.simple(f) && mass[f] > 0.0) {
        clustered += mass[f];
        bad.push_back(f);
      }
      dot[f] = 0.0;
    }
  }
  if (clustered > kClusteredMass * s.squaredNorm())
    throw Error("project: band " + std::to_string(table.band() + 1) +
                " is clustered on fibers carrying data, eps*Xi =" + fiber_list(table, bad));
  VectorXcd out(Eigen::Index(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) out[Eigen::Index(i)] = coef[i] * dot[fib[i]];
  return WaveField::from_spectrum(g, std::move(out));
}

CellField project_cells(const CellField& u, const BandTable& table) {
  const Grid& g = u.grid();
  require_same_grid(g, table.grid());
  const auto& basis = *u.basis;
  const int nb = basis.size();
  std::vector<VectorXcd> spec(std::size_t(nb), VectorXcd::Zero(Eigen::Index(g.size())));
  VectorXcd w(nb), c(nb);
  std::vector<int> bad;
  double total = 0.0, clustered = 0.0;
  for (const auto& comp : u.comps) total += comp.spectrum().squaredNorm();
  for (std::size_t i = 0; i < g.size(); ++i) {
    double mass = 0.0;
    for (int b = 0; b < nb; ++b) {
      w[b] = u.comps[std::size_t(b)].spectrum()[Eigen::Index(i)];
      mass += std::norm(w[b]);
    }
    if (mass == 0.0) continue;
    Index2 shift;
    int f = table.fiber_of(signed_index(g, i), shift);
    if (!table.simple(f)) {
      if (std::find(bad.begin(), bad.end(), f) == bad.end()) bad.push_back(f);
      clustered += mass;
      continue;
    }
    for (int b = 0; b < nb; ++b) {
      const auto& k = basis[b];
      c[b] = table.coefficient(f, {k[0] + shift[0], k[1] + shift[1]});
    }
    double cn = c.squaredNorm();
    if (cn == 0.0) continue;
    cd a = c.dot(w) / cn;
    for (int b = 0; b < nb; ++b) spec[std::size_t(b)][Eigen::Index(i)] = c[b] * a;
  }
  if (clustered > kClusteredMass * total)
    throw Error("project: band " + std::to_string(table.band() + 1) +
                " is clustered on fibers carrying data, eps*Xi =" + fiber_list(table, bad));
  CellField out;
  out.basis = u.basis;
  for (auto& s : spec) out.comps.push_back(WaveField::from_spectrum(g, std::move(s)));
  return out;
}

WaveField band_residual(const CellField& u, const VectorXd& vext, const BandTable& table) {
  const Grid& g = u.grid();
  if (std::size_t(vext.size()) != g.size()) throw Error("residual: potential sample count does not match grid");
  auto times_v = [&](const CellField& f) {
    CellField r;
    r.basis = f.basis;
    for (const auto& c : f.comps) r.comps.push_back(WaveField::from_values(g, c.values().cwiseProduct(vext.cast<cd>())));
    return r;
  };
  CellField a = project_cells(times_v(u), table);
  CellField b = times_v(project_cells(u, table));
  for (std::size_t i = 0; i < a.comps.size(); ++i) a.comps[i] = a.comps[i] - b.comps[i];
  double an = std::sqrt(a.norm2());
  double un = std::sqrt(u.norm2());
  if (an == 0.0) return WaveField(g);
  return restrict_diagonal(a, 1e-9 * std::max(un, an) / an);
}

double hs_eps_norm2(const CellField& u, double s) {
  const Grid& g = u.grid();
  double total = 0.0;
  for (int b = 0; b < u.basis->size(); ++b) {
    const auto& k = (*u.basis)[b];
    double k2 = double(k[0]) * k[0] + double(k[1]) * k[1];
    const VectorXcd& sp = u.comps[std::size_t(b)].spectrum();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double w = std::norm(sp[Eigen::Index(i)]);
      if (w == 0.0) continue;
      double weight = s == 0.0 ? 1.0 : std::pow(1.0 + g.eps * g.eps * radius2(g, signed_index(g, i)) + k2, s);
      total += weight * w;
    }
  }
  return total * spectral_weight(g);
}

WaveField shifted_weak_limit(const WaveField& psi, const Wavevector& xi, std::optional<double> cutoff) {
  const Grid& g = psi.grid();
  if (xi.size() != g.dim) throw Error("weak limit: xi has the wrong dimension");
  Index2 mx{0, 0};
  for (int a = 0; a < g.dim; ++a) mx[std::size_t(a)] = g.lattice_index(xi[a]);
  const double c = cutoff.value_or(1.0 / std::sqrt(g.eps));
  VectorXcd out = VectorXcd::Zero(Eigen::Index(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    Index2 p = signed_index(g, i);
    if (radius2(g, p) > c * c) continue;
    Index2 m{p[0] + mx[0], p[1] + mx[1]};
    if (!in_range(g, m)) continue;
    out[Eigen::Index(i)] = psi.spectrum()[Eigen::Index(slot_of(g, m))];
  }
  return WaveField::from_spectrum(g, std::move(out));
}

}  // namespace semibloch
