#include "semibloch/dynamics.hpp"

#include "semibloch/fft.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>

namespace semibloch {

namespace {

Wavevector scaled_frequency(const Grid& g, std::size_t idx) {
  Point f = g.frequency(idx);
  Wavevector xi(g.dim);
  for (int a = 0; a < g.dim; ++a) xi[a] = g.eps * f[std::size_t(a)];
  return xi;
}

void check_times(const std::vector<double>& times) {
  if (times.empty() || times.front() != 0.0) throw Error("evolve: snapshot times must start at 0");
  if (times.size() < 2) return;
  double sign = times[1] > times[0] ? 1.0 : -1.0;
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!((times[i] - times[i - 1]) * sign > 0.0)) throw Error("evolve: snapshot times must be strictly monotone");
}

struct SplitProblem {
  Grid grid;
  VectorXd kinetic;                            // symbol per FFT slot
  std::function<VectorXd(double)> potential;  // samples per grid point
  bool time_dependent = false;
  bool zero_potential = false;
};

// Strang splitting: half potential phase at the step midpoint, exact multiplier, half potential.
Trajectory run_split(const SplitProblem& p, const WaveField& f0, const std::vector<double>& times, double dt,
                     std::string equation) {
  check_times(times);
  if (!(dt > 0.0)) throw Error("evolve: dt must be positive");
  const Grid& g = p.grid;
  const auto n_total = Eigen::Index(g.size());
  Trajectory traj;
  traj.equation = std::move(equation);
  traj.eps = g.eps;
  traj.dt = dt;
  VectorXcd vals = f0.values();
  VectorXcd spec(n_total);
  VectorXcd kin_phase(n_total), half_phase(n_total);
  VectorXd pot;
  double cached_h = std::numeric_limits<double>::quiet_NaN();
  bool pot_ready = false;
  long step_index = 0;

  auto record = [&](double t) {
    WaveField f = WaveField::from_values(g, vals);
    traj.times.push_back(t);
    traj.norms.push_back(f.norm());
    traj.snapshots.push_back(std::move(f));
  };
  record(0.0);

  for (std::size_t s = 1; s < times.size(); ++s) {
    const double t0 = times[s - 1];
    const double span_t = times[s] - t0;
    long steps = p.zero_potential ? 1 : std::max(1L, long(std::ceil(std::abs(span_t) / dt - 1e-9)));
    const double h = span_t / double(steps);
    if (h != cached_h) {
      for (Eigen::Index i = 0; i < n_total; ++i) kin_phase[i] = std::polar(1.0, -h * p.kinetic[i]);
      cached_h = h;
      pot_ready = false;
    }
    for (long k = 0; k < steps; ++k) {
      const double t_mid = t0 + (double(k) + 0.5) * h;
      if (!p.zero_potential && (p.time_dependent || !pot_ready)) {
        pot = p.potential(t_mid);
        for (Eigen::Index i = 0; i < n_total; ++i) half_phase[i] = std::polar(1.0, -0.5 * h * pot[i]);
        pot_ready = true;
      }
      if (!p.zero_potential) vals.array() *= half_phase.array();
      fft::forward(std::span<const cd>(vals.data(), vals.size()), std::span<cd>(spec.data(), spec.size()), g.dim,
                   g.n);
      spec.array() *= kin_phase.array();
      fft::backward(std::span<const cd>(spec.data(), spec.size()), std::span<cd>(vals.data(), vals.size()), g.dim,
                    g.n);
      vals /= double(g.size());
      if (!p.zero_potential) vals.array() *= half_phase.array();
      ++step_index;
      if (!vals.allFinite())
        throw Error("evolve: non-finite value after step " + std::to_string(step_index) + " (" + traj.equation + ")");
    }
    record(times[s]);
  }
  return traj;
}

VectorXd kinetic_symbol(const Grid& g, const MatrixXd& b) {
  VectorXd k(Eigen::Index(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point f = g.frequency(i);
    Eigen::VectorXd xi(g.dim);
    for (int a = 0; a < g.dim; ++a) xi[a] = f[std::size_t(a)];
    k[Eigen::Index(i)] = 0.5 * xi.dot(b * xi);
  }
  return k;
}

}  // namespace

double CriticalSet::distance(const Wavevector& xi) const {
  if (kind == Kind::line) return std::abs(fold(xi[axis] - value));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, periodic_distance(xi, p));
  return best;
}

Wavevector CriticalSet::project(const Wavevector& xi) const {
  Wavevector out = xi;
  if (kind == Kind::line) {
    out[axis] = xi[axis] + fold(value - xi[axis]);
    return out;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    double d = periodic_distance(xi, p);
    if (d < best) {
      best = d;
      for (Eigen::Index a = 0; a < xi.size(); ++a) out[a] = xi[a] + fold(p[a] - xi[a]);
    }
  }
  return out;
}

MultiplierSymbol MultiplierSymbol::closed_form(std::shared_ptr<const BandModel> model, double growth,
                                               CriticalSet critical) {
  MultiplierSymbol s;
  s.model_ = std::move(model);
  s.growth_ = growth;
  s.critical_ = std::move(critical);
  return s;
}

MultiplierSymbol MultiplierSymbol::bloch(PeriodicPotential v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
                                         CriticalSet critical, int threads) {
  MultiplierSymbol s;
  s.model_ = std::make_shared<BlochBand>(v, basis, n);
  s.growth_ = 0.0;  // bands are periodic, hence bounded
  s.critical_ = std::move(critical);
  s.tabulated_ = true;
  s.v_ = std::move(v);
  s.basis_ = std::move(basis);
  s.band_ = n;
  s.threads_ = threads;
  return s;
}

std::shared_ptr<const BandTable> MultiplierSymbol::band_table(const Grid& g) const {
  if (!tabulated_) throw Error("multiplier: closed-form symbol has no band table");
  std::lock_guard lock(cache_->mu);
  for (const auto& [grid, table] : cache_->tables)
    if (grid == g) return table;
  auto table = std::make_shared<const BandTable>(g, v_, basis_, band_, threads_);
  cache_->tables.emplace_back(g, table);
  return table;
}

VectorXd MultiplierSymbol::table(const Grid& g) const {
  VectorXd out(Eigen::Index(g.size()));
  if (!tabulated_) {
    for (std::size_t i = 0; i < g.size(); ++i) out[Eigen::Index(i)] = model_->value(scaled_frequency(g, i));
    return out;
  }
  auto bt = band_table(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto j = g.unravel(i);
    std::array<int, 2> m{g.freq_index(j[0]), g.dim == 2 ? g.freq_index(j[1]) : 0};
    std::array<int, 2> shift;
    int f = bt->fiber_of(m, shift);
    if (!bt->simple(f)) {
      auto q = bt->quasimomentum(f);
      throw Error("multiplier: band " + std::to_string(band_ + 1) + " is clustered at eps*Xi = " +
                  std::to_string(q[0]) + (q.size() > 1 ? ", " + std::to_string(q[1]) : ""));
    }
    out[Eigen::Index(i)] = bt->energy(f);
  }
  return out;
}

double MultiplierSymbol::growth_ratio(const Grid& g) const {
  VectorXd t = table(g);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double r = scaled_frequency(g, i).norm();
    worst = std::max(worst, std::abs(t[Eigen::Index(i)]) / (1.0 + std::pow(r, growth_)));
  }
  return worst;
}

Trajectory evolve_full(const WaveField& psi0, const PeriodicPotential& v, const ExtPotential& vext,
                       const std::vector<double>& times, double dt, double dt_limit_factor) {
  const Grid& g = psi0.grid();
  g.require_commensurate();
  if (v.dim() != g.dim) throw Error("evolve_full: potential dimension does not match the grid");
  const double limit = dt_limit_factor * g.eps * g.eps;
  if (dt > limit * (1.0 + 1e-12))
    throw Error("evolve_full: dt = " + std::to_string(dt) + " exceeds " + std::to_string(dt_limit_factor) +
                " eps^2 = " + std::to_string(limit));
  VectorXd vper(Eigen::Index(g.size()));
  const double inv_eps2 = 1.0 / (g.eps * g.eps);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.point(i);
    vper[Eigen::Index(i)] = inv_eps2 * v.evaluate({x[0] / g.eps, x[1] / g.eps});
  }
  SplitProblem p;
  p.grid = g;
  p.kinetic = kinetic_symbol(g, MatrixXd::Identity(g.dim, g.dim));
  p.time_dependent = vext.time_dependent();
  p.potential = [&](double t) -> VectorXd {
    if (vext.is_zero()) return vper;
    return vper + vext.sample(g, t);
  };
  return run_split(p, psi0, times, dt, "full");
}

Trajectory evolve_multiplier(const WaveField& u0, const MultiplierSymbol& lambda, const ExtPotential& vext,
                             const std::vector<double>& times, double dt) {
  const Grid& g = u0.grid();
  SplitProblem p;
  p.grid = g;
  p.kinetic = lambda.table(g) / (g.eps * g.eps);
  p.time_dependent = vext.time_dependent();
  p.zero_potential = vext.is_zero();
  p.potential = [&](double t) { return vext.sample(g, t); };
  return run_split(p, u0, times, dt, "multiplier");
}

Trajectory evolve_effective_mass(const WaveField& phi0, const MatrixXd& b, const ExtPotential& vext,
                                 const std::vector<double>& times, double dt) {
  const Grid& g = phi0.grid();
  if (b.rows() != g.dim || b.cols() != g.dim) throw Error("evolve_effective_mass: B must be d x d");
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + b.cwiseAbs().maxCoeff()))
    throw Error("evolve_effective_mass: B is not symmetric");
  SplitProblem p;
  p.grid = g;
  p.kinetic = kinetic_symbol(g, 0.5 * (b + b.transpose()));
  p.time_dependent = vext.time_dependent();
  p.zero_potential = vext.is_zero();
  p.potential = [&](double t) { return vext.sample(g, t); };
  return run_split(p, phi0, times, dt, "effective_mass");
}

double full_energy(const WaveField& psi, const PeriodicPotential& v) {
  const Grid& g = psi.grid();
  double kin = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point f = g.frequency(i);
    kin += 0.5 * (f[0] * f[0] + f[1] * f[1]) * std::norm(psi.spectrum()[Eigen::Index(i)]);
  }
  kin *= spectral_weight(g);
  double pot = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.point(i);
    pot += v.evaluate({x[0] / g.eps, x[1] / g.eps}) * std::norm(psi.values()[Eigen::Index(i)]);
  }
  pot *= g.cell_volume() / (g.eps * g.eps);
  return kin + pot;
}

DensityOperator DensityOperator::rank_one(const WaveField& u, double weight, Point v, Wavevector xi) {
  double n = u.norm();
  if (n == 0.0) throw Error("density operator: zero orbital");
  DensityOperator m;
  m.weights = VectorXd::Constant(1, weight);
  m.orbitals.push_back(u * cd(1.0 / n));
  m.v = v;
  m.xi = std::move(xi);
  return m;
}

DensityOperator DensityOperator::from_columns(const std::vector<WaveField>& columns, double rel_tol) {
  if (columns.empty()) throw Error("density operator: no columns");
  const Grid& g = columns.front().grid();
  const double root = std::sqrt(g.cell_volume());
  MatrixXcd a(Eigen::Index(g.size()), Eigen::Index(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) a.col(Eigen::Index(j)) = columns[j].values() * root;
  // Thin SVD keeps the orbitals orthonormal even when the weights spread over many decades.
  Eigen::BDCSVD<MatrixXcd> svd(a, Eigen::ComputeThinU);
  const VectorXd& sv = svd.singularValues();
  DensityOperator m;
  std::vector<double> w;
  const double top = sv.size() > 0 ? sv[0] * sv[0] : 0.0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    double ev = sv[k] * sv[k];
    if (!(ev > rel_tol * top)) continue;
    m.orbitals.push_back(WaveField::from_values(g, svd.matrixU().col(k) / root));
    w.push_back(ev);
  }
  m.weights = Eigen::Map<VectorXd>(w.data(), Eigen::Index(w.size()));
  return m;
}

double DensityOperator::orthonormality_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < orbitals.size(); ++i)
    for (std::size_t j = 0; j < orbitals.size(); ++j) {
      cd ip = inner(orbitals[i], orbitals[j]);
      worst = std::max(worst, std::abs(ip - (i == j ? cd{1.0, 0.0} : cd{0.0, 0.0})));
    }
  return worst;
}

VectorXd DensityOperator::density() const {
  VectorXd rho = VectorXd::Zero(orbitals.front().values().size());
  for (int j = 0; j < rank(); ++j) rho += weights[j] * orbitals[std::size_t(j)].density();
  return rho;
}

double DensityOperator::expectation(const VectorXd& phi) const {
  return orbitals.front().grid().cell_volume() * phi.dot(density());
}

HeisenbergTrajectory evolve_heisenberg(const DensityOperator& m0, const MatrixXd& curvature,
                                       const ExtPotential& vext, int axis, const std::vector<double>& times,
                                       double dt) {
  if (m0.orbitals.empty()) throw Error("heisenberg: empty density operator");
  const Grid& g = m0.orbitals.front().grid();
  if (curvature.rows() != g.dim || curvature.cols() != g.dim)
    throw Error("heisenberg: curvature must match the orbital grid dimension");
  SplitProblem p;
  p.grid = g;
  p.kinetic = kinetic_symbol(g, 0.5 * (curvature + curvature.transpose()));
  p.time_dependent = vext.time_dependent();
  p.zero_potential = vext.is_zero();
  const Point base = m0.v;
  p.potential = [&](double t) -> VectorXd {
    if (g.dim == 1) return vext.sample_line(g, t, base, axis);
    return vext.sample(g, t);
  };
  std::vector<Trajectory> runs;
  for (const auto& u : m0.orbitals) runs.push_back(run_split(p, u, times, dt, "heisenberg"));
  HeisenbergTrajectory out;
  out.times = runs.front().times;
  for (std::size_t s = 0; s < out.times.size(); ++s) {
    DensityOperator m = m0;
    for (std::size_t j = 0; j < runs.size(); ++j) m.orbitals[j] = runs[j].snapshots[s];
    out.traces.push_back(m.trace());
    out.states.push_back(std::move(m));
  }
  return out;
}

}  // namespace semibloch
