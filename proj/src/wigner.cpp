#include "semibloch/wigner.hpp"

#include "semibloch/fft.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace semibloch {

namespace {

std::span<const cd> cview(const VectorXcd& v) { return {v.data(), std::size_t(v.size())}; }
std::span<cd> view(VectorXcd& v) { return {v.data(), std::size_t(v.size())}; }

int wrap_index(int m, int n) {
  int r = ((m % n) + n) % n;
  return r >= n / 2 ? r - n : r;
}

double wrap_coord(double x, double box) { return x - box * std::floor(x / box); }

// Rejects symbols whose x-profile jumps across the periodic boundary, i.e. whose
// support sticks out of the box and was cut off.
void check_periodic(const VectorXd& row, const char* what) {
  const Eigen::Index n = row.size();
  if (n < 4) return;
  double scale = row.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  double interior = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) interior = std::max(interior, std::abs(row[j] - row[j - 1]));
  double jump = std::abs(row[0] - row[n - 1]);
  if (jump > 4.0 * interior + 1e-12 * scale)
    throw Error(std::string(what) + ": observable does not fit in the box (wrap-around would corrupt it)");
}

Wavevector pair_frequency(const Grid& g, const std::array<int, 2>& m, const std::array<int, 2>& mp) {
  Wavevector xi(g.dim);
  for (int a = 0; a < g.dim; ++a)
    xi[a] = g.eps * 0.5 * kTwoPi * (m[std::size_t(a)] + mp[std::size_t(a)]) / g.box;
  return xi;
}

std::array<int, 2> signed_index(const Grid& g, std::size_t idx) {
  auto j = g.unravel(idx);
  return {g.freq_index(j[0]), g.dim == 2 ? g.freq_index(j[1]) : 0};
}

Wavevector scaled_frequency(const Grid& g, std::size_t idx) {
  Point f = g.frequency(idx);
  Wavevector xi(g.dim);
  for (int a = 0; a < g.dim; ++a) xi[a] = g.eps * f[std::size_t(a)];
  return xi;
}

WaveField weyl_general(const PhaseSymbol& a, const WaveField& f) {
  const Grid& g = f.grid();
  if (g.dim != 1) throw Error("weyl: general symbols are supported in d = 1 only; use a separable symbol");
  const int n = g.n;
  const double dxi = g.eps * kPi / g.box;
  VectorXcd out = VectorXcd::Zero(n);
  VectorXcd row(n), spec(n);
  VectorXd rrow(n);
  bool checked = false;
  Wavevector xi(1);
  for (int s = -n; s < n; ++s) {
    xi[0] = dxi * s;
    if (a.xi_support && (xi[0] < a.xi_support->first || xi[0] > a.xi_support->second)) continue;
    int lo = std::max(-n / 2, s - n / 2 + 1), hi = std::min(n / 2 - 1, s + n / 2);
    if (lo > hi) continue;
    for (int j = 0; j < n; ++j) rrow[j] = a.general({g.x(j), 0.0}, xi);
    if (!checked && rrow.cwiseAbs().maxCoeff() > 0.0) {
      check_periodic(rrow, "weyl");
      checked = true;
    }
    if (rrow.cwiseAbs().maxCoeff() == 0.0) continue;
    row = rrow.cast<cd>();
    fft::forward(cview(row), view(spec), 1, n);
    for (int m = lo; m <= hi; ++m) {
      int mp = s - m;
      int k = ((mp - m) % n + n) % n;
      out[g.slot(mp)] += spec[k] / double(n) * f.spectrum()[g.slot(m)];
    }
  }
  return WaveField::from_spectrum(g, std::move(out));
}

WaveField weyl_separable(const PhaseSymbol& a, const WaveField& f) {
  const Grid& g = f.grid();
  const auto total = Eigen::Index(g.size());
  VectorXcd phi(total), phat(total);
  VectorXd line(g.n);
  for (std::size_t i = 0; i < g.size(); ++i) phi[Eigen::Index(i)] = a.phi(g.point(i));
  if (g.dim == 1) {
    check_periodic(phi.real(), "weyl");
  } else {
    for (int j = 0; j < g.n; ++j) line[j] = phi[Eigen::Index(g.ravel(j, g.n / 2))].real();
    check_periodic(line, "weyl");
    for (int j = 0; j < g.n; ++j) line[j] = phi[Eigen::Index(g.ravel(g.n / 2, j))].real();
    check_periodic(line, "weyl");
  }
  fft::forward(cview(phi), view(phat), g.dim, g.n);
  const double top = phat.cwiseAbs().maxCoeff();
  std::vector<std::pair<std::array<int, 2>, cd>> offsets;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(phat[Eigen::Index(i)]) > 1e-13 * top)
      offsets.emplace_back(signed_index(g, i), phat[Eigen::Index(i)] / double(g.size()));
  VectorXcd out = VectorXcd::Zero(total);
  for (std::size_t i = 0; i < g.size(); ++i) {
    cd fm = f.spectrum()[Eigen::Index(i)];
    if (fm == cd{0.0, 0.0}) continue;
    auto m = signed_index(g, i);
    for (const auto& [q, c] : offsets) {
      std::array<int, 2> mp{wrap_index(m[0] + q[0], g.n), g.dim == 2 ? wrap_index(m[1] + q[1], g.n) : 0};
      out[Eigen::Index(g.ravel(g.slot(mp[0]), g.dim == 2 ? g.slot(mp[1]) : 0))] +=
          c * a.g(pair_frequency(g, m, mp)) * fm;
    }
  }
  return WaveField::from_spectrum(g, std::move(out));
}

}  // namespace

WignerGrid wigner_transform(const WaveField& f, int stride) {
  const Grid& g = f.grid();
  if (g.dim != 1) throw Error("wigner: the full transform is available in d = 1 only");
  if (stride < 1 || g.n % stride != 0) throw Error("wigner: stride must divide N");
  const int n = g.n;
  VectorXcd up = VectorXcd::Zero(2 * n);
  for (int m = -n / 2; m < n / 2; ++m) up[m < 0 ? m + 2 * n : m] = f.spectrum()[g.slot(m)];
  VectorXcd half(2 * n);
  fft::backward(cview(up), view(half), 1, 2 * n);
  half /= double(n);

  WignerGrid w;
  w.eps = g.eps;
  w.box = g.box;
  w.n = n;
  w.stride = stride;
  const int rows = n / stride;
  w.x.resize(rows);
  w.xi.resize(2 * n);
  w.w.resize(rows, 2 * n);
  for (int s = -n; s < n; ++s) w.xi[s + n] = w.dxi() * s;
  const double scale = 1.0 / (2.0 * n * w.dxi());
  VectorXcd c(2 * n), out(2 * n);
  for (int r = 0; r < rows; ++r) {
    const int j = r * stride;
    w.x[r] = g.x(j);
    const int centre = 2 * j;
    for (int l = -n; l < n; ++l) {
      cd a = half[((centre - l) % (2 * n) + 2 * n) % (2 * n)];
      cd b = half[((centre + l) % (2 * n) + 2 * n) % (2 * n)];
      c[l < 0 ? l + 2 * n : l] = a * std::conj(b);
    }
    fft::backward(cview(c), view(out), 1, 2 * n);
    for (int s = -n; s < n; ++s) {
      cd v = out[s < 0 ? s + 2 * n : s] * scale;
      w.w(r, s + n) = v.real();
      w.imag_residue = std::max(w.imag_residue, std::abs(v.imag()));
    }
  }
  return w;
}

VectorXd momentum_marginal(const WaveField& f) {
  const Grid& g = f.grid();
  if (g.dim != 1) throw Error("wigner: momentum marginal is available in d = 1 only");
  const int n = g.n;
  const double dxi = g.eps * kPi / g.box;
  const double h = g.step();
  VectorXd out = VectorXd::Zero(2 * n);
  for (int m = -n / 2; m < n / 2; ++m)
    out[2 * m + n] = h * h * std::norm(f.spectrum()[g.slot(m)]) / (g.box * dxi);
  return out;
}

PhaseSymbol PhaseSymbol::of(std::function<double(const Point&, const Wavevector&)> a,
                            std::optional<std::pair<double, double>> support) {
  PhaseSymbol p;
  p.general = std::move(a);
  p.xi_support = support;
  return p;
}

PhaseSymbol PhaseSymbol::separable(std::function<double(const Point&)> phi,
                                   std::function<double(const Wavevector&)> g) {
  PhaseSymbol p;
  p.phi = std::move(phi);
  p.g = std::move(g);
  return p;
}

WaveField weyl_apply(const PhaseSymbol& a, const WaveField& f) {
  return a.is_separable() ? weyl_separable(a, f) : weyl_general(a, f);
}

double wigner_pairing(const WignerGrid& w, const PhaseSymbol& a) {
  double s = 0.0;
  Wavevector xi(1);
  for (Eigen::Index c = 0; c < w.xi.size(); ++c) {
    xi[0] = w.xi[c];
    for (Eigen::Index r = 0; r < w.x.size(); ++r) s += w.w(r, c) * a({w.x[r], 0.0}, xi);
  }
  return s * w.dx() * w.dxi();
}

double weyl_expectation(const PhaseSymbol& a, const WaveField& f) {
  return inner(f, weyl_apply(a, f)).real();
}

std::vector<double> oscillation_tail(const WaveField& f, const std::vector<double>& radii) {
  const Grid& g = f.grid();
  std::vector<double> out;
  for (double r : radii) {
    double lim = r / g.eps, s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      Point q = g.frequency(i);
      if (std::hypot(q[0], q[1]) > lim) s += std::norm(f.spectrum()[Eigen::Index(i)]);
    }
    out.push_back(s * spectral_weight(g));
  }
  return out;
}

double cutoff_chi(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  double t = r - 1.0;
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

double TwoMicroObservable::homogeneity_defect(const std::vector<Wavevector>& xis) const {
  double worst = 0.0;
  for (const auto& xi : xis) {
    std::vector<Wavevector> dirs;
    if (xi.size() == 1) {
      dirs = {Wavevector::Constant(1, 1.0), Wavevector::Constant(1, -1.0)};
    } else {
      for (int k = 0; k < 8; ++k) {
        Wavevector w(2);
        w << std::cos(kTwoPi * k / 8), std::sin(kTwoPi * k / 8);
        dirs.push_back(w);
      }
    }
    for (const auto& w : dirs)
      for (double t : {2.0, 4.0}) worst = std::max(worst, std::abs(core(xi, t * r0 * w) - tail(xi, w)));
  }
  return worst;
}

TwoMicroBracket two_micro_bracket(const WaveField& f, const TwoMicroObservable& a, const CriticalSet& lambda,
                                  double r, double delta) {
  const double eps = f.grid().eps;
  if (r * eps >= delta)
    throw Error("two-micro bracket: R eps = " + std::to_string(r * eps) + " must stay below delta = " +
                std::to_string(delta));
  auto compact = PhaseSymbol::separable(a.phi, [&](const Wavevector& xi) {
    Wavevector eta = (xi - lambda.project(xi)) / eps;
    return a.core(xi, eta) * cutoff_chi(eta.norm() / r);
  });
  auto infinity = PhaseSymbol::separable(a.phi, [&](const Wavevector& xi) {
    Wavevector d = xi - lambda.project(xi);
    Wavevector eta = d / eps;
    return a.core(xi, eta) * (1.0 - cutoff_chi(eta.norm() / r)) * cutoff_chi(d.norm() / delta);
  });
  return {weyl_expectation(compact, f), weyl_expectation(infinity, f)};
}

TwoMicroReport extract_two_micro_data(const WaveField& f, const CriticalSet& lambda, const TwoMicroOptions& opt) {
  const Grid& g = f.grid();
  if (opt.r * g.eps >= opt.delta) throw Error("two-micro data: R eps must stay below delta");
  TwoMicroReport rep;
  rep.total_mass = f.norm2();
  if (auto t = oscillation_tail(f, {kTwoPi + 1.0}); t[0] > opt.oscillation_tol * rep.total_mass)
    rep.warnings.push_back("data is not eps-oscillating at R = 2 pi + 1 (tail fraction " +
                           std::to_string(t[0] / rep.total_mass) + "); weak limits may lose mass");

  // Distance to the critical set: listed points are taken literally, lines mod 2 pi.
  auto dist = [&](const Wavevector& xi) {
    if (lambda.kind == CriticalSet::Kind::line) return lambda.distance(xi);
    double best = 1e300;
    for (const auto& p : lambda.points) best = std::min(best, (xi - p).norm());
    return best;
  };
  const double w = spectral_weight(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double m = w * std::norm(f.spectrum()[Eigen::Index(i)]);
    if (m == 0.0) continue;
    double d = dist(scaled_frequency(g, i));
    double inner_part = cutoff_chi(d / (opt.r * g.eps));
    rep.compact_mass += m * inner_part;
    rep.infinity_mass += m * (1.0 - inner_part) * cutoff_chi(d / opt.delta);
  }

  double weights = 0.0;
  if (lambda.kind == CriticalSet::Kind::points) {
    for (const auto& p : lambda.points) {
      WaveField prof = shifted_weak_limit(f, p);
      TwoMicroSample s;
      s.xi = p;
      s.weight = prof.norm2();
      if (s.weight > 0.0) s.m0 = DensityOperator::rank_one(prof, s.weight, {0.0, 0.0}, p);
      weights += s.weight;
      rep.nu.push_back(std::move(s));
    }
  } else {
    if (g.dim != 2) throw Error("two-micro data: line critical sets need d = 2");
    const int na = lambda.axis, nt = 1 - lambda.axis;
    Grid fibre{1, g.box, g.n, g.eps};
    const int cells = std::max(1, int(std::lround(g.box / opt.cell_width)));
    const double h = g.step();
    for (double sigma : opt.sigma) {
      Wavevector centre(2);
      centre[na] = lambda.value;
      centre[nt] = sigma;
      WaveField prof = shifted_weak_limit(f, centre);
      for (int c = 0; c < cells; ++c) {
        std::vector<WaveField> cols;
        double lo = c * double(g.box) / cells, hi = (c + 1) * double(g.box) / cells;
        for (int jt = 0; jt < g.n; ++jt) {
          double xt = g.x(jt);
          if (xt < lo || xt >= hi) continue;
          VectorXcd col(g.n);
          for (int ja = 0; ja < g.n; ++ja) {
            std::size_t idx = na == 0 ? g.ravel(ja, jt) : g.ravel(jt, ja);
            col[ja] = prof.values()[Eigen::Index(idx)] * std::sqrt(h);
          }
          cols.push_back(WaveField::from_values(fibre, std::move(col)));
        }
        if (cols.empty()) continue;
        double mass = 0.0;
        for (const auto& col : cols) mass += col.norm2();
        if (!(mass > 1e-14 * rep.total_mass)) continue;
        TwoMicroSample s;
        s.xi = centre;
        s.v[std::size_t(nt)] = 0.5 * (lo + hi);
        s.m0 = DensityOperator::from_columns(cols);
        s.m0.v = s.v;
        s.m0.xi = centre;
        s.weight = s.m0.trace();
        weights += s.weight;
        rep.nu.push_back(std::move(s));
      }
    }
  }
  rep.offband_mass = rep.total_mass - weights - rep.infinity_mass;
  return rep;
}

std::vector<double> window_weights(const std::vector<double>& times) {
  const std::size_t n = times.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) {
    if (n == 1) w[0] = 1.0;
    return w;
  }
  const double t0 = times.front(), t1 = times.back();
  for (std::size_t i = 0; i < n; ++i) {
    double theta = 1.0 - std::abs(2.0 * (times[i] - t0) / (t1 - t0) - 1.0);
    double lo = i == 0 ? times[0] : 0.5 * (times[i - 1] + times[i]);
    double hi = i + 1 == n ? times[n - 1] : 0.5 * (times[i] + times[i + 1]);
    w[i] = theta * std::abs(hi - lo);
  }
  return w;
}

double localization_defect(const Trajectory& traj, const CriticalSet& lambda, double margin) {
  auto w = window_weights(traj.times);
  double off = 0.0, total = 0.0;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const WaveField& f = traj.snapshots[k];
    const Grid& g = f.grid();
    double o = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (lambda.distance(scaled_frequency(g, i)) > margin) o += std::norm(f.spectrum()[Eigen::Index(i)]);
    off += w[k] * o * spectral_weight(g);
    total += w[k] * f.norm2();
  }
  return total > 0.0 ? off / total : 0.0;
}

double invariance_defect(const Trajectory& traj, const PhaseSymbol& a, double s, const MultiplierSymbol& lambda) {
  if (s == 0.0) return 0.0;
  if (traj.snapshots.empty()) return 0.0;
  const double box = traj.snapshots.front().grid().box;
  PhaseSymbol moved;
  if (a.is_separable()) {
    moved = PhaseSymbol::of(
        [&](const Point& x, const Wavevector& xi) {
          Wavevector v = lambda.gradient(xi);
          return a.phi({wrap_coord(x[0] + s * v[0], box), 0.0}) * a.g(xi);
        },
        a.xi_support);
  } else {
    moved = PhaseSymbol::of(
        [&](const Point& x, const Wavevector& xi) {
          Wavevector v = lambda.gradient(xi);
          return a.general({wrap_coord(x[0] + s * v[0], box), 0.0}, xi);
        },
        a.xi_support);
  }
  auto w = window_weights(traj.times);
  double acc = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    if (w[k] == 0.0) continue;
    acc += w[k] * (weyl_expectation(moved, traj.snapshots[k]) - weyl_expectation(a, traj.snapshots[k]));
    norm += w[k];
  }
  return norm > 0.0 ? std::abs(acc) / norm : 0.0;
}

}  // namespace semibloch
