#include "semibloch/bandstructure.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>

namespace semibloch {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

Wavevector band_gradient(const BlochFiber& fiber, int n) {
  fiber.require_simple(n);
  const auto& b = *fiber.basis;
  Wavevector g = Wavevector::Zero(b.dim());
  for (int i = 0; i < b.size(); ++i) {
    double w = std::norm(fiber.vectors(i, n));
    for (int a = 0; a < b.dim(); ++a) g[a] += (fiber.xi[a] + kTwoPi * b[i][a]) * w;
  }
  return g;
}

MatrixXd band_hessian(const PeriodicPotential& v, std::shared_ptr<const PlaneWaveBasis> basis, int n,
                      const Wavevector& xi) {
  const int d = basis->dim();
  auto h = assemble_fiber_hamiltonian(v, basis, xi);
  auto full = solve_fiber(h, int(h.matrix.rows()));
  full.require_simple(n);
  const auto& b = *basis;
  const int m = b.size();
  // A_a c_n for each direction.
  std::vector<VectorXcd> a_cn(std::size_t(d), VectorXcd::Zero(m));
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < m; ++i) a_cn[std::size_t(a)][i] = (xi[a] + kTwoPi * b[i][a]) * full.vectors(i, n);
  MatrixXd hess = MatrixXd::Identity(d, d);
  const double rn = full.energies[n];
  for (int j = 0; j < m; ++j) {
    if (j == n) continue;
    double gap = rn - full.energies[j];
    VectorXcd proj(d);
    for (int a = 0; a < d; ++a) proj[a] = full.vectors.col(j).dot(a_cn[std::size_t(a)]);  // <phi_m, A_a phi_n>
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) hess(a, c) += 2.0 * (std::conj(proj[a]) * proj[c]).real() / gap;
  }
  return 0.5 * (hess + hess.transpose());
}

BlochBand::BlochBand(PeriodicPotential v, std::shared_ptr<const PlaneWaveBasis> basis, int n)
    : v_(std::move(v)), basis_(std::move(basis)), n_(n) {
  if (n < 0 || n >= basis_->size()) throw Error("bloch band: band index outside the basis");
}

BlochFiber BlochBand::fiber(const Wavevector& xi) const {
  return solve_fiber(v_, basis_, xi, std::min(n_ + 2, basis_->size()));
}

double BlochBand::value(const Wavevector& xi) const { return fiber(xi).energies[n_]; }

Wavevector BlochBand::gradient(const Wavevector& xi) const { return band_gradient(fiber(xi), n_); }

MatrixXd BlochBand::hessian(const Wavevector& xi) const { return band_hessian(v_, basis_, n_, xi); }

bool BlochBand::simple(const Wavevector& xi) const { return fiber(xi).simple(n_); }

ClosedFormBand ClosedFormBand::cosine(int dim) {
  return ClosedFormBand(
      dim, [](const Wavevector& xi) { return 1.0 - std::cos(xi[0]); },
      [dim](const Wavevector& xi) {
        Wavevector g = Wavevector::Zero(dim);
        g[0] = std::sin(xi[0]);
        return g;
      },
      [dim](const Wavevector& xi) {
        MatrixXd h = MatrixXd::Zero(dim, dim);
        h(0, 0) = std::cos(xi[0]);
        return h;
      });
}

ClosedFormBand ClosedFormBand::quadratic(int dim) {
  return ClosedFormBand(
      dim, [](const Wavevector& xi) { return 0.5 * xi.squaredNorm(); }, [](const Wavevector& xi) { return xi; },
      [dim](const Wavevector&) { return MatrixXd::Identity(dim, dim); });
}

namespace {

Wavevector node_xi(int dim, int npa, int idx) {
  Wavevector xi(dim);
  if (dim == 1) {
    xi[0] = kTwoPi * idx / npa;
  } else {
    xi[0] = kTwoPi * (idx / npa) / npa;
    xi[1] = kTwoPi * (idx % npa) / npa;
  }
  return xi;
}

std::vector<int> neighbours(int dim, int npa, int idx) {
  std::vector<int> out;
  if (dim == 1) {
    out = {(idx + 1) % npa, (idx + npa - 1) % npa};
  } else {
    int a = idx / npa, b = idx % npa;
    for (int da = -1; da <= 1; ++da)
      for (int db = -1; db <= 1; ++db) {
        if (da == 0 && db == 0) continue;
        out.push_back(((a + da + npa) % npa) * npa + (b + db + npa) % npa);
      }
  }
  return out;
}

Wavevector folded(const Wavevector& xi) {
  Wavevector f = xi;
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = fold(f[i]);
  return f;
}

}  // namespace

BandGrid sample_band(const BandModel& model, int points_per_axis, int threads) {
  if (points_per_axis < 2) throw Error("band grid: need at least two points per axis");
  BandGrid g;
  g.dim = model.dim();
  g.points_per_axis = points_per_axis;
  const int total = g.dim == 1 ? points_per_axis : points_per_axis * points_per_axis;
  g.nodes.resize(std::size_t(total));
  g.values.resize(total);
  g.gradients.assign(std::size_t(total), Wavevector::Zero(g.dim));
  g.simple.assign(std::size_t(total), false);
  std::vector<char> simple(std::size_t(total), 0);
  parallel_for(total, threads, [&](int i) {
    Wavevector xi = node_xi(g.dim, points_per_axis, i);
    g.nodes[std::size_t(i)] = xi;
    g.values[i] = model.value(xi);
    if (model.simple(xi)) {
      simple[std::size_t(i)] = 1;
      g.gradients[std::size_t(i)] = model.gradient(xi);
    }
  });
  for (int i = 0; i < total; ++i) g.simple[std::size_t(i)] = simple[std::size_t(i)] != 0;
  return g;
}

double wraparound_defect(const BandModel& model, const BandGrid& grid) {
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    for (int a = 0; a < grid.dim; ++a) {
      Wavevector shifted = grid.nodes[i];
      shifted[a] += kTwoPi;
      worst = std::max(worst, std::abs(model.value(shifted) - grid.values[Eigen::Index(i)]));
    }
    if (grid.dim == 2 && i > std::size_t(grid.points_per_axis)) break;  // first row is enough in 2-D
  }
  return worst;
}

int symmetric_rank(const MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()));
  const VectorXd& ev = es.eigenvalues();
  double tol = 1e-6 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  int r = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) r += std::abs(ev[i]) > tol ? 1 : 0;
  return r;
}

double periodic_distance(const Wavevector& a, const Wavevector& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double d = fold(a[i] - b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

CriticalSearch find_critical_points(const BandGrid& grid, const BandModel& model, const NewtonOptions& opt,
                                    int threads) {
  CriticalSearch out;
  const int total = int(grid.nodes.size());
  const int npa = grid.points_per_axis;
  std::vector<int> seeds;
  for (int i = 0; i < total; ++i) {
    if (!grid.simple[std::size_t(i)]) {
      out.cluster_nodes.push_back(grid.nodes[std::size_t(i)]);
      continue;
    }
    double gi = grid.gradients[std::size_t(i)].norm();
    bool is_min = true;
    for (int j : neighbours(grid.dim, npa, i))
      if (grid.simple[std::size_t(j)] && grid.gradients[std::size_t(j)].norm() < gi) is_min = false;
    if (is_min) seeds.push_back(i);
  }

  struct Outcome {
    bool converged = false;
    Wavevector xi;
    double residual = 0.0;
  };
  std::vector<Outcome> outcomes(seeds.size());
  parallel_for(int(seeds.size()), threads, [&](int s) {
    Wavevector xi = grid.nodes[std::size_t(seeds[std::size_t(s)])];
    Outcome& o = outcomes[std::size_t(s)];
    try {
      Wavevector g = model.gradient(xi);
      double gn = g.norm();
      for (int it = 0; it < opt.max_iterations && gn > opt.tolerance; ++it) {
        MatrixXd h = model.hessian(xi);
        Wavevector step = -h.completeOrthogonalDecomposition().solve(g);
        double damping = 1.0;
        Wavevector trial = xi + step;
        Wavevector gt = model.gradient(trial);
        for (int halvings = 0; gt.norm() > gn && halvings < 30; ++halvings) {
          damping *= 0.5;
          trial = xi + damping * step;
          gt = model.gradient(trial);
        }
        xi = trial;
        g = gt;
        gn = g.norm();
      }
      o.xi = xi;
      o.residual = gn;
      o.converged = gn <= opt.tolerance;
    } catch (const Error&) {
      o.xi = xi;
      o.converged = false;
    }
  });

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const Outcome& o = outcomes[s];
    if (!o.converged) {
      out.unresolved.push_back(grid.nodes[std::size_t(seeds[s])]);
      continue;
    }
    Wavevector xf = folded(o.xi);
    bool dup = false;
    for (const auto& p : out.points)
      if (periodic_distance(p.xi_star, xf) < opt.dedup_distance) dup = true;
    if (dup) continue;
    CriticalPoint cp;
    cp.xi_star = xf;
    cp.grad_residual = o.residual;
    cp.hessian = model.hessian(o.xi);
    cp.hessian_rank = symmetric_rank(cp.hessian);
    cp.degenerate = cp.hessian_rank < grid.dim;
    out.points.push_back(std::move(cp));
  }

  // Connected components of near-critical nodes around degenerate points.
  const double h_xi = kTwoPi / npa;
  std::vector<char> assigned(std::size_t(total), 0);
  for (const auto& p : out.points) {
    if (!p.degenerate) continue;
    double scale = std::max(1.0, p.hessian.cwiseAbs().maxCoeff());
    double thresh = 0.5 * h_xi * scale;
    int start = -1;
    double best = 1e300;
    for (int i = 0; i < total; ++i) {
      double d = periodic_distance(grid.nodes[std::size_t(i)], p.xi_star);
      if (d < best) best = d, start = i;
    }
    if (start < 0 || assigned[std::size_t(start)]) continue;
    ManifoldCandidate mc;
    mc.codimension = p.hessian_rank;
    std::deque<int> queue{start};
    assigned[std::size_t(start)] = 1;
    while (!queue.empty()) {
      int i = queue.front();
      queue.pop_front();
      mc.nodes.push_back(grid.nodes[std::size_t(i)]);
      for (int j : neighbours(grid.dim, npa, i)) {
        if (assigned[std::size_t(j)] || !grid.simple[std::size_t(j)]) continue;
        if (grid.gradients[std::size_t(j)].norm() > thresh) continue;
        assigned[std::size_t(j)] = 1;
        queue.push_back(j);
      }
    }
    out.manifolds.push_back(std::move(mc));
  }
  return out;
}

}  // namespace semibloch
