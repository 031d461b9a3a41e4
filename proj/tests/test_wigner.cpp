#include "doctest.h"

#include "semibloch/wigner.hpp"

#include <cmath>
#include <random>

using namespace semibloch;

namespace {

Wavevector xi1(double x) { return Wavevector::Constant(1, x); }

WaveField gaussian_packet(const Grid& g, double c, double w, double xi0) {
  return WaveField::sample(g, [&](const Point& x) {
    return std::exp(-(x[0] - c) * (x[0] - c) / (2 * w * w)) * std::polar(1.0, xi0 * x[0] / g.eps);
  });
}

// Smooth random field: spectrum decays like a Gaussian in eps Xi.
WaveField random_field(const Grid& g, std::mt19937& rng, double decay = 2.0) {
  std::normal_distribution<double> nd;
  VectorXcd s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point q = g.frequency(i);
    double r = g.eps * std::hypot(q[0], q[1]);
    s[Eigen::Index(i)] = cd(nd(rng), nd(rng)) * std::exp(-decay * r * r);
  }
  return WaveField::from_spectrum(g, s);
}

CriticalSet points(std::vector<double> xs) {
  CriticalSet c;
  for (double x : xs) c.points.push_back(xi1(x));
  return c;
}

}  // namespace

TEST_CASE("Wigner marginals are exact") {
  std::mt19937 rng(3);
  Grid g = Grid::make(1, 8, 1.0 / 8, 3);
  WaveField f = random_field(g, rng);
  auto w = wigner_transform(f);
  CHECK(w.imag_residue <= 1e-10 * f.norm2());
  CHECK(std::abs(w.mass() - f.norm2()) <= 1e-10 * f.norm2());
  VectorXd rho = f.density();
  for (int j = 0; j < g.n; ++j) CHECK(std::abs(w.w.row(j).sum() * w.dxi() - rho[j]) <= 1e-8 * rho.maxCoeff());
  VectorXd mom = momentum_marginal(f);
  VectorXd col = w.w.colwise().sum().transpose() * w.dx();
  CHECK((col - mom).cwiseAbs().maxCoeff() <= 1e-8 * mom.maxCoeff());
}

TEST_CASE("Wigner function of a Gaussian packet matches the closed form") {
  const double eps = 1.0 / 16, c = 4.0, w0 = 0.4;
  Grid g = Grid::make(1, 8, eps, 2);
  const double xs = kTwoPi * 16 / 8 * eps;  // lattice frequency m = 16
  auto w = wigner_transform(gaussian_packet(g, c, w0, xs), 4);
  // The periodic image produces a (-1)^s ghost at x = c + L/2; compare on the half box around c.
  double worst = 0.0;
  for (Eigen::Index r = 0; r < w.x.size(); ++r) {
    if (std::abs(w.x[r] - c) > 1.5) continue;
    for (Eigen::Index s = 0; s < w.xi.size(); ++s) {
      double dx = w.x[r] - c, dk = w.xi[s] - xs;
      double exact = w0 / (std::sqrt(kPi) * eps) * std::exp(-dx * dx / (w0 * w0) - w0 * w0 * dk * dk / (eps * eps));
      worst = std::max(worst, std::abs(w.w(r, s) - exact));
    }
  }
  CHECK(worst <= 1e-6);
  // The ghost row is large pointwise but integrates to |f(0)|^2 ~ 0.
  const Eigen::Index ghost = 0;  // x = 0 = c - L/2
  CHECK(w.w.row(ghost).cwiseAbs().maxCoeff() >= 1.0);
  CHECK(std::abs(w.w.row(ghost).sum() * w.dxi()) <= 1e-10);
}

TEST_CASE("Weyl quantization pairs exactly with the Wigner transform") {
  std::mt19937 rng(11);
  Grid g = Grid::make(1, 8, 1.0 / 8, 2);
  auto a = PhaseSymbol::of([](const Point& x, const Wavevector& xi) {
    return std::cos(kTwoPi * x[0] / 8) * std::exp(-xi[0] * xi[0]) + std::sin(kTwoPi * 2 * x[0] / 8) * std::tanh(xi[0]);
  });
  for (int trial = 0; trial < 3; ++trial) {
    WaveField f = random_field(g, rng);
    double lhs = weyl_expectation(a, f), rhs = wigner_pairing(wigner_transform(f), a);
    CHECK(std::abs(lhs - rhs) <= 1e-7 * f.norm2());
  }
}

TEST_CASE("Weyl quantization of x-only and xi-only symbols") {
  std::mt19937 rng(5);
  Grid g = Grid::make(1, 8, 1.0 / 8, 2);
  WaveField f = random_field(g, rng, 8.0);
  auto phi = [](const Point& x) { return 1.0 + 0.5 * std::cos(kTwoPi * x[0] / 8); };
  WaveField exact_x = WaveField::from_values(g, f.values().cwiseProduct(VectorXd(VectorXd::NullaryExpr(
                                                    g.n, [&](Eigen::Index j) { return phi({g.x(int(j)), 0.0}); }))
                                                                            .cast<cd>()));
  auto ax = PhaseSymbol::of([&](const Point& x, const Wavevector&) { return phi(x); });
  CHECK((weyl_apply(ax, f) - exact_x).norm() <= 1e-10 * f.norm());
  auto sx = PhaseSymbol::separable(phi, [](const Wavevector&) { return 1.0; });
  CHECK((weyl_apply(sx, f) - exact_x).norm() <= 1e-10 * f.norm());

  auto gx = [](const Wavevector& xi) { return std::exp(-xi[0] * xi[0]); };
  VectorXcd s = f.spectrum();
  for (int j = 0; j < g.n; ++j) s[j] *= gx(xi1(g.eps * g.freq(j)));
  WaveField exact_xi = WaveField::from_spectrum(g, s);
  auto axi = PhaseSymbol::of([&](const Point&, const Wavevector& xi) { return gx(xi); });
  CHECK((weyl_apply(axi, f) - exact_xi).norm() <= 1e-10 * f.norm());
  auto sxi = PhaseSymbol::separable([](const Point&) { return 1.0; }, gx);
  CHECK((weyl_apply(sxi, f) - exact_xi).norm() <= 1e-10 * f.norm());
}

TEST_CASE("Weyl operators of real symbols are self-adjoint") {
  std::mt19937 rng(9);
  Grid g = Grid::make(1, 8, 1.0 / 8, 2);
  WaveField a = random_field(g, rng), b = random_field(g, rng);
  auto gen = PhaseSymbol::of([](const Point& x, const Wavevector& xi) { return std::sin(kTwoPi * x[0] / 8 + xi[0]); });
  auto sep = PhaseSymbol::separable([](const Point& x) { return std::exp(-(x[0] - 4) * (x[0] - 4)); },
                                    [](const Wavevector& xi) { return std::cos(xi[0]); });
  for (const auto* p : {&gen, &sep}) {
    cd lhs = inner(weyl_apply(*p, a), b), rhs = inner(a, weyl_apply(*p, b));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * a.norm() * b.norm());
  }
}

TEST_CASE("separable Weyl operator in 2-D matches the product oracle") {
  // phi(x) g(xi) with phi depending on x1 and g on xi2 factorizes into commuting operators.
  std::mt19937 rng(13);
  Grid g = Grid::make(2, 4, 1.0 / 4, 1);
  WaveField f = random_field(g, rng);
  auto phi = [](const Point& x) { return std::cos(kTwoPi * x[0] / 4); };
  auto gx = [](const Wavevector& xi) { return std::exp(-xi[1] * xi[1]); };
  VectorXcd s = f.spectrum();
  for (std::size_t i = 0; i < g.size(); ++i) s[Eigen::Index(i)] *= std::exp(-std::pow(g.eps * g.frequency(i)[1], 2));
  WaveField m = WaveField::from_spectrum(g, s);
  VectorXcd v = m.values();
  for (std::size_t i = 0; i < g.size(); ++i) v[Eigen::Index(i)] *= phi(g.point(i));
  CHECK((weyl_apply(PhaseSymbol::separable(phi, gx), f) - WaveField::from_values(g, v)).norm() <= 1e-10 * f.norm());
}

TEST_CASE("symbols cut off by the box are rejected") {
  Grid g = Grid::make(1, 8, 1.0 / 8, 2);
  WaveField f = gaussian_packet(g, 4.0, 1.0, 0.0);
  auto ramp = PhaseSymbol::separable([](const Point& x) { return x[0]; }, [](const Wavevector&) { return 1.0; });
  CHECK_THROWS_AS(weyl_apply(ramp, f), Error);
}

TEST_CASE("oscillation tails of a plane-wave packet") {
  const double eps = 1.0 / 16;
  Grid g = Grid::make(1, 16, eps, 3);
  WaveField f = gaussian_packet(g, 8.0, 2.0, kTwoPi * 48 / 16 * eps);  // lattice frequency m = 48
  auto t = oscillation_tail(f, {0.5, 4.0});
  CHECK(std::abs(t[0] - f.norm2()) <= 1e-10 * f.norm2());
  CHECK(t[1] <= 1e-12 * f.norm2());
  CHECK(cutoff_chi(0.5) == 1.0);
  CHECK(cutoff_chi(2.5) == 0.0);
  CHECK(cutoff_chi(1.5) == doctest::Approx(0.5));
}

TEST_CASE("two-microlocal bracket: the total is independent of R and mass migrates to infinity") {
  TwoMicroObservable a;
  a.phi = [](const Point&) { return 1.0; };
  a.core = [](const Wavevector&, const Wavevector&) { return 1.0; };
  a.tail = a.core;
  CHECK(a.homogeneity_defect({xi1(0.0)}) == 0.0);
  auto crit = points({0.0});

  std::vector<double> compact_fraction;
  for (double eps : {1.0 / 16, 1.0 / 64}) {
    Grid g = Grid::make(1, 16, eps, 2);
    // Second component sits at eta ~ eps^{-1/2} from the critical point.
    const int m = int(std::lround(16 / (kTwoPi * std::sqrt(eps))));
    const double shift = kTwoPi * m / 16;
    WaveField f = WaveField::sample(g, [&](const Point& x) {
      return std::exp(-(x[0] - 8) * (x[0] - 8) / 8) * (1.0 + std::polar(1.0, shift * x[0]));
    });
    auto b4 = two_micro_bracket(f, a, crit, 4.0);
    auto b2 = two_micro_bracket(f, a, crit, 2.0);
    CHECK(std::abs((b4.compact + b4.infinity) - (b2.compact + b2.infinity)) <= 1e-10 * f.norm2());
    CHECK(std::abs(b4.compact + b4.infinity - f.norm2()) <= 1e-6 * f.norm2());
    compact_fraction.push_back(b4.compact / f.norm2());
  }
  CHECK(compact_fraction[0] >= 0.97);
  CHECK(compact_fraction[1] <= 0.55);
  CHECK(compact_fraction[1] >= 0.45);

  Grid g = Grid::make(1, 16, 1.0 / 8, 2);
  CHECK_THROWS_AS(two_micro_bracket(WaveField(g), a, crit, 8.0, 0.5), Error);
}

TEST_CASE("two-microlocal data of a packet at an isolated critical point") {
  const double eps = 1.0 / 32;
  Grid g = Grid::make(1, 16, eps, 2);
  WaveField f = gaussian_packet(g, 8.0, 1.0, kPi);
  auto rep = extract_two_micro_data(f, points({0.0, kPi}));
  REQUIRE(rep.nu.size() == 2);
  CHECK(rep.nu[0].weight <= 1e-12 * rep.total_mass);
  CHECK(std::abs(rep.nu[1].weight - rep.total_mass) <= 1e-8 * rep.total_mass);
  CHECK(rep.nu[1].m0.rank() == 1);
  CHECK(std::abs(rep.offband_mass) <= 1e-8 * rep.total_mass);
  CHECK(std::abs(rep.compact_mass - rep.total_mass) <= 1e-8 * rep.total_mass);
  CHECK(rep.warnings.empty());
}

TEST_CASE("two-microlocal weights of Mathieu band data follow the Bloch coefficients") {
  const double eps = 1.0 / 32;
  auto v = PeriodicPotential::mathieu(1, 1.0);
  auto b = std::make_shared<const PlaneWaveBasis>(1, 8);
  Grid g = Grid::make(1, 16, eps, 3);
  BandTable table(g, v, b, 0);
  WaveField env = Envelope{Envelope::Family::gaussian, {8.0, 0.0}, 2.0}.sample(g);
  auto data = build_band_data(env, xi1(0.0), table);
  auto fib = solve_fiber(v, b, xi1(0.0), 1);
  auto rep = extract_two_micro_data(data.psi0, points({-kTwoPi, 0.0, kTwoPi}));
  REQUIRE(rep.nu.size() == 3);
  for (int k = -1; k <= 1; ++k) {
    double expect = std::norm(fib.vectors(b->index_of({k, 0}), 0)) * env.norm2();
    CHECK(std::abs(rep.nu[std::size_t(k + 1)].weight - expect) <= 0.05 * expect);
  }
  // Higher harmonics |k| >= 2 carry ~1e-6 of the mass: below the oscillation warning level.
  CHECK(rep.offband_mass >= -1e-8 * rep.total_mass);
  CHECK(rep.offband_mass <= 1e-5 * rep.total_mass);
  CHECK(rep.warnings.empty());
}

TEST_CASE("two-microlocal data along a line in 2-D recovers the normal profile") {
  const double eps = 1.0 / 8;
  Grid g = Grid::make(2, 8, eps, 1);
  auto a = [](double x) { return std::exp(-(x - 4) * (x - 4) / 2) * (1.0 + 0.3 * (x - 4)); };
  auto b = [](double y) { return std::exp(-(y - 4) * (y - 4) / 4); };
  WaveField f = WaveField::sample(g, [&](const Point& x) { return cd(a(x[0]) * b(x[1])); });
  CriticalSet line;
  line.kind = CriticalSet::Kind::line;
  line.axis = 0;
  line.value = 0.0;
  TwoMicroOptions opt;
  opt.r = 2.0;
  opt.delta = 0.5;
  opt.sigma = {0.0};
  auto rep = extract_two_micro_data(f, line, opt);
  REQUIRE_FALSE(rep.nu.empty());
  Grid fibre{1, 8, g.n, eps};
  WaveField profile = WaveField::sample(fibre, [&](const Point& x) { return cd(a(x[0])); });
  profile = profile * cd(1.0 / profile.norm());
  double weights = 0.0, heavy = 0.0, worst = 1.0;
  for (const auto& s : rep.nu) {
    weights += s.weight;
    if (s.weight > 1e-3 * rep.total_mass) {
      heavy += s.weight;
      worst = std::min(worst, std::norm(inner(profile, s.m0.orbitals[0])));
      CHECK(s.m0.orthonormality_defect() <= 1e-10);
    }
  }
  CHECK(std::abs(weights - rep.total_mass) <= 1e-3 * rep.total_mass);
  CHECK(heavy >= 0.9 * rep.total_mass);
  CHECK(worst >= 0.97);
}

TEST_CASE("window weights integrate the triangular window") {
  std::vector<double> t;
  for (int i = 0; i <= 8; ++i) t.push_back(i / 8.0);
  auto w = window_weights(t);
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(s == doctest::Approx(0.5).epsilon(0.05));
  CHECK(w.front() == 0.0);
  CHECK(w.back() == 0.0);
}

TEST_CASE("localization and invariance diagnostics on a cosine multiplier") {
  const double eps = 1.0 / 32;
  Grid g = Grid::make(1, 16, eps, 2);
  CriticalSet crit = points({0.0, kPi});
  auto lam = MultiplierSymbol::closed_form(std::make_shared<ClosedFormBand>(ClosedFormBand::cosine(1)), 0.0, crit);
  std::vector<double> times;
  for (int i = 0; i <= 6; ++i) times.push_back(i / 6.0);
  auto at_pi = evolve_multiplier(gaussian_packet(g, 6.0, 1.0, kPi), lam, ExtPotential::zero(), times, 0.5 * eps * eps);
  auto moving =
      evolve_multiplier(gaussian_packet(g, 6.0, 1.0, kPi / 2), lam, ExtPotential::zero(), times, 0.5 * eps * eps);
  CHECK(localization_defect(at_pi, crit, 0.2) <= 1e-10);
  CHECK(localization_defect(moving, crit, 0.2) >= 1.0 - 1e-10);

  auto a = PhaseSymbol::separable([](const Point& x) { return std::exp(-(x[0] - 6.5) * (x[0] - 6.5)); },
                                  [](const Wavevector&) { return 1.0; });
  CHECK(invariance_defect(moving, a, 0.0, lam) == 0.0);
  double still = invariance_defect(at_pi, a, 0.5, lam), moved = invariance_defect(moving, a, 0.5, lam);
  CHECK(moved >= 0.05);
  CHECK(still <= 0.1 * moved);
}
