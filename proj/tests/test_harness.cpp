#include "doctest.h"

#include "semibloch/harness.hpp"
#include "semibloch/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace semibloch;

namespace {

std::string scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("semibloch_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::pair<double, double>> power_law(double c, double p) {
  std::vector<std::pair<double, double>> out;
  for (double e : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}) out.push_back({e, c * std::pow(e, p)});
  return out;
}

VectorXd gaussian_density(const Grid& g, double c, double w) {
  VectorXd r(Eigen::Index(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    double d = g.point(i)[0] - c;
    r[Eigen::Index(i)] = std::exp(-d * d / (w * w));
  }
  return r;
}

}  // namespace

TEST_CASE("fit_rate recovers exact power laws") {
  auto f1 = fit_rate(power_law(1.0, 1.0));
  CHECK(std::abs(f1.slope - 1.0) <= 1e-12);
  CHECK(std::abs(f1.intercept) <= 1e-12);
  CHECK(f1.residual <= 1e-12);
  CHECK(std::abs(fit_rate(power_law(1.0, 2.0)).slope - 2.0) <= 1e-12);
  auto f3 = fit_rate(power_law(3.0, 0.5));
  CHECK(std::abs(f3.intercept - std::log(3.0)) <= 1e-12);
}

TEST_CASE("fit_rate on noisy synthetic data") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto pairs = power_law(3.0, 0.9);
    for (auto& p : pairs) p.second *= 1.0 + 0.05 * u(rng);
    auto f = fit_rate(pairs);
    CHECK(f.slope >= 0.8);
    CHECK(f.slope <= 1.0);
    CHECK(f.residual > 0.0);
  }
}

TEST_CASE("fit_rate refuses short or nonpositive input") {
  CHECK_THROWS_AS(fit_rate({{0.1, 1.0}, {0.05, 0.5}}), Error);
  CHECK_THROWS_AS(fit_rate({{0.1, 1.0}, {0.05, 0.0}, {0.025, 0.2}}), Error);
  CHECK_THROWS_AS(fit_rate({{0.1, 1.0}, {0.05, -0.5}, {0.025, 0.2}}), Error);
}

TEST_CASE("weak distance: identity, symmetry and linearity in a small translation") {
  Grid g = Grid::make(1, 32, 1.0 / 8, 3);
  auto tests = default_test_set(1, 32);
  CHECK(tests.size() == 12);
  VectorXd a = gaussian_density(g, 16.0, 2.0);
  CHECK(weak_density_distance(a, a, g, tests) == 0.0);
  std::vector<double> d;
  for (double h : {0.2, 0.1, 0.05}) {
    VectorXd b = gaussian_density(g, 16.0 + h, 2.0);
    d.push_back(weak_density_distance(a, b, g, tests));
    CHECK(d.back() == doctest::Approx(weak_density_distance(b, a, g, tests)).epsilon(1e-12));
  }
  CHECK(d[0] / d[1] == doctest::Approx(2.0).epsilon(0.03));
  CHECK(d[1] / d[2] == doctest::Approx(2.0).epsilon(0.03));
  CHECK_THROWS_AS(weak_density_distance(a, VectorXd::Zero(3), g, tests), Error);
}

TEST_CASE("weak distance against a hand-computed Gaussian integral") {
  // int exp(-(x-c)^2 / (2 w^2)) exp(-(x-c)^2) dx = sqrt(pi / (1 + 1 / (2 w^2))).
  Grid g = Grid::make(1, 32, 1.0 / 8, 3);
  VectorXd a = gaussian_density(g, 16.0, 1.0);
  std::vector<TestFunction> one{{{16.0, 0.0}, 2.0}};
  double expect = std::sqrt(kPi / (1.0 + 1.0 / 8.0));
  CHECK(weak_density_distance(a, VectorXd::Zero(a.size()), g, one) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("border mass fraction") {
  Grid g1 = Grid::make(1, 32, 1.0 / 8, 1);
  WaveField flat = WaveField::sample(g1, [](const Point&) { return cd(1.0); });
  CHECK(border_mass_fraction(flat, 0.1) == doctest::Approx(0.2).epsilon(0.02));
  WaveField bump = WaveField::sample(g1, [](const Point& x) { return cd(std::exp(-std::pow(x[0] - 16.0, 2))); });
  CHECK(border_mass_fraction(bump, 0.1) <= 1e-30);
  Grid g2 = Grid::make(2, 8, 1.0 / 8, 1);
  WaveField flat2 = WaveField::sample(g2, [](const Point&) { return cd(1.0); });
  CHECK(border_mass_fraction(flat2, 0.1) == doctest::Approx(1.0 - 0.64).epsilon(0.03));
}

TEST_CASE("experiment config: defaults validate and JSON round-trips") {
  for (std::string id : {"E1", "E2", "E3", "E4", "E5", "E6"}) {
    auto c = ExperimentConfig::defaults(id);
    CHECK_NOTHROW(c.validate());
    auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  CHECK_THROWS_AS(ExperimentConfig::defaults("E7"), Error);
  auto bad = ExperimentConfig::defaults("E1");
  bad.xi0 = 0.1;  // off the frequency lattice
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig::defaults("E1");
  bad.dim = 2;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = ExperimentConfig::defaults("E1");
  bad.eps = {0.3};  // L / eps not an integer
  CHECK_THROWS_AS(bad.validate(), Error);
  auto c = ExperimentConfig::from_json(json{{"id", "E4"}, {"xi0_over_pi", 1.0}, {"eps", {0.125}}});
  CHECK(c.xi0 == doctest::Approx(kPi));
  CHECK(c.box == 32);
}

TEST_CASE("potential JSON round-trip") {
  auto m = PeriodicPotential::mathieu(2, 1.5);
  auto custom = PeriodicPotential::from_coefficients(1, {{{1, 0}, cd(0.5, 0.25)}, {{3, 0}, cd(-0.2, 0.0)}});
  for (const auto& v : {m, custom}) {
    auto back = potential_from_json(potential_to_json(v));
    CHECK(back.dim() == v.dim());
    for (double y : {0.0, 0.13, 0.5, 0.77}) {
      Point p{y, 0.31};
      CHECK(back.evaluate(p) == doctest::Approx(v.evaluate(p)).epsilon(1e-14));
    }
    CHECK(back.coefficients().size() == v.coefficients().size());
  }
  CHECK_THROWS_AS(potential_from_json(json{{"dim", 3}, {"coeffs", json::array()}}), Error);
  CHECK_THROWS_AS(potential_from_json(json{{"dim", 1}, {"coeffs", {{1, 0.5}}}}), Error);
}

TEST_CASE("snapshot round-trip in complex64") {
  const std::string dir = scratch("snapshot");
  Grid g = Grid::make(2, 4, 0.5, 2);
  WaveField f = WaveField::sample(g, [](const Point& x) { return std::polar(1.0 + x[0], 2.0 * x[1]); });
  write_snapshot(dir + "/f", f, 0.25, "test field");
  WaveField back = read_snapshot(dir + "/f");
  CHECK(back.grid() == g);
  CHECK((back - f).values().cwiseAbs().maxCoeff() <= 1e-6 * f.values().cwiseAbs().maxCoeff());
  json meta = read_json(dir + "/f.json");
  CHECK(meta["time"].get<double>() == 0.25);
  CHECK(meta["description"].get<std::string>() == "test field");
  CHECK(std::filesystem::file_size(dir + "/f.bin") == 8 * g.size());
}

TEST_CASE("experiment runs are deterministic") {
  auto c = ExperimentConfig::defaults("E4");
  c.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  c.out_dir = scratch("det_a");
  auto r1 = run_experiment(c);
  c.out_dir = scratch("det_b");
  auto r2 = run_experiment(c);
  REQUIRE(r1.points.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r1.points[i].value == r2.points[i].value);
  CHECK(r1.pass());

  auto e1 = ExperimentConfig::defaults("E1");
  e1.eps = {1.0 / 32};
  auto a = run_experiment(e1), b = run_experiment(e1);
  REQUIRE(a.points[0].ok);
  CHECK(a.points[0].value == b.points[0].value);
}

TEST_CASE("experiment artifacts are byte-identical across runs") {
  auto c = ExperimentConfig::defaults("E4");
  c.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  const std::string da = scratch("bytes_a"), db = scratch("bytes_b");
  c.out_dir = da;
  run_experiment(c);
  c.out_dir = db;
  run_experiment(c);
  // Reports embed out_dir; compare them with that field removed.
  json ja = read_json(da + "/E4_report.json"), jb = read_json(db + "/E4_report.json");
  ja["config"].erase("out_dir");
  jb["config"].erase("out_dir");
  CHECK(ja == jb);
  for (const char* f : {"/E4_eps8/wigner_final.csv", "/E4_eps16/multiplier_t007.bin", "/E4_eps32/multiplier_manifest.json"})
    CHECK(slurp(da + f) == slurp(db + f));
  CHECK(!slurp(da + "/E4_eps8/wigner_final.csv").empty());
}

TEST_CASE("a failing sweep member marks the report partial") {
  auto c = ExperimentConfig::defaults("E4");
  c.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  c.envelope.center = {29.0, 0.0};  // inside the border band from the start
  auto r = run_experiment(c);
  CHECK(r.partial);
  CHECK(!r.pass());
  CHECK(std::any_of(r.notes.begin(), r.notes.end(), [](const std::string& n) { return n.find("failed") != std::string::npos; }));
  CHECK(r.points[0].error.find("raise the box size") != std::string::npos);
}
