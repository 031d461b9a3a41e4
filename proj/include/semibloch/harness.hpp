#pragma once

#include "semibloch/blochdata.hpp"
#include "semibloch/dynamics.hpp"
#include "semibloch/wigner.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace semibloch {

// One experiment of the verification suite, E1..E6. Lengths are absolute (box units).
struct ExperimentConfig {
  std::string id = "E1";
  int dim = 1;
  // Potential JSON file; empty means the Mathieu potential with the given amplitude.
  std::string potential_path;
  double mathieu_amplitude = 1.0;
  int band = 0;         // 0-based
  int second_band = 1;  // E5 only
  double xi0 = 0.0;     // first component; the others are 0
  Envelope envelope{Envelope::Family::gaussian, {16.0, 0.0}, 3.0};
  // Second envelope factor b(x2) for E6.
  Envelope envelope2{Envelope::Family::gaussian, {0.0, 4.0}, 1.0};
  double sigma = 0.0;  // E6 tangential frequency
  std::string vext = "cosine";  // zero | cosine | pulsed
  double vext_amplitude = 1.0;
  double vext_omega = 2.0;
  std::vector<double> eps{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  double t_final = 1.0;
  int snapshots = 8;
  double dt_factor = 0.05;  // dt = dt_factor * eps^2 for the eps-scaled equations
  double dt_limit = 1e-3;   // limit equations
  int box = 32;
  int resolution = 3;
  int cutoff = 8;
  double margin = 0.5;          // E4 localization margin
  double flow_time = 0.5;       // E4 invariance shift s
  double observable_width = 1.0;  // E4 observable phi(x)
  double tolerance = 0.05;
  double min_slope = 0.8;
  double border_band = 0.1;
  double border_tol = 1e-4;
  std::string out_dir;  // empty: no artifacts
  int threads = 1;

  static ExperimentConfig defaults(const std::string& id);
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
  PeriodicPotential potential() const;
  ExtPotential external() const;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

// Least squares on (log eps, log value). Needs >= 3 pairs with positive values.
RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs);

// Gaussian test function exp(-|x - c|^2 / (2 w^2)) with periodic distance.
struct TestFunction {
  Point center{0.0, 0.0};
  double width = 1.0;
  double operator()(const Point& x, int dim, double box) const;
};

// Three widths (L/32, L/16, L/8) at four centres around the middle of the box.
std::vector<TestFunction> default_test_set(int dim, int box);

// max over phi of |int phi (a - b)| / max(1, sup phi)
double weak_density_distance(const VectorXd& a, const VectorXd& b, const Grid& g,
                             const std::vector<TestFunction>& tests);

// Fraction of the mass in the outer `band` fraction of the box along any axis.
double border_mass_fraction(const WaveField& f, double band);

struct SweepPoint {
  double eps = 0.0;
  double value = 0.0;
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::map<std::string, double> extra;
};

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool upper = true;  // value <= threshold when true, value >= threshold otherwise
  bool pass = false;
};

struct ConvergenceReport {
  std::string id;
  std::string metric;
  std::vector<SweepPoint> points;
  bool fitted = false;
  RateFit fit;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  bool partial = false;
  double seconds = 0.0;

  bool pass() const;
  nlohmann::json to_json() const;
};

ConvergenceReport run_experiment(const ExperimentConfig& cfg);

}  // namespace semibloch
