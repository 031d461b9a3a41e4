#include "semibloch/harness.hpp"
#include "semibloch/io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>

using namespace semibloch;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

json load_config(const Common& c) { return c.config.empty() ? json::object() : read_json(c.config); }

PeriodicPotential potential_of(const json& j) {
  if (j.contains("potential") && !j["potential"].get<std::string>().empty())
    return load_potential(j["potential"].get<std::string>());
  return PeriodicPotential::mathieu(j.value("dim", 1), j.value("mathieu_amplitude", 1.0));
}

void print_report(const ConvergenceReport& r) {
  std::cout << r.id << ": " << r.metric << "\n";
  for (const auto& p : r.points) {
    std::cout << "  eps = 1/" << std::lround(1.0 / p.eps) << "  ";
    if (p.ok)
      std::cout << std::setprecision(6) << p.value;
    else
      std::cout << "FAILED (" << p.error << ")";
    std::cout << "  [" << std::setprecision(3) << p.seconds << " s]\n";
  }
  if (r.fitted)
    std::cout << "  fit: slope " << std::setprecision(4) << r.fit.slope << ", intercept " << r.fit.intercept
              << ", residual " << r.fit.residual << "\n";
  for (const auto& c : r.checks)
    std::cout << "  " << (c.pass ? "pass" : "FAIL") << "  " << c.name << ": " << std::setprecision(6) << c.value
              << (c.upper ? " <= " : " >= ") << c.threshold << "\n";
  for (const auto& n : r.notes) std::cout << "  note: " << n << "\n";
  std::cout << "  " << (r.pass() ? "PASS" : "FAIL") << "\n";
}

int cmd_bands(const Common& c, int bands, int points) {
  json j = load_config(c);
  auto v = potential_of(j);
  auto basis = std::make_shared<const PlaneWaveBasis>(v.dim(), j.value("cutoff", 8));
  bands = j.value("bands", bands);
  points = j.value("points", points);
  std::vector<BandGrid> grids(std::size_t(bands), BandGrid{});
  std::vector<std::unique_ptr<BlochBand>> models;
  for (int n = 0; n < bands; ++n) models.push_back(std::make_unique<BlochBand>(v, basis, n));
  for (int n = 0; n < bands; ++n) grids[std::size_t(n)] = sample_band(*models[std::size_t(n)], points, c.threads);
  std::vector<VectorXd> energies(grids[0].nodes.size(), VectorXd(bands));
  for (std::size_t i = 0; i < energies.size(); ++i)
    for (int n = 0; n < bands; ++n) energies[i][n] = grids[std::size_t(n)].values[Eigen::Index(i)];
  ensure_directory(c.out);
  write_bands_csv(c.out + "/bands.csv", grids[0].nodes, energies);
  std::cout << "wrote " << c.out << "/bands.csv (" << bands << " bands, " << grids[0].nodes.size() << " nodes)\n";
  return 0;
}

int cmd_critical(const Common& c, int band, int points) {
  json j = load_config(c);
  auto v = potential_of(j);
  auto basis = std::make_shared<const PlaneWaveBasis>(v.dim(), j.value("cutoff", 8));
  band = j.value("band", band);
  points = j.value("points", points);
  BlochBand model(v, basis, band);
  auto grid = sample_band(model, points, c.threads);
  auto search = find_critical_points(grid, model, {}, c.threads);
  ensure_directory(c.out);
  json out = critical_to_json(search);
  out["band"] = band;
  write_json(c.out + "/critical.json", out);
  std::cout << "band " << band + 1 << ": " << search.points.size() << " critical points, " << search.manifolds.size()
            << " manifold candidates, " << search.unresolved.size() << " unresolved\n";
  return 0;
}

// Band data at (band, xi0) under the full equation, for the first eps of the config.
int cmd_evolve(const Common& c) {
  json j = load_config(c);
  if (!j.contains("id")) j["id"] = "E1";
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  cfg.validate();
  const double eps = cfg.eps.front();
  Grid g = Grid::make(cfg.dim, cfg.box, eps, cfg.resolution);
  auto v = cfg.potential();
  auto basis = std::make_shared<const PlaneWaveBasis>(cfg.dim, cfg.cutoff);
  BandTable table(g, v, basis, cfg.band, c.threads);
  Wavevector xi = Wavevector::Zero(cfg.dim);
  xi[0] = cfg.xi0;
  WaveField env = cfg.envelope.sample(g);
  auto data = build_band_data(env * cd(1.0 / env.norm()), xi, table);
  std::vector<double> times;
  for (int i = 0; i < cfg.snapshots; ++i) times.push_back(cfg.t_final * i / (cfg.snapshots - 1));
  auto traj = evolve_full(data.psi0, v, cfg.external(), times, cfg.dt_factor * eps * eps);
  write_trajectory(c.out, "psi", traj);
  std::cout << "wrote " << traj.snapshots.size() << " snapshots to " << c.out << " (mass drift "
            << std::abs(traj.norms.back() - traj.norms.front()) << ")\n";
  return 0;
}

int cmd_wigner(const Common& c, const std::string& snapshot, int stride) {
  WaveField f = read_snapshot(snapshot);
  ensure_directory(c.out);
  const std::string path = c.out + "/" + std::filesystem::path(snapshot).filename().string() + "_wigner.csv";
  write_wigner_csv(path, wigner_transform(f, stride));
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_experiment(const Common& c, const std::string& id) {
  json j = load_config(c);
  j["id"] = id;
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  cfg.out_dir = c.out;
  cfg.threads = c.threads;
  auto r = run_experiment(cfg);
  print_report(r);
  return r.pass() ? 0 : 1;
}

int cmd_report(const Common& c) {
  bool all = true;
  int found = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(c.out))
    if (e.path().filename().string().ends_with("_report.json")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    json r = read_json(p.string());
    ++found;
    bool pass = r.value("pass", false);
    all = all && pass;
    std::cout << std::left << std::setw(4) << r.value("id", std::string("?")) << (pass ? " PASS  " : " FAIL  ");
    for (const auto& ch : r["checks"])
      std::cout << ch["name"].get<std::string>() << " = " << ch["value"].get<double>() << "; ";
    std::cout << "\n";
  }
  if (found == 0) {
    std::cerr << "no *_report.json files in " << c.out << "\n";
    return 1;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch bands, semiclassical dynamics and effective-mass verification"};
  app.require_subcommand(1);

  Common bands_c, crit_c, evolve_c, wigner_c, exp_c, report_c;
  int nbands = 3, points = 256, band = 0, stride = 1;
  std::string snapshot, id;

  auto* bands = app.add_subcommand("bands", "sample the lowest bands on a uniform grid, write bands.csv");
  add_common(bands, bands_c);
  bands->add_option("--bands", nbands, "number of bands");
  bands->add_option("--points", points, "grid points per axis");

  auto* crit = app.add_subcommand("critical", "locate critical points of one band, write critical.json");
  add_common(crit, crit_c);
  crit->add_option("--band", band, "band index (0-based)");
  crit->add_option("--points", points, "seed grid points per axis");

  auto* evolve = app.add_subcommand("evolve", "evolve band data under the full equation, write snapshots");
  add_common(evolve, evolve_c);

  auto* wigner = app.add_subcommand("wigner", "Wigner transform of a snapshot, write CSV");
  add_common(wigner, wigner_c);
  wigner->add_option("snapshot", snapshot, "snapshot stem (without .bin/.json)")->required();
  wigner->add_option("--stride", stride, "row stride in x");

  auto* exp = app.add_subcommand("experiment", "run one verification experiment");
  add_common(exp, exp_c);
  exp->add_option("id", id, "E1..E6")->required()->check(CLI::IsMember({"E1", "E2", "E3", "E4", "E5", "E6"}));

  auto* report = app.add_subcommand("report", "summarize the experiment reports in --out");
  add_common(report, report_c);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*bands) return cmd_bands(bands_c, nbands, points);
    if (*crit) return cmd_critical(crit_c, band, points);
    if (*evolve) return cmd_evolve(evolve_c);
    if (*wigner) return cmd_wigner(wigner_c, snapshot, stride);
    if (*exp) return cmd_experiment(exp_c, id);
    if (*report) return cmd_report(report_c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
