#include "semibloch/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace semibloch {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void put_le32(std::ostream& os, float v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((u >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

float get_le32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t(b[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

json wavevector_json(const Wavevector& xi) {
  json a = json::array();
  for (int i = 0; i < xi.size(); ++i) a.push_back(xi[i]);
  return a;
}

std::string stem_name(const std::string& stem) { return std::filesystem::path(stem).filename().string(); }

}  // namespace

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

PeriodicPotential potential_from_json(const json& j) {
  const int dim = j.at("dim").get<int>();
  if (dim != 1 && dim != 2) throw Error("potential: dim must be 1 or 2");
  std::vector<std::pair<LatticeVector, cd>> coeffs;
  for (const auto& row : j.at("coeffs")) {
    if (int(row.size()) != dim + 2) throw Error("potential: each coefficient needs d indices plus re, im");
    LatticeVector k{0, 0};
    for (int a = 0; a < dim; ++a) k[std::size_t(a)] = row[std::size_t(a)].get<int>();
    coeffs.push_back({k, cd(row[std::size_t(dim)].get<double>(), row[std::size_t(dim + 1)].get<double>())});
  }
  return PeriodicPotential::from_coefficients(dim, coeffs);
}

json potential_to_json(const PeriodicPotential& v) {
  json c = json::array();
  for (const auto& [k, val] : v.coefficients()) {
    // Emit one representative of each Hermitian pair (lexicographically positive).
    LatticeVector neg{-k[0], -k[1]};
    if (neg < k) continue;
    json row = json::array();
    for (int a = 0; a < v.dim(); ++a) row.push_back(k[std::size_t(a)]);
    row.push_back(val.real());
    row.push_back(val.imag());
    c.push_back(row);
  }
  return {{"dim", v.dim()}, {"coeffs", c}};
}

PeriodicPotential load_potential(const std::string& path) { return potential_from_json(read_json(path)); }

void write_bands_csv(const std::string& path, const std::vector<Wavevector>& nodes,
                     const std::vector<VectorXd>& energies) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  if (nodes.empty()) return;
  const int d = int(nodes.front().size());
  for (int a = 0; a < d; ++a) out << "xi_" << a + 1 << ",";
  out << "band,energy\n";
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (Eigen::Index n = 0; n < energies[i].size(); ++n) {
      for (int a = 0; a < d; ++a) out << fmt(nodes[i][a]) << ",";
      out << n + 1 << "," << fmt(energies[i][n]) << "\n";
    }
}

json critical_to_json(const CriticalSearch& s) {
  json pts = json::array();
  for (const auto& p : s.points) {
    json h = json::array();
    for (int r = 0; r < p.hessian.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < p.hessian.cols(); ++c) row.push_back(p.hessian(r, c));
      h.push_back(row);
    }
    pts.push_back({{"xi", wavevector_json(p.xi_star)},
                   {"grad_residual", p.grad_residual},
                   {"hessian", h},
                   {"hessian_rank", p.hessian_rank},
                   {"degenerate", p.degenerate}});
  }
  json man = json::array();
  for (const auto& m : s.manifolds) {
    json nodes = json::array();
    for (const auto& n : m.nodes) nodes.push_back(wavevector_json(n));
    man.push_back({{"codimension", m.codimension}, {"nodes", nodes}});
  }
  json unresolved = json::array(), clusters = json::array();
  for (const auto& u : s.unresolved) unresolved.push_back(wavevector_json(u));
  for (const auto& c : s.cluster_nodes) clusters.push_back(wavevector_json(c));
  return {{"points", pts}, {"manifolds", man}, {"unresolved", unresolved}, {"cluster_nodes", clusters}};
}

std::string write_snapshot(const std::string& stem, const WaveField& f, double time, const std::string& description) {
  const std::string bin = stem + ".bin";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error("cannot write " + bin);
  for (Eigen::Index i = 0; i < f.values().size(); ++i) {
    put_le32(out, float(f.values()[i].real()));
    put_le32(out, float(f.values()[i].imag()));
  }
  const Grid& g = f.grid();
  write_json(stem + ".json", {{"L", g.box},
                              {"N", g.n},
                              {"dim", g.dim},
                              {"eps", g.eps},
                              {"time", time},
                              {"description", description},
                              {"data", stem_name(bin)}});
  return stem_name(bin);
}

WaveField read_snapshot(const std::string& stem) {
  json meta = read_json(stem + ".json");
  Grid g{meta.value("dim", 1), meta.at("L").get<int>(), meta.at("N").get<int>(), meta.at("eps").get<double>()};
  std::ifstream in(stem + ".bin", std::ios::binary);
  if (!in) throw Error("cannot open " + stem + ".bin");
  VectorXcd v(Eigen::Index(g.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    float re = get_le32(in);
    float im = get_le32(in);
    v[i] = cd(re, im);
  }
  if (!in) throw Error(stem + ".bin is truncated");
  return WaveField::from_values(g, std::move(v));
}

void write_trajectory(const std::string& dir, const std::string& name, const Trajectory& traj) {
  ensure_directory(dir);
  json files = json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    std::ostringstream stem;
    stem << dir << "/" << name << "_t" << std::setw(3) << std::setfill('0') << k;
    files.push_back(write_snapshot(stem.str(), traj.snapshots[k], traj.times[k], traj.equation));
  }
  write_json(dir + "/" + name + "_manifest.json", {{"equation", traj.equation},
                                                   {"eps", traj.eps},
                                                   {"dt", traj.dt},
                                                   {"times", traj.times},
                                                   {"norms", traj.norms},
                                                   {"files", files}});
}

void write_wigner_csv(const std::string& path, const WignerGrid& w) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "x,xi,W\n";
  for (Eigen::Index r = 0; r < w.x.size(); ++r)
    for (Eigen::Index c = 0; c < w.xi.size(); ++c)
      out << fmt(w.x[r]) << "," << fmt(w.xi[c]) << "," << fmt(w.w(r, c)) << "\n";
}

json two_micro_to_json(const TwoMicroReport& r) {
  json nu = json::array();
  for (const auto& s : r.nu) {
    json orbitals = json::array();
    for (int j = 0; j < s.m0.rank(); ++j) {
      const WaveField& u = s.m0.orbitals[std::size_t(j)];
      json re = json::array(), im = json::array();
      for (Eigen::Index i = 0; i < u.values().size(); ++i) {
        re.push_back(u.values()[i].real());
        im.push_back(u.values()[i].imag());
      }
      orbitals.push_back({{"weight", s.m0.weights[j]}, {"re", re}, {"im", im}});
    }
    nu.push_back({{"xi", wavevector_json(s.xi)},
                  {"v", {s.v[0], s.v[1]}},
                  {"weight", s.weight},
                  {"rank", s.m0.rank()},
                  {"orbitals", orbitals}});
  }
  return {{"total_mass", r.total_mass},   {"compact_mass", r.compact_mass}, {"infinity_mass", r.infinity_mass},
          {"offband_mass", r.offband_mass}, {"nu", nu},                     {"warnings", r.warnings}};
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir + ": " + ec.message());
}

}  // namespace semibloch
