#pragma once

#include "semibloch/bandstructure.hpp"
#include "semibloch/dynamics.hpp"
#include "semibloch/wigner.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace semibloch {

using nlohmann::json;

json read_json(const std::string& path);
void write_json(const std::string& path, const json& j);

// {"dim": d, "coeffs": [[k_1, .., k_d, re, im], ...]}; the Hermitian partners are implied.
PeriodicPotential potential_from_json(const json& j);
json potential_to_json(const PeriodicPotential& v);
PeriodicPotential load_potential(const std::string& path);

// Columns xi_1..xi_d, band, energy (band is 1-based).
void write_bands_csv(const std::string& path, const std::vector<Wavevector>& nodes,
                     const std::vector<VectorXd>& energies);

json critical_to_json(const CriticalSearch& s);

// Little-endian complex64 pairs at `stem`.bin plus the sidecar `stem`.json {L, N, eps, time, description}.
// Returns the file name of the binary (without directory).
std::string write_snapshot(const std::string& stem, const WaveField& f, double time, const std::string& description);
WaveField read_snapshot(const std::string& stem);

// Writes every snapshot and `dir`/`name`_manifest.json {equation, eps, dt, times, norms, files}.
void write_trajectory(const std::string& dir, const std::string& name, const Trajectory& traj);

// Columns x, xi, W.
void write_wigner_csv(const std::string& path, const WignerGrid& w);

json two_micro_to_json(const TwoMicroReport& r);

// Creates the directory (and parents) when missing.
void ensure_directory(const std::string& dir);

}  // namespace semibloch
