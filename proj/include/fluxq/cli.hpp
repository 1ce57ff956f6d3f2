#pragma once

// Command-line front end: netlist -> transform -> Hamiltonian -> spectra,
// rates and Monte Carlo simulation, reported as `[section]` / `key = value`
// text.
//
// Exit status: 0 success, 1 validation failure (bad netlist, flags or I/O),
// 2 numerical failure (singular transform, failed consistency check).
//
// Environment overrides (command-line flags take precedence):
//   FLUXQ_AUX_EPSILON  auxiliary capacitance scale for inductors
//   FLUXQ_TOLERANCE    relative tolerance of the irrotational solve
//   FLUXQ_THREADS      worker threads for Monte Carlo runs

#include "fluxq/hamiltonian.hpp"
#include "fluxq/netlist.hpp"
#include "fluxq/report.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fluxq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

enum class Command { Quantize, Spectrum, Rates, Simulate, CheckGauge };

std::string command_name(Command c);

// "irrotational" or comma-separated single-loop coefficients m_k of the
// mesh-oriented branch fluxes, e.g. "1,0".
struct GaugeChoice {
    bool irrotational = true;
    std::vector<double> m;

    static GaugeChoice parse(const std::string& text);
    std::string describe() const;
};

// "[mesh=]start:stop:count", flux in Phi0.
struct FluxSweep {
    std::string mesh;  // empty: first mesh
    double start = 0.0;
    double stop = 0.0;
    int count = 1;

    static FluxSweep parse(const std::string& text);
    double value(int k) const;
};

struct RunConfig {
    Command command = Command::Quantize;
    std::string netlist_path;
    GaugeChoice gauge;
    double aux_epsilon = 1e-8;
    double tolerance = 1e-12;

    // spectrum / rates
    int charge_cutoff = 20;
    int oscillator_levels = 100;
    int states = 4;
    std::vector<FluxSweep> sweeps;

    // noise overrides
    std::optional<double> sigma;       // Phi0
    std::optional<double> tc;          // ns
    std::optional<double> band_limit;  // rad/ns

    // simulate / check-gauge
    double duration = 5.0;  // ns
    std::optional<double> dt;
    int trajectories = 400;
    int levels = 6;
    std::uint64_t seed = 1;
    int threads = 0;
    std::optional<double> fit_start;
    std::optional<double> fit_end;
    std::optional<double> record_interval;

    std::string output;  // empty: standard output
    ReportFormat format = ReportFormat::KeyValue;
};

// Hamiltonian of a netlist in the requested gauge.
SymbolicHamiltonian hamiltonian_for(const CircuitNetlist& netlist, const GaugeChoice& gauge, double aux_epsilon,
                                    double tolerance);

// Builds the report for a configuration. Throws on failure.
Report build_report(const RunConfig& config, int& status);

// Runs one configuration, writing the report or an error message.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// Parses arguments (with environment defaults) and runs.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fluxq::cli
