#pragma once

// Unit bookkeeping.
//
// Internally hbar = 1 and time is measured in ns, so every Hamiltonian
// coefficient is an angular frequency in rad/ns. Netlists and reports use
// h*GHz for energies, fF for capacitance, nH for inductance and Phi0 for flux.

#include <numbers>

namespace fluxq::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kPlanck = 6.62607015e-34;             // J s
inline constexpr double kFluxQuantum = kPlanck / (2.0 * kElementaryCharge);

// 2 e^2 / C for C = 1 fF, in h*GHz. Multiplies n_i n_j with C^-1 in fF^-1,
// so a single junction of capacitance C has 4 E_C = kChargingGHz / C.
inline constexpr double kChargingGHz = 2.0 * kElementaryCharge * kElementaryCharge / (kPlanck * 1e-15) / 1e9;

// (Phi0 / 2pi)^2 / L for L = 1 nH, in h*GHz.
inline constexpr double kInductiveGHz =
    (kFluxQuantum / kTwoPi) * (kFluxQuantum / kTwoPi) / 1e-9 / kPlanck / 1e9;

constexpr double ghz_to_angular(double ghz) { return kTwoPi * ghz; }
constexpr double angular_to_ghz(double w) { return w / kTwoPi; }

// E_C = e^2 / 2C in h*GHz.
constexpr double charging_energy_ghz(double capacitance_ff) { return kChargingGHz / 4.0 / capacitance_ff; }
constexpr double capacitance_from_ec(double ec_ghz) { return kChargingGHz / 4.0 / ec_ghz; }

// E_L = (Phi0/2pi)^2 / L in h*GHz.
constexpr double inductive_energy_ghz(double inductance_nh) { return kInductiveGHz / inductance_nh; }
constexpr double inductance_from_el(double el_ghz) { return kInductiveGHz / el_ghz; }

// Flux in units of Phi0 to reduced phase (rad).
constexpr double flux_to_phase(double flux_phi0) { return kTwoPi * flux_phi0; }

}  // namespace fluxq::units
