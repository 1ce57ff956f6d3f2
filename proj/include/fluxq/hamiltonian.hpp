#pragma once

// Symbolic Hamiltonian in the reduced variables of an IrrotationalTransform.
//
//   H = sum_ij K_ij n_i n_j
//     - sum_cos  E_J cos(c . phi + w . phi_e)
//     + sum_quad E_L (c . phi + w . phi_e)^2 / 2
//     + sum_ij D_ij n_i dphi_e^j/dt
//
// All coefficients are stored in rad/ns (hbar = 1). The dphi_e^2 term is a
// c-number and is dropped.

#include "fluxq/irrotational.hpp"
#include "fluxq/netlist.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fluxq {

enum class TermKind { Cosine, Quadratic };

struct PotentialTerm {
    TermKind kind = TermKind::Cosine;
    double energy = 0.0;           // E_J or E_L, rad/ns
    Eigen::VectorXd dof_coeffs;    // length N-F
    Eigen::VectorXd flux_weights;  // length F
    std::string branch;            // originating branch id
};

struct GaugeLabel {
    bool irrotational = false;
    // Single-loop, single-dof circuits: coefficients m_k of the mesh-oriented
    // branch fluxes, phi = sum_k m_k R_k Phi_k. Empty otherwise.
    std::vector<double> m;

    std::string describe() const;
};

struct SymbolicHamiltonian {
    Eigen::MatrixXd charging;        // (N-F) x (N-F), rad/ns, multiplies n_i n_j
    std::vector<PotentialTerm> terms;
    Eigen::MatrixXd drive_coupling;  // (N-F) x F, dimensionless
    GaugeLabel gauge;

    Eigen::Index dofs() const { return charging.rows(); }
    Eigen::Index meshes() const { return drive_coupling.cols(); }

    // True if no coefficient exceeds tol in magnitude.
    bool is_zero(double tol = 0.0) const;
};

SymbolicHamiltonian build_symbolic(const CircuitNetlist& netlist, const IrrotationalTransform& transform);

// Two-junction loop with paper orientation R = (1, 1): phi = m_l Phi_l + m_r Phi_r.
// Energies in h*GHz, capacitances in fF.
SymbolicHamiltonian squid_gauge_family(double c_l, double c_r, double ej_l, double ej_r, double m_l, double m_r);

// The two-branch netlist used by squid_gauge_family (jl: a->b, jr: b->a).
CircuitNetlist squid_netlist(double c_l, double c_r, double ej_l, double ej_r);

// Time-dependent displacement phi -> phi + S phi_e with S of shape (N-F) x F.
// Flux weights become w - S^T c and the drive coupling becomes D + S.
SymbolicHamiltonian displace(const SymbolicHamiltonian& h, const Eigen::MatrixXd& shift);

// Shift a single-loop Hamiltonian to the gauge with coefficients `to`.
// Both gauges must lie in the same m_Delta family (to - m uniform over the
// loop members).
SymbolicHamiltonian gauge_shift(const SymbolicHamiltonian& h, const std::vector<double>& to);

// Displacement that removes the drive coupling.
SymbolicHamiltonian to_irrotational(const SymbolicHamiltonian& h);

// E_C = E_J = E_L = 0: only the drive coupling survives.
SymbolicHamiltonian zero_parameter_limit(const SymbolicHamiltonian& h);

}  // namespace fluxq
