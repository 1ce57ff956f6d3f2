#pragma once

// Change of variables from branch fluxes to (degrees of freedom, mesh fluxes).
//
// The N branch fluxes are written as Phi = M_plus_inv * (phi_dof, phi_e) with
// M_plus = [M; R]. Choosing M inside the null space of R C^-1 removes every
// kinetic cross term between the degrees of freedom and the external fluxes,
// so the Hamiltonian carries no n * dphi_e/dt coupling.

#include "fluxq/topology.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace fluxq {

inline constexpr double kDefaultTolerance = 1e-12;

struct IrrotationalTransform {
    Eigen::MatrixXd M;             // (N-F) x N
    Eigen::MatrixXd M_plus;        // N x N, M stacked over R
    Eigen::MatrixXd M_plus_inv;    // N x N
    Eigen::MatrixXd C_eff;         // N x N, fF
    Eigen::MatrixXd flux_weights;  // N x F, columns N-F.. of M_plus_inv
    Eigen::MatrixXd eta_bar;       // (N-F) x F coefficients of n_i * dphi_e^j/dt

    Eigen::Index dofs() const { return M.rows(); }
    Eigen::Index meshes() const { return M_plus.rows() - M.rows(); }
    Eigen::Index branches() const { return M.cols(); }

    // N x (N-F): coefficient of each degree of freedom in each branch flux.
    Eigen::MatrixXd dof_coefficients() const { return M_plus_inv.leftCols(dofs()); }

    bool irrotational(double tol = 1e-10) const;
};

// Closed-form particular solution for one mesh, (N-1) x N. For uniform
// orientation entry (i, j) is delta_ij - C_i^-1 / sum_k C_k^-1.
Eigen::MatrixXd single_loop_mbar(const CapacitanceMatrix& c, const MeshMatrix& r);

struct BasisOptions {
    // Normalize rows so each degree of freedom has unit coefficient on its
    // reference branch (first branches, in declaration order, that span the
    // degree-of-freedom space).
    bool rescale = true;
    // Extra non-singular (N-F) x (N-F) mixing applied after rescaling.
    std::optional<Eigen::MatrixXd> mixing;
    double tolerance = kDefaultTolerance;
    std::string circuit_name = "circuit";
};

// Null-space solution of R C^-1 M^T = 0 via singular-value decomposition.
Eigen::MatrixXd irrotational_basis(const CapacitanceMatrix& c, const MeshMatrix& r, const BasisOptions& options = {});

struct AugmentedInverse {
    Eigen::MatrixXd M_plus;
    Eigen::MatrixXd M_plus_inv;
};

AugmentedInverse augment_and_invert(const Eigen::MatrixXd& m, const MeshMatrix& r,
                                    double tolerance = kDefaultTolerance);

Eigen::MatrixXd effective_capacitance(const CapacitanceMatrix& c, const Eigen::MatrixXd& m_plus_inv);

// -A^-1 B with A, B the dof-dof and dof-mesh blocks of C_eff.
Eigen::MatrixXd drive_coupling(const CapacitanceMatrix& c, const Eigen::MatrixXd& m_plus_inv, Eigen::Index meshes);

// Full transform for an arbitrary (not necessarily irrotational) M.
IrrotationalTransform make_transform(const CapacitanceMatrix& c, const MeshMatrix& r, const Eigen::MatrixXd& m,
                                     double tolerance = kDefaultTolerance);

IrrotationalTransform irrotational_transform(const CapacitanceMatrix& c, const MeshMatrix& r,
                                             const BasisOptions& options = {});

// Closed form of the flux allocation, C^-1 R^T (R C^-1 R^T)^-1. It does not
// depend on M as long as M is irrotational.
Eigen::MatrixXd flux_allocation(const CapacitanceMatrix& c, const MeshMatrix& r);

// Single-loop gauge given by coefficients m_k applied to branch fluxes
// oriented along the mesh, i.e. M = m .* R. For two branches this is the
// (m_l, m_r) family.
Eigen::MatrixXd single_loop_gauge(const MeshMatrix& r, const std::vector<double>& m);

}  // namespace fluxq
