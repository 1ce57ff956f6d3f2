#pragma once

#include "fluxq/netlist.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fluxq {

// Diagonal branch capacitances. Inductors carry an auxiliary capacitance,
// flagged in aux_mask, which realizes the C_L -> 0 limit at finite size.
struct CapacitanceMatrix {
    Eigen::MatrixXd values;       // N x N, fF
    std::vector<bool> aux_mask;   // per branch

    Eigen::Index size() const { return values.rows(); }
    Eigen::VectorXd diagonal() const { return values.diagonal(); }
    Eigen::MatrixXd inverse() const { return values.diagonal().cwiseInverse().asDiagonal(); }
};

// F x N mesh matrix with entries in {-1, 0, +1}.
struct MeshMatrix {
    Eigen::MatrixXd values;

    Eigen::Index meshes() const { return values.rows(); }
    Eigen::Index branches() const { return values.cols(); }
};

inline constexpr double kDefaultAuxEpsilon = 1e-8;

CapacitanceMatrix capacitance_matrix(const CircuitNetlist& netlist, double aux_epsilon = kDefaultAuxEpsilon);
MeshMatrix mesh_matrix(const CircuitNetlist& netlist);

}  // namespace fluxq
