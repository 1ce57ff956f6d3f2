#include "fluxq/topology.hpp"

#include "fluxq/errors.hpp"

#include <limits>

namespace fluxq {

CapacitanceMatrix capacitance_matrix(const CircuitNetlist& netlist, double aux_epsilon) {
    require_valid(netlist);
    if (!(aux_epsilon > 0.0)) throw ValidationError("aux_epsilon must be positive");

    // Auxiliary capacitances scale with the smallest physical capacitance.
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& b : netlist.branches) {
        if (auto c = b.capacitance()) smallest = std::min(smallest, *c);
    }

    const auto n = static_cast<Eigen::Index>(netlist.branch_count());
    CapacitanceMatrix out{Eigen::MatrixXd::Zero(n, n), std::vector<bool>(netlist.branch_count(), false)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const Branch& b = netlist.branches[static_cast<std::size_t>(i)];
        if (auto c = b.capacitance()) {
            out.values(i, i) = *c;
        } else {
            out.values(i, i) = aux_epsilon * smallest;
            out.aux_mask[static_cast<std::size_t>(i)] = true;
        }
    }
    return out;
}

MeshMatrix mesh_matrix(const CircuitNetlist& netlist) {
    require_valid(netlist);
    MeshMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(netlist.mesh_count()),
                                         static_cast<Eigen::Index>(netlist.branch_count()))};
    for (std::size_t i = 0; i < netlist.meshes.size(); ++i) {
        for (const auto& member : netlist.meshes[i].members) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*netlist.branch_index(member.branch))) =
                member.sign;
        }
    }
    return out;
}

}  // namespace fluxq
