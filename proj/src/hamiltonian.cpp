#include "fluxq/hamiltonian.hpp"

#include "fluxq/errors.hpp"
#include "fluxq/topology.hpp"
#include "fluxq/units.hpp"

#include <cmath>
#include <sstream>

namespace fluxq {

namespace {

constexpr double kIrrotationalTol = 1e-10;

bool drive_vanishes(const Eigen::MatrixXd& d) {
    return d.size() == 0 || d.cwiseAbs().maxCoeff() <= kIrrotationalTol;
}

}  // namespace

std::string GaugeLabel::describe() const {
    std::ostringstream out;
    if (irrotational) out << "irrotational";
    if (!m.empty()) {
        if (irrotational) out << " ";
        out << "(";
        for (std::size_t k = 0; k < m.size(); ++k) out << (k ? ", " : "") << m[k];
        out << ")";
    }
    if (!irrotational && m.empty()) out << "general";
    return out.str();
}

bool SymbolicHamiltonian::is_zero(double tol) const {
    auto small = [tol](const Eigen::MatrixXd& x) { return x.size() == 0 || x.cwiseAbs().maxCoeff() <= tol; };
    if (!small(charging) || !small(drive_coupling)) return false;
    for (const auto& t : terms) {
        if (std::abs(t.energy) > tol) return false;
    }
    return true;
}

SymbolicHamiltonian build_symbolic(const CircuitNetlist& netlist, const IrrotationalTransform& transform) {
    const auto n = static_cast<Eigen::Index>(netlist.branch_count());
    const auto f = static_cast<Eigen::Index>(netlist.mesh_count());
    if (transform.branches() != n || transform.meshes() != f) {
        throw ValidationError("transform dimensions do not match netlist '" + netlist.name + "'");
    }
    const Eigen::Index d = n - f;

    SymbolicHamiltonian h;
    // H_kin = Q^T A^-1 Q / 2 with Q = 2e n and A the dof-dof block of C_eff.
    Eigen::MatrixXd a = transform.C_eff.topLeftCorner(d, d);
    Eigen::MatrixXd a_inv = a.llt().solve(Eigen::MatrixXd::Identity(d, d));
    h.charging = units::ghz_to_angular(units::kChargingGHz) * 0.5 * (a_inv + a_inv.transpose());
    h.drive_coupling = transform.eta_bar;

    const Eigen::MatrixXd coeffs = transform.dof_coefficients();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Branch& b = netlist.branches[static_cast<std::size_t>(i)];
        if (b.is_capacitor()) continue;
        PotentialTerm term;
        term.branch = b.id;
        term.dof_coeffs = coeffs.row(i).transpose();
        term.flux_weights = transform.flux_weights.row(i).transpose();
        if (const auto* j = std::get_if<Junction>(&b.kind)) {
            term.kind = TermKind::Cosine;
            term.energy = units::ghz_to_angular(j->ej_ghz);
        } else {
            term.kind = TermKind::Quadratic;
            term.energy = units::ghz_to_angular(units::inductive_energy_ghz(std::get<Inductor>(b.kind).inductance_nh));
        }
        h.terms.push_back(std::move(term));
    }

    h.gauge.irrotational = drive_vanishes(h.drive_coupling);
    if (f == 1 && d == 1) {
        MeshMatrix r = mesh_matrix(netlist);
        for (Eigen::Index k = 0; k < n; ++k) h.gauge.m.push_back(transform.M(0, k) * r.values(0, k));
    }
    return h;
}

CircuitNetlist squid_netlist(double c_l, double c_r, double ej_l, double ej_r) {
    CircuitNetlist net;
    net.name = "squid";
    net.branches.push_back({"jl", Junction{ej_l, c_l}, "a", "b"});
    net.branches.push_back({"jr", Junction{ej_r, c_r}, "b", "a"});
    net.meshes.push_back({"loop", {{"jl", 1}, {"jr", 1}}, {}});
    return net;
}

SymbolicHamiltonian squid_gauge_family(double c_l, double c_r, double ej_l, double ej_r, double m_l, double m_r) {
    if (m_l == m_r) throw ValidationError("squid gauge requires m_l != m_r");
    CircuitNetlist net = squid_netlist(c_l, c_r, ej_l, ej_r);
    CapacitanceMatrix c = capacitance_matrix(net);
    MeshMatrix r = mesh_matrix(net);
    return build_symbolic(net, make_transform(c, r, single_loop_gauge(r, {m_l, m_r})));
}

SymbolicHamiltonian displace(const SymbolicHamiltonian& h, const Eigen::MatrixXd& shift) {
    if (shift.rows() != h.dofs() || shift.cols() != h.meshes()) {
        throw ValidationError("displacement must be (N-F) x F");
    }
    SymbolicHamiltonian out = h;
    for (auto& t : out.terms) t.flux_weights -= shift.transpose() * t.dof_coeffs;
    out.drive_coupling += shift;
    out.gauge.irrotational = drive_vanishes(out.drive_coupling);
    if (!out.gauge.m.empty()) {
        for (double& m : out.gauge.m) m += shift(0, 0);
    }
    return out;
}

SymbolicHamiltonian gauge_shift(const SymbolicHamiltonian& h, const std::vector<double>& to) {
    if (h.gauge.m.empty() || h.dofs() != 1 || h.meshes() != 1) {
        throw ValidationError("gauge_shift supports single-loop, single-dof Hamiltonians only");
    }
    if (to.size() != h.gauge.m.size()) throw ValidationError("target gauge has the wrong number of coefficients");
    const double s = to[0] - h.gauge.m[0];
    for (std::size_t k = 1; k < to.size(); ++k) {
        const double sk = to[k] - h.gauge.m[k];
        if (std::abs(sk - s) > 1e-12 * std::max({1.0, std::abs(s), std::abs(sk)})) {
            throw ValidationError("target gauge " + GaugeLabel{false, to}.describe() +
                                  " is outside the m_Delta family of " + h.gauge.describe());
        }
    }
    SymbolicHamiltonian out = displace(h, Eigen::MatrixXd::Constant(1, 1, s));
    out.gauge.m = to;
    return out;
}

SymbolicHamiltonian to_irrotational(const SymbolicHamiltonian& h) {
    SymbolicHamiltonian out = displace(h, -h.drive_coupling);
    out.drive_coupling.setZero();
    out.gauge.irrotational = true;
    return out;
}

SymbolicHamiltonian zero_parameter_limit(const SymbolicHamiltonian& h) {
    SymbolicHamiltonian out;
    out.charging = Eigen::MatrixXd::Zero(h.dofs(), h.dofs());
    out.drive_coupling = h.drive_coupling;
    out.gauge = h.gauge;
    return out;
}

}  // namespace fluxq
