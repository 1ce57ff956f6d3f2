#pragma once

// Circuit description: branches (junctions, capacitors, inductors) plus the
// meshes they form, each mesh carrying its own external flux drive.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fluxq {

struct Junction {
    double ej_ghz;          // Josephson energy, h*GHz
    double capacitance_ff;  // junction capacitance, fF
    bool operator==(const Junction&) const = default;
};

struct Capacitor {
    double capacitance_ff;
    bool operator==(const Capacitor&) const = default;
};

struct Inductor {
    double inductance_nh;
    bool operator==(const Inductor&) const = default;
};

using BranchKind = std::variant<Junction, Capacitor, Inductor>;

struct Branch {
    std::string id;
    BranchKind kind;
    std::string from;  // positive orientation runs from -> to
    std::string to;

    bool is_junction() const { return std::holds_alternative<Junction>(kind); }
    bool is_capacitor() const { return std::holds_alternative<Capacitor>(kind); }
    bool is_inductor() const { return std::holds_alternative<Inductor>(kind); }

    // Physical capacitance in fF; nullopt for inductors.
    std::optional<double> capacitance() const;

    bool operator==(const Branch&) const = default;
};

struct NoiseSpec {
    double sigma_phi0;          // standard deviation, Phi0
    double correlation_time_ns; // t_c
    double band_limit = 0.0;    // rad/ns; 0 selects kDefaultBandProduct / t_c
    int mode_count = 0;         // minimum number of synthesis modes; 0 = automatic

    static constexpr double kDefaultBandProduct = 32.0;

    double effective_band_limit() const {
        return band_limit > 0.0 ? band_limit : kDefaultBandProduct / correlation_time_ns;
    }
    // sigma in reduced units (rad).
    double sigma_phase() const;

    bool operator==(const NoiseSpec&) const = default;
};

struct Tone {
    double amplitude_phi0;
    double angular_frequency;  // rad/ns
    double phase;              // rad
    bool operator==(const Tone&) const = default;
};

struct FluxDrive {
    double static_phi0 = 0.0;
    std::optional<NoiseSpec> noise;
    std::vector<Tone> tones;
    bool operator==(const FluxDrive&) const = default;
};

struct MeshMember {
    std::string branch;
    int sign = 1;  // +1: traversed from -> to
    bool operator==(const MeshMember&) const = default;
};

struct Mesh {
    std::string id;
    std::vector<MeshMember> members;
    FluxDrive drive;
    bool operator==(const Mesh&) const = default;
};

struct CircuitNetlist {
    std::string name;
    std::vector<Branch> branches;
    std::vector<Mesh> meshes;

    std::size_t branch_count() const { return branches.size(); }
    std::size_t mesh_count() const { return meshes.size(); }

    // Index of a branch by id, or nullopt.
    std::optional<std::size_t> branch_index(std::string_view id) const;

    // Static reduced external fluxes, one per mesh (rad).
    std::vector<double> static_phases() const;

    bool operator==(const CircuitNetlist&) const = default;
};

CircuitNetlist parse_netlist(std::string_view text);
CircuitNetlist load_netlist(const std::string& path);

// Inverse of parse_netlist; doubles are written with round-trip precision.
std::string serialize(const CircuitNetlist& netlist);

struct Violation {
    std::string subject;  // id of the offending branch, mesh, node or circuit
    std::string message;
};

// Every violated netlist invariant. Empty iff the netlist is valid.
std::vector<Violation> validate(const CircuitNetlist& netlist);

// Throws ValidationError listing all violations, if any.
void require_valid(const CircuitNetlist& netlist);

}  // namespace fluxq
