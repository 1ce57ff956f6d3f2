#pragma once

// Monte Carlo evolution under noisy external flux in an arbitrary gauge.
//
// Each trajectory evolves in the lowest `levels` eigenstates of the static
// Hamiltonian of the chosen gauge. With dphi the flux fluctuation of each
// mesh, the projected Hamiltonian is
//
//   H(t) = diag(E) - sum_cos E_J [(cos(w.dphi) - 1) P_cos - sin(w.dphi) P_sin]
//        + sum_quad E_L (w.dphi) P_arg + sum_ij D_ij n_i dphi_j'
//
// (the c-number (w.dphi)^2 E_L / 2 is dropped). Steps use flux values at
// the interval midpoints.

#include "fluxq/hamiltonian.hpp"
#include "fluxq/noise.hpp"
#include "fluxq/spectrum.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace fluxq {

inline constexpr int kDefaultLevels = 6;

struct EvolutionModel {
    Eigen::VectorXd energies;  // rad/ns, relative to the ground state
    Eigen::MatrixXcd states;   // dim x levels, eigenvectors in the model basis
    struct Projected {
        TermKind kind;
        double energy;
        Eigen::VectorXd flux_weights;
        Eigen::MatrixXcd a;  // P_cos or P_arg
        Eigen::MatrixXcd b;  // P_sin (cosine terms)
    };
    std::vector<Projected> terms;
    std::vector<Eigen::MatrixXcd> number;  // per dof
    Eigen::MatrixXd drive_coupling;        // (N-F) x F
    bool static_part = true;

    Eigen::Index levels() const { return energies.size(); }
    Eigen::Index meshes() const { return drive_coupling.cols(); }
    double omega_eg() const { return energies(1) - energies(0); }
};

// levels <= 0 keeps the full basis.
EvolutionModel make_evolution_model(const SymbolicHamiltonian& h, const NumericModel& model,
                                    int levels = kDefaultLevels);

// Same eigenbasis, but with E_C = E_J = E_L = 0 in the dynamics: only the
// drive coupling remains.
EvolutionModel zero_parameter_model(const EvolutionModel& model);

struct EvolveOptions {
    double dt = 0.0;  // ns
    int record_every = 1;
    // Initial state in the eigenbasis of the model; default |e>.
    std::optional<Eigen::VectorXcd> initial;
    bool keep_states = false;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<cplx> amp_g;  // <g0|psi(t)>
    std::vector<cplx> amp_e;  // <e0|psi(t)>
    std::vector<Eigen::VectorXcd> states;  // if keep_states
    double norm_drift = 0.0;
};

// Paths: one per mesh, sampled at dt / 2 (interval endpoints and midpoints).
// Runs over the full length of the paths.
Trajectory evolve(const EvolutionModel& model, const std::vector<NoisePath>& paths, const EvolveOptions& options);

// Instantaneous projected Hamiltonian for given flux offsets and rates.
Eigen::MatrixXcd projected_hamiltonian(const EvolutionModel& model, const Eigen::VectorXd& dphi,
                                       const Eigen::VectorXd& dphi_dot);

struct SimOptions {
    double duration = 10.0;  // ns
    double dt = 0.0;         // ns; 0 = largest allowed step
    int trajectories = 2000;
    int levels = kDefaultLevels;
    std::uint64_t base_seed = 1;
    int threads = 0;                       // 0 = hardware concurrency
    double record_interval = 0.0;          // ns; 0 = 2 t_c
    double fit_start = 0.0;                // ns; 0 = 20 t_c
    std::optional<double> fit_end;         // ns; default min(T, 0.1 / slope)
    bool zero_parameter = false;           // dynamics without E_C, E_J, E_L
    bool coherence = false;                // start in (|g> + |e>)/sqrt 2
};

struct FitResult {
    double slope = 0.0;
    double offset = 0.0;
    double slope_error = 0.0;
    double offset_error = 0.0;
    double window_start = 0.0;
    double window_end = 0.0;
};

struct NoiseSimResult {
    std::vector<double> t_grid;
    std::vector<double> avg_prob;         // <C(0,t)> = <|<e0|psi(t)>|^2>
    std::vector<double> avg_transition;   // <|<g0|psi(t)>|^2>
    std::vector<double> transition_error; // standard error per point
    std::vector<double> coherence;        // |<rho_eg(t)>|, coherence mode only
    int trajectory_count = 0;
    FitResult fit;                        // of avg_transition on the window
    double dt = 0.0;
    double max_norm_drift = 0.0;
    double omega_eg = 0.0;
    int modes = 0;
};

// Noise is taken from the drives of the meshes (noise spec and tones).
// `phi_e` is the static working point, one per mesh.
NoiseSimResult averaged_transition_probability(const SymbolicHamiltonian& h, const BasisSpec& basis,
                                               const Eigen::VectorXd& phi_e, const std::vector<FluxDrive>& drives,
                                               const SimOptions& options);

// Ordinary least squares y = offset + slope * t with standard errors from the
// residuals.
FitResult linear_fit(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1);

struct Targets {
    double gamma1 = 0.0;  // golden rule in the irrotational frame, 1/ns
    double offset = 0.0;  // 2 eta^2 |<e|n|g>|^2 sigma_phi^2
    double eta = 0.0;
    double n_ge = 0.0;
    double sigma_phi = 0.0;
    // Finite-t_c cross term between the irrotational coupling and the
    // drive-term offset, 4 Im(conj(V) eta n_ge) sigma^2 w t_c^2 / (1 + w^2 t_c^2).
    double offset_cross = 0.0;
    // Finite-t_c transient of the golden-rule term,
    // |V|^2 2 sigma^2 t_c^2 (w^2 t_c^2 - 1) / (1 + w^2 t_c^2)^2.
    double offset_transient = 0.0;
    double omega_eg = 0.0;
};

// Targets for the gauge of h on mesh 0 at the static working point.
Targets perturbative_targets(const SymbolicHamiltonian& h, const BasisSpec& basis, const Eigen::VectorXd& phi_e,
                             const NoiseSpec& noise);

}  // namespace fluxq
