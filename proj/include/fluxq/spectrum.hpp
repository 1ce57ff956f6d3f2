#pragma once

// Numerical representation of a SymbolicHamiltonian with at most two degrees
// of freedom, its low-lying spectrum, matrix elements and closed-form rates.

#include "fluxq/hamiltonian.hpp"
#include "fluxq/netlist.hpp"

#include <Eigen/Dense>

#include <complex>
#include <variant>
#include <vector>

namespace fluxq {

using cplx = std::complex<double>;

// Charge states n in [-cutoff, cutoff].
struct Periodic {
    int charge_cutoff = 20;
};

// Harmonic-oscillator Fock states; the frequency comes from the quadratic
// terms and the diagonal charging entry of the dof.
struct Extended {
    int oscillator_levels = 100;
};

using DofBasis = std::variant<Periodic, Extended>;

struct BasisSpec {
    std::vector<DofBasis> dofs;

    static constexpr int kMinChargeCutoff = 10;
    static constexpr int kMinOscillatorLevels = 20;

    // Extended for every dof that appears in a quadratic term, periodic
    // otherwise.
    static BasisSpec automatic(const SymbolicHamiltonian& h, int charge_cutoff = 20, int oscillator_levels = 100);

    Eigen::Index dimension() const;
    void validate(Eigen::Index dofs) const;
};

// Matrices of one Hamiltonian at a fixed static flux, plus the operators
// needed for matrix elements and time evolution.
struct NumericModel {
    BasisSpec basis;
    std::vector<Eigen::Index> dims;
    Eigen::VectorXd phi_e;           // static reduced flux per mesh
    Eigen::MatrixXcd hamiltonian;    // static part (dphi_e/dt = 0)
    std::vector<Eigen::MatrixXcd> number;  // n_i on the full space
    // Per potential term: cos(arg) and sin(arg) for cosines, arg for
    // quadratic terms (the unused slot is empty).
    std::vector<Eigen::MatrixXcd> cos_arg;
    std::vector<Eigen::MatrixXcd> sin_arg;
    std::vector<Eigen::MatrixXcd> arg;
    // Oscillator parameters of extended dofs (0 for periodic ones).
    std::vector<double> phi_zpf;

    Eigen::Index dimension() const { return hamiltonian.rows(); }
};

// phi_e in rad, one entry per mesh.
NumericModel build_numeric(const SymbolicHamiltonian& h, const BasisSpec& basis, const Eigen::VectorXd& phi_e);

// Derivative of the static Hamiltonian with respect to phi_e of one mesh.
Eigen::MatrixXcd flux_derivative_operator(const SymbolicHamiltonian& h, const NumericModel& model, Eigen::Index mesh);

struct MatrixElements {
    std::vector<cplx> dH_dphi_ge;  // per mesh, <g|dH/dphi_e|e>, rad/ns per rad
    std::vector<cplx> n_ge;        // per dof
    std::vector<cplx> n_gg;
    std::vector<cplx> n_ee;
};

struct Spectrum {
    Eigen::VectorXd eigenvalues;    // ascending, rad/ns
    Eigen::MatrixXcd eigenvectors;  // columns
    double omega_eg = 0.0;
    MatrixElements elements;
};

// k lowest eigenpairs of a Hermitian matrix. Eigenvector phases are fixed so
// that the largest component is real and positive.
Spectrum eigensystem(const Eigen::MatrixXcd& matrix, Eigen::Index k);

// Same, with matrix elements filled in from the model operators.
Spectrum eigensystem(const SymbolicHamiltonian& h, const NumericModel& model, Eigen::Index k);

cplx flux_derivative_element(const SymbolicHamiltonian& h, const NumericModel& model, const Spectrum& spectrum,
                             Eigen::Index mesh);

// Lorentzian S_phi(w) = 2 sigma_phi^2 t_c / (1 + w^2 t_c^2), rad^2 ns.
double flux_noise_spectrum(const NoiseSpec& noise, double omega);

// Golden-rule rate |element|^2 S_phi(omega_eg), 1/ns.
double t1_rate(cplx element, const NoiseSpec& noise, double omega_eg);

struct DephasingEnvelope {
    double domega_dphi = 0.0;        // d omega_eg / d phi_e, rad/ns per rad
    double richardson_estimate = 0.0;  // same from steps h and h/2 combined
    double rate = 0.0;               // (d omega/d phi)^2 S_phi(0) / 2, 1/ns
    double static_factor = 1.0;      // exp(-(n_gg - n_ee)^2 eta^2 sigma_phi^2)
    double delta_n = 0.0;            // n_gg - n_ee

    double operator()(double t) const;
    std::vector<double> sample(const std::vector<double>& t) const;
};

inline constexpr double kFluxDifferenceStep = 1e-6;

// Pure-dephasing envelope of the gauge represented by h at the working point
// of `model`. Throws NumericalError if the Richardson check fails.
DephasingEnvelope dephasing_envelope(const SymbolicHamiltonian& h, const NumericModel& model,
                                     const Spectrum& spectrum, const NoiseSpec& noise, Eigen::Index mesh = 0);

}  // namespace fluxq
