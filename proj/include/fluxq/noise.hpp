#pragma once

// Band-limited Gaussian flux noise by spectral synthesis.
//
//   dphi(t) = sum_k a_k cos(w_k t + theta_k),  a_k = sqrt(4 S_phi(w_k) dw / 2pi)
//
// on an evenly spaced set of modes 0 < w_k <= band_limit with independent
// uniform phases. The one-sided sum reproduces the two-sided Lorentzian, so
// var(dphi) = (1/2pi) int_{-W}^{W} S_phi = sigma_phi^2 (2/pi) atan(W t_c).

#include "fluxq/netlist.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace fluxq {

struct NoisePath {
    double step = 0.0;          // grid spacing, ns
    Eigen::VectorXd values;     // dphi_e(t_k), rad
    Eigen::VectorXd derivatives;  // d dphi_e/dt (t_k), rad/ns (analytic)
    std::uint64_t seed = 0;
    int modes = 0;              // number of synthesis modes
    double mode_spacing = 0.0;  // rad/ns

    Eigen::Index size() const { return values.size(); }
    double time(Eigen::Index k) const { return static_cast<double>(k) * step; }
    double duration() const { return size() > 0 ? time(size() - 1) : 0.0; }
};

// Zero path of the given length (no noise on this mesh).
NoisePath zero_path(double duration, double step);

// Fraction of sigma_phi^2 captured below the band limit.
double captured_variance_fraction(const NoiseSpec& noise);

// Resolution precondition dt <= min(t_c / 20, 0.1 / band_limit).
double max_step(const NoiseSpec& noise);

struct PathOptions {
    // Golden-rule frequency that must lie inside the band (0 = unchecked).
    double required_frequency = 0.0;
};

// Samples on t_k = k * step, k = 0 .. round(duration / step).
NoisePath sample_noise_path(const NoiseSpec& noise, double duration, double step, std::uint64_t seed,
                            const PathOptions& options = {});

// Noise (if any) plus deterministic tones of a mesh drive.
NoisePath sample_drive_path(const FluxDrive& drive, double duration, double step, std::uint64_t seed,
                            const PathOptions& options = {});

// Per-trajectory seed derived from a base seed and an index (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Uniform double in [0, 1) from 53 random bits.
double uniform01(std::mt19937_64& rng);

}  // namespace fluxq
