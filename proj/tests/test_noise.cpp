#include "fluxq/errors.hpp"
#include "fluxq/noise.hpp"
#include "fluxq/spectrum.hpp"
#include "fluxq/units.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>

using namespace fluxq;

namespace {

const NoiseSpec kNoise{0.002, 0.05};

}  // namespace

TEST_CASE("zero sigma gives a zero path") {
    NoisePath p = sample_noise_path(NoiseSpec{0.0, 0.05}, 2.0, max_step(kNoise), 3);
    CHECK(p.size() == static_cast<Eigen::Index>(std::llround(2.0 / max_step(kNoise))) + 1);
    CHECK(p.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.derivatives.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ensemble variance matches the Lorentzian integral") {
    const double dt = max_step(kNoise);
    const double sp = kNoise.sigma_phase();
    double sum = 0.0;
    long count = 0;
    for (int k = 0; k < 500; ++k) {
        NoisePath p = sample_noise_path(kNoise, 5.0, dt, derive_seed(77, k));
        // Samples 0.1 ns apart, two correlation times.
        const auto stride = static_cast<Eigen::Index>(std::llround(0.1 / dt));
        for (Eigen::Index i = 0; i < p.size(); i += stride) {
            sum += p.values(i) * p.values(i);
            ++count;
        }
    }
    const double var = sum / static_cast<double>(count);
    CHECK(std::abs(var / (sp * sp) - 1.0) < 0.05);
    CHECK(std::abs(var / (sp * sp * captured_variance_fraction(kNoise)) - 1.0) < 0.03);
}

TEST_CASE("ensemble periodogram matches S_phi") {
    const double dt = max_step(kNoise);
    const double duration = 5.0;
    const double w0 = 136.0;  // near the SQUID transition
    const double dw = units::kTwoPi / duration;
    double measured = 0.0, target = 0.0;
    const int paths = 500;
    for (int k = 0; k < paths; ++k) {
        NoisePath p = sample_noise_path(kNoise, duration, dt, derive_seed(5, k));
        for (int b = -2; b <= 2; ++b) {
            const double w = w0 + b * dw;
            std::complex<double> acc = 0.0;
            for (Eigen::Index i = 0; i + 1 < p.size(); ++i) acc += p.values(i) * std::polar(1.0, w * p.time(i));
            measured += std::norm(acc * dt) / duration;
        }
    }
    for (int b = -2; b <= 2; ++b) target += flux_noise_spectrum(kNoise, w0 + b * dw);
    measured /= paths;
    CHECK(std::abs(measured / target - 1.0) < 0.10);
}

TEST_CASE("derivatives are the analytic derivative of the values") {
    const double dt = max_step(kNoise) / 8.0;
    NoisePath p = sample_noise_path(kNoise, 1.0, dt, 11);
    double err = 0.0, scale = 0.0;
    for (Eigen::Index i = 1; i + 1 < p.size(); ++i) {
        const double fd = (p.values(i + 1) - p.values(i - 1)) / (2 * dt);
        err = std::max(err, std::abs(fd - p.derivatives(i)));
        scale = std::max(scale, std::abs(p.derivatives(i)));
    }
    CHECK(err < 1e-3 * scale);
}

TEST_CASE("paths are deterministic in the seed") {
    const double dt = max_step(kNoise);
    NoisePath a = sample_noise_path(kNoise, 1.0, dt, 42);
    NoisePath b = sample_noise_path(kNoise, 1.0, dt, 42);
    NoisePath c = sample_noise_path(kNoise, 1.0, dt, 43);
    CHECK(a.values == b.values);
    CHECK(a.derivatives == b.derivatives);
    CHECK(a.values != c.values);
    CHECK(a.seed == 42);

    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 10000; ++i) seeds.insert(derive_seed(1, i));
    CHECK(seeds.size() == 10000);
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
    CHECK(derive_seed(1, 5) != derive_seed(2, 5));
}

TEST_CASE("preconditions") {
    CHECK_THROWS_AS(sample_noise_path(kNoise, 1.0, 2.0 * max_step(kNoise), 1), ValidationError);
    PathOptions needs;
    needs.required_frequency = 2.0 * kNoise.effective_band_limit();
    CHECK_THROWS_AS(sample_noise_path(kNoise, 1.0, max_step(kNoise), 1, needs), ValidationError);
    CHECK(max_step(kNoise) == doctest::Approx(std::min(0.05 / 20, 0.1 / 640.0)));
    CHECK(captured_variance_fraction(kNoise) == doctest::Approx(2.0 / units::kPi * std::atan(32.0)));
}

TEST_CASE("requested mode count is a minimum") {
    NoiseSpec n = kNoise;
    n.mode_count = 5000;
    NoisePath p = sample_noise_path(n, 1.0, max_step(n), 1);
    CHECK(p.modes >= 5000);
    CHECK(p.mode_spacing * p.modes <= n.effective_band_limit() * (1 + 1e-12));
}

TEST_CASE("tones add analytically") {
    FluxDrive d;
    d.tones.push_back({0.01, 30.0, 0.4});
    NoisePath p = sample_drive_path(d, 1.0, 1e-3, 9);
    const double a = units::flux_to_phase(0.01);
    for (Eigen::Index i = 0; i < p.size(); i += 97) {
        const double t = p.time(i);
        CHECK(p.values(i) == doctest::Approx(a * std::cos(30.0 * t + 0.4)));
        CHECK(p.derivatives(i) == doctest::Approx(-30.0 * a * std::sin(30.0 * t + 0.4)));
    }
}
