#include "fluxq/noise.hpp"

#include "fluxq/errors.hpp"
#include "fluxq/spectrum.hpp"
#include "fluxq/units.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

namespace fluxq {

namespace {

constexpr double kTailCorrelationTimes = 20.0;

Eigen::Index grid_points(double duration, double step) {
    if (!(step > 0.0)) throw ValidationError("path step must be positive");
    if (!(duration >= 0.0)) throw ValidationError("path duration must be non-negative");
    return static_cast<Eigen::Index>(std::llround(duration / step)) + 1;
}

void add_tones(NoisePath& path, const std::vector<Tone>& tones) {
    for (const auto& tone : tones) {
        const double a = units::flux_to_phase(tone.amplitude_phi0);
        for (Eigen::Index k = 0; k < path.size(); ++k) {
            const double arg = tone.angular_frequency * path.time(k) + tone.phase;
            path.values(k) += a * std::cos(arg);
            path.derivatives(k) -= a * tone.angular_frequency * std::sin(arg);
        }
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

NoisePath zero_path(double duration, double step) {
    NoisePath path;
    path.step = step;
    const Eigen::Index n = grid_points(duration, step);
    path.values = Eigen::VectorXd::Zero(n);
    path.derivatives = Eigen::VectorXd::Zero(n);
    return path;
}

double captured_variance_fraction(const NoiseSpec& noise) {
    return 2.0 / units::kPi * std::atan(noise.effective_band_limit() * noise.correlation_time_ns);
}

double max_step(const NoiseSpec& noise) {
    return std::min(noise.correlation_time_ns / 20.0, 0.1 / noise.effective_band_limit());
}

NoisePath sample_noise_path(const NoiseSpec& noise, double duration, double step, std::uint64_t seed,
                            const PathOptions& options) {
    if (!(noise.sigma_phi0 >= 0.0) || !(noise.correlation_time_ns > 0.0)) {
        throw ValidationError("noise needs sigma >= 0 and t_c > 0");
    }
    const double band = noise.effective_band_limit();
    const double tc = noise.correlation_time_ns;
    if (step > max_step(noise) * (1.0 + 1e-9)) {
        std::ostringstream msg;
        msg << "time step " << step << " ns too coarse: need <= min(t_c/20, 0.1/band_limit) = " << max_step(noise)
            << " ns";
        throw ValidationError(msg.str());
    }
    if (options.required_frequency > band) {
        std::ostringstream msg;
        msg << "band limit " << band << " rad/ns does not cover omega_eg = " << options.required_frequency << " rad/ns";
        throw ValidationError(msg.str());
    }

    NoisePath path = zero_path(duration, step);
    path.seed = seed;

    // FFT length: the path plus a tail, so the mode spacing resolves the
    // spectral knee; doubled until the requested number of modes fits.
    const double span = duration + kTailCorrelationTimes * tc;
    std::size_t m = 1;
    while (static_cast<double>(m) < span / step + 1.0) m <<= 1;
    auto spacing = [&] { return units::kTwoPi / (static_cast<double>(m) * step); };
    auto mode_total = [&] { return static_cast<std::size_t>(std::floor(band / spacing() * (1.0 + 1e-12))); };
    while (mode_total() < static_cast<std::size_t>(std::max(noise.mode_count, 1))) m <<= 1;
    const std::size_t modes = mode_total();
    if (2 * modes >= m) throw ValidationError("band limit exceeds the Nyquist frequency of the path grid");
    path.modes = static_cast<int>(modes);
    path.mode_spacing = spacing();

    if (noise.sigma_phi0 == 0.0) return path;

    // z(t) = dphi + i d(dphi)/dt from one inverse FFT: each mode contributes
    // u (1 - w) / 2 at +w and conj(u) (1 + w) / 2 at -w.
    std::mt19937_64 rng(seed);
    const double dw = path.mode_spacing;
    std::vector<std::complex<double>> spec(m, 0.0), z;
    for (std::size_t k = 1; k <= modes; ++k) {
        const double w = static_cast<double>(k) * dw;
        // S_phi(w) dw / 2pi, two-sided, folded onto w > 0.
        const double amplitude = std::sqrt(4.0 * flux_noise_spectrum(noise, w) * dw / units::kTwoPi);
        const std::complex<double> u = std::polar(amplitude, units::kTwoPi * uniform01(rng));
        spec[k] += 0.5 * u * (1.0 - w);
        spec[m - k] += 0.5 * std::conj(u) * (1.0 + w);
    }
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    fft.inv(z, spec);
    for (Eigen::Index k = 0; k < path.size(); ++k) {
        path.values(k) = z[static_cast<std::size_t>(k)].real();
        path.derivatives(k) = z[static_cast<std::size_t>(k)].imag();
    }
    return path;
}

NoisePath sample_drive_path(const FluxDrive& drive, double duration, double step, std::uint64_t seed,
                            const PathOptions& options) {
    NoisePath path = drive.noise ? sample_noise_path(*drive.noise, duration, step, seed, options)
                                 : zero_path(duration, step);
    path.seed = seed;
    add_tones(path, drive.tones);
    return path;
}

}  // namespace fluxq
