#include "fluxq/noisesim.hpp"

#include "fluxq/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace fluxq {

namespace {

// exp(-i H dt) psi. Taylor series on the vector with the diagonal centre
// shifted out; falls back to diagonalization when |H dt| is not small.
// Small matrices live on the stack; larger ones fall back to the heap.
constexpr int kStackLevels = 16;
using SmallMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kStackLevels, kStackLevels>;
using SmallVector = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kStackLevels, 1>;

template <class Mat, class Vec>
struct Propagator {
    Vec term, next, sum;

    void apply(Mat& h, double dt, Vec& psi) {
        const double centre = 0.5 * (h.diagonal().real().maxCoeff() + h.diagonal().real().minCoeff());
        h.diagonal().array() -= centre;
        const double norm = h.cwiseAbs().colwise().sum().maxCoeff() * dt;
        const cplx phase = std::polar(1.0, -centre * dt);

        if (norm > 1.0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(h)};
            Eigen::VectorXcd c = es.eigenvectors().adjoint() * psi;
            for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -es.eigenvalues()(k) * dt);
            psi = phase * (es.eigenvectors() * c);
            return;
        }
        term = psi;
        sum = psi;
        for (int k = 1; k < 40; ++k) {
            next.noalias() = h * term;
            term = next * cplx(0.0, -dt / static_cast<double>(k));
            sum += term;
            if (term.squaredNorm() < 1e-36 * sum.squaredNorm()) break;
        }
        psi = phase * sum;
    }
};

void check_paths(const EvolutionModel& model, const std::vector<NoisePath>& paths, double dt) {
    if (static_cast<Eigen::Index>(paths.size()) != model.meshes()) {
        throw ValidationError("evolve needs one path per mesh");
    }
    if (!(dt > 0.0)) throw ValidationError("evolve: dt must be positive");
    for (const auto& p : paths) {
        if (std::abs(p.step - 0.5 * dt) > 1e-12 * dt) throw ValidationError("evolve: paths must be sampled at dt/2");
        if (p.size() != paths.front().size() || p.size() < 3 || p.size() % 2 == 0) {
            throw ValidationError("evolve: paths must share an odd length of at least 3 samples");
        }
    }
}

struct WindowStats {
    std::vector<double> t;
    std::size_t first = 0;
    std::size_t last = 0;  // exclusive
};

WindowStats window_indices(const std::vector<double>& t, double t0, double t1) {
    WindowStats w;
    w.first = t.size();
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] >= t0 - 1e-12 && t[k] <= t1 + 1e-12) {
            w.first = std::min(w.first, k);
            w.last = k + 1;
        }
    }
    if (w.first >= w.last || w.last - w.first < 3) {
        std::ostringstream msg;
        msg << "fit window [" << t0 << ", " << t1 << "] ns holds fewer than 3 samples (T too short relative to t_c?)";
        throw ValidationError(msg.str());
    }
    return w;
}

}  // namespace

EvolutionModel make_evolution_model(const SymbolicHamiltonian& h, const NumericModel& model, int levels) {
    const Eigen::Index dim = model.dimension();
    const Eigen::Index l = levels <= 0 ? dim : std::min<Eigen::Index>(levels, dim);
    if (l < 2) throw ValidationError("evolution needs at least two levels");
    Spectrum s = eigensystem(model.hamiltonian, l);

    EvolutionModel out;
    out.energies = s.eigenvalues.array() - s.eigenvalues(0);
    out.states = s.eigenvectors;
    const Eigen::MatrixXcd& v = out.states;
    for (std::size_t k = 0; k < h.terms.size(); ++k) {
        const auto& t = h.terms[k];
        EvolutionModel::Projected p{t.kind, t.energy, t.flux_weights, {}, {}};
        if (t.kind == TermKind::Cosine) {
            p.a = v.adjoint() * model.cos_arg[k] * v;
            p.b = v.adjoint() * model.sin_arg[k] * v;
        } else {
            p.a = v.adjoint() * model.arg[k] * v;
        }
        out.terms.push_back(std::move(p));
    }
    for (const auto& n : model.number) out.number.push_back(v.adjoint() * n * v);
    out.drive_coupling = h.drive_coupling;
    return out;
}

EvolutionModel zero_parameter_model(const EvolutionModel& model) {
    EvolutionModel out = model;
    out.static_part = false;
    return out;
}

namespace {

template <class Mat>
struct ProjectedOps {
    std::vector<Mat> a, b, number;

    explicit ProjectedOps(const EvolutionModel& model) {
        for (const auto& t : model.terms) {
            a.emplace_back(t.a);
            b.emplace_back(t.kind == TermKind::Cosine ? Mat(t.b) : Mat());
        }
        for (const auto& n : model.number) number.emplace_back(n);
    }
};

template <class Mat>
void fill_projected(const EvolutionModel& model, const ProjectedOps<Mat>& ops, const Eigen::VectorXd& dphi,
                    const Eigen::VectorXd& dphi_dot, Mat& h) {
    const Eigen::Index l = model.levels();
    h.setZero(l, l);
    if (model.static_part) {
        h.diagonal() = model.energies.cast<cplx>();
        for (std::size_t k = 0; k < model.terms.size(); ++k) {
            const auto& t = model.terms[k];
            const double x = t.flux_weights.dot(dphi);
            if (x == 0.0) continue;
            if (t.kind == TermKind::Cosine) {
                h -= (t.energy * (std::cos(x) - 1.0)) * ops.a[k];
                h += (t.energy * std::sin(x)) * ops.b[k];
            } else {
                h += (t.energy * x) * ops.a[k];
            }
        }
    }
    for (Eigen::Index i = 0; i < model.drive_coupling.rows(); ++i) {
        double c = 0.0;
        for (Eigen::Index j = 0; j < model.drive_coupling.cols(); ++j) c += model.drive_coupling(i, j) * dphi_dot(j);
        if (c != 0.0) h += c * ops.number[static_cast<std::size_t>(i)];
    }
}

}  // namespace

Eigen::MatrixXcd projected_hamiltonian(const EvolutionModel& model, const Eigen::VectorXd& dphi,
                                       const Eigen::VectorXd& dphi_dot) {
    Eigen::MatrixXcd h;
    fill_projected(model, ProjectedOps<Eigen::MatrixXcd>(model), dphi, dphi_dot, h);
    return h;
}

namespace {

template <class Mat, class Vec>
Trajectory evolve_with(const EvolutionModel& model, const std::vector<NoisePath>& paths, const EvolveOptions& options) {
    const Eigen::Index l = model.levels();
    Vec psi;
    if (options.initial) {
        if (options.initial->size() != l) throw ValidationError("evolve: initial state has the wrong dimension");
        psi = *options.initial;
        psi.normalize();
    } else {
        psi = Vec::Zero(l);
        psi(1) = 1.0;
    }

    const ProjectedOps<Mat> ops(model);
    const auto f = static_cast<Eigen::Index>(paths.size());
    const Eigen::Index steps = (paths.front().size() - 1) / 2;
    Eigen::VectorXd dphi(f), dphi_dot(f);
    Mat h(l, l);
    Propagator<Mat, Vec> prop;
    Trajectory out;
    auto record = [&](Eigen::Index step) {
        out.t.push_back(static_cast<double>(step) * options.dt);
        out.amp_g.push_back(psi(0));
        out.amp_e.push_back(psi(1));
        if (options.keep_states) out.states.emplace_back(psi);
        out.norm_drift = std::max(out.norm_drift, std::abs(psi.norm() - 1.0));
    };
    record(0);
    for (Eigen::Index s = 0; s < steps; ++s) {
        for (Eigen::Index j = 0; j < f; ++j) {
            dphi(j) = paths[static_cast<std::size_t>(j)].values(2 * s + 1);
            dphi_dot(j) = paths[static_cast<std::size_t>(j)].derivatives(2 * s + 1);
        }
        fill_projected(model, ops, dphi, dphi_dot, h);
        prop.apply(h, options.dt, psi);
        if ((s + 1) % options.record_every == 0 || s + 1 == steps) record(s + 1);
    }
    return out;
}

}  // namespace

Trajectory evolve(const EvolutionModel& model, const std::vector<NoisePath>& paths, const EvolveOptions& options) {
    check_paths(model, paths, options.dt);
    if (options.record_every < 1) throw ValidationError("evolve: record_every must be >= 1");
    if (model.levels() <= kStackLevels) return evolve_with<SmallMatrix, SmallVector>(model, paths, options);
    return evolve_with<Eigen::MatrixXcd, Eigen::VectorXcd>(model, paths, options);
}

FitResult linear_fit(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1) {
    if (t.size() != y.size()) throw ValidationError("linear_fit: size mismatch");
    WindowStats w = window_indices(t, t0, t1);
    const auto n = static_cast<double>(w.last - w.first);
    double mt = 0.0, my = 0.0;
    for (std::size_t k = w.first; k < w.last; ++k) {
        mt += t[k];
        my += y[k];
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0;
    for (std::size_t k = w.first; k < w.last; ++k) {
        stt += (t[k] - mt) * (t[k] - mt);
        sty += (t[k] - mt) * (y[k] - my);
    }
    FitResult fit;
    fit.slope = sty / stt;
    fit.offset = my - fit.slope * mt;
    double rss = 0.0;
    for (std::size_t k = w.first; k < w.last; ++k) {
        const double r = y[k] - fit.offset - fit.slope * t[k];
        rss += r * r;
    }
    const double s2 = n > 2 ? rss / (n - 2) : 0.0;
    fit.slope_error = std::sqrt(s2 / stt);
    fit.offset_error = std::sqrt(s2 * (1.0 / n + mt * mt / stt));
    fit.window_start = t[w.first];
    fit.window_end = t[w.last - 1];
    return fit;
}

NoiseSimResult averaged_transition_probability(const SymbolicHamiltonian& h, const BasisSpec& basis,
                                               const Eigen::VectorXd& phi_e, const std::vector<FluxDrive>& drives,
                                               const SimOptions& options) {
    if (options.trajectories < 100) throw ValidationError("need at least 100 trajectories");
    if (!(options.duration > 0.0)) throw ValidationError("simulation duration must be positive");
    if (static_cast<Eigen::Index>(drives.size()) != h.meshes()) throw ValidationError("need one drive per mesh");

    NumericModel numeric = build_numeric(h, basis, phi_e);
    EvolutionModel model = make_evolution_model(h, numeric, options.levels);
    if (options.zero_parameter) model = zero_parameter_model(model);
    const double omega = model.omega_eg();

    double dt_max = 0.0;
    double tc = 0.0;
    for (const auto& d : drives) {
        if (!d.noise) continue;
        const double m = max_step(*d.noise);
        dt_max = dt_max > 0.0 ? std::min(dt_max, m) : m;
        tc = std::max(tc, d.noise->correlation_time_ns);
    }
    if (dt_max == 0.0) throw ValidationError("simulation needs a noisy mesh drive");
    double dt = options.dt > 0.0 ? options.dt : dt_max;
    if (dt > dt_max * (1.0 + 1e-9)) {
        std::ostringstream msg;
        msg << "dt = " << dt << " ns fails the resolution precondition dt <= " << dt_max << " ns";
        throw ValidationError(msg.str());
    }
    const auto steps = static_cast<Eigen::Index>(std::ceil(options.duration / dt - 1e-9));
    dt = options.duration / static_cast<double>(steps);
    const double interval = options.record_interval > 0.0 ? options.record_interval : 2.0 * tc;
    const int record_every = std::max(1, static_cast<int>(std::lround(interval / dt)));

    PathOptions path_options;
    path_options.required_frequency = options.zero_parameter ? 0.0 : omega;

    std::optional<Eigen::VectorXcd> initial;
    if (options.coherence) {
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(model.levels());
        psi(0) = psi(1) = 1.0 / std::sqrt(2.0);
        initial = psi;
    }

    const auto n = static_cast<std::size_t>(options.trajectories);
    std::vector<Trajectory> results(n);
    std::vector<int> modes(n, 0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        while (!failed) {
            const std::size_t i = next++;
            if (i >= n) break;
            try {
                std::vector<NoisePath> paths;
                for (std::size_t j = 0; j < drives.size(); ++j) {
                    const auto seed = derive_seed(options.base_seed, i * drives.size() + j);
                    paths.push_back(sample_drive_path(drives[j], static_cast<double>(steps) * dt, 0.5 * dt, seed,
                                                      path_options));
                    modes[i] = std::max(modes[i], paths.back().modes);
                }
                EvolveOptions eo;
                eo.dt = dt;
                eo.record_every = record_every;
                eo.initial = initial;
                results[i] = evolve(model, paths, eo);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Fixed index-order reduction.
    NoiseSimResult out;
    out.t_grid = results.front().t;
    out.trajectory_count = options.trajectories;
    out.dt = dt;
    out.omega_eg = omega;
    out.modes = modes.front();
    const std::size_t pts = out.t_grid.size();
    out.avg_prob.assign(pts, 0.0);
    out.avg_transition.assign(pts, 0.0);
    out.transition_error.assign(pts, 0.0);
    std::vector<double> second(pts, 0.0);
    std::vector<cplx> rho(pts, 0.0);
    for (const auto& r : results) {
        out.max_norm_drift = std::max(out.max_norm_drift, r.norm_drift);
        for (std::size_t k = 0; k < pts; ++k) {
            const double pg = std::norm(r.amp_g[k]);
            out.avg_prob[k] += std::norm(r.amp_e[k]);
            out.avg_transition[k] += pg;
            second[k] += pg * pg;
            rho[k] += r.amp_e[k] * std::conj(r.amp_g[k]);
        }
    }
    const double nd = static_cast<double>(n);
    for (std::size_t k = 0; k < pts; ++k) {
        out.avg_prob[k] /= nd;
        out.avg_transition[k] /= nd;
        const double var = std::max(0.0, second[k] / nd - out.avg_transition[k] * out.avg_transition[k]);
        out.transition_error[k] = std::sqrt(var / (nd - 1.0));
    }
    if (options.coherence) {
        for (std::size_t k = 0; k < pts; ++k) out.coherence.push_back(std::abs(rho[k] / nd));
        return out;
    }

    // Window [t0, min(T, 0.1/slope)] with the slope from one bootstrap fit of
    // the mean curve; errors from the spread of per-trajectory fits.
    const double t0 = options.fit_start > 0.0 ? options.fit_start : 20.0 * tc;
    const double total = out.t_grid.back();
    double t1 = options.fit_end.value_or(total);
    if (!options.fit_end) {
        FitResult boot = linear_fit(out.t_grid, out.avg_transition, t0, t1);
        if (boot.slope > 0.0) t1 = std::min(total, 0.1 / boot.slope);
    }
    double ms = 0.0, mo = 0.0, ss = 0.0, so = 0.0;
    std::vector<double> y(pts);
    for (const auto& r : results) {
        for (std::size_t k = 0; k < pts; ++k) y[k] = std::norm(r.amp_g[k]);
        FitResult f = linear_fit(out.t_grid, y, t0, t1);
        ms += f.slope;
        mo += f.offset;
        ss += f.slope * f.slope;
        so += f.offset * f.offset;
    }
    ms /= nd;
    mo /= nd;
    out.fit = linear_fit(out.t_grid, out.avg_transition, t0, t1);
    out.fit.slope = ms;
    out.fit.offset = mo;
    out.fit.slope_error = std::sqrt(std::max(0.0, ss / nd - ms * ms) / (nd - 1.0));
    out.fit.offset_error = std::sqrt(std::max(0.0, so / nd - mo * mo) / (nd - 1.0));
    return out;
}

Targets perturbative_targets(const SymbolicHamiltonian& h, const BasisSpec& basis, const Eigen::VectorXd& phi_e,
                             const NoiseSpec& noise) {
    NumericModel model = build_numeric(h, basis, phi_e);
    Spectrum s = eigensystem(h, model, 2);
    SymbolicHamiltonian irr = to_irrotational(h);
    NumericModel model_irr = build_numeric(irr, basis, phi_e);
    Spectrum s_irr = eigensystem(irr, model_irr, 2);

    Targets t;
    t.omega_eg = s.omega_eg;
    t.sigma_phi = noise.sigma_phase();
    t.eta = h.drive_coupling(0, 0);
    const cplx n = s.elements.n_ge[0];
    t.n_ge = std::abs(n);
    t.gamma1 = t1_rate(s_irr.elements.dH_dphi_ge[0], noise, s_irr.omega_eg);
    t.offset = 2.0 * t.eta * t.eta * std::norm(n) * t.sigma_phi * t.sigma_phi;

    // Gauge-frame elements combine into the irrotational coupling.
    const double w = s.omega_eg;
    const double tc = noise.correlation_time_ns;
    const double s2 = t.sigma_phi * t.sigma_phi;
    const cplx v = s.elements.dH_dphi_ge[0] + cplx(0.0, w * t.eta) * n;
    const double x = w * tc;
    t.offset_cross = 4.0 * std::imag(std::conj(v) * t.eta * n) * s2 * w * tc * tc / (1.0 + x * x);
    t.offset_transient = std::norm(v) * 2.0 * s2 * tc * tc * (x * x - 1.0) / ((1.0 + x * x) * (1.0 + x * x));
    return t;
}

}  // namespace fluxq
