#include "fluxq/cli.hpp"

#include "fluxq/errors.hpp"
#include "fluxq/irrotational.hpp"
#include "fluxq/noisesim.hpp"
#include "fluxq/spectrum.hpp"
#include "fluxq/topology.hpp"
#include "fluxq/units.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fluxq::cli {

namespace {

// Module operation currently running, for error messages.
thread_local std::string g_stage;

void stage(const char* name) { g_stage = name; }

double parse_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty()) {
        throw ValidationError("cannot parse " + what + " '" + text + "' as a number");
    }
    return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string ghz(double angular) { return format_number(units::angular_to_ghz(angular)); }

constexpr const char* kDimensionless = "dimensionless";

}  // namespace

std::string command_name(Command c) {
    switch (c) {
        case Command::Quantize: return "quantize";
        case Command::Spectrum: return "spectrum";
        case Command::Rates: return "rates";
        case Command::Simulate: return "simulate";
        case Command::CheckGauge: return "check-gauge";
    }
    return "unknown";
}

GaugeChoice GaugeChoice::parse(const std::string& text) {
    GaugeChoice g;
    if (text == "irrotational" || text == "irr") return g;
    g.irrotational = false;
    for (const auto& part : split(text, ',')) g.m.push_back(parse_double(part, "gauge coefficient"));
    if (g.m.size() < 2) throw ValidationError("gauge must be 'irrotational' or comma-separated coefficients like 1,0");
    return g;
}

std::string GaugeChoice::describe() const {
    if (irrotational) return "irrotational";
    std::string out;
    for (std::size_t k = 0; k < m.size(); ++k) out += (k ? "," : "") + format_number(m[k]);
    return out;
}

FluxSweep FluxSweep::parse(const std::string& text) {
    FluxSweep s;
    std::string range = text;
    if (auto eq = text.find('='); eq != std::string::npos) {
        s.mesh = text.substr(0, eq);
        range = text.substr(eq + 1);
    }
    auto parts = split(range, ':');
    if (parts.size() != 3) throw ValidationError("flux sweep '" + text + "' must look like [mesh=]start:stop:count");
    s.start = parse_double(parts[0], "sweep start");
    s.stop = parse_double(parts[1], "sweep stop");
    const double count = parse_double(parts[2], "sweep count");
    if (count < 1 || count != std::floor(count)) throw ValidationError("sweep count must be a positive integer");
    s.count = static_cast<int>(count);
    return s;
}

double FluxSweep::value(int k) const {
    if (count == 1) return start;
    return start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1);
}

SymbolicHamiltonian hamiltonian_for(const CircuitNetlist& netlist, const GaugeChoice& gauge, double aux_epsilon,
                                    double tolerance) {
    stage("topology.capacitance_matrix");
    CapacitanceMatrix c = capacitance_matrix(netlist, aux_epsilon);
    stage("topology.mesh_matrix");
    MeshMatrix r = mesh_matrix(netlist);
    IrrotationalTransform tr;
    if (gauge.irrotational) {
        stage("irrotational.irrotational_basis");
        BasisOptions options;
        options.tolerance = tolerance;
        options.circuit_name = netlist.name;
        Eigen::MatrixXd m = irrotational_basis(c, r, options);
        stage("irrotational.augment_and_invert");
        tr = make_transform(c, r, m, tolerance);
    } else {
        stage("irrotational.single_loop_gauge");
        if (r.meshes() != 1 || r.branches() != 2) {
            throw ValidationError("explicit gauges need a single loop of two branches; circuit '" + netlist.name +
                                  "' has " + std::to_string(r.branches()) + " branches and " +
                                  std::to_string(r.meshes()) + " meshes");
        }
        if (static_cast<Eigen::Index>(gauge.m.size()) != r.branches()) {
            throw ValidationError("gauge " + gauge.describe() + " needs one coefficient per branch");
        }
        Eigen::MatrixXd m = single_loop_gauge(r, gauge.m);
        stage("irrotational.augment_and_invert");
        tr = make_transform(c, r, m, tolerance);
    }
    stage("hamiltonian.build_symbolic");
    return build_symbolic(netlist, tr);
}

namespace {

struct Setup {
    CircuitNetlist net;
    SymbolicHamiltonian h;
    std::vector<FluxDrive> drives;
};

std::vector<FluxDrive> resolve_drives(const CircuitNetlist& net, const RunConfig& cfg, bool default_noise) {
    std::vector<FluxDrive> drives;
    for (const auto& m : net.meshes) drives.push_back(m.drive);
    bool any = false;
    for (const auto& d : drives) any = any || d.noise.has_value();
    for (std::size_t j = 0; j < drives.size(); ++j) {
        auto& d = drives[j];
        // Overrides apply to noisy meshes, or to the first mesh if none is noisy.
        if (!d.noise && (any || j > 0)) continue;
        if (!d.noise) {
            if (!(cfg.sigma && cfg.tc) && !default_noise) continue;
            d.noise = NoiseSpec{0.002, 0.05};
        }
        if (cfg.sigma) d.noise->sigma_phi0 = *cfg.sigma;
        if (cfg.tc) d.noise->correlation_time_ns = *cfg.tc;
        if (cfg.band_limit) d.noise->band_limit = *cfg.band_limit;
        if (!(d.noise->sigma_phi0 > 0.0) || !(d.noise->correlation_time_ns > 0.0)) {
            throw ValidationError("noise on mesh '" + net.meshes[j].id + "' needs sigma > 0 and tc > 0");
        }
        if (d.noise->effective_band_limit() * d.noise->correlation_time_ns < 10.0) {
            throw ValidationError("noise on mesh '" + net.meshes[j].id + "' needs band_limit * tc >= 10");
        }
    }
    return drives;
}

Setup setup(const RunConfig& cfg, bool default_noise) {
    Setup s;
    stage("netlist.parse_netlist");
    s.net = load_netlist(cfg.netlist_path);
    stage("netlist.validate");
    require_valid(s.net);
    s.h = hamiltonian_for(s.net, cfg.gauge, cfg.aux_epsilon, cfg.tolerance);
    stage("cli.run");
    s.drives = resolve_drives(s.net, cfg, default_noise);
    return s;
}

void echo_config(Report& report, const RunConfig& cfg, const CircuitNetlist* net) {
    auto& s = report.section("config");
    s.add_text("command", command_name(cfg.command));
    s.add_text("netlist", cfg.netlist_path);
    if (net) s.add_text("circuit", net->name);
    s.add_text("gauge", cfg.gauge.describe());
    s.add("aux_epsilon", cfg.aux_epsilon, kDimensionless);
    s.add("tolerance", cfg.tolerance, kDimensionless);
    const bool numeric = cfg.command != Command::Quantize;
    if (numeric) {
        s.add("charge_cutoff", cfg.charge_cutoff, "states");
        s.add("oscillator_levels", cfg.oscillator_levels, "states");
    }
    if (cfg.command == Command::Spectrum || cfg.command == Command::Rates) {
        s.add("states", cfg.states, "states");
        for (std::size_t k = 0; k < cfg.sweeps.size(); ++k) {
            const auto& w = cfg.sweeps[k];
            const std::string key = "sweep." + std::to_string(k);
            s.add_text(key + ".mesh", w.mesh.empty() && net ? net->meshes.front().id : w.mesh);
            s.add(key + ".start", w.start, "Phi0");
            s.add(key + ".stop", w.stop, "Phi0");
            s.add(key + ".count", w.count, "points");
        }
    }
    if (cfg.sigma) s.add("sigma_override", *cfg.sigma, "Phi0");
    if (cfg.tc) s.add("tc_override", *cfg.tc, "ns");
    if (cfg.band_limit) s.add("band_limit_override", *cfg.band_limit, "rad/ns");
    if (cfg.command == Command::Simulate || cfg.command == Command::CheckGauge) {
        s.add("duration", cfg.duration, "ns");
        if (cfg.dt) s.add("dt", *cfg.dt, "ns");
        s.add("trajectories", cfg.trajectories, "trajectories");
        s.add("levels", cfg.levels, "states");
        s.add_text("seed", std::to_string(cfg.seed) + " dimensionless");
        if (cfg.fit_start) s.add("fit_start", *cfg.fit_start, "ns");
        if (cfg.fit_end) s.add("fit_end", *cfg.fit_end, "ns");
        if (cfg.record_interval) s.add("record_interval", *cfg.record_interval, "ns");
    }
    s.add_text("format", cfg.format == ReportFormat::KeyValue ? "kv" : "table");
}

void echo_noise(Report& report, const CircuitNetlist& net, const std::vector<FluxDrive>& drives) {
    auto& s = report.section("drives");
    for (std::size_t j = 0; j < drives.size(); ++j) {
        const std::string p = net.meshes[j].id + ".";
        s.add(p + "static", drives[j].static_phi0, "Phi0");
        if (const auto& n = drives[j].noise) {
            s.add(p + "sigma", n->sigma_phi0, "Phi0");
            s.add(p + "tc", n->correlation_time_ns, "ns");
            s.add(p + "band_limit", n->effective_band_limit(), "rad/ns");
            if (n->mode_count > 0) s.add(p + "min_modes", n->mode_count, "modes");
        }
        for (std::size_t k = 0; k < drives[j].tones.size(); ++k) {
            const auto& t = drives[j].tones[k];
            const std::string q = p + "tone." + std::to_string(k) + ".";
            s.add(q + "amplitude", t.amplitude_phi0, "Phi0");
            s.add(q + "frequency", t.angular_frequency, "rad/ns");
            s.add(q + "phase", t.phase, "rad");
        }
    }
}

void write_matrix(ReportSection& s, const std::string& name, const Eigen::MatrixXd& m, const std::string& unit) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            s.add(name + "." + std::to_string(i) + "." + std::to_string(j), m(i, j), unit);
        }
    }
}

void quantize_report(Report& report, const RunConfig& cfg) {
    stage("netlist.parse_netlist");
    CircuitNetlist net = load_netlist(cfg.netlist_path);
    echo_config(report, cfg, &net);
    stage("netlist.validate");
    require_valid(net);
    stage("topology.capacitance_matrix");
    CapacitanceMatrix c = capacitance_matrix(net, cfg.aux_epsilon);
    stage("topology.mesh_matrix");
    MeshMatrix r = mesh_matrix(net);
    SymbolicHamiltonian h = hamiltonian_for(net, cfg.gauge, cfg.aux_epsilon, cfg.tolerance);

    // Rebuild the transform for display (same inputs, same result).
    IrrotationalTransform tr;
    if (cfg.gauge.irrotational) {
        BasisOptions options;
        options.tolerance = cfg.tolerance;
        options.circuit_name = net.name;
        tr = irrotational_transform(c, r, options);
    } else {
        tr = make_transform(c, r, single_loop_gauge(r, cfg.gauge.m), cfg.tolerance);
    }

    auto& circuit = report.section("circuit");
    circuit.add("branches", static_cast<double>(net.branch_count()), "branches");
    circuit.add("meshes", static_cast<double>(net.mesh_count()), "meshes");
    circuit.add("dofs", static_cast<double>(h.dofs()), "dofs");
    for (std::size_t i = 0; i < net.branches.size(); ++i) {
        if (c.aux_mask[i]) circuit.add("aux_capacitance." + net.branches[i].id, c.values(i, i), "fF");
    }

    auto& t = report.section("transform");
    write_matrix(t, "R", r.values, kDimensionless);
    write_matrix(t, "M", tr.M, kDimensionless);
    write_matrix(t, "M_plus_inv", tr.M_plus_inv, kDimensionless);
    write_matrix(t, "C_eff", tr.C_eff, "fF");
    for (Eigen::Index i = 0; i < tr.branches(); ++i) {
        for (Eigen::Index j = 0; j < tr.meshes(); ++j) {
            t.add("flux_weight." + net.branches[i].id + "." + net.meshes[j].id, tr.flux_weights(i, j), kDimensionless);
        }
    }

    auto& hs = report.section("hamiltonian");
    hs.add_text("gauge", h.gauge.describe());
    hs.add_text("irrotational", h.gauge.irrotational ? "true" : "false");
    for (Eigen::Index i = 0; i < h.dofs(); ++i) {
        for (Eigen::Index j = 0; j < h.dofs(); ++j) {
            hs.add("charging." + std::to_string(i) + "." + std::to_string(j), units::angular_to_ghz(h.charging(i, j)),
                   "GHz");
        }
    }
    for (Eigen::Index i = 0; i < h.dofs(); ++i) {
        for (Eigen::Index j = 0; j < h.meshes(); ++j) {
            hs.add("drive_coupling." + std::to_string(i) + "." + net.meshes[j].id, h.drive_coupling(i, j),
                   kDimensionless);
        }
    }

    auto& terms = report.table("terms");
    terms.add_column("branch", "");
    terms.add_column("kind", "");
    terms.add_column("energy", "GHz");
    for (Eigen::Index i = 0; i < h.dofs(); ++i) terms.add_column("c." + std::to_string(i), kDimensionless);
    for (Eigen::Index j = 0; j < h.meshes(); ++j) terms.add_column("w." + net.meshes[j].id, kDimensionless);
    for (const auto& term : h.terms) {
        std::vector<std::string> row{term.branch, term.kind == TermKind::Cosine ? "cosine" : "quadratic",
                                     ghz(term.energy)};
        for (Eigen::Index i = 0; i < h.dofs(); ++i) row.push_back(format_number(term.dof_coeffs(i)));
        for (Eigen::Index j = 0; j < h.meshes(); ++j) row.push_back(format_number(term.flux_weights(j)));
        terms.add_row(std::move(row));
    }
}

// Flux points of the sweep grid (Cartesian product over swept meshes), in Phi0.
std::vector<std::vector<double>> flux_points(const CircuitNetlist& net, const RunConfig& cfg) {
    std::vector<double> base = net.static_phases();
    for (double& b : base) b /= units::kTwoPi;
    std::vector<std::pair<std::size_t, FluxSweep>> sweeps;
    for (const auto& w : cfg.sweeps) {
        std::size_t idx = 0;
        if (!w.mesh.empty()) {
            bool found = false;
            for (std::size_t j = 0; j < net.meshes.size(); ++j) {
                if (net.meshes[j].id == w.mesh) {
                    idx = j;
                    found = true;
                }
            }
            if (!found) throw ValidationError("flux sweep names unknown mesh '" + w.mesh + "'");
        }
        sweeps.emplace_back(idx, w);
    }
    std::vector<std::vector<double>> out;
    std::vector<int> counter(sweeps.size(), 0);
    while (true) {
        std::vector<double> p = base;
        for (std::size_t s = 0; s < sweeps.size(); ++s) p[sweeps[s].first] = sweeps[s].second.value(counter[s]);
        out.push_back(p);
        std::size_t s = 0;
        for (; s < sweeps.size(); ++s) {
            if (++counter[s] < sweeps[s].second.count) break;
            counter[s] = 0;
        }
        if (s == sweeps.size()) break;
    }
    return out;
}

Eigen::VectorXd to_phases(const std::vector<double>& phi0) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(phi0.size()));
    for (std::size_t j = 0; j < phi0.size(); ++j) v(static_cast<Eigen::Index>(j)) = units::flux_to_phase(phi0[j]);
    return v;
}

void points_report(Report& report, const RunConfig& cfg, bool rates) {
    Setup s = setup(cfg, false);
    echo_config(report, cfg, &s.net);
    echo_noise(report, s.net, s.drives);
    if (rates) {
        bool any = false;
        for (const auto& d : s.drives) any = any || d.noise.has_value();
        if (!any) throw ValidationError("rates needs flux noise: add 'noise sigma=.. tc=..' to a mesh or pass --sigma and --tc");
    }
    const BasisSpec basis = BasisSpec::automatic(s.h, cfg.charge_cutoff, cfg.oscillator_levels);
    {
        auto& b = report.section("basis");
        for (std::size_t i = 0; i < basis.dofs.size(); ++i) {
            b.add_text("dof." + std::to_string(i), std::holds_alternative<Periodic>(basis.dofs[i]) ? "periodic" : "extended");
        }
        b.add("dimension", static_cast<double>(basis.dimension()), "states");
    }

    auto& table = report.table(rates ? "rates" : "spectrum");
    for (const auto& m : s.net.meshes) table.add_column("phi_e." + m.id, "Phi0");
    if (!rates) {
        for (int k = 0; k < cfg.states; ++k) table.add_column("E" + std::to_string(k), "GHz");
    }
    table.add_column("omega_eg", "GHz");
    for (Eigen::Index i = 0; i < s.h.dofs(); ++i) table.add_column("abs_n_ge." + std::to_string(i), kDimensionless);
    for (const auto& m : s.net.meshes) table.add_column("abs_dH_ge." + m.id, "GHz/rad");
    if (rates) {
        for (std::size_t j = 0; j < s.net.meshes.size(); ++j) {
            if (!s.drives[j].noise) continue;
            const std::string id = s.net.meshes[j].id;
            table.add_column("gamma1." + id, "1/ns");
            table.add_column("domega_dphi." + id, "GHz/rad");
            table.add_column("gamma_phi." + id, "1/ns");
            table.add_column("static_factor." + id, kDimensionless);
        }
        table.add_column("gamma1_total", "1/ns");
        table.add_column("t1", "ns");
    }

    for (const auto& point : flux_points(s.net, cfg)) {
        stage("spectrum.build_numeric");
        NumericModel model = build_numeric(s.h, basis, to_phases(point));
        stage("spectrum.eigensystem");
        Spectrum sp = eigensystem(s.h, model, std::max(2, cfg.states));
        std::vector<double> row(point.begin(), point.end());
        if (!rates) {
            for (int k = 0; k < cfg.states; ++k) row.push_back(units::angular_to_ghz(sp.eigenvalues(k)));
        }
        row.push_back(units::angular_to_ghz(sp.omega_eg));
        for (const auto& n : sp.elements.n_ge) row.push_back(std::abs(n));
        for (const auto& el : sp.elements.dH_dphi_ge) row.push_back(units::angular_to_ghz(std::abs(el)));
        if (rates) {
            double total = 0.0;
            for (std::size_t j = 0; j < s.net.meshes.size(); ++j) {
                if (!s.drives[j].noise) continue;
                const auto& noise = *s.drives[j].noise;
                stage("spectrum.t1_rate");
                const double g1 = t1_rate(sp.elements.dH_dphi_ge[j], noise, sp.omega_eg);
                stage("spectrum.dephasing_envelope");
                DephasingEnvelope env = dephasing_envelope(s.h, model, sp, noise, static_cast<Eigen::Index>(j));
                total += g1;
                row.push_back(g1);
                row.push_back(units::angular_to_ghz(env.domega_dphi));
                row.push_back(env.rate);
                row.push_back(env.static_factor);
            }
            row.push_back(total);
            row.push_back(total > 0.0 ? 1.0 / total : INFINITY);
        }
        table.add_row(row);
    }
}

SimOptions sim_options(const RunConfig& cfg) {
    SimOptions o;
    o.duration = cfg.duration;
    o.dt = cfg.dt.value_or(0.0);
    o.trajectories = cfg.trajectories;
    o.levels = cfg.levels;
    o.base_seed = cfg.seed;
    o.threads = cfg.threads;
    o.record_interval = cfg.record_interval.value_or(0.0);
    o.fit_start = cfg.fit_start.value_or(0.0);
    o.fit_end = cfg.fit_end;
    return o;
}

const NoiseSpec* first_noise(const std::vector<FluxDrive>& drives) {
    for (const auto& d : drives) {
        if (d.noise) return &*d.noise;
    }
    return nullptr;
}

void simulate_report(Report& report, const RunConfig& cfg) {
    Setup s = setup(cfg, false);
    echo_config(report, cfg, &s.net);
    echo_noise(report, s.net, s.drives);
    const NoiseSpec* noise = first_noise(s.drives);
    if (!noise) throw ValidationError("simulate needs flux noise on at least one mesh (netlist or --sigma/--tc)");
    const BasisSpec basis = BasisSpec::automatic(s.h, cfg.charge_cutoff, cfg.oscillator_levels);
    const Eigen::VectorXd phi = to_phases(flux_points(s.net, RunConfig{}).front());

    stage("noisesim.averaged_transition_probability");
    NoiseSimResult r = averaged_transition_probability(s.h, basis, phi, s.drives, sim_options(cfg));

    auto& sim = report.section("simulation");
    sim.add_text("gauge", s.h.gauge.describe());
    sim.add("omega_eg", units::angular_to_ghz(r.omega_eg), "GHz");
    sim.add("dt", r.dt, "ns");
    sim.add("trajectories", r.trajectory_count, "trajectories");
    sim.add("modes", r.modes, "modes");
    sim.add("max_norm_drift", r.max_norm_drift, kDimensionless);
    sim.add("fit_window_start", r.fit.window_start, "ns");
    sim.add("fit_window_end", r.fit.window_end, "ns");

    auto& fit = report.section("fit");
    fit.add("slope", r.fit.slope, "1/ns");
    fit.add("slope_error", r.fit.slope_error, "1/ns");
    fit.add("offset", r.fit.offset, kDimensionless);
    fit.add("offset_error", r.fit.offset_error, kDimensionless);

    if (s.h.dofs() == 1 && s.h.meshes() == 1) {
        stage("noisesim.perturbative_targets");
        Targets t = perturbative_targets(s.h, basis, phi, *noise);
        auto& tg = report.section("targets");
        tg.add("gamma1", t.gamma1, "1/ns");
        tg.add("offset", t.offset, kDimensionless);
        tg.add("eta", t.eta, kDimensionless);
        tg.add("abs_n_ge", t.n_ge, kDimensionless);
        tg.add("sigma_phi", t.sigma_phi, "rad");
        tg.add("offset_cross", t.offset_cross, kDimensionless);
        tg.add("offset_transient", t.offset_transient, kDimensionless);
        tg.add("offset_finite_tc", t.offset + t.offset_cross + t.offset_transient, kDimensionless);
        auto& z = report.section("z_scores");
        z.add("slope", (r.fit.slope - t.gamma1) / r.fit.slope_error, kDimensionless);
        z.add("offset", (r.fit.offset - t.offset) / r.fit.offset_error, kDimensionless);
        z.add("offset_finite_tc", (r.fit.offset - t.offset - t.offset_cross - t.offset_transient) / r.fit.offset_error,
              kDimensionless);
    }

    auto& curve = report.table("curve");
    curve.add_column("t", "ns");
    curve.add_column("avg_prob", kDimensionless);
    curve.add_column("stderr", kDimensionless);
    curve.add_column("avg_transition", kDimensionless);
    for (std::size_t k = 0; k < r.t_grid.size(); ++k) {
        curve.add_row(std::vector<double>{r.t_grid[k], r.avg_prob[k], r.transition_error[k], r.avg_transition[k]});
    }
}

void check_gauge_report(Report& report, const RunConfig& cfg, int& status) {
    stage("netlist.parse_netlist");
    CircuitNetlist net = load_netlist(cfg.netlist_path);
    echo_config(report, cfg, &net);
    stage("netlist.validate");
    require_valid(net);
    if (net.mesh_count() != 1 || net.branch_count() != 2) {
        throw ValidationError("check-gauge needs a single loop of two branches; circuit '" + net.name + "' has " +
                              std::to_string(net.branch_count()) + " branches and " +
                              std::to_string(net.mesh_count()) + " meshes");
    }
    std::vector<FluxDrive> drives = resolve_drives(net, cfg, true);
    echo_noise(report, net, drives);
    const NoiseSpec& noise = *drives.front().noise;
    const Eigen::VectorXd phi = to_phases(flux_points(net, RunConfig{}).front());

    const std::vector<GaugeChoice> gauges{GaugeChoice{}, GaugeChoice{false, {1.0, 0.0}}, GaugeChoice{false, {0.0, -1.0}}};
    std::vector<SymbolicHamiltonian> hs;
    for (const auto& g : gauges) hs.push_back(hamiltonian_for(net, g, cfg.aux_epsilon, cfg.tolerance));
    const BasisSpec basis = BasisSpec::automatic(hs.front(), cfg.charge_cutoff, cfg.oscillator_levels);

    auto& out = report.section("check");
    bool all = true;
    auto verdict = [&](const std::string& key, bool pass) {
        out.add_text(key, pass ? "pass" : "fail");
        all = all && pass;
    };

    // Static spectrum and |n_ge| across gauges.
    stage("spectrum.eigensystem");
    std::vector<Spectrum> spectra;
    for (const auto& h : hs) spectra.push_back(eigensystem(h, build_numeric(h, basis, phi), 4));
    double eig_dev = 0.0, n_dev = 0.0;
    for (std::size_t g = 1; g < spectra.size(); ++g) {
        for (Eigen::Index k = 0; k < 4; ++k) {
            const double ref = spectra[0].eigenvalues(k);
            eig_dev = std::max(eig_dev, std::abs(spectra[g].eigenvalues(k) - ref) / std::max(1.0, std::abs(ref)));
        }
        const double n0 = std::abs(spectra[0].elements.n_ge[0]);
        n_dev = std::max(n_dev, std::abs(std::abs(spectra[g].elements.n_ge[0]) - n0) / n0);
    }
    out.add("eigenvalue_max_rel_deviation", eig_dev, kDimensionless);
    verdict("spectrum_invariance", eig_dev <= 1e-9);
    out.add("n_ge_max_rel_deviation", n_dev, kDimensionless);
    verdict("n_ge_invariance", n_dev <= 1e-9);

    // Monte Carlo slope and offset per gauge.
    SimOptions so = sim_options(cfg);
    std::vector<NoiseSimResult> sims;
    std::vector<Targets> targets;
    for (std::size_t g = 0; g < hs.size(); ++g) {
        stage("noisesim.averaged_transition_probability");
        sims.push_back(averaged_transition_probability(hs[g], basis, phi, drives, so));
        stage("noisesim.perturbative_targets");
        targets.push_back(perturbative_targets(hs[g], basis, phi, noise));
    }
    const double gamma1 = targets.front().gamma1;
    out.add("gamma1_golden_rule", gamma1, "1/ns");
    bool slope_ok = true, slope_gr_ok = true;
    for (std::size_t g = 0; g < hs.size(); ++g) {
        const std::string name = "gauge." + gauges[g].describe();
        const auto& f = sims[g].fit;
        out.add(name + ".slope", f.slope, "1/ns");
        out.add(name + ".slope_error", f.slope_error, "1/ns");
        out.add(name + ".offset", f.offset, kDimensionless);
        out.add(name + ".offset_error", f.offset_error, kDimensionless);
        out.add(name + ".offset_target", targets[g].offset, kDimensionless);
        out.add(name + ".naive_gamma1", t1_rate(spectra[g].elements.dH_dphi_ge[0], noise, spectra[g].omega_eg), "1/ns");
        slope_gr_ok = slope_gr_ok && std::abs(f.slope - gamma1) <= 3.0 * f.slope_error;
        for (std::size_t h = g + 1; h < hs.size(); ++h) {
            const auto& o = sims[h].fit;
            slope_ok = slope_ok && std::abs(f.slope - o.slope) <=
                                       3.0 * std::hypot(f.slope_error, o.slope_error);
        }
        verdict(name + ".offset_law", std::abs(f.offset - targets[g].offset) <= 3.0 * f.offset_error);
    }
    verdict("slope_invariance", slope_ok);
    verdict("slope_vs_golden_rule", slope_gr_ok);
    out.add_text("result", all ? "pass" : "fail");
    if (!all) status = kExitNumerical;
}

}  // namespace

Report build_report(const RunConfig& config, int& status) {
    Report report;
    status = kExitOk;
    switch (config.command) {
        case Command::Quantize: quantize_report(report, config); break;
        case Command::Spectrum: points_report(report, config, false); break;
        case Command::Rates: points_report(report, config, true); break;
        case Command::Simulate: simulate_report(report, config); break;
        case Command::CheckGauge: check_gauge_report(report, config, status); break;
    }
    return report;
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    g_stage = "cli.run";
    try {
        int status = kExitOk;
        Report report = build_report(config, status);
        if (config.output.empty()) {
            report.render(out, config.format);
        } else {
            std::ofstream file(config.output);
            if (!file) throw ValidationError("cannot open output file '" + config.output + "'");
            report.render(file, config.format);
            if (!file) throw ValidationError("failed writing output file '" + config.output + "'");
        }
        return status;
    } catch (const ParseError& e) {
        err << "fluxq: " << g_stage << ": " << config.netlist_path << ": " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "fluxq: " << g_stage << ": " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "fluxq: " << g_stage << ": " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "fluxq: " << g_stage << ": " << e.what() << "\n";
        return kExitNumerical;
    }
}

namespace {

std::optional<double> env_double(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return parse_double(v, name);
}

}  // namespace

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        if (auto v = env_double("FLUXQ_AUX_EPSILON")) cfg.aux_epsilon = *v;
        if (auto v = env_double("FLUXQ_TOLERANCE")) cfg.tolerance = *v;
        if (auto v = env_double("FLUXQ_THREADS")) cfg.threads = static_cast<int>(*v);
    } catch (const ValidationError& e) {
        err << "fluxq: environment: " << e.what() << "\n";
        return kExitValidation;
    }

    CLI::App app{"Quantize superconducting circuits threaded by time-dependent external flux."};
    app.require_subcommand(1);
    std::string gauge = "irrotational";
    std::string format = "kv";
    std::vector<std::string> sweeps;
    std::optional<double> sigma, tc, wmax, dt, fit_start, fit_end, record;

    auto common = [&](CLI::App* sub) {
        sub->add_option("netlist", cfg.netlist_path, "circuit netlist file")->required();
        sub->add_option("--gauge", gauge, "irrotational, or single-loop coefficients such as 1,0");
        sub->add_option("--aux-epsilon", cfg.aux_epsilon, "auxiliary capacitance scale for inductors");
        sub->add_option("--tolerance", cfg.tolerance, "relative tolerance of the irrotational solve");
        sub->add_option("--format", format, "kv or table")->check(CLI::IsMember({"kv", "table"}));
        sub->add_option("-o,--output", cfg.output, "write the report to a file");
    };
    auto numeric = [&](CLI::App* sub) {
        sub->add_option("--cutoff", cfg.charge_cutoff, "charge cutoff n_max of periodic dofs");
        sub->add_option("--osc-levels", cfg.oscillator_levels, "oscillator levels of extended dofs");
    };
    auto noise = [&](CLI::App* sub) {
        sub->add_option("--sigma", sigma, "flux noise standard deviation, Phi0");
        sub->add_option("--tc", tc, "noise correlation time, ns");
        sub->add_option("--band-limit", wmax, "noise band limit, rad/ns");
    };
    auto montecarlo = [&](CLI::App* sub) {
        sub->add_option("--duration", cfg.duration, "simulated time T, ns");
        sub->add_option("--dt", dt, "time step, ns (default: largest allowed)");
        sub->add_option("--trajectories", cfg.trajectories, "number of noise trajectories");
        sub->add_option("--levels", cfg.levels, "retained unperturbed eigenstates");
        sub->add_option("--seed", cfg.seed, "base seed");
        sub->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
        sub->add_option("--fit-start", fit_start, "fit window start, ns (default 20 t_c)");
        sub->add_option("--fit-end", fit_end, "fit window end, ns (default min(T, 0.1/slope))");
        sub->add_option("--record-interval", record, "curve sampling interval, ns (default 2 t_c)");
    };

    auto* quantize = app.add_subcommand("quantize", "print the symbolic Hamiltonian and transform");
    common(quantize);
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and matrix elements over a flux sweep");
    common(spectrum);
    numeric(spectrum);
    spectrum->add_option("--states", cfg.states, "eigenvalues to report");
    spectrum->add_option("--flux-sweep", sweeps, "[mesh=]start:stop:count in Phi0 (repeatable)");
    auto* rates = app.add_subcommand("rates", "golden-rule T1 and dephasing rates over a flux sweep");
    common(rates);
    numeric(rates);
    noise(rates);
    rates->add_option("--flux-sweep", sweeps, "[mesh=]start:stop:count in Phi0 (repeatable)");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo noise-averaged transition probability");
    common(simulate);
    numeric(simulate);
    noise(simulate);
    montecarlo(simulate);
    auto* check = app.add_subcommand("check-gauge", "gauge-consistency suite on a two-branch loop");
    common(check);
    numeric(check);
    noise(check);
    montecarlo(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "fluxq: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (*quantize) cfg.command = Command::Quantize;
        if (*spectrum) cfg.command = Command::Spectrum;
        if (*rates) cfg.command = Command::Rates;
        if (*simulate) cfg.command = Command::Simulate;
        if (*check) cfg.command = Command::CheckGauge;
        cfg.gauge = GaugeChoice::parse(gauge);
        cfg.format = format == "table" ? ReportFormat::Table : ReportFormat::KeyValue;
        for (const auto& s : sweeps) cfg.sweeps.push_back(FluxSweep::parse(s));
        cfg.sigma = sigma;
        cfg.tc = tc;
        cfg.band_limit = wmax;
        cfg.dt = dt;
        cfg.fit_start = fit_start;
        cfg.fit_end = fit_end;
        cfg.record_interval = record;
        if (!(cfg.aux_epsilon > 0.0)) throw ValidationError("--aux-epsilon must be positive");
        if (!(cfg.tolerance > 0.0)) throw ValidationError("--tolerance must be positive");
        if (cfg.states < 2) throw ValidationError("--states must be at least 2");
        if (cfg.levels < 2) throw ValidationError("--levels must be at least 2");
        if (cfg.trajectories < 100) throw ValidationError("--trajectories must be at least 100");
        if (!(cfg.duration > 0.0)) throw ValidationError("--duration must be positive");
        if (cfg.threads < 0) throw ValidationError("--threads must be non-negative");
    } catch (const ValidationError& e) {
        err << "fluxq: flags: " << e.what() << "\n";
        return kExitValidation;
    }
    return run(cfg, out, err);
}

}  // namespace fluxq::cli
