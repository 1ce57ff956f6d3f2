#include "fluxq/spectrum.hpp"

#include "fluxq/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace fluxq {

namespace {

constexpr double kSnapTol = 1e-9;

double snap(double x) {
    const double r = std::round(x);
    return std::abs(x - r) <= kSnapTol ? r : x;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
    return out;
}

// Per-dof operators in the local basis.
struct LocalDof {
    bool periodic = true;
    int cutoff = 0;
    Eigen::MatrixXcd number;
    Eigen::MatrixXd phase;          // extended only
    Eigen::MatrixXd phase_vectors;  // eigenvectors of `phase`
    Eigen::VectorXd phase_values;
    double phi_zpf = 0.0;

    Eigen::Index size() const { return number.rows(); }

    Eigen::MatrixXcd exp_i(double c) const {
        const Eigen::Index d = size();
        if (periodic) {
            // e^{i c phi}|n> = |n + c> for integer c.
            const auto shift = static_cast<Eigen::Index>(std::llround(c));
            Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
            for (Eigen::Index j = 0; j < d; ++j) {
                const Eigen::Index i = j + shift;
                if (i >= 0 && i < d) out(i, j) = 1.0;
            }
            return out;
        }
        Eigen::VectorXcd phases(d);
        for (Eigen::Index k = 0; k < d; ++k) phases(k) = std::polar(1.0, c * phase_values(k));
        Eigen::MatrixXcd v = phase_vectors.cast<cplx>();
        return v * phases.asDiagonal() * v.transpose();
    }
};

LocalDof periodic_dof(int cutoff) {
    LocalDof dof;
    dof.periodic = true;
    dof.cutoff = cutoff;
    const Eigen::Index d = 2 * cutoff + 1;
    dof.number = Eigen::MatrixXcd::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) dof.number(j, j) = static_cast<double>(j - cutoff);
    return dof;
}

LocalDof extended_dof(int levels, double ec, double el) {
    LocalDof dof;
    dof.periodic = false;
    const Eigen::Index d = levels;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    dof.phi_zpf = std::pow(2.0 * ec / el, 0.25);
    const double n_zpf = std::pow(el / (32.0 * ec), 0.25);
    dof.phase = dof.phi_zpf * (a + a.transpose());
    Eigen::MatrixXd at_minus_a = a.transpose() - a;
    dof.number = cplx(0.0, n_zpf) * at_minus_a.cast<cplx>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dof.phase);
    dof.phase_values = es.eigenvalues();
    dof.phase_vectors = es.eigenvectors();
    return dof;
}

Eigen::MatrixXcd embed(const std::vector<LocalDof>& dofs, std::size_t which, const Eigen::MatrixXcd& local) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (std::size_t k = 0; k < dofs.size(); ++k) {
        out = kron(out, k == which ? local : Eigen::MatrixXcd::Identity(dofs[k].size(), dofs[k].size()));
    }
    return out;
}

bool touches_quadratic(const SymbolicHamiltonian& h, Eigen::Index dof) {
    for (const auto& t : h.terms) {
        if (t.kind == TermKind::Quadratic && snap(t.dof_coeffs(dof)) != 0.0) return true;
    }
    return false;
}

double omega_eg_at(const SymbolicHamiltonian& h, const BasisSpec& basis, Eigen::VectorXd phi_e) {
    NumericModel m = build_numeric(h, basis, phi_e);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.hamiltonian, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(1) - es.eigenvalues()(0);
}

}  // namespace

BasisSpec BasisSpec::automatic(const SymbolicHamiltonian& h, int charge_cutoff, int oscillator_levels) {
    BasisSpec spec;
    for (Eigen::Index i = 0; i < h.dofs(); ++i) {
        if (touches_quadratic(h, i)) {
            spec.dofs.emplace_back(Extended{oscillator_levels});
        } else {
            spec.dofs.emplace_back(Periodic{charge_cutoff});
        }
    }
    return spec;
}

Eigen::Index BasisSpec::dimension() const {
    Eigen::Index d = 1;
    for (const auto& b : dofs) {
        if (const auto* p = std::get_if<Periodic>(&b)) {
            d *= 2 * p->charge_cutoff + 1;
        } else {
            d *= std::get<Extended>(b).oscillator_levels;
        }
    }
    return d;
}

void BasisSpec::validate(Eigen::Index n_dofs) const {
    if (static_cast<Eigen::Index>(dofs.size()) != n_dofs) {
        throw ValidationError("basis covers " + std::to_string(dofs.size()) + " dofs, Hamiltonian has " +
                              std::to_string(n_dofs));
    }
    for (const auto& b : dofs) {
        if (const auto* p = std::get_if<Periodic>(&b)) {
            if (p->charge_cutoff < kMinChargeCutoff) {
                throw ValidationError("charge cutoff must be at least " + std::to_string(kMinChargeCutoff));
            }
        } else if (std::get<Extended>(b).oscillator_levels < kMinOscillatorLevels) {
            throw ValidationError("oscillator levels must be at least " + std::to_string(kMinOscillatorLevels));
        }
    }
}

NumericModel build_numeric(const SymbolicHamiltonian& h, const BasisSpec& basis, const Eigen::VectorXd& phi_e) {
    const Eigen::Index nd = h.dofs();
    if (nd < 1 || nd > 2) {
        throw ValidationError("numerical diagonalization supports 1 or 2 degrees of freedom, got " + std::to_string(nd));
    }
    if (phi_e.size() != h.meshes()) throw ValidationError("need one static flux per mesh");
    basis.validate(nd);

    std::vector<LocalDof> dofs;
    for (Eigen::Index i = 0; i < nd; ++i) {
        const auto& b = basis.dofs[static_cast<std::size_t>(i)];
        if (const auto* p = std::get_if<Periodic>(&b)) {
            for (const auto& t : h.terms) {
                const double c = snap(t.dof_coeffs(i));
                if (t.kind == TermKind::Quadratic && c != 0.0) {
                    throw ValidationError("dof " + std::to_string(i) + " appears in the quadratic term of '" + t.branch +
                                          "' and cannot use a periodic basis");
                }
                if (c != std::round(c)) {
                    std::ostringstream msg;
                    msg << "cosine term '" << t.branch << "' has non-integer coefficient " << t.dof_coeffs(i)
                        << " on periodic dof " << i << " (gauge with m_Delta != 1?)";
                    throw ValidationError(msg.str());
                }
            }
            dofs.push_back(periodic_dof(p->charge_cutoff));
        } else {
            double el = 0.0;
            for (const auto& t : h.terms) {
                if (t.kind == TermKind::Quadratic) el += t.energy * t.dof_coeffs(i) * t.dof_coeffs(i);
            }
            const double ec = h.charging(i, i) / 4.0;
            if (!(el > 0.0) || !(ec > 0.0)) {
                throw ValidationError("extended dof " + std::to_string(i) + " needs a quadratic term and a charging energy");
            }
            dofs.push_back(extended_dof(std::get<Extended>(b).oscillator_levels, ec, el));
        }
    }

    NumericModel model;
    model.basis = basis;
    model.phi_e = phi_e;
    for (const auto& d : dofs) {
        model.dims.push_back(d.size());
        model.phi_zpf.push_back(d.phi_zpf);
    }
    const Eigen::Index dim = basis.dimension();

    for (std::size_t i = 0; i < dofs.size(); ++i) model.number.push_back(embed(dofs, i, dofs[i].number));

    Eigen::MatrixXcd ham = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < nd; ++i) {
        for (Eigen::Index j = 0; j < nd; ++j) {
            if (h.charging(i, j) != 0.0) ham += h.charging(i, j) * model.number[i] * model.number[j];
        }
    }

    for (const auto& t : h.terms) {
        const double static_part = t.flux_weights.dot(phi_e);
        if (t.kind == TermKind::Cosine) {
            Eigen::MatrixXcd e = Eigen::MatrixXcd::Identity(1, 1) * std::polar(1.0, static_part);
            for (std::size_t k = 0; k < dofs.size(); ++k) {
                const double c = snap(t.dof_coeffs(static_cast<Eigen::Index>(k)));
                const Eigen::Index dk = dofs[k].size();
                e = kron(e, c == 0.0 ? Eigen::MatrixXcd::Identity(dk, dk) : dofs[k].exp_i(c));
            }
            Eigen::MatrixXcd cos_op = 0.5 * (e + e.adjoint());
            Eigen::MatrixXcd sin_op = cplx(0.0, -0.5) * (e - e.adjoint());
            ham -= t.energy * cos_op;
            model.cos_arg.push_back(std::move(cos_op));
            model.sin_arg.push_back(std::move(sin_op));
            model.arg.emplace_back();
        } else {
            Eigen::MatrixXcd a = static_part * Eigen::MatrixXcd::Identity(dim, dim);
            for (std::size_t k = 0; k < dofs.size(); ++k) {
                const double c = snap(t.dof_coeffs(static_cast<Eigen::Index>(k)));
                if (c != 0.0) a += c * embed(dofs, k, dofs[k].phase.cast<cplx>());
            }
            ham += 0.5 * t.energy * a * a;
            model.cos_arg.emplace_back();
            model.sin_arg.emplace_back();
            model.arg.push_back(std::move(a));
        }
    }
    model.hamiltonian = 0.5 * (ham + ham.adjoint());
    return model;
}

Eigen::MatrixXcd flux_derivative_operator(const SymbolicHamiltonian& h, const NumericModel& model, Eigen::Index mesh) {
    if (mesh < 0 || mesh >= h.meshes()) throw ValidationError("mesh index " + std::to_string(mesh) + " out of range");
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(model.dimension(), model.dimension());
    for (std::size_t k = 0; k < h.terms.size(); ++k) {
        const auto& t = h.terms[k];
        const double w = t.flux_weights(mesh);
        if (w == 0.0) continue;
        if (t.kind == TermKind::Cosine) {
            out += t.energy * w * model.sin_arg[k];
        } else {
            out += t.energy * w * model.arg[k];
        }
    }
    return out;
}

Spectrum eigensystem(const Eigen::MatrixXcd& matrix, Eigen::Index k) {
    if (matrix.rows() != matrix.cols()) throw ValidationError("eigensystem needs a square matrix");
    if (k < 1 || k > matrix.rows()) {
        throw ValidationError("requested " + std::to_string(k) + " eigenpairs from a matrix of dimension " +
                              std::to_string(matrix.rows()));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix);
    if (es.info() != Eigen::Success) throw NumericalError("eigensystem: diagonalization did not converge");
    Spectrum s;
    s.eigenvalues = es.eigenvalues().head(k);
    s.eigenvectors = es.eigenvectors().leftCols(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index imax = 0;
        s.eigenvectors.col(j).cwiseAbs().maxCoeff(&imax);
        const cplx p = s.eigenvectors(imax, j);
        s.eigenvectors.col(j) *= std::abs(p) / p;
    }
    if (k > 1) s.omega_eg = s.eigenvalues(1) - s.eigenvalues(0);
    return s;
}

Spectrum eigensystem(const SymbolicHamiltonian& h, const NumericModel& model, Eigen::Index k) {
    Spectrum s = eigensystem(model.hamiltonian, k);
    if (k < 2) return s;
    const auto g = s.eigenvectors.col(0);
    const auto e = s.eigenvectors.col(1);
    for (Eigen::Index m = 0; m < h.meshes(); ++m) {
        s.elements.dH_dphi_ge.push_back(g.dot(flux_derivative_operator(h, model, m) * e));
    }
    for (const auto& n : model.number) {
        s.elements.n_ge.push_back(g.dot(n * e));
        s.elements.n_gg.push_back(g.dot(n * g));
        s.elements.n_ee.push_back(e.dot(n * e));
    }
    return s;
}

cplx flux_derivative_element(const SymbolicHamiltonian& h, const NumericModel& model, const Spectrum& spectrum,
                             Eigen::Index mesh) {
    if (spectrum.eigenvectors.cols() < 2) throw ValidationError("spectrum needs at least two states");
    Eigen::MatrixXcd op = flux_derivative_operator(h, model, mesh);
    return spectrum.eigenvectors.col(0).dot(op * spectrum.eigenvectors.col(1));
}

double flux_noise_spectrum(const NoiseSpec& noise, double omega) {
    const double s = noise.sigma_phase();
    const double tc = noise.correlation_time_ns;
    return 2.0 * s * s * tc / (1.0 + omega * omega * tc * tc);
}

double t1_rate(cplx element, const NoiseSpec& noise, double omega_eg) {
    return std::norm(element) * flux_noise_spectrum(noise, omega_eg);
}

double DephasingEnvelope::operator()(double t) const { return static_factor * std::exp(-rate * t); }

std::vector<double> DephasingEnvelope::sample(const std::vector<double>& t) const {
    std::vector<double> out;
    out.reserve(t.size());
    for (double x : t) out.push_back((*this)(x));
    return out;
}

DephasingEnvelope dephasing_envelope(const SymbolicHamiltonian& h, const NumericModel& model,
                                     const Spectrum& spectrum, const NoiseSpec& noise, Eigen::Index mesh) {
    if (mesh < 0 || mesh >= h.meshes()) throw ValidationError("mesh index " + std::to_string(mesh) + " out of range");
    if (spectrum.elements.n_gg.empty()) throw ValidationError("spectrum lacks matrix elements");

    auto central = [&](double step) {
        Eigen::VectorXd plus = model.phi_e, minus = model.phi_e;
        plus(mesh) += step;
        minus(mesh) -= step;
        return (omega_eg_at(h, model.basis, plus) - omega_eg_at(h, model.basis, minus)) / (2.0 * step);
    };
    const double d1 = central(kFluxDifferenceStep);
    const double d2 = central(0.5 * kFluxDifferenceStep);

    DephasingEnvelope env;
    env.domega_dphi = d1;
    env.richardson_estimate = (4.0 * d2 - d1) / 3.0;
    // Eigenvalue rounding (eps * |H|) divided by the step sets the noise floor.
    const double rounding = 100.0 * std::numeric_limits<double>::epsilon() *
                            model.hamiltonian.cwiseAbs().rowwise().sum().maxCoeff() / kFluxDifferenceStep;
    const double allowed = 1e-5 * std::abs(env.richardson_estimate) + 1e-7 * spectrum.omega_eg + rounding;
    if (std::abs(d1 - env.richardson_estimate) > allowed) {
        std::ostringstream msg;
        msg << "dephasing_envelope: finite difference " << d1 << " disagrees with Richardson estimate "
            << env.richardson_estimate;
        throw NumericalError(msg.str());
    }
    env.rate = 0.5 * d1 * d1 * flux_noise_spectrum(noise, 0.0);

    double shift = 0.0;
    for (Eigen::Index i = 0; i < h.dofs(); ++i) {
        const double dn = std::real(spectrum.elements.n_gg[i] - spectrum.elements.n_ee[i]);
        shift += h.drive_coupling(i, mesh) * dn;
        if (i == 0) env.delta_n = dn;
    }
    const double s = noise.sigma_phase();
    env.static_factor = std::exp(-shift * shift * s * s);
    return env;
}

}  // namespace fluxq
