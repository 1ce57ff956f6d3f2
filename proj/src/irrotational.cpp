#include "fluxq/irrotational.hpp"

#include "fluxq/errors.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace fluxq {

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void require_shapes(const CapacitanceMatrix& c, const MeshMatrix& r) {
    if (c.values.rows() != c.values.cols() || r.branches() != c.size()) {
        throw ValidationError("capacitance matrix and mesh matrix disagree on the branch count");
    }
    if (r.meshes() < 1 || r.meshes() >= r.branches()) {
        throw ValidationError("need 1 <= F < N meshes for N branches");
    }
}

// Indices of the first rows (in order) that together have full column rank.
std::vector<Eigen::Index> pick_reference_rows(const Eigen::MatrixXd& t) {
    std::vector<Eigen::Index> picked;
    Eigen::MatrixXd basis(0, t.cols());
    const double scale = std::max(max_abs(t), 1.0);
    for (Eigen::Index i = 0; i < t.rows() && static_cast<Eigen::Index>(picked.size()) < t.cols(); ++i) {
        Eigen::RowVectorXd v = t.row(i);
        for (Eigen::Index k = 0; k < basis.rows(); ++k) v -= v.dot(basis.row(k)) * basis.row(k);
        if (v.norm() > 1e-8 * scale) {
            basis.conservativeResize(basis.rows() + 1, Eigen::NoChange);
            basis.row(basis.rows() - 1) = v / v.norm();
            picked.push_back(i);
        }
    }
    return picked;
}

}  // namespace

bool IrrotationalTransform::irrotational(double tol) const { return max_abs(eta_bar) <= tol; }

Eigen::MatrixXd single_loop_mbar(const CapacitanceMatrix& c, const MeshMatrix& r) {
    require_shapes(c, r);
    if (r.meshes() != 1) throw ValidationError("single_loop_mbar needs exactly one mesh");
    const Eigen::Index n = c.size();
    Eigen::VectorXd inv = c.values.diagonal().cwiseInverse();
    const double total = inv.sum();
    Eigen::MatrixXd out(n - 1, n);
    for (Eigen::Index i = 0; i < n - 1; ++i) {
        const double w = inv(i) / total;
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = (i == j ? 1.0 : 0.0) - r.values(0, i) * r.values(0, j) * w;
        }
    }
    return out;
}

Eigen::MatrixXd irrotational_basis(const CapacitanceMatrix& c, const MeshMatrix& r, const BasisOptions& options) {
    require_shapes(c, r);
    const Eigen::Index n = r.branches();
    const Eigen::Index f = r.meshes();

    Eigen::MatrixXd rc = r.values * c.inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rc, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(f - 1) <= options.tolerance * sv(0)) {
        std::ostringstream msg;
        msg << "circuit '" << options.circuit_name << "' is numerically ill-conditioned: R C^-1 has singular value "
            << sv(f - 1) << " against largest " << sv(0);
        throw NumericalError(msg.str());
    }
    Eigen::MatrixXd m = svd.matrixV().rightCols(n - f).transpose();

    if (options.rescale) {
        AugmentedInverse aug = augment_and_invert(m, r, options.tolerance);
        Eigen::MatrixXd t = aug.M_plus_inv.leftCols(n - f);
        auto refs = pick_reference_rows(t);
        Eigen::MatrixXd a(n - f, n - f);
        for (Eigen::Index k = 0; k < n - f; ++k) a.row(k) = t.row(refs[static_cast<std::size_t>(k)]);
        m = a * m;
    }
    if (options.mixing) {
        const auto& a = *options.mixing;
        if (a.rows() != n - f || a.cols() != n - f) throw ValidationError("mixing matrix must be (N-F) x (N-F)");
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (!lu.isInvertible()) throw ValidationError("mixing matrix is singular");
        m = a * m;
    }

    const double residual = max_abs(rc * m.transpose());
    if (residual > options.tolerance * max_abs(rc) * std::max(1.0, max_abs(m))) {
        std::ostringstream msg;
        msg << "circuit '" << options.circuit_name << "': irrotational residual " << residual << " exceeds tolerance";
        throw NumericalError(msg.str());
    }
    return m;
}

AugmentedInverse augment_and_invert(const Eigen::MatrixXd& m, const MeshMatrix& r, double tolerance) {
    const Eigen::Index n = r.branches();
    const Eigen::Index f = r.meshes();
    if (m.rows() != n - f || m.cols() != n) throw ValidationError("M must be (N-F) x N");

    AugmentedInverse out;
    out.M_plus.resize(n, n);
    out.M_plus.topRows(n - f) = m;
    out.M_plus.bottomRows(f) = r.values;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(out.M_plus);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) {
        throw NumericalError("augmented matrix [M; R] is singular: rows of M are not independent of R");
    }
    out.M_plus_inv = lu.inverse();
    const double residual =
        max_abs(out.M_plus * out.M_plus_inv - Eigen::MatrixXd::Identity(n, n));
    // Residual of an inverse scales with the condition number; 1e-12 holds
    // for every well-posed circuit and flags near-singular choices of M.
    if (residual > std::max(tolerance, 1e-12)) {
        std::ostringstream msg;
        msg << "augmented matrix [M; R] is ill-conditioned (inverse residual " << residual << ")";
        throw NumericalError(msg.str());
    }
    return out;
}

Eigen::MatrixXd effective_capacitance(const CapacitanceMatrix& c, const Eigen::MatrixXd& m_plus_inv) {
    if (m_plus_inv.rows() != c.size() || m_plus_inv.cols() != c.size()) {
        throw ValidationError("M_plus_inv does not match the capacitance matrix");
    }
    Eigen::MatrixXd out = m_plus_inv.transpose() * c.values * m_plus_inv;
    return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd drive_coupling(const CapacitanceMatrix& c, const Eigen::MatrixXd& m_plus_inv, Eigen::Index meshes) {
    Eigen::MatrixXd ceff = effective_capacitance(c, m_plus_inv);
    const Eigen::Index d = ceff.rows() - meshes;
    Eigen::MatrixXd a = ceff.topLeftCorner(d, d);
    Eigen::MatrixXd b = ceff.topRightCorner(d, meshes);
    return -a.llt().solve(b);
}

IrrotationalTransform make_transform(const CapacitanceMatrix& c, const MeshMatrix& r, const Eigen::MatrixXd& m,
                                     double tolerance) {
    require_shapes(c, r);
    IrrotationalTransform out;
    out.M = m;
    auto aug = augment_and_invert(m, r, tolerance);
    out.M_plus = std::move(aug.M_plus);
    out.M_plus_inv = std::move(aug.M_plus_inv);
    out.C_eff = effective_capacitance(c, out.M_plus_inv);
    out.flux_weights = out.M_plus_inv.rightCols(r.meshes());
    out.eta_bar = drive_coupling(c, out.M_plus_inv, r.meshes());
    return out;
}

IrrotationalTransform irrotational_transform(const CapacitanceMatrix& c, const MeshMatrix& r,
                                             const BasisOptions& options) {
    return make_transform(c, r, irrotational_basis(c, r, options), options.tolerance);
}

Eigen::MatrixXd flux_allocation(const CapacitanceMatrix& c, const MeshMatrix& r) {
    require_shapes(c, r);
    Eigen::MatrixXd cr = c.inverse() * r.values.transpose();
    Eigen::MatrixXd g = r.values * cr;
    return cr * g.inverse();
}

Eigen::MatrixXd single_loop_gauge(const MeshMatrix& r, const std::vector<double>& m) {
    if (r.meshes() != 1 || static_cast<Eigen::Index>(m.size()) != r.branches()) {
        throw ValidationError("a single-loop gauge needs one mesh and one coefficient per branch");
    }
    Eigen::MatrixXd out(1, r.branches());
    for (Eigen::Index j = 0; j < r.branches(); ++j) out(0, j) = m[static_cast<std::size_t>(j)] * r.values(0, j);
    return out;
}

}  // namespace fluxq
