#include "tracefem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tracefem {

namespace {
constexpr double kPivotShift = 1e-10;
constexpr int kMaxRefinement = 50;
constexpr double kRefinementTarget = 1e-15;
}  // namespace

GuardedSystem condition_guard(const LinearSystem& system) {
    const SparseMatrix& a = system.matrix;
    const Eigen::Index n = a.rows();
    if (a.cols() != n || system.rhs.size() != n) throw std::invalid_argument("condition_guard: dimension mismatch");

    const Eigen::VectorXd diag = a.diagonal().cwiseAbs();
    const double max_diag = n > 0 ? diag.maxCoeff() : 0.0;
    const double floor = 1e-14 * max_diag;

    GuardedSystem g;
    g.scale.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = std::max(diag[i], floor);
        g.scale[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }

    SparseMatrix scaled = g.scale.asDiagonal() * a * g.scale.asDiagonal();
    std::vector<char> pin(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(scaled.coeff(i, i)) < 1e-14) {
            pin[i] = 1;
            g.pinned.push_back(static_cast<int>(i));
        }

    g.system.rhs = g.scale.cwiseProduct(system.rhs);
    if (system.constraint) g.system.constraint = g.scale.cwiseProduct(*system.constraint);
    if (!g.pinned.empty()) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(scaled.nonZeros()));
        for (Eigen::Index r = 0; r < n; ++r) {
            if (pin[r]) {
                trips.emplace_back(r, r, 1.0);
                continue;
            }
            for (SparseMatrix::InnerIterator it(scaled, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
        }
        scaled.setZero();
        scaled.setFromTriplets(trips.begin(), trips.end());
        for (int i : g.pinned) {
            g.system.rhs[i] = 0.0;
            if (g.system.constraint) (*g.system.constraint)[i] = 0.0;
        }
    }
    scaled.makeCompressed();
    g.system.matrix = std::move(scaled);
    return g;
}

DirectSolver::DirectSolver(const LinearSystem& system, double residual_tolerance)
    : matrix_(system.matrix), constraint_(system.constraint), tolerance_(residual_tolerance) {
    GuardedSystem g = condition_guard(system);
    scale_ = std::move(g.scale);
    pinned_ = std::move(g.pinned);
    is_pinned_.assign(static_cast<std::size_t>(matrix_.rows()), 0);
    for (int i : pinned_) is_pinned_[i] = 1;

    const Eigen::Index n = matrix_.rows();
    Eigen::SparseMatrix<double> k;
    if (constraint_) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(g.system.matrix.nonZeros() + 2 * n));
        for (Eigen::Index r = 0; r < n; ++r)
            for (SparseMatrix::InnerIterator it(g.system.matrix, r); it; ++it) trips.emplace_back(r, it.col(), it.value());
        const Eigen::VectorXd& b = *g.system.constraint;
        for (Eigen::Index i = 0; i < n; ++i)
            if (b[i] != 0.0) {
                trips.emplace_back(i, n, b[i]);
                trips.emplace_back(n, i, b[i]);
            }
        k.resize(n + 1, n + 1);
        k.setFromTriplets(trips.begin(), trips.end());
    } else {
        k = g.system.matrix;
    }
    // Trace spaces carry near-kernels (bulk functions vanishing on the discrete surface); a tiny
    // diagonal shift keeps LU pivots away from zero and refinement in solve() removes its effect.
    for (Eigen::Index i = 0; i < n; ++i) k.coeffRef(i, i) += kPivotShift;
    k.makeCompressed();
    lu_.analyzePattern(k);
    lu_.factorize(k);
    if (lu_.info() != Eigen::Success)
        throw SingularSystemError("sparse LU factorization failed: " + lu_.lastErrorMessage());
}

std::pair<Eigen::VectorXd, SolveReport> DirectSolver::solve(const Eigen::VectorXd& rhs) const {
    const Eigen::Index n = matrix_.rows();
    if (rhs.size() != n) throw std::invalid_argument("DirectSolver::solve: rhs size mismatch");

    Eigen::VectorXd scaled_rhs = scale_.cwiseProduct(rhs);
    for (int i : pinned_) scaled_rhs[i] = 0.0;

    Eigen::VectorXd x;
    SolveReport rep;
    rep.n_unknowns = static_cast<int>(n);
    rep.pivots_perturbed = static_cast<int>(pinned_.size());
    rep.constraint_used = constraint_.has_value();

    // Solves the guarded system for an unscaled residual (r, rc); rc is the constraint row.
    auto correction = [&](const Eigen::VectorXd& r, double rc, double& dmult) {
        Eigen::VectorXd sr = scale_.cwiseProduct(r);
        for (int i : pinned_) sr[i] = 0.0;
        if (!constraint_) return Eigen::VectorXd(scale_.cwiseProduct(Eigen::VectorXd(lu_.solve(sr))));
        Eigen::VectorXd full(n + 1);
        full.head(n) = sr;
        full[n] = rc;
        const Eigen::VectorXd y = lu_.solve(full);
        dmult = y[n];
        return Eigen::VectorXd(scale_.cwiseProduct(y.head(n)));
    };
    auto residual = [&](double& rc) {
        Eigen::VectorXd r = rhs - matrix_ * x;
        if (constraint_) {
            r -= rep.multiplier * *constraint_;
            rc = -constraint_->dot(x);
        }
        for (int i : pinned_) r[i] = 0.0;
        return r;
    };

    x = correction(rhs, 0.0, rep.multiplier);
    if (!x.allFinite()) throw SingularSystemError("sparse LU produced non-finite values");

    // Iterative refinement removes the pivot shift; convergence is judged on the scaled residual
    // so that badly scaled rows are resolved as well.
    const double bnorm = rhs.norm();
    const double scaled_bnorm = scale_.cwiseProduct(rhs).norm();
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
        double rc = 0.0;
        const Eigen::VectorXd r = residual(rc);
        const double rnorm = std::sqrt(r.squaredNorm() + rc * rc);
        rep.residual_norm = bnorm > 0.0 ? rnorm / bnorm : rnorm;
        const double scaled = std::sqrt(scale_.cwiseProduct(r).squaredNorm() + rc * rc);
        const double rel = scaled_bnorm > 0.0 ? scaled / scaled_bnorm : scaled;
        if (rel <= kRefinementTarget || it == kMaxRefinement || !(rel < 0.5 * previous)) break;
        previous = rel;
        double dmult = 0.0;
        x += correction(r, rc, dmult);
        rep.multiplier += dmult;
    }
    if (!x.allFinite()) throw SingularSystemError("sparse LU produced non-finite values");
    if (!(rep.residual_norm <= tolerance_)) {
        std::ostringstream msg;
        msg << "relative residual " << std::scientific << std::setprecision(3) << rep.residual_norm
            << " above tolerance " << tolerance_;
        throw SolveError(msg.str());
    }
    return {std::move(x), rep};
}

std::pair<Eigen::VectorXd, SolveReport> solve(const LinearSystem& system) {
    const DirectSolver solver(system);
    return solver.solve(system.rhs);
}

}  // namespace tracefem
