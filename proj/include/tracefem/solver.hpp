#pragma once

#include "tracefem/trace_fem.hpp"

#include <Eigen/SparseLU>

#include <utility>

namespace tracefem {

struct SolveReport {
    double residual_norm = 0.0;  // ||A x - b|| / ||b|| (absolute when b = 0)
    int n_unknowns = 0;
    bool constraint_used = false;
    int pivots_perturbed = 0;
    double multiplier = 0.0;  // Lagrange multiplier of the mean-zero row
};

/// Symmetrically scaled system D^{-1/2} A D^{-1/2} with near-empty rows pinned to zero.
struct GuardedSystem {
    LinearSystem system;
    Eigen::VectorXd scale;  // D^{-1/2}
    std::vector<int> pinned;
};

GuardedSystem condition_guard(const LinearSystem& system);

/// Sparse LU factorization (COLAMD ordering, partial pivoting) of a guarded
/// system, optionally augmented by the mean-zero constraint row. Immutable
/// after construction; `solve` may be called repeatedly.
class DirectSolver {
public:
    explicit DirectSolver(const LinearSystem& system, double residual_tolerance = 1e-9);

    /// Solves for a new right-hand side with the factorized matrix.
    [[nodiscard]] std::pair<Eigen::VectorXd, SolveReport> solve(const Eigen::VectorXd& rhs) const;

    [[nodiscard]] int size() const { return static_cast<int>(matrix_.rows()); }

private:
    SparseMatrix matrix_;
    std::optional<Eigen::VectorXd> constraint_;
    Eigen::VectorXd scale_;
    std::vector<int> pinned_;
    std::vector<char> is_pinned_;
    double tolerance_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

std::pair<Eigen::VectorXd, SolveReport> solve(const LinearSystem& system);

}  // namespace tracefem
