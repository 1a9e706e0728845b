#pragma once

#include "tracefem/solver.hpp"
#include "tracefem/trace_fem.hpp"

#include <memory>
#include <utility>
#include <vector>

namespace tracefem {

/// Crank-Nicolson for M u' + A u = 0 with a fixed step; the factorization of
/// M + dt/2 A is built once.
class CrankNicolson {
public:
    CrankNicolson(const SparseMatrix& mass, const SparseMatrix& op, double dt);

    [[nodiscard]] Eigen::VectorXd step(const Eigen::VectorXd& u) const;
    [[nodiscard]] double dt() const { return dt_; }

private:
    double dt_;
    SparseMatrix explicit_part_;  // M - dt/2 A
    std::unique_ptr<DirectSolver> implicit_;
};

/// One step of (M + dt/2 A) u1 = (M - dt/2 A) u0.
Eigen::VectorXd cn_step(const SparseMatrix& mass, const SparseMatrix& op, const Eigen::VectorXd& u, double dt);

/// M_h = int_{Gamma_h} u_h ds.
double total_mass(const TraceSpace& space, const Eigen::VectorXd& coeffs);

struct Snapshot {
    double t = 0.0;
    Eigen::VectorXd coeffs;
};

struct TransientRun {
    double dt = 0.1;
    double t_end = 0.0;
    std::vector<double> snapshot_times;
    std::vector<std::pair<double, double>> mass_series;  // (t, M_h(t)), t = 0 included
    std::vector<Snapshot> snapshots;
    Eigen::VectorXd final_coeffs;
};

struct TransientOptions {
    double dt = 0.1;
    double t_end = 1.8;
    std::vector<double> snapshot_times;
    bool reuse_factorization = true;
};

TransientRun run_transient(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data,
                           const StabilizationConfig& cfg, const TransientOptions& opts);

}  // namespace tracefem
