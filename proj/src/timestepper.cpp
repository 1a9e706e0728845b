#include "tracefem/timestepper.hpp"

#include <algorithm>
#include <cmath>

namespace tracefem {

namespace {

LinearSystem implicit_system(const SparseMatrix& mass, const SparseMatrix& op, double dt) {
    LinearSystem sys;
    sys.matrix = mass + 0.5 * dt * op;
    sys.matrix.makeCompressed();
    sys.rhs = Eigen::VectorXd::Zero(mass.rows());
    return sys;
}

}  // namespace

CrankNicolson::CrankNicolson(const SparseMatrix& mass, const SparseMatrix& op, double dt) : dt_(dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("CrankNicolson: dt must be positive");
    explicit_part_ = mass - 0.5 * dt * op;
    implicit_ = std::make_unique<DirectSolver>(implicit_system(mass, op, dt));
}

Eigen::VectorXd CrankNicolson::step(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd rhs = explicit_part_ * u;
    return implicit_->solve(rhs).first;
}

Eigen::VectorXd cn_step(const SparseMatrix& mass, const SparseMatrix& op, const Eigen::VectorXd& u, double dt) {
    return CrankNicolson(mass, op, dt).step(u);
}

double total_mass(const TraceSpace& space, const Eigen::VectorXd& coeffs) {
    double m = 0.0;
    for (const auto& seg : space.segments)
        for (int q = 0; q < 3; ++q) {
            double v = 0.0;
            for (int i = 0; i < 4; ++i) v += coeffs[seg.dofs[i]] * seg.values[q][i];
            m += seg.weight * v;
        }
    return m;
}

TransientRun run_transient(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data,
                           const StabilizationConfig& cfg, const TransientOptions& opts) {
    if (!data.initial_condition) throw std::invalid_argument("run_transient: problem has no initial condition");
    if (!(opts.dt > 0.0)) throw std::invalid_argument("run_transient: dt must be positive");
    if (opts.t_end < 0.0) throw std::invalid_argument("run_transient: t_end must be non-negative");

    const TransientSystem sys = assemble_transient(space, surface, data, cfg);

    TransientRun run;
    run.dt = opts.dt;
    run.t_end = opts.t_end;
    run.snapshot_times = opts.snapshot_times;

    const long steps = std::lround(opts.t_end / opts.dt);
    std::vector<long> snapshot_steps;
    for (double ts : opts.snapshot_times) snapshot_steps.push_back(std::clamp(std::lround(ts / opts.dt), 0L, steps));

    Eigen::VectorXd u = interpolate_extension(space, surface, data.initial_condition);
    auto record = [&](long k) {
        const double t = static_cast<double>(k) * opts.dt;
        run.mass_series.emplace_back(t, total_mass(space, u));
        for (long s : snapshot_steps)
            if (s == k) {
                run.snapshots.push_back({t, u});
                break;
            }
    };
    record(0);

    std::unique_ptr<CrankNicolson> cn;
    if (opts.reuse_factorization) cn = std::make_unique<CrankNicolson>(sys.mass, sys.operator_, opts.dt);
    for (long k = 1; k <= steps; ++k) {
        u = cn ? cn->step(u) : cn_step(sys.mass, sys.operator_, u, opts.dt);
        record(k);
    }
    run.final_coeffs = u;
    return run;
}

}  // namespace tracefem
