#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tracefem/timestepper.hpp"

#include <cmath>

using namespace tracefem;
using tracefem::testing::discretize;

TEST_CASE("scalar Crank-Nicolson amplification factor") {
    SparseMatrix m(1, 1), a(1, 1);
    m.insert(0, 0) = 2.0;
    a.insert(0, 0) = 3.0;
    const double dt = 0.1, lambda = 1.5;
    Eigen::VectorXd u(1);
    u << 1.0;
    const Eigen::VectorXd u1 = cn_step(m, a, u, dt);
    CHECK(u1[0] == doctest::Approx((1.0 - 0.5 * dt * lambda) / (1.0 + 0.5 * dt * lambda)));
    CHECK_THROWS_AS(CrankNicolson(m, a, 0.0), std::invalid_argument);
}

TEST_CASE("reused factorization matches fresh steps") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    const TransientSystem t = assemble_transient(d.space, *p.surface, p.data, StabilizationConfig{});
    const CrankNicolson cn(t.mass, t.operator_, 0.1);
    Eigen::VectorXd a = interpolate_extension(d.space, *p.surface, p.data.initial_condition), b = a;
    for (int k = 0; k < 3; ++k) {
        a = cn.step(a);
        b = cn_step(t.mass, t.operator_, b, 0.1);
    }
    CHECK((a - b).norm() <= 1e-10 * a.norm());
}

TEST_CASE("total mass of the constant one is the area") {
    const auto d = discretize(Torus(), 4.0 / 3.0, 12);
    CHECK(total_mass(d.space, Eigen::VectorXd::Ones(d.space.size())) ==
          doctest::Approx(d.surface_mesh->total_area).epsilon(1e-12));
}

TEST_CASE("conservative convection conserves mass exactly") {
    const Problem p = builtin_problem(3, true);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    StabilizationConfig cfg;
    cfg.convection_form = ConvectionForm::Conservative;
    TransientOptions opts;
    opts.t_end = 1.0;
    const TransientRun run = run_transient(d.space, *p.surface, p.data, cfg, opts);
    const double m0 = run.mass_series.front().second;
    for (const auto& [t, m] : run.mass_series) CHECK(std::abs(m - m0) <= 1e-8 * std::abs(m0));
}

TEST_CASE("transient run bookkeeping") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    TransientOptions opts;
    opts.snapshot_times = {0.0, 0.6, 1.2, 1.8};
    const TransientRun run = run_transient(d.space, *p.surface, p.data, StabilizationConfig{}, opts);
    CHECK(run.mass_series.size() == 19);
    CHECK(run.mass_series.front().first == 0.0);
    CHECK(run.mass_series.back().first == doctest::Approx(1.8));
    REQUIRE(run.snapshots.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(run.snapshots[k].t == doctest::Approx(opts.snapshot_times[k]));
    CHECK(run.final_coeffs.size() == d.space.size());
    CHECK(run.final_coeffs.allFinite());
    // The antisymmetric initial datum has zero mass on the symmetric mesh.
    CHECK(std::abs(run.mass_series.front().second) < 1e-12);
    // The solution stays bounded by the initial range (up to mild overshoot).
    CHECK(run.final_coeffs.cwiseAbs().maxCoeff() <= 1.5 * run.snapshots.front().coeffs.cwiseAbs().maxCoeff());
}

TEST_CASE("invalid transient options") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    TransientOptions opts;
    opts.dt = -1.0;
    CHECK_THROWS((void)run_transient(d.space, *p.surface, p.data, StabilizationConfig{}, opts));
    const Problem stationary = builtin_problem(1);
    CHECK_THROWS((void)run_transient(d.space, *p.surface, stationary.data, StabilizationConfig{}, TransientOptions{}));
}

TEST_CASE("zero operator keeps the state") {
    SparseMatrix m(2, 2), a(2, 2);
    m.insert(0, 0) = 2.0;
    m.insert(1, 1) = 1.0;
    m.insert(0, 1) = 0.5;
    m.makeCompressed();
    a.resize(2, 2);
    const Eigen::Vector2d u(0.3, -1.7);
    CHECK((cn_step(m, a, u, 0.1) - u).norm() < 1e-15);
}

TEST_CASE("identity operators with dt = 2 annihilate the state") {
    SparseMatrix i(3, 3);
    for (int k = 0; k < 3; ++k) i.insert(k, k) = 1.0;
    CHECK(cn_step(i, i, Eigen::Vector3d(1, 2, 3), 2.0).norm() < 1e-15);
}

TEST_CASE("test equation is integrated to second order") {
    SparseMatrix m(1, 1), a(1, 1);
    m.insert(0, 0) = 1.0;
    a.insert(0, 0) = 1.0;
    double prev_err = 0.0;
    for (double dt : {0.1, 0.05}) {
        const CrankNicolson cn(m, a, dt);
        Eigen::VectorXd u = Eigen::VectorXd::Ones(1);
        const int steps = static_cast<int>(std::lround(1.0 / dt));
        for (int k = 0; k < steps; ++k) u = cn.step(u);
        if (dt == 0.1) CHECK(u[0] == doctest::Approx(std::pow(0.95 / 1.05, 10)));
        const double err = std::abs(u[0] - std::exp(-1.0));
        if (prev_err > 0.0) CHECK(std::log2(prev_err / err) == doctest::Approx(2.0).epsilon(0.05));
        prev_err = err;
    }
}

TEST_CASE("initial mass approximates pi^2 at second order") {
    const Problem p = builtin_problem(3, true);
    double prev = 0.0;
    for (int cells : {11, 22}) {
        const auto d = discretize(*p.surface, 1.375, cells);
        const double m0 = total_mass(d.space, interpolate_extension(d.space, *p.surface, p.data.initial_condition));
        const double err = std::abs(m0 - 9.869604401089358);
        if (prev > 0.0) CHECK(prev / err > 2.5);
        prev = err;
    }
    CHECK(prev < 0.2);
}

TEST_CASE("galerkin transport oscillates more than SUPG") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 16);
    TransientOptions opts;
    opts.t_end = 1.0;
    StabilizationConfig off;
    off.enabled = false;
    const TransientRun plain = run_transient(d.space, *p.surface, p.data, off, opts);
    const TransientRun supg = run_transient(d.space, *p.surface, p.data, StabilizationConfig{}, opts);
    auto range = [](const Eigen::VectorXd& v) { return v.maxCoeff() - v.minCoeff(); };
    CHECK(range(plain.final_coeffs) > range(supg.final_coeffs));
}
