#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

using namespace tracefem;
using tracefem::testing::discretize;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

}  // namespace

TEST_CASE("edge-midpoint rule is exact for quadratics") {
    Segment seg;
    seg.x = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    seg.area = 0.5;
    const QuadratureRule q = quadrature_rule(seg);
    double ixx = 0.0, ixy = 0.0, i1 = 0.0;
    for (int k = 0; k < 3; ++k) {
        ixx += q.weights[k] * q.points[k][0] * q.points[k][0];
        ixy += q.weights[k] * q.points[k][0] * q.points[k][1];
        i1 += q.weights[k];
    }
    CHECK(i1 == doctest::Approx(0.5));
    CHECK(ixx == doctest::Approx(1.0 / 12.0));
    CHECK(ixy == doctest::Approx(1.0 / 24.0));
}

TEST_CASE("stabilization parameter branches") {
    StabilizationConfig cfg;
    // Pe = 0.1 * 1 / 2e-6 > 1: convection dominated.
    CHECK(stabilization_parameter(0.1, 1e-6, 0.0, 1.0, cfg) == doctest::Approx(0.05));
    // Pe = 0.1 * 1 / 2 < 1: diffusion dominated.
    CHECK(stabilization_parameter(0.1, 1.0, 0.0, 1.0, cfg) == doctest::Approx(0.125 * 0.01));
    // Pe exactly 1 takes the diffusion branch.
    CHECK(stabilization_parameter(0.2, 0.1, 0.0, 1.0, cfg) == doctest::Approx(0.125 * 0.04 / 0.1));
    // Capped by 1 / c.
    CHECK(stabilization_parameter(0.1, 1e-6, 40.0, 1.0, cfg) == doctest::Approx(1.0 / 40.0));
    CHECK(stabilization_parameter(0.1, 1e-6, 0.0, 0.0, cfg) == 0.0);
    cfg.enabled = false;
    CHECK(stabilization_parameter(0.1, 1e-6, 0.0, 1.0, cfg) == 0.0);
}

TEST_CASE("trace space basics on the sphere") {
    const Sphere s;
    const auto d = discretize(s, 4.0 / 3.0, 10);
    CHECK(d.space.size() == 448);
    CHECK(d.space.segments.size() == d.surface_mesh->segments.size());
    for (const auto& b : d.space.segments) {
        for (int q = 0; q < 3; ++q) {
            double sum = 0.0;
            for (int i = 0; i < 4; ++i) sum += b.values[q][i];
            REQUIRE(sum == doctest::Approx(1.0));
        }
        Vec3 gsum = Vec3::Zero();
        for (int i = 0; i < 4; ++i) gsum += b.grad[i];
        CHECK(gsum.norm() < 1e-10);
    }
    const Eigen::VectorXd one = interpolate_extension(d.space, s, [](const Vec3&) { return 1.0; });
    CHECK((one.array() == 1.0).all());
    CHECK_THROWS((void)build_trace_space(d.mesh, std::make_shared<SurfaceMesh>()));
}

TEST_CASE("form blocks satisfy their algebraic identities") {
    const Problem p = builtin_problem(1);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 10);
    const ProblemSamples samples = sample_problem(d.space, *p.surface, p.data);
    const auto delta = stabilization_parameters(d.space, samples, p.data.epsilon, p.data.c, StabilizationConfig{});
    const FormBlocks skew = assemble_blocks(d.space, samples, delta, ConvectionForm::Skew);
    const FormBlocks cons = assemble_blocks(d.space, samples, delta, ConvectionForm::Conservative);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.space.size());

    const Eigen::MatrixXd k = dense(skew.stiffness);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((k * ones).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::MatrixXd c = dense(skew.convection);
    CHECK((c + c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ones.dot(skew.mass * ones) == doctest::Approx(d.surface_mesh->total_area).epsilon(1e-12));
    // Conservative form: constant test function annihilates convection and SUPG terms.
    CHECK((ones.transpose() * cons.convection).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ones.transpose() * cons.supg_mass).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ones.transpose() * cons.streamline).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd sd = dense(skew.streamline);
    CHECK((sd - sd.transpose()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("unstabilized diffusion-only operator is the Laplace-Beltrami stiffness") {
    Problem p = builtin_problem(2);
    p.data.velocity = [](const Vec3&) { return Vec3::Zero(); };
    StabilizationConfig cfg;
    cfg.enabled = false;
    const auto d = discretize(*p.surface, 4.0 / 3.0, 10);
    const StationaryAssembly a = assemble_stationary(d.space, *p.surface, p.data, cfg);
    const Eigen::MatrixXd m = dense(a.system.matrix);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-18);
    CHECK((m * Eigen::VectorXd::Ones(d.space.size())).cwiseAbs().maxCoeff() < 1e-10 * p.data.epsilon);
    REQUIRE(a.system.constraint.has_value());
    CHECK(a.system.constraint->sum() == doctest::Approx(d.surface_mesh->total_area));
    for (double v : a.delta) CHECK(v == 0.0);
}

TEST_CASE("stationary assembly with reaction has no constraint") {
    const Problem p = builtin_problem(1);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 10);
    const StationaryAssembly a = assemble_stationary(d.space, *p.surface, p.data, StabilizationConfig{});
    CHECK_FALSE(a.system.constraint.has_value());
    CHECK(a.system.rhs.size() == d.space.size());
    for (double v : a.delta) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0 / p.data.c);
    }
}

TEST_CASE("transient assembly uses the reaction-free stabilization") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    const TransientSystem t = assemble_transient(d.space, *p.surface, p.data, StabilizationConfig{});
    CHECK(t.mass.rows() == d.space.size());
    CHECK(t.operator_.rows() == d.space.size());
    for (std::size_t k = 0; k < t.delta.size(); ++k) {
        double w_inf = 0.0;
        for (const Vec3& w : t.samples.velocity[k]) w_inf = std::max(w_inf, w.norm());
        CHECK(t.delta[k] == doctest::Approx(0.5 * d.space.segments[k].h / w_inf));
    }
}

TEST_CASE("fields of linear functions are reproduced") {
    const Sphere s;
    const auto d = discretize(s, 4.0 / 3.0, 8);
    const Vec3 a(0.3, -0.2, 0.5);
    Eigen::VectorXd u(d.space.size());
    for (int i = 0; i < d.space.size(); ++i) u[i] = a.dot(d.mesh->vertices[d.space.active_vertices[i]]);
    const auto& seg = d.surface_mesh->segments[5];
    const FieldValue f = evaluate_field(d.space, u, 5, {0.2, 0.3, 0.5});
    const Vec3 x = 0.2 * seg.x[0] + 0.3 * seg.x[1] + 0.5 * seg.x[2];
    CHECK(f.value == doctest::Approx(a.dot(x)));
    const Vec3 tangential = a - seg.normal * seg.normal.dot(a);
    CHECK((f.gradient - tangential).norm() < 1e-12);
    const auto pv = values_at_surface_points(d.space, u);
    for (std::size_t i = 0; i < pv.size(); ++i) CHECK(pv[i] == doctest::Approx(a.dot(d.surface_mesh->points[i])));
}

TEST_CASE("sampling failures name the segment") {
    Problem p = builtin_problem(1);
    p.data.source = [](const Vec3&) -> double { throw std::runtime_error("boom"); };
    const auto d = discretize(*p.surface, 4.0 / 3.0, 6);
    CHECK_THROWS_AS((void)sample_problem(d.space, *p.surface, p.data), AssemblyError);
}

namespace {

TetMesh unit_tet() {
    TetMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
    m.lattice = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.tets = {{0, 1, 2, 3}};
    m.h_max = std::sqrt(2.0);
    return m;
}

}  // namespace

TEST_CASE("single cut tet has four unknowns") {
    auto mesh = std::make_shared<TetMesh>(unit_tet());
    auto sm = std::make_shared<SurfaceMesh>(extract_zero_level(*mesh, {-1, 1, 1, 1}, false));
    const TraceSpace space = build_trace_space(mesh, sm);
    CHECK(space.size() == 4);
}

TEST_CASE("two cut tets sharing a face have five unknowns") {
    // Only the cube corner (1,0,0) is negative: it belongs to exactly two Kuhn tets.
    auto mesh = std::make_shared<TetMesh>(build_box_mesh(Vec3::Zero(), Vec3::Ones(), 1));
    std::vector<double> nodal(mesh->num_vertices(), 1.0);
    int cut_vertex = -1;
    for (std::size_t i = 0; i < nodal.size(); ++i)
        if ((mesh->vertices[i] - Vec3(1, 0, 0)).norm() == 0.0) cut_vertex = static_cast<int>(i);
    REQUIRE(cut_vertex >= 0);
    nodal[cut_vertex] = -1.0;
    auto sm = std::make_shared<SurfaceMesh>(extract_zero_level(*mesh, nodal, false));
    REQUIRE(sm->cut_tets.size() == 2);
    CHECK(build_trace_space(mesh, sm).size() == 5);
}

TEST_CASE("active set invariants") {
    const auto d = discretize(Torus(), 4.0 / 3.0, 14);
    std::vector<char> in_cut(d.mesh->num_vertices(), 0);
    for (int t : d.surface_mesh->cut_tets)
        for (int v : d.mesh->tets[t]) in_cut[v] = 1;
    int count = 0;
    for (std::size_t v = 0; v < in_cut.size(); ++v) {
        CHECK((d.space.dof_of_vertex[v] >= 0) == static_cast<bool>(in_cut[v]));
        if (in_cut[v]) {
            CHECK(d.space.active_vertices[d.space.dof_of_vertex[v]] == static_cast<int>(v));
            ++count;
        }
    }
    CHECK(count == d.space.size());
    for (const auto& b : d.space.segments)
        for (int dof : b.dofs) {
            CHECK(dof >= 0);
            CHECK(dof < d.space.size());
        }
}

TEST_CASE("stabilization parameter reference values") {
    const StabilizationConfig cfg;
    CHECK(stabilization_parameter(0.1, 1e-6, 1.0, 1.0, cfg) == doctest::Approx(0.05));
    CHECK(stabilization_parameter(0.1, 1.0, 0.0, 1.0, cfg) == doctest::Approx(0.00125));
    CHECK(stabilization_parameter(0.1, 1e-6, 100.0, 1.0, cfg) == doctest::Approx(0.01));
}

TEST_CASE("quadrature reference integrals") {
    Segment seg;
    seg.x = {Vec3(0.2, 0.1, 0.3), Vec3(1.1, 0.4, 0.0), Vec3(0.5, 1.3, 0.7)};
    seg.area = 0.5 * (seg.x[1] - seg.x[0]).cross(seg.x[2] - seg.x[0]).norm();
    const QuadratureRule q = quadrature_rule(seg);
    double one = 0.0;
    std::array<double, 3> lambda{};
    for (int k = 0; k < 3; ++k) {
        one += q.weights[k];
        // Barycentric coordinates of a midpoint are (1/2, 1/2, 0) in some order.
        for (int i = 0; i < 3; ++i) {
            const Vec3 opposite = seg.x[(i + 1) % 3] + seg.x[(i + 2) % 3];
            lambda[i] += q.weights[k] * ((2.0 * q.points[k] - opposite).norm() < 1e-14 ? 0.0 : 0.5);
        }
    }
    CHECK(one == doctest::Approx(seg.area));
    for (double l : lambda) CHECK(l == doctest::Approx(seg.area / 3.0));
}

TEST_CASE("transient mass form structure") {
    const Problem p = builtin_problem(3);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 12);
    StabilizationConfig off;
    off.enabled = false;
    const TransientSystem plain = assemble_transient(d.space, *p.surface, p.data, off);
    const Eigen::MatrixXd m = dense(plain.mass);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.space.size());
    CHECK(ones.dot(plain.mass * ones) == doctest::Approx(d.surface_mesh->total_area).epsilon(1e-10));

    const TransientSystem supg = assemble_transient(d.space, *p.surface, p.data, StabilizationConfig{});
    const Eigen::MatrixXd ms = dense(supg.mass);
    CHECK((ms - ms.transpose()).cwiseAbs().maxCoeff() > 1e-8);

    StabilizationConfig cons;
    cons.convection_form = ConvectionForm::Conservative;
    const TransientSystem c = assemble_transient(d.space, *p.surface, p.data, cons);
    CHECK((ones.transpose() * c.operator_).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("field evaluation of constants and one-tet linears") {
    const Sphere s;
    const auto d = discretize(s, 4.0 / 3.0, 8);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(d.space.size(), 3.5);
    const Eigen::VectorXd zero = interpolate_extension(d.space, s, [](const Vec3&) { return 0.0; });
    Eigen::VectorXd lin(d.space.size());
    for (int i = 0; i < d.space.size(); ++i) lin[i] = d.mesh->vertices[d.space.active_vertices[i]][0];
    std::map<int, Vec3> per_tet;
    for (std::size_t k = 0; k < d.space.segments.size(); ++k) {
        const FieldValue f = evaluate_field(d.space, c, k, {1.0 / 3, 1.0 / 3, 1.0 / 3});
        CHECK(f.value == doctest::Approx(3.5));
        CHECK(f.gradient.norm() < 1e-12);
        const auto& seg = d.surface_mesh->segments[k];
        const FieldValue g = evaluate_field(d.space, lin, k, {0.5, 0.25, 0.25});
        const Vec3 expected = Vec3::UnitX() - seg.normal * seg.normal[0];
        CHECK((g.gradient - expected).norm() < 1e-12);
        auto [it, inserted] = per_tet.emplace(seg.parent_tet, g.gradient);
        if (!inserted) CHECK((it->second - g.gradient).norm() < 1e-12);
    }
    CHECK(zero.norm() == 0.0);
}

TEST_CASE("constraint vector sums to the area") {
    const Problem p = builtin_problem(2);
    const auto d = discretize(*p.surface, 4.0 / 3.0, 16);
    const StationaryAssembly a = assemble_stationary(d.space, *p.surface, p.data, StabilizationConfig{});
    REQUIRE(a.system.constraint.has_value());
    CHECK(std::abs(a.system.constraint->sum() - d.surface_mesh->total_area) <= 1e-12 * d.surface_mesh->total_area);
    // No structurally empty rows.
    for (Eigen::Index r = 0; r < a.system.matrix.rows(); ++r) CHECK(a.system.matrix.row(r).nonZeros() > 0);
}
