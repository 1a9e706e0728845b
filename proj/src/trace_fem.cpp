#include "tracefem/trace_fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace tracefem {

namespace {

/// Gradients of the four barycentric coordinates of a tet.
std::array<Vec3, 4> barycentric_gradients(const std::array<Vec3, 4>& x) {
    Mat3 jac;
    for (int i = 0; i < 3; ++i) jac.row(i) = (x[i + 1] - x[0]).transpose();
    const Mat3 inv = jac.inverse();
    std::array<Vec3, 4> g;
    g[1] = inv.col(0);
    g[2] = inv.col(1);
    g[3] = inv.col(2);
    g[0] = -(g[1] + g[2] + g[3]);
    return g;
}

std::array<double, 4> barycentric(const std::array<Vec3, 4>& x, const std::array<Vec3, 4>& grad, const Vec3& p) {
    std::array<double, 4> l{};
    const Vec3 r = p - x[0];
    l[1] = grad[1].dot(r);
    l[2] = grad[2].dot(r);
    l[3] = grad[3].dot(r);
    l[0] = 1.0 - l[1] - l[2] - l[3];
    return l;
}

using Local = Eigen::Matrix4d;

void scatter(std::vector<Eigen::Triplet<double>>& trips, const std::array<int, 4>& dofs, const Local& a) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) trips.emplace_back(dofs[i], dofs[j], a(i, j));
}

SparseMatrix from_triplets(int n, const std::vector<Eigen::Triplet<double>>& trips) {
    SparseMatrix m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

}  // namespace

TraceSpace build_trace_space(std::shared_ptr<const TetMesh> mesh, std::shared_ptr<const SurfaceMesh> sm) {
    if (!mesh || !sm) throw std::invalid_argument("build_trace_space: null mesh");
    if (sm->segments.empty()) throw std::invalid_argument("build_trace_space: empty surface mesh");

    TraceSpace space;
    space.mesh = mesh;
    space.surface_mesh = sm;

    std::vector<char> active(mesh->num_vertices(), 0);
    for (int t : sm->cut_tets)
        for (int v : mesh->tets[t]) active[v] = 1;
    space.dof_of_vertex.assign(mesh->num_vertices(), -1);
    for (std::size_t v = 0; v < active.size(); ++v)
        if (active[v]) {
            space.dof_of_vertex[v] = static_cast<int>(space.active_vertices.size());
            space.active_vertices.push_back(static_cast<int>(v));
        }

    space.segments.reserve(sm->segments.size());
    for (const auto& seg : sm->segments) {
        const auto& tet = mesh->tets[seg.parent_tet];
        std::array<Vec3, 4> xt;
        for (int i = 0; i < 4; ++i) xt[i] = mesh->vertices[tet[i]];
        const auto grad = barycentric_gradients(xt);
        const Mat3 ph = Mat3::Identity() - seg.normal * seg.normal.transpose();

        SegmentBasis b;
        for (int i = 0; i < 4; ++i) {
            b.dofs[i] = space.dof_of_vertex[tet[i]];
            b.grad[i] = ph * grad[i];
        }
        const QuadratureRule rule = quadrature_rule(seg);
        b.points = rule.points;
        b.weight = rule.weights[0];
        for (int q = 0; q < 3; ++q) b.values[q] = barycentric(xt, grad, b.points[q]);
        b.h = mesh->diameter(static_cast<std::size_t>(seg.parent_tet));
        space.segments.push_back(b);
    }
    return space;
}

QuadratureRule quadrature_rule(const Segment& seg) {
    QuadratureRule r;
    r.points = edge_midpoints(seg);
    r.weights.fill(seg.area / 3.0);
    return r;
}

double stabilization_parameter(double h, double eps, double c, double w_inf, const StabilizationConfig& cfg) {
    if (!(eps > 0.0)) throw std::invalid_argument("stabilization_parameter: eps must be positive");
    if (!cfg.enabled || w_inf == 0.0) return 0.0;
    const double peclet = h * w_inf / (2.0 * eps);
    const double tilde = peclet > 1.0 ? cfg.delta0 * h / w_inf : cfg.delta1 * h * h / eps;
    return c > 0.0 ? std::min(tilde, 1.0 / c) : tilde;
}

ProblemSamples sample_problem(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data) {
    ProblemSamples s;
    s.velocity.resize(space.segments.size());
    s.source.resize(space.segments.size());
    for (std::size_t k = 0; k < space.segments.size(); ++k) {
        const auto& seg = space.segments[k];
        try {
            for (int q = 0; q < 3; ++q) {
                const Vec3 p = surface.closest_point(seg.points[q]);
                Vec3 w = data.velocity ? data.velocity(p) : Vec3::Zero();
                if (data.tangential_projection_required) {
                    const Vec3 n = surface.normal(p);
                    w -= n * n.dot(w);
                }
                s.velocity[k][q] = w;
                s.source[k][q] = data.source ? data.source(p) : 0.0;
            }
        } catch (const std::exception& e) {
            throw AssemblyError("segment " + std::to_string(k) + " (parent tet " +
                                std::to_string(space.surface_mesh->segments[k].parent_tet) + "): " + e.what());
        }
    }
    return s;
}

std::vector<double> stabilization_parameters(const TraceSpace& space, const ProblemSamples& samples, double eps,
                                             double c, const StabilizationConfig& cfg) {
    std::vector<double> delta(space.segments.size());
    for (std::size_t k = 0; k < delta.size(); ++k) {
        double w_inf = 0.0;
        for (const Vec3& w : samples.velocity[k]) w_inf = std::max(w_inf, w.norm());
        delta[k] = stabilization_parameter(space.segments[k].h, eps, c, w_inf, cfg);
    }
    return delta;
}

FormBlocks assemble_blocks(const TraceSpace& space, const ProblemSamples& samples, const std::vector<double>& delta,
                           ConvectionForm form) {
    const std::size_t ns = space.segments.size();
    std::vector<Eigen::Triplet<double>> tk, tc, tm, tr, ts;
    for (auto* t : {&tk, &tc, &tm, &tr, &ts}) t->reserve(16 * ns);

    for (std::size_t k = 0; k < ns; ++k) {
        const auto& b = space.segments[k];
        Local stiff = Local::Zero(), conv = Local::Zero(), mass = Local::Zero(), supg = Local::Zero(),
              stream = Local::Zero();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) stiff(i, j) = 3.0 * b.weight * b.grad[j].dot(b.grad[i]);
        for (int q = 0; q < 3; ++q) {
            const Vec3& w = samples.velocity[k][q];
            const auto& phi = b.values[q];
            std::array<double, 4> wg{};
            for (int i = 0; i < 4; ++i) wg[i] = w.dot(b.grad[i]);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    if (form == ConvectionForm::Skew)
                        conv(i, j) += b.weight * 0.5 * (wg[j] * phi[i] - wg[i] * phi[j]);
                    else
                        conv(i, j) -= b.weight * wg[i] * phi[j];
                    mass(i, j) += b.weight * phi[j] * phi[i];
                    supg(i, j) += b.weight * delta[k] * phi[j] * wg[i];
                    stream(i, j) += b.weight * delta[k] * wg[j] * wg[i];
                }
        }
        scatter(tk, b.dofs, stiff);
        scatter(tc, b.dofs, conv);
        scatter(tm, b.dofs, mass);
        scatter(tr, b.dofs, supg);
        scatter(ts, b.dofs, stream);
    }
    const int n = space.size();
    return {from_triplets(n, tk), from_triplets(n, tc), from_triplets(n, tm), from_triplets(n, tr),
            from_triplets(n, ts)};
}

StationaryAssembly assemble_stationary(const TraceSpace& space, const LevelSetSurface& surface,
                                       const ProblemData& data, const StabilizationConfig& cfg) {
    if (!data.source) throw std::invalid_argument("assemble_stationary: problem has no source term");
    if (data.c < 0.0) throw std::invalid_argument("assemble_stationary: reaction coefficient must be >= 0");

    StationaryAssembly out;
    out.samples = sample_problem(space, surface, data);
    out.delta = stabilization_parameters(space, out.samples, data.epsilon, data.c, cfg);
    const FormBlocks f = assemble_blocks(space, out.samples, out.delta, cfg.convection_form);

    LinearSystem& sys = out.system;
    sys.matrix = data.epsilon * f.stiffness + f.convection + f.streamline;
    if (data.c > 0.0) sys.matrix += data.c * (f.mass + f.supg_mass);
    sys.matrix.makeCompressed();

    const int n = space.size();
    sys.rhs = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < space.segments.size(); ++k) {
        const auto& seg = space.segments[k];
        for (int q = 0; q < 3; ++q) {
            const double fq = out.samples.source[k][q];
            const Vec3& w = out.samples.velocity[k][q];
            for (int i = 0; i < 4; ++i) {
                sys.rhs[seg.dofs[i]] += seg.weight * fq * (seg.values[q][i] + out.delta[k] * w.dot(seg.grad[i]));
                b[seg.dofs[i]] += seg.weight * seg.values[q][i];
            }
        }
    }
    if (data.c == 0.0) sys.constraint = std::move(b);
    return out;
}

TransientSystem assemble_transient(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data,
                                   const StabilizationConfig& cfg) {
    TransientSystem out;
    out.samples = sample_problem(space, surface, data);
    out.delta = stabilization_parameters(space, out.samples, data.epsilon, 0.0, cfg);
    const FormBlocks f = assemble_blocks(space, out.samples, out.delta, cfg.convection_form);
    out.mass = f.mass + f.supg_mass;
    out.mass.makeCompressed();
    out.operator_ = data.epsilon * f.stiffness + f.convection + f.streamline;
    out.operator_.makeCompressed();
    return out;
}

FieldValue evaluate_field(const TraceSpace& space, const Eigen::VectorXd& coeffs, std::size_t segment,
                          const std::array<double, 3>& bary) {
    const auto& b = space.segments[segment];
    const auto& seg = space.surface_mesh->segments[segment];
    const Vec3 x = bary[0] * seg.x[0] + bary[1] * seg.x[1] + bary[2] * seg.x[2];

    const auto& tet = space.mesh->tets[seg.parent_tet];
    std::array<Vec3, 4> xt;
    for (int i = 0; i < 4; ++i) xt[i] = space.mesh->vertices[tet[i]];
    const auto grad = barycentric_gradients(xt);
    const auto lambda = barycentric(xt, grad, x);

    FieldValue v;
    for (int i = 0; i < 4; ++i) {
        const double ci = coeffs[b.dofs[i]];
        v.value += ci * lambda[i];
        v.gradient += ci * b.grad[i];
    }
    return v;
}

Eigen::VectorXd interpolate_extension(const TraceSpace& space, const LevelSetSurface& surface,
                                      const std::function<double(const Vec3&)>& g) {
    Eigen::VectorXd u(space.size());
    for (int i = 0; i < space.size(); ++i)
        u[i] = extend_scalar(surface, g, space.mesh->vertices[space.active_vertices[i]]);
    return u;
}

std::vector<double> values_at_surface_points(const TraceSpace& space, const Eigen::VectorXd& coeffs) {
    const auto& sm = *space.surface_mesh;
    std::vector<double> v(sm.points.size());
    for (std::size_t p = 0; p < v.size(); ++p) {
        const auto [a, b] = sm.point_edge[p];
        const double t = sm.point_param[p];
        v[p] = (1.0 - t) * coeffs[space.dof_of_vertex[a]] + t * coeffs[space.dof_of_vertex[b]];
    }
    return v;
}

void write_matrix_market(const SparseMatrix& a, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
    out << std::setprecision(17);
    for (int r = 0; r < a.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(a, r); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace tracefem
