#include "tracefem/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <unordered_map>

namespace tracefem {

namespace {

constexpr std::array<std::array<int, 2>, 6> kTetEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

std::int64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::int64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

/// Gradient of the P1 interpolant of `values` on the tet.
Vec3 linear_gradient(const std::array<Vec3, 4>& x, const std::array<double, 4>& values) {
    Mat3 jac;
    jac.row(0) = (x[1] - x[0]).transpose();
    jac.row(1) = (x[2] - x[0]).transpose();
    jac.row(2) = (x[3] - x[0]).transpose();
    const Vec3 rhs(values[1] - values[0], values[2] - values[0], values[3] - values[0]);
    return jac.partialPivLu().solve(rhs);
}

}  // namespace

std::vector<double> interpolate_levelset(const TetMesh& mesh, const LevelSetSurface& surface) {
    std::vector<double> v(mesh.num_vertices());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = surface.level(mesh.vertices[i]);
    return v;
}

std::array<Vec3, 3> edge_midpoints(const Segment& seg) {
    return {0.5 * (seg.x[0] + seg.x[1]), 0.5 * (seg.x[1] + seg.x[2]), 0.5 * (seg.x[2] + seg.x[0])};
}

SurfaceMesh extract_zero_level(const TetMesh& mesh, const std::vector<double>& nodal, bool require_closed) {
    if (nodal.size() != mesh.num_vertices()) throw std::invalid_argument("extract_zero_level: nodal size mismatch");

    std::vector<double> phi = nodal;
    const double shift = 1e-12 * mesh.h_max;
    for (double& v : phi)
        if (v == 0.0) v = shift;

    SurfaceMesh sm;
    std::unordered_map<std::int64_t, int> point_of_edge;
    auto cut_point = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        const auto [it, inserted] = point_of_edge.try_emplace(edge_key(a, b), static_cast<int>(sm.points.size()));
        if (inserted) {
            const double t = phi[a] / (phi[a] - phi[b]);
            sm.points.push_back(mesh.vertices[a] + t * (mesh.vertices[b] - mesh.vertices[a]));
            sm.point_edge.push_back({a, b});
            sm.point_param.push_back(t);
        }
        return it->second;
    };

    for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
        const auto& tet = mesh.tets[t];
        std::array<double, 4> val{};
        int negatives = 0;
        for (int i = 0; i < 4; ++i) {
            val[i] = phi[tet[i]];
            if (val[i] < 0.0) ++negatives;
        }
        if (negatives == 0 || negatives == 4) continue;

        std::array<Vec3, 4> xt;
        for (int i = 0; i < 4; ++i) xt[i] = mesh.vertices[tet[i]];
        const Vec3 n_h = linear_gradient(xt, val).normalized();

        auto emit = [&](int p0, int p1, int p2) {
            Segment s;
            s.point = {p0, p1, p2};
            s.x = {sm.points[p0], sm.points[p1], sm.points[p2]};
            Vec3 cr = (s.x[1] - s.x[0]).cross(s.x[2] - s.x[0]);
            if (cr.dot(n_h) < 0.0) {
                std::swap(s.point[1], s.point[2]);
                std::swap(s.x[1], s.x[2]);
                cr = -cr;
            }
            s.parent_tet = static_cast<int>(t);
            s.normal = n_h;
            s.area = 0.5 * cr.norm();
            sm.segments.push_back(s);
        };

        if (negatives == 1 || negatives == 3) {
            std::array<int, 3> p{};
            int k = 0;
            for (const auto& e : kTetEdges)
                if ((val[e[0]] < 0.0) != (val[e[1]] < 0.0)) p[k++] = cut_point(tet[e[0]], tet[e[1]]);
            emit(p[0], p[1], p[2]);
        } else {
            std::array<int, 2> neg{}, pos{};
            int kn = 0, kp = 0;
            for (int i = 0; i < 4; ++i) (val[i] < 0.0 ? neg[kn++] : pos[kp++]) = i;
            // Cyclic order of the quadrilateral: ac, ad, bd, bc.
            const int ac = cut_point(tet[neg[0]], tet[pos[0]]);
            const int ad = cut_point(tet[neg[0]], tet[pos[1]]);
            const int bd = cut_point(tet[neg[1]], tet[pos[1]]);
            const int bc = cut_point(tet[neg[1]], tet[pos[0]]);
            const double diag1 = (sm.points[ac] - sm.points[bd]).norm();
            const double diag2 = (sm.points[ad] - sm.points[bc]).norm();
            if (diag1 <= diag2) {
                emit(ac, ad, bd);
                emit(ac, bd, bc);
            } else {
                emit(ad, bd, bc);
                emit(ad, bc, ac);
            }
        }
        sm.cut_tets.push_back(static_cast<int>(t));
        sm.h_max = std::max(sm.h_max, mesh.diameter(t));
    }

    std::map<std::int64_t, std::vector<int>> edge_segments;
    for (std::size_t s = 0; s < sm.segments.size(); ++s) {
        const auto& p = sm.segments[s].point;
        for (int e = 0; e < 3; ++e) edge_segments[edge_key(p[e], p[(e + 1) % 3])].push_back(static_cast<int>(s));
        sm.total_area += sm.segments[s].area;
    }
    for (const auto& [key, segs] : edge_segments) {
        if (segs.size() == 1 && !require_closed) continue;
        if (segs.size() != 2)
            throw ConsistencyError("extract_zero_level: surface edge shared by " + std::to_string(segs.size()) +
                                   " segments (Gamma_h not watertight; does the box contain the surface?)");
        sm.adjacency.push_back({segs[0], segs[1]});
    }
    sm.num_edges = edge_segments.size();
    return sm;
}

GeometryReport geometry_diagnostics(const SurfaceMesh& sm, const LevelSetSurface& surface) {
    GeometryReport r;
    r.h_max = sm.h_max;
    r.min_segment_area = sm.segments.empty() ? 0.0 : sm.segments.front().area;
    for (const auto& seg : sm.segments) {
        r.min_segment_area = std::min(r.min_segment_area, seg.area);
        for (const Vec3& x : edge_midpoints(seg)) {
            const double d = surface.signed_distance(x);
            const Vec3 n = surface.normal(x);
            const Mat3 hess = surface.distance_hessian(x);
            // (1 - d k1)(1 - d k2) = det(I - d H) since H has the eigenvalue 0 along n.
            const double mu = (Mat3::Identity() - d * hess).determinant() * n.dot(seg.normal);
            r.max_dist = std::max(r.max_dist, std::abs(d));
            r.max_normal_dev = std::max(r.max_normal_dev, (n - seg.normal).norm());
            r.max_measure_dev = std::max(r.max_measure_dev, std::abs(1.0 - mu));
        }
    }
    return r;
}

void write_vtk(const SurfaceMesh& sm, const std::string& path, const std::vector<NamedField>& point_fields,
               const std::vector<NamedField>& cell_fields) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nGamma_h\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << sm.points.size() << " double\n";
    for (const auto& x : sm.points) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
    const std::size_t nc = sm.segments.size();
    out << "CELLS " << nc << ' ' << 4 * nc << '\n';
    for (const auto& s : sm.segments) out << "3 " << s.point[0] << ' ' << s.point[1] << ' ' << s.point[2] << '\n';
    out << "CELL_TYPES " << nc << '\n';
    for (std::size_t i = 0; i < nc; ++i) out << "5\n";

    out << "CELL_DATA " << nc << '\n';
    out << "SCALARS parent_tet int 1\nLOOKUP_TABLE default\n";
    for (const auto& s : sm.segments) out << s.parent_tet << '\n';
    out << "SCALARS area double 1\nLOOKUP_TABLE default\n";
    for (const auto& s : sm.segments) out << s.area << '\n';
    for (const auto& [name, values] : cell_fields) {
        if (values.size() != nc) throw std::invalid_argument("write_vtk: cell field size mismatch for " + name);
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : values) out << v << '\n';
    }
    if (!point_fields.empty()) {
        out << "POINT_DATA " << sm.points.size() << '\n';
        for (const auto& [name, values] : point_fields) {
            if (values.size() != sm.points.size())
                throw std::invalid_argument("write_vtk: point field size mismatch for " + name);
            out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : values) out << v << '\n';
        }
    }
}

}  // namespace tracefem
