#include "tracefem/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace tracefem {

namespace {

std::int64_t linear_index(const LatticePoint& p, std::int64_t n) {
    return (p[0] * (n + 1) + p[1]) * (n + 1) + p[2];
}

void orient_positive(const std::vector<Vec3>& x, std::array<int, 4>& t) {
    if (tet_signed_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) < 0.0) std::swap(t[2], t[3]);
}

double compute_h_max(const TetMesh& m) {
    double h = 0.0;
    for (std::size_t t = 0; t < m.num_tets(); ++t) h = std::max(h, m.diameter(t));
    return h;
}

}  // namespace

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double TetMesh::signed_volume(std::size_t t) const {
    const auto& v = tets[t];
    return tet_signed_volume(vertices[v[0]], vertices[v[1]], vertices[v[2]], vertices[v[3]]);
}

double TetMesh::diameter(std::size_t t) const {
    const auto& v = tets[t];
    double d = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) d = std::max(d, (vertices[v[i]] - vertices[v[j]]).norm());
    return d;
}

Vec3 TetMesh::point(const LatticePoint& p) const {
    const double n = static_cast<double>(lattice_size);
    Vec3 x;
    for (int a = 0; a < 3; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * (static_cast<double>(p[a]) / n);
    return x;
}

TetMesh build_box_mesh(const Vec3& lo, const Vec3& hi, int cells_per_axis) {
    for (int a = 0; a < 3; ++a)
        if (!(lo[a] < hi[a])) throw std::invalid_argument("build_box_mesh: degenerate box (lo >= hi)");
    if (cells_per_axis < 1) throw std::invalid_argument("build_box_mesh: cells_per_axis must be >= 1");

    TetMesh m;
    m.lo = lo;
    m.hi = hi;
    m.cells_per_axis = cells_per_axis;
    m.level = 0;
    m.lattice_size = cells_per_axis;

    const std::int64_t n = cells_per_axis;
    m.vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
    m.lattice.reserve(m.vertices.capacity());
    for (std::int64_t i = 0; i <= n; ++i)
        for (std::int64_t j = 0; j <= n; ++j)
            for (std::int64_t k = 0; k <= n; ++k) {
                LatticePoint p{i, j, k};
                m.lattice.push_back(p);
                m.vertices.push_back(m.point(p));
            }

    // Each cube is cut along its main diagonal; one tet per axis permutation,
    // walking corner 0 -> 0+e_a -> 0+e_a+e_b -> 0+e_a+e_b+e_c.
    std::array<int, 3> perm{0, 1, 2};
    std::vector<std::array<int, 3>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));

    m.tets.reserve(static_cast<std::size_t>(n * n * n * 6));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            for (std::int64_t k = 0; k < n; ++k)
                for (const auto& pa : perms) {
                    LatticePoint p{i, j, k};
                    std::array<int, 4> tet{};
                    tet[0] = static_cast<int>(linear_index(p, n));
                    for (int s = 0; s < 3; ++s) {
                        ++p[pa[s]];
                        tet[s + 1] = static_cast<int>(linear_index(p, n));
                    }
                    orient_positive(m.vertices, tet);
                    m.tets.push_back(tet);
                }
    m.h_max = compute_h_max(m);
    return m;
}

TetMesh refine_uniform(const TetMesh& mesh) {
    TetMesh fine;
    fine.lo = mesh.lo;
    fine.hi = mesh.hi;
    fine.cells_per_axis = mesh.cells_per_axis;
    fine.level = mesh.level + 1;
    fine.lattice_size = 2 * mesh.lattice_size;
    const std::int64_t n = fine.lattice_size;

    std::vector<int> index(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)), -1);
    fine.vertices.reserve(index.size());
    fine.lattice.reserve(index.size());
    auto vertex_at = [&](const LatticePoint& p) {
        int& slot = index[static_cast<std::size_t>(linear_index(p, n))];
        if (slot < 0) {
            slot = static_cast<int>(fine.vertices.size());
            fine.lattice.push_back(p);
            fine.vertices.push_back(fine.point(p));
        }
        return slot;
    };
    for (const auto& p : mesh.lattice) vertex_at({2 * p[0], 2 * p[1], 2 * p[2]});

    fine.tets.reserve(8 * mesh.num_tets());
    for (const auto& tet : mesh.tets) {
        // Path order of the Kuhn simplex: lattice coordinate sums are strictly increasing.
        std::array<int, 4> v = tet;
        auto sum = [&](int i) { return mesh.lattice[i][0] + mesh.lattice[i][1] + mesh.lattice[i][2]; };
        std::sort(v.begin(), v.end(), [&](int a, int b) { return sum(a) < sum(b); });

        std::array<LatticePoint, 4> c{};
        for (int i = 0; i < 4; ++i)
            for (int a = 0; a < 3; ++a) c[i][a] = 2 * mesh.lattice[v[i]][a];
        auto mid = [&](int i, int j) {
            LatticePoint p{};
            for (int a = 0; a < 3; ++a) p[a] = (c[i][a] + c[j][a]) / 2;
            return vertex_at(p);
        };
        const int x0 = vertex_at(c[0]), x1 = vertex_at(c[1]), x2 = vertex_at(c[2]), x3 = vertex_at(c[3]);
        const int x01 = mid(0, 1), x02 = mid(0, 2), x03 = mid(0, 3);
        const int x12 = mid(1, 2), x13 = mid(1, 3), x23 = mid(2, 3);

        const std::array<std::array<int, 4>, 8> children{{
            {x0, x01, x02, x03},
            {x01, x1, x12, x13},
            {x02, x12, x2, x23},
            {x03, x13, x23, x3},
            {x01, x02, x03, x13},
            {x01, x02, x12, x13},
            {x02, x03, x13, x23},
            {x02, x12, x13, x23},
        }};
        for (auto child : children) {
            orient_positive(fine.vertices, child);
            fine.tets.push_back(child);
        }
    }
    fine.h_max = compute_h_max(fine);
    return fine;
}

void write_vtk(const TetMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nbackground tetrahedral mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.num_vertices() << " double\n";
    for (const auto& x : mesh.vertices) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
    out << "CELLS " << mesh.num_tets() << ' ' << 5 * mesh.num_tets() << '\n';
    for (const auto& t : mesh.tets) out << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    out << "CELL_TYPES " << mesh.num_tets() << '\n';
    for (std::size_t t = 0; t < mesh.num_tets(); ++t) out << "10\n";
}

}  // namespace tracefem
