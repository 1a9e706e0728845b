#pragma once

#include "tracefem/mesh.hpp"
#include "tracefem/surface.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace tracefem {

/// Planar triangle of Gamma_h inside one background tet.
struct Segment {
    std::array<Vec3, 3> x;
    std::array<int, 3> point;  // indices into SurfaceMesh::points
    int parent_tet = -1;
    Vec3 normal = Vec3::Zero();  // n_h, towards increasing level values
    double area = 0.0;
};

/// Gamma_h: the zero level of the piecewise linear level-set interpolant.
struct SurfaceMesh {
    std::vector<Vec3> points;
    /// Each point sits on background edge (a, b) at x_a + t (x_b - x_a).
    std::vector<std::array<int, 2>> point_edge;
    std::vector<double> point_param;

    std::vector<Segment> segments;
    std::vector<int> cut_tets;  // sorted; the tets of omega_h
    std::vector<std::array<int, 2>> adjacency;
    std::size_t num_edges = 0;
    double total_area = 0.0;
    double h_max = 0.0;  // max diameter over cut tets

    [[nodiscard]] long euler_characteristic() const {
        return static_cast<long>(points.size()) - static_cast<long>(num_edges) + static_cast<long>(segments.size());
    }
};

/// Nodal values: the signed distance for sphere and torus, the level function otherwise.
std::vector<double> interpolate_levelset(const TetMesh& mesh, const LevelSetSurface& surface);

/// Marching tetrahedra; quadrilateral cuts are split along the shorter
/// diagonal. Throws ConsistencyError if the result is not watertight; with
/// `require_closed = false` boundary edges (one segment) are accepted.
SurfaceMesh extract_zero_level(const TetMesh& mesh, const std::vector<double>& nodal, bool require_closed = true);

struct GeometryReport {
    double max_dist = 0.0;
    double max_normal_dev = 0.0;
    double max_measure_dev = 0.0;
    double min_segment_area = 0.0;
    double h_max = 0.0;
};

GeometryReport geometry_diagnostics(const SurfaceMesh& sm, const LevelSetSurface& surface);

/// Edge midpoints of a segment (the quadrature nodes used throughout).
std::array<Vec3, 3> edge_midpoints(const Segment& seg);

using NamedField = std::pair<std::string, std::vector<double>>;

/// Legacy VTK (3.0, ASCII) unstructured grid of triangles. Parent tet and
/// area are always written as cell data.
void write_vtk(const SurfaceMesh& sm, const std::string& path, const std::vector<NamedField>& point_fields = {},
               const std::vector<NamedField>& cell_fields = {});

}  // namespace tracefem
