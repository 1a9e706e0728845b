#pragma once

#include "tracefem/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tracefem {

using LatticePoint = std::array<std::int64_t, 3>;

/// Background tetrahedral triangulation of an axis-aligned box.
///
/// Vertices live on an integer lattice with `lattice_size` intervals per axis;
/// coordinates are derived from lattice indices so that vertex identity never
/// depends on floating-point comparison. Tets are stored positively oriented.
struct TetMesh {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();
    int cells_per_axis = 1;
    int level = 0;
    std::int64_t lattice_size = 1;

    std::vector<Vec3> vertices;
    std::vector<LatticePoint> lattice;
    std::vector<std::array<int, 4>> tets;
    double h_max = 0.0;

    [[nodiscard]] std::size_t num_vertices() const { return vertices.size(); }
    [[nodiscard]] std::size_t num_tets() const { return tets.size(); }

    [[nodiscard]] double signed_volume(std::size_t t) const;
    /// Largest vertex-pair distance of tet `t`.
    [[nodiscard]] double diameter(std::size_t t) const;
    [[nodiscard]] Vec3 point(const LatticePoint& p) const;
};

/// Kuhn (Freudenthal) subdivision of a cells^3 grid: 6 tets per cube.
TetMesh build_box_mesh(const Vec3& lo, const Vec3& hi, int cells_per_axis);

/// Regular red refinement (Bey's rule): every tet is split into 8 children.
TetMesh refine_uniform(const TetMesh& mesh);

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

void write_vtk(const TetMesh& mesh, const std::string& path);

}  // namespace tracefem
