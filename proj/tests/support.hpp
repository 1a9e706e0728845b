#pragma once

#include "tracefem/analysis.hpp"
#include "tracefem/extraction.hpp"
#include "tracefem/mesh.hpp"
#include "tracefem/surface.hpp"
#include "tracefem/trace_fem.hpp"

#include <memory>

namespace tracefem::testing {

/// Background mesh, discrete surface and trace space on a cube [-half, half]^3.
struct Discretization {
    std::shared_ptr<TetMesh> mesh;
    std::shared_ptr<SurfaceMesh> surface_mesh;
    TraceSpace space;
};

inline Discretization discretize(const LevelSetSurface& surface, double half, int cells, int refinements = 0) {
    Discretization d;
    d.mesh = std::make_shared<TetMesh>(build_box_mesh(Vec3::Constant(-half), Vec3::Constant(half), cells));
    for (int r = 0; r < refinements; ++r) d.mesh = std::make_shared<TetMesh>(refine_uniform(*d.mesh));
    d.surface_mesh = std::make_shared<SurfaceMesh>(extract_zero_level(*d.mesh, interpolate_levelset(*d.mesh, surface)));
    d.space = build_trace_space(d.mesh, d.surface_mesh);
    return d;
}

}  // namespace tracefem::testing
