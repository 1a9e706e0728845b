#pragma once

#include "tracefem/extraction.hpp"
#include "tracefem/mesh.hpp"
#include "tracefem/surface.hpp"

#include <Eigen/Sparse>

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracefem {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Per-segment data of the trace space: the parent tet's four P1 basis
/// functions restricted to the segment.
struct SegmentBasis {
    std::array<int, 4> dofs{};
    std::array<Vec3, 3> points;                    // quadrature nodes (edge midpoints)
    double weight = 0.0;                           // area / 3
    std::array<std::array<double, 4>, 3> values;  // phi_i at each node
    std::array<Vec3, 4> grad;                      // P_h grad phi_i
    double h = 0.0;                                // diameter of the parent tet
};

/// Traces on Gamma_h of the P1 functions on omega_h.
struct TraceSpace {
    std::shared_ptr<const TetMesh> mesh;
    std::shared_ptr<const SurfaceMesh> surface_mesh;
    std::vector<int> active_vertices;  // ascending background indices
    std::vector<int> dof_of_vertex;    // -1 for inactive vertices
    std::vector<SegmentBasis> segments;

    [[nodiscard]] int size() const { return static_cast<int>(active_vertices.size()); }
};

TraceSpace build_trace_space(std::shared_ptr<const TetMesh> mesh, std::shared_ptr<const SurfaceMesh> sm);

struct QuadratureRule {
    std::array<Vec3, 3> points;
    std::array<double, 3> weights{};
};

/// Edge-midpoint rule; exact for quadratics on the triangle.
QuadratureRule quadrature_rule(const Segment& seg);

enum class ConvectionForm { Skew, Conservative };

struct StabilizationConfig {
    double delta0 = 0.5;
    double delta1 = 0.125;
    bool enabled = true;
    ConvectionForm convection_form = ConvectionForm::Skew;
};

/// delta_T for one segment given the parent tet diameter h and max |w^e| on the segment.
double stabilization_parameter(double h, double eps, double c, double w_inf, const StabilizationConfig& cfg);

/// Velocity and source extensions sampled at every quadrature node.
struct ProblemSamples {
    std::vector<std::array<Vec3, 3>> velocity;
    std::vector<std::array<double, 3>> source;
};

ProblemSamples sample_problem(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data);

std::vector<double> stabilization_parameters(const TraceSpace& space, const ProblemSamples& samples, double eps,
                                             double c, const StabilizationConfig& cfg);

/// The bilinear-form pieces, row = test function, column = trial function:
///   stiffness   int grad u . grad v
///   convection  skew or conservative convection term
///   mass        int u v
///   supg_mass   sum delta_T int u (w . grad v)
///   streamline  sum delta_T int (w . grad u)(w . grad v)
struct FormBlocks {
    SparseMatrix stiffness, convection, mass, supg_mass, streamline;
};

FormBlocks assemble_blocks(const TraceSpace& space, const ProblemSamples& samples, const std::vector<double>& delta,
                           ConvectionForm form);

struct LinearSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    /// b_i = int phi_i, present when the mean-zero condition applies (c = 0).
    std::optional<Eigen::VectorXd> constraint;
};

struct StationaryAssembly {
    LinearSystem system;
    std::vector<double> delta;
    ProblemSamples samples;
};

StationaryAssembly assemble_stationary(const TraceSpace& space, const LevelSetSurface& surface,
                                       const ProblemData& data, const StabilizationConfig& cfg);

struct TransientSystem {
    SparseMatrix mass;      // SUPG-weighted mass form m(., .)
    SparseMatrix operator_; // a_h with c = 0
    std::vector<double> delta;
    ProblemSamples samples;
};

TransientSystem assemble_transient(const TraceSpace& space, const LevelSetSurface& surface, const ProblemData& data,
                                   const StabilizationConfig& cfg);

struct FieldValue {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();  // tangential to Gamma_h
};

/// u_h and grad_{Gamma_h} u_h at the point sum_k bary[k] * seg.x[k].
FieldValue evaluate_field(const TraceSpace& space, const Eigen::VectorXd& coeffs, std::size_t segment,
                          const std::array<double, 3>& bary);

/// Nodal interpolation of g^e (g evaluated at p(x)) on the active vertices.
Eigen::VectorXd interpolate_extension(const TraceSpace& space, const LevelSetSurface& surface,
                                      const std::function<double(const Vec3&)>& g);

/// Values of u_h at the points of Gamma_h (for output).
std::vector<double> values_at_surface_points(const TraceSpace& space, const Eigen::VectorXd& coeffs);

void write_matrix_market(const SparseMatrix& a, const std::string& path);

}  // namespace tracefem
