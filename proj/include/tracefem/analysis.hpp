#pragma once

#include "tracefem/trace_fem.hpp"

#include <functional>
#include <vector>

namespace tracefem {

using Region = std::function<bool(const Vec3&)>;

/// D = {x in Gamma : |x3| > threshold}.
Region outside_layer(double threshold);
Region whole_surface();

/// Errors of u_h against the normal extension u^e, integrated over the
/// quadrature nodes of Gamma_h whose projection lies in the region.
/// err_H1 is the H^1 seminorm (tangential gradients only).
struct ErrorReport {
    double err_L2 = 0.0;
    double err_H1 = 0.0;
    double err_Linf = 0.0;
    double err_SD = 0.0;
    double supg_norm_of_error = 0.0;
    int N = 0;
    double h_max = 0.0;
    int level = 0;
};

/// `delta` may be empty (delta_T = 0 in the SUPG norm of the error).
ErrorReport error_norms(const TraceSpace& space, const LevelSetSurface& surface, const Eigen::VectorXd& coeffs,
                        const ProblemData& data, const Region& region, const std::vector<double>& delta = {});

/// ||v||_* = (eps ||grad v||^2 + sum delta_T ||w . grad v||_T^2 + c ||v||^2)^(1/2).
double supg_norm(const TraceSpace& space, const Eigen::VectorXd& coeffs, double eps, double c,
                 const std::vector<double>& delta, const ProblemSamples& samples);

/// Per-segment int_T (w^e . grad v)^2.
std::vector<double> streamline_integrals(const TraceSpace& space, const Eigen::VectorXd& coeffs,
                                         const ProblemSamples& samples);

/// rate_k = log(e_k / e_{k+1}) / log(h_k / h_{k+1}); NaN where an error is zero.
std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& h);

}  // namespace tracefem
