#include "tracefem/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tracefem {

namespace {

Vec3 surface_gradient(const LevelSetSurface& surface, const ProblemData& data, const Vec3& p) {
    const Vec3 n = surface.normal(p);
    const Mat3 proj = Mat3::Identity() - n * n.transpose();
    if (data.exact_gradient) return proj * data.exact_gradient(p);

    // Central differences of u o p at p; u o p is constant along normals.
    const double step = 1e-6;
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        const Vec3 e = Vec3::Unit(i) * step;
        g[i] = (data.exact_solution(surface.closest_point(p + e)) - data.exact_solution(surface.closest_point(p - e))) /
               (2.0 * step);
    }
    return proj * g;
}

}  // namespace

Region outside_layer(double threshold) {
    return [threshold](const Vec3& x) { return std::abs(x[2]) > threshold; };
}

Region whole_surface() {
    return [](const Vec3&) { return true; };
}

ErrorReport error_norms(const TraceSpace& space, const LevelSetSurface& surface, const Eigen::VectorXd& coeffs,
                        const ProblemData& data, const Region& region, const std::vector<double>& delta) {
    if (!data.exact_solution) throw std::invalid_argument("error_norms: problem has no exact solution");
    if (coeffs.size() != space.size()) throw std::invalid_argument("error_norms: coefficient size mismatch");

    ErrorReport r;
    r.N = space.size();
    r.h_max = space.surface_mesh->h_max;
    r.level = space.mesh->level;

    double l2 = 0.0, h1 = 0.0, sd = 0.0, star = 0.0;
    const auto& segs = space.surface_mesh->segments;
    for (std::size_t k = 0; k < space.segments.size(); ++k) {
        const auto& b = space.segments[k];
        const Mat3 ph = Mat3::Identity() - segs[k].normal * segs[k].normal.transpose();
        Vec3 grad_h = Vec3::Zero();
        for (int i = 0; i < 4; ++i) grad_h += coeffs[b.dofs[i]] * b.grad[i];
        const double dk = delta.empty() ? 0.0 : delta[k];

        for (int q = 0; q < 3; ++q) {
            const Vec3& x = b.points[q];
            const Vec3 p = surface.closest_point(x);
            if (!region(p)) continue;

            double uh = 0.0;
            for (int i = 0; i < 4; ++i) uh += coeffs[b.dofs[i]] * b.values[q][i];
            const double e = uh - data.exact_solution(p);

            const double d = surface.signed_distance(x);
            const Mat3 hess = surface.distance_hessian(x);
            const Vec3 grad_ext = ph * (Mat3::Identity() - d * hess) * surface_gradient(surface, data, p);
            const Vec3 ge = grad_h - grad_ext;

            Vec3 w = data.velocity ? data.velocity(p) : Vec3::Zero();
            if (data.tangential_projection_required) {
                const Vec3 n = surface.normal(p);
                w -= n * n.dot(w);
            }
            const double wge = w.dot(ge);

            l2 += b.weight * e * e;
            h1 += b.weight * ge.squaredNorm();
            sd += b.weight * wge * wge;
            star += b.weight * (data.epsilon * ge.squaredNorm() + dk * wge * wge + data.c * e * e);
            r.err_Linf = std::max(r.err_Linf, std::abs(e));
        }
    }

    // u_h is linear on each segment: its extrema sit at the segment vertices.
    const std::vector<double> uh_points = values_at_surface_points(space, coeffs);
    const auto& pts = space.surface_mesh->points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 p = surface.closest_point(pts[i]);
        if (region(p)) r.err_Linf = std::max(r.err_Linf, std::abs(uh_points[i] - data.exact_solution(p)));
    }

    r.err_L2 = std::sqrt(l2);
    r.err_H1 = std::sqrt(h1);
    r.err_SD = std::sqrt(sd);
    r.supg_norm_of_error = std::sqrt(star);
    return r;
}

std::vector<double> streamline_integrals(const TraceSpace& space, const Eigen::VectorXd& coeffs,
                                         const ProblemSamples& samples) {
    std::vector<double> out(space.segments.size(), 0.0);
    for (std::size_t k = 0; k < space.segments.size(); ++k) {
        const auto& b = space.segments[k];
        Vec3 g = Vec3::Zero();
        for (int i = 0; i < 4; ++i) g += coeffs[b.dofs[i]] * b.grad[i];
        for (int q = 0; q < 3; ++q) {
            const double wg = samples.velocity[k][q].dot(g);
            out[k] += b.weight * wg * wg;
        }
    }
    return out;
}

double supg_norm(const TraceSpace& space, const Eigen::VectorXd& coeffs, double eps, double c,
                 const std::vector<double>& delta, const ProblemSamples& samples) {
    const std::vector<double> stream = streamline_integrals(space, coeffs, samples);
    double sum = 0.0;
    for (std::size_t k = 0; k < space.segments.size(); ++k) {
        const auto& b = space.segments[k];
        Vec3 g = Vec3::Zero();
        for (int i = 0; i < 4; ++i) g += coeffs[b.dofs[i]] * b.grad[i];
        double l2 = 0.0;
        for (int q = 0; q < 3; ++q) {
            double v = 0.0;
            for (int i = 0; i < 4; ++i) v += coeffs[b.dofs[i]] * b.values[q][i];
            l2 += b.weight * v * v;
        }
        const double area = 3.0 * b.weight;
        sum += eps * area * g.squaredNorm() + (delta.empty() ? 0.0 : delta[k]) * stream[k] + c * l2;
    }
    return std::sqrt(sum);
}

std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& h) {
    if (errors.size() != h.size() || errors.size() < 2)
        throw std::invalid_argument("eoc: need matching error/h lists of length >= 2");
    for (std::size_t k = 0; k + 1 < h.size(); ++k)
        if (!(h[k] > h[k + 1])) throw std::invalid_argument("eoc: h must be strictly decreasing");

    std::vector<double> rates;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        if (errors[k] == 0.0 || errors[k + 1] == 0.0)
            rates.push_back(std::numeric_limits<double>::quiet_NaN());
        else
            rates.push_back(std::log(errors[k] / errors[k + 1]) / std::log(h[k] / h[k + 1]));
    }
    return rates;
}

}  // namespace tracefem
