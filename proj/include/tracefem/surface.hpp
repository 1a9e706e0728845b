#pragma once

#include "tracefem/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tracefem {

enum class SurfaceKind { Sphere, Torus, Dziuk };

/// Compact surface Gamma given implicitly, with the signed distance d
/// (negative inside), the normal field n = grad d, the Hessian H = grad^2 d and
/// the closest-point map p(x) = x - d(x) n(x), all valid in a band around Gamma.
class LevelSetSurface {
public:
    virtual ~LevelSetSurface() = default;

    [[nodiscard]] virtual SurfaceKind kind() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Level function whose zero set is Gamma; equals d for sphere and torus.
    [[nodiscard]] virtual double level(const Vec3& x) const = 0;
    [[nodiscard]] virtual Vec3 level_gradient(const Vec3& x) const = 0;

    [[nodiscard]] virtual double signed_distance(const Vec3& x) const = 0;
    [[nodiscard]] virtual Vec3 closest_point(const Vec3& x) const = 0;
    [[nodiscard]] virtual Vec3 normal(const Vec3& x) const = 0;
    [[nodiscard]] virtual Mat3 distance_hessian(const Vec3& x) const = 0;

    /// Upper bound on the diameter of Gamma (bounding-box diagonal).
    [[nodiscard]] virtual double diameter() const = 0;
    /// max_i ||kappa_i||_{L^inf(Gamma)}.
    [[nodiscard]] virtual double max_curvature() const = 0;

    [[nodiscard]] double projection_tolerance() const { return projection_tol_factor_ * diameter(); }
    [[nodiscard]] int projection_max_iter() const { return projection_max_iter_; }
    void set_projection_controls(double tol_factor, int max_iter) {
        projection_tol_factor_ = tol_factor;
        projection_max_iter_ = max_iter;
    }

protected:
    double projection_tol_factor_ = 1e-12;
    int projection_max_iter_ = 50;
};

class Sphere final : public LevelSetSurface {
public:
    explicit Sphere(Vec3 center = Vec3::Zero(), double radius = 1.0);

    [[nodiscard]] SurfaceKind kind() const override { return SurfaceKind::Sphere; }
    [[nodiscard]] std::string name() const override { return "sphere"; }
    [[nodiscard]] double level(const Vec3& x) const override { return signed_distance(x); }
    [[nodiscard]] Vec3 level_gradient(const Vec3& x) const override { return normal(x); }
    [[nodiscard]] double signed_distance(const Vec3& x) const override;
    [[nodiscard]] Vec3 closest_point(const Vec3& x) const override;
    [[nodiscard]] Vec3 normal(const Vec3& x) const override;
    [[nodiscard]] Mat3 distance_hessian(const Vec3& x) const override;
    [[nodiscard]] double diameter() const override { return 2.0 * radius_; }
    [[nodiscard]] double max_curvature() const override { return 1.0 / radius_; }

    [[nodiscard]] const Vec3& center() const { return center_; }
    [[nodiscard]] double radius() const { return radius_; }

private:
    Vec3 center_;
    double radius_;
};

/// Torus (sqrt(x1^2 + x2^2) - R)^2 + x3^2 = r^2 around the x3 axis.
class Torus final : public LevelSetSurface {
public:
    explicit Torus(double major_radius = 1.0, double minor_radius = 0.25);

    [[nodiscard]] SurfaceKind kind() const override { return SurfaceKind::Torus; }
    [[nodiscard]] std::string name() const override { return "torus"; }
    [[nodiscard]] double level(const Vec3& x) const override { return signed_distance(x); }
    [[nodiscard]] Vec3 level_gradient(const Vec3& x) const override { return normal(x); }
    [[nodiscard]] double signed_distance(const Vec3& x) const override;
    [[nodiscard]] Vec3 closest_point(const Vec3& x) const override;
    [[nodiscard]] Vec3 normal(const Vec3& x) const override;
    [[nodiscard]] Mat3 distance_hessian(const Vec3& x) const override;
    [[nodiscard]] double diameter() const override;
    [[nodiscard]] double max_curvature() const override { return 1.0 / minor_; }

    [[nodiscard]] double major_radius() const { return major_; }
    [[nodiscard]] double minor_radius() const { return minor_; }

private:
    struct Frame {
        double rho;   // distance to the x3 axis
        double dist;  // distance to the centre circle
        Vec3 radial;  // unit vector from the axis
        Vec3 n;       // unit vector from the centre circle
    };
    [[nodiscard]] Frame frame(const Vec3& x) const;

    double major_;
    double minor_;
};

/// The surface (x1 - x3^2)^2 + x2^2 + x3^2 = 1. Its level function is not a
/// distance; d, n, H and p are obtained from a constrained Newton projection.
class DziukSurface final : public LevelSetSurface {
public:
    DziukSurface();

    [[nodiscard]] SurfaceKind kind() const override { return SurfaceKind::Dziuk; }
    [[nodiscard]] std::string name() const override { return "dziuk"; }
    [[nodiscard]] double level(const Vec3& x) const override;
    [[nodiscard]] Vec3 level_gradient(const Vec3& x) const override;
    [[nodiscard]] Mat3 level_hessian(const Vec3& x) const;
    [[nodiscard]] double signed_distance(const Vec3& x) const override;
    [[nodiscard]] Vec3 closest_point(const Vec3& x) const override;
    [[nodiscard]] Vec3 normal(const Vec3& x) const override;
    [[nodiscard]] Mat3 distance_hessian(const Vec3& x) const override;
    [[nodiscard]] double diameter() const override { return diameter_; }
    [[nodiscard]] double max_curvature() const override { return max_curvature_; }

    /// Maps the unit sphere onto the surface: (a, b, c) -> (a + c^2, b, c).
    static Vec3 from_unit_sphere(const Vec3& s);

private:
    bool kkt_newton(const Vec3& x, Vec3 q, Vec3& result) const;

    double diameter_ = 0.0;
    double max_curvature_ = 0.0;
    std::vector<Vec3> samples_;  // for seeding the projection far from Gamma
};

/// Data of -eps Lap_G u + w . grad_G u + c u = f (and of its transient variant).
struct ProblemData {
    std::string name;
    double epsilon = 1e-6;
    double c = 0.0;
    std::function<Vec3(const Vec3&)> velocity;
    std::function<double(const Vec3&)> exact_solution;
    /// Ambient gradient of the closed-form solution; tangential part is taken on Gamma.
    std::function<Vec3(const Vec3&)> exact_gradient;
    std::function<double(const Vec3&)> source;
    std::function<double(const Vec3&)> initial_condition;
    bool tangential_projection_required = false;
    bool transient = false;
};

struct Problem {
    std::shared_ptr<const LevelSetSurface> surface;
    ProblemData data;
};

/// Examples 1-4; `mass_variant` selects u0 = 1 + atan(x3/sqrt(eps))/pi for example 3.
Problem builtin_problem(int example_id, bool mass_variant = false);

double extend_scalar(const LevelSetSurface& surface, const std::function<double(const Vec3&)>& g, const Vec3& x);
Vec3 extend_velocity(const LevelSetSurface& surface, const ProblemData& data, const Vec3& x);

/// Band condition 5 h < 1 / max|kappa| (with c0 = 1).
struct BandCheck {
    double h = 0.0;
    double bound = 0.0;
    bool satisfied = false;
};
BandCheck check_band(const LevelSetSurface& surface, double h);

}  // namespace tracefem
