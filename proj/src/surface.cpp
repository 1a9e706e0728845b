#include "tracefem/surface.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tracefem {

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 tangent_projector(const Vec3& n) { return Mat3::Identity() - n * n.transpose(); }

}  // namespace

// ---------------------------------------------------------------- sphere

Sphere::Sphere(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("Sphere: radius must be positive");
}

double Sphere::signed_distance(const Vec3& x) const { return (x - center_).norm() - radius_; }

Vec3 Sphere::normal(const Vec3& x) const {
    const Vec3 r = x - center_;
    const double len = r.norm();
    if (len <= 1e-14 * radius_) throw OutOfBandError("sphere: normal undefined at the centre");
    return r / len;
}

Vec3 Sphere::closest_point(const Vec3& x) const { return center_ + radius_ * normal(x); }

Mat3 Sphere::distance_hessian(const Vec3& x) const {
    const Vec3 n = normal(x);
    return tangent_projector(n) / (x - center_).norm();
}

// ----------------------------------------------------------------- torus

Torus::Torus(double major_radius, double minor_radius) : major_(major_radius), minor_(minor_radius) {
    if (!(minor_radius > 0.0) || !(major_radius > minor_radius))
        throw std::invalid_argument("Torus: need 0 < minor radius < major radius");
}

Torus::Frame Torus::frame(const Vec3& x) const {
    Frame f{};
    f.rho = std::hypot(x[0], x[1]);
    if (f.rho <= 1e-14 * major_) throw OutOfBandError("torus: point on the symmetry axis");
    f.radial = Vec3(x[0] / f.rho, x[1] / f.rho, 0.0);
    const Vec3 v = x - major_ * f.radial;
    f.dist = v.norm();
    if (f.dist <= 1e-14 * minor_) throw OutOfBandError("torus: point on the centre circle");
    f.n = v / f.dist;
    return f;
}

double Torus::signed_distance(const Vec3& x) const {
    return std::hypot(std::hypot(x[0], x[1]) - major_, x[2]) - minor_;
}

Vec3 Torus::normal(const Vec3& x) const { return frame(x).n; }

Vec3 Torus::closest_point(const Vec3& x) const {
    const Frame f = frame(x);
    return major_ * f.radial + minor_ * f.n;
}

Mat3 Torus::distance_hessian(const Vec3& x) const {
    const Frame f = frame(x);
    const Vec3 azimuth(-f.radial[1], f.radial[0], 0.0);
    const Mat3 aat = azimuth * azimuth.transpose();
    const Mat3 meridian = Mat3::Identity() - f.n * f.n.transpose() - aat;
    return meridian / f.dist + ((f.rho - major_) / (f.dist * f.rho)) * aat;
}

double Torus::diameter() const {
    const double a = 2.0 * (major_ + minor_);
    return std::sqrt(2.0 * a * a + 4.0 * minor_ * minor_);
}

// ----------------------------------------------------------------- dziuk

Vec3 DziukSurface::from_unit_sphere(const Vec3& s) { return {s[0] + s[2] * s[2], s[1], s[2]}; }

DziukSurface::DziukSurface() {
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    const int nt = 120, np = 240;
    for (int i = 0; i <= nt; ++i) {
        const double th = kPi * i / nt;
        for (int j = 0; j < np; ++j) {
            const double ph = 2.0 * kPi * j / np;
            const Vec3 q = from_unit_sphere({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
            lo = lo.cwiseMin(q);
            hi = hi.cwiseMax(q);
            if (i % 2 == 0 && j % 2 == 0) samples_.push_back(q);
            const Vec3 g = level_gradient(q);
            const Mat3 p = tangent_projector(g.normalized());
            const Mat3 shape = p * level_hessian(q) * p / g.norm();
            const Eigen::SelfAdjointEigenSolver<Mat3> es(shape, Eigen::EigenvaluesOnly);
            max_curvature_ = std::max(max_curvature_, es.eigenvalues().cwiseAbs().maxCoeff());
        }
    }
    diameter_ = (hi - lo).norm();
}

double DziukSurface::level(const Vec3& x) const {
    const double a = x[0] - x[2] * x[2];
    return a * a + x[1] * x[1] + x[2] * x[2] - 1.0;
}

Vec3 DziukSurface::level_gradient(const Vec3& x) const {
    const double a = x[0] - x[2] * x[2];
    return {2.0 * a, 2.0 * x[1], 2.0 * x[2] - 4.0 * x[2] * a};
}

Mat3 DziukSurface::level_hessian(const Vec3& x) const {
    Mat3 h = Mat3::Zero();
    h(0, 0) = 2.0;
    h(1, 1) = 2.0;
    h(0, 2) = h(2, 0) = -4.0 * x[2];
    h(2, 2) = -4.0 * x[0] + 12.0 * x[2] * x[2] + 2.0;
    return h;
}

bool DziukSurface::kkt_newton(const Vec3& x, Vec3 q, Vec3& result) const {
    // Newton on the KKT system of min |q - x|^2 / 2 subject to level(q) = 0:
    //   q - x + lambda grad(q) = 0,  level(q) = 0.
    const double tol = projection_tolerance();
    const Vec3 g0 = level_gradient(q);
    double lambda = g0.squaredNorm() > 0.0 ? (x - q).dot(g0) / g0.squaredNorm() : 0.0;

    auto residual = [&](const Vec3& qq, double lam) {
        Eigen::Vector4d r;
        r.head<3>() = qq - x + lam * level_gradient(qq);
        r[3] = level(qq);
        return r;
    };

    Eigen::Vector4d r = residual(q, lambda);
    for (int it = 0; it <= projection_max_iter(); ++it) {
        const Vec3 g = level_gradient(q);
        const double gnorm = g.norm();
        if (gnorm == 0.0) return false;
        const Vec3 n = g / gnorm;
        if (std::abs(r[3]) / gnorm <= tol && (tangent_projector(n) * (x - q)).norm() <= tol) {
            result = q;
            return true;
        }
        if (it == projection_max_iter()) break;

        Eigen::Matrix4d jac = Eigen::Matrix4d::Zero();
        jac.topLeftCorner<3, 3>() = Mat3::Identity() + lambda * level_hessian(q);
        jac.block<3, 1>(0, 3) = g;
        jac.block<1, 3>(3, 0) = g.transpose();
        const Eigen::Vector4d step = jac.fullPivLu().solve(-r);
        if (!step.allFinite()) return false;

        double t = 1.0;
        Vec3 q_new;
        double lambda_new = 0.0;
        Eigen::Vector4d r_new;
        for (int halving = 0; halving < 30; ++halving) {
            q_new = q + t * step.head<3>();
            lambda_new = lambda + t * step[3];
            r_new = residual(q_new, lambda_new);
            if (r_new.norm() <= r.norm() || r.norm() < tol) break;
            t *= 0.5;
        }
        q = q_new;
        lambda = lambda_new;
        r = r_new;
    }
    return false;
}

Vec3 DziukSurface::closest_point(const Vec3& x) const {
    // Seed: damped gradient flow onto the zero level.
    Vec3 q = x;
    for (int it = 0; it < projection_max_iter(); ++it) {
        const double phi = level(q);
        const Vec3 g = level_gradient(q);
        if (std::abs(phi) <= 1e-14 || g.squaredNorm() == 0.0) break;
        double t = 1.0;
        Vec3 next = q - phi * g / g.squaredNorm();
        while (std::abs(level(next)) > std::abs(phi) && t > 1e-6) {
            t *= 0.5;
            next = q - t * phi * g / g.squaredNorm();
        }
        q = next;
    }
    Vec3 p;
    const double seed_dist = (x - q).norm();
    if (kkt_newton(x, q, p) && (x - p).norm() <= seed_dist * (1.0 + 1e-12)) return p;

    // Fallback: start from the nearest sample of the surface.
    const Vec3* nearest = &samples_.front();
    for (const Vec3& sample : samples_)
        if ((sample - x).squaredNorm() < (*nearest - x).squaredNorm()) nearest = &sample;
    if (kkt_newton(x, *nearest, p)) return p;
    throw ProjectionError("dziuk: closest-point Newton iteration did not converge");
}

double DziukSurface::signed_distance(const Vec3& x) const {
    const double phi = level(x);
    if (phi == 0.0) return 0.0;
    const double dist = (x - closest_point(x)).norm();
    return phi > 0.0 ? dist : -dist;
}

Vec3 DziukSurface::normal(const Vec3& x) const { return level_gradient(closest_point(x)).normalized(); }

Mat3 DziukSurface::distance_hessian(const Vec3& x) const {
    const double step = 1e-5 * diameter_;
    Mat3 h;
    for (int i = 0; i < 3; ++i) {
        const Vec3 e = Vec3::Unit(i) * step;
        h.col(i) = (normal(x + e) - normal(x - e)) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

// ------------------------------------------------------------ extensions

double extend_scalar(const LevelSetSurface& surface, const std::function<double(const Vec3&)>& g, const Vec3& x) {
    return g(surface.closest_point(x));
}

Vec3 extend_velocity(const LevelSetSurface& surface, const ProblemData& data, const Vec3& x) {
    const Vec3 q = surface.closest_point(x);
    Vec3 w = data.velocity(q);
    if (data.tangential_projection_required) {
        const Vec3 n = surface.normal(q);
        w -= n * n.dot(w);
    }
    return w;
}

BandCheck check_band(const LevelSetSurface& surface, double h) {
    BandCheck b;
    b.h = h;
    b.bound = 1.0 / (5.0 * surface.max_curvature());
    b.satisfied = h < b.bound;
    return b;
}

// -------------------------------------------------------------- problems

namespace {

ProblemData sphere_layer_problem(double eps, double c) {
    ProblemData d;
    d.epsilon = eps;
    d.c = c;
    const double se = std::sqrt(eps);
    d.velocity = [](const Vec3& x) -> Vec3 {
        const double s = std::sqrt(std::max(0.0, 1.0 - x[2] * x[2]));
        return Vec3(-x[1] * s, x[0] * s, 0.0);
    };
    d.exact_solution = [se](const Vec3& x) { return x[0] * x[1] / kPi * std::atan(x[2] / se); };
    d.exact_gradient = [se, eps](const Vec3& x) -> Vec3 {
        const double a = std::atan(x[2] / se);
        return Vec3(x[1] * a, x[0] * a, x[0] * x[1] * se / (eps + x[2] * x[2])) / kPi;
    };
    d.source = [eps, se, c](const Vec3& x) {
        const double x1 = x[0], x2 = x[1], x3 = x[2];
        const double a = std::atan(x3 / se);
        const double den = eps + x3 * x3;
        const double diffusion_layer = 2.0 * eps * se * (1.0 + 3.0 * eps + 2.0 * x3 * x3) * x1 * x2 * x3 / (kPi * den * den);
        const double rest = (6.0 * eps * x1 * x2 + std::hypot(x1, x2) * (x1 * x1 - x2 * x2)) / kPi * a;
        return diffusion_layer + rest + c * x1 * x2 / kPi * a;
    };
    return d;
}

}  // namespace

Problem builtin_problem(int example_id, bool mass_variant) {
    constexpr double eps = 1e-6;
    const double se = std::sqrt(eps);
    Problem p;
    switch (example_id) {
        case 1:
            p.surface = std::make_shared<Sphere>();
            p.data = sphere_layer_problem(eps, 1.0);
            p.data.name = "example1";
            break;
        case 2:
            p.surface = std::make_shared<Sphere>();
            p.data = sphere_layer_problem(eps, 0.0);
            p.data.name = "example2";
            break;
        case 3:
            p.surface = std::make_shared<Torus>(1.0, 0.25);
            p.data.name = mass_variant ? "example3-mass" : "example3";
            p.data.epsilon = eps;
            p.data.c = 0.0;
            p.data.transient = true;
            p.data.velocity = [](const Vec3& x) -> Vec3 { return Vec3(-x[1], x[0], 0.0) / std::hypot(x[0], x[1]); };
            p.data.source = [](const Vec3&) { return 0.0; };
            if (mass_variant)
                p.data.initial_condition = [se](const Vec3& x) { return 1.0 + std::atan(x[2] / se) / kPi; };
            else
                p.data.initial_condition = [se](const Vec3& x) { return x[0] * x[1] / kPi * std::atan(x[2] / se); };
            break;
        case 4:
            p.surface = std::make_shared<DziukSurface>();
            p.data.name = "example4";
            p.data.epsilon = eps;
            p.data.c = 0.0;
            p.data.transient = true;
            p.data.tangential_projection_required = true;
            p.data.velocity = [](const Vec3&) { return Vec3(-1.0, 0.0, 0.0); };
            p.data.source = [](const Vec3&) { return 0.0; };
            p.data.initial_condition = [](const Vec3&) { return 1.0; };
            break;
        default:
            throw std::invalid_argument("unknown example id " + std::to_string(example_id) + " (valid: 1, 2, 3, 4)");
    }
    if (mass_variant && example_id != 3) throw std::invalid_argument("the mass variant exists only for example 3");
    return p;
}

}  // namespace tracefem
