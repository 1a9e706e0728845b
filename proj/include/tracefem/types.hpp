#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tracefem {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Point lies where the closest-point map onto the surface is not unique.
class OutOfBandError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Newton closest-point iteration did not converge.
class ProjectionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A structural invariant was violated (e.g. a non-watertight Gamma_h).
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tracefem
