#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <utility>

#include "ghost/errors.hpp"

// Rigid-body transforms on SE(3) and their dual-quaternion form.
//
// Conventions used throughout the library:
//   * A transform named aTb maps points expressed in frame b into frame a:
//     p_a = aTb * p_b.  compose(x, y) is the matrix product x * y, so
//     aTc = compose(aTb, bTc).
//   * Rotations are unit quaternions, translations are millimetres.
//   * Angles returned to callers are degrees; joint values and axis-angle
//     constructors take radians (they are configuration-space quantities).

namespace ghost {

using Point3 = Eigen::Vector3d; // mm
using Point2 = Eigen::Vector2d; // pixels or normalized image coordinates

constexpr double kPi = 3.14159265358979323846;

inline double deg_from_rad(double rad) { return rad * (180.0 / kPi); }
inline double rad_from_deg(double deg) { return deg * (kPi / 180.0); }

// ---------------------------------------------------------------------------
// RigidTransform

struct RigidTransform {
    Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0}; // unit, w-first constructor order
    Eigen::Vector3d translation{0.0, 0.0, 0.0};      // mm

    static RigidTransform identity() { return RigidTransform{}; }

    static RigidTransform from_quaternion_translation(const Eigen::Quaterniond& q,
                                                      const Eigen::Vector3d& t) {
        RigidTransform out;
        out.rotation = q.normalized();
        out.translation = t;
        return out;
    }

    static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double radians,
                                          const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
        if (axis.norm() == 0.0)
            throw ValidationError("from_axis_angle: zero axis");
        RigidTransform out;
        out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(radians, axis.normalized()));
        out.translation = t;
        return out;
    }

    // Accepts a homogeneous matrix whose upper-left block is a proper rotation.
    static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
        Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
        if (std::abs(r.determinant() - 1.0) > 1e-6 ||
            (r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-6)
            throw ValidationError("from_matrix: upper-left block is not a rotation");
        RigidTransform out;
        out.rotation = Eigen::Quaterniond(r).normalized();
        out.translation = m.topRightCorner<3, 1>();
        return out;
    }

    Eigen::Matrix4d matrix() const {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
        m.topRightCorner<3, 1>() = translation;
        return m;
    }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = (a.rotation * b.rotation).normalized();
    out.translation = a.translation + a.rotation * b.translation;
    return out;
}

inline RigidTransform invert(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.conjugate();
    out.translation = -(out.rotation * t.translation);
    return out;
}

inline Point3 transform_point(const RigidTransform& t, const Point3& p) {
    return t.rotation * p + t.translation;
}

// ---------------------------------------------------------------------------
// Rotation metric

namespace detail {
inline void require_unit(const Eigen::Quaterniond& q, const char* who) {
    if (std::abs(q.norm() - 1.0) > 1e-6)
        throw ValidationError(std::string(who) + ": non-unit quaternion");
}
} // namespace detail

// Geodesic distance on SO(3) in degrees, insensitive to the q/-q double
// cover.  Zero iff the rotations are equal; maximum 180.
inline double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    detail::require_unit(a, "angular_distance");
    detail::require_unit(b, "angular_distance");
    const Eigen::Quaterniond d = a.conjugate() * b;
    // atan2 form stays accurate near 0 where acos(|w|) loses digits.
    const double angle = 2.0 * std::atan2(d.vec().norm(), std::abs(d.w()));
    return deg_from_rad(angle);
}

inline double rotation_angle_deg(const RigidTransform& t) {
    return angular_distance(Eigen::Quaterniond::Identity(), t.rotation);
}

// ---------------------------------------------------------------------------
// Dual quaternions

// Unit dual quaternion real + eps*dual encoding the same screw motion as a
// RigidTransform.  Invariants for a well-formed value: |real| = 1 and
// dot(real, dual) = 0.
struct DualQuaternion {
    Eigen::Quaterniond real{1.0, 0.0, 0.0, 0.0};
    Eigen::Quaterniond dual{0.0, 0.0, 0.0, 0.0};
};

namespace detail {
inline Eigen::Quaterniond quat_add(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    return Eigen::Quaterniond(a.w() + b.w(), a.x() + b.x(), a.y() + b.y(), a.z() + b.z());
}

inline Eigen::Quaterniond quat_scale(double s, const Eigen::Quaterniond& q) {
    return Eigen::Quaterniond(s * q.w(), s * q.x(), s * q.y(), s * q.z());
}

inline double quat_dot(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
    return a.w() * b.w() + a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}
} // namespace detail

inline DualQuaternion to_dual_quaternion(const RigidTransform& t) {
    DualQuaternion dq;
    dq.real = t.rotation.normalized();
    const Eigen::Quaterniond tq(0.0, t.translation.x(), t.translation.y(), t.translation.z());
    dq.dual = detail::quat_scale(0.5, tq * dq.real);
    return dq;
}

inline RigidTransform from_dual_quaternion(const DualQuaternion& dq) {
    if (std::abs(dq.real.norm() - 1.0) > 1e-6 ||
        std::abs(detail::quat_dot(dq.real, dq.dual)) > 1e-6)
        throw ValidationError("from_dual_quaternion: non-unit dual quaternion");
    RigidTransform out;
    out.rotation = dq.real.normalized();
    const Eigen::Quaterniond tq = detail::quat_scale(2.0, dq.dual * dq.real.conjugate());
    out.translation = Eigen::Vector3d(tq.x(), tq.y(), tq.z());
    return out;
}

// Dual-quaternion product; mirrors compose() on the transforms it encodes
// (up to overall sign, which the encoding does not distinguish).
inline DualQuaternion dq_multiply(const DualQuaternion& a, const DualQuaternion& b) {
    DualQuaternion out;
    out.real = a.real * b.real;
    out.dual = detail::quat_add(a.real * b.dual, a.dual * b.real);
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation

// Constant-velocity blend between two transforms: spherical-linear on the
// rotation (shortest arc), linear on the translation.  u outside [0,1]
// extrapolates; callers that want clamping clamp u themselves.
inline RigidTransform interpolate(const RigidTransform& a, const RigidTransform& b, double u) {
    RigidTransform out;
    out.rotation = a.rotation.slerp(u, b.rotation).normalized();
    out.translation = (1.0 - u) * a.translation + u * b.translation;
    return out;
}

// ---------------------------------------------------------------------------
// Small helpers shared by the solvers

namespace detail {
inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}
} // namespace detail

} // namespace ghost
