#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "ghost/errors.hpp"
#include "ghost/geometry.hpp"

// Pinhole camera with Brown-Conrady distortion plus the fixed-function
// rendering side (projection matrix, frustum clipping).
//
// Conventions:
//   * Camera frame: x right, y down, z forward (optical axis).  Points with
//     z <= 0 are behind the camera and cannot be projected.
//   * Pixel frame: u right, v down, origin at the top-left corner; the
//     principal point (cx, cy) is where the optical axis lands.
//   * NDC: all three axes in [-1, 1]; x/y share the pixel axes' directions,
//     z = -1 on the near plane and +1 on the far plane.
//   * The measurement path (project_point) applies lens distortion; the
//     rendering path (build_render_matrix) is the ideal pinhole, as a
//     rasterizer's vertex transform would be.

namespace ghost {

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0; // focal lengths, px
    double cx = 0.0, cy = 0.0; // principal point, px
    // Brown-Conrady coefficients (radial k1,k2,k3; tangential p1,p2).
    double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0, k3 = 0.0;
    int width = 0, height = 0;           // sensor size, px
    double near_mm = 1.0, far_mm = 1e4;  // clip depths

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw ValidationError("intrinsics: focal lengths must be positive");
        if (width <= 0 || height <= 0)
            throw ValidationError("intrinsics: image size must be positive");
        if (!(near_mm > 0.0) || !(far_mm > near_mm))
            throw ValidationError("intrinsics: require 0 < near < far");
    }

    bool has_distortion() const {
        return k1 != 0.0 || k2 != 0.0 || p1 != 0.0 || p2 != 0.0 || k3 != 0.0;
    }
};

// Distorts a point given in normalized image coordinates (x/z, y/z).
inline Point2 distort_normalized(const CameraIntrinsics& k, const Point2& n) {
    const double x = n.x(), y = n.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k.k1 + r2 * (k.k2 + r2 * k.k3));
    const double xd = x * radial + 2.0 * k.p1 * x * y + k.p2 * (r2 + 2.0 * x * x);
    const double yd = y * radial + k.p1 * (r2 + 2.0 * y * y) + 2.0 * k.p2 * x * y;
    return {xd, yd};
}

// Full measurement model: camera-frame point -> distorted pixel.
inline Point2 project_point(const CameraIntrinsics& k, const Point3& p) {
    k.validate();
    if (!(p.z() > 0.0))
        throw BehindCameraError("project_point: point not in front of camera");
    const Point2 d = distort_normalized(k, {p.x() / p.z(), p.y() / p.z()});
    return {k.fx * d.x() + k.cx, k.fy * d.y() + k.cy};
}

// Ideal-pinhole projection matrix mapping camera-frame homogeneous points to
// clip space with w = z.  After the perspective divide, x/y reproduce the
// pinhole pixel mapped to [-1,1] across the image, and z sweeps [-1,1] from
// the near to the far plane.
inline Eigen::Matrix4d build_render_matrix(const CameraIntrinsics& k) {
    k.validate();
    const double w = static_cast<double>(k.width);
    const double h = static_cast<double>(k.height);
    const double n = k.near_mm, f = k.far_mm;
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    m(0, 0) = 2.0 * k.fx / w;
    m(0, 2) = 2.0 * k.cx / w - 1.0;
    m(1, 1) = 2.0 * k.fy / h;
    m(1, 2) = 2.0 * k.cy / h - 1.0;
    m(2, 2) = (f + n) / (f - n);
    m(2, 3) = -2.0 * f * n / (f - n);
    m(3, 2) = 1.0;
    return m;
}

// Applies a render matrix and performs the perspective divide.
inline Point3 project_ndc(const Eigen::Matrix4d& render, const Point3& p) {
    const Eigen::Vector4d clip = render * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
    if (!(clip.w() > 0.0))
        throw BehindCameraError("project_ndc: point not in front of camera");
    return clip.head<3>() / clip.w();
}

inline Point2 ndc_to_pixel(const CameraIntrinsics& k, const Point2& ndc) {
    return {(ndc.x() + 1.0) * 0.5 * k.width, (ndc.y() + 1.0) * 0.5 * k.height};
}

// View frustum as six inward-facing half-spaces in the camera frame.
// A point is visible iff dot((n;d), (p;1)) > 0 for all six planes (strict:
// boundary points are treated as clipped).
struct Frustum {
    std::array<Eigen::Vector4d, 6> planes;

    static Frustum from_intrinsics(const CameraIntrinsics& k) {
        k.validate();
        const double w = static_cast<double>(k.width);
        const double h = static_cast<double>(k.height);
        Frustum fr;
        fr.planes[0] = {0.0, 0.0, 1.0, -k.near_mm};   // beyond near plane
        fr.planes[1] = {0.0, 0.0, -1.0, k.far_mm};    // before far plane
        fr.planes[2] = {k.fx, 0.0, k.cx, 0.0};        // u > 0
        fr.planes[3] = {-k.fx, 0.0, w - k.cx, 0.0};   // u < width
        fr.planes[4] = {0.0, k.fy, k.cy, 0.0};        // v > 0
        fr.planes[5] = {0.0, -k.fy, h - k.cy, 0.0};   // v < height
        return fr;
    }
};

inline bool clip_visible(const Frustum& f, const Point3& p) {
    const Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
    for (const auto& plane : f.planes)
        if (!(plane.dot(ph) > 0.0)) return false;
    return true;
}

} // namespace ghost
