#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ghost/camera.hpp"
#include "ghost/errors.hpp"
#include "ghost/geometry.hpp"
#include "ghost/random.hpp"
#include "ghost/robust.hpp"

// Fiducial-based scene registration.
//
// Square markers are pinned around the workspace; their corner positions in
// the scene frame are surveyed once into a FiducialMap.  Registration then
// runs in two phases that tolerate partial occlusion:
//
//   1. accumulate(): sweep a fixed number of camera frames and pool the
//      corner correspondences of every recognized marker.  No single frame
//      has to see everything — ten sightings of one marker and one sighting
//      of ten markers carry the same information.
//   2. solve_pnp_robust(): estimate the camera-from-scene pose from the
//      pooled 2D-3D set with a RANSAC loop (DLT or planar-homography
//      hypotheses, Levenberg-Marquardt polish on the consensus set).
//
// Hypothesis generation ignores lens distortion (it works on ideal
// normalized coordinates); scoring and refinement always use the full
// forward model, so distortion is never inverted anywhere.

namespace ghost {

// Surveyed marker corners, scene frame, fixed corner order.
struct FiducialMap {
    std::map<std::string, std::array<Point3, 4>> markers;

    void validate() const {
        if (markers.empty()) throw ValidationError("fiducial map: no markers");
        for (const auto& [label, c] : markers) {
            // Corners of a physical tag are distinct and coplanar.
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j)
                    if ((c[i] - c[j]).norm() < 1e-9)
                        throw ValidationError("fiducial map: duplicate corners in " + label);
            const Eigen::Vector3d n = (c[1] - c[0]).cross(c[2] - c[0]);
            if (n.norm() < 1e-12)
                throw ValidationError("fiducial map: degenerate corners in " + label);
            if (std::abs(n.normalized().dot(c[3] - c[0])) > 1e-6 * (c[3] - c[0]).norm() + 1e-9)
                throw ValidationError("fiducial map: non-planar corners in " + label);
        }
    }
};

// One recognized marker in one frame.
struct Detection {
    std::string label;
    std::array<Point2, 4> corners; // pixels, same order as the map entry
};

using DetectionBatch = std::vector<Detection>; // all detections of one frame

// Pooled 2D-3D correspondences.
struct CorrespondenceSet {
    std::vector<Point3> scene_points;
    std::vector<Point2> image_points;
    int detection_count = 0; // accepted marker sightings (not corners)
};

// Pools correspondences from exactly `frame_threshold` frames (the first
// ones of `frames`).  Detections with labels absent from the map are
// ignored; each accepted detection contributes its four corners.
inline CorrespondenceSet accumulate(std::span<const DetectionBatch> frames,
                                    const FiducialMap& map, int frame_threshold) {
    if (frame_threshold <= 0)
        throw ValidationError("accumulate: frame threshold must be positive");
    if (std::ssize(frames) < frame_threshold)
        throw InsufficientDataError("accumulate: fewer frames than the frame threshold");
    map.validate();

    CorrespondenceSet out;
    for (int f = 0; f < frame_threshold; ++f) {
        for (const Detection& d : frames[f]) {
            const auto it = map.markers.find(d.label);
            if (it == map.markers.end()) continue;
            for (int c = 0; c < 4; ++c) {
                out.scene_points.push_back(it->second[c]);
                out.image_points.push_back(d.corners[c]);
            }
            ++out.detection_count;
        }
    }
    return out;
}

struct PnPResult {
    RigidTransform camera_from_scene;
    std::vector<bool> inliers;    // per correspondence
    double rms_px = 0.0;          // reprojection RMS over the final inliers
    int iterations = 0;           // RANSAC hypotheses examined
};

namespace detail {

// Reprojection residual under the full measurement model; points that fall
// behind the camera during search get a large finite penalty so the
// optimizer is pushed back instead of crashing.
inline Point2 reprojection_residual(const CameraIntrinsics& k, const RigidTransform& pose,
                                    const Point3& scene, const Point2& observed) {
    const Point3 p = transform_point(pose, scene);
    if (!(p.z() > 1e-9)) return {1e6, 1e6};
    const Point2 d = distort_normalized(k, {p.x() / p.z(), p.y() / p.z()});
    return {k.fx * d.x() + k.cx - observed.x(), k.fy * d.y() + k.cy - observed.y()};
}

inline double reprojection_rms(const CameraIntrinsics& k, const RigidTransform& pose,
                               std::span<const Point3> scene, std::span<const Point2> image,
                               std::span<const int> idx) {
    double ss = 0.0;
    for (int i : idx) ss += reprojection_residual(k, pose, scene[i], image[i]).squaredNorm();
    return idx.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(idx.size()));
}

// --- Levenberg-Marquardt pose polish -------------------------------------

inline RigidTransform apply_increment(const Eigen::Matrix<double, 6, 1>& d,
                                      const RigidTransform& t) {
    RigidTransform g;
    const Eigen::Vector3d r = d.head<3>();
    const double angle = r.norm();
    if (angle > 1e-300) g.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, r / angle));
    g.translation = d.tail<3>();
    return compose(g, t);
}

inline RigidTransform refine_pose_lm(RigidTransform pose, const CameraIntrinsics& k,
                                     std::span<const Point3> scene,
                                     std::span<const Point2> image, std::span<const int> idx,
                                     int max_iters) {
    const int n = static_cast<int>(idx.size());
    if (n == 0) return pose;

    const auto residuals = [&](const RigidTransform& t) {
        Eigen::VectorXd r(2 * n);
        for (int i = 0; i < n; ++i)
            r.segment<2>(2 * i) = reprojection_residual(k, t, scene[idx[i]], image[idx[i]]);
        return r;
    };

    Eigen::VectorXd r = residuals(pose);
    double cost = r.squaredNorm();
    double mu = 1e-3;

    for (int iter = 0; iter < max_iters; ++iter) {
        // Numeric Jacobian, central differences over a left-multiplied
        // twist increment.
        Eigen::MatrixXd jac(2 * n, 6);
        constexpr double h = 1e-6;
        for (int p = 0; p < 6; ++p) {
            Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
            d(p) = h;
            const Eigen::VectorXd rp = residuals(apply_increment(d, pose));
            d(p) = -h;
            const Eigen::VectorXd rm = residuals(apply_increment(d, pose));
            jac.col(p) = (rp - rm) / (2.0 * h);
        }
        const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
        const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * r;
        if (jtr.norm() < 1e-14) break;

        bool stepped = false;
        for (int attempt = 0; attempt < 10; ++attempt) {
            Eigen::Matrix<double, 6, 6> a = jtj;
            a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::Matrix<double, 6, 1> d = a.ldlt().solve(-jtr);
            const RigidTransform trial = apply_increment(d, pose);
            const Eigen::VectorXd rt = residuals(trial);
            const double trial_cost = rt.squaredNorm();
            if (trial_cost < cost) {
                pose = trial;
                r = rt;
                const double drop = cost - trial_cost;
                cost = trial_cost;
                mu = std::max(mu / 3.0, 1e-12);
                stepped = true;
                if (d.norm() < 1e-12 || drop < 1e-15 * (cost + 1e-30)) return pose;
                break;
            }
            mu *= 4.0;
        }
        if (!stepped) break;
    }
    return pose;
}

// --- Hypothesis generation ------------------------------------------------

// Direct linear transform for >= 6 non-coplanar points on ideal normalized
// image coordinates.  Hartley-normalized for conditioning.
inline std::optional<RigidTransform> pose_from_dlt(std::span<const Point3> scene,
                                                   std::span<const Point2> norm_img,
                                                   std::span<const int> idx) {
    const int n = static_cast<int>(idx.size());
    if (n < 6) return std::nullopt;

    Point3 c3 = Point3::Zero();
    Point2 c2 = Point2::Zero();
    for (int i : idx) {
        c3 += scene[i];
        c2 += norm_img[i];
    }
    c3 /= n;
    c2 /= n;
    double s3 = 0.0, s2 = 0.0;
    for (int i : idx) {
        s3 += (scene[i] - c3).norm();
        s2 += (norm_img[i] - c2).norm();
    }
    s3 = (s3 > 1e-12) ? std::sqrt(3.0) * n / s3 : 1.0;
    s2 = (s2 > 1e-12) ? std::sqrt(2.0) * n / s2 : 1.0;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
    for (int r = 0; r < n; ++r) {
        const Point3 xs = s3 * (scene[idx[r]] - c3);
        const Point2 xi = s2 * (norm_img[idx[r]] - c2);
        const Eigen::Vector4d xh(xs.x(), xs.y(), xs.z(), 1.0);
        a.block<1, 4>(2 * r, 0) = xh.transpose();
        a.block<1, 4>(2 * r, 8) = -xi.x() * xh.transpose();
        a.block<1, 4>(2 * r + 1, 4) = xh.transpose();
        a.block<1, 4>(2 * r + 1, 8) = -xi.y() * xh.transpose();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd p = svd.matrixV().col(11);
    Eigen::Matrix<double, 3, 4> pm;
    pm.row(0) = p.segment<4>(0);
    pm.row(1) = p.segment<4>(4);
    pm.row(2) = p.segment<4>(8);

    // Undo the normalizations: x_true = T2^-1 * P * T3.
    Eigen::Matrix3d t2inv = Eigen::Matrix3d::Identity();
    t2inv(0, 0) = t2inv(1, 1) = 1.0 / s2;
    t2inv(0, 2) = c2.x();
    t2inv(1, 2) = c2.y();
    Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity() * s3;
    t3(3, 3) = 1.0;
    t3.block<3, 1>(0, 3) = -s3 * c3;
    pm = t2inv * pm * t3;

    Eigen::Matrix3d m = pm.leftCols<3>();
    if (m.determinant() < 0.0) {
        pm = -pm;
        m = -m;
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double sigma_sum = msvd.singularValues().sum();
    if (sigma_sum < 1e-12) return std::nullopt;
    const double scale = 3.0 / sigma_sum;
    Eigen::Matrix3d rot = msvd.matrixU() * msvd.matrixV().transpose();

    RigidTransform out;
    out.rotation = Eigen::Quaterniond(rot).normalized();
    out.translation = scale * pm.col(3);

    // Cheirality: the sampled points must lie in front.
    double depth = 0.0;
    for (int i : idx) depth += transform_point(out, scene[i]).z();
    if (depth <= 0.0) return std::nullopt;
    return out;
}

struct PlaneBasis {
    Eigen::Matrix3d rot; // rows e1, e2, n: scene -> plane coordinates
    Point3 centroid;
    Point2 to_plane(const Point3& p) const { return (rot * (p - centroid)).head<2>(); }
    RigidTransform plane_from_scene() const {
        RigidTransform t;
        t.rotation = Eigen::Quaterniond(rot).normalized();
        t.translation = -(rot * centroid);
        return t;
    }
};

inline PlaneBasis plane_basis(std::span<const Point3> scene, std::span<const int> idx) {
    PlaneBasis b;
    b.centroid = Point3::Zero();
    for (int i : idx) b.centroid += scene[i];
    b.centroid /= static_cast<double>(idx.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : idx) {
        const Point3 d = scene[i] - b.centroid;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Eigenvalues ascending: columns 2,1 span the plane, column 0 is normal.
    const Eigen::Vector3d e1 = eig.eigenvectors().col(2);
    Eigen::Vector3d e2 = eig.eigenvectors().col(1);
    Eigen::Vector3d n = e1.cross(e2);
    b.rot.row(0) = e1;
    b.rot.row(1) = e2;
    b.rot.row(2) = n;
    return b;
}

// Homography-based hypotheses for coplanar points (>= 4).  Returns up to two
// candidates: the direct decomposition and its plane-reflection twin.
inline std::vector<RigidTransform> poses_from_homography(std::span<const Point3> scene,
                                                         std::span<const Point2> norm_img,
                                                         std::span<const int> idx) {
    const int n = static_cast<int>(idx.size());
    std::vector<RigidTransform> out;
    if (n < 4) return out;

    const PlaneBasis basis = plane_basis(scene, idx);

    // Hartley normalization on both sides.
    Point2 cp = Point2::Zero(), ci = Point2::Zero();
    for (int i : idx) {
        cp += basis.to_plane(scene[i]);
        ci += norm_img[i];
    }
    cp /= n;
    ci /= n;
    double sp = 0.0, si = 0.0;
    for (int i : idx) {
        sp += (basis.to_plane(scene[i]) - cp).norm();
        si += (norm_img[i] - ci).norm();
    }
    sp = (sp > 1e-12) ? std::sqrt(2.0) * n / sp : 1.0;
    si = (si > 1e-12) ? std::sqrt(2.0) * n / si : 1.0;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
    for (int r = 0; r < n; ++r) {
        const Point2 xp = sp * (basis.to_plane(scene[idx[r]]) - cp);
        const Point2 xi = si * (norm_img[idx[r]] - ci);
        a.row(2 * r) << -xp.x(), -xp.y(), -1.0, 0.0, 0.0, 0.0, xi.x() * xp.x(),
            xi.x() * xp.y(), xi.x();
        a.row(2 * r + 1) << 0.0, 0.0, 0.0, -xp.x(), -xp.y(), -1.0, xi.y() * xp.x(),
            xi.y() * xp.y(), xi.y();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hm;
    hm << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

    Eigen::Matrix3d ti_inv = Eigen::Matrix3d::Identity();
    ti_inv(0, 0) = ti_inv(1, 1) = 1.0 / si;
    ti_inv(0, 2) = ci.x();
    ti_inv(1, 2) = ci.y();
    Eigen::Matrix3d tp = Eigen::Matrix3d::Identity();
    tp(0, 0) = tp(1, 1) = sp;
    tp.block<2, 1>(0, 2) = -sp * cp;
    hm = ti_inv * hm * tp;

    const double norm12 = hm.col(0).norm() + hm.col(1).norm();
    if (norm12 < 1e-12) return out;
    double lambda = 2.0 / norm12;
    // The plane origin sits at lambda * h3 in the camera frame; demand it in
    // front of the camera to fix the overall sign.
    if (hm(2, 2) * lambda < 0.0) lambda = -lambda;

    const Eigen::Vector3d r1 = lambda * hm.col(0);
    const Eigen::Vector3d r2 = lambda * hm.col(1);
    const Eigen::Vector3d t = lambda * hm.col(2);
    if (!(t.z() > 0.0)) return out;
    Eigen::Matrix3d rot_raw;
    rot_raw.col(0) = r1;
    rot_raw.col(1) = r2;
    rot_raw.col(2) = r1.cross(r2);
    const Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(rot_raw,
                                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d rot = rsvd.matrixU() * rsvd.matrixV().transpose();
    if (rot.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        rot = rsvd.matrixU() * flip * rsvd.matrixV().transpose();
    }

    RigidTransform cam_from_plane;
    cam_from_plane.rotation = Eigen::Quaterniond(rot).normalized();
    cam_from_plane.translation = t;
    const RigidTransform plane_from_scene = basis.plane_from_scene();
    out.push_back(compose(cam_from_plane, plane_from_scene));

    // Reflection twin: mirror the plane normal about the viewing ray of the
    // plane origin, keeping the origin fixed.  Degenerates to the first
    // candidate for a fronto-parallel plane.
    const Eigen::Vector3d d = t.normalized();
    const Eigen::Vector3d nrm = rot.col(2);
    const Eigen::Vector3d n2 = 2.0 * nrm.dot(d) * d - nrm;
    const Eigen::Vector3d axis = nrm.cross(n2);
    if (axis.norm() > 1e-9) {
        const double ang = std::atan2(axis.norm(), nrm.dot(n2));
        const Eigen::Matrix3d rot2 =
            Eigen::AngleAxisd(ang, axis.normalized()).toRotationMatrix() * rot;
        // Re-solve the translation linearly: cross(x_i, rot2 * X_i + t) = 0.
        Eigen::MatrixXd aa(3 * n, 3);
        Eigen::VectorXd bb(3 * n);
        for (int r = 0; r < n; ++r) {
            const Point2 xp = basis.to_plane(scene[idx[r]]) ;
            const Eigen::Vector3d xw(xp.x(), xp.y(), 0.0);
            const Eigen::Vector3d xi(norm_img[idx[r]].x(), norm_img[idx[r]].y(), 1.0);
            const Eigen::Matrix3d sk = skew(xi);
            aa.block<3, 3>(3 * r, 0) = sk;
            bb.segment<3>(3 * r) = -sk * (rot2 * xw);
        }
        const Eigen::Vector3d t2 =
            aa.colPivHouseholderQr().solve(bb);
        if (t2.z() > 0.0) {
            RigidTransform cfp2;
            cfp2.rotation = Eigen::Quaterniond(rot2).normalized();
            cfp2.translation = t2;
            out.push_back(compose(cfp2, plane_from_scene));
        }
    }
    return out;
}

// Pooling the same marker over several frames duplicates scene points; a
// minimal sample that contains such duplicates under-determines the model
// (and its least-squares polish can still sneak under the inlier gate), so
// samples must be distinct by value, not just by index.
inline bool sample_has_duplicate_points(std::span<const Point3> scene,
                                        std::span<const int> idx) {
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = i + 1; j < idx.size(); ++j)
            if ((scene[idx[i]] - scene[idx[j]]).norm() < 1e-9) return true;
    return false;
}

// Geometric health of a candidate sample.
inline bool sample_collinear(std::span<const Point3> scene, std::span<const int> idx) {
    Point3 c = Point3::Zero();
    for (int i : idx) c += scene[i];
    c /= static_cast<double>(idx.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : idx) {
        const Point3 d = scene[i] - c;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const double top = eig.eigenvalues()(2);
    return top < 1e-12 || eig.eigenvalues()(1) < 1e-12 * top;
}

inline bool sample_coplanar(std::span<const Point3> scene, std::span<const int> idx,
                            double rel_tol = 1e-12) {
    Point3 c = Point3::Zero();
    for (int i : idx) c += scene[i];
    c /= static_cast<double>(idx.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : idx) {
        const Point3 d = scene[i] - c;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const double top = eig.eigenvalues()(2);
    return top < 1e-12 || eig.eigenvalues()(0) < rel_tol * top;
}

} // namespace detail

// Robust camera-from-scene pose from pooled correspondences.
//
// `detection_threshold` gates how many accepted marker sightings the set
// must contain before the solve is attempted at all.
inline PnPResult solve_pnp_robust(const CorrespondenceSet& c, const CameraIntrinsics& k,
                                  const RobustConfig& cfg, int detection_threshold = 10) {
    k.validate();
    if (c.scene_points.size() != c.image_points.size())
        throw ValidationError("pnp: scene/image point count mismatch");
    if (cfg.max_iterations < 1 || !(cfg.inlier_threshold_px > 0.0))
        throw ValidationError("pnp: malformed robust config");
    if (c.detection_count < detection_threshold)
        throw InsufficientDetectionsError("pnp: accepted detections below threshold");
    const int n = static_cast<int>(c.scene_points.size());
    if (n < 6) throw InsufficientDetectionsError("pnp: fewer than 6 correspondences");

    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    if (detail::sample_collinear(c.scene_points, all))
        throw DegenerateConfigurationError("pnp: scene points are collinear");
    const bool planar = detail::sample_coplanar(c.scene_points, all);

    // Ideal normalized coordinates for hypothesis generation only.
    std::vector<Point2> norm_img(n);
    for (int i = 0; i < n; ++i)
        norm_img[i] = {(c.image_points[i].x() - k.cx) / k.fx,
                       (c.image_points[i].y() - k.cy) / k.fy};

    const int sample_size = planar ? 4 : 6;
    const auto score = [&](const RigidTransform& pose, std::vector<bool>& mask) {
        int count = 0;
        double ss = 0.0;
        mask.assign(n, false);
        for (int i = 0; i < n; ++i) {
            const double e =
                detail::reprojection_residual(k, pose, c.scene_points[i], c.image_points[i])
                    .norm();
            if (e <= cfg.inlier_threshold_px) {
                mask[i] = true;
                ++count;
                ss += e * e;
            }
        }
        return std::pair<int, double>(count, count ? std::sqrt(ss / count) : 0.0);
    };

    Rng rng = Rng(cfg.seed).stream("pnp");
    RigidTransform best_pose;
    std::vector<bool> best_mask;
    int best_count = 0;
    double best_rms = 0.0;
    int budget = cfg.max_iterations;
    int examined = 0;

    std::vector<int> sample(sample_size);
    std::vector<bool> mask;
    for (int it = 0; it < budget; ++it) {
        ++examined;
        // Distinct random sample.
        for (int s = 0; s < sample_size;) {
            const int cand = static_cast<int>(rng.uniform_index(n));
            bool dup = false;
            for (int t = 0; t < s; ++t) dup = dup || sample[t] == cand;
            if (!dup) sample[s++] = cand;
        }
        if (detail::sample_has_duplicate_points(c.scene_points, sample)) continue;
        if (detail::sample_collinear(c.scene_points, sample)) continue;

        std::vector<RigidTransform> hypotheses;
        if (planar || detail::sample_coplanar(c.scene_points, sample)) {
            hypotheses = detail::poses_from_homography(c.scene_points, norm_img, sample);
        } else {
            if (auto h = detail::pose_from_dlt(c.scene_points, norm_img, sample))
                hypotheses.push_back(*h);
            // A nearly flat sample leaves the DLT ill-conditioned; offer the
            // planar decomposition as an extra candidate and let the scores
            // decide.
            if (detail::sample_coplanar(c.scene_points, sample, 1e-8)) {
                const auto hh = detail::poses_from_homography(c.scene_points, norm_img, sample);
                hypotheses.insert(hypotheses.end(), hh.begin(), hh.end());
            }
        }

        for (RigidTransform& h : hypotheses) {
            h = detail::refine_pose_lm(h, k, c.scene_points, c.image_points, sample, 8);
            const auto [count, rms] = score(h, mask);
            if (count > best_count || (count == best_count && count > 0 && rms < best_rms)) {
                best_count = count;
                best_rms = rms;
                best_pose = h;
                best_mask = mask;
            }
        }
        if (best_count > 0) {
            const int needed = detail::ransac_iterations_needed(
                static_cast<double>(best_count) / n, sample_size, cfg.confidence,
                cfg.max_iterations);
            budget = std::min(budget, std::max(needed, it + 1));
        }
    }

    const int min_consensus = planar ? 4 : 6;
    if (best_count < min_consensus)
        throw NoConsensusError("pnp: no consensus within the iteration budget");

    // Polish on the consensus set, re-deciding inliers until stable.  The
    // polished model is only kept when it does not lose consensus.
    for (int round = 0; round < 3; ++round) {
        std::vector<int> in;
        for (int i = 0; i < n; ++i)
            if (best_mask[i]) in.push_back(i);
        const RigidTransform refined =
            detail::refine_pose_lm(best_pose, k, c.scene_points, c.image_points, in, 40);
        const auto [count, rms] = score(refined, mask);
        if (count > best_count || (count == best_count && rms <= best_rms)) {
            const bool stable = (mask == best_mask);
            best_pose = refined;
            best_count = count;
            best_rms = rms;
            best_mask = mask;
            if (stable) break;
        } else {
            break;
        }
    }

    PnPResult out;
    out.camera_from_scene = best_pose;
    out.inliers = best_mask;
    out.rms_px = best_rms;
    out.iterations = examined;
    return out;
}

// End-to-end registration: pool detections over the frame window, gate on
// the detection count, solve.
inline PnPResult register_scene(std::span<const DetectionBatch> frames, const FiducialMap& map,
                                const CameraIntrinsics& k, const RobustConfig& cfg,
                                int frame_threshold = 10, int detection_threshold = 10) {
    const CorrespondenceSet c = accumulate(frames, map, frame_threshold);
    return solve_pnp_robust(c, k, cfg, detection_threshold);
}

} // namespace ghost
