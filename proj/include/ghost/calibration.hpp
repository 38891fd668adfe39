#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "ghost/errors.hpp"
#include "ghost/geometry.hpp"
#include "ghost/random.hpp"
#include "ghost/robust.hpp"

// Hand-eye calibration and rigid point-set fitting.
//
// Hand-eye: given synchronized pose streams of the camera (cTs_i, from
// registration re-solves) and of the robot arm that carries it (baseTe_i,
// from kinematics), relative motions
//
//     a_i = cTs_i * inv(cTs_{i+1}),      b_i = inv(baseTe_i) * baseTe_{i+1}
//
// satisfy a_i * x = x * b_i for the fixed mounting transform x.  solve_handeye
// recovers x with the dual-quaternion linear formulation (null-space of a
// stacked 6n x 8 system, quadratic root for the scalar mix), wrapped in a
// RANSAC loop whose inlier test is screw congruence of a_i * x against
// x * b_i.  The rotation axes of the motion set must span more than a single
// direction, otherwise the translation of x is unobservable.
//
// Point-set fitting: kabsch_umeyama computes the least-squares rigid motion
// (no scale) between paired point clouds; fit_correction wraps it in RANSAC
// so a few gross outlier pairs cannot poison the fit.

namespace ghost {

struct MotionPair {
    RigidTransform a; // camera-side motion
    RigidTransform b; // robot-side motion
};

// Builds relative-motion pairs from two index-aligned pose streams.
inline std::vector<MotionPair> build_motion_pairs(std::span<const RigidTransform> camera_poses,
                                                  std::span<const RigidTransform> robot_poses) {
    if (camera_poses.size() != robot_poses.size())
        throw ValidationError("motion pairs: pose streams differ in length");
    if (camera_poses.size() < 2)
        throw ValidationError("motion pairs: need at least two stations");
    std::vector<MotionPair> out;
    out.reserve(camera_poses.size() - 1);
    for (size_t i = 0; i + 1 < camera_poses.size(); ++i) {
        MotionPair p;
        p.a = compose(camera_poses[i], invert(camera_poses[i + 1]));
        p.b = compose(invert(robot_poses[i]), robot_poses[i + 1]);
        out.push_back(p);
    }
    return out;
}

struct HandEyeResult {
    RigidTransform x;
    std::vector<bool> inliers;      // per motion pair
    double rot_residual_deg = 0.0;  // RMS screw-congruence residuals (inliers)
    double trans_residual_mm = 0.0;
    int iterations = 0;
};

namespace detail {

// Linear dual-quaternion solve over the given subset of pairs.  Each pair
// contributes six rows built from the rotation/dual vector parts; the
// solution lives in the two-dimensional null space, mixed by the root of a
// scalar quadratic that restores the unit-norm constraints.
inline std::optional<RigidTransform> solve_handeye_linear(std::span<const MotionPair> pairs,
                                                          std::span<const int> idx) {
    const int n = static_cast<int>(idx.size());
    if (n < 2) return std::nullopt;

    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(6 * n, 8);
    for (int r = 0; r < n; ++r) {
        DualQuaternion da = to_dual_quaternion(pairs[idx[r]].a);
        DualQuaternion db = to_dual_quaternion(pairs[idx[r]].b);
        // Congruent screws have equal scalar parts; fixing both signs to a
        // non-negative scalar keeps corresponding quaternions aligned.
        if (da.real.w() < 0.0) {
            da.real.coeffs() = -da.real.coeffs();
            da.dual.coeffs() = -da.dual.coeffs();
        }
        if (db.real.w() < 0.0) {
            db.real.coeffs() = -db.real.coeffs();
            db.dual.coeffs() = -db.dual.coeffs();
        }
        const Eigen::Vector3d va = da.real.vec(), vb = db.real.vec();
        const Eigen::Vector3d wa = da.dual.vec(), wb = db.dual.vec();
        t.block<3, 1>(6 * r, 0) = va - vb;
        t.block<3, 3>(6 * r, 1) = skew(va + vb);
        t.block<3, 1>(6 * r + 3, 0) = wa - wb;
        t.block<3, 3>(6 * r + 3, 1) = skew(wa + wb);
        t.block<3, 1>(6 * r + 3, 4) = va - vb;
        t.block<3, 3>(6 * r + 3, 5) = skew(va + vb);
    }

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(t, Eigen::ComputeFullV);
    // Ideal data leaves a two-dimensional null space spanned by the last two
    // right singular vectors.
    const Eigen::Matrix<double, 8, 1> v7 = svd.matrixV().col(6);
    const Eigen::Matrix<double, 8, 1> v8 = svd.matrixV().col(7);
    const Eigen::Vector4d u1 = v7.head<4>(), v1 = v7.tail<4>();
    const Eigen::Vector4d u2 = v8.head<4>(), v2 = v8.tail<4>();

    // x = s*v7 + v8 with the unit constraints |q|=1, dot(q, q') = 0:
    //   dot(u1,v1) s^2 + (dot(u1,v2)+dot(u2,v1)) s + dot(u2,v2) = 0
    const double qa = u1.dot(v1);
    const double qb = u1.dot(v2) + u2.dot(v1);
    const double qc = u2.dot(v2);

    std::vector<double> roots;
    if (std::abs(qa) < 1e-15) {
        if (std::abs(qb) > 1e-15) roots.push_back(-qc / qb);
    } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) {
            // Numerically grazing zero: take the extremum.
            roots.push_back(-qb / (2.0 * qa));
        } else {
            const double sq = std::sqrt(disc);
            roots.push_back((-qb + sq) / (2.0 * qa));
            roots.push_back((-qb - sq) / (2.0 * qa));
        }
    }
    if (roots.empty()) roots.push_back(0.0);

    // Pick the root maximizing the norm term s^2 u1.u1 + 2 s u1.u2 + u2.u2.
    double best_val = -1.0, best_s = 0.0;
    for (double s : roots) {
        const double val = s * s * u1.dot(u1) + 2.0 * s * u1.dot(u2) + u2.dot(u2);
        if (val > best_val) {
            best_val = val;
            best_s = s;
        }
    }
    if (best_val <= 1e-15) return std::nullopt;

    const double lambda2 = 1.0 / std::sqrt(best_val);
    const double lambda1 = best_s * lambda2;
    const Eigen::Matrix<double, 8, 1> q = lambda1 * v7 + lambda2 * v8;

    DualQuaternion dq;
    dq.real = Eigen::Quaterniond(q(0), q(1), q(2), q(3));
    dq.dual = Eigen::Quaterniond(q(4), q(5), q(6), q(7));
    const double norm = dq.real.norm();
    if (norm < 1e-12) return std::nullopt;
    dq.real.coeffs() /= norm;
    dq.dual.coeffs() /= norm;
    // Project out any residual non-orthogonality before decoding.
    const double mix = quat_dot(dq.real, dq.dual);
    dq.dual.coeffs() -= mix * dq.real.coeffs();

    return from_dual_quaternion(dq);
}

// Screw-congruence residual of one motion pair under a candidate x.
struct ScrewResidual {
    double rot_deg;
    double trans_mm;
};

inline ScrewResidual handeye_residual(const MotionPair& p, const RigidTransform& x) {
    const RigidTransform lhs = compose(p.a, x);
    const RigidTransform rhs = compose(x, p.b);
    const RigidTransform d = compose(invert(lhs), rhs);
    return {rotation_angle_deg(d), d.translation.norm()};
}

// Rotation angle (deg) and axis of a motion; angle below `min_deg` yields no
// usable axis.
inline std::optional<Eigen::Vector3d> rotation_axis(const RigidTransform& t,
                                                    double min_deg = 0.25) {
    const Eigen::AngleAxisd aa(t.rotation);
    if (deg_from_rad(std::abs(aa.angle())) < min_deg) return std::nullopt;
    return aa.axis();
}

// Largest pairwise axis separation, sign-insensitive (an axis and its
// negation describe the same rotation family).
inline double axis_spread_deg(std::span<const Eigen::Vector3d> axes) {
    double best = 0.0;
    for (size_t i = 0; i < axes.size(); ++i)
        for (size_t j = i + 1; j < axes.size(); ++j) {
            const double c = std::clamp(std::abs(axes[i].dot(axes[j])), 0.0, 1.0);
            best = std::max(best, deg_from_rad(std::acos(c)));
        }
    return best;
}

} // namespace detail

// Robust hand-eye solve over relative-motion pairs: a_i * x = x * b_i.
inline HandEyeResult solve_handeye(std::span<const MotionPair> pairs, const RobustConfig& cfg) {
    const int n = static_cast<int>(pairs.size());
    if (cfg.max_iterations < 1 || !(cfg.rot_threshold_deg > 0.0) ||
        !(cfg.trans_threshold_mm > 0.0))
        throw ValidationError("handeye: malformed robust config");

    if (n < 2) throw InsufficientDataError("handeye: need at least two motion pairs");

    // Observability screen on the full motion set.  Motions without usable
    // rotation (static or pure-translation intervals) cannot constrain the
    // hand-eye translation, and neither can a set of near-parallel axes.
    std::vector<Eigen::Vector3d> axes;
    std::vector<int> usable;
    for (int i = 0; i < n; ++i)
        if (auto ax = detail::rotation_axis(pairs[i].a)) {
            axes.push_back(*ax);
            usable.push_back(i);
        }
    if (static_cast<int>(usable.size()) < 2)
        throw UnobservableTranslationError(
            "handeye: fewer than two rotating motions, translation unobservable");
    if (detail::axis_spread_deg(axes) < cfg.min_axis_spread_deg)
        throw UnobservableTranslationError(
            "handeye: rotation axes nearly parallel, translation unobservable");

    const int sample_size = std::min<int>(3, static_cast<int>(usable.size()));
    Rng rng = Rng(cfg.seed).stream("handeye");

    const auto score = [&](const RigidTransform& x, std::vector<bool>& mask) {
        int count = 0;
        double rr = 0.0, tt = 0.0;
        mask.assign(n, false);
        for (int i = 0; i < n; ++i) {
            const auto res = detail::handeye_residual(pairs[i], x);
            if (res.rot_deg <= cfg.rot_threshold_deg && res.trans_mm <= cfg.trans_threshold_mm) {
                mask[i] = true;
                ++count;
                rr += res.rot_deg * res.rot_deg;
                tt += res.trans_mm * res.trans_mm;
            }
        }
        const double rms =
            count ? std::sqrt(rr / count) + std::sqrt(tt / count) : 0.0;
        return std::pair<int, double>(count, rms);
    };

    RigidTransform best_x;
    std::vector<bool> best_mask;
    int best_count = 0;
    double best_rms = 0.0;
    int budget = cfg.max_iterations;
    int examined = 0;
    std::vector<bool> mask;
    std::vector<int> sample(sample_size);

    for (int it = 0; it < budget; ++it) {
        ++examined;
        for (int s = 0; s < sample_size;) {
            const int cand = usable[rng.uniform_index(usable.size())];
            bool dup = false;
            for (int t = 0; t < s; ++t) dup = dup || sample[t] == cand;
            if (!dup) sample[s++] = cand;
        }
        // The sample itself must excite at least two distinct axes.
        std::vector<Eigen::Vector3d> sample_axes;
        for (int i : sample)
            if (auto ax = detail::rotation_axis(pairs[i].a)) sample_axes.push_back(*ax);
        if (sample_axes.size() < 2 ||
            detail::axis_spread_deg(sample_axes) < cfg.min_axis_spread_deg)
            continue;

        const auto x = detail::solve_handeye_linear(pairs, sample);
        if (!x) continue;
        const auto [count, rms] = score(*x, mask);
        if (count > best_count || (count == best_count && count > 0 && rms < best_rms)) {
            best_count = count;
            best_rms = rms;
            best_x = *x;
            best_mask = mask;
        }
        if (best_count > 0) {
            const int needed = detail::ransac_iterations_needed(
                static_cast<double>(best_count) / n, sample_size, cfg.confidence,
                cfg.max_iterations);
            budget = std::min(budget, std::max(needed, it + 1));
        }
    }

    const int min_consensus = std::min<int>(3, static_cast<int>(usable.size()));
    if (best_count < min_consensus)
        throw NoConsensusError("handeye: no consensus within the iteration budget");

    // Refit on the consensus set, keeping the refit only if it does not lose
    // consensus; re-decide inliers until stable.
    for (int round = 0; round < 3; ++round) {
        std::vector<int> in;
        for (int i = 0; i < n; ++i)
            if (best_mask[i]) in.push_back(i);
        const auto refined = detail::solve_handeye_linear(pairs, in);
        if (!refined) break;
        const auto [count, rms] = score(*refined, mask);
        if (count > best_count || (count == best_count && rms <= best_rms)) {
            const bool stable = (mask == best_mask);
            best_x = *refined;
            best_count = count;
            best_rms = rms;
            best_mask = mask;
            if (stable) break;
        } else {
            break;
        }
    }

    HandEyeResult out;
    out.x = best_x;
    out.inliers = best_mask;
    out.iterations = examined;
    double rr = 0.0, tt = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
        if (!best_mask[i]) continue;
        const auto res = detail::handeye_residual(pairs[i], best_x);
        rr += res.rot_deg * res.rot_deg;
        tt += res.trans_mm * res.trans_mm;
        ++count;
    }
    out.rot_residual_deg = count ? std::sqrt(rr / count) : 0.0;
    out.trans_residual_mm = count ? std::sqrt(tt / count) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Rigid point-set fitting

// Paired points: `reported` is the cloud to be moved onto `actual`.
struct PointPairSet {
    std::vector<Point3> actual;
    std::vector<Point3> reported;

    void validate() const {
        if (actual.size() != reported.size())
            throw ValidationError("point pairs: size mismatch");
    }
};

namespace detail {

// Least-squares rigid motion over a subset: argmin sum |actual - (R*reported + t)|^2
// with det(R) = +1 enforced (no scale, no reflection).
inline RigidTransform kabsch_umeyama_subset(const PointPairSet& pairs,
                                            std::span<const int> idx) {
    const int n = static_cast<int>(idx.size());
    Point3 ca = Point3::Zero(), cr = Point3::Zero();
    for (int i : idx) {
        ca += pairs.actual[i];
        cr += pairs.reported[i];
    }
    ca /= n;
    cr /= n;

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (int i : idx) h += (pairs.reported[i] - cr) * (pairs.actual[i] - ca).transpose();

    RigidTransform out;
    if (h.norm() < 1e-12) {
        // Zero-spread clouds (all pairs coincident): rotation is arbitrary,
        // return the pure translation between the centroids.
        out.translation = ca - cr;
        return out;
    }

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
    out.rotation = Eigen::Quaterniond(r).normalized();
    out.translation = ca - out.rotation * cr;
    return out;
}

inline double pair_residual(const PointPairSet& pairs, const RigidTransform& t, int i) {
    return (pairs.actual[i] - transform_point(t, pairs.reported[i])).norm();
}

inline double pair_rms(const PointPairSet& pairs, const RigidTransform& t,
                       std::span<const int> idx) {
    double ss = 0.0;
    for (int i : idx) {
        const double e = pair_residual(pairs, t, i);
        ss += e * e;
    }
    return idx.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(idx.size()));
}

inline bool points_collinear(std::span<const Point3> pts, std::span<const int> idx) {
    Point3 c = Point3::Zero();
    for (int i : idx) c += pts[i];
    c /= static_cast<double>(idx.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : idx) {
        const Point3 d = pts[i] - c;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const double top = eig.eigenvalues()(2);
    return top < 1e-12 || eig.eigenvalues()(1) < 1e-12 * top;
}

} // namespace detail

// Whole-set least-squares rigid fit (no outlier handling).
inline RigidTransform kabsch_umeyama(const PointPairSet& pairs) {
    pairs.validate();
    const int n = static_cast<int>(pairs.actual.size());
    if (n < 3) throw DegenerateConfigurationError("kabsch: need at least three pairs");
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;

    // Zero-spread clouds are legal (pure translation); otherwise demand
    // non-collinear support so the rotation is determined.
    Point3 c = Point3::Zero();
    for (const Point3& p : pairs.reported) c += p;
    c /= n;
    double spread = 0.0;
    for (const Point3& p : pairs.reported) spread = std::max(spread, (p - c).norm());
    if (spread > 1e-12 && detail::points_collinear(pairs.reported, all))
        throw DegenerateConfigurationError("kabsch: reported points are collinear");

    return detail::kabsch_umeyama_subset(pairs, all);
}

struct CorrectionFit {
    RigidTransform correction;        // maps reported points onto actual points
    std::vector<bool> inliers;        // per pair
    std::vector<double> residuals_mm; // per pair, under the final fit
    double inlier_rms_mm = 0.0;
    int iterations = 0;
};

// Robust rigid correction between reported and actual point sets.  Minimal
// samples of three non-collinear pairs are drawn (exhaustively when the
// budget allows, randomly otherwise); the inlier gate is
// cfg.trans_threshold_mm on the per-pair residual.
inline CorrectionFit fit_correction(const PointPairSet& pairs, const RobustConfig& cfg) {
    pairs.validate();
    const int n = static_cast<int>(pairs.actual.size());
    if (n < 3) throw InsufficientDataError("fit_correction: need at least three pairs");
    if (cfg.max_iterations < 1 || !(cfg.trans_threshold_mm > 0.0))
        throw ValidationError("fit_correction: malformed robust config");
    std::vector<int> all_idx(n);
    for (int i = 0; i < n; ++i) all_idx[i] = i;
    double spread = 0.0;
    {
        Point3 c = Point3::Zero();
        for (const Point3& p : pairs.reported) c += p;
        c /= n;
        for (const Point3& p : pairs.reported) spread = std::max(spread, (p - c).norm());
        // Zero-spread clouds are exempt from the collinearity gate: identical
        // points admit the pure centroid translation.
        if (spread > 1e-12 && detail::points_collinear(pairs.reported, all_idx))
            throw DegenerateConfigurationError("fit_correction: reported points collinear");
    }

    const auto score = [&](const RigidTransform& t, std::vector<bool>& mask) {
        int count = 0;
        double ss = 0.0;
        mask.assign(n, false);
        for (int i = 0; i < n; ++i) {
            const double e = detail::pair_residual(pairs, t, i);
            if (e <= cfg.trans_threshold_mm) {
                mask[i] = true;
                ++count;
                ss += e * e;
            }
        }
        return std::pair<int, double>(count, count ? std::sqrt(ss / count) : 0.0);
    };

    const auto finish = [&](const RigidTransform& t, const std::vector<bool>& mask_in,
                            int iterations) {
        CorrectionFit out;
        out.correction = t;
        out.inliers = mask_in;
        out.iterations = iterations;
        out.residuals_mm.resize(n);
        double ss = 0.0;
        int count = 0;
        for (int i = 0; i < n; ++i) {
            out.residuals_mm[i] = detail::pair_residual(pairs, t, i);
            if (mask_in[i]) {
                ss += out.residuals_mm[i] * out.residuals_mm[i];
                ++count;
            }
        }
        out.inlier_rms_mm = count ? std::sqrt(ss / count) : 0.0;
        return out;
    };

    if (spread <= 1e-12) {
        // Degenerate-by-design input: no rotation information, fit the
        // centroid translation over everything.
        const RigidTransform t = detail::kabsch_umeyama_subset(pairs, all_idx);
        std::vector<bool> mask;
        score(t, mask);
        return finish(t, mask, 1);
    }

    RigidTransform best_t;
    std::vector<bool> best_mask;
    int best_count = 0;
    double best_rms = 0.0;
    int examined = 0;
    std::vector<bool> mask;

    const auto consider = [&](std::span<const int> sample) {
        if (detail::points_collinear(pairs.reported, sample)) return;
        ++examined;
        const RigidTransform t = detail::kabsch_umeyama_subset(pairs, sample);
        const auto [count, rms] = score(t, mask);
        if (count > best_count || (count == best_count && count > 0 && rms < best_rms)) {
            best_count = count;
            best_rms = rms;
            best_t = t;
            best_mask = mask;
        }
    };

    const long combinations = static_cast<long>(n) * (n - 1) * (n - 2) / 6;
    if (combinations <= cfg.max_iterations) {
        // Small sets: enumerate every 3-subset deterministically.
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int k = j + 1; k < n; ++k) {
                    const std::array<int, 3> sample{i, j, k};
                    consider(std::span<const int>(sample.data(), 3));
                }
    } else {
        Rng rng = Rng(cfg.seed).stream("fit_correction");
        std::array<int, 3> sample{};
        for (int it = 0; it < cfg.max_iterations; ++it) {
            for (int s = 0; s < 3;) {
                const int cand = static_cast<int>(rng.uniform_index(n));
                bool dup = false;
                for (int t = 0; t < s; ++t) dup = dup || sample[t] == cand;
                if (!dup) sample[s++] = cand;
            }
            consider(std::span<const int>(sample.data(), 3));
        }
    }

    if (best_count < 3)
        throw NoConsensusError("fit_correction: no consensus within the iteration budget");

    // Consensus refit; keep it only when it does not lose consensus.
    for (int round = 0; round < 3; ++round) {
        std::vector<int> in;
        for (int i = 0; i < n; ++i)
            if (best_mask[i]) in.push_back(i);
        const RigidTransform refit = detail::kabsch_umeyama_subset(pairs, in);
        const auto [count, rms] = score(refit, mask);
        if (count > best_count || (count == best_count && rms <= best_rms)) {
            const bool stable = (mask == best_mask);
            best_t = refit;
            best_count = count;
            best_rms = rms;
            best_mask = mask;
            if (stable) break;
        } else {
            break;
        }
    }

    return finish(best_t, best_mask, examined);
}

} // namespace ghost
