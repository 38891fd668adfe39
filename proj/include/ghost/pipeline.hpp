#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ghost/camera.hpp"
#include "ghost/errors.hpp"
#include "ghost/geometry.hpp"
#include "ghost/instrument.hpp"

// Demonstration pipeline: recording instrument trajectories in the scene
// frame and replaying them as camera overlays in a different session.
//
// Frames and session constants:
//   s          scene frame (fiducial-defined, setup-independent)
//   c          a camera frame; "view" below is always the current camera
//   ecm        the camera-arm end-effector the cameras are mounted on
//   base       the robot base the camera arm hangs from
//
//   registration_*  cTs at registration time (one per camera)
//   handeye_*       ecmTc, the fixed camera mount (one per camera)
//   ecm_initial     baseTecm at registration time
//   correction[id]  Tcor, per-instrument rigid correction expressed in the
//                   registration-epoch left-camera frame
//
// The robot reports instrument poses in the current ecm frame.  Recording
// undoes the whole chain so samples land in the scene frame:
//
//   sTpsm = inv(reg_l) * Tcor * inv(handeye_l) * ecm_motion * reported   (record)
//
// and a later session (with its own registration) maps scene back to its
// current camera:
//
//   cTs = inv(handeye) * inv(ecm_motion) * handeye * reg                 (view)
//
// Both use ecm_motion = inv(ecm_initial) * current_ecm, the camera-arm
// motion since registration, so camera travel between registration and use
// cancels out.

namespace ghost {

enum class CameraSide { left, right };

struct SessionState {
    RigidTransform registration_left;  // lcTs at registration time
    RigidTransform registration_right; // rcTs at registration time
    RigidTransform handeye_left;       // ecmT_lc
    RigidTransform handeye_right;      // ecmT_rc
    RigidTransform ecm_initial;        // baseTecm at registration time
    std::map<std::string, RigidTransform> correction; // per instrument id

    const RigidTransform& registration(CameraSide side) const {
        return side == CameraSide::left ? registration_left : registration_right;
    }
    const RigidTransform& handeye(CameraSide side) const {
        return side == CameraSide::left ? handeye_left : handeye_right;
    }
    // Missing correction entries mean "not fitted yet": identity.
    RigidTransform correction_for(const std::string& instrument_id) const {
        const auto it = correction.find(instrument_id);
        return it == correction.end() ? RigidTransform::identity() : it->second;
    }
};

// Camera-arm motion since registration: maps current-ecm coordinates into
// registration-epoch ecm coordinates.
inline RigidTransform ecm_motion(const SessionState& state, const RigidTransform& current_ecm) {
    return compose(invert(state.ecm_initial), current_ecm);
}

struct TrajectorySample {
    double t = 0.0;           // seconds since recording start
    RigidTransform pose;      // sTpsm
    JointState joints;
    std::string instrument_id;
};

// One recorded instrument pose, mapped from the robot report into the scene
// frame through the left-camera chain.
inline TrajectorySample record_sample(const SessionState& state,
                                      const RigidTransform& current_ecm,
                                      const RigidTransform& reported_psm,
                                      const JointState& joints, double t,
                                      const std::string& instrument_id) {
    const RigidTransform m = ecm_motion(state, current_ecm);
    TrajectorySample s;
    s.t = t;
    s.pose = compose(
        invert(state.registration_left),
        compose(state.correction_for(instrument_id),
                compose(invert(state.handeye_left), compose(m, reported_psm))));
    s.joints = joints;
    s.instrument_id = instrument_id;
    return s;
}

struct Trajectory {
    SessionState session; // the state the samples were recorded under
    std::vector<TrajectorySample> samples;

    // Timestamps must be strictly increasing.
    void append(TrajectorySample s) {
        if (!samples.empty() && !(s.t > samples.back().t))
            throw ValidationError("trajectory: non-monotone timestamp");
        samples.push_back(std::move(s));
    }

    double t_begin() const {
        if (samples.empty()) throw ValidationError("trajectory: empty");
        return samples.front().t;
    }
    double t_end() const {
        if (samples.empty()) throw ValidationError("trajectory: empty");
        return samples.back().t;
    }
};

// Current camera pose in the scene frame (maps scene points into the view).
inline RigidTransform view_to_scene(const SessionState& state,
                                    const RigidTransform& current_ecm, CameraSide side) {
    const RigidTransform m = ecm_motion(state, current_ecm);
    return compose(invert(state.handeye(side)),
                   compose(invert(m), compose(state.handeye(side), state.registration(side))));
}

// Overlay vertices of one component, normalized device coordinates.
struct OverlayProjection {
    std::vector<Point2> jaw_left, jaw_right, body, shaft;

    size_t total() const {
        return jaw_left.size() + jaw_right.size() + body.size() + shaft.size();
    }
};

// Projects the instrument proxy geometry for one sample into the requested
// camera.  Vertices outside the view frustum are dropped (never clamped), so
// partial visibility yields partial lists.
inline OverlayProjection render_overlay(const TrajectorySample& sample,
                                        const SessionState& state,
                                        const RigidTransform& current_ecm,
                                        const InstrumentModel& model,
                                        const CameraIntrinsics& intrinsics, CameraSide side) {
    const ComponentPoses comps = place_components(sample.pose, sample.joints, model);
    const RigidTransform view = view_to_scene(state, current_ecm, side);
    const Eigen::Matrix4d render = build_render_matrix(intrinsics);
    const Frustum frustum = Frustum::from_intrinsics(intrinsics);

    const auto project_mesh = [&](const RigidTransform& scene_from_local,
                                  const std::vector<Point3>& mesh, std::vector<Point2>& out) {
        const RigidTransform view_from_local = compose(view, scene_from_local);
        for (const Point3& v : mesh) {
            const Point3 p = transform_point(view_from_local, v);
            if (!clip_visible(frustum, p)) continue;
            out.push_back(project_ndc(render, p).head<2>());
        }
    };

    OverlayProjection out;
    project_mesh(comps.jaw_left, model.jaw_mesh, out.jaw_left);
    project_mesh(comps.jaw_right, model.jaw_mesh, out.jaw_right);
    project_mesh(comps.body, model.body_mesh, out.body);
    project_mesh(comps.shaft, model.shaft_mesh, out.shaft);
    return out;
}

// Time-scaled playback lookup: maps a playback clock (seconds since playback
// start) onto the recorded timeline at `speed` and interpolates the
// bracketing samples (slerp rotation, lerp translation and joints).  The
// clock clamps at both ends.
inline TrajectorySample playback_iter(const Trajectory& traj, double speed, double clock_s) {
    if (traj.samples.empty()) throw ValidationError("playback: empty trajectory");
    if (!(speed > 0.0)) throw ValidationError("playback: speed must be positive");

    const double t =
        std::clamp(traj.t_begin() + clock_s * speed, traj.t_begin(), traj.t_end());
    const auto& s = traj.samples;
    auto hi = std::lower_bound(s.begin(), s.end(), t,
                               [](const TrajectorySample& a, double v) { return a.t < v; });
    if (hi == s.begin()) return s.front();
    if (hi == s.end()) return s.back();
    const auto lo = hi - 1;

    const double u = (t - lo->t) / (hi->t - lo->t);
    TrajectorySample out;
    out.t = t;
    out.pose = interpolate(lo->pose, hi->pose, u);
    out.joints.q6_rad = (1.0 - u) * lo->joints.q6_rad + u * hi->joints.q6_rad;
    out.joints.q7_rad = (1.0 - u) * lo->joints.q7_rad + u * hi->joints.q7_rad;
    out.joints.jaw_rad = (1.0 - u) * lo->joints.jaw_rad + u * hi->joints.jaw_rad;
    out.instrument_id = lo->instrument_id;
    return out;
}

} // namespace ghost
