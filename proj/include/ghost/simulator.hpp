#pragma once

// Synthetic ground-truth rig standing in for the physical robot: a fiducial
// scene, true camera-arm and tool trajectories, per-camera hand-eye mounts,
// and a kinematic error term.  Observations (marker detections, reported
// tool poses) are generated from the truth plus a seeded noise model, the
// full pipeline runs against them, and the evaluators score every stage
// against the truth the estimates never saw.
//
// All randomness derives from NoiseSpec::seed through named streams, so a
// scenario is bit-reproducible and adding one stage never perturbs the
// draws of another.

#include <bit>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ghost/calibration.hpp"
#include "ghost/camera.hpp"
#include "ghost/io.hpp"
#include "ghost/pipeline.hpp"
#include "ghost/random.hpp"
#include "ghost/registration.hpp"

namespace ghost::sim {

// ---------------------------------------------------------------------------
// World truth.

struct Keyframe {
    double t = 0.0;
    RigidTransform pose;
};

struct JointKeyframe {
    double t = 0.0;
    JointState joints;
};

struct CameraRig {
    CameraIntrinsics intrinsics;
    RigidTransform handeye; // true mount, ECM body frame -> camera frame
};

namespace detail {

template <class Key>
void check_keys(const std::vector<Key>& keys, const char* what) {
    if (keys.empty()) throw ValidationError(std::string(what) + ": no keyframes");
    for (size_t i = 1; i < keys.size(); ++i)
        if (!(keys[i - 1].t < keys[i].t))
            throw ValidationError(std::string(what) + ": keyframe times must increase");
}

// Clamped piecewise interpolation over keyframes.
inline RigidTransform pose_at(const std::vector<Keyframe>& keys, double t) {
    if (t <= keys.front().t) return keys.front().pose;
    if (t >= keys.back().t) return keys.back().pose;
    size_t hi = 1;
    while (keys[hi].t < t) ++hi;
    const Keyframe& a = keys[hi - 1];
    const Keyframe& b = keys[hi];
    return interpolate(a.pose, b.pose, (t - a.t) / (b.t - a.t));
}

inline JointState joints_at(const std::vector<JointKeyframe>& keys, double t) {
    if (t <= keys.front().t) return keys.front().joints;
    if (t >= keys.back().t) return keys.back().joints;
    size_t hi = 1;
    while (keys[hi].t < t) ++hi;
    const JointKeyframe& a = keys[hi - 1];
    const JointKeyframe& b = keys[hi];
    const double u = (t - a.t) / (b.t - a.t);
    JointState j;
    j.q6_rad = a.joints.q6_rad + u * (b.joints.q6_rad - a.joints.q6_rad);
    j.q7_rad = a.joints.q7_rad + u * (b.joints.q7_rad - a.joints.q7_rad);
    j.jaw_rad = a.joints.jaw_rad + u * (b.joints.jaw_rad - a.joints.jaw_rad);
    return j;
}

} // namespace detail

struct WorldTruth {
    FiducialMap fiducials;
    RigidTransform base_from_scene;  // robot base <- scene
    std::vector<Keyframe> ecm_keys;  // base <- ECM body over time
    std::vector<Keyframe> tool_keys; // scene <- PSM over time (the true tool motion)
    std::vector<JointKeyframe> joint_keys;
    CameraRig left, right;
    std::map<std::string, RigidTransform> correction; // true kinematic error per instrument
    std::string instrument_id = "lnd";
    RigidTransform marker_mount; // PSM <- evaluation marker, as calibrated
    RigidTransform mount_error;  // extra mount misalignment on the *true* marker pose
    double frame_rate_hz = 30.0;

    void validate() const {
        fiducials.validate();
        detail::check_keys(ecm_keys, "world ecm trajectory");
        detail::check_keys(tool_keys, "world tool trajectory");
        detail::check_keys(joint_keys, "world joint trajectory");
        left.intrinsics.validate();
        right.intrinsics.validate();
        if (!(frame_rate_hz > 0.0)) throw ValidationError("world: frame rate must be positive");
        if (instrument_id.empty()) throw ValidationError("world: empty instrument id");
    }

    // The registration epoch: the session is registered against the first
    // camera-arm keyframe, and camera-arm motion is measured from it.
    double registration_time() const { return ecm_keys.front().t; }

    RigidTransform ecm_pose(double t) const { return detail::pose_at(ecm_keys, t); }
    RigidTransform tool_pose(double t) const { return detail::pose_at(tool_keys, t); }
    JointState joints_at(double t) const { return detail::joints_at(joint_keys, t); }

    const CameraRig& rig(CameraSide side) const {
        return side == CameraSide::left ? left : right;
    }

    RigidTransform camera_from_scene(CameraSide side, double t) const {
        return compose(invert(rig(side).handeye), compose(invert(ecm_pose(t)), base_from_scene));
    }

    double frame_time(int frame) const {
        return registration_time() + static_cast<double>(frame) / frame_rate_hz;
    }

    RigidTransform true_correction() const {
        const auto it = correction.find(instrument_id);
        return it == correction.end() ? RigidTransform::identity() : it->second;
    }
};

// ---------------------------------------------------------------------------
// Noise model.

struct OcclusionWindow {
    std::string label;
    int first_frame = 0;
    int last_frame = -1; // inclusive
};

struct NoiseSpec {
    double pixel_sigma_px = 0.0;
    double outlier_rate = 0.0;
    double outlier_magnitude_px = 0.0;
    double report_rot_sigma_deg = 0.0;
    double report_trans_sigma_mm = 0.0;
    std::vector<OcclusionWindow> occlusions;
    std::uint64_t seed = 0;

    void validate() const {
        if (pixel_sigma_px < 0.0 || outlier_magnitude_px < 0.0 ||
            report_rot_sigma_deg < 0.0 || report_trans_sigma_mm < 0.0)
            throw ValidationError("noise: sigmas must be non-negative");
        if (outlier_rate < 0.0 || outlier_rate > 1.0)
            throw ValidationError("noise: outlier rate must be in [0,1]");
    }

    static NoiseSpec none() { return {}; }

    // Noise levels representative of a benchtop stereo-endoscope rig
    // (see docs/characterization.md for the resulting stage errors):
    // sub-pixel detection jitter with occasional gross outliers, and a
    // few-millimetre / sub-degree kinematic report error.
    static NoiseSpec benchtop() {
        NoiseSpec n;
        n.pixel_sigma_px = 0.5;
        n.outlier_rate = 0.05;
        n.outlier_magnitude_px = 25.0;
        n.report_rot_sigma_deg = 0.35;
        n.report_trans_sigma_mm = 1.2;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Observation generators.

namespace detail {

// Projects every fully visible, non-occluded marker through the given true
// camera pose and corrupts the corners with the stream's noise draws.  Draw
// order is fixed per visible corner: 2 gaussians, outlier coin, outlier
// direction.
inline DetectionBatch observe_at(const WorldTruth& world, CameraSide side,
                                 const RigidTransform& camera_from_scene, Rng& stream,
                                 const NoiseSpec& noise,
                                 const std::set<std::string>& occluded) {
    const CameraRig& rig = world.rig(side);
    const Frustum frustum = Frustum::from_intrinsics(rig.intrinsics);
    DetectionBatch batch;
    for (const auto& [label, corners] : world.fiducials.markers) {
        if (occluded.count(label)) continue;
        std::array<Point3, 4> cam_pts;
        bool visible = true;
        for (int c = 0; c < 4 && visible; ++c) {
            cam_pts[c] = transform_point(camera_from_scene, corners[c]);
            visible = clip_visible(frustum, cam_pts[c]);
        }
        if (!visible) continue;
        Detection d;
        d.label = label;
        for (int c = 0; c < 4; ++c) {
            Point2 px = project_point(rig.intrinsics, cam_pts[c]);
            const double n1 = stream.normal();
            const double n2 = stream.normal();
            const double coin = stream.uniform();
            const double dir = stream.uniform(0.0, 2.0 * kPi);
            px += noise.pixel_sigma_px * Point2(n1, n2);
            if (coin < noise.outlier_rate)
                px += noise.outlier_magnitude_px * Point2(std::cos(dir), std::sin(dir));
            d.corners[c] = px;
        }
        batch.push_back(std::move(d));
    }
    return batch;
}

inline CorrespondenceSet correspondences_from_batch(const DetectionBatch& batch,
                                                    const FiducialMap& map) {
    CorrespondenceSet c;
    for (const Detection& d : batch) {
        const auto it = map.markers.find(d.label);
        if (it == map.markers.end()) continue;
        for (int k = 0; k < 4; ++k) {
            c.scene_points.push_back(it->second[k]);
            c.image_points.push_back(d.corners[k]);
        }
        ++c.detection_count;
    }
    return c;
}

} // namespace detail

// One camera frame of the registration sequence: the scene viewed from the
// true camera pose at the frame's timestamp, with per-corner noise and the
// occlusion schedule applied.
inline DetectionBatch observe_fiducials(const WorldTruth& world, CameraSide side, int frame,
                                        const NoiseSpec& noise) {
    world.validate();
    noise.validate();
    if (frame < 0) throw ValidationError("observe: negative frame index");
    std::set<std::string> occluded;
    for (const OcclusionWindow& w : noise.occlusions)
        if (frame >= w.first_frame && frame <= w.last_frame) occluded.insert(w.label);
    Rng stream = Rng(noise.seed).stream(side == CameraSide::left ? "detect/left"
                                                                 : "detect/right",
                                        static_cast<std::uint64_t>(frame));
    const RigidTransform cam = world.camera_from_scene(side, world.frame_time(frame));
    return detail::observe_at(world, side, cam, stream, noise, occluded);
}

// The uncorrected ECM->PSM transform the robot would report at time t: the
// true chain with the true kinematic error folded in (so a pipeline using
// the fitted correction recovers the truth), plus sampled report noise.
inline RigidTransform reported_psm_pose(const WorldTruth& world, double t,
                                        const NoiseSpec& noise) {
    world.validate();
    noise.validate();
    if (t < world.tool_keys.front().t || t > world.tool_keys.back().t)
        throw ValidationError("reported pose: time outside the tool trajectory span");

    const double t0 = world.registration_time();
    const RigidTransform m = compose(invert(world.ecm_pose(t0)), world.ecm_pose(t));
    const RigidTransform reg_l = world.camera_from_scene(CameraSide::left, t0);
    RigidTransform rep =
        compose(invert(m),
                compose(world.left.handeye,
                        compose(invert(world.true_correction()),
                                compose(reg_l, world.tool_pose(t)))));
    if (noise.report_rot_sigma_deg > 0.0 || noise.report_trans_sigma_mm > 0.0) {
        Rng stream = Rng(noise.seed).stream("report", std::bit_cast<std::uint64_t>(t));
        const Eigen::Vector3d axis = stream.unit_vector();
        const double angle = rad_from_deg(stream.normal(0.0, noise.report_rot_sigma_deg));
        const Eigen::Vector3d dt(stream.normal(0.0, noise.report_trans_sigma_mm),
                                 stream.normal(0.0, noise.report_trans_sigma_mm),
                                 stream.normal(0.0, noise.report_trans_sigma_mm));
        // Jitter the pose in place: the orientation wobbles about a random
        // axis and the position drifts independently. Composing a frame-level
        // delta instead would lever the rotation noise through the full ECM
        // arm length and swamp the translation term.
        if (std::abs(angle) > 0.0) {
            const Eigen::Quaterniond dq(Eigen::AngleAxisd(angle, axis));
            rep.rotation = (dq * rep.rotation).normalized();
        }
        rep.translation += dt;
    }
    return rep;
}

// Records the tool through the full record chain: the reported arm stream is
// sampled uniformly over the tool key span and mapped into the scene using
// the given session.
inline Trajectory record_trajectory(const WorldTruth& world, const SessionState& session,
                                    const NoiseSpec& noise, int samples) {
    if (samples < 1) throw ValidationError("record: nothing to record");
    Trajectory out;
    out.session = session;
    const double ta = world.tool_keys.front().t;
    const double tb = world.tool_keys.back().t;
    for (int i = 0; i < samples; ++i) {
        const double t = samples == 1 ? ta
                                      : ta + (tb - ta) * static_cast<double>(i) /
                                                 static_cast<double>(samples - 1);
        const RigidTransform rep = reported_psm_pose(world, t, noise);
        out.append(record_sample(session, world.ecm_pose(t), rep, world.joints_at(t), t,
                                 world.instrument_id));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

namespace detail {

inline Stat stat_of(const std::vector<double>& v) {
    Stat s;
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

} // namespace detail

// Per-sample pose errors in the evaluation scheme of the experiments: the
// absolute per-axis translation error, its L2 norm, and the quaternion
// angular error, each summarized as mean +/- sample standard deviation.
struct PoseErrorReport {
    std::vector<double> x_mm, y_mm, z_mm, l2_mm, angle_deg;

    size_t count() const { return l2_mm.size(); }
    Stat x() const { return detail::stat_of(x_mm); }
    Stat y() const { return detail::stat_of(y_mm); }
    Stat z() const { return detail::stat_of(z_mm); }
    Stat l2() const { return detail::stat_of(l2_mm); }
    Stat angle() const { return detail::stat_of(angle_deg); }

    void add_pose_error(const RigidTransform& estimated, const RigidTransform& truth) {
        const Eigen::Vector3d d = estimated.translation - truth.translation;
        x_mm.push_back(std::abs(d.x()));
        y_mm.push_back(std::abs(d.y()));
        z_mm.push_back(std::abs(d.z()));
        l2_mm.push_back(d.norm());
        angle_deg.push_back(angular_distance(estimated.rotation, truth.rotation));
    }
};

// Scores a recorded trajectory against the world truth through the marker
// scheme: a marker rigidly mounted on the tool is placed once through the
// estimated chain (session transforms + recorded pose) and once through the
// true chain (true camera pose + true tool pose + mount error), both in the
// live left camera frame.
inline PoseErrorReport evaluate_pose_estimation(const WorldTruth& world,
                                                const SessionState& session,
                                                const Trajectory& traj) {
    world.validate();
    if (traj.samples.empty()) throw ValidationError("evaluate: empty trajectory");
    PoseErrorReport report;
    for (const TrajectorySample& s : traj.samples) {
        const RigidTransform ecm_now = world.ecm_pose(s.t);
        const RigidTransform estimated =
            compose(view_to_scene(session, ecm_now, CameraSide::left),
                    compose(s.pose, world.marker_mount));
        const RigidTransform truth =
            compose(world.camera_from_scene(CameraSide::left, s.t),
                    compose(world.tool_pose(s.t),
                            compose(world.marker_mount, world.mount_error)));
        report.add_pose_error(estimated, truth);
    }
    return report;
}

// Scores registrations of a scene observed at several placements by their
// *relative* motions: the first placement is the base pose, and estimate
// vs truth are compared as displacements from it, which cancels any fixed
// frame offset between the two pose sources.
inline PoseErrorReport evaluate_registration_relative(
    const std::vector<RigidTransform>& estimated, const std::vector<RigidTransform>& truth) {
    if (estimated.size() != truth.size())
        throw ValidationError("relative evaluation: sequence lengths differ");
    if (estimated.size() < 2)
        throw ValidationError("relative evaluation: need the base pose plus one more");
    PoseErrorReport report;
    for (size_t k = 1; k < estimated.size(); ++k) {
        const RigidTransform rel_est = compose(invert(estimated[0]), estimated[k]);
        const RigidTransform rel_tru = compose(invert(truth[0]), truth[k]);
        report.add_pose_error(rel_est, rel_tru);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Scenario harness.

struct StageToggles {
    // Each stage either runs its estimator on noisy observations or is
    // handed the ground-truth transform, which isolates error sources.
    bool register_estimate = true;
    bool handeye_estimate = true;
    bool correction_estimate = true;
};

struct ScenarioParams {
    int frames = 10;            // registration frames fed to the accumulator
    int frame_threshold = 10;   // N_f,thres
    int detect_threshold = 10;  // N_d,thres
    int handeye_stations = 31;  // calibration stations (training)
    int handeye_test_stations = 10;
    int correction_points = 8;
    int record_samples = 100;
    int relative_poses = 5; // scene placements for relative validation, 0 disables
    double playback_speed = 1.0;
    RobustConfig robust;

    void validate() const {
        if (frames < 1 || frame_threshold < 1 || detect_threshold < 1)
            throw ValidationError("scenario: thresholds must be positive");
        if (handeye_stations < 2 || handeye_test_stations < 2)
            throw ValidationError("scenario: need at least two hand-eye stations");
        if (correction_points < 3)
            throw ValidationError("scenario: need at least three correction points");
        if (record_samples < 1) throw ValidationError("scenario: nothing to record");
        if (relative_poses != 0 && relative_poses < 2)
            throw ValidationError("scenario: relative validation needs >= 2 poses");
        if (!(playback_speed > 0.0))
            throw ValidationError("scenario: playback speed must be positive");
    }
};

struct Scenario {
    WorldTruth world;
    std::optional<WorldTruth> playback_world; // present = setup change before playback
    NoiseSpec noise;
    StageToggles stages;
    ScenarioParams params;
};

struct StageMetrics {
    double rot_err_deg = 0.0;
    double trans_err_mm = 0.0;
};

struct ScenarioResult {
    SessionState session;          // the recording session
    SessionState playback_session; // == session unless a setup change is simulated
    Trajectory trajectory;
    StageMetrics registration_left, registration_right;
    StageMetrics handeye_left, handeye_right;
    StageMetrics correction;
    double registration_rms_px_left = 0.0, registration_rms_px_right = 0.0;
    double handeye_test_rot_rms_deg_left = 0.0, handeye_test_trans_rms_mm_left = 0.0;
    double handeye_test_rot_rms_deg_right = 0.0, handeye_test_trans_rms_mm_right = 0.0;
    double correction_inlier_rms_mm = 0.0;
    PoseErrorReport pose_errors;           // marker-scheme end-to-end errors
    PoseErrorReport registration_relative; // relative-motion validation
    double overlay_same_session_px = 0.0;  // mean vertex reprojection error
    double overlay_playback_px = 0.0;      // same metric under the playback session
    io::Report report;
};

namespace detail {

inline StageMetrics metrics_between(const RigidTransform& estimated,
                                    const RigidTransform& truth) {
    return {angular_distance(estimated.rotation, truth.rotation),
            (estimated.translation - truth.translation).norm()};
}

// Draws a camera-arm displacement that keeps every marker visible in both
// cameras; deterministic given the stream state.
inline RigidTransform draw_visible_station(const WorldTruth& world, const RigidTransform& e0,
                                           Rng& stream, double max_rot_deg,
                                           double max_trans_mm) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const Eigen::Vector3d axis = stream.unit_vector();
        const double angle = rad_from_deg(stream.uniform(0.25 * max_rot_deg, max_rot_deg));
        const Eigen::Vector3d t(stream.uniform(-max_trans_mm, max_trans_mm),
                                stream.uniform(-max_trans_mm, max_trans_mm),
                                stream.uniform(-max_trans_mm, max_trans_mm));
        const RigidTransform ecm = compose(e0, RigidTransform::from_axis_angle(axis, angle, t));
        bool all_visible = true;
        for (CameraSide side : {CameraSide::left, CameraSide::right}) {
            const RigidTransform cam =
                compose(invert(world.rig(side).handeye),
                        compose(invert(ecm), world.base_from_scene));
            const Frustum frustum = Frustum::from_intrinsics(world.rig(side).intrinsics);
            for (const auto& [label, corners] : world.fiducials.markers)
                for (const Point3& c : corners)
                    all_visible = all_visible && clip_visible(frustum, transform_point(cam, c));
        }
        if (all_visible) return ecm;
    }
    throw DegenerateConfigurationError(
        "scenario: cannot place a camera station that sees the whole scene");
}

// Mean pixel distance between the overlay vertices of an estimated
// camera-frame tool pose and of the true one, over all four components.
// Vertices behind either camera are skipped.
inline void accumulate_overlay_error(const RigidTransform& cam_pose_est,
                                     const RigidTransform& cam_pose_tru,
                                     const JointState& joints_est, const JointState& joints_tru,
                                     const InstrumentModel& model, const CameraIntrinsics& k,
                                     double& err_sum, long long& err_count) {
    const Eigen::Matrix4d render = build_render_matrix(k);
    const ComponentPoses est = place_components(cam_pose_est, joints_est, model);
    const ComponentPoses tru = place_components(cam_pose_tru, joints_tru, model);
    const auto component = [&](const RigidTransform& a, const RigidTransform& b,
                               const std::vector<Point3>& mesh) {
        for (const Point3& v : mesh) {
            const Point3 pa = transform_point(a, v);
            const Point3 pb = transform_point(b, v);
            if (pa.z() <= 0.0 || pb.z() <= 0.0) continue;
            const Point2 qa = ndc_to_pixel(k, project_ndc(render, pa).head<2>());
            const Point2 qb = ndc_to_pixel(k, project_ndc(render, pb).head<2>());
            err_sum += (qa - qb).norm();
            ++err_count;
        }
    };
    component(est.shaft, tru.shaft, model.shaft_mesh);
    component(est.body, tru.body, model.body_mesh);
    component(est.jaw_left, tru.jaw_left, model.jaw_mesh);
    component(est.jaw_right, tru.jaw_right, model.jaw_mesh);
}

// Builds one session against a world: registration from observed frames,
// hand-eye from calibration stations, correction from collected point
// pairs.  Stage toggles swap any estimator for the ground truth.
struct SessionBuild {
    SessionState state;
    StageMetrics registration_left, registration_right;
    StageMetrics handeye_left, handeye_right;
    StageMetrics correction;
    double rms_px_left = 0.0, rms_px_right = 0.0;
    double test_rot_left = 0.0, test_trans_left = 0.0;
    double test_rot_right = 0.0, test_trans_right = 0.0;
    double correction_rms_mm = 0.0;
};

inline SessionBuild build_session(const WorldTruth& world, const NoiseSpec& noise,
                                  const StageToggles& stages, const ScenarioParams& params,
                                  const RobustConfig& cfg, std::string_view session_tag) {
    SessionBuild out;
    const double t0 = world.registration_time();
    out.state.ecm_initial = world.ecm_pose(t0);
    const Rng root(noise.seed);

    // --- Registration.
    for (CameraSide side : {CameraSide::left, CameraSide::right}) {
        const bool is_left = side == CameraSide::left;
        const RigidTransform truth = world.camera_from_scene(side, t0);
        RigidTransform est = truth;
        double rms = 0.0;
        if (stages.register_estimate) {
            std::set<std::string> occluded;
            std::vector<DetectionBatch> frames;
            frames.reserve(static_cast<size_t>(params.frames));
            for (int f = 0; f < params.frames; ++f) {
                occluded.clear();
                for (const OcclusionWindow& w : noise.occlusions)
                    if (f >= w.first_frame && f <= w.last_frame) occluded.insert(w.label);
                Rng stream = root.stream(std::string(session_tag) +
                                             (is_left ? "/detect/left" : "/detect/right"),
                                         static_cast<std::uint64_t>(f));
                frames.push_back(observe_at(world, side,
                                            world.camera_from_scene(side, world.frame_time(f)),
                                            stream, noise, occluded));
            }
            const PnPResult r =
                register_scene(frames, world.fiducials, world.rig(side).intrinsics, cfg,
                               params.frame_threshold, params.detect_threshold);
            est = r.camera_from_scene;
            rms = r.rms_px;
        }
        if (is_left) {
            out.state.registration_left = est;
            out.registration_left = metrics_between(est, truth);
            out.rms_px_left = rms;
        } else {
            out.state.registration_right = est;
            out.registration_right = metrics_between(est, truth);
            out.rms_px_right = rms;
        }
    }

    // --- Hand-eye, per camera, from camera-arm stations.  The robot-side
    // pose stream is the arm's own kinematics; the camera-side stream is a
    // per-station scene registration.
    const RigidTransform e0 = world.ecm_pose(t0);
    for (CameraSide side : {CameraSide::left, CameraSide::right}) {
        const bool is_left = side == CameraSide::left;
        const RigidTransform truth = world.rig(side).handeye;
        RigidTransform est = truth;
        double test_rot = 0.0, test_trans = 0.0;
        if (stages.handeye_estimate) {
            const auto station_poses = [&](std::string_view tag, int count) {
                Rng stream = root.stream(std::string(session_tag) + std::string(tag));
                std::vector<RigidTransform> robots;
                robots.reserve(static_cast<size_t>(count));
                robots.push_back(e0);
                for (int j = 1; j < count; ++j)
                    robots.push_back(draw_visible_station(world, e0, stream, 16.0, 20.0));
                return robots;
            };
            const auto camera_poses = [&](std::string_view tag,
                                          const std::vector<RigidTransform>& robots) {
                std::vector<RigidTransform> cams;
                cams.reserve(robots.size());
                for (size_t j = 0; j < robots.size(); ++j) {
                    const RigidTransform cam_truth =
                        compose(invert(world.rig(side).handeye),
                                compose(invert(robots[j]), world.base_from_scene));
                    Rng stream = root.stream(std::string(session_tag) + std::string(tag),
                                             static_cast<std::uint64_t>(j));
                    const DetectionBatch batch =
                        observe_at(world, side, cam_truth, stream, noise, {});
                    const CorrespondenceSet c =
                        correspondences_from_batch(batch, world.fiducials);
                    cams.push_back(solve_pnp_robust(c, world.rig(side).intrinsics, cfg,
                                                    /*detection_threshold=*/1)
                                       .camera_from_scene);
                }
                return cams;
            };

            const std::string tag = is_left ? "/handeye/left" : "/handeye/right";
            const std::vector<RigidTransform> robots =
                station_poses(tag + "/stations", params.handeye_stations);
            const std::vector<RigidTransform> cams = camera_poses(tag + "/obs", robots);
            const HandEyeResult hr = solve_handeye(build_motion_pairs(cams, robots), cfg);
            est = invert(hr.x); // solver yields camera<-ECM; the mount is ECM<-camera

            const std::vector<RigidTransform> test_robots =
                station_poses(tag + "/test-stations", params.handeye_test_stations);
            const std::vector<RigidTransform> test_cams =
                camera_poses(tag + "/test-obs", test_robots);
            const std::vector<MotionPair> test_pairs =
                build_motion_pairs(test_cams, test_robots);
            double rr = 0.0, tt = 0.0;
            for (const MotionPair& p : test_pairs) {
                const ghost::detail::ScrewResidual res = ghost::detail::handeye_residual(p, hr.x);
                rr += res.rot_deg * res.rot_deg;
                tt += res.trans_mm * res.trans_mm;
            }
            test_rot = std::sqrt(rr / static_cast<double>(test_pairs.size()));
            test_trans = std::sqrt(tt / static_cast<double>(test_pairs.size()));
        }
        if (is_left) {
            out.state.handeye_left = est;
            out.handeye_left = metrics_between(est, truth);
            out.test_rot_left = test_rot;
            out.test_trans_left = test_trans;
        } else {
            out.state.handeye_right = est;
            out.handeye_right = metrics_between(est, truth);
            out.test_rot_right = test_rot;
            out.test_trans_right = test_trans;
        }
    }

    // --- Kinematic error correction from collected point pairs: the tool
    // origin as measured in the registered camera frame vs as reported by
    // the uncorrected kinematic chain mapped through the session estimates.
    {
        const RigidTransform truth = world.true_correction();
        RigidTransform est = truth;
        if (stages.correction_estimate) {
            const double ta = world.tool_keys.front().t;
            const double tb = world.tool_keys.back().t;
            PointPairSet pp;
            for (int k = 0; k < params.correction_points; ++k) {
                const double u = (static_cast<double>(k) + 0.5) /
                                 static_cast<double>(params.correction_points);
                const double t = ta + (tb - ta) * u;
                const RigidTransform rep = reported_psm_pose(world, t, noise);
                const RigidTransform uncorrected =
                    compose(invert(out.state.handeye_left),
                            compose(ecm_motion(out.state, world.ecm_pose(t)), rep));
                const RigidTransform measured_cam =
                    compose(world.camera_from_scene(CameraSide::left, t), world.tool_pose(t));
                const RigidTransform to_reg_frame =
                    compose(out.state.registration_left,
                            invert(view_to_scene(out.state, world.ecm_pose(t),
                                                 CameraSide::left)));
                pp.reported.push_back(uncorrected.translation);
                pp.actual.push_back(transform_point(to_reg_frame, measured_cam.translation));
            }
            const CorrectionFit fit = fit_correction(pp, cfg);
            est = fit.correction;
            out.correction_rms_mm = fit.inlier_rms_mm;
        }
        out.state.correction[world.instrument_id] = est;
        out.correction = metrics_between(est, truth);
    }

    return out;
}

} // namespace detail

// Runs the full pipeline against a scenario: build the recording session,
// record the tool trajectory, optionally build an independent playback
// session (setup change), replay, and score every stage against truth.
inline ScenarioResult run_scenario(const Scenario& sc) {
    sc.params.validate();
    sc.noise.validate();
    sc.world.validate();
    if (sc.playback_world) sc.playback_world->validate();

    RobustConfig cfg = sc.params.robust;
    if (cfg.seed == 0) cfg.seed = sc.noise.seed ^ 0x9e3779b97f4a7c15ull;

    ScenarioResult out;

    // Recording session.
    const detail::SessionBuild rec =
        detail::build_session(sc.world, sc.noise, sc.stages, sc.params, cfg, "record");
    out.session = rec.state;
    out.registration_left = rec.registration_left;
    out.registration_right = rec.registration_right;
    out.handeye_left = rec.handeye_left;
    out.handeye_right = rec.handeye_right;
    out.correction = rec.correction;
    out.registration_rms_px_left = rec.rms_px_left;
    out.registration_rms_px_right = rec.rms_px_right;
    out.handeye_test_rot_rms_deg_left = rec.test_rot_left;
    out.handeye_test_trans_rms_mm_left = rec.test_trans_left;
    out.handeye_test_rot_rms_deg_right = rec.test_rot_right;
    out.handeye_test_trans_rms_mm_right = rec.test_trans_right;
    out.correction_inlier_rms_mm = rec.correction_rms_mm;

    // Record the tool trajectory.
    out.trajectory =
        record_trajectory(sc.world, out.session, sc.noise, sc.params.record_samples);

    // Playback session: a fresh registration (and hand-eye) in the playback
    // world when a setup change is simulated, otherwise the same session.
    const WorldTruth& pw = sc.playback_world ? *sc.playback_world : sc.world;
    if (sc.playback_world) {
        NoiseSpec pn = sc.noise;
        pn.seed = sc.noise.seed ^ 0x1b5e55107a11ba1ull; // independent playback-session draws
        const detail::SessionBuild pb =
            detail::build_session(pw, pn, sc.stages, sc.params, cfg, "playback");
        out.playback_session = pb.state;
        out.playback_session.correction = out.session.correction;
    } else {
        out.playback_session = out.session;
    }

    // Replay and measure overlay reprojection error, same-session and
    // under the playback session.
    const InstrumentModel model = InstrumentModel::large_needle_driver();
    double same_sum = 0.0, play_sum = 0.0;
    long long same_count = 0, play_count = 0;
    const double traj_t0 = out.trajectory.t_begin();
    for (const TrajectorySample& ref : out.trajectory.samples) {
        const double clock = (ref.t - traj_t0) / sc.params.playback_speed;
        const TrajectorySample s = playback_iter(out.trajectory, sc.params.playback_speed,
                                                 clock);
        const JointState joints_tru = sc.world.joints_at(s.t);

        // Same session, same world: camera wherever the arm is at s.t.
        {
            const RigidTransform ecm_now = sc.world.ecm_pose(s.t);
            const RigidTransform est =
                compose(view_to_scene(out.session, ecm_now, CameraSide::left), s.pose);
            const RigidTransform tru =
                compose(sc.world.camera_from_scene(CameraSide::left, s.t),
                        sc.world.tool_pose(s.t));
            detail::accumulate_overlay_error(est, tru, s.joints, joints_tru, model,
                                             sc.world.left.intrinsics, same_sum, same_count);
        }
        // Playback session: the playback world's clock starts at its own
        // registration epoch.
        {
            const double t2 = pw.registration_time() + clock;
            const RigidTransform ecm_now = pw.ecm_pose(t2);
            const RigidTransform est =
                compose(view_to_scene(out.playback_session, ecm_now, CameraSide::left),
                        s.pose);
            const RigidTransform tru =
                compose(pw.camera_from_scene(CameraSide::left, t2), sc.world.tool_pose(s.t));
            detail::accumulate_overlay_error(est, tru, s.joints, joints_tru, model,
                                             pw.left.intrinsics, play_sum, play_count);
        }
    }
    out.overlay_same_session_px = same_count ? same_sum / static_cast<double>(same_count) : 0.0;
    out.overlay_playback_px = play_count ? play_sum / static_cast<double>(play_count) : 0.0;

    // Marker-scheme end-to-end evaluation on the recording session.
    out.pose_errors = evaluate_pose_estimation(sc.world, out.session, out.trajectory);

    // Relative-motion registration validation: the scene is re-registered
    // at several placements and relative motions are compared to truth.
    if (sc.params.relative_poses >= 2) {
        const double t0 = sc.world.registration_time();
        const RigidTransform cam0 = sc.world.camera_from_scene(CameraSide::left, t0);
        Rng move_stream = Rng(sc.noise.seed).stream("scene-moves");
        std::vector<RigidTransform> est, tru;
        for (int k = 0; k < sc.params.relative_poses; ++k) {
            RigidTransform displaced = cam0;
            if (k > 0) {
                // Small scene displacement that keeps every marker in view.
                for (int attempt = 0;; ++attempt) {
                    if (attempt >= 200)
                        throw DegenerateConfigurationError(
                            "scenario: cannot displace the scene and keep it visible");
                    const Eigen::Vector3d axis = move_stream.unit_vector();
                    const double angle = rad_from_deg(move_stream.uniform(1.0, 8.0));
                    const Eigen::Vector3d t(move_stream.uniform(-15.0, 15.0),
                                            move_stream.uniform(-15.0, 15.0),
                                            move_stream.uniform(-15.0, 15.0));
                    const RigidTransform d = RigidTransform::from_axis_angle(axis, angle, t);
                    const RigidTransform cam = compose(cam0, d);
                    const Frustum frustum =
                        Frustum::from_intrinsics(sc.world.left.intrinsics);
                    bool visible = true;
                    for (const auto& [label, corners] : sc.world.fiducials.markers)
                        for (const Point3& c : corners)
                            visible = visible && clip_visible(frustum, transform_point(cam, c));
                    if (visible) {
                        displaced = cam;
                        break;
                    }
                }
            }
            tru.push_back(displaced);
            if (sc.stages.register_estimate) {
                std::vector<DetectionBatch> frames;
                for (int f = 0; f < sc.params.frames; ++f) {
                    Rng stream = Rng(sc.noise.seed).stream(
                        "scene-moves/obs/" + std::to_string(k),
                        static_cast<std::uint64_t>(f));
                    frames.push_back(detail::observe_at(sc.world, CameraSide::left, displaced,
                                                        stream, sc.noise, {}));
                }
                est.push_back(register_scene(frames, sc.world.fiducials,
                                             sc.world.left.intrinsics, cfg,
                                             sc.params.frame_threshold,
                                             sc.params.detect_threshold)
                                  .camera_from_scene);
            } else {
                est.push_back(displaced);
            }
        }
        out.registration_relative = evaluate_registration_relative(est, tru);
    }

    // --- Machine-readable report.
    io::Report& r = out.report;
    r.add("config.seed", static_cast<long long>(sc.noise.seed));
    r.add("config.pixel_sigma_px", sc.noise.pixel_sigma_px);
    r.add("config.outlier_rate", sc.noise.outlier_rate);
    r.add("config.outlier_magnitude_px", sc.noise.outlier_magnitude_px);
    r.add("config.report_rot_sigma_deg", sc.noise.report_rot_sigma_deg);
    r.add("config.report_trans_sigma_mm", sc.noise.report_trans_sigma_mm);
    r.add("config.frames", sc.params.frames);
    r.add("config.frame_threshold", sc.params.frame_threshold);
    r.add("config.detect_threshold", sc.params.detect_threshold);
    r.add("config.handeye_stations", sc.params.handeye_stations);
    r.add("config.handeye_test_stations", sc.params.handeye_test_stations);
    r.add("config.correction_points", sc.params.correction_points);
    r.add("config.record_samples", sc.params.record_samples);
    r.add("config.relative_poses", sc.params.relative_poses);
    r.add("config.playback_speed", sc.params.playback_speed);
    r.add("config.stage.register", std::string(sc.stages.register_estimate ? "estimate"
                                                                           : "truth"));
    r.add("config.stage.handeye", std::string(sc.stages.handeye_estimate ? "estimate"
                                                                         : "truth"));
    r.add("config.stage.correction", std::string(sc.stages.correction_estimate ? "estimate"
                                                                                : "truth"));
    r.add("config.setup_change", sc.playback_world ? 1 : 0);
    const auto add_stage = [&](const std::string& name, const StageMetrics& m) {
        r.add(name + ".rot_err_deg", m.rot_err_deg);
        r.add(name + ".trans_err_mm", m.trans_err_mm);
    };
    add_stage("registration.left", out.registration_left);
    r.add("registration.left.rms_px", out.registration_rms_px_left);
    add_stage("registration.right", out.registration_right);
    r.add("registration.right.rms_px", out.registration_rms_px_right);
    add_stage("handeye.left", out.handeye_left);
    r.add("handeye.left.test_rot_rms_deg", out.handeye_test_rot_rms_deg_left);
    r.add("handeye.left.test_trans_rms_mm", out.handeye_test_trans_rms_mm_left);
    add_stage("handeye.right", out.handeye_right);
    r.add("handeye.right.test_rot_rms_deg", out.handeye_test_rot_rms_deg_right);
    r.add("handeye.right.test_trans_rms_mm", out.handeye_test_trans_rms_mm_right);
    add_stage("correction", out.correction);
    r.add("correction.inlier_rms_mm", out.correction_inlier_rms_mm);
    r.add("record.samples", static_cast<long long>(out.trajectory.samples.size()));
    const auto add_report = [&](const std::string& name, const PoseErrorReport& p) {
        r.add(name + ".count", static_cast<long long>(p.count()));
        const auto add_stat = [&](const std::string& metric, const Stat& s) {
            r.add(name + "." + metric + "_mean", s.mean);
            r.add(name + "." + metric + "_std", s.std);
        };
        add_stat("x_mm", p.x());
        add_stat("y_mm", p.y());
        add_stat("z_mm", p.z());
        add_stat("l2_mm", p.l2());
        add_stat("angle_deg", p.angle());
    };
    add_report("pose", out.pose_errors);
    if (sc.params.relative_poses >= 2) add_report("regrel", out.registration_relative);
    r.add("overlay.same_session_mean_px", out.overlay_same_session_px);
    r.add("overlay.playback_mean_px", out.overlay_playback_px);

    return out;
}

// ---------------------------------------------------------------------------
// Canned worlds and scenario files.

// A deterministic default world: a mostly planar five-marker plate viewed
// from ~180 mm, the camera arm drifting during the recording, and the tool
// orbiting above the plate with wrist/jaw motion.  `seed` perturbs the
// geometry; 0 is the documented baseline.
inline WorldTruth default_world(std::uint64_t seed = 0) {
    WorldTruth w;
    Rng rng(seed ^ 0x5eedc0ffee123456ull);
    Rng geom = rng.stream("geometry");

    // Markers: four 12 mm tags at the corners of a 70 mm square plus one
    // raised centre tag (the scene is deliberately not one exact plane).
    const double half = 6.0;
    const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
    for (int m = 0; m < 5; ++m) {
        const double cxs[5] = {-35, 35, 35, -35, 0};
        const double cys[5] = {-35, -35, 35, 35, 0};
        const double cz = m == 4 ? 6.0 : 0.0;
        std::array<Point3, 4>& corners = w.fiducials.markers["tag" + std::to_string(m)];
        for (int c = 0; c < 4; ++c)
            corners[c] = Point3(cxs[m] + sx[c] * half, cys[m] + sy[c] * half, cz);
    }

    // Cameras: a narrow stereo rig on the camera arm.
    CameraIntrinsics k;
    k.fx = 1150.0;
    k.fy = 1140.0;
    k.cx = 640.0;
    k.cy = 360.0;
    k.k1 = -0.12;
    k.k2 = 0.035;
    k.p1 = 0.0004;
    k.p2 = -0.0003;
    k.k3 = 0.0;
    k.width = 1280;
    k.height = 720;
    k.near_mm = 10.0;
    k.far_mm = 1500.0;
    w.left.intrinsics = k;
    k.fx = 1148.0;
    k.cx = 636.0;
    w.right.intrinsics = k;
    w.left.handeye = RigidTransform::from_axis_angle(
        Eigen::Vector3d(0.3, 1.0, 0.1).normalized(), rad_from_deg(3.0 + geom.uniform(-1, 1)),
        Eigen::Vector3d(-2.5, 1.0, 35.0));
    w.right.handeye = compose(w.left.handeye,
                              RigidTransform::from_axis_angle(Eigen::Vector3d::UnitY(),
                                                              rad_from_deg(0.4),
                                                              Eigen::Vector3d(5.2, 0.1, 0.0)));

    // Robot base 240 mm from the scene, tilted.
    w.base_from_scene = RigidTransform::from_axis_angle(
        Eigen::Vector3d(1.0, 0.2, -0.3).normalized(), rad_from_deg(25.0),
        Eigen::Vector3d(60.0, -40.0, 220.0) +
            Eigen::Vector3d(geom.uniform(-10, 10), geom.uniform(-10, 10),
                            geom.uniform(-10, 10)));

    // Camera arm: the first key is the registration pose, looking at the
    // plate centre from ~180 mm; later keys drift during the recording.
    const RigidTransform cam0 = RigidTransform::from_axis_angle(
        Eigen::Vector3d(1.0, 0.1, 0.05).normalized(), rad_from_deg(geom.uniform(2.0, 6.0)),
        Eigen::Vector3d(geom.uniform(-6, 6), geom.uniform(-6, 6), 180.0));
    // camera = X^-1 E^-1 W  =>  E = W cam^-1 X^-1
    const RigidTransform e0 =
        compose(w.base_from_scene, compose(invert(cam0), invert(w.left.handeye)));
    w.ecm_keys.push_back({0.0, e0});
    w.ecm_keys.push_back({1.0, e0}); // static hold while registering
    RigidTransform e = e0;
    const double key_times[3] = {4.0, 8.0, 12.0};
    for (double t : key_times) {
        e = compose(e, RigidTransform::from_axis_angle(
                           rng.stream("ecm-drift", static_cast<std::uint64_t>(t)).unit_vector(),
                           rad_from_deg(2.5),
                           Eigen::Vector3d(geom.uniform(-8, 8), geom.uniform(-8, 8),
                                           geom.uniform(-8, 8))));
        w.ecm_keys.push_back({t, e});
    }

    // Tool: orbits 25-55 mm above the plate, tilting as it goes.
    const int tool_key_count = 9;
    for (int i = 0; i < tool_key_count; ++i) {
        const double u = static_cast<double>(i) / (tool_key_count - 1);
        const double t = 1.0 + 11.0 * u;
        const double ang = 2.2 * kPi * u;
        RigidTransform pose = RigidTransform::from_axis_angle(
            Eigen::Vector3d(std::cos(1.7 * ang), std::sin(1.3 * ang), 0.8).normalized(),
            rad_from_deg(160.0 + 12.0 * std::sin(ang)),
            Eigen::Vector3d(30.0 * std::cos(ang), 30.0 * std::sin(ang),
                            40.0 + 15.0 * std::sin(2.0 * ang)));
        w.tool_keys.push_back({t, pose});
        JointState j;
        j.q6_rad = 0.5 * std::sin(1.9 * ang);
        j.q7_rad = 0.45 * std::cos(1.1 * ang);
        j.jaw_rad = 0.4 + 0.35 * std::sin(0.9 * ang + 0.4);
        w.joint_keys.push_back({t, j});
    }

    // True kinematic error and the evaluation marker mount.
    w.correction["lnd"] = RigidTransform::from_axis_angle(
        Eigen::Vector3d(0.2, -1.0, 0.4).normalized(), rad_from_deg(0.6),
        Eigen::Vector3d(1.8, -2.4, 1.1));
    w.marker_mount = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitX(),
                                                     rad_from_deg(90.0),
                                                     Eigen::Vector3d(0.0, 6.0, -4.0));
    return w;
}

// A setup change: the same scene and tool motion observed from an
// independently placed robot (new base pose, new camera-arm pose).
inline WorldTruth setup_changed_world(const WorldTruth& base, std::uint64_t seed) {
    WorldTruth w = base;
    Rng rng(seed ^ 0xbadc0de5eedull);
    Rng geom = rng.stream("setup-change");
    // New base placement.
    w.base_from_scene = compose(
        base.base_from_scene,
        RigidTransform::from_axis_angle(geom.unit_vector(), rad_from_deg(geom.uniform(10, 40)),
                                        Eigen::Vector3d(geom.uniform(-60, 60),
                                                        geom.uniform(-60, 60),
                                                        geom.uniform(-60, 60))));
    // New camera-arm pose looking at the plate from a different angle.
    const RigidTransform cam0 = RigidTransform::from_axis_angle(
        geom.unit_vector(), rad_from_deg(geom.uniform(2.0, 9.0)),
        Eigen::Vector3d(geom.uniform(-8, 8), geom.uniform(-8, 8), geom.uniform(165, 200)));
    const RigidTransform e0 =
        compose(w.base_from_scene, compose(invert(cam0), invert(w.left.handeye)));
    w.ecm_keys.clear();
    w.ecm_keys.push_back({0.0, e0});
    w.ecm_keys.push_back({1.0, e0});
    RigidTransform e = e0;
    for (double t : {5.0, 9.0, 13.0}) {
        e = compose(e, RigidTransform::from_axis_angle(geom.unit_vector(), rad_from_deg(2.0),
                                                       Eigen::Vector3d(geom.uniform(-7, 7),
                                                                       geom.uniform(-7, 7),
                                                                       geom.uniform(-7, 7))));
        w.ecm_keys.push_back({t, e});
    }
    return w;
}

// ---------------------------------------------------------------------------
// Scenario files: sectioned text ([world], [world2], [noise], [stages],
// [params]).  Every key is optional; the baseline is default_world(0) with
// zero noise and all stages estimating.

inline Scenario parse_scenario(std::string_view text) {
    Scenario sc;
    sc.world = default_world();

    io::detail::LineCursor cur(text);
    cur.expect_magic("ghostscenario");

    enum class Section { none, world, world2, noise, stages, params };
    Section section = Section::none;
    WorldTruth world2 = sc.world;
    bool world2_present = false;
    bool world_markers_cleared = false, world_ecm_cleared = false, world_tool_cleared = false,
         world_joints_cleared = false;
    bool world2_ecm_cleared = false;

    const auto parse_toggle = [&](const std::vector<std::string_view>& tokens) {
        if (tokens.size() != 2 || (tokens[1] != "estimate" && tokens[1] != "truth"))
            cur.fail("expected '<stage> estimate|truth'");
        return tokens[1] == "estimate";
    };
    const auto parse_intrinsics_line = [&](const std::vector<std::string_view>& tokens) {
        if (tokens.size() != 14)
            cur.fail("expected 'fx fy cx cy k1 k2 p1 p2 k3 width height near far'");
        CameraIntrinsics k;
        const auto d = [&](size_t i, const char* what) {
            return io::detail::parse_double(tokens[i], what);
        };
        k.fx = d(1, "fx");
        k.fy = d(2, "fy");
        k.cx = d(3, "cx");
        k.cy = d(4, "cy");
        k.k1 = d(5, "k1");
        k.k2 = d(6, "k2");
        k.p1 = d(7, "p1");
        k.p2 = d(8, "p2");
        k.k3 = d(9, "k3");
        k.width = static_cast<int>(io::detail::parse_int(tokens[10], "width"));
        k.height = static_cast<int>(io::detail::parse_int(tokens[11], "height"));
        k.near_mm = d(12, "near");
        k.far_mm = d(13, "far");
        return k;
    };

    std::vector<std::string_view> tokens;
    while (cur.next(tokens)) {
        if (tokens.size() == 1 && tokens[0].front() == '[') {
            const std::string_view name = tokens[0];
            if (name == "[world]") section = Section::world;
            else if (name == "[world2]") {
                section = Section::world2;
                // The playback world starts as a copy of the (possibly
                // edited) recording world; its keys then override.
                if (!world2_present) world2 = sc.world;
                world2_present = true;
            }
            else if (name == "[noise]") section = Section::noise;
            else if (name == "[stages]") section = Section::stages;
            else if (name == "[params]") section = Section::params;
            else cur.fail("unknown section '" + std::string(name) + "'");
            continue;
        }
        const std::string_view key = tokens[0];
        switch (section) {
        case Section::none:
            cur.fail("content before the first section header");
        case Section::world:
        case Section::world2: {
            WorldTruth& w = section == Section::world ? sc.world : world2;
            if (key == "marker" && section == Section::world) {
                if (tokens.size() != 14) cur.fail("expected 'marker label + 12 numbers'");
                if (!world_markers_cleared) {
                    w.fiducials.markers.clear();
                    world_markers_cleared = true;
                }
                std::array<Point3, 4> corners;
                for (int c = 0; c < 4; ++c)
                    corners[c] =
                        io::detail::parse_vec3(tokens, 2 + 3 * static_cast<size_t>(c), cur);
                w.fiducials.markers[std::string(tokens[1])] = corners;
            } else if (key == "base_from_scene") {
                w.base_from_scene = io::detail::parse_pose(tokens, 1, cur);
            } else if (key == "handeye_left") {
                w.left.handeye = io::detail::parse_pose(tokens, 1, cur);
            } else if (key == "handeye_right") {
                w.right.handeye = io::detail::parse_pose(tokens, 1, cur);
            } else if (key == "intrinsics_left") {
                w.left.intrinsics = parse_intrinsics_line(tokens);
            } else if (key == "intrinsics_right") {
                w.right.intrinsics = parse_intrinsics_line(tokens);
            } else if (key == "ecm_key") {
                if (tokens.size() != 9) cur.fail("expected 'ecm_key t pose'");
                bool& cleared =
                    section == Section::world ? world_ecm_cleared : world2_ecm_cleared;
                if (!cleared) {
                    w.ecm_keys.clear();
                    cleared = true;
                }
                w.ecm_keys.push_back({io::detail::parse_double(tokens[1], "t"),
                                      io::detail::parse_pose(tokens, 2, cur)});
            } else if (key == "tool_key" && section == Section::world) {
                if (tokens.size() != 9) cur.fail("expected 'tool_key t pose'");
                if (!world_tool_cleared) {
                    w.tool_keys.clear();
                    world_tool_cleared = true;
                }
                w.tool_keys.push_back({io::detail::parse_double(tokens[1], "t"),
                                       io::detail::parse_pose(tokens, 2, cur)});
            } else if (key == "joint_key" && section == Section::world) {
                if (tokens.size() != 5) cur.fail("expected 'joint_key t q6 q7 jaw'");
                if (!world_joints_cleared) {
                    w.joint_keys.clear();
                    world_joints_cleared = true;
                }
                JointKeyframe jk;
                jk.t = io::detail::parse_double(tokens[1], "t");
                jk.joints.q6_rad = io::detail::parse_double(tokens[2], "q6");
                jk.joints.q7_rad = io::detail::parse_double(tokens[3], "q7");
                jk.joints.jaw_rad = io::detail::parse_double(tokens[4], "jaw");
                w.joint_keys.push_back(jk);
            } else if (key == "correction") {
                if (tokens.size() != 9) cur.fail("expected 'correction id pose'");
                w.correction[std::string(tokens[1])] = io::detail::parse_pose(tokens, 2, cur);
            } else if (key == "instrument") {
                if (tokens.size() != 2) cur.fail("expected 'instrument id'");
                w.instrument_id = std::string(tokens[1]);
            } else if (key == "marker_mount") {
                w.marker_mount = io::detail::parse_pose(tokens, 1, cur);
            } else if (key == "mount_error") {
                w.mount_error = io::detail::parse_pose(tokens, 1, cur);
            } else if (key == "frame_rate") {
                if (tokens.size() != 2) cur.fail("expected 'frame_rate hz'");
                w.frame_rate_hz = io::detail::parse_double(tokens[1], "frame rate");
            } else if (key == "randomize" && section == Section::world2) {
                if (tokens.size() != 2) cur.fail("expected 'randomize seed'");
                world2 = setup_changed_world(
                    sc.world,
                    static_cast<std::uint64_t>(io::detail::parse_int(tokens[1], "seed")));
            } else {
                cur.fail("unknown world key '" + std::string(key) + "'");
            }
            break;
        }
        case Section::noise: {
            NoiseSpec& n = sc.noise;
            const auto val = [&](const char* what) {
                if (tokens.size() != 2) cur.fail("expected one value");
                return io::detail::parse_double(tokens[1], what);
            };
            if (key == "preset") {
                if (tokens.size() != 2) cur.fail("expected 'preset none|benchtop'");
                if (tokens[1] == "none") {
                    const std::uint64_t seed = n.seed;
                    n = NoiseSpec::none();
                    n.seed = seed;
                } else if (tokens[1] == "benchtop") {
                    const std::uint64_t seed = n.seed;
                    n = NoiseSpec::benchtop();
                    n.seed = seed;
                } else {
                    cur.fail("unknown noise preset '" + std::string(tokens[1]) + "'");
                }
            } else if (key == "pixel_sigma") n.pixel_sigma_px = val("pixel sigma");
            else if (key == "outlier_rate") n.outlier_rate = val("outlier rate");
            else if (key == "outlier_px") n.outlier_magnitude_px = val("outlier magnitude");
            else if (key == "report_rot_deg") n.report_rot_sigma_deg = val("report rot");
            else if (key == "report_trans_mm") n.report_trans_sigma_mm = val("report trans");
            else if (key == "seed") {
                if (tokens.size() != 2) cur.fail("expected 'seed n'");
                n.seed = static_cast<std::uint64_t>(io::detail::parse_int(tokens[1], "seed"));
            } else if (key == "occlude") {
                if (tokens.size() != 4) cur.fail("expected 'occlude label first last'");
                OcclusionWindow w;
                w.label = std::string(tokens[1]);
                w.first_frame = static_cast<int>(io::detail::parse_int(tokens[2], "first"));
                w.last_frame = static_cast<int>(io::detail::parse_int(tokens[3], "last"));
                n.occlusions.push_back(std::move(w));
            } else {
                cur.fail("unknown noise key '" + std::string(key) + "'");
            }
            break;
        }
        case Section::stages: {
            if (key == "register") sc.stages.register_estimate = parse_toggle(tokens);
            else if (key == "handeye") sc.stages.handeye_estimate = parse_toggle(tokens);
            else if (key == "correction") sc.stages.correction_estimate = parse_toggle(tokens);
            else cur.fail("unknown stage '" + std::string(key) + "'");
            break;
        }
        case Section::params: {
            ScenarioParams& p = sc.params;
            const auto iv = [&](const char* what) {
                if (tokens.size() != 2) cur.fail("expected one value");
                return static_cast<int>(io::detail::parse_int(tokens[1], what));
            };
            const auto dv = [&](const char* what) {
                if (tokens.size() != 2) cur.fail("expected one value");
                return io::detail::parse_double(tokens[1], what);
            };
            if (key == "frames") p.frames = iv("frames");
            else if (key == "frame_threshold") p.frame_threshold = iv("frame threshold");
            else if (key == "detect_threshold") p.detect_threshold = iv("detect threshold");
            else if (key == "handeye_stations") p.handeye_stations = iv("stations");
            else if (key == "handeye_test_stations")
                p.handeye_test_stations = iv("test stations");
            else if (key == "correction_points") p.correction_points = iv("points");
            else if (key == "record_samples") p.record_samples = iv("samples");
            else if (key == "relative_poses") p.relative_poses = iv("poses");
            else if (key == "playback_speed") p.playback_speed = dv("speed");
            else if (key == "ransac_iters") p.robust.max_iterations = iv("iterations");
            else if (key == "inlier_px") p.robust.inlier_threshold_px = dv("inlier px");
            else if (key == "rot_threshold_deg") p.robust.rot_threshold_deg = dv("rot thres");
            else if (key == "trans_threshold_mm")
                p.robust.trans_threshold_mm = dv("trans thres");
            else cur.fail("unknown param '" + std::string(key) + "'");
            break;
        }
        }
    }

    if (world2_present) sc.playback_world = world2;
    try {
        sc.world.validate();
        if (sc.playback_world) sc.playback_world->validate();
        sc.params.validate();
        sc.noise.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return sc;
}

} // namespace ghost::sim
