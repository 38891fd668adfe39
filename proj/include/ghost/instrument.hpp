#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ghost/errors.hpp"
#include "ghost/geometry.hpp"

// Articulated-instrument geometry.
//
// An instrument is rendered as four rigid components: shaft, body (clevis),
// and the two jaws.  The robot reports a single end-effector pose, so the
// component poses are reconstructed backward from it through the wrist
// kinematics:
//
//   * The wrist frame w sits a fixed translation behind the end-effector
//     frame: psmTw = Trans(wrist_offset).
//   * Both jaws pivot in the wrist frame, symmetrically split about the jaw
//     axis by +/- jaw/2.
//   * One Denavit-Hartenberg step driven by q7 links the wrist to the body
//     frame (b,locTw), and one driven by q6 links the body to the shaft
//     frame (sh,locTb,loc).  Placement inverts these steps:
//
//       sTw      = pose * psmTw
//       sTjaw_l  = sTw * Rot(axis, +jaw/2)
//       sTjaw_r  = sTw * Rot(axis, -jaw/2)
//       sTb,loc  = sTw * inv(b,locTw(q7))
//       sTsh,loc = sTb,loc * inv(sh,locTb,loc(q6))
//
// forward_wrist walks the same chain in the opposite direction with
// independently written 4x4 matrix arithmetic, giving a self-check:
// forward_wrist(place_components(pose).shaft) == pose.

namespace ghost {

// Classic DH row; theta = q + theta_offset at evaluation time.
struct DhRow {
    double a_mm = 0.0;
    double alpha_rad = 0.0;
    double d_mm = 0.0;
    double theta_offset_rad = 0.0;
};

// T = RotZ(theta) * TransZ(d) * TransX(a) * RotX(alpha)
inline RigidTransform dh_transform(const DhRow& row, double q_rad) {
    const double theta = q_rad + row.theta_offset_rad;
    const RigidTransform rz =
        RigidTransform::from_axis_angle(Eigen::Vector3d::UnitZ(), theta,
                                        Eigen::Vector3d(0.0, 0.0, row.d_mm));
    const RigidTransform rx =
        RigidTransform::from_axis_angle(Eigen::Vector3d::UnitX(), row.alpha_rad,
                                        Eigen::Vector3d(row.a_mm, 0.0, 0.0));
    return compose(rz, rx);
}

struct JointLimits {
    double q6_min_rad = -kPi / 2, q6_max_rad = kPi / 2;
    double q7_min_rad = -kPi / 2, q7_max_rad = kPi / 2;
    double jaw_max_rad = 1.4; // jaw opening is non-negative by convention
};

struct JointState {
    double q6_rad = 0.0;  // wrist pitch
    double q7_rad = 0.0;  // wrist yaw
    double jaw_rad = 0.0; // jaw opening angle (total split between the jaws)
};

struct InstrumentModel {
    std::string id = "lnd";
    DhRow shaft_to_body;              // sh,locTb,loc, driven by q6
    DhRow body_to_wrist;              // b,locTw, driven by q7
    Eigen::Vector3d wrist_offset_mm;  // translation of psmTw
    Eigen::Vector3d jaw_axis{0.0, 0.0, 1.0}; // jaw pivot axis in the wrist frame
    JointLimits limits;
    // Proxy vertices for overlay rendering, one set per component, each in
    // that component's local frame.
    std::vector<Point3> shaft_mesh, body_mesh, jaw_mesh;

    void validate() const {
        if (jaw_axis.norm() < 1e-12)
            throw ValidationError("instrument: jaw axis must be non-zero");
        if (!(limits.q6_min_rad < limits.q6_max_rad) ||
            !(limits.q7_min_rad < limits.q7_max_rad) || !(limits.jaw_max_rad > 0.0))
            throw ValidationError("instrument: malformed joint limits");
        if (shaft_mesh.empty() || body_mesh.empty() || jaw_mesh.empty())
            throw ValidationError("instrument: empty component mesh");
    }

    // Coarse large-needle-driver-class parameters: a two-axis wrist with a
    // short offset link and the jaw pivot at the wrist tip.  Proxy meshes are
    // deliberately simple (cylinder ring, box, wedge).
    static InstrumentModel large_needle_driver() {
        InstrumentModel m;
        m.id = "lnd";
        m.shaft_to_body = {0.0, -kPi / 2, 0.0, kPi / 2};
        m.body_to_wrist = {9.1, -kPi / 2, 0.0, -kPi / 2};
        m.wrist_offset_mm = {0.0, 0.0, -10.2};
        m.jaw_axis = {0.0, 0.0, 1.0};

        const double r = 4.2; // shaft radius
        for (int i = 0; i < 8; ++i) {
            const double ang = 2.0 * kPi * i / 8;
            m.shaft_mesh.push_back({r * std::cos(ang), r * std::sin(ang), 0.0});
            m.shaft_mesh.push_back({r * std::cos(ang), r * std::sin(ang), -90.0});
        }
        for (double sx : {-2.5, 2.5})
            for (double sy : {-2.5, 2.5})
                for (double sz : {-4.5, 4.5}) m.body_mesh.push_back({sx, sy, sz});
        m.jaw_mesh = {{0.0, -1.2, 0.0}, {0.0, 1.2, 0.0},   {0.0, -1.2, 5.0},
                      {0.0, 1.2, 5.0},  {0.0, -0.4, 10.0}, {0.0, 0.4, 10.0}};
        return m;
    }
};

struct ComponentPoses {
    RigidTransform jaw_left, jaw_right, body, shaft; // each sT{component,loc}
};

// Symmetric jaw pivot: the two jaws rotate by +/- jaw/2 about `axis`.
// Negative input is legal and simply mirrors the pair.
inline std::pair<RigidTransform, RigidTransform> jaw_split(
    double jaw_rad, const Eigen::Vector3d& axis = Eigen::Vector3d::UnitZ()) {
    return {RigidTransform::from_axis_angle(axis, +0.5 * jaw_rad),
            RigidTransform::from_axis_angle(axis, -0.5 * jaw_rad)};
}

inline void validate_joints(const JointState& j, const InstrumentModel& m) {
    const JointLimits& l = m.limits;
    if (j.q6_rad < l.q6_min_rad || j.q6_rad > l.q6_max_rad)
        throw ValidationError("joints: q6 outside limits");
    if (j.q7_rad < l.q7_min_rad || j.q7_rad > l.q7_max_rad)
        throw ValidationError("joints: q7 outside limits");
    if (j.jaw_rad < 0.0 || j.jaw_rad > l.jaw_max_rad)
        throw ValidationError("joints: jaw angle outside limits");
}

// Backward placement from the reported end-effector pose (sTpsm).
inline ComponentPoses place_components(const RigidTransform& pose, const JointState& joints,
                                       const InstrumentModel& model) {
    model.validate();
    validate_joints(joints, model);

    RigidTransform psm_t_w;
    psm_t_w.translation = model.wrist_offset_mm;
    const RigidTransform s_t_w = compose(pose, psm_t_w);

    const auto jaws = jaw_split(joints.jaw_rad, model.jaw_axis);

    ComponentPoses out;
    out.jaw_left = compose(s_t_w, jaws.first);
    out.jaw_right = compose(s_t_w, jaws.second);
    out.body = compose(s_t_w, invert(dh_transform(model.body_to_wrist, joints.q7_rad)));
    out.shaft = compose(out.body, invert(dh_transform(model.shaft_to_body, joints.q6_rad)));
    return out;
}

namespace detail {

// Plain 4x4 classic DH matrix, written out entry by entry (kept independent
// of dh_transform on purpose: the two paths cross-check each other).
inline Eigen::Matrix4d dh_matrix(const DhRow& row, double q_rad) {
    const double th = q_rad + row.theta_offset_rad;
    const double ct = std::cos(th), st = std::sin(th);
    const double ca = std::cos(row.alpha_rad), sa = std::sin(row.alpha_rad);
    Eigen::Matrix4d m;
    m << ct, -st * ca, st * sa, row.a_mm * ct,
         st, ct * ca, -ct * sa, row.a_mm * st,
         0.0, sa, ca, row.d_mm,
         0.0, 0.0, 0.0, 1.0;
    return m;
}

} // namespace detail

// Forward wrist chain: shaft pose + joints -> end-effector pose.
inline RigidTransform forward_wrist(const RigidTransform& shaft_pose, const JointState& joints,
                                    const InstrumentModel& model) {
    model.validate();
    validate_joints(joints, model);

    Eigen::Matrix4d w_t_psm = Eigen::Matrix4d::Identity();
    w_t_psm.topRightCorner<3, 1>() = -model.wrist_offset_mm;

    const Eigen::Matrix4d m = shaft_pose.matrix() *
                              detail::dh_matrix(model.shaft_to_body, joints.q6_rad) *
                              detail::dh_matrix(model.body_to_wrist, joints.q7_rad) * w_t_psm;
    return RigidTransform::from_matrix(m);
}

} // namespace ghost
