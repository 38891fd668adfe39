#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ghost/instrument.hpp"
#include "ghost/random.hpp"

using namespace ghost;

namespace {

RigidTransform random_transform(Rng& rng, double span_mm = 150.0) {
    RigidTransform t;
    t.rotation = rng.rotation();
    t.translation = Eigen::Vector3d(rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm));
    return t;
}

JointState random_joints(Rng& rng, const InstrumentModel& m) {
    JointState j;
    j.q6_rad = rng.uniform(m.limits.q6_min_rad, m.limits.q6_max_rad);
    j.q7_rad = rng.uniform(m.limits.q7_min_rad, m.limits.q7_max_rad);
    j.jaw_rad = rng.uniform(0.0, m.limits.jaw_max_rad);
    return j;
}

// A model with arbitrary (but valid) kinematic parameters, to keep the tests
// honest about not depending on the stock numbers.
InstrumentModel random_model(Rng& rng) {
    InstrumentModel m = InstrumentModel::large_needle_driver();
    m.shaft_to_body = {rng.uniform(-15, 15), rng.uniform(-kPi, kPi), rng.uniform(-15, 15),
                       rng.uniform(-kPi, kPi)};
    m.body_to_wrist = {rng.uniform(-15, 15), rng.uniform(-kPi, kPi), rng.uniform(-15, 15),
                       rng.uniform(-kPi, kPi)};
    m.wrist_offset_mm = {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)};
    m.jaw_axis = rng.unit_vector();
    return m;
}

double transform_gap(const RigidTransform& a, const RigidTransform& b) {
    return angular_distance(a.rotation, b.rotation) + (a.translation - b.translation).norm();
}

} // namespace

TEST_CASE("placement then forward chain recovers the pose", "[instrument][property]") {
    Rng rng(301);
    const InstrumentModel stock = InstrumentModel::large_needle_driver();
    for (int i = 0; i < 2000; ++i) {
        // Alternate between the stock model and a randomized one.
        const InstrumentModel m = (i % 2 == 0) ? stock : random_model(rng);
        const RigidTransform pose = random_transform(rng);
        const JointState j = random_joints(rng, m);
        const ComponentPoses placed = place_components(pose, j, m);
        const RigidTransform back = forward_wrist(placed.shaft, j, m);
        REQUIRE(angular_distance(back.rotation, pose.rotation) < 1e-9);
        REQUIRE((back.translation - pose.translation).norm() < 1e-9);
    }
}

TEST_CASE("zero joints reduce to the zero-angle DH products", "[instrument]") {
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    const JointState zero{};
    const RigidTransform pose = RigidTransform::identity();
    const ComponentPoses placed = place_components(pose, zero, m);

    // Long-hand oracle with homogeneous matrices only.
    Eigen::Matrix4d w = Eigen::Matrix4d::Identity();
    w.topRightCorner<3, 1>() = m.wrist_offset_mm;
    const Eigen::Matrix4d body = w * detail::dh_matrix(m.body_to_wrist, 0.0).inverse();
    const Eigen::Matrix4d shaft = body * detail::dh_matrix(m.shaft_to_body, 0.0).inverse();

    REQUIRE((placed.body.matrix() - body).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((placed.shaft.matrix() - shaft).cwiseAbs().maxCoeff() < 1e-12);
    // Closed jaws coincide with the wrist frame.
    REQUIRE((placed.jaw_left.matrix() - w).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((placed.jaw_right.matrix() - w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("placement is equivariant under a global frame change", "[instrument][property]") {
    Rng rng(302);
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    for (int i = 0; i < 300; ++i) {
        const RigidTransform pose = random_transform(rng);
        const RigidTransform g = random_transform(rng);
        const JointState j = random_joints(rng, m);
        const ComponentPoses a = place_components(compose(g, pose), j, m);
        const ComponentPoses b = place_components(pose, j, m);
        REQUIRE(transform_gap(a.jaw_left, compose(g, b.jaw_left)) < 1e-9);
        REQUIRE(transform_gap(a.jaw_right, compose(g, b.jaw_right)) < 1e-9);
        REQUIRE(transform_gap(a.body, compose(g, b.body)) < 1e-9);
        REQUIRE(transform_gap(a.shaft, compose(g, b.shaft)) < 1e-9);
    }
}

TEST_CASE("q7 alone turns the end effector by exactly q7", "[instrument]") {
    Rng rng(303);
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    const RigidTransform shaft = random_transform(rng);
    for (double q7 : {-1.2, -0.3, 0.0, 0.45, 1.5}) {
        JointState a{}, b{};
        b.q7_rad = q7;
        const RigidTransform fa = forward_wrist(shaft, a, m);
        const RigidTransform fb = forward_wrist(shaft, b, m);
        REQUIRE(angular_distance(fa.rotation, fb.rotation) ==
                Catch::Approx(deg_from_rad(std::abs(q7))).margin(1e-9));
    }
}

TEST_CASE("jaw pair opens symmetrically", "[instrument]") {
    Rng rng(304);
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    for (int i = 0; i < 200; ++i) {
        const RigidTransform pose = random_transform(rng);
        JointState j = random_joints(rng, m);
        const ComponentPoses placed = place_components(pose, j, m);
        // Total split between the jaws equals the jaw angle...
        REQUIRE(angular_distance(placed.jaw_left.rotation, placed.jaw_right.rotation) ==
                Catch::Approx(deg_from_rad(j.jaw_rad)).margin(1e-9));
        // ...and both share the pivot point.
        REQUIRE((placed.jaw_left.translation - placed.jaw_right.translation).norm() < 1e-9);
    }

    // Sign mirror: jaw_split(-x) is jaw_split(x) with the pair swapped.
    const auto plus = jaw_split(0.7);
    const auto minus = jaw_split(-0.7);
    REQUIRE(transform_gap(plus.first, minus.second) < 1e-12);
    REQUIRE(transform_gap(plus.second, minus.first) < 1e-12);

    // Closed jaws coincide.
    const auto closed = jaw_split(0.0);
    REQUIRE(transform_gap(closed.first, closed.second) < 1e-15);
}

TEST_CASE("joint limits are enforced", "[instrument][errors]") {
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    const RigidTransform pose = RigidTransform::identity();
    JointState j{};
    j.q6_rad = m.limits.q6_max_rad + 0.1;
    REQUIRE_THROWS_AS(place_components(pose, j, m), ValidationError);
    j = {};
    j.q7_rad = m.limits.q7_min_rad - 0.1;
    REQUIRE_THROWS_AS(place_components(pose, j, m), ValidationError);
    j = {};
    j.jaw_rad = -0.05; // jaws cannot close past zero
    REQUIRE_THROWS_AS(place_components(pose, j, m), ValidationError);
    j = {};
    j.jaw_rad = m.limits.jaw_max_rad + 0.05;
    REQUIRE_THROWS_AS(forward_wrist(pose, j, m), ValidationError);
}

TEST_CASE("model validation rejects malformed instruments", "[instrument][errors]") {
    InstrumentModel m = InstrumentModel::large_needle_driver();
    m.jaw_axis = Eigen::Vector3d::Zero();
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
    m = InstrumentModel::large_needle_driver();
    m.limits.jaw_max_rad = 0.0;
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
    m = InstrumentModel::large_needle_driver();
    m.body_mesh.clear();
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("component spacing depends on joints only", "[instrument][property]") {
    Rng rng(305);
    const InstrumentModel m = InstrumentModel::large_needle_driver();
    const JointState j = random_joints(rng, m);
    const ComponentPoses ref = place_components(RigidTransform::identity(), j, m);
    const double d_bw = (ref.body.translation - ref.jaw_left.translation).norm();
    const double d_sb = (ref.shaft.translation - ref.body.translation).norm();
    for (int i = 0; i < 100; ++i) {
        const ComponentPoses p = place_components(random_transform(rng), j, m);
        REQUIRE((p.body.translation - p.jaw_left.translation).norm() ==
                Catch::Approx(d_bw).margin(1e-9));
        REQUIRE((p.shaft.translation - p.body.translation).norm() ==
                Catch::Approx(d_sb).margin(1e-9));
    }
}
