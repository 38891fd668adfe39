#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "ghost/geometry.hpp"
#include "ghost/random.hpp"

using namespace ghost;

namespace {

RigidTransform random_transform(Rng& rng, double span_mm = 200.0) {
    RigidTransform t;
    t.rotation = rng.rotation();
    t.translation = Eigen::Vector3d(rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm));
    return t;
}

double transform_gap(const RigidTransform& a, const RigidTransform& b) {
    return angular_distance(a.rotation, b.rotation) + (a.translation - b.translation).norm();
}

} // namespace

TEST_CASE("compose and transform_point match homogeneous-matrix algebra", "[geometry]") {
    Rng rng(101);
    for (int i = 0; i < 500; ++i) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const Point3 p(rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-100, 100));

        // Oracle: carry out the same maps with plain 4x4 matrices.
        const Eigen::Matrix4d m = a.matrix() * b.matrix();
        const RigidTransform ab = compose(a, b);
        REQUIRE((ab.matrix() - m).cwiseAbs().maxCoeff() < 1e-12);

        const Eigen::Vector4d ph(p.x(), p.y(), p.z(), 1.0);
        const Eigen::Vector4d q = a.matrix() * ph;
        REQUIRE((transform_point(a, p) - q.head<3>()).norm() < 1e-9);

        // Point map of a composition = composition of point maps.
        REQUIRE((transform_point(ab, p) - transform_point(a, transform_point(b, p))).norm() < 1e-9);
    }
}

TEST_CASE("compose is associative and identity is neutral", "[geometry]") {
    Rng rng(102);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const RigidTransform c = random_transform(rng);
        REQUIRE(transform_gap(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-9);
        REQUIRE(transform_gap(compose(a, RigidTransform::identity()), a) < 1e-12);
        REQUIRE(transform_gap(compose(RigidTransform::identity(), a), a) < 1e-12);
    }
}

TEST_CASE("invert produces the two-sided group inverse", "[geometry]") {
    Rng rng(103);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform a = random_transform(rng);
        REQUIRE(transform_gap(compose(a, invert(a)), RigidTransform::identity()) < 1e-9);
        REQUIRE(transform_gap(compose(invert(a), a), RigidTransform::identity()) < 1e-9);
        REQUIRE(transform_gap(invert(invert(a)), a) < 1e-9);

        // Oracle: matrix inverse.
        REQUIRE((invert(a).matrix() - a.matrix().inverse()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("angular_distance on constructed rotations", "[geometry]") {
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    const auto rz = [&](double deg) {
        return Eigen::Quaterniond(Eigen::AngleAxisd(rad_from_deg(deg), z));
    };
    REQUIRE(angular_distance(rz(10), rz(30)) == Catch::Approx(20.0).margin(1e-10));
    REQUIRE(angular_distance(rz(0), rz(180)) == Catch::Approx(180.0).margin(1e-10));
    REQUIRE(angular_distance(rz(-90), rz(90)) == Catch::Approx(180.0).margin(1e-10));
    // Non-commuting pair with a known relative angle: 90 deg about x then y
    // differ by 120 deg (the relative rotation has trace 0).
    const Eigen::Quaterniond qx(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitX()));
    const Eigen::Quaterniond qy(Eigen::AngleAxisd(kPi / 2, Eigen::Vector3d::UnitY()));
    REQUIRE(angular_distance(qx, qy) == Catch::Approx(120.0).margin(1e-9));
}

TEST_CASE("angular_distance handles the quaternion double cover", "[geometry]") {
    Rng rng(104);
    for (int i = 0; i < 500; ++i) {
        const Eigen::Quaterniond q = rng.rotation();
        const Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
        REQUIRE(angular_distance(q, neg) < 1e-9);
        REQUIRE(angular_distance(neg, q) < 1e-9);
    }
}

TEST_CASE("angular_distance satisfies the metric axioms", "[geometry][property]") {
    Rng rng(105);
    constexpr int kCases = 2000;
    for (int i = 0; i < kCases; ++i) {
        const Eigen::Quaterniond a = rng.rotation();
        const Eigen::Quaterniond b = rng.rotation();
        const Eigen::Quaterniond c = rng.rotation();

        const double dab = angular_distance(a, b);
        const double dba = angular_distance(b, a);
        const double dac = angular_distance(a, c);
        const double dcb = angular_distance(c, b);

        REQUIRE(dab >= 0.0);
        REQUIRE(dab <= 180.0 + 1e-9);
        REQUIRE(angular_distance(a, a) < 1e-9);
        REQUIRE(dab == Catch::Approx(dba).margin(1e-9));
        REQUIRE(dab <= dac + dcb + 1e-9);

        // Left invariance: pre-rotating both arguments preserves distance.
        REQUIRE(angular_distance(c * a, c * b) == Catch::Approx(dab).margin(1e-8));
    }
}

TEST_CASE("angular_distance rejects non-unit quaternions", "[geometry][errors]") {
    const Eigen::Quaterniond bad(2.0, 0.0, 0.0, 0.0);
    REQUIRE_THROWS_AS(angular_distance(bad, Eigen::Quaterniond::Identity()), ValidationError);
    REQUIRE_THROWS_AS(angular_distance(Eigen::Quaterniond::Identity(), bad), ValidationError);
}

TEST_CASE("dual quaternion round trip is exact to 1e-9", "[geometry][property]") {
    Rng rng(106);
    for (int i = 0; i < 2000; ++i) {
        const RigidTransform t = random_transform(rng, 500.0);
        const DualQuaternion dq = to_dual_quaternion(t);

        // Well-formedness invariants of the encoding.
        REQUIRE(std::abs(dq.real.norm() - 1.0) < 1e-9);
        REQUIRE(std::abs(detail::quat_dot(dq.real, dq.dual)) < 1e-9);

        const RigidTransform back = from_dual_quaternion(dq);
        REQUIRE(angular_distance(back.rotation, t.rotation) < 1e-9);
        REQUIRE((back.translation - t.translation).norm() < 1e-9);
    }
}

TEST_CASE("dual quaternion multiplication mirrors compose", "[geometry][property]") {
    Rng rng(107);
    for (int i = 0; i < 500; ++i) {
        const RigidTransform a = random_transform(rng);
        const RigidTransform b = random_transform(rng);
        const DualQuaternion prod = dq_multiply(to_dual_quaternion(a), to_dual_quaternion(b));
        // The product of two unit dual quaternions stays unit...
        REQUIRE(std::abs(prod.real.norm() - 1.0) < 1e-9);
        REQUIRE(std::abs(detail::quat_dot(prod.real, prod.dual)) < 1e-9);
        // ...and decodes to the composed transform.
        REQUIRE(transform_gap(from_dual_quaternion(prod), compose(a, b)) < 1e-8);
    }
}

TEST_CASE("from_dual_quaternion rejects malformed input", "[geometry][errors]") {
    DualQuaternion dq;
    dq.real = Eigen::Quaterniond(2.0, 0.0, 0.0, 0.0); // |real| != 1
    REQUIRE_THROWS_AS(from_dual_quaternion(dq), ValidationError);

    dq.real = Eigen::Quaterniond::Identity();
    dq.dual = Eigen::Quaterniond(1.0, 0.0, 0.0, 0.0); // dot(real, dual) != 0
    REQUIRE_THROWS_AS(from_dual_quaternion(dq), ValidationError);
}

TEST_CASE("constructor validation", "[geometry][errors]") {
    REQUIRE_THROWS_AS(RigidTransform::from_axis_angle(Eigen::Vector3d::Zero(), 1.0),
                      ValidationError);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = 2.0; // scaled block is not a rotation
    REQUIRE_THROWS_AS(RigidTransform::from_matrix(m), ValidationError);
}

TEST_CASE("from_matrix round trips matrix()", "[geometry]") {
    Rng rng(108);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform t = random_transform(rng);
        REQUIRE(transform_gap(RigidTransform::from_matrix(t.matrix()), t) < 1e-9);
    }
}

TEST_CASE("interpolate endpoints and midpoint", "[geometry]") {
    Rng rng(109);
    const RigidTransform a = random_transform(rng);
    const RigidTransform b = random_transform(rng);
    REQUIRE(transform_gap(interpolate(a, b, 0.0), a) < 1e-12);
    REQUIRE(transform_gap(interpolate(a, b, 1.0), b) < 1e-9);

    // Pure rotation: midpoint halves the angle along the same axis.
    const RigidTransform r0 = RigidTransform::identity();
    const RigidTransform r1 =
        RigidTransform::from_axis_angle(Eigen::Vector3d::UnitY(), rad_from_deg(90.0));
    const RigidTransform mid = interpolate(r0, r1, 0.5);
    REQUIRE(angular_distance(mid.rotation, r0.rotation) == Catch::Approx(45.0).margin(1e-9));
    REQUIRE(angular_distance(mid.rotation, r1.rotation) == Catch::Approx(45.0).margin(1e-9));

    // Translation blends linearly.
    RigidTransform ta, tb;
    ta.translation = Eigen::Vector3d(0, 0, 0);
    tb.translation = Eigen::Vector3d(10, -4, 2);
    REQUIRE((interpolate(ta, tb, 0.25).translation - Eigen::Vector3d(2.5, -1, 0.5)).norm() <
            1e-12);
}

TEST_CASE("rng streams are label-independent and reproducible", "[random]") {
    Rng root(42);
    Rng a1 = root.stream("alpha");
    Rng a2 = Rng(42).stream("alpha");
    for (int i = 0; i < 16; ++i) REQUIRE(a1.uniform() == a2.uniform());

    // Distinct labels decorrelate immediately.
    Rng b = root.stream("beta");
    Rng a3 = root.stream("alpha");
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) all_equal = all_equal && (a3.uniform() == b.uniform());
    REQUIRE_FALSE(all_equal);
}

TEST_CASE("rng normal and sphere sampling are sane", "[random]") {
    Rng rng(7);
    double sum = 0.0, sum2 = 0.0;
    constexpr int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.03);
    REQUIRE(var == Catch::Approx(1.0).margin(0.05));

    for (int i = 0; i < 100; ++i) REQUIRE(rng.unit_vector().norm() == Catch::Approx(1.0));
    for (int i = 0; i < 100; ++i)
        REQUIRE(rng.rotation().norm() == Catch::Approx(1.0).margin(1e-12));
}
