#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "ghost/calibration.hpp"
#include "ghost/random.hpp"

using namespace ghost;

namespace {

RigidTransform random_transform(Rng& rng, double span_mm = 100.0) {
    RigidTransform t;
    t.rotation = rng.rotation();
    t.translation = Eigen::Vector3d(rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm));
    return t;
}

// Motion with a bounded rotation angle (well inside screw-sign safety).
RigidTransform random_motion(Rng& rng, double max_angle_rad = 0.7, double span_mm = 40.0) {
    RigidTransform t;
    t.rotation = Eigen::Quaterniond(
        Eigen::AngleAxisd(rng.uniform(0.2, max_angle_rad), rng.unit_vector()));
    t.translation = Eigen::Vector3d(rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm),
                                    rng.uniform(-span_mm, span_mm));
    return t;
}

double transform_gap(const RigidTransform& a, const RigidTransform& b) {
    return angular_distance(a.rotation, b.rotation) + (a.translation - b.translation).norm();
}

// Congruent pair set for a known x: a_i = x * b_i * inv(x).
std::vector<MotionPair> congruent_pairs(Rng& rng, const RigidTransform& x, int n) {
    std::vector<MotionPair> out;
    for (int i = 0; i < n; ++i) {
        MotionPair p;
        p.b = random_motion(rng);
        p.a = compose(compose(x, p.b), invert(x));
        out.push_back(p);
    }
    return out;
}

} // namespace

TEST_CASE("build_motion_pairs forms relative motions", "[calibration]") {
    Rng rng(401);
    std::vector<RigidTransform> cams, robots;
    for (int i = 0; i < 31; ++i) {
        cams.push_back(random_transform(rng));
        robots.push_back(random_transform(rng));
    }
    const auto pairs = build_motion_pairs(cams, robots);
    REQUIRE(pairs.size() == 30);
    // Spot-check the definition at an arbitrary index.
    const int i = 12;
    REQUIRE(transform_gap(pairs[i].a, compose(cams[i], invert(cams[i + 1]))) < 1e-9);
    REQUIRE(transform_gap(pairs[i].b, compose(invert(robots[i]), robots[i + 1])) < 1e-9);
    // A static interval yields identity motions on both sides.
    std::vector<RigidTransform> stat(3, cams[0]);
    const auto idpairs = build_motion_pairs(stat, stat);
    for (const auto& p : idpairs) {
        REQUIRE(transform_gap(p.a, RigidTransform::identity()) < 1e-9);
        REQUIRE(transform_gap(p.b, RigidTransform::identity()) < 1e-9);
    }
}

TEST_CASE("build_motion_pairs validation", "[calibration][errors]") {
    Rng rng(402);
    std::vector<RigidTransform> a{random_transform(rng), random_transform(rng)};
    std::vector<RigidTransform> b{random_transform(rng)};
    REQUIRE_THROWS_AS(build_motion_pairs(a, b), ValidationError);
    std::vector<RigidTransform> one{random_transform(rng)};
    REQUIRE_THROWS_AS(build_motion_pairs(one, one), ValidationError);
}

TEST_CASE("hand-eye solve recovers a constructed mount exactly", "[calibration]") {
    Rng rng(403);
    RobustConfig cfg;
    for (int trial = 0; trial < 20; ++trial) {
        const RigidTransform x = random_transform(rng, 60.0);
        const auto pairs = congruent_pairs(rng, x, 30);
        const HandEyeResult r = solve_handeye(pairs, cfg);
        REQUIRE(angular_distance(r.x.rotation, x.rotation) < 1e-6);
        REQUIRE((r.x.translation - x.translation).norm() < 1e-6);
        REQUIRE(std::all_of(r.inliers.begin(), r.inliers.end(), [](bool v) { return v; }));
        REQUIRE(r.rot_residual_deg < 1e-6);
        REQUIRE(r.trans_residual_mm < 1e-6);
    }
}

TEST_CASE("hand-eye via physical pose streams", "[calibration]") {
    // Simulated rig: robot poses baseTe_i, fixed mount m = eTc, static scene
    // w = baseTs.  Camera sees cTs_i = inv(m) * inv(baseTe_i) * w, so the
    // motion pairs satisfy a * inv(m) = inv(m) * b: the solver returns the
    // mount's inverse and the caller inverts it back.
    Rng rng(404);
    const RigidTransform m = random_transform(rng, 50.0);
    const RigidTransform w = random_transform(rng, 200.0);
    std::vector<RigidTransform> cams, robots;
    RigidTransform e = random_transform(rng, 150.0);
    for (int i = 0; i < 31; ++i) {
        e = compose(e, random_motion(rng, 0.5, 25.0));
        robots.push_back(e);
        cams.push_back(compose(invert(m), compose(invert(e), w)));
    }
    const HandEyeResult r = solve_handeye(build_motion_pairs(cams, robots), RobustConfig{});
    REQUIRE(transform_gap(r.x, invert(m)) < 1e-6);
    REQUIRE(transform_gap(invert(r.x), m) < 1e-6);
}

TEST_CASE("hand-eye excludes corrupted motions", "[calibration]") {
    Rng rng(405);
    RobustConfig cfg;
    cfg.seed = 17;
    const RigidTransform x = random_transform(rng, 60.0);
    auto pairs = congruent_pairs(rng, x, 30);
    // Corrupt 6 of 30 pairs (20%) with unrelated motions.
    std::vector<bool> corrupted(pairs.size(), false);
    for (int j : {2, 7, 11, 18, 23, 29}) {
        pairs[j].a = random_motion(rng);
        corrupted[j] = true;
    }
    const HandEyeResult r = solve_handeye(pairs, cfg);
    REQUIRE(angular_distance(r.x.rotation, x.rotation) < 1e-6);
    REQUIRE((r.x.translation - x.translation).norm() < 1e-6);
    for (size_t i = 0; i < pairs.size(); ++i)
        REQUIRE(r.inliers[i] == !corrupted[i]);
}

TEST_CASE("hand-eye degeneracy gates", "[calibration][errors]") {
    Rng rng(406);
    const RigidTransform x = random_transform(rng, 60.0);

    SECTION("parallel rotation axes leave translation unobservable") {
        std::vector<MotionPair> pairs;
        const Eigen::Vector3d axis = rng.unit_vector();
        for (int i = 0; i < 10; ++i) {
            MotionPair p;
            p.b = RigidTransform::from_axis_angle(
                axis, rng.uniform(0.2, 0.6),
                Eigen::Vector3d(rng.uniform(-30, 30), rng.uniform(-30, 30),
                                rng.uniform(-30, 30)));
            p.a = compose(compose(x, p.b), invert(x));
            pairs.push_back(p);
        }
        REQUIRE_THROWS_AS(solve_handeye(pairs, RobustConfig{}), UnobservableTranslationError);
    }

    SECTION("nearly parallel axes are still unobservable") {
        std::vector<MotionPair> pairs;
        const Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
        for (int i = 0; i < 10; ++i) {
            // Tilt each axis well under 2 degrees so every pairwise spread
            // stays below the 5-degree observability gate.
            const Eigen::Vector3d ax =
                (axis + 0.012 * Eigen::Vector3d(rng.normal(), rng.normal(), 0.0)).normalized();
            MotionPair p;
            p.b = RigidTransform::from_axis_angle(ax, rng.uniform(0.3, 0.6),
                                                  Eigen::Vector3d(1, 2, 3));
            p.a = compose(compose(x, p.b), invert(x));
            pairs.push_back(p);
        }
        REQUIRE_THROWS_AS(solve_handeye(pairs, RobustConfig{}), UnobservableTranslationError);
    }

    SECTION("fewer than two rotating motions") {
        std::vector<MotionPair> pairs;
        MotionPair rotating;
        rotating.b = random_motion(rng);
        rotating.a = compose(compose(x, rotating.b), invert(x));
        pairs.push_back(rotating);
        for (int i = 0; i < 5; ++i) {
            MotionPair p; // pure translations carry no hand-eye information
            p.b.translation = {rng.uniform(-30, 30), rng.uniform(-30, 30), 0.0};
            p.a = compose(compose(x, p.b), invert(x));
            pairs.push_back(p);
        }
        REQUIRE_THROWS_AS(solve_handeye(pairs, RobustConfig{}), UnobservableTranslationError);
    }

    SECTION("a static recording is unobservable, not merely small") {
        // Identity motions on both sides: plenty of pairs, no information.
        const std::vector<MotionPair> pairs(8);
        REQUIRE_THROWS_AS(solve_handeye(pairs, RobustConfig{}), UnobservableTranslationError);
    }

    SECTION("fewer than two pairs") {
        REQUIRE_THROWS_AS(solve_handeye({}, RobustConfig{}), InsufficientDataError);
        const std::vector<MotionPair> one(1);
        REQUIRE_THROWS_AS(solve_handeye(one, RobustConfig{}), InsufficientDataError);
    }
}

TEST_CASE("hand-eye works at the two-pair minimum", "[calibration]") {
    Rng rng(407);
    const RigidTransform x = random_transform(rng, 40.0);
    std::vector<MotionPair> pairs;
    MotionPair p1, p2;
    p1.b = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitX(), 0.5,
                                           Eigen::Vector3d(10, 0, 5));
    p2.b = RigidTransform::from_axis_angle(Eigen::Vector3d::UnitY(), 0.4,
                                           Eigen::Vector3d(-5, 8, 2));
    p1.a = compose(compose(x, p1.b), invert(x));
    p2.a = compose(compose(x, p2.b), invert(x));
    pairs = {p1, p2};
    const HandEyeResult r = solve_handeye(pairs, RobustConfig{});
    REQUIRE(transform_gap(r.x, x) < 1e-6);
}

TEST_CASE("hand-eye is deterministic for a fixed seed", "[calibration]") {
    Rng rng(408);
    RobustConfig cfg;
    cfg.seed = 1234;
    const RigidTransform x = random_transform(rng, 60.0);
    auto pairs = congruent_pairs(rng, x, 20);
    pairs[3].a = random_motion(rng); // one outlier keeps RANSAC honest
    const HandEyeResult a = solve_handeye(pairs, cfg);
    const HandEyeResult b = solve_handeye(pairs, cfg);
    REQUIRE(a.x.rotation.coeffs() == b.x.rotation.coeffs());
    REQUIRE(a.x.translation == b.x.translation);
    REQUIRE(a.inliers == b.inliers);
}

// ---------------------------------------------------------------------------

namespace {

// Brute-force rigid-fit oracle: coarse search over rotation space followed
// by shrinking local refinement; translation is closed-form per rotation.
double brute_force_fit_rms(const PointPairSet& pairs) {
    const int n = static_cast<int>(pairs.actual.size());
    Point3 ca = Point3::Zero(), cr = Point3::Zero();
    for (int i = 0; i < n; ++i) {
        ca += pairs.actual[i];
        cr += pairs.reported[i];
    }
    ca /= n;
    cr /= n;

    const auto rms_for = [&](const Eigen::Quaterniond& q) {
        const Eigen::Vector3d t = ca - q * cr;
        double ss = 0.0;
        for (int i = 0; i < n; ++i)
            ss += (pairs.actual[i] - (q * pairs.reported[i] + t)).squaredNorm();
        return std::sqrt(ss / n);
    };

    // Coarse pass: Fibonacci-sphere axes x angle sweep.
    Eigen::Quaterniond best = Eigen::Quaterniond::Identity();
    double best_rms = rms_for(best);
    constexpr int kAxes = 150;
    for (int i = 0; i < kAxes; ++i) {
        const double zc = 1.0 - 2.0 * (i + 0.5) / kAxes;
        const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
        const double phi = i * 2.399963229728653; // golden angle
        const Eigen::Vector3d axis(r * std::cos(phi), r * std::sin(phi), zc);
        for (int a = 1; a < 36; ++a) {
            const Eigen::Quaterniond q(Eigen::AngleAxisd(a * kPi / 18.0, axis));
            const double v = rms_for(q);
            if (v < best_rms) {
                best_rms = v;
                best = q;
            }
        }
    }
    // Refinement: shrinking random perturbations.
    Rng rng(0xABCDEF);
    double step = 0.2;
    while (step > 1e-9) {
        bool improved = false;
        for (int i = 0; i < 60; ++i) {
            const Eigen::Quaterniond q =
                Eigen::Quaterniond(Eigen::AngleAxisd(step, rng.unit_vector())) * best;
            const double v = rms_for(q);
            if (v < best_rms) {
                best_rms = v;
                best = q;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    return best_rms;
}

} // namespace

TEST_CASE("kabsch recovers constructed rigid motions exactly", "[calibration]") {
    Rng rng(409);
    for (int trial = 0; trial < 200; ++trial) {
        const RigidTransform truth = random_transform(rng, 80.0);
        PointPairSet pairs;
        const int n = rng.uniform_int(3, 12);
        for (int i = 0; i < n; ++i) {
            const Point3 p(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
            pairs.reported.push_back(p);
            pairs.actual.push_back(transform_point(truth, p));
        }
        // Guard against randomly collinear draws.
        if (n == 3 && ((pairs.reported[1] - pairs.reported[0])
                           .cross(pairs.reported[2] - pairs.reported[0])
                           .norm() < 1e-6))
            continue;
        const RigidTransform fit = kabsch_umeyama(pairs);
        REQUIRE(angular_distance(fit.rotation, truth.rotation) < 1e-9);
        REQUIRE((fit.translation - truth.translation).norm() < 1e-9);
    }
}

TEST_CASE("kabsch never returns a reflection", "[calibration][property]") {
    Rng rng(410);
    for (int trial = 0; trial < 500; ++trial) {
        PointPairSet pairs;
        // Unrelated clouds: nothing stops a reflection except the solver.
        for (int i = 0; i < 4; ++i) {
            pairs.reported.push_back(
                {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)});
            pairs.actual.push_back(
                {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)});
        }
        const RigidTransform fit = kabsch_umeyama(pairs);
        REQUIRE(fit.rotation.toRotationMatrix().determinant() ==
                Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("kabsch attains the brute-force optimum", "[calibration][oracle]") {
    Rng rng(411);
    for (int trial = 0; trial < 5; ++trial) {
        const RigidTransform truth = random_transform(rng, 30.0);
        PointPairSet pairs;
        for (int i = 0; i < 4; ++i) {
            const Point3 p(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30));
            pairs.reported.push_back(p);
            // Perturbed targets: the optimum is nontrivial.
            pairs.actual.push_back(transform_point(truth, p) +
                                   Point3(rng.normal(0, 2), rng.normal(0, 2), rng.normal(0, 2)));
        }
        const RigidTransform fit = kabsch_umeyama(pairs);
        double ss = 0.0;
        for (int i = 0; i < 4; ++i)
            ss += (pairs.actual[i] - transform_point(fit, pairs.reported[i])).squaredNorm();
        const double fit_rms = std::sqrt(ss / 4.0);
        const double oracle = brute_force_fit_rms(pairs);
        REQUIRE(fit_rms <= oracle + 1e-6);
    }
}

TEST_CASE("kabsch degeneracies", "[calibration][errors]") {
    PointPairSet pairs;
    pairs.actual = {{0, 0, 0}, {1, 0, 0}};
    pairs.reported = {{0, 0, 0}, {1, 0, 0}};
    REQUIRE_THROWS_AS(kabsch_umeyama(pairs), DegenerateConfigurationError);

    pairs.actual = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    pairs.reported = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    REQUIRE_THROWS_AS(kabsch_umeyama(pairs), DegenerateConfigurationError);

    pairs.actual = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    pairs.reported = {{0, 0, 0}, {1, 0, 0}};
    REQUIRE_THROWS_AS(kabsch_umeyama(pairs), ValidationError);

    // Zero-spread clouds are legal: pure centroid translation, identity
    // rotation.
    PointPairSet same;
    for (int i = 0; i < 4; ++i) {
        same.reported.push_back({1, 2, 3});
        same.actual.push_back({4, 0, -1});
    }
    const RigidTransform fit = kabsch_umeyama(same);
    REQUIRE(angular_distance(fit.rotation, Eigen::Quaterniond::Identity()) < 1e-12);
    REQUIRE((fit.translation - Point3(3, -2, -4)).norm() < 1e-12);
}

TEST_CASE("fit_correction recovers exact fits and rejects outliers", "[calibration]") {
    Rng rng(412);
    RobustConfig cfg;

    SECTION("noiseless eight-point fit") {
        const RigidTransform truth = random_transform(rng, 40.0);
        PointPairSet pairs;
        for (int i = 0; i < 8; ++i) {
            const Point3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60));
            pairs.reported.push_back(p);
            pairs.actual.push_back(transform_point(truth, p));
        }
        const CorrectionFit fit = fit_correction(pairs, cfg);
        REQUIRE(angular_distance(fit.correction.rotation, truth.rotation) < 1e-9);
        REQUIRE((fit.correction.translation - truth.translation).norm() < 1e-9);
        REQUIRE(std::all_of(fit.inliers.begin(), fit.inliers.end(), [](bool v) { return v; }));
        REQUIRE(fit.inlier_rms_mm < 1e-9);
    }

    SECTION("two of eight pairs are gross outliers") {
        const RigidTransform truth = random_transform(rng, 40.0);
        PointPairSet pairs;
        for (int i = 0; i < 8; ++i) {
            const Point3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60));
            pairs.reported.push_back(p);
            pairs.actual.push_back(transform_point(truth, p));
        }
        pairs.actual[1] += Point3(35, -20, 10);
        pairs.actual[6] += Point3(-25, 30, -40);
        const CorrectionFit fit = fit_correction(pairs, cfg);
        REQUIRE(angular_distance(fit.correction.rotation, truth.rotation) < 1e-9);
        REQUIRE((fit.correction.translation - truth.translation).norm() < 1e-9);
        REQUIRE_FALSE(fit.inliers[1]);
        REQUIRE_FALSE(fit.inliers[6]);
        for (int i : {0, 2, 3, 4, 5, 7}) REQUIRE(fit.inliers[i]);
        // Residual bookkeeping matches an independent recomputation.
        for (int i = 0; i < 8; ++i) {
            const double e =
                (pairs.actual[i] - transform_point(fit.correction, pairs.reported[i])).norm();
            REQUIRE(fit.residuals_mm[i] == Catch::Approx(e).margin(1e-12));
        }
    }

    SECTION("pair order does not change the noiseless fit") {
        const RigidTransform truth = random_transform(rng, 40.0);
        PointPairSet pairs;
        for (int i = 0; i < 8; ++i) {
            const Point3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60));
            pairs.reported.push_back(p);
            pairs.actual.push_back(transform_point(truth, p));
        }
        const CorrectionFit base = fit_correction(pairs, cfg);
        PointPairSet rev;
        for (int i = 7; i >= 0; --i) {
            rev.reported.push_back(pairs.reported[i]);
            rev.actual.push_back(pairs.actual[i]);
        }
        const CorrectionFit flipped = fit_correction(rev, cfg);
        REQUIRE(transform_gap(base.correction, flipped.correction) < 1e-9);
    }

    SECTION("identical points yield the identity-rotation translation") {
        PointPairSet pairs;
        for (int i = 0; i < 5; ++i) {
            pairs.reported.push_back({2, 2, 2});
            pairs.actual.push_back({5, 1, 2});
        }
        const CorrectionFit fit = fit_correction(pairs, cfg);
        REQUIRE(angular_distance(fit.correction.rotation, Eigen::Quaterniond::Identity()) <
                1e-12);
        REQUIRE((fit.correction.translation - Point3(3, -1, 0)).norm() < 1e-12);
    }

    SECTION("error paths") {
        PointPairSet pairs;
        pairs.actual = {{0, 0, 0}, {1, 1, 1}};
        pairs.reported = {{0, 0, 0}, {1, 1, 1}};
        REQUIRE_THROWS_AS(fit_correction(pairs, cfg), InsufficientDataError);

        PointPairSet line;
        for (int i = 0; i < 6; ++i) {
            line.reported.push_back({double(i), 0, 0});
            line.actual.push_back({double(i), 1, 0});
        }
        REQUIRE_THROWS_AS(fit_correction(line, cfg), DegenerateConfigurationError);
    }
}

TEST_CASE("fit_correction is deterministic", "[calibration]") {
    Rng rng(413);
    RobustConfig cfg;
    cfg.seed = 77;
    const RigidTransform truth = random_transform(rng, 40.0);
    PointPairSet pairs;
    for (int i = 0; i < 40; ++i) { // large set: forces the random-sampling path
        const Point3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-60, 60));
        pairs.reported.push_back(p);
        pairs.actual.push_back(transform_point(truth, p) +
                               Point3(rng.normal(0, 0.3), rng.normal(0, 0.3),
                                      rng.normal(0, 0.3)));
    }
    const CorrectionFit a = fit_correction(pairs, cfg);
    const CorrectionFit b = fit_correction(pairs, cfg);
    REQUIRE(a.correction.rotation.coeffs() == b.correction.rotation.coeffs());
    REQUIRE(a.correction.translation == b.correction.translation);
    REQUIRE(a.inliers == b.inliers);
}
