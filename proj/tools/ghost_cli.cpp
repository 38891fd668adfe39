// Command-line front end for the ghost library: scene registration, hand-eye
// calibration, kinematic-error correction fitting, trajectory recording,
// playback, and full scenario evaluation.  Every subcommand reads and writes
// the plain-text formats defined in ghost/io.hpp, prints a ghostreport to
// stdout, and is deterministic byte-for-byte under fixed inputs and seed.
//
// Exit codes partition the failure classes:
//   0 success            4 degenerate geometry
//   1 internal error     5 unobservable translation
//   2 parse / file IO    6 no robust consensus
//   3 insufficient data  7 invalid value or configuration

#include <cstdio>
#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghost/io.hpp"
#include "ghost/simulator.hpp"

using namespace ghost;

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return 2;
    if (dynamic_cast<const InsufficientDetectionsError*>(&e)) return 3;
    if (dynamic_cast<const InsufficientDataError*>(&e)) return 3;
    if (dynamic_cast<const DegenerateConfigurationError*>(&e)) return 4;
    if (dynamic_cast<const BehindCameraError*>(&e)) return 4;
    if (dynamic_cast<const UnobservableTranslationError*>(&e)) return 5;
    if (dynamic_cast<const NoConsensusError*>(&e)) return 6;
    if (dynamic_cast<const ValidationError*>(&e)) return 7;
    return 1;
}

void emit(const io::Report& rep, const std::string& report_path) {
    const std::string text = rep.serialize();
    std::fwrite(text.data(), 1, text.size(), stdout);
    if (!report_path.empty()) io::write_file(report_path, text);
}

void echo_robust(io::Report& rep, const RobustConfig& cfg) {
    rep.add("config.seed", static_cast<long long>(cfg.seed));
    rep.add("config.ransac_iters", cfg.max_iterations);
    rep.add("config.inlier_px", cfg.inlier_threshold_px);
    rep.add("config.rot_thres_deg", cfg.rot_threshold_deg);
    rep.add("config.trans_thres_mm", cfg.trans_threshold_mm);
}

struct RegisterArgs {
    std::string detections, map, intrinsics, out, report;
    int frame_thres = 10;
    int detect_thres = 10;
    RobustConfig cfg;
};

int run_register(const RegisterArgs& a) {
    const std::vector<DetectionBatch> frames = io::read_detections(io::read_file(a.detections));
    const FiducialMap map = io::read_fiducial_map(io::read_file(a.map));
    const CameraIntrinsics k = io::read_intrinsics(io::read_file(a.intrinsics));

    const PnPResult r = register_scene(frames, map, k, a.cfg, a.frame_thres, a.detect_thres);
    io::write_file(a.out, io::write_pose(r.camera_from_scene));

    io::Report rep;
    rep.add("config.command", std::string("register"));
    rep.add("config.detections", a.detections);
    rep.add("config.map", a.map);
    rep.add("config.intrinsics", a.intrinsics);
    rep.add("config.frame_thres", a.frame_thres);
    rep.add("config.detect_thres", a.detect_thres);
    echo_robust(rep, a.cfg);
    long long inliers = 0;
    for (const bool b : r.inliers) inliers += b ? 1 : 0;
    rep.add("registration.correspondences", static_cast<long long>(r.inliers.size()));
    rep.add("registration.inliers", inliers);
    rep.add("registration.rms_px", r.rms_px);
    rep.add("registration.iterations", r.iterations);
    emit(rep, a.report);
    return 0;
}

struct HandeyeArgs {
    std::string robot, camera, robot_test, camera_test, out, report;
    RobustConfig cfg;
};

int run_calibrate_handeye(const HandeyeArgs& a) {
    const std::vector<RigidTransform> robot = io::read_pose_sequence(io::read_file(a.robot));
    const std::vector<RigidTransform> cam = io::read_pose_sequence(io::read_file(a.camera));
    const std::vector<MotionPair> pairs = build_motion_pairs(cam, robot);
    const HandEyeResult hr = solve_handeye(pairs, a.cfg);
    // The solver works in camera<-robot; sessions consume the mount the
    // other way round.
    io::write_file(a.out, io::write_pose(invert(hr.x)));

    io::Report rep;
    rep.add("config.command", std::string("calibrate-handeye"));
    rep.add("config.robot", a.robot);
    rep.add("config.camera", a.camera);
    if (!a.robot_test.empty()) {
        rep.add("config.robot_test", a.robot_test);
        rep.add("config.camera_test", a.camera_test);
    }
    echo_robust(rep, a.cfg);
    long long inliers = 0;
    for (const bool b : hr.inliers) inliers += b ? 1 : 0;
    rep.add("handeye.train.motions", static_cast<long long>(pairs.size()));
    rep.add("handeye.train.inliers", inliers);
    rep.add("handeye.train.angle_deg", hr.rot_residual_deg);
    rep.add("handeye.train.l2_mm", hr.trans_residual_mm);
    rep.add("handeye.train.iterations", hr.iterations);

    if (!a.robot_test.empty()) {
        const std::vector<RigidTransform> robot2 =
            io::read_pose_sequence(io::read_file(a.robot_test));
        const std::vector<RigidTransform> cam2 =
            io::read_pose_sequence(io::read_file(a.camera_test));
        const std::vector<MotionPair> test = build_motion_pairs(cam2, robot2);
        double rr = 0.0, tt = 0.0;
        for (const MotionPair& p : test) {
            const detail::ScrewResidual res = detail::handeye_residual(p, hr.x);
            rr += res.rot_deg * res.rot_deg;
            tt += res.trans_mm * res.trans_mm;
        }
        const double n = static_cast<double>(test.size());
        rep.add("handeye.test.motions", static_cast<long long>(test.size()));
        rep.add("handeye.test.angle_deg", std::sqrt(rr / n));
        rep.add("handeye.test.l2_mm", std::sqrt(tt / n));
    }
    emit(rep, a.report);
    return 0;
}

struct CorrectionArgs {
    std::string pairs, out, report;
    RobustConfig cfg;
};

int run_fit_correction(const CorrectionArgs& a) {
    const PointPairSet pairs = io::read_point_pairs(io::read_file(a.pairs));
    const CorrectionFit fit = fit_correction(pairs, a.cfg);
    io::write_file(a.out, io::write_pose(fit.correction));

    io::Report rep;
    rep.add("config.command", std::string("fit-correction"));
    rep.add("config.pairs", a.pairs);
    echo_robust(rep, a.cfg);
    long long inliers = 0;
    for (const bool b : fit.inliers) inliers += b ? 1 : 0;
    rep.add("correction.pairs", static_cast<long long>(pairs.actual.size()));
    rep.add("correction.inliers", inliers);
    rep.add("correction.inlier_rms_mm", fit.inlier_rms_mm);
    rep.add("correction.iterations", fit.iterations);
    emit(rep, a.report);
    return 0;
}

struct ScenarioArgs {
    std::string scenario, out, report, preset;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

sim::Scenario load_scenario(const ScenarioArgs& a) {
    sim::Scenario sc = sim::parse_scenario(io::read_file(a.scenario));
    if (!a.preset.empty()) {
        const std::uint64_t keep = sc.noise.seed;
        if (a.preset == "none") sc.noise = sim::NoiseSpec::none();
        else if (a.preset == "benchtop") sc.noise = sim::NoiseSpec::benchtop();
        else throw ValidationError("unknown noise preset '" + a.preset + "'");
        sc.noise.seed = keep;
    }
    if (a.seed_set) sc.noise.seed = a.seed;
    return sc;
}

void echo_scenario(io::Report& rep, const ScenarioArgs& a, const char* command) {
    rep.add("config.command", std::string(command));
    rep.add("config.scenario", a.scenario);
    if (!a.preset.empty()) rep.add("config.preset", a.preset);
}

int run_record(const ScenarioArgs& a) {
    const sim::Scenario sc = load_scenario(a);
    const sim::ScenarioResult res = sim::run_scenario(sc);
    io::write_file(a.out, io::write_trajectory(res.trajectory));

    io::Report rep;
    echo_scenario(rep, a, "record");
    rep.rows.insert(rep.rows.end(), res.report.rows.begin(), res.report.rows.end());
    emit(rep, a.report);
    return 0;
}

int run_evaluate(const ScenarioArgs& a) {
    const sim::Scenario sc = load_scenario(a);
    const sim::ScenarioResult res = sim::run_scenario(sc);

    io::Report rep;
    echo_scenario(rep, a, "evaluate");
    rep.rows.insert(rep.rows.end(), res.report.rows.begin(), res.report.rows.end());
    emit(rep, a.report);
    return 0;
}

struct PlaybackArgs {
    std::string traj, out, resave, report;
    double speed = 1.0;
    double fps = 30.0;
};

int run_playback(const PlaybackArgs& a) {
    if (!(a.speed > 0.0)) throw ValidationError("playback: speed must be positive");
    if (!(a.fps > 0.0)) throw ValidationError("playback: fps must be positive");
    const Trajectory traj = io::read_trajectory(io::read_file(a.traj));

    // Overlay stream: the recorded tool pose replayed into the left camera of
    // the stored session at a fixed tick rate.  With the arm parked at the
    // session's registration pose the view transform is the registration
    // itself; duration scales inversely with playback speed.
    const double duration = (traj.t_end() - traj.t_begin()) / a.speed;
    const long long ticks = static_cast<long long>(duration * a.fps + 1e-9) + 1;
    std::vector<RigidTransform> stream;
    stream.reserve(static_cast<size_t>(ticks));
    const RigidTransform view =
        view_to_scene(traj.session, traj.session.ecm_initial, CameraSide::left);
    for (long long k = 0; k < ticks; ++k) {
        const TrajectorySample s =
            playback_iter(traj, a.speed, static_cast<double>(k) / a.fps);
        stream.push_back(compose(view, s.pose));
    }
    if (!a.out.empty()) io::write_file(a.out, io::write_pose_sequence(stream));
    if (!a.resave.empty()) io::write_file(a.resave, io::write_trajectory(traj));

    io::Report rep;
    rep.add("config.command", std::string("playback"));
    rep.add("config.traj", a.traj);
    rep.add("config.speed", a.speed);
    rep.add("config.fps", a.fps);
    rep.add("playback.samples", static_cast<long long>(traj.samples.size()));
    rep.add("playback.t_begin_s", traj.t_begin());
    rep.add("playback.t_end_s", traj.t_end());
    rep.add("playback.duration_s", duration);
    rep.add("playback.ticks", ticks);
    emit(rep, a.report);
    return 0;
}

void add_robust_flags(CLI::App* cmd, RobustConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "Seed for the robust-estimation draws");
    cmd->add_option("--ransac-iters", cfg.max_iterations, "Robust hypothesis budget")
        ->capture_default_str();
    cmd->add_option("--inlier-px", cfg.inlier_threshold_px,
                    "Reprojection inlier gate (pixels)")
        ->capture_default_str();
    cmd->add_option("--rot-thres-deg", cfg.rot_threshold_deg,
                    "Motion-pair rotation inlier gate (degrees)")
        ->capture_default_str();
    cmd->add_option("--trans-thres-mm", cfg.trans_threshold_mm,
                    "Translation inlier gate (millimetres)")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Setup-invariant record/playback geometry for teleoperated instruments"};
    app.require_subcommand(1);

    RegisterArgs reg;
    CLI::App* c_reg = app.add_subcommand(
        "register", "Estimate the camera-from-scene pose from marker detections");
    c_reg->add_option("--detections", reg.detections, "Detection batches file")->required();
    c_reg->add_option("--map", reg.map, "Fiducial map file")->required();
    c_reg->add_option("--intrinsics", reg.intrinsics, "Camera intrinsics file")->required();
    c_reg->add_option("--out", reg.out, "Output pose file")->required();
    c_reg->add_option("--report", reg.report, "Also write the report here");
    c_reg->add_option("--frames", reg.frame_thres, "Frame-count gate")
        ->capture_default_str();
    c_reg->add_option("--detect-thres", reg.detect_thres, "Detection-count gate")
        ->capture_default_str();
    add_robust_flags(c_reg, reg.cfg);

    HandeyeArgs he;
    CLI::App* c_he = app.add_subcommand(
        "calibrate-handeye", "Solve the camera mount from paired pose sequences");
    c_he->add_option("--robot", he.robot, "Robot-side pose sequence")->required();
    c_he->add_option("--camera", he.camera, "Camera-side pose sequence")->required();
    CLI::Option* rt =
        c_he->add_option("--robot-test", he.robot_test, "Held-out robot-side sequence");
    CLI::Option* ct =
        c_he->add_option("--camera-test", he.camera_test, "Held-out camera-side sequence");
    rt->needs(ct);
    ct->needs(rt);
    c_he->add_option("--out", he.out, "Output mount pose file")->required();
    c_he->add_option("--report", he.report, "Also write the report here");
    add_robust_flags(c_he, he.cfg);

    CorrectionArgs fc;
    CLI::App* c_fc = app.add_subcommand(
        "fit-correction", "Fit the rigid kinematic-error correction from point pairs");
    c_fc->add_option("--pairs", fc.pairs, "Reported/actual point-pair file")->required();
    c_fc->add_option("--out", fc.out, "Output correction pose file")->required();
    c_fc->add_option("--report", fc.report, "Also write the report here");
    add_robust_flags(c_fc, fc.cfg);

    ScenarioArgs rec;
    CLI::App* c_rec = app.add_subcommand(
        "record", "Run a scenario's recording pipeline and save the trajectory");
    c_rec->add_option("--scenario", rec.scenario, "Scenario file")->required();
    c_rec->add_option("--out", rec.out, "Output trajectory file")->required();
    c_rec->add_option("--report", rec.report, "Also write the report here");
    CLI::Option* rec_seed =
        c_rec->add_option("--seed", rec.seed, "Override the scenario noise seed");
    c_rec->add_option("--preset", rec.preset, "Override the noise preset (none|benchtop)");

    PlaybackArgs pb;
    CLI::App* c_pb = app.add_subcommand(
        "playback", "Replay a recorded trajectory as a camera-frame overlay stream");
    c_pb->add_option("--traj", pb.traj, "Trajectory file")->required();
    c_pb->add_option("--speed", pb.speed, "Playback speed factor")->capture_default_str();
    c_pb->add_option("--fps", pb.fps, "Overlay stream tick rate")->capture_default_str();
    c_pb->add_option("--out", pb.out, "Output overlay pose-sequence file");
    c_pb->add_option("--resave", pb.resave, "Re-serialize the parsed trajectory here");
    c_pb->add_option("--report", pb.report, "Also write the report here");

    ScenarioArgs ev;
    CLI::App* c_ev = app.add_subcommand(
        "evaluate", "Run a scenario end to end and report every stage error");
    c_ev->add_option("--scenario", ev.scenario, "Scenario file")->required();
    c_ev->add_option("--report", ev.report, "Also write the report here");
    CLI::Option* ev_seed =
        c_ev->add_option("--seed", ev.seed, "Override the scenario noise seed");
    c_ev->add_option("--preset", ev.preset, "Override the noise preset (none|benchtop)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    rec.seed_set = rec_seed->count() > 0;
    ev.seed_set = ev_seed->count() > 0;

    try {
        if (c_reg->parsed()) return run_register(reg);
        if (c_he->parsed()) return run_calibrate_handeye(he);
        if (c_fc->parsed()) return run_fit_correction(fc);
        if (c_rec->parsed()) return run_record(rec);
        if (c_pb->parsed()) return run_playback(pb);
        if (c_ev->parsed()) return run_evaluate(ev);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
    return 1;
}
