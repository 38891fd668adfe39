#pragma once

// Plain-text serialization for every on-disk format the tools exchange.
//
// Shared conventions:
//   - whitespace-separated tokens, one record per line, '#' starts a comment
//   - every file opens with a "<magic> <version>" line
//   - doubles are written as the shortest decimal that parses back to the
//     identical bit pattern, so write -> read -> write is byte-identical
//
// Formats (magic, owner):
//   ghostcamera       camera intrinsics, named "key value" lines
//   ghostmarkers      fiducial map, "label + 12 numbers" per marker
//   ghostdetections   per-frame marker detections for replay
//   ghostpose         a single rigid transform, "qw qx qy qz tx ty tz"
//   ghostposes        pose sequence, one pose per line
//   ghostpairs        actual/reported point pairs, 6 numbers per line
//   ghostinstrument   DH rows, wrist offset, limits, optional mesh paths
//   ghostmesh         vertex list, "x y z" per line
//   ghostsession      session state (registrations, hand-eyes, corrections)
//   ghostmotion       timestamped ECM + reported-pose log for recording
//   ghosttraj         recorded trajectory with embedded session header
//   ghostreport       ordered "key = value" metric report

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ghost/calibration.hpp"
#include "ghost/camera.hpp"
#include "ghost/errors.hpp"
#include "ghost/instrument.hpp"
#include "ghost/pipeline.hpp"
#include "ghost/registration.hpp"

namespace ghost::io {

// ---------------------------------------------------------------------------
// Number formatting: shortest round-trip decimals.

inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline double parse_double(std::string_view tok, std::string_view what) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError("expected a number for " + std::string(what) + ", got '" +
                         std::string(tok) + "'");
    return v;
}

inline long long parse_int(std::string_view tok, std::string_view what) {
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError("expected an integer for " + std::string(what) + ", got '" +
                         std::string(tok) + "'");
    return v;
}

inline std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

// Walks a text buffer line by line, skipping blanks and comments.
class LineCursor {
public:
    explicit LineCursor(std::string_view text) : text_(text) {}

    // Next non-empty, non-comment line as tokens; false at end of input.
    bool next(std::vector<std::string_view>& tokens) {
        while (pos_ < text_.size()) {
            size_t eol = text_.find('\n', pos_);
            if (eol == std::string_view::npos) eol = text_.size();
            std::string_view line = text_.substr(pos_, eol - pos_);
            pos_ = eol + 1;
            ++line_no_;
            const size_t hash = line.find('#');
            if (hash != std::string_view::npos) line = line.substr(0, hash);
            tokens = split_tokens(line);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("line " + std::to_string(line_no_) + ": " + msg);
    }

    std::vector<std::string_view> expect(size_t count, std::string_view what) {
        std::vector<std::string_view> tokens;
        if (!next(tokens)) fail("unexpected end of input, expected " + std::string(what));
        if (tokens.size() != count)
            fail("expected " + std::to_string(count) + " tokens for " + std::string(what) +
                 ", got " + std::to_string(tokens.size()));
        return tokens;
    }

    void expect_magic(std::string_view magic) {
        const auto tokens = expect(2, std::string(magic) + " header");
        if (tokens[0] != magic) fail("expected '" + std::string(magic) + "' file");
        if (tokens[1] != "1")
            fail("unsupported " + std::string(magic) + " version '" + std::string(tokens[1]) +
                 "'");
    }

    void expect_end(std::string_view what) {
        std::vector<std::string_view> tokens;
        if (next(tokens)) fail("trailing content after " + std::string(what));
    }

private:
    std::string_view text_;
    size_t pos_ = 0;
    int line_no_ = 0;
};

inline void append_pose(std::string& out, const RigidTransform& t) {
    out += format_double(t.rotation.w());
    for (double c : {t.rotation.x(), t.rotation.y(), t.rotation.z(), t.translation.x(),
                     t.translation.y(), t.translation.z()}) {
        out += ' ';
        out += format_double(c);
    }
}

// Parses 7 tokens starting at `at`.  The quaternion is used exactly as
// written (after a unit check) so that re-serialization is byte-identical.
inline RigidTransform parse_pose(const std::vector<std::string_view>& tokens, size_t at,
                                 LineCursor& cur) {
    if (at + 7 > tokens.size()) cur.fail("expected 7 pose components");
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = parse_double(tokens[at + i], "pose component");
    RigidTransform t;
    t.rotation = Eigen::Quaterniond(v[0], v[1], v[2], v[3]);
    if (std::abs(t.rotation.norm() - 1.0) > 1e-6) cur.fail("pose quaternion is not unit");
    t.translation = Eigen::Vector3d(v[4], v[5], v[6]);
    return t;
}

inline Eigen::Vector3d parse_vec3(const std::vector<std::string_view>& tokens, size_t at,
                                  LineCursor& cur) {
    if (at + 3 > tokens.size()) cur.fail("expected 3 components");
    return {parse_double(tokens[at], "x"), parse_double(tokens[at + 1], "y"),
            parse_double(tokens[at + 2], "z")};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Files.

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "' for reading");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw ParseError("failed reading '" + path + "'");
    return content;
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ParseError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Camera intrinsics: named "key value" lines.

inline std::string write_intrinsics(const CameraIntrinsics& k) {
    std::string out = "ghostcamera 1\n";
    const std::pair<const char*, double> fields[] = {
        {"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"k1", k.k1},
        {"k2", k.k2}, {"p1", k.p1}, {"p2", k.p2}, {"k3", k.k3},
    };
    for (const auto& [name, value] : fields) {
        out += name;
        out += ' ';
        out += format_double(value);
        out += '\n';
    }
    out += "width " + format_int(k.width) + "\n";
    out += "height " + format_int(k.height) + "\n";
    out += "near " + format_double(k.near_mm) + "\n";
    out += "far " + format_double(k.far_mm) + "\n";
    return out;
}

inline CameraIntrinsics read_intrinsics(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostcamera");
    CameraIntrinsics k;
    bool have_fx = false, have_fy = false, have_cx = false, have_cy = false;
    bool have_w = false, have_h = false;
    std::vector<std::string_view> tokens;
    while (cur.next(tokens)) {
        if (tokens.size() != 2) cur.fail("expected 'key value'");
        const std::string_view key = tokens[0];
        const std::string_view val = tokens[1];
        if (key == "fx") k.fx = detail::parse_double(val, key), have_fx = true;
        else if (key == "fy") k.fy = detail::parse_double(val, key), have_fy = true;
        else if (key == "cx") k.cx = detail::parse_double(val, key), have_cx = true;
        else if (key == "cy") k.cy = detail::parse_double(val, key), have_cy = true;
        else if (key == "k1") k.k1 = detail::parse_double(val, key);
        else if (key == "k2") k.k2 = detail::parse_double(val, key);
        else if (key == "p1") k.p1 = detail::parse_double(val, key);
        else if (key == "p2") k.p2 = detail::parse_double(val, key);
        else if (key == "k3") k.k3 = detail::parse_double(val, key);
        else if (key == "width")
            k.width = static_cast<int>(detail::parse_int(val, key)), have_w = true;
        else if (key == "height")
            k.height = static_cast<int>(detail::parse_int(val, key)), have_h = true;
        else if (key == "near") k.near_mm = detail::parse_double(val, key);
        else if (key == "far") k.far_mm = detail::parse_double(val, key);
        else cur.fail("unknown intrinsics key '" + std::string(key) + "'");
    }
    if (!(have_fx && have_fy && have_cx && have_cy && have_w && have_h))
        throw ParseError("intrinsics file is missing required fields");
    try {
        k.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return k;
}

// ---------------------------------------------------------------------------
// Fiducial map: one marker per line, label + 4 corners.

inline std::string write_fiducial_map(const FiducialMap& map) {
    std::string out = "ghostmarkers 1\n";
    for (const auto& [label, corners] : map.markers) {
        out += label;
        for (const Point3& c : corners)
            for (int i = 0; i < 3; ++i) out += ' ' + format_double(c[i]);
        out += '\n';
    }
    return out;
}

inline FiducialMap read_fiducial_map(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostmarkers");
    FiducialMap map;
    std::vector<std::string_view> tokens;
    while (cur.next(tokens)) {
        if (tokens.size() != 13) cur.fail("expected 'label + 12 numbers'");
        const std::string label(tokens[0]);
        if (map.markers.count(label)) cur.fail("duplicate marker label '" + label + "'");
        std::array<Point3, 4>& corners = map.markers[label];
        for (int c = 0; c < 4; ++c)
            corners[c] = detail::parse_vec3(tokens, 1 + 3 * static_cast<size_t>(c), cur);
    }
    try {
        map.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return map;
}

// ---------------------------------------------------------------------------
// Detections: N frames, each detection flattened to one line.

inline std::string write_detections(const std::vector<DetectionBatch>& frames) {
    std::string out = "ghostdetections 1\n";
    out += "frames " + format_int(static_cast<long long>(frames.size())) + "\n";
    for (size_t f = 0; f < frames.size(); ++f)
        for (const Detection& d : frames[f]) {
            out += format_int(static_cast<long long>(f)) + " " + d.label;
            for (const Point2& c : d.corners)
                out += ' ' + format_double(c.x()) + ' ' + format_double(c.y());
            out += '\n';
        }
    return out;
}

inline std::vector<DetectionBatch> read_detections(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostdetections");
    const auto header = cur.expect(2, "frames count");
    if (header[0] != "frames") cur.fail("expected 'frames <count>'");
    const long long count = detail::parse_int(header[1], "frame count");
    if (count < 0) cur.fail("negative frame count");
    std::vector<DetectionBatch> frames(static_cast<size_t>(count));
    std::vector<std::string_view> tokens;
    while (cur.next(tokens)) {
        if (tokens.size() != 10) cur.fail("expected 'frame label u1 v1 ... u4 v4'");
        const long long f = detail::parse_int(tokens[0], "frame index");
        if (f < 0 || f >= count) cur.fail("frame index out of range");
        Detection d;
        d.label = std::string(tokens[1]);
        for (int c = 0; c < 4; ++c) {
            const size_t at = 2 + 2 * static_cast<size_t>(c);
            d.corners[c] = Point2(detail::parse_double(tokens[at], "corner u"),
                                  detail::parse_double(tokens[at + 1], "corner v"));
        }
        frames[static_cast<size_t>(f)].push_back(std::move(d));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Poses.

inline std::string write_pose(const RigidTransform& t) {
    std::string out = "ghostpose 1\n";
    detail::append_pose(out, t);
    out += '\n';
    return out;
}

inline RigidTransform read_pose(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostpose");
    const auto tokens = cur.expect(7, "pose");
    const RigidTransform t = detail::parse_pose(tokens, 0, cur);
    cur.expect_end("pose");
    return t;
}

inline std::string write_pose_sequence(const std::vector<RigidTransform>& poses) {
    std::string out = "ghostposes 1\n";
    out += "count " + format_int(static_cast<long long>(poses.size())) + "\n";
    for (const RigidTransform& t : poses) {
        detail::append_pose(out, t);
        out += '\n';
    }
    return out;
}

inline std::vector<RigidTransform> read_pose_sequence(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostposes");
    const auto header = cur.expect(2, "count");
    if (header[0] != "count") cur.fail("expected 'count <n>'");
    const long long count = detail::parse_int(header[1], "pose count");
    if (count < 0) cur.fail("negative pose count");
    std::vector<RigidTransform> poses;
    poses.reserve(static_cast<size_t>(count));
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(7, "pose record");
        poses.push_back(detail::parse_pose(tokens, 0, cur));
    }
    cur.expect_end("pose sequence");
    return poses;
}

// ---------------------------------------------------------------------------
// Point pairs: actual xyz then reported xyz per line.

inline std::string write_point_pairs(const PointPairSet& pairs) {
    std::string out = "ghostpairs 1\n";
    out += "count " + format_int(static_cast<long long>(pairs.actual.size())) + "\n";
    for (size_t i = 0; i < pairs.actual.size(); ++i) {
        for (int c = 0; c < 3; ++c)
            out += (c ? " " : "") + format_double(pairs.actual[i][c]);
        for (int c = 0; c < 3; ++c) out += ' ' + format_double(pairs.reported[i][c]);
        out += '\n';
    }
    return out;
}

inline PointPairSet read_point_pairs(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostpairs");
    const auto header = cur.expect(2, "count");
    if (header[0] != "count") cur.fail("expected 'count <n>'");
    const long long count = detail::parse_int(header[1], "pair count");
    if (count < 0) cur.fail("negative pair count");
    PointPairSet pairs;
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(6, "point pair");
        pairs.actual.push_back(detail::parse_vec3(tokens, 0, cur));
        pairs.reported.push_back(detail::parse_vec3(tokens, 3, cur));
    }
    cur.expect_end("point pairs");
    return pairs;
}

// ---------------------------------------------------------------------------
// Mesh: vertex list.

inline std::string write_mesh(const std::vector<Point3>& vertices) {
    std::string out = "ghostmesh 1\n";
    out += "count " + format_int(static_cast<long long>(vertices.size())) + "\n";
    for (const Point3& v : vertices) {
        out += format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z());
        out += '\n';
    }
    return out;
}

inline std::vector<Point3> read_mesh(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostmesh");
    const auto header = cur.expect(2, "count");
    if (header[0] != "count") cur.fail("expected 'count <n>'");
    const long long count = detail::parse_int(header[1], "vertex count");
    if (count < 0) cur.fail("negative vertex count");
    std::vector<Point3> vertices;
    vertices.reserve(static_cast<size_t>(count));
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(3, "vertex");
        vertices.push_back(detail::parse_vec3(tokens, 0, cur));
    }
    cur.expect_end("mesh");
    return vertices;
}

// ---------------------------------------------------------------------------
// Instrument config: DH rows, wrist offset, limits, optional mesh paths.
// Fields not present keep the large-needle-driver defaults, so a minimal
// file containing just "id" is the stock instrument.  Mesh paths are
// resolved relative to the working directory.

inline std::string write_instrument(const InstrumentModel& m) {
    std::string out = "ghostinstrument 1\n";
    out += "id " + m.id + "\n";
    const auto dh_line = [](const char* name, const DhRow& r) {
        return std::string(name) + ' ' + format_double(r.a_mm) + ' ' +
               format_double(r.alpha_rad) + ' ' + format_double(r.d_mm) + ' ' +
               format_double(r.theta_offset_rad) + '\n';
    };
    out += dh_line("shaft_to_body", m.shaft_to_body);
    out += dh_line("body_to_wrist", m.body_to_wrist);
    out += "wrist_offset " + format_double(m.wrist_offset_mm.x()) + ' ' +
           format_double(m.wrist_offset_mm.y()) + ' ' + format_double(m.wrist_offset_mm.z()) +
           '\n';
    out += "jaw_axis " + format_double(m.jaw_axis.x()) + ' ' + format_double(m.jaw_axis.y()) +
           ' ' + format_double(m.jaw_axis.z()) + '\n';
    out += "limits " + format_double(m.limits.q6_min_rad) + ' ' +
           format_double(m.limits.q6_max_rad) + ' ' + format_double(m.limits.q7_min_rad) + ' ' +
           format_double(m.limits.q7_max_rad) + ' ' + format_double(m.limits.jaw_max_rad) +
           '\n';
    return out;
}

inline InstrumentModel read_instrument(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostinstrument");
    InstrumentModel m = InstrumentModel::large_needle_driver();
    std::vector<std::string_view> tokens;
    const auto parse_dh = [&](DhRow& row) {
        if (tokens.size() != 5) cur.fail("expected 'a alpha d theta'");
        row.a_mm = detail::parse_double(tokens[1], "a");
        row.alpha_rad = detail::parse_double(tokens[2], "alpha");
        row.d_mm = detail::parse_double(tokens[3], "d");
        row.theta_offset_rad = detail::parse_double(tokens[4], "theta");
    };
    while (cur.next(tokens)) {
        const std::string_view key = tokens[0];
        if (key == "id") {
            if (tokens.size() != 2) cur.fail("expected 'id <name>'");
            m.id = std::string(tokens[1]);
        } else if (key == "shaft_to_body") {
            parse_dh(m.shaft_to_body);
        } else if (key == "body_to_wrist") {
            parse_dh(m.body_to_wrist);
        } else if (key == "wrist_offset") {
            m.wrist_offset_mm = detail::parse_vec3(tokens, 1, cur);
        } else if (key == "jaw_axis") {
            m.jaw_axis = detail::parse_vec3(tokens, 1, cur);
        } else if (key == "limits") {
            if (tokens.size() != 6)
                cur.fail("expected 'q6_min q6_max q7_min q7_max jaw_max'");
            m.limits.q6_min_rad = detail::parse_double(tokens[1], "q6_min");
            m.limits.q6_max_rad = detail::parse_double(tokens[2], "q6_max");
            m.limits.q7_min_rad = detail::parse_double(tokens[3], "q7_min");
            m.limits.q7_max_rad = detail::parse_double(tokens[4], "q7_max");
            m.limits.jaw_max_rad = detail::parse_double(tokens[5], "jaw_max");
        } else if (key == "mesh_shaft" || key == "mesh_body" || key == "mesh_jaw") {
            if (tokens.size() != 2) cur.fail("expected a mesh file path");
            const std::vector<Point3> mesh = read_mesh(read_file(std::string(tokens[1])));
            if (key == "mesh_shaft") m.shaft_mesh = mesh;
            else if (key == "mesh_body") m.body_mesh = mesh;
            else m.jaw_mesh = mesh;
        } else {
            cur.fail("unknown instrument key '" + std::string(key) + "'");
        }
    }
    try {
        m.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// Session state and trajectories.  The trajectory header embeds the full
// recording-session metadata so a trajectory file is self-describing.

namespace detail {

inline void append_session_fields(std::string& out, const SessionState& st) {
    const auto pose_line = [&](const char* name, const RigidTransform& t) {
        out += name;
        out += ' ';
        append_pose(out, t);
        out += '\n';
    };
    pose_line("registration_left", st.registration_left);
    pose_line("registration_right", st.registration_right);
    pose_line("handeye_left", st.handeye_left);
    pose_line("handeye_right", st.handeye_right);
    pose_line("ecm_initial", st.ecm_initial);
    out += "corrections " + format_int(static_cast<long long>(st.correction.size())) + "\n";
    for (const auto& [id, t] : st.correction) {
        out += id;
        out += ' ';
        append_pose(out, t);
        out += '\n';
    }
}

inline SessionState parse_session_fields(LineCursor& cur) {
    SessionState st;
    const auto named_pose = [&](const char* name) {
        const auto tokens = cur.expect(8, std::string(name) + " pose");
        if (tokens[0] != name) cur.fail("expected '" + std::string(name) + "'");
        return parse_pose(tokens, 1, cur);
    };
    st.registration_left = named_pose("registration_left");
    st.registration_right = named_pose("registration_right");
    st.handeye_left = named_pose("handeye_left");
    st.handeye_right = named_pose("handeye_right");
    st.ecm_initial = named_pose("ecm_initial");
    const auto header = cur.expect(2, "corrections count");
    if (header[0] != "corrections") cur.fail("expected 'corrections <n>'");
    const long long count = parse_int(header[1], "correction count");
    if (count < 0) cur.fail("negative correction count");
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(8, "correction record");
        const std::string id(tokens[0]);
        if (st.correction.count(id)) cur.fail("duplicate correction id '" + id + "'");
        st.correction[id] = parse_pose(tokens, 1, cur);
    }
    return st;
}

} // namespace detail

inline std::string write_session(const SessionState& st) {
    std::string out = "ghostsession 1\n";
    detail::append_session_fields(out, st);
    return out;
}

inline SessionState read_session(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostsession");
    SessionState st = detail::parse_session_fields(cur);
    cur.expect_end("session");
    return st;
}

inline std::string write_trajectory(const Trajectory& traj) {
    std::string out = "ghosttraj 1\n";
    detail::append_session_fields(out, traj.session);
    out += "samples " + format_int(static_cast<long long>(traj.samples.size())) + "\n";
    for (const TrajectorySample& s : traj.samples) {
        out += format_double(s.t);
        out += ' ';
        detail::append_pose(out, s.pose);
        for (double j : {s.joints.q6_rad, s.joints.q7_rad, s.joints.jaw_rad})
            out += ' ' + format_double(j);
        out += ' ' + s.instrument_id;
        out += '\n';
    }
    return out;
}

inline Trajectory read_trajectory(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghosttraj");
    Trajectory traj;
    traj.session = detail::parse_session_fields(cur);
    const auto header = cur.expect(2, "samples count");
    if (header[0] != "samples") cur.fail("expected 'samples <n>'");
    const long long count = detail::parse_int(header[1], "sample count");
    if (count < 0) cur.fail("negative sample count");
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(12, "trajectory sample");
        TrajectorySample s;
        s.t = detail::parse_double(tokens[0], "timestamp");
        s.pose = detail::parse_pose(tokens, 1, cur);
        s.joints.q6_rad = detail::parse_double(tokens[8], "q6");
        s.joints.q7_rad = detail::parse_double(tokens[9], "q7");
        s.joints.jaw_rad = detail::parse_double(tokens[10], "jaw");
        s.instrument_id = std::string(tokens[11]);
        try {
            traj.append(s);
        } catch (const ValidationError& e) {
            cur.fail(e.what());
        }
    }
    cur.expect_end("trajectory");
    return traj;
}

// ---------------------------------------------------------------------------
// Motion log consumed by the record command: per-tick ECM pose, reported
// PSM pose, joint state, and instrument id.

struct MotionEntry {
    double t = 0.0;
    RigidTransform ecm;      // current base-to-ECM pose
    RigidTransform reported; // uncorrected reported ECM-to-PSM pose
    JointState joints;
    std::string instrument_id = "lnd";
};

inline std::string write_motion_log(const std::vector<MotionEntry>& entries) {
    std::string out = "ghostmotion 1\n";
    out += "count " + format_int(static_cast<long long>(entries.size())) + "\n";
    for (const MotionEntry& e : entries) {
        out += format_double(e.t);
        out += ' ';
        detail::append_pose(out, e.ecm);
        out += ' ';
        detail::append_pose(out, e.reported);
        for (double j : {e.joints.q6_rad, e.joints.q7_rad, e.joints.jaw_rad})
            out += ' ' + format_double(j);
        out += ' ' + e.instrument_id;
        out += '\n';
    }
    return out;
}

inline std::vector<MotionEntry> read_motion_log(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostmotion");
    const auto header = cur.expect(2, "count");
    if (header[0] != "count") cur.fail("expected 'count <n>'");
    const long long count = detail::parse_int(header[1], "entry count");
    if (count < 0) cur.fail("negative entry count");
    std::vector<MotionEntry> entries;
    entries.reserve(static_cast<size_t>(count));
    for (long long i = 0; i < count; ++i) {
        const auto tokens = cur.expect(19, "motion entry");
        MotionEntry e;
        e.t = detail::parse_double(tokens[0], "timestamp");
        e.ecm = detail::parse_pose(tokens, 1, cur);
        e.reported = detail::parse_pose(tokens, 8, cur);
        e.joints.q6_rad = detail::parse_double(tokens[15], "q6");
        e.joints.q7_rad = detail::parse_double(tokens[16], "q7");
        e.joints.jaw_rad = detail::parse_double(tokens[17], "jaw");
        e.instrument_id = std::string(tokens[18]);
        entries.push_back(std::move(e));
    }
    cur.expect_end("motion log");
    return entries;
}

// ---------------------------------------------------------------------------
// Reports: ordered "key = value" lines, stable byte-for-byte for a given
// insertion sequence.

struct Report {
    std::vector<std::pair<std::string, std::string>> rows;

    void add(std::string key, std::string value) {
        rows.emplace_back(std::move(key), std::move(value));
    }
    void add(std::string key, double value) { add(std::move(key), format_double(value)); }
    void add(std::string key, long long value) { add(std::move(key), format_int(value)); }
    void add(std::string key, int value) { add(std::move(key), format_int(value)); }

    std::string serialize() const {
        std::string out = "ghostreport 1\n";
        for (const auto& [key, value] : rows) out += key + " = " + value + "\n";
        return out;
    }
};

inline Report read_report(std::string_view text) {
    detail::LineCursor cur(text);
    cur.expect_magic("ghostreport");
    Report report;
    std::vector<std::string_view> tokens;
    while (cur.next(tokens)) {
        if (tokens.size() < 3 || tokens[1] != "=") cur.fail("expected '<key> = <value>'");
        std::string value(tokens[2]);
        for (size_t i = 3; i < tokens.size(); ++i) value += ' ' + std::string(tokens[i]);
        report.rows.emplace_back(std::string(tokens[0]), std::move(value));
    }
    return report;
}

} // namespace ghost::io
