#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qfe/error.hpp"
#include "qfe/feature.hpp"

namespace qfe {

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.emplace_back(trim(std::string_view(line).substr(start)));
            break;
        }
        out.emplace_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string_view sv = trim(cell);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
    if (ec != std::errc{} || ptr != sv.data() + sv.size())
        throw Error(errc::parse, "non-numeric cell at row " + std::to_string(row) +
                                     ", column '" + column + "' ('" + cell + "')");
    return value;
}

// Shortest representation that round-trips the double bit-exactly.
inline void append_number(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

// AUxx_r / AUxx_c -> AU id, or -1 if the name is not an AU column.
inline int au_column_id(const std::string& name, char suffix) {
    if (name.size() < 5 || name.compare(0, 2, "AU") != 0) return -1;
    if (name[name.size() - 2] != '_' || name.back() != suffix) return -1;
    int id = 0;
    for (std::size_t i = 2; i + 2 < name.size(); ++i) {
        if (name[i] < '0' || name[i] > '9') return -1;
        id = id * 10 + (name[i] - '0');
    }
    return id;
}

}  // namespace csv_detail

// Parse a header-bearing comma-separated table in the OpenFace 2.x column
// convention. Mandatory columns: frame, timestamp, confidence, success, and
// at least one AU intensity (AUxx_r). The 2D/3D landmark, head pose and gaze
// blocks are read when present; a partially present block is a format error.
// AU channels carrying only a presence column (AUxx_c) are mapped to
// intensity 5*c.
[[nodiscard]] inline FeatureSequence parse_feature_csv(std::istream& in, double fps,
                                                       std::string subject_id = {}) {
    using namespace csv_detail;
    if (!(fps > 0.0)) throw Error(errc::domain, "fps must be positive");

    std::string line;
    if (!std::getline(in, line)) throw Error(errc::empty_input, "missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const std::vector<std::string> header = split_line(line);

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

    auto find = [&](const std::string& name) -> long {
        auto it = col.find(name);
        return it == col.end() ? -1 : static_cast<long>(it->second);
    };
    auto require = [&](const std::string& name) -> std::size_t {
        const long idx = find(name);
        if (idx < 0) throw Error(errc::format, "missing mandatory column '" + name + "'");
        return static_cast<std::size_t>(idx);
    };

    const std::size_t c_frame = require("frame");
    const std::size_t c_time = require("timestamp");
    const std::size_t c_conf = require("confidence");
    const std::size_t c_succ = require("success");

    // AU channels: id -> (_r column or -1, _c column or -1)
    std::map<int, std::pair<long, long>> au_cols;
    auto au_entry = [&](int id) -> std::pair<long, long>& {
        return au_cols.try_emplace(id, -1, -1).first->second;
    };
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (const int id = au_column_id(header[i], 'r'); id >= 0)
            au_entry(id).first = static_cast<long>(i);
        else if (const int cid = au_column_id(header[i], 'c'); cid >= 0)
            au_entry(cid).second = static_cast<long>(i);
    }
    bool any_r = false;
    for (const auto& [id, rc] : au_cols) any_r = any_r || rc.first >= 0;
    if (!any_r) throw Error(errc::format, "missing mandatory column 'AU*_r'");

    // Optional blocks: all-or-nothing.
    auto block = [&](const std::vector<std::string>& names,
                     std::vector<std::size_t>& out) -> bool {
        bool any = false;
        for (const auto& n : names) any = any || find(n) >= 0;
        if (!any) return false;
        out.reserve(names.size());
        for (const auto& n : names) {
            const long idx = find(n);
            if (idx < 0)
                throw Error(errc::format, "incomplete feature block: missing column '" + n + "'");
            out.push_back(static_cast<std::size_t>(idx));
        }
        return true;
    };

    std::vector<std::string> lm2d_names, lm3d_names;
    for (int a = 0; a < kLandmarkCount; ++a) lm2d_names.push_back("x_" + std::to_string(a));
    for (int a = 0; a < kLandmarkCount; ++a) lm2d_names.push_back("y_" + std::to_string(a));
    for (int a = 0; a < kLandmarkCount; ++a) lm3d_names.push_back("X_" + std::to_string(a));
    for (int a = 0; a < kLandmarkCount; ++a) lm3d_names.push_back("Y_" + std::to_string(a));
    for (int a = 0; a < kLandmarkCount; ++a) lm3d_names.push_back("Z_" + std::to_string(a));
    const std::vector<std::string> pose_names = {"pose_Tx", "pose_Ty", "pose_Tz",
                                                 "pose_Rx", "pose_Ry", "pose_Rz"};
    const std::vector<std::string> gaze_names = {"gaze_0_x", "gaze_0_y", "gaze_0_z",
                                                 "gaze_1_x", "gaze_1_y", "gaze_1_z"};
    const std::vector<std::string> gaze_angle_names = {"gaze_angle_x", "gaze_angle_y"};

    std::vector<std::size_t> lm2d_idx, lm3d_idx, pose_idx, gaze_idx, gaze_angle_idx;
    const bool has_lm2d = block(lm2d_names, lm2d_idx);
    const bool has_lm3d = block(lm3d_names, lm3d_idx);
    const bool has_pose = block(pose_names, pose_idx);
    const bool has_gaze = block(gaze_names, gaze_idx);
    const bool has_gaze_angle = block(gaze_angle_names, gaze_angle_idx);

    FeatureSequence seq;
    seq.subject_id = std::move(subject_id);
    seq.fps = fps;

    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (csv_detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw Error(errc::format, "row " + std::to_string(row) + " has " +
                                          std::to_string(cells.size()) + " cells, expected " +
                                          std::to_string(header.size()));
        auto cell = [&](std::size_t idx, const std::string& name) {
            return parse_cell(cells[idx], row, name);
        };

        FeatureFrame f;
        f.frame_index = static_cast<int>(cell(c_frame, "frame"));
        f.timestamp = cell(c_time, "timestamp");
        f.confidence = cell(c_conf, "confidence");
        f.success = cell(c_succ, "success") != 0.0;

        for (const auto& [id, rc] : au_cols) {
            if (rc.first >= 0) {
                f.au_intensities[id] =
                    cell(static_cast<std::size_t>(rc.first), "AU" + std::to_string(id) + "_r");
            } else if (rc.second >= 0) {
                // presence-only channel: map {0,1} occurrence to {0, 5} intensity
                const double c =
                    cell(static_cast<std::size_t>(rc.second), "AU" + std::to_string(id) + "_c");
                f.au_intensities[id] = kAuIntensityMax * c;
            }
        }

        if (has_lm2d) {
            f.landmarks_2d.resize(kLandmarkCount);
            for (int a = 0; a < kLandmarkCount; ++a) {
                f.landmarks_2d[a].x = cell(lm2d_idx[a], lm2d_names[a]);
                f.landmarks_2d[a].y =
                    cell(lm2d_idx[kLandmarkCount + a], lm2d_names[kLandmarkCount + a]);
            }
        }
        if (has_lm3d) {
            f.landmarks_3d.resize(kLandmarkCount);
            for (int a = 0; a < kLandmarkCount; ++a) {
                f.landmarks_3d[a].x = cell(lm3d_idx[a], lm3d_names[a]);
                f.landmarks_3d[a].y =
                    cell(lm3d_idx[kLandmarkCount + a], lm3d_names[kLandmarkCount + a]);
                f.landmarks_3d[a].z =
                    cell(lm3d_idx[2 * kLandmarkCount + a], lm3d_names[2 * kLandmarkCount + a]);
            }
        }
        if (has_pose) {
            HeadPose hp;
            hp.tx = cell(pose_idx[0], pose_names[0]);
            hp.ty = cell(pose_idx[1], pose_names[1]);
            hp.tz = cell(pose_idx[2], pose_names[2]);
            hp.rx = cell(pose_idx[3], pose_names[3]);
            hp.ry = cell(pose_idx[4], pose_names[4]);
            hp.rz = cell(pose_idx[5], pose_names[5]);
            f.head_pose = hp;
        }
        if (has_gaze) {
            GazeLocation g;
            g.eye0 = {cell(gaze_idx[0], gaze_names[0]), cell(gaze_idx[1], gaze_names[1]),
                      cell(gaze_idx[2], gaze_names[2])};
            g.eye1 = {cell(gaze_idx[3], gaze_names[3]), cell(gaze_idx[4], gaze_names[4]),
                      cell(gaze_idx[5], gaze_names[5])};
            f.gaze_location = g;
        }
        if (has_gaze_angle) {
            f.gaze_angle = {{cell(gaze_angle_idx[0], gaze_angle_names[0]),
                             cell(gaze_angle_idx[1], gaze_angle_names[1])}};
        }

        seq.frames.push_back(std::move(f));
    }

    if (seq.frames.empty()) throw Error(errc::empty_input, "table has no data rows");
    seq.validate();
    return seq;
}

[[nodiscard]] inline FeatureSequence parse_feature_csv(const std::string& text, double fps,
                                                       std::string subject_id = {}) {
    std::istringstream in(text);
    return parse_feature_csv(in, fps, std::move(subject_id));
}

[[nodiscard]] inline FeatureSequence load_feature_csv(const std::string& path, double fps,
                                                      std::string subject_id = {}) {
    std::ifstream in(path);
    if (!in) throw Error(errc::data, "cannot open '" + path + "'");
    if (subject_id.empty()) {
        const auto slash = path.find_last_of("/\\");
        std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
        const auto dot = stem.find_last_of('.');
        if (dot != std::string::npos) stem.resize(dot);
        subject_id = stem;
    }
    return parse_feature_csv(in, fps, std::move(subject_id));
}

// Columnar mirror of the parsed sequence, numeric fields bit-exact on the
// round trip. Blocks present in the first frame must be present in all.
[[nodiscard]] inline std::string serialize_feature_csv(const FeatureSequence& seq) {
    using csv_detail::append_number;
    if (seq.frames.empty()) throw Error(errc::empty_input, "empty sequence");
    const FeatureFrame& first = seq.frames.front();

    std::string out;
    out += "frame,timestamp,confidence,success";
    if (first.gaze_location)
        out += ",gaze_0_x,gaze_0_y,gaze_0_z,gaze_1_x,gaze_1_y,gaze_1_z";
    if (first.gaze_angle) out += ",gaze_angle_x,gaze_angle_y";
    if (first.head_pose) out += ",pose_Tx,pose_Ty,pose_Tz,pose_Rx,pose_Ry,pose_Rz";
    if (!first.landmarks_2d.empty()) {
        for (int a = 0; a < kLandmarkCount; ++a) out += ",x_" + std::to_string(a);
        for (int a = 0; a < kLandmarkCount; ++a) out += ",y_" + std::to_string(a);
    }
    if (!first.landmarks_3d.empty()) {
        for (int a = 0; a < kLandmarkCount; ++a) out += ",X_" + std::to_string(a);
        for (int a = 0; a < kLandmarkCount; ++a) out += ",Y_" + std::to_string(a);
        for (int a = 0; a < kLandmarkCount; ++a) out += ",Z_" + std::to_string(a);
    }
    for (const auto& [id, _] : first.au_intensities)
        out += ",AU" + (id < 10 ? "0" + std::to_string(id) : std::to_string(id)) + "_r";
    out += '\n';

    auto num = [&](double v) {
        out += ',';
        append_number(out, v);
    };
    for (const FeatureFrame& f : seq.frames) {
        const bool consistent = (f.gaze_location.has_value() == first.gaze_location.has_value()) &&
                                (f.gaze_angle.has_value() == first.gaze_angle.has_value()) &&
                                (f.head_pose.has_value() == first.head_pose.has_value()) &&
                                (f.landmarks_2d.size() == first.landmarks_2d.size()) &&
                                (f.landmarks_3d.size() == first.landmarks_3d.size()) &&
                                (f.au_intensities.size() == first.au_intensities.size());
        if (!consistent) throw Error(errc::data, "inconsistent feature blocks across frames");

        out += std::to_string(f.frame_index);
        out += ',';
        append_number(out, f.timestamp);
        out += ',';
        append_number(out, f.confidence);
        out += f.success ? ",1" : ",0";
        if (f.gaze_location) {
            for (const Point3& p : {f.gaze_location->eye0, f.gaze_location->eye1}) {
                num(p.x);
                num(p.y);
                num(p.z);
            }
        }
        if (f.gaze_angle) {
            num((*f.gaze_angle)[0]);
            num((*f.gaze_angle)[1]);
        }
        if (f.head_pose) {
            num(f.head_pose->tx);
            num(f.head_pose->ty);
            num(f.head_pose->tz);
            num(f.head_pose->rx);
            num(f.head_pose->ry);
            num(f.head_pose->rz);
        }
        if (!f.landmarks_2d.empty()) {
            for (const Point2& p : f.landmarks_2d) num(p.x);
            for (const Point2& p : f.landmarks_2d) num(p.y);
        }
        if (!f.landmarks_3d.empty()) {
            for (const Point3& p : f.landmarks_3d) num(p.x);
            for (const Point3& p : f.landmarks_3d) num(p.y);
            for (const Point3& p : f.landmarks_3d) num(p.z);
        }
        for (const auto& [id, v] : f.au_intensities) num(v);
        out += '\n';
    }
    return out;
}

}  // namespace qfe
