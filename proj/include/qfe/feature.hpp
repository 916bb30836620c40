#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qfe/error.hpp"
#include "qfe/matrix.hpp"

namespace qfe {

// Temporal feature families tracked alongside the AU channel.
enum class Modality { lm2d, lm3d, hp_orient, hp_rot, gaze_loc, gaze_angle, au };

[[nodiscard]] inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::lm2d: return "LM2D";
        case Modality::lm3d: return "LM3D";
        case Modality::hp_orient: return "HP_ORIENT";
        case Modality::hp_rot: return "HP_ROT";
        case Modality::gaze_loc: return "GAZE_LOC";
        case Modality::gaze_angle: return "GAZE_ANGLE";
        case Modality::au: return "AU";
    }
    return "?";
}

// Short keys used for report columns (delta_lm, delta_hp, delta_gaze, ...).
[[nodiscard]] inline const char* modality_key(Modality m) {
    switch (m) {
        case Modality::lm2d: return "lm";
        case Modality::lm3d: return "lm3d";
        case Modality::hp_orient: return "hp";
        case Modality::hp_rot: return "hp_rot";
        case Modality::gaze_loc: return "gaze";
        case Modality::gaze_angle: return "gaze_angle";
        case Modality::au: return "au";
    }
    return "?";
}

[[nodiscard]] inline Modality modality_from_name(const std::string& s) {
    for (Modality m : {Modality::lm2d, Modality::lm3d, Modality::hp_orient, Modality::hp_rot,
                       Modality::gaze_loc, Modality::gaze_angle, Modality::au}) {
        if (s == modality_name(m) || s == modality_key(m)) return m;
    }
    throw Error(errc::lookup, "unknown modality '" + s + "'");
}

struct Point2 {
    double x = 0.0, y = 0.0;
};
struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct HeadPose {
    double tx = 0.0, ty = 0.0, tz = 0.0;  // location, mm
    double rx = 0.0, ry = 0.0, rz = 0.0;  // rotation, radians
};

struct GazeLocation {
    Point3 eye0, eye1;  // per-eye direction vectors
};

constexpr double kAuIntensityMax = 5.0;
constexpr int kLandmarkCount = 68;

struct FeatureFrame {
    int frame_index = 0;
    double timestamp = 0.0;
    double confidence = 1.0;
    bool success = true;
    std::map<int, double> au_intensities;   // AU id -> intensity in [0, 5]
    std::vector<Point2> landmarks_2d;       // 68 points when present
    std::vector<Point3> landmarks_3d;       // optional block, 68 points
    std::optional<HeadPose> head_pose;
    std::optional<GazeLocation> gaze_location;
    std::optional<std::array<double, 2>> gaze_angle;  // radians
};

struct FeatureSequence {
    std::string subject_id;
    double fps = 0.0;  // supplied by the caller, constant for the sequence
    std::vector<FeatureFrame> frames;

    [[nodiscard]] std::size_t size() const noexcept { return frames.size(); }

    void validate() const {
        if (!(fps > 0.0)) throw Error(errc::domain, "fps must be positive");
        for (std::size_t i = 1; i < frames.size(); ++i) {
            if (frames[i].frame_index <= frames[i - 1].frame_index)
                throw Error(errc::data, "frame indices not strictly increasing");
            if (frames[i].timestamp <= frames[i - 1].timestamp)
                throw Error(errc::data, "timestamps not strictly increasing");
        }
    }
};

struct ModalityMatrix {
    Modality modality = Modality::lm2d;
    Matrix values;        // n_frames x n_features
    bool scaled = false;  // true once min-max normalized to [0, 1]
};

// ---- AU category map -------------------------------------------------------

// AUs covered by the description table; category entries must stay inside it.
[[nodiscard]] inline const std::set<int>& described_au_ids() {
    static const std::set<int> ids = {1,  2,  4,  5,  6,  7,  9,  10, 12,
                                      14, 15, 17, 20, 23, 25, 26, 28, 45};
    return ids;
}

class AUCategoryMap {
public:
    AUCategoryMap() = default;

    void set(const std::string& category, std::vector<int> aus) {
        for (int id : aus) {
            if (!described_au_ids().count(id))
                throw Error(errc::domain,
                            "AU" + std::to_string(id) + " is not a described action unit");
        }
        std::sort(aus.begin(), aus.end());
        categories_[category] = std::move(aus);
    }

    [[nodiscard]] const std::vector<int>& at(const std::string& category) const {
        auto it = categories_.find(category);
        if (it == categories_.end())
            throw Error(errc::lookup, "unknown expression category '" + category + "'");
        return it->second;
    }

    [[nodiscard]] bool contains(const std::string& category) const {
        return categories_.count(category) > 0;
    }

    [[nodiscard]] const std::map<std::string, std::vector<int>>& all() const {
        return categories_;
    }

private:
    std::map<std::string, std::vector<int>> categories_;
};

// Built-in category map: the overall set plus the per-expression AU subsets,
// with pain using the pain-expressiveness set {4, 6, 9, 10, 25}.
[[nodiscard]] inline const AUCategoryMap& default_au_category_map() {
    static const AUCategoryMap map = [] {
        AUCategoryMap m;
        m.set("overall", {1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45});
        m.set("amusement", {6, 7, 12, 25, 26});
        m.set("anger", {4, 5, 17, 23});
        m.set("confusion", {4, 7});
        m.set("disgust", {7, 9, 25, 26});
        m.set("embarrassment", {7, 12, 15});
        m.set("fear", {1, 2, 4, 5, 7, 20, 25});
        m.set("happiness", {6, 7, 12, 25, 26});
        m.set("interest", {1, 2, 12});
        m.set("pain", {4, 6, 9, 10, 25});
        m.set("sadness", {1, 4, 6, 15, 17});
        m.set("surprise", {1, 2, 5, 25, 26});
        m.set("sympathy", {1, 17});
        return m;
    }();
    return map;
}

// Intensities for the category's AUs in ascending AU-id order.
[[nodiscard]] inline std::vector<double> select_au_subset(
    const FeatureFrame& frame, const std::string& category,
    const AUCategoryMap& map = default_au_category_map()) {
    const auto& ids = map.at(category);
    std::vector<double> out;
    out.reserve(ids.size());
    for (int id : ids) {
        auto it = frame.au_intensities.find(id);
        if (it == frame.au_intensities.end())
            throw Error(errc::missing_feature,
                        "AU" + std::to_string(id) + " absent from frame " +
                            std::to_string(frame.frame_index));
        out.push_back(it->second);
    }
    return out;
}

// ---- modality extraction ---------------------------------------------------

// Raw (unscaled) per-frame feature matrix for one modality. Throws
// missing_feature when any frame lacks the block.
[[nodiscard]] inline ModalityMatrix modality_matrix(const FeatureSequence& seq, Modality m) {
    if (seq.frames.empty()) throw Error(errc::empty_input, "empty sequence");
    const std::size_t n = seq.frames.size();
    auto missing = [&](std::size_t i) {
        return Error(errc::missing_feature, std::string(modality_name(m)) +
                                                " absent from frame " +
                                                std::to_string(seq.frames[i].frame_index));
    };

    ModalityMatrix out;
    out.modality = m;
    switch (m) {
        case Modality::lm2d: {
            out.values = Matrix(n, 2 * kLandmarkCount);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& lm = seq.frames[i].landmarks_2d;
                if (lm.size() != kLandmarkCount) throw missing(i);
                for (int j = 0; j < kLandmarkCount; ++j) {
                    out.values(i, j) = lm[j].x;
                    out.values(i, kLandmarkCount + j) = lm[j].y;
                }
            }
            break;
        }
        case Modality::lm3d: {
            out.values = Matrix(n, 3 * kLandmarkCount);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& lm = seq.frames[i].landmarks_3d;
                if (lm.size() != kLandmarkCount) throw missing(i);
                for (int j = 0; j < kLandmarkCount; ++j) {
                    out.values(i, j) = lm[j].x;
                    out.values(i, kLandmarkCount + j) = lm[j].y;
                    out.values(i, 2 * kLandmarkCount + j) = lm[j].z;
                }
            }
            break;
        }
        case Modality::hp_orient:
        case Modality::hp_rot: {
            out.values = Matrix(n, 3);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& hp = seq.frames[i].head_pose;
                if (!hp) throw missing(i);
                if (m == Modality::hp_orient) {
                    out.values(i, 0) = hp->tx;
                    out.values(i, 1) = hp->ty;
                    out.values(i, 2) = hp->tz;
                } else {
                    out.values(i, 0) = hp->rx;
                    out.values(i, 1) = hp->ry;
                    out.values(i, 2) = hp->rz;
                }
            }
            break;
        }
        case Modality::gaze_loc: {
            out.values = Matrix(n, 6);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& g = seq.frames[i].gaze_location;
                if (!g) throw missing(i);
                out.values(i, 0) = g->eye0.x;
                out.values(i, 1) = g->eye0.y;
                out.values(i, 2) = g->eye0.z;
                out.values(i, 3) = g->eye1.x;
                out.values(i, 4) = g->eye1.y;
                out.values(i, 5) = g->eye1.z;
            }
            break;
        }
        case Modality::gaze_angle: {
            out.values = Matrix(n, 2);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& g = seq.frames[i].gaze_angle;
                if (!g) throw missing(i);
                out.values(i, 0) = (*g)[0];
                out.values(i, 1) = (*g)[1];
            }
            break;
        }
        case Modality::au: {
            const auto& first = seq.frames.front().au_intensities;
            std::vector<int> ids;
            ids.reserve(first.size());
            for (const auto& [id, _] : first) ids.push_back(id);
            out.values = Matrix(n, ids.size());
            for (std::size_t i = 0; i < n; ++i) {
                const auto& aus = seq.frames[i].au_intensities;
                if (aus.size() != ids.size())
                    throw Error(errc::data, "inconsistent AU channels across frames");
                for (std::size_t j = 0; j < ids.size(); ++j) {
                    auto it = aus.find(ids[j]);
                    if (it == aus.end())
                        throw Error(errc::data, "inconsistent AU channels across frames");
                    out.values(i, j) = it->second;
                }
            }
            break;
        }
    }
    return out;
}

}  // namespace qfe
