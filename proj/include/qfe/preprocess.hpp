#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "qfe/error.hpp"
#include "qfe/feature.hpp"

namespace qfe {

struct PreprocessPolicy {
    double confidence_threshold = 0.8;
    int max_gap = 10;     // longest run of invalid frames that is interpolated
    bool clamp = true;    // clip AU intensities to [0, 5]
};

namespace detail {

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Interpolate every numeric feature of `out` between valid neighbors a and b,
// with t in (0, 1) the position of `out` between them. Blocks absent from
// either neighbor are left untouched.
inline void interpolate_frame(FeatureFrame& out, const FeatureFrame& a, const FeatureFrame& b,
                              double t) {
    for (auto& [id, v] : out.au_intensities) {
        const auto ia = a.au_intensities.find(id);
        const auto ib = b.au_intensities.find(id);
        if (ia != a.au_intensities.end() && ib != b.au_intensities.end())
            v = lerp(ia->second, ib->second, t);
    }
    if (out.landmarks_2d.size() == a.landmarks_2d.size() &&
        out.landmarks_2d.size() == b.landmarks_2d.size()) {
        for (std::size_t j = 0; j < out.landmarks_2d.size(); ++j) {
            out.landmarks_2d[j].x = lerp(a.landmarks_2d[j].x, b.landmarks_2d[j].x, t);
            out.landmarks_2d[j].y = lerp(a.landmarks_2d[j].y, b.landmarks_2d[j].y, t);
        }
    }
    if (out.landmarks_3d.size() == a.landmarks_3d.size() &&
        out.landmarks_3d.size() == b.landmarks_3d.size()) {
        for (std::size_t j = 0; j < out.landmarks_3d.size(); ++j) {
            out.landmarks_3d[j].x = lerp(a.landmarks_3d[j].x, b.landmarks_3d[j].x, t);
            out.landmarks_3d[j].y = lerp(a.landmarks_3d[j].y, b.landmarks_3d[j].y, t);
            out.landmarks_3d[j].z = lerp(a.landmarks_3d[j].z, b.landmarks_3d[j].z, t);
        }
    }
    if (out.head_pose && a.head_pose && b.head_pose) {
        out.head_pose->tx = lerp(a.head_pose->tx, b.head_pose->tx, t);
        out.head_pose->ty = lerp(a.head_pose->ty, b.head_pose->ty, t);
        out.head_pose->tz = lerp(a.head_pose->tz, b.head_pose->tz, t);
        out.head_pose->rx = lerp(a.head_pose->rx, b.head_pose->rx, t);
        out.head_pose->ry = lerp(a.head_pose->ry, b.head_pose->ry, t);
        out.head_pose->rz = lerp(a.head_pose->rz, b.head_pose->rz, t);
    }
    if (out.gaze_location && a.gaze_location && b.gaze_location) {
        auto lerp3 = [t](const Point3& p, const Point3& q) {
            return Point3{lerp(p.x, q.x, t), lerp(p.y, q.y, t), lerp(p.z, q.z, t)};
        };
        out.gaze_location->eye0 = lerp3(a.gaze_location->eye0, b.gaze_location->eye0);
        out.gaze_location->eye1 = lerp3(a.gaze_location->eye1, b.gaze_location->eye1);
    }
    if (out.gaze_angle && a.gaze_angle && b.gaze_angle) {
        (*out.gaze_angle)[0] = lerp((*a.gaze_angle)[0], (*b.gaze_angle)[0], t);
        (*out.gaze_angle)[1] = lerp((*a.gaze_angle)[1], (*b.gaze_angle)[1], t);
    }
    out.confidence = lerp(a.confidence, b.confidence, t);
    out.success = true;
}

}  // namespace detail

// Quality preprocessing: frames failing the detection criterion (success set
// to false or confidence below the threshold) are linearly interpolated from
// the nearest valid neighbors when the invalid run is at most max_gap frames
// and bounded by valid frames on both sides; otherwise the run is dropped.
// With clamp set, AU intensities are clipped to [0, 5].
[[nodiscard]] inline FeatureSequence preprocess(const FeatureSequence& seq,
                                                const PreprocessPolicy& policy) {
    if (policy.confidence_threshold < 0.0 || policy.confidence_threshold > 1.0)
        throw Error(errc::domain, "confidence_threshold must be in [0, 1]");
    if (policy.max_gap < 0) throw Error(errc::domain, "max_gap must be nonnegative");
    if (seq.frames.empty()) throw Error(errc::empty_input, "empty sequence");

    const std::size_t n = seq.frames.size();
    std::vector<bool> valid(n);
    bool any_valid = false;
    for (std::size_t i = 0; i < n; ++i) {
        valid[i] = seq.frames[i].success &&
                   seq.frames[i].confidence >= policy.confidence_threshold;
        any_valid = any_valid || valid[i];
    }
    if (!any_valid)
        throw Error(errc::unusable_sequence, "no frame passes the confidence criterion");

    FeatureSequence out;
    out.subject_id = seq.subject_id;
    out.fps = seq.fps;
    out.frames.reserve(n);

    std::size_t i = 0;
    while (i < n) {
        if (valid[i]) {
            out.frames.push_back(seq.frames[i]);
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !valid[j]) ++j;  // invalid run [i, j)
        const bool has_left = i > 0;
        const bool has_right = j < n;
        const std::size_t gap = j - i;
        if (has_left && has_right && gap <= static_cast<std::size_t>(policy.max_gap)) {
            const FeatureFrame& left = seq.frames[i - 1];
            const FeatureFrame& right = seq.frames[j];
            for (std::size_t k = i; k < j; ++k) {
                FeatureFrame f = seq.frames[k];
                const double t = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
                detail::interpolate_frame(f, left, right, t);
                out.frames.push_back(std::move(f));
            }
        }
        // runs at the edges or longer than max_gap are dropped
        i = j;
    }

    if (out.frames.empty())
        throw Error(errc::unusable_sequence, "no usable frames after preprocessing");

    if (policy.clamp) {
        for (FeatureFrame& f : out.frames)
            for (auto& [id, v] : f.au_intensities) v = std::clamp(v, 0.0, kAuIntensityMax);
    }
    return out;
}

// Min-max normalization per feature column over the sequence. Constant
// columns map to all-zero so motionless features contribute no velocity.
// Already-scaled matrices pass through unchanged.
[[nodiscard]] inline ModalityMatrix minmax_scale(const ModalityMatrix& m) {
    if (m.values.rows() == 0) throw Error(errc::empty_input, "cannot scale an empty matrix");
    if (m.scaled) return m;

    ModalityMatrix out = m;
    const std::size_t rows = m.values.rows(), cols = m.values.cols();
    for (std::size_t j = 0; j < cols; ++j) {
        double lo = m.values(0, j), hi = m.values(0, j);
        for (std::size_t i = 0; i < rows; ++i) {
            const double v = m.values(i, j);
            if (!std::isfinite(v))
                throw Error(errc::data, "non-finite value in feature column " + std::to_string(j));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < rows; ++i)
            out.values(i, j) = range == 0.0 ? 0.0 : (m.values(i, j) - lo) / range;
    }
    out.scaled = true;
    return out;
}

}  // namespace qfe
