#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "qfe/error.hpp"
#include "qfe/expressiveness.hpp"
#include "qfe/matrix.hpp"
#include "qfe/preprocess.hpp"
#include "qfe/rng.hpp"
#include "qfe/stats.hpp"

namespace qfe {

enum class PerturbationUnit { per_frame, per_scalar };
enum class NoiseDistribution { uniform, half_normal };

// Reproducibility contract: inject_noise draws from SplitMix64(seed); draws
// happen row-major, one per frame (per_frame) or one per entry (per_scalar).
// inject_anomalies draws from SplitMix64(seed + 0x9E3779B97F4A7C15): first the
// frame selection (one index_below per Fisher-Yates step), then one gain per
// selected frame (or per entry in per_scalar mode), in ascending frame order.
struct PerturbationConfig {
    std::uint64_t seed = 0;
    double noise_scale = 0.05;
    double anomaly_fraction = 0.02;
    double anomaly_gain_max = 2.0;
    PerturbationUnit unit = PerturbationUnit::per_frame;
    NoiseDistribution noise_distribution = NoiseDistribution::uniform;
};

namespace detail {

inline double noise_draw(SplitMix64& rng, const PerturbationConfig& cfg) {
    if (cfg.noise_distribution == NoiseDistribution::uniform)
        return rng.uniform(0.0, cfg.noise_scale);
    // half-normal |N(0, scale^2)| via Box-Muller; consumes two words
    const double u1 = std::max(rng.next_double(), 1e-300);
    const double u2 = rng.next_double();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238 * u2);
    return std::abs(z) * cfg.noise_scale;
}

}  // namespace detail

// Multiplicative noise: every unit scaled by (1 + ns) with ns drawn from
// [0, noise_scale] (or half-normal behind the flag). Nonnegative input never
// decreases.
[[nodiscard]] inline Matrix inject_noise(const Matrix& data, const PerturbationConfig& cfg) {
    if (cfg.noise_scale < 0.0) throw Error(errc::domain, "noise_scale must be nonnegative");
    Matrix out = data;
    if (cfg.noise_scale == 0.0) return out;
    SplitMix64 rng(cfg.seed);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (cfg.unit == PerturbationUnit::per_frame) {
            const double factor = 1.0 + detail::noise_draw(rng, cfg);
            for (std::size_t j = 0; j < data.cols(); ++j) out(i, j) = data(i, j) * factor;
        } else {
            for (std::size_t j = 0; j < data.cols(); ++j)
                out(i, j) = data(i, j) * (1.0 + detail::noise_draw(rng, cfg));
        }
    }
    return out;
}

// Exactly round(fraction * n) frames, chosen uniformly without replacement,
// multiplied by a gain drawn from [0, anomaly_gain_max]. Returns the modified
// matrix and the chosen frame indices in ascending order.
[[nodiscard]] inline std::pair<Matrix, std::vector<std::size_t>> inject_anomalies(
    const Matrix& data, const PerturbationConfig& cfg) {
    if (cfg.anomaly_fraction < 0.0 || cfg.anomaly_fraction > 1.0)
        throw Error(errc::domain, "anomaly_fraction must be in [0, 1]");
    if (cfg.anomaly_gain_max < 0.0)
        throw Error(errc::domain, "anomaly_gain_max must be nonnegative");

    const std::size_t n = data.rows();
    const auto count = static_cast<std::size_t>(
        std::llround(cfg.anomaly_fraction * static_cast<double>(n)));
    Matrix out = data;
    if (count == 0) return {out, {}};

    SplitMix64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.index_below(n - i);
        std::swap(pool[i], pool[j]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<long>(count));
    std::sort(chosen.begin(), chosen.end());

    for (std::size_t idx : chosen) {
        if (cfg.unit == PerturbationUnit::per_frame) {
            const double gain = rng.uniform(0.0, cfg.anomaly_gain_max);
            for (std::size_t j = 0; j < data.cols(); ++j) out(idx, j) = data(idx, j) * gain;
        } else {
            for (std::size_t j = 0; j < data.cols(); ++j)
                out(idx, j) = data(idx, j) * rng.uniform(0.0, cfg.anomaly_gain_max);
        }
    }
    return {out, chosen};
}

// ---- whole-sequence perturbation and the experiment -----------------------------

namespace detail {

// Flatten a frame's numeric features (AUs, landmarks, pose, gaze) into one
// row so a perturbation unit can cover the whole frame.
struct SequenceCodec {
    std::vector<int> au_ids;
    bool lm2d = false, lm3d = false, pose = false, gaze = false, gaze_angle = false;
    std::size_t width = 0;

    explicit SequenceCodec(const FeatureSequence& seq) {
        const FeatureFrame& f = seq.frames.front();
        for (const auto& [id, _] : f.au_intensities) au_ids.push_back(id);
        lm2d = !f.landmarks_2d.empty();
        lm3d = !f.landmarks_3d.empty();
        pose = f.head_pose.has_value();
        gaze = f.gaze_location.has_value();
        gaze_angle = f.gaze_angle.has_value();
        width = au_ids.size() + (lm2d ? 2 * kLandmarkCount : 0) + (lm3d ? 3 * kLandmarkCount : 0) +
                (pose ? 6 : 0) + (gaze ? 6 : 0) + (gaze_angle ? 2 : 0);
    }

    [[nodiscard]] Matrix encode(const FeatureSequence& seq) const {
        Matrix m(seq.frames.size(), width);
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            const FeatureFrame& f = seq.frames[i];
            std::size_t c = 0;
            for (int id : au_ids) m(i, c++) = f.au_intensities.at(id);
            if (lm2d)
                for (const Point2& p : f.landmarks_2d) {
                    m(i, c++) = p.x;
                    m(i, c++) = p.y;
                }
            if (lm3d)
                for (const Point3& p : f.landmarks_3d) {
                    m(i, c++) = p.x;
                    m(i, c++) = p.y;
                    m(i, c++) = p.z;
                }
            if (pose) {
                const HeadPose& hp = *f.head_pose;
                for (double v : {hp.tx, hp.ty, hp.tz, hp.rx, hp.ry, hp.rz}) m(i, c++) = v;
            }
            if (gaze) {
                for (const Point3& p : {f.gaze_location->eye0, f.gaze_location->eye1}) {
                    m(i, c++) = p.x;
                    m(i, c++) = p.y;
                    m(i, c++) = p.z;
                }
            }
            if (gaze_angle) {
                m(i, c++) = (*f.gaze_angle)[0];
                m(i, c++) = (*f.gaze_angle)[1];
            }
        }
        return m;
    }

    void decode(const Matrix& m, FeatureSequence& seq) const {
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            FeatureFrame& f = seq.frames[i];
            std::size_t c = 0;
            for (int id : au_ids) f.au_intensities[id] = m(i, c++);
            if (lm2d)
                for (Point2& p : f.landmarks_2d) {
                    p.x = m(i, c++);
                    p.y = m(i, c++);
                }
            if (lm3d)
                for (Point3& p : f.landmarks_3d) {
                    p.x = m(i, c++);
                    p.y = m(i, c++);
                    p.z = m(i, c++);
                }
            if (pose) {
                HeadPose& hp = *f.head_pose;
                hp.tx = m(i, c++);
                hp.ty = m(i, c++);
                hp.tz = m(i, c++);
                hp.rx = m(i, c++);
                hp.ry = m(i, c++);
                hp.rz = m(i, c++);
            }
            if (gaze) {
                for (Point3* p : {&f.gaze_location->eye0, &f.gaze_location->eye1}) {
                    p->x = m(i, c++);
                    p->y = m(i, c++);
                    p->z = m(i, c++);
                }
            }
            if (gaze_angle) {
                (*f.gaze_angle)[0] = m(i, c++);
                (*f.gaze_angle)[1] = m(i, c++);
            }
        }
    }
};

}  // namespace detail

// Noise followed by anomalies over all numeric features of the sequence,
// applied before any scaling. Returns the perturbed copy and the anomalous
// frame positions.
[[nodiscard]] inline std::pair<FeatureSequence, std::vector<std::size_t>> perturb_sequence(
    const FeatureSequence& seq, const PerturbationConfig& cfg) {
    if (seq.frames.empty()) throw Error(errc::empty_input, "empty sequence");
    const detail::SequenceCodec codec(seq);
    Matrix m = codec.encode(seq);
    m = inject_noise(m, cfg);
    auto [with_anomalies, indices] = inject_anomalies(m, cfg);
    FeatureSequence out = seq;
    codec.decode(with_anomalies, out);
    return {std::move(out), std::move(indices)};
}

struct SeriesSummary {
    double mean = 0.0;
    double sd = 0.0;
};

struct VariantSeries {
    std::vector<double> sigma;
    std::map<Modality, std::vector<double>> delta;
};

struct RobustnessReport {
    PerturbationConfig config;
    std::vector<std::size_t> anomaly_indices;
    VariantSeries clean, perturbed, mitigated;
    SeriesSummary sigma_clean, sigma_perturbed, sigma_mitigated;
    std::map<Modality, SeriesSummary> delta_clean, delta_perturbed, delta_mitigated;
};

namespace detail {

inline SeriesSummary summarize(std::span<const double> v) {
    return {mean(v), stdev(v)};
}

// Sigma and delta on a sequence whose AU values may exceed the nominal range.
inline VariantSeries score_variant(const FeatureSequence& seq, const QfeConfig& config,
                                   const AUCategoryMap& map) {
    VariantSeries out;
    out.sigma.resize(seq.frames.size());
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        const auto au = select_au_subset(seq.frames[i], config.spatial.au_category, map);
        out.sigma[i] = detail::spatial_score_unchecked(au, config.spatial);
    }
    for (Modality m : config.modalities) {
        const ModalityMatrix scaled = minmax_scale(modality_matrix(seq, m));
        out.delta[m] = modality_delta_series(scaled, config.temporal);
    }
    return out;
}

}  // namespace detail

// The noise/anomaly experiment: score the clean sequence, the perturbed one,
// and the mitigated one (confidence filtering plus clamping), then summarize.
[[nodiscard]] inline RobustnessReport run_robustness_experiment(
    const FeatureSequence& seq, const PerturbationConfig& cfg,
    const PreprocessPolicy& mitigation = {}, const QfeConfig& config = {},
    const AUCategoryMap& map = default_au_category_map()) {
    RobustnessReport rep;
    rep.config = cfg;

    auto [perturbed_seq, indices] = perturb_sequence(seq, cfg);
    rep.anomaly_indices = std::move(indices);
    const FeatureSequence mitigated_seq = preprocess(perturbed_seq, mitigation);

    rep.clean = detail::score_variant(seq, config, map);
    rep.perturbed = detail::score_variant(perturbed_seq, config, map);
    rep.mitigated = detail::score_variant(mitigated_seq, config, map);

    rep.sigma_clean = detail::summarize(rep.clean.sigma);
    rep.sigma_perturbed = detail::summarize(rep.perturbed.sigma);
    rep.sigma_mitigated = detail::summarize(rep.mitigated.sigma);
    for (Modality m : config.modalities) {
        rep.delta_clean[m] = detail::summarize(rep.clean.delta.at(m));
        rep.delta_perturbed[m] = detail::summarize(rep.perturbed.delta.at(m));
        rep.delta_mitigated[m] = detail::summarize(rep.mitigated.delta.at(m));
    }
    return rep;
}

[[nodiscard]] inline nlohmann::ordered_json perturbation_config_to_json(
    const PerturbationConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["noise_scale"] = c.noise_scale;
    j["anomaly_fraction"] = c.anomaly_fraction;
    j["anomaly_gain_max"] = c.anomaly_gain_max;
    j["unit"] = c.unit == PerturbationUnit::per_frame ? "per_frame" : "per_scalar";
    j["noise_distribution"] =
        c.noise_distribution == NoiseDistribution::uniform ? "uniform" : "half_normal";
    j["generator"] = "splitmix64-v1";
    return j;
}

[[nodiscard]] inline nlohmann::ordered_json robustness_report_to_json(
    const RobustnessReport& r) {
    nlohmann::ordered_json j;
    j["config"] = perturbation_config_to_json(r.config);
    j["anomaly_indices"] = r.anomaly_indices;
    auto summary = [](const SeriesSummary& s) {
        nlohmann::ordered_json o;
        o["mean"] = s.mean;
        o["sd"] = s.sd;
        return o;
    };
    for (const auto& [name, sig, del] :
         {std::tuple{"clean", &r.sigma_clean, &r.delta_clean},
          std::tuple{"perturbed", &r.sigma_perturbed, &r.delta_perturbed},
          std::tuple{"mitigated", &r.sigma_mitigated, &r.delta_mitigated}}) {
        nlohmann::ordered_json o;
        o["sigma"] = summary(*sig);
        nlohmann::ordered_json d;
        for (const auto& [m, s] : *del) d[modality_key(m)] = summary(s);
        o["delta"] = std::move(d);
        j[name] = std::move(o);
    }
    return j;
}

}  // namespace qfe
