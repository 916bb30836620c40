#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qfe/error.hpp"
#include "qfe/feature.hpp"
#include "qfe/feature_csv.hpp"
#include "qfe/matrix.hpp"
#include "qfe/preprocess.hpp"

namespace qfe {

struct SpatialParams {
    double lambda = 100.0;        // upper bound of the spatial score
    double x_max = kAuIntensityMax;
    std::string au_category = "overall";
};

struct TemporalParams {
    int stride = 5;               // frame interval between differenced samples
    int taylor_order = 20;
    double delta_max = 1.0;
    bool use_closed_form = false;  // exp(dv)-1 instead of the truncated series
};

enum class CombineApproach { domain_weighted, weighted_sum };

struct CombineParams {
    CombineApproach approach = CombineApproach::domain_weighted;
    // Approach 1 multipliers per temporal modality.
    std::map<Modality, double> lambda_k = {{Modality::lm2d, 100.0},
                                           {Modality::hp_orient, 100.0},
                                           {Modality::gaze_loc, 50.0}};
    // Approach 2 weights; sigma_weight applies to the unit-scale sigma.
    double sigma_weight = 1.0;
    std::map<Modality, double> weights = {{Modality::lm2d, 1.0},
                                          {Modality::hp_orient, 1.0},
                                          {Modality::gaze_loc, 1.0}};
    double epsilon = 0.0;
};

struct QfeConfig {
    SpatialParams spatial;
    TemporalParams temporal;
    CombineParams combine;
    std::vector<Modality> modalities = {Modality::lm2d, Modality::hp_orient, Modality::gaze_loc};
};

// ---- spatial expressiveness -------------------------------------------------

namespace detail {

inline void check_spatial_params(const SpatialParams& p) {
    if (!(p.lambda > 0.0)) throw Error(errc::domain, "lambda must be positive");
    if (!(p.x_max > 0.0)) throw Error(errc::domain, "x_max must be positive");
}

// Exponentially weighted mean activation, bounded to [0, lambda]. No range
// check on the intensities; used for perturbed data in the robustness runs.
[[nodiscard]] inline double spatial_score_unchecked(std::span<const double> au,
                                                    const SpatialParams& p) {
    double acc = 0.0;
    for (double x : au) acc += std::expm1(x / p.x_max);
    const double n = static_cast<double>(au.size());
    return p.lambda / (n * std::expm1(1.0)) * acc;
}

}  // namespace detail

// Spatial expressiveness of one frame from its AU intensity vector. Active
// AUs are weighted exponentially; the score lies in [0, lambda] and is
// strictly increasing in each intensity.
[[nodiscard]] inline double spatial_score(std::span<const double> au, const SpatialParams& p) {
    detail::check_spatial_params(p);
    if (au.empty()) throw Error(errc::domain, "empty AU vector");
    for (double x : au) {
        if (!(x >= 0.0) || x > p.x_max)
            throw Error(errc::domain, "AU intensity outside [0, x_max]; clamp first");
    }
    return detail::spatial_score_unchecked(au, p);
}

// ---- temporal expressiveness ------------------------------------------------

// Per-pair, per-feature velocity on the stride grid: |x(t+stride) - x(t)| /
// stride for t = 0, stride, 2*stride, ... Requires a scaled matrix, so every
// velocity lies in [0, 1].
[[nodiscard]] inline Matrix velocity(const ModalityMatrix& m, int stride) {
    if (stride < 1) throw Error(errc::domain, "stride must be >= 1");
    if (!m.scaled) throw Error(errc::domain, "velocity requires a scaled matrix");
    const std::size_t n = m.values.rows();
    if (n <= static_cast<std::size_t>(stride))
        throw Error(errc::insufficient_data,
                    "need more than stride frames, got " + std::to_string(n));
    const std::size_t pairs = (n - 1) / static_cast<std::size_t>(stride);
    Matrix dv(pairs, m.values.cols());
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t t0 = p * static_cast<std::size_t>(stride);
        const std::size_t t1 = t0 + static_cast<std::size_t>(stride);
        for (std::size_t j = 0; j < m.values.cols(); ++j)
            dv(p, j) = std::abs(m.values(t1, j) - m.values(t0, j)) / static_cast<double>(stride);
    }
    return dv;
}

// Order-truncated Taylor series of exp(y) - 1, accumulated Horner-style.
[[nodiscard]] inline double taylor_expm1(double y, int order) {
    double acc = 0.0;
    for (int m = order; m >= 1; --m) acc = (1.0 + acc) * y / static_cast<double>(m);
    return acc;
}

// Raw temporal expressiveness of one velocity row: sum over features of the
// truncated exp(dv) - 1. Each summand lies in [0, e-1] for dv in [0, 1].
[[nodiscard]] inline double temporal_raw(std::span<const double> dv_row, int order) {
    if (order < 1) throw Error(errc::domain, "taylor order must be >= 1");
    double acc = 0.0;
    for (double dv : dv_row) {
        if (dv < 0.0) throw Error(errc::domain, "negative velocity");
        acc += taylor_expm1(dv, order);
    }
    return acc;
}

// Scale the raw temporal expressiveness to [0, 1].
[[nodiscard]] inline double temporal_score(double t_exp, std::size_t n_features,
                                           double delta_max) {
    if (n_features == 0) throw Error(errc::domain, "feature count must be >= 1");
    if (t_exp < 0.0) throw Error(errc::domain, "t_exp must be nonnegative");
    if (!(delta_max > 0.0)) throw Error(errc::domain, "delta_max must be positive");
    return t_exp / (static_cast<double>(n_features) * std::expm1(delta_max));
}

// Per-frame temporal expressiveness for one scaled modality. The score is
// computed on the stride grid; frames between grid points hold the value of
// the most recent completed pair, and frames before the first pair carry 0.
[[nodiscard]] inline std::vector<double> modality_delta_series(const ModalityMatrix& m,
                                                               const TemporalParams& p) {
    const Matrix dv = velocity(m, p.stride);
    const std::size_t n = m.values.rows();
    std::vector<double> delta(n, 0.0);
    for (std::size_t pair = 0; pair < dv.rows(); ++pair) {
        double t_exp = 0.0;
        if (p.use_closed_form) {
            for (double v : dv.row(pair)) t_exp += std::expm1(v);
        } else {
            t_exp = temporal_raw(dv.row(pair), p.taylor_order);
        }
        const double d = temporal_score(t_exp, dv.cols(), p.delta_max);
        const std::size_t from = (pair + 1) * static_cast<std::size_t>(p.stride);
        const std::size_t to =
            pair + 1 < dv.rows() ? (pair + 2) * static_cast<std::size_t>(p.stride) : n;
        for (std::size_t t = from; t < to && t < n; ++t) delta[t] = d;
    }
    return delta;
}

// ---- combining spatial and temporal ------------------------------------------

// Approach 1: sigma gated by the weighted mean of the temporal scores,
// tau = sigma * (1 + mean_k(lambda_k * delta_k)).
[[nodiscard]] inline std::vector<double> combine_approach1(
    std::span<const double> sigma, const std::map<Modality, std::vector<double>>& deltas,
    const std::map<Modality, double>& lambda_k) {
    if (deltas.empty()) throw Error(errc::shape, "at least one temporal modality required");
    for (const auto& [m, series] : deltas) {
        if (series.size() != sigma.size())
            throw Error(errc::shape, "delta series length mismatch for " +
                                         std::string(modality_name(m)));
        if (!lambda_k.count(m))
            throw Error(errc::shape,
                        "missing lambda_k for " + std::string(modality_name(m)));
    }
    const double n_mod = static_cast<double>(deltas.size());
    std::vector<double> tau(sigma.size());
    for (std::size_t t = 0; t < sigma.size(); ++t) {
        double acc = 0.0;
        for (const auto& [m, series] : deltas) acc += lambda_k.at(m) * series[t];
        tau[t] = sigma[t] * (1.0 + acc / n_mod);
    }
    return tau;
}

// Approach 2: weighted combination with an offset, tau = w0*sigma +
// sum_k(w_k * delta_k) + epsilon. Expects sigma on the unit scale (lambda=1).
[[nodiscard]] inline std::vector<double> combine_approach2(
    std::span<const double> sigma, const std::map<Modality, std::vector<double>>& deltas,
    double sigma_weight, const std::map<Modality, double>& weights, double epsilon) {
    for (const auto& [m, series] : deltas) {
        if (series.size() != sigma.size())
            throw Error(errc::shape, "delta series length mismatch for " +
                                         std::string(modality_name(m)));
        if (!weights.count(m))
            throw Error(errc::shape, "missing weight for " + std::string(modality_name(m)));
    }
    std::vector<double> tau(sigma.size());
    for (std::size_t t = 0; t < sigma.size(); ++t) {
        double acc = sigma_weight * sigma[t] + epsilon;
        for (const auto& [m, series] : deltas) acc += weights.at(m) * series[t];
        tau[t] = acc;
    }
    return tau;
}

// ---- full pipeline ------------------------------------------------------------

struct ExpressivenessRecord {
    int frame_index = 0;
    double sigma = 0.0;
    std::map<Modality, double> delta;
    double tau = 0.0;
};

struct ExpressivenessSeries {
    QfeConfig config;
    std::string subject_id;
    std::vector<ExpressivenessRecord> frames;

    [[nodiscard]] std::size_t size() const noexcept { return frames.size(); }

    [[nodiscard]] std::vector<double> sigma_series() const {
        std::vector<double> out(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) out[i] = frames[i].sigma;
        return out;
    }
    [[nodiscard]] std::vector<double> tau_series() const {
        std::vector<double> out(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) out[i] = frames[i].tau;
        return out;
    }
    [[nodiscard]] std::vector<double> delta_series(Modality m) const {
        std::vector<double> out(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) out[i] = frames[i].delta.at(m);
        return out;
    }
};

// Full pipeline: AU subset -> sigma per frame; scale each temporal modality
// -> delta series; combine per the configured approach. The sigma loop may
// run on several threads; chunks write disjoint slots so the result is
// identical for any thread count.
[[nodiscard]] inline ExpressivenessSeries compute_qfe(
    const FeatureSequence& seq, const QfeConfig& config,
    const AUCategoryMap& map = default_au_category_map(), unsigned threads = 1) {
    detail::check_spatial_params(config.spatial);
    if (seq.frames.empty()) throw Error(errc::empty_input, "empty sequence");
    const std::size_t n = seq.frames.size();

    std::vector<double> sigma(n);
    auto sigma_chunk = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto au = select_au_subset(seq.frames[i], config.spatial.au_category, map);
            sigma[i] = spatial_score(au, config.spatial);
        }
    };
    if (threads <= 1 || n < 2 * threads) {
        sigma_chunk(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&, begin, end] {
                try {
                    sigma_chunk(begin, end);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    std::map<Modality, std::vector<double>> deltas;
    for (Modality m : config.modalities) {
        const ModalityMatrix scaled = minmax_scale(modality_matrix(seq, m));
        deltas[m] = modality_delta_series(scaled, config.temporal);
    }

    std::vector<double> tau;
    if (config.combine.approach == CombineApproach::domain_weighted) {
        tau = combine_approach1(sigma, deltas, config.combine.lambda_k);
    } else {
        // unit-scale sigma so every weighted term shares the [0, 1] range
        std::vector<double> unit_sigma(n);
        for (std::size_t i = 0; i < n; ++i) unit_sigma[i] = sigma[i] / config.spatial.lambda;
        tau = combine_approach2(unit_sigma, deltas, config.combine.sigma_weight,
                                config.combine.weights, config.combine.epsilon);
    }

    ExpressivenessSeries out;
    out.config = config;
    out.subject_id = seq.subject_id;
    out.frames.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.frames[i].frame_index = seq.frames[i].frame_index;
        out.frames[i].sigma = sigma[i];
        for (const auto& [m, series] : deltas) out.frames[i].delta[m] = series[i];
        out.frames[i].tau = tau[i];
    }
    return out;
}

// ---- serialization --------------------------------------------------------------

[[nodiscard]] inline nlohmann::ordered_json config_to_json(const QfeConfig& c) {
    nlohmann::ordered_json j;
    j["lambda"] = c.spatial.lambda;
    j["x_max"] = c.spatial.x_max;
    j["au_category"] = c.spatial.au_category;
    j["stride"] = c.temporal.stride;
    j["taylor_order"] = c.temporal.taylor_order;
    j["delta_max"] = c.temporal.delta_max;
    j["use_closed_form"] = c.temporal.use_closed_form;
    j["approach"] =
        c.combine.approach == CombineApproach::domain_weighted ? "domain_weighted" : "weighted_sum";
    nlohmann::ordered_json lk;
    for (const auto& [m, v] : c.combine.lambda_k) lk[modality_key(m)] = v;
    j["lambda_k"] = lk;
    j["sigma_weight"] = c.combine.sigma_weight;
    nlohmann::ordered_json w;
    for (const auto& [m, v] : c.combine.weights) w[modality_key(m)] = v;
    j["weights"] = w;
    j["epsilon"] = c.combine.epsilon;
    nlohmann::ordered_json mods = nlohmann::ordered_json::array();
    for (Modality m : c.modalities) mods.push_back(modality_key(m));
    j["modalities"] = mods;
    return j;
}

// JSON report embedding the configuration snapshot.
[[nodiscard]] inline nlohmann::ordered_json series_to_json(const ExpressivenessSeries& s) {
    nlohmann::ordered_json j;
    j["config"] = config_to_json(s.config);
    if (!s.subject_id.empty()) j["subject_id"] = s.subject_id;
    j["frames"] = s.frames.size();
    nlohmann::ordered_json frame_index = nlohmann::ordered_json::array();
    nlohmann::ordered_json sigma = nlohmann::ordered_json::array();
    nlohmann::ordered_json tau = nlohmann::ordered_json::array();
    for (const auto& f : s.frames) {
        frame_index.push_back(f.frame_index);
        sigma.push_back(f.sigma);
        tau.push_back(f.tau);
    }
    j["frame_index"] = std::move(frame_index);
    j["sigma"] = std::move(sigma);
    nlohmann::ordered_json delta;
    for (Modality m : s.config.modalities) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& f : s.frames) arr.push_back(f.delta.at(m));
        delta[modality_key(m)] = std::move(arr);
    }
    j["delta"] = std::move(delta);
    j["tau"] = std::move(tau);
    return j;
}

// CSV mirror: frame, sigma, one delta column per modality, tau.
[[nodiscard]] inline std::string series_to_csv(const ExpressivenessSeries& s) {
    std::string out = "frame,sigma";
    for (Modality m : s.config.modalities) out += std::string(",delta_") + modality_key(m);
    out += ",tau\n";
    auto num = [&](double v) {
        out += ',';
        csv_detail::append_number(out, v);
    };
    for (const auto& f : s.frames) {
        out += std::to_string(f.frame_index);
        num(f.sigma);
        for (Modality m : s.config.modalities) num(f.delta.at(m));
        num(f.tau);
        out += '\n';
    }
    return out;
}

}  // namespace qfe
