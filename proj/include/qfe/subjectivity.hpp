#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfe/error.hpp"
#include "qfe/expressiveness.hpp"
#include "qfe/log.hpp"
#include "qfe/matrix.hpp"
#include "qfe/stats.hpp"

namespace qfe {

// ---- pairwise metrics --------------------------------------------------------

struct MarpeResult {
    double percent = 0.0;
    std::size_t excluded = 0;  // zero-reference frames left out of the mean
};

// Mean absolute-relative percentage error of y against the reference x.
// Frames with a zero reference are excluded and counted.
[[nodiscard]] inline MarpeResult marpe(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(errc::shape, "series length mismatch");
    if (x.empty()) throw Error(errc::empty_input, "empty series");
    MarpeResult out;
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) {
            ++out.excluded;
            continue;
        }
        acc += std::abs(x[i] - y[i]) / std::abs(x[i]);
        ++used;
    }
    if (used == 0) throw Error(errc::undefined_reference, "reference series is all zero");
    out.percent = acc / static_cast<double>(used) * 100.0;
    return out;
}

// Classic full-matrix dynamic time warping with |a-b| local cost and no
// window constraint; unnormalized path cost.
[[nodiscard]] inline double dtw_distance(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw Error(errc::domain, "DTW needs nonempty series");
    const std::size_t n = x.size(), m = y.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), curr(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        curr[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double c = std::abs(x[i - 1] - y[j - 1]);
            curr[j] = c + std::min({prev[j], curr[j - 1], prev[j - 1]});
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

struct SpearmanResult {
    double rho = 0.0;
    double p_value = std::numeric_limits<double>::quiet_NaN();  // NaN when n < 4
};

// Spearman rank correlation with average-tied ranks; two-sided p-value from
// the t approximation t = rho * sqrt((n-2)/(1-rho^2)).
[[nodiscard]] inline SpearmanResult spearman(std::span<const double> x,
                                             std::span<const double> y) {
    if (x.size() != y.size()) throw Error(errc::shape, "series length mismatch");
    if (x.size() < 2) throw Error(errc::insufficient_data, "spearman needs n >= 2");
    if (is_constant(x) || is_constant(y))
        throw Error(errc::undefined_correlation, "constant series in rank correlation");

    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    SpearmanResult out;
    out.rho = pearson(rx, ry);
    const std::size_t n = x.size();
    if (n >= 4) {
        const double r2 = out.rho * out.rho;
        if (r2 >= 1.0) {
            out.p_value = 0.0;
        } else {
            const double t = out.rho * std::sqrt((static_cast<double>(n) - 2.0) / (1.0 - r2));
            out.p_value = t_pvalue_two_sided(t, static_cast<double>(n) - 2.0);
        }
    }
    return out;
}

// Lin's concordance correlation coefficient with population moments.
[[nodiscard]] inline double ccc(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(errc::shape, "series length mismatch");
    if (x.size() < 2) throw Error(errc::insufficient_data, "ccc needs n >= 2");
    const double vx = variance(x), vy = variance(y);
    if (vx == 0.0 && vy == 0.0)
        throw Error(errc::undefined_correlation, "both series constant");
    const double gap = mean(x) - mean(y);
    return 2.0 * covariance(x, y) / (vx + vy + gap * gap);
}

// ---- pairwise report ---------------------------------------------------------

enum class PairMetric { marpe, dtw, srcc, ccc };

[[nodiscard]] inline const char* pair_metric_name(PairMetric m) {
    switch (m) {
        case PairMetric::marpe: return "marpe";
        case PairMetric::dtw: return "dtw";
        case PairMetric::srcc: return "srcc";
        case PairMetric::ccc: return "ccc";
    }
    return "?";
}

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;  // finite off-diagonal entries
};

struct PairwiseReport {
    PairMetric metric = PairMetric::marpe;
    std::vector<std::string> subject_ids;
    Matrix values;    // n x n; row = reference subject for MARPE
    Matrix p_values;  // n x n, SRCC only
    MetricSummary summary;
    std::size_t common_length = 0;
    std::size_t failed_pairs = 0;      // undefined metric values, stored as NaN
    std::size_t excluded_frames = 0;   // MARPE zero-reference exclusions
};

namespace detail {

inline MetricSummary offdiag_summary(const Matrix& m) {
    MetricSummary s;
    std::vector<double> vals;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j && std::isfinite(m(i, j))) vals.push_back(m(i, j));
    s.count = vals.size();
    if (!vals.empty()) {
        s.mean = mean(vals);
        s.sd = stdev(vals);
    }
    return s;
}

}  // namespace detail

// Evaluate one metric across all ordered subject pairs. Series are truncated
// to the common minimum length; undefined pairs (constant series, all-zero
// references) are stored as NaN, counted, and skipped in the summary.
[[nodiscard]] inline PairwiseReport pairwise_matrix(
    const std::map<std::string, std::vector<double>>& series_by_subject, PairMetric metric) {
    if (series_by_subject.size() < 2)
        throw Error(errc::domain, "pairwise analysis needs at least 2 subjects");

    PairwiseReport rep;
    rep.metric = metric;
    std::size_t common = std::numeric_limits<std::size_t>::max();
    for (const auto& [id, series] : series_by_subject) {
        rep.subject_ids.push_back(id);
        common = std::min(common, series.size());
    }
    if (common < 1) throw Error(errc::empty_input, "a subject series is empty");
    rep.common_length = common;

    std::vector<std::span<const double>> s;
    for (const auto& [id, series] : series_by_subject) s.emplace_back(series.data(), common);

    const std::size_t n = s.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.values = Matrix(n, n, 0.0);
    if (metric == PairMetric::srcc) rep.p_values = Matrix(n, n, 0.0);

    const bool symmetric = metric != PairMetric::marpe;
    for (std::size_t i = 0; i < n; ++i) {
        rep.values(i, i) = (metric == PairMetric::srcc || metric == PairMetric::ccc) ? 1.0 : 0.0;
        for (std::size_t j = symmetric ? i + 1 : 0; j < n; ++j) {
            if (i == j) continue;
            double v = nan, p = nan;
            try {
                switch (metric) {
                    case PairMetric::marpe: {
                        const MarpeResult r = marpe(s[i], s[j]);
                        v = r.percent;
                        rep.excluded_frames += r.excluded;
                        break;
                    }
                    case PairMetric::dtw:
                        v = dtw_distance(s[i], s[j]);
                        break;
                    case PairMetric::srcc: {
                        const SpearmanResult r = spearman(s[i], s[j]);
                        v = r.rho;
                        p = r.p_value;
                        break;
                    }
                    case PairMetric::ccc:
                        v = ccc(s[i], s[j]);
                        break;
                }
            } catch (const Error&) {
                ++rep.failed_pairs;
            }
            rep.values(i, j) = v;
            if (symmetric) rep.values(j, i) = v;
            if (metric == PairMetric::srcc) {
                rep.p_values(i, j) = p;
                rep.p_values(j, i) = p;
            }
        }
    }
    rep.summary = detail::offdiag_summary(rep.values);
    return rep;
}

// ---- distribution estimate -----------------------------------------------------

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian kernel density estimate with the robust Silverman rule of thumb,
// h = 0.9 * min(sd, IQR/1.34) * n^(-1/5), over [min - 3h, max + 3h].
[[nodiscard]] inline KdeCurve kde(std::span<const double> values, std::size_t grid_points = 256) {
    if (values.size() < 2) throw Error(errc::insufficient_data, "KDE needs n >= 2");
    if (grid_points < 2) throw Error(errc::domain, "need at least 2 grid points");
    if (is_constant(values)) throw Error(errc::zero_spread, "constant sample");

    const double sd = std::sqrt(sample_variance(values));
    const double iqr = quantile(values, 0.75) - quantile(values, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    const double h =
        0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it - 3.0 * h, hi = *hi_it + 3.0 * h;

    KdeCurve out;
    out.bandwidth = h;
    out.grid.resize(grid_points);
    out.density.resize(grid_points);
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    const double norm =
        1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * 3.141592653589793238));
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double x = lo + step * static_cast<double>(g);
        double acc = 0.0;
        for (double v : values) {
            const double z = (x - v) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out.grid[g] = x;
        out.density[g] = norm * acc;
    }
    return out;
}

[[nodiscard]] inline double trapezoid_integral(const KdeCurve& c) {
    double acc = 0.0;
    for (std::size_t i = 1; i < c.grid.size(); ++i)
        acc += 0.5 * (c.density[i] + c.density[i - 1]) * (c.grid[i] - c.grid[i - 1]);
    return acc;
}

// ---- frame-rate / modality ablation ----------------------------------------------

struct AblationReport {
    std::vector<int> strides;
    std::vector<Modality> modalities;           // candidates present in the sequence
    std::vector<Modality> omitted;              // candidates missing from the input
    std::map<int, Matrix> srcc_by_stride;       // symmetric, unit diagonal
};

// Pairwise rank correlation among the candidate temporal features, per
// stride. Candidates missing from the input (typically 3D landmarks) are
// omitted with a notice.
[[nodiscard]] inline AblationReport ablate_modalities(const FeatureSequence& seq,
                                                      const std::vector<int>& strides,
                                                      int taylor_order = 20) {
    if (strides.empty()) throw Error(errc::domain, "no strides requested");
    const std::vector<Modality> candidates = {Modality::lm2d,     Modality::lm3d,
                                              Modality::hp_orient, Modality::hp_rot,
                                              Modality::gaze_loc,  Modality::gaze_angle};
    AblationReport rep;
    rep.strides = strides;

    std::vector<ModalityMatrix> scaled;
    for (Modality m : candidates) {
        try {
            scaled.push_back(minmax_scale(modality_matrix(seq, m)));
            rep.modalities.push_back(m);
        } catch (const Error& e) {
            if (e.code() != errc::missing_feature) throw;
            rep.omitted.push_back(m);
            log::info(std::string(modality_name(m)) + " missing; omitted from the ablation");
        }
    }
    if (rep.modalities.size() < 2)
        throw Error(errc::insufficient_data, "fewer than 2 temporal modalities available");

    for (int stride : strides) {
        if (seq.frames.size() <= static_cast<std::size_t>(stride))
            throw Error(errc::insufficient_data,
                        "sequence shorter than stride " + std::to_string(stride));
        TemporalParams params;
        params.stride = stride;
        params.taylor_order = taylor_order;
        std::vector<std::vector<double>> delta;
        for (const ModalityMatrix& m : scaled) delta.push_back(modality_delta_series(m, params));

        const std::size_t k = delta.size();
        Matrix corr(k, k, 1.0);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) {
                double rho = std::numeric_limits<double>::quiet_NaN();
                try {
                    rho = spearman(delta[a], delta[b]).rho;
                } catch (const Error&) {
                    // constant delta series; correlation undefined
                }
                corr(a, b) = rho;
                corr(b, a) = rho;
            }
        rep.srcc_by_stride.emplace(stride, std::move(corr));
    }
    return rep;
}

// ---- serialization ------------------------------------------------------------

[[nodiscard]] inline nlohmann::ordered_json pairwise_to_json(const PairwiseReport& r) {
    nlohmann::ordered_json j;
    j["metric"] = pair_metric_name(r.metric);
    j["subjects"] = r.subject_ids;
    j["common_length"] = r.common_length;
    j["mean"] = r.summary.mean;
    j["sd"] = r.summary.sd;
    j["pairs"] = r.summary.count;
    j["failed_pairs"] = r.failed_pairs;
    if (r.metric == PairMetric::marpe) j["excluded_frames"] = r.excluded_frames;
    return j;
}

// n x n metric matrix with subject ids as header row/column.
[[nodiscard]] inline std::string matrix_to_csv(const Matrix& m,
                                               const std::vector<std::string>& labels) {
    if (m.rows() != labels.size() || m.cols() != labels.size())
        throw Error(errc::shape, "label count does not match the matrix");
    std::string out = "subject";
    for (const auto& l : labels) out += "," + l;
    out += '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += labels[i];
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out += ',';
            csv_detail::append_number(out, m(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace qfe
