#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qfe/error.hpp"
#include "qfe/feature_csv.hpp"
#include "qfe/log.hpp"
#include "qfe/stats.hpp"

namespace qfe {

// External temporal signal paired with a response series (temperature,
// stimulus code, ...).
struct ContextSeries {
    std::vector<double> values;
    double fps = 5.0;
};

// First difference applied d times; output length shrinks by d.
[[nodiscard]] inline std::vector<double> difference(std::span<const double> series, int d = 1) {
    if (d < 0) throw Error(errc::domain, "difference order must be nonnegative");
    if (series.size() <= static_cast<std::size_t>(d))
        throw Error(errc::insufficient_data, "series shorter than difference order");
    std::vector<double> out(series.begin(), series.end());
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

// ---- augmented Dickey-Fuller ------------------------------------------------

struct AdfResult {
    double statistic = 0.0;
    int used_lags = 0;
    double p_value = 1.0;
    bool stationary = false;  // p_value < alpha
};

namespace adf_detail {

// MacKinnon (1994, 2010) approximate response surface for the constant-only
// regression, as tabulated in statsmodels.tsa.adfvalues.
inline double mackinnon_pvalue(double stat) {
    constexpr double tau_max = 2.74, tau_min = -18.83, tau_star = -1.61;
    if (stat > tau_max) return 1.0;
    if (stat < tau_min) return 0.0;
    double poly = 0.0;
    if (stat <= tau_star) {
        constexpr double c[] = {2.1659, 1.4412, 0.038269};
        poly = c[0] + stat * (c[1] + stat * c[2]);
    } else {
        constexpr double c[] = {1.7339, 0.93202, -0.12745, -0.010368};
        poly = c[0] + stat * (c[1] + stat * (c[2] + stat * c[3]));
    }
    return stdnorm_cdf(poly);
}

// Regression rows for lag p over d-indices [first, last]: response d[i],
// regressors [1, level[i], d[i-1], ..., d[i-p]].
inline void build_design(std::span<const double> s, std::span<const double> d, int p,
                         std::size_t first, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    const std::size_t n = d.size() - first;
    x.resize(static_cast<long>(n), 2 + p);
    y.resize(static_cast<long>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = first + r;
        y[static_cast<long>(r)] = d[i];
        x(static_cast<long>(r), 0) = 1.0;
        x(static_cast<long>(r), 1) = s[i];  // y_{t-1}
        for (int k = 1; k <= p; ++k) x(static_cast<long>(r), 1 + k) = d[i - k];
    }
}

}  // namespace adf_detail

// Unit-root test with a constant term. The lag order is chosen by AIC over a
// common sample up to the Schwert bound floor(12*(T/100)^(1/4)) unless
// max_lag is given; the final regression is refit on the full usable sample.
[[nodiscard]] inline AdfResult adf_test(std::span<const double> series, double alpha = 0.05,
                                        std::optional<int> max_lag = std::nullopt) {
    const std::size_t t_len = series.size();
    if (t_len < 20) throw Error(errc::insufficient_data, "ADF needs at least 20 observations");
    if (variance(series) == 0.0) throw Error(errc::degenerate_series, "zero-variance series");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(errc::domain, "alpha must be in (0, 1)");

    int maxlag = max_lag.value_or(static_cast<int>(
        std::floor(12.0 * std::pow(static_cast<double>(t_len) / 100.0, 0.25))));
    const int feasible = static_cast<int>((t_len - 1) / 2) - 2;
    maxlag = std::clamp(maxlag, 0, std::max(0, feasible));

    const std::vector<double> d = difference(series, 1);

    // AIC over a sample aligned at maxlag so every candidate sees the same rows
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    int best_lag = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    const double n_common = static_cast<double>(d.size() - maxlag);
    for (int p = 0; p <= maxlag; ++p) {
        adf_detail::build_design(series, d, p, static_cast<std::size_t>(maxlag), x, y);
        const OlsFit fit = ols(x, y);
        const double aic =
            n_common * std::log(std::max(fit.ssr, 1e-300) / n_common) + 2.0 * (p + 2);
        if (aic < best_aic) {
            best_aic = aic;
            best_lag = p;
        }
    }

    adf_detail::build_design(series, d, best_lag, static_cast<std::size_t>(best_lag), x, y);
    const OlsFit fit = ols(x, y);
    const double sigma2 = fit.ssr / static_cast<double>(fit.df_resid());
    const double se = std::sqrt(sigma2 * fit.xtx_inverse(1, 1));
    AdfResult out;
    out.statistic = se > 0.0 ? fit.beta[1] / se : 0.0;
    out.used_lags = best_lag;
    out.p_value = adf_detail::mackinnon_pvalue(out.statistic);
    out.stationary = out.p_value < alpha;
    return out;
}

// ---- Granger causality -------------------------------------------------------

struct GcStat {
    double statistic = 0.0;
    double df1 = 0.0;  // numerator / chi2 df
    double df2 = 0.0;  // denominator df, 0 for chi2 statistics
    double p_value = 1.0;
    bool pass = false;  // p_value < alpha
};

struct GcTestResult {
    int lag = 0;
    GcStat ssr_f, ssr_chi2, lr_chi2, params_f;
    bool all_pass = false;
};

// Tests whether past values of `cause` improve the OLS prediction of
// `effect` beyond its own past, with all lags 1..max_lag included jointly.
// Four statistics are reported: the SSR-based F and chi-squared, the
// likelihood ratio, and a Wald F computed independently from the restriction
// matrix on the cause coefficients.
[[nodiscard]] inline GcTestResult granger_tests(std::span<const double> cause,
                                                std::span<const double> effect, int max_lag,
                                                double alpha = 0.05) {
    if (cause.size() != effect.size()) throw Error(errc::shape, "series length mismatch");
    if (max_lag < 1) throw Error(errc::domain, "lag must be >= 1");
    const std::size_t t_len = effect.size();
    if (t_len <= static_cast<std::size_t>(3 * max_lag + 1))
        throw Error(errc::insufficient_data,
                    "need more than 3*lag+1 observations, got " + std::to_string(t_len));
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(errc::domain, "alpha must be in (0, 1)");

    const long lag = max_lag;
    const long te = static_cast<long>(t_len) - lag;

    Eigen::VectorXd y(te);
    Eigen::MatrixXd xr(te, 1 + lag), xu(te, 1 + 2 * lag);
    for (long r = 0; r < te; ++r) {
        const std::size_t t = static_cast<std::size_t>(r + lag);
        y[r] = effect[t];
        xr(r, 0) = 1.0;
        xu(r, 0) = 1.0;
        for (long k = 1; k <= lag; ++k) {
            xr(r, k) = effect[t - static_cast<std::size_t>(k)];
            xu(r, k) = effect[t - static_cast<std::size_t>(k)];
            xu(r, lag + k) = cause[t - static_cast<std::size_t>(k)];
        }
    }

    const OlsFit restricted = ols(xr, y);
    const OlsFit unrestricted = ols(xu, y);
    const double ssr_r = restricted.ssr;
    const double ssr_u = unrestricted.ssr;
    const double improvement = std::max(0.0, ssr_r - ssr_u);
    const double df2 = static_cast<double>(te - 2 * lag - 1);
    const double l = static_cast<double>(lag);
    const double inf = std::numeric_limits<double>::infinity();

    GcTestResult out;
    out.lag = max_lag;

    auto fill = [alpha](GcStat& s, double stat, double df1, double df2_, bool is_f) {
        s.statistic = stat;
        s.df1 = df1;
        s.df2 = df2_;
        s.p_value = is_f ? f_sf(stat, df1, df2_) : chi2_sf(stat, df1);
        s.pass = s.p_value < alpha;
    };

    // perfectly predictable effect: zero residual variance, infinite evidence
    if (ssr_u == 0.0) {
        const double stat = improvement > 0.0 ? inf : 0.0;
        fill(out.ssr_f, stat, l, df2, true);
        fill(out.ssr_chi2, stat, l, 0.0, false);
        fill(out.lr_chi2, stat, l, 0.0, false);
        fill(out.params_f, stat, l, df2, true);
        out.all_pass =
            out.ssr_f.pass && out.ssr_chi2.pass && out.lr_chi2.pass && out.params_f.pass;
        return out;
    }

    fill(out.ssr_f, (improvement / l) / (ssr_u / df2), l, df2, true);
    fill(out.ssr_chi2, static_cast<double>(te) * improvement / ssr_u, l, 0.0, false);
    fill(out.lr_chi2, static_cast<double>(te) * std::max(0.0, std::log(ssr_r / ssr_u)), l, 0.0,
         false);

    // Wald route: restriction matrix selecting the cause coefficients
    const double sigma2 = ssr_u / df2;
    const Eigen::VectorXd b = unrestricted.beta.segment(1 + lag, lag);
    const Eigen::MatrixXd cov =
        sigma2 * unrestricted.xtx_inverse.block(1 + lag, 1 + lag, lag, lag);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success)
        throw Error(errc::singular_design, "singular covariance in the Wald test");
    const double wald = b.dot(ldlt.solve(b)) / l;
    fill(out.params_f, wald, l, df2, true);

    out.all_pass = out.ssr_f.pass && out.ssr_chi2.pass && out.lr_chi2.pass && out.params_f.pass;
    return out;
}

// ---- segment-level reports ----------------------------------------------------

struct GcLagSummary {
    int lag_frames = 0;
    double lag_seconds = 0.0;
    int tested = 0;   // segments that produced a test result at this lag
    int skipped = 0;  // segments excluded by preconditions or numerics
    double pct_lr_chi2 = 0.0;
    double pct_params_f = 0.0;
    double pct_ssr_chi2 = 0.0;
    double pct_ssr_f = 0.0;
    double pct_all = 0.0;
};

struct GcSegmentReport {
    int segment_length = 0;
    double fps = 0.0;
    double alpha = 0.05;
    int segments_total = 0;
    int adf_nonstationary_cause = 0;  // segments still failing ADF after differencing
    int adf_nonstationary_effect = 0;
    int adf_skipped = 0;  // segments too short for the ADF precondition
    std::vector<GcLagSummary> lags;
};

// Split into non-overlapping segments from the start, difference both series
// once, check stationarity, and run the four GC tests per lag. Segments
// failing a precondition are counted and excluded from the percentages.
[[nodiscard]] inline GcSegmentReport segment_and_test(const ContextSeries& context,
                                                      std::span<const double> response,
                                                      int segment_length,
                                                      const std::vector<int>& lags,
                                                      double alpha = 0.05) {
    if (segment_length < 3) throw Error(errc::domain, "segment length too small");
    if (lags.empty()) throw Error(errc::domain, "no lags requested");
    if (!(context.fps > 0.0)) throw Error(errc::domain, "fps must be positive");
    const std::size_t common = std::min(context.values.size(), response.size());
    const std::size_t n_segments = common / static_cast<std::size_t>(segment_length);
    if (n_segments == 0)
        throw Error(errc::empty_report, "series shorter than one full segment");

    GcSegmentReport report;
    report.segment_length = segment_length;
    report.fps = context.fps;
    report.alpha = alpha;
    report.segments_total = static_cast<int>(n_segments);

    struct Tally {
        int tested = 0, skipped = 0, lr = 0, params = 0, ssr_chi2 = 0, ssr_f = 0, all = 0;
    };
    std::vector<Tally> tally(lags.size());
    std::string first_skip_reason;

    for (std::size_t seg = 0; seg < n_segments; ++seg) {
        const std::size_t begin = seg * static_cast<std::size_t>(segment_length);
        const std::span<const double> c(context.values.data() + begin,
                                        static_cast<std::size_t>(segment_length));
        const std::span<const double> r(response.data() + begin,
                                        static_cast<std::size_t>(segment_length));
        std::vector<double> dc, dr;
        try {
            dc = difference(c, 1);
            dr = difference(r, 1);
        } catch (const Error&) {
            for (auto& t : tally) ++t.skipped;
            continue;
        }

        if (dc.size() >= 20) {
            try {
                if (!adf_test(dc, alpha).stationary) {
                    ++report.adf_nonstationary_cause;
                    log::warn("segment " + std::to_string(seg) +
                              ": context still non-stationary after differencing");
                }
            } catch (const Error&) {
                ++report.adf_skipped;
            }
            try {
                if (!adf_test(dr, alpha).stationary) {
                    ++report.adf_nonstationary_effect;
                    log::warn("segment " + std::to_string(seg) +
                              ": response still non-stationary after differencing");
                }
            } catch (const Error&) {
                ++report.adf_skipped;
            }
        } else {
            ++report.adf_skipped;
        }

        for (std::size_t li = 0; li < lags.size(); ++li) {
            try {
                const GcTestResult res = granger_tests(dc, dr, lags[li], alpha);
                ++tally[li].tested;
                tally[li].lr += res.lr_chi2.pass;
                tally[li].params += res.params_f.pass;
                tally[li].ssr_chi2 += res.ssr_chi2.pass;
                tally[li].ssr_f += res.ssr_f.pass;
                tally[li].all += res.all_pass;
            } catch (const Error& e) {
                ++tally[li].skipped;
                if (first_skip_reason.empty()) first_skip_reason = e.what();
            }
        }
    }

    bool any_tested = false;
    for (std::size_t li = 0; li < lags.size(); ++li) {
        GcLagSummary s;
        s.lag_frames = lags[li];
        s.lag_seconds = static_cast<double>(lags[li]) / context.fps;
        s.tested = tally[li].tested;
        s.skipped = tally[li].skipped;
        if (s.tested > 0) {
            const double denom = static_cast<double>(s.tested);
            s.pct_lr_chi2 = 100.0 * tally[li].lr / denom;
            s.pct_params_f = 100.0 * tally[li].params / denom;
            s.pct_ssr_chi2 = 100.0 * tally[li].ssr_chi2 / denom;
            s.pct_ssr_f = 100.0 * tally[li].ssr_f / denom;
            s.pct_all = 100.0 * tally[li].all / denom;
            any_tested = true;
        }
        report.lags.push_back(s);
    }
    if (!any_tested)
        throw Error(errc::empty_report,
                    "no segment was testable at any lag" +
                        (first_skip_reason.empty() ? "" : " (" + first_skip_reason + ")"));
    return report;
}

// CSV table with one row per lag, mirroring the segment-percentage layout
// (lag in seconds and frames, the four per-test pass percentages, ALL).
[[nodiscard]] inline std::string gc_report_to_csv(const GcSegmentReport& r) {
    std::string out =
        "lag_seconds,lag_frames,pvsp_lr_chi2,pvsp_params_f,pvsp_ssr_chi2,pvsp_ssr_f,all\n";
    auto num = [&](double v, bool lead_comma = true) {
        if (lead_comma) out += ',';
        csv_detail::append_number(out, v);
    };
    for (const GcLagSummary& s : r.lags) {
        num(s.lag_seconds, false);
        out += ',' + std::to_string(s.lag_frames);
        num(s.pct_lr_chi2);
        num(s.pct_params_f);
        num(s.pct_ssr_chi2);
        num(s.pct_ssr_f);
        num(s.pct_all);
        out += '\n';
    }
    return out;
}

[[nodiscard]] inline nlohmann::ordered_json gc_stat_to_json(const GcStat& s) {
    nlohmann::ordered_json j;
    j["statistic"] = s.statistic;
    j["df1"] = s.df1;
    if (s.df2 > 0.0) j["df2"] = s.df2;
    j["p_value"] = s.p_value;
    j["pass"] = s.pass;
    return j;
}

[[nodiscard]] inline nlohmann::ordered_json gc_report_to_json(const GcSegmentReport& r) {
    nlohmann::ordered_json j;
    j["segment_length"] = r.segment_length;
    j["fps"] = r.fps;
    j["alpha"] = r.alpha;
    j["segments_total"] = r.segments_total;
    j["adf_nonstationary_cause"] = r.adf_nonstationary_cause;
    j["adf_nonstationary_effect"] = r.adf_nonstationary_effect;
    j["adf_skipped"] = r.adf_skipped;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const GcLagSummary& s : r.lags) {
        nlohmann::ordered_json row;
        row["lag_frames"] = s.lag_frames;
        row["lag_seconds"] = s.lag_seconds;
        row["tested"] = s.tested;
        row["skipped"] = s.skipped;
        row["pvsp_lr_chi2"] = s.pct_lr_chi2;
        row["pvsp_params_f"] = s.pct_params_f;
        row["pvsp_ssr_chi2"] = s.pct_ssr_chi2;
        row["pvsp_ssr_f"] = s.pct_ssr_f;
        row["all"] = s.pct_all;
        rows.push_back(row);
    }
    j["lags"] = std::move(rows);
    return j;
}

}  // namespace qfe
