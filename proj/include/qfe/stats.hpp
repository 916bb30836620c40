#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "qfe/error.hpp"
#include "qfe/matrix.hpp"

namespace qfe {

[[nodiscard]] inline double mean(std::span<const double> v) {
    if (v.empty()) throw Error(errc::empty_input, "mean of empty series");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance (1/n).
[[nodiscard]] inline double variance(std::span<const double> v) {
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size());
}

[[nodiscard]] inline double stdev(std::span<const double> v) { return std::sqrt(variance(v)); }

// Sample variance (1/(n-1)); n >= 2.
[[nodiscard]] inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw Error(errc::insufficient_data, "sample variance needs n >= 2");
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

[[nodiscard]] inline double covariance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(errc::shape, "covariance length mismatch");
    const double mx = mean(x), my = mean(y);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
    return acc / static_cast<double>(x.size());
}

[[nodiscard]] inline bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

[[nodiscard]] inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(errc::shape, "pearson length mismatch");
    if (x.size() < 2) throw Error(errc::insufficient_data, "pearson needs n >= 2");
    const double vx = variance(x), vy = variance(y);
    if (vx == 0.0 || vy == 0.0)
        throw Error(errc::undefined_correlation, "pearson on constant series");
    return covariance(x, y) / std::sqrt(vx * vy);
}

// Average-tied (fractional) ranks, 1-based.
[[nodiscard]] inline std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Linear-interpolated quantile (the numpy default), q in [0, 1].
[[nodiscard]] inline double quantile(std::span<const double> v, double q) {
    if (v.empty()) throw Error(errc::empty_input, "quantile of empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

// ---- distribution upper tails --------------------------------------------

[[nodiscard]] inline double stdnorm_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730951);
}

[[nodiscard]] inline double chi2_sf(double x, double df) {
    if (!(df > 0.0)) throw Error(errc::domain, "chi2_sf needs df > 0");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    boost::math::chi_squared dist(df);
    return boost::math::cdf(boost::math::complement(dist, x));
}

[[nodiscard]] inline double f_sf(double x, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw Error(errc::domain, "f_sf needs positive df");
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    boost::math::fisher_f dist(df1, df2);
    return boost::math::cdf(boost::math::complement(dist, x));
}

// Two-sided p-value for a Student-t statistic.
[[nodiscard]] inline double t_pvalue_two_sided(double t, double df) {
    if (!(df > 0.0)) throw Error(errc::domain, "t p-value needs df > 0");
    if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// ---- ordinary least squares ------------------------------------------------

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtx_inverse;  // (X'X)^-1, for Wald-type tests
    double ssr = 0.0;             // residual sum of squares
    long n = 0;
    long k = 0;                   // regressor count
    [[nodiscard]] long df_resid() const { return n - k; }
};

// Least-squares fit via column-pivoted Householder QR. Throws on rank
// deficiency; callers treat that as a collinear design.
[[nodiscard]] inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw Error(errc::shape, "ols row mismatch");
    if (x.rows() <= x.cols())
        throw Error(errc::insufficient_data, "ols needs more rows than regressors");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw Error(errc::singular_design, "collinear regressors");

    OlsFit fit;
    fit.beta = qr.solve(y);
    const Eigen::VectorXd resid = y - x * fit.beta;
    fit.ssr = resid.squaredNorm();
    fit.n = x.rows();
    fit.k = x.cols();

    // (X'X)^-1 = P R^-1 R^-T P' from the pivoted factorization.
    const Eigen::MatrixXd r =
        qr.matrixR().topLeftCorner(x.cols(), x.cols()).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd rinv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    const Eigen::MatrixXd unpermuted = rinv * rinv.transpose();
    const auto& perm = qr.colsPermutation();
    fit.xtx_inverse = perm * unpermuted * perm.transpose();
    return fit;
}

// Pearson correlation matrix of the columns of m (population moments).
[[nodiscard]] inline Matrix correlation_matrix(const Matrix& m) {
    const std::size_t n = m.rows(), p = m.cols();
    if (n < 2) throw Error(errc::insufficient_data, "correlation needs n >= 2 rows");
    std::vector<double> means(p, 0.0), sds(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        const auto col = m.column(j);
        means[j] = mean(col);
        sds[j] = stdev(col);
        if (sds[j] == 0.0)
            throw Error(errc::undefined_correlation, "constant column in correlation matrix");
    }
    Matrix corr(p, p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        corr(a, a) = 1.0;
        for (std::size_t b = a + 1; b < p; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                acc += (m(i, a) - means[a]) * (m(i, b) - means[b]);
            const double r = acc / (static_cast<double>(n) * sds[a] * sds[b]);
            corr(a, b) = r;
            corr(b, a) = r;
        }
    }
    return corr;
}

}  // namespace qfe
