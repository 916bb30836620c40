#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qfe/error.hpp"
#include "qfe/matrix.hpp"
#include "qfe/stats.hpp"

namespace qfe {

struct FactorInput {
    Matrix matrix;  // n_frames x p, columns standardized to mean 0, variance 1
    std::vector<std::string> labels;
};

// Standardize columns with population moments. Constant columns cannot be
// standardized and are rejected.
[[nodiscard]] inline FactorInput make_factor_input(const Matrix& raw,
                                                   std::vector<std::string> labels = {}) {
    if (raw.rows() < 2) throw Error(errc::insufficient_data, "need at least 2 rows");
    FactorInput in;
    in.matrix = raw;
    in.labels = std::move(labels);
    if (in.labels.empty())
        for (std::size_t j = 0; j < raw.cols(); ++j) in.labels.push_back("v" + std::to_string(j));
    if (in.labels.size() != raw.cols()) throw Error(errc::shape, "label count mismatch");
    for (std::size_t j = 0; j < raw.cols(); ++j) {
        const auto col = raw.column(j);
        const double m = mean(col);
        const double s = stdev(col);
        if (s == 0.0)
            throw Error(errc::degenerate_series, "constant column '" + in.labels[j] + "'");
        for (std::size_t i = 0; i < raw.rows(); ++i) in.matrix(i, j) = (raw(i, j) - m) / s;
    }
    return in;
}

struct BartlettResult {
    double chi2 = 0.0;
    int df = 0;
    double p_value = 1.0;
    bool degenerate = false;  // |corr| <= 0; chi2 reported as +inf
};

// Bartlett's sphericity test: chi2 = -(n - 1 - (2p+5)/6) * ln|R|.
[[nodiscard]] inline BartlettResult bartlett_sphericity(const Matrix& corr, std::size_t n) {
    const std::size_t p = corr.rows();
    if (p < 2 || corr.cols() != p) throw Error(errc::shape, "correlation matrix must be p x p, p >= 2");
    if (n <= p) throw Error(errc::domain, "sample count must exceed variable count");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> r(
        corr.data(), static_cast<long>(p), static_cast<long>(p));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.info() != Eigen::Success) throw Error(errc::numerical, "eigendecomposition failed");

    BartlettResult out;
    out.df = static_cast<int>(p * (p - 1) / 2);
    double log_det = 0.0;
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev <= 0.0) {
            out.degenerate = true;
            out.chi2 = std::numeric_limits<double>::infinity();
            out.p_value = 0.0;
            return out;
        }
        log_det += std::log(ev);
    }
    const double factor = static_cast<double>(n) - 1.0 - (2.0 * static_cast<double>(p) + 5.0) / 6.0;
    out.chi2 = -factor * log_det;
    if (out.chi2 < 0.0) out.chi2 = 0.0;  // identity correlation, fp noise
    out.p_value = chi2_sf(out.chi2, out.df);
    return out;
}

struct KmoResult {
    double overall = 0.0;
    std::vector<double> per_variable;
    bool zero_correlation = false;  // identity correlation: KMO defined as 0
};

// Kaiser-Meyer-Olkin sampling adequacy from the partial correlations hidden
// in the inverse correlation matrix.
[[nodiscard]] inline KmoResult kmo(const Matrix& corr) {
    const std::size_t p = corr.rows();
    if (p < 2 || corr.cols() != p) throw Error(errc::shape, "correlation matrix must be p x p, p >= 2");

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> r(
        corr.data(), static_cast<long>(p), static_cast<long>(p));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    if (es.info() != Eigen::Success) throw Error(errc::numerical, "eigendecomposition failed");
    const double ev_min = es.eigenvalues().minCoeff();
    const double ev_max = es.eigenvalues().maxCoeff();
    if (ev_min <= 1e-12 * std::max(1.0, ev_max)) {
        const double cond = ev_min > 0.0 ? ev_max / ev_min : std::numeric_limits<double>::infinity();
        throw Error(errc::numerical,
                    "correlation matrix not invertible (condition number " +
                        std::to_string(cond) + ")");
    }
    const Eigen::MatrixXd inv = es.eigenvectors() *
                                es.eigenvalues().cwiseInverse().asDiagonal() *
                                es.eigenvectors().transpose();

    KmoResult out;
    out.per_variable.assign(p, 0.0);
    std::vector<double> r2_row(p, 0.0), q2_row(p, 0.0);
    double r2_sum = 0.0, q2_sum = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            if (i == j) continue;
            const double rij = corr(i, j);
            const double qij = -inv(static_cast<long>(i), static_cast<long>(j)) /
                               std::sqrt(inv(static_cast<long>(i), static_cast<long>(i)) *
                                         inv(static_cast<long>(j), static_cast<long>(j)));
            r2_row[i] += rij * rij;
            q2_row[i] += qij * qij;
            r2_sum += rij * rij;
            q2_sum += qij * qij;
        }
    }
    if (r2_sum + q2_sum == 0.0) {
        out.zero_correlation = true;
        return out;  // no shared variance at all
    }
    out.overall = r2_sum / (r2_sum + q2_sum);
    for (std::size_t i = 0; i < p; ++i) {
        const double den = r2_row[i] + q2_row[i];
        out.per_variable[i] = den == 0.0 ? 0.0 : r2_row[i] / den;
    }
    return out;
}

struct FactorModel {
    std::vector<double> loadings;
    std::vector<double> uniquenesses;  // 1 - communality, in (0, 1]
    bool converged = false;
    int iterations = 0;
};

namespace detail {

constexpr double kCommunalityCap = 1.0 - 1e-9;

// Initial communalities: squared multiple correlations when the matrix
// inverts, otherwise the largest absolute off-diagonal correlation.
inline Eigen::VectorXd initial_communalities(const Eigen::MatrixXd& r) {
    const long p = r.rows();
    Eigen::VectorXd h2(p);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(r);
    if (lu.isInvertible()) {
        const Eigen::MatrixXd inv = lu.inverse();
        for (long j = 0; j < p; ++j)
            h2[j] = std::clamp(1.0 - 1.0 / inv(j, j), 0.0, kCommunalityCap);
    } else {
        for (long j = 0; j < p; ++j) {
            double best = 0.0;
            for (long i = 0; i < p; ++i)
                if (i != j) best = std::max(best, std::abs(r(i, j)));
            h2[j] = std::min(best, kCommunalityCap);
        }
    }
    return h2;
}

}  // namespace detail

// Single-factor principal-axis estimate: iterate communalities through the
// leading eigenpair of the reduced correlation matrix. Deterministic for a
// given input and tolerance.
[[nodiscard]] inline FactorModel fit_one_factor(const FactorInput& input, int max_iter = 100,
                                                double tol = 1e-6) {
    const std::size_t p = input.matrix.cols();
    if (p < 2) throw Error(errc::degenerate_structure, "need at least 2 variables");
    if (input.matrix.rows() <= p)
        throw Error(errc::insufficient_data, "need more observations than variables");
    if (max_iter < 1) throw Error(errc::domain, "max_iter must be >= 1");

    const Matrix corr = correlation_matrix(input.matrix);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> r(
        corr.data(), static_cast<long>(p), static_cast<long>(p));
    Eigen::MatrixXd reduced = r;
    Eigen::VectorXd h2 = detail::initial_communalities(reduced);

    FactorModel model;
    Eigen::VectorXd loadings = Eigen::VectorXd::Zero(static_cast<long>(p));
    for (int it = 1; it <= max_iter; ++it) {
        for (long j = 0; j < reduced.rows(); ++j) reduced(j, j) = h2[j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
        if (es.info() != Eigen::Success) throw Error(errc::numerical, "eigendecomposition failed");
        const long last = es.eigenvalues().size() - 1;  // eigenvalues ascend
        const double ev = es.eigenvalues()[last];
        if (ev <= 0.0)
            throw Error(errc::degenerate_structure, "leading eigenvalue is not positive");
        loadings = es.eigenvectors().col(last) * std::sqrt(ev);

        Eigen::VectorXd h2_new(loadings.size());
        for (long j = 0; j < loadings.size(); ++j) {
            double l2 = loadings[j] * loadings[j];
            if (l2 > detail::kCommunalityCap) {  // Heywood guard
                l2 = detail::kCommunalityCap;
                loadings[j] = std::copysign(std::sqrt(l2), loadings[j]);
            }
            h2_new[j] = l2;
        }
        const double change = (h2_new - h2).cwiseAbs().maxCoeff();
        h2 = h2_new;
        model.iterations = it;
        if (change < tol) {
            model.converged = true;
            break;
        }
    }

    if (loadings.sum() < 0.0) loadings = -loadings;
    model.loadings.assign(loadings.data(), loadings.data() + loadings.size());
    model.uniquenesses.resize(p);
    for (std::size_t j = 0; j < p; ++j) model.uniquenesses[j] = 1.0 - h2[static_cast<long>(j)];
    return model;
}

// Thomson regression scores against the model-implied correlation
// (loadings*loadings' + diag(uniqueness)), standardized to unit variance.
[[nodiscard]] inline std::vector<double> factor_scores(const FactorModel& model,
                                                       const FactorInput& input,
                                                       bool allow_unconverged = false) {
    if (!model.converged && !allow_unconverged)
        throw Error(errc::domain, "model did not converge; pass allow_unconverged to override");
    const std::size_t p = input.matrix.cols();
    if (model.loadings.size() != p) throw Error(errc::shape, "loading count mismatch");

    Eigen::VectorXd l(static_cast<long>(p));
    for (std::size_t j = 0; j < p; ++j) l[static_cast<long>(j)] = model.loadings[j];
    Eigen::MatrixXd implied = l * l.transpose();
    for (std::size_t j = 0; j < p; ++j) implied(j, j) += model.uniquenesses[j];

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(implied);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw Error(errc::numerical, "model-implied correlation is singular");
    const Eigen::VectorXd w = ldlt.solve(l);

    const std::size_t n = input.matrix.rows();
    std::vector<double> scores(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) acc += input.matrix(i, j) * w[static_cast<long>(j)];
        scores[i] = acc;
    }
    const double sd = stdev(scores);
    if (sd == 0.0) {
        for (double s : scores)
            if (s != 0.0) throw Error(errc::numerical, "zero-variance factor scores");
        return scores;  // all-zero input maps to all-zero scores
    }
    for (double& s : scores) s /= sd;
    return scores;
}

[[nodiscard]] inline nlohmann::ordered_json factor_report_to_json(const BartlettResult& b,
                                                                  const KmoResult& k,
                                                                  const FactorModel& m) {
    nlohmann::ordered_json j;
    j["bartlett_chi2"] = b.chi2;
    j["bartlett_df"] = b.df;
    j["bartlett_p"] = b.p_value;
    j["bartlett_degenerate"] = b.degenerate;
    j["kmo"] = k.overall;
    j["kmo_per_variable"] = k.per_variable;
    j["kmo_zero_correlation"] = k.zero_correlation;
    j["loadings"] = m.loadings;
    j["uniquenesses"] = m.uniquenesses;
    j["converged"] = m.converged;
    j["iterations"] = m.iterations;
    return j;
}

}  // namespace qfe
