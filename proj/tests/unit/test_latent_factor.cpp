#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qfe/factor.hpp"
#include "qfe/rng.hpp"
#include "qfe/stats.hpp"

using namespace qfe;

namespace {

Matrix identity_corr(std::size_t p) {
    Matrix m(p, p, 0.0);
    for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
    return m;
}

// Standard one-factor model: x_j = l_j * f + sqrt(1 - l_j^2) * e_j with f and
// e standard normal via Box-Muller over SplitMix64.
Matrix one_factor_sample(const std::vector<double>& loadings, std::size_t n, std::uint64_t seed,
                         std::vector<double>* factor_out = nullptr) {
    SplitMix64 rng(seed);
    auto gauss = [&rng] {
        const double u1 = std::max(rng.next_double(), 1e-300);
        const double u2 = rng.next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238 * u2);
    };
    Matrix m(n, loadings.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double f = gauss();
        if (factor_out) factor_out->push_back(f);
        for (std::size_t j = 0; j < loadings.size(); ++j)
            m(i, j) = loadings[j] * f + std::sqrt(1.0 - loadings[j] * loadings[j]) * gauss();
    }
    return m;
}

}  // namespace

TEST_CASE("bartlett on the identity correlation", "[latent_factor]") {
    const BartlettResult r = bartlett_sphericity(identity_corr(4), 50);
    CHECK(r.chi2 == Catch::Approx(0.0).margin(1e-9));
    CHECK(r.df == 6);
    CHECK(r.p_value == Catch::Approx(1.0).margin(1e-9));
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("bartlett hand-computed value", "[latent_factor]") {
    // p=3, all off-diagonals 0.5: |R| = 1 + 2*(1/8) - 3*(1/4) = 0.5
    Matrix corr(3, 3, 0.5);
    for (int i = 0; i < 3; ++i) corr(i, i) = 1.0;
    const BartlettResult r = bartlett_sphericity(corr, 100);
    const double expected = -(99.0 - 11.0 / 6.0) * std::log(0.5);
    CHECK(r.chi2 == Catch::Approx(expected).epsilon(1e-10));
    CHECK(r.chi2 == Catch::Approx(67.34).margin(0.02));
    CHECK(r.df == 3);
    CHECK(r.p_value < 1e-10);
}

TEST_CASE("bartlett preconditions and degeneracy", "[latent_factor]") {
    try {
        (void)bartlett_sphericity(identity_corr(5), 5);  // n == p
        FAIL("expected domain error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::domain);
    }

    Matrix singular(3, 3, 1.0);  // rank 1
    const BartlettResult r = bartlett_sphericity(singular, 100);
    CHECK(r.degenerate);
    CHECK(std::isinf(r.chi2));
    CHECK(r.p_value == 0.0);
}

TEST_CASE("bartlett is invariant under variable permutation", "[latent_factor]") {
    SplitMix64 rng(3141);
    const std::vector<double> l = {0.8, 0.6, 0.7, 0.5};
    const Matrix data = one_factor_sample(l, 400, 99);
    const FactorInput in = make_factor_input(data);
    const Matrix corr = correlation_matrix(in.matrix);

    Matrix permuted(4, 4, 0.0);
    const std::size_t perm[] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) permuted(i, j) = corr(perm[i], perm[j]);

    const double a = bartlett_sphericity(corr, 400).chi2;
    const double b = bartlett_sphericity(permuted, 400).chi2;
    CHECK(a == Catch::Approx(b).epsilon(1e-9));
}

TEST_CASE("kmo with two variables is exactly one half", "[latent_factor]") {
    for (double r : {0.3, -0.6, 0.9}) {
        Matrix corr(2, 2, r);
        corr(0, 0) = corr(1, 1) = 1.0;
        const KmoResult k = kmo(corr);
        CHECK(k.overall == Catch::Approx(0.5).margin(1e-12));
        CHECK(k.per_variable[0] == Catch::Approx(0.5).margin(1e-12));
    }
}

TEST_CASE("kmo on the identity correlation is zero by convention", "[latent_factor]") {
    const KmoResult k = kmo(identity_corr(4));
    CHECK(k.zero_correlation);
    CHECK(k.overall == 0.0);
}

TEST_CASE("kmo on one-factor data exceeds 0.6", "[latent_factor]") {
    const std::vector<double> l(6, 0.8);
    const Matrix data = one_factor_sample(l, 10000, 77);
    const FactorInput in = make_factor_input(data);
    const KmoResult k = kmo(correlation_matrix(in.matrix));
    CHECK(k.overall > 0.6);
    for (double v : k.per_variable) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("kmo rejects singular matrices with a condition report", "[latent_factor]") {
    Matrix corr(3, 3, 1.0);
    try {
        (void)kmo(corr);
        FAIL("expected numerical error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::numerical);
        CHECK(std::string(e.what()).find("condition") != std::string::npos);
    }
}

TEST_CASE("principal-axis fit recovers one-factor loadings", "[latent_factor]") {
    const std::vector<double> l = {0.9, 0.8, 0.7};
    const Matrix data = one_factor_sample(l, 10000, 4242);
    const FactorInput in = make_factor_input(data);
    const FactorModel model = fit_one_factor(in);
    REQUIRE(model.converged);
    REQUIRE(model.loadings.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(model.loadings[j] - l[j]) < 0.05);
        CHECK(model.uniquenesses[j] > 0.0);
        CHECK(model.uniquenesses[j] <= 1.0);
        CHECK(model.loadings[j] * model.loadings[j] + model.uniquenesses[j] <= 1.0 + 1e-6);
    }

    // reconstructed correlation close to the sample correlation off-diagonal
    const Matrix corr = correlation_matrix(in.matrix);
    double rmse = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            const double rec = model.loadings[i] * model.loadings[j];
            rmse += (rec - corr(i, j)) * (rec - corr(i, j));
            ++count;
        }
    CHECK(std::sqrt(rmse / count) < 0.05);
}

TEST_CASE("independent columns yield near-zero loadings", "[latent_factor]") {
    // Plain principal-axis iteration chases sampling noise up to the scale of
    // the leading noise eigenvalue, so the bound is a fixed-seed expectation,
    // not a universal one.
    const std::vector<double> l(3, 0.0);
    const Matrix data = one_factor_sample(l, 10000, 42);  // all noise
    const FactorInput in = make_factor_input(data);
    const FactorModel model = fit_one_factor(in);
    for (double v : model.loadings) CHECK(std::abs(v) < 0.15);
}

TEST_CASE("fit is deterministic and sign-normalized", "[latent_factor]") {
    const Matrix data = one_factor_sample({0.8, 0.7, 0.6}, 2000, 5);
    const FactorInput in = make_factor_input(data);
    const FactorModel a = fit_one_factor(in);
    const FactorModel b = fit_one_factor(in);
    CHECK(a.loadings == b.loadings);
    CHECK(a.iterations == b.iterations);
    double sum = 0.0;
    for (double v : a.loadings) sum += v;
    CHECK(sum >= 0.0);
}

TEST_CASE("single-variable input is rejected", "[latent_factor]") {
    Matrix data(50, 1);
    SplitMix64 rng(8);
    for (std::size_t i = 0; i < 50; ++i) data(i, 0) = rng.next_double();
    const FactorInput in = make_factor_input(data);
    try {
        (void)fit_one_factor(in);
        FAIL("expected degenerate-structure error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::degenerate_structure);
    }
}

TEST_CASE("factor scores track the latent variable on noiseless data", "[latent_factor]") {
    // fit on model data, then score an exactly rank-1 matrix
    const std::vector<double> l = {0.9, 0.8, 0.7};
    const FactorModel model = fit_one_factor(make_factor_input(one_factor_sample(l, 10000, 21)));
    REQUIRE(model.converged);

    std::vector<double> f;
    SplitMix64 rng(22);
    Matrix noiseless(5000, 3);
    for (std::size_t i = 0; i < 5000; ++i) {
        const double u1 = std::max(rng.next_double(), 1e-300);
        const double u2 = rng.next_double();
        const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238 * u2);
        f.push_back(g);
        for (std::size_t j = 0; j < 3; ++j) noiseless(i, j) = l[j] * g;
    }
    const FactorInput in = make_factor_input(noiseless);
    const std::vector<double> scores = factor_scores(model, in);
    REQUIRE(scores.size() == 5000);
    CHECK(pearson(scores, f) > 0.999);
    CHECK(variance(scores) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("factor scores map zero rows to zero", "[latent_factor]") {
    const FactorModel model = fit_one_factor(make_factor_input(one_factor_sample({0.8, 0.7, 0.6}, 3000, 31)));
    FactorInput in;
    in.matrix = Matrix(10, 3, 0.5);
    in.matrix(4, 0) = in.matrix(4, 1) = in.matrix(4, 2) = 0.0;
    in.labels = {"a", "b", "c"};
    // center columns by hand so the zero row stays zero
    for (std::size_t j = 0; j < 3; ++j) {
        // column is {0.5 x9, 0.0}; standardize manually
        const auto col = in.matrix.column(j);
        const double m = mean(col), s = stdev(col);
        for (std::size_t i = 0; i < 10; ++i) in.matrix(i, j) = (in.matrix(i, j) - m) / s;
    }
    // re-inject an exact all-zero row
    in.matrix(4, 0) = in.matrix(4, 1) = in.matrix(4, 2) = 0.0;
    const std::vector<double> scores = factor_scores(model, in);
    CHECK(scores[4] == 0.0);
}

TEST_CASE("unconverged models require an explicit override", "[latent_factor]") {
    const Matrix data = one_factor_sample({0.9, 0.8, 0.7}, 5000, 11);
    const FactorInput in = make_factor_input(data);
    const FactorModel model = fit_one_factor(in, 1, 1e-15);  // cannot converge in one step
    REQUIRE_FALSE(model.converged);
    CHECK_THROWS_AS((void)factor_scores(model, in), Error);
    CHECK_NOTHROW((void)factor_scores(model, in, true));
}

TEST_CASE("factor report serializes the full pipeline", "[latent_factor]") {
    const Matrix data = one_factor_sample({0.9, 0.8, 0.7, 0.6}, 3000, 64);
    const FactorInput in = make_factor_input(data);
    const Matrix corr = correlation_matrix(in.matrix);
    const auto j = factor_report_to_json(bartlett_sphericity(corr, in.matrix.rows()), kmo(corr),
                                         fit_one_factor(in));
    CHECK(j.contains("bartlett_chi2"));
    CHECK(j["bartlett_df"] == 6);
    CHECK(j["kmo"].get<double>() > 0.5);
    CHECK(j["loadings"].size() == 4);
    CHECK(j["converged"] == true);
}
