#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately naive and separate from the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Minimal warping-path cost by exhaustive recursion over all monotone paths
// from (0,0) to (n-1,m-1). Exponential; only for short series.
inline double dtw_path_cost(const std::vector<double>& x, const std::vector<double>& y,
                            std::size_t i, std::size_t j) {
    const double c = std::abs(x[i] - y[j]);
    if (i + 1 == x.size() && j + 1 == y.size()) return c;
    double best = std::numeric_limits<double>::infinity();
    if (i + 1 < x.size()) best = std::min(best, dtw_path_cost(x, y, i + 1, j));
    if (j + 1 < y.size()) best = std::min(best, dtw_path_cost(x, y, i, j + 1));
    if (i + 1 < x.size() && j + 1 < y.size())
        best = std::min(best, dtw_path_cost(x, y, i + 1, j + 1));
    return c + best;
}

inline double dtw_reference(const std::vector<double>& x, const std::vector<double>& y) {
    return dtw_path_cost(x, y, 0, 0);
}

inline double marpe_reference(const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        acc += std::abs(x[i] - y[i]) / std::abs(x[i]);
        ++used;
    }
    return acc / static_cast<double>(used) * 100.0;
}

// Fractional ranks via sorted scan over tie groups.
inline std::vector<double> ranks_reference(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        i = j + 1;
    }
    return r;
}

inline double pearson_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    const double num = n * sxy - sx * sy;
    const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
    return num / den;
}

inline double spearman_rho_reference(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson_reference(ranks_reference(x), ranks_reference(y));
}

inline double ccc_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cov = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
        cov += (x[i] - mx) * (y[i] - my);
    }
    vx /= n;
    vy /= n;
    cov /= n;
    return 2.0 * cov / (vx + vy + (mx - my) * (mx - my));
}

}  // namespace oracle
