#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>

#include "timefuse/error.hpp"

namespace timefuse {

// Constant series take the degenerate-moment branch everywhere. Testing min == max
// is exact, unlike comparing a rounded standard deviation against zero.
[[nodiscard]] inline bool is_constant(std::span<const double> x) noexcept {
    if (x.empty()) return true;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *lo == *hi;
}

[[nodiscard]] inline double mean_of(std::span<const double> x) noexcept {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population standard deviation (divides by n).
[[nodiscard]] inline double population_std(std::span<const double> x) noexcept {
    if (x.size() < 2 || is_constant(x)) return 0.0;
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

struct StatisticalFeatures {
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // excess
};

[[nodiscard]] inline StatisticalFeatures statistical_features(std::span<const double> x) {
    if (x.size() < 2) fail(ErrorKind::WindowTooShort, "statistical features need at least 2 values");
    StatisticalFeatures f;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    f.min = *lo;
    f.max = *hi;
    f.mean = mean_of(x);
    if (f.min == f.max) {
        f.mean = f.min;
        return f;
    }
    const double n = static_cast<double>(x.size());
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double c = v - f.mean;
        const double c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    f.std = std::sqrt(m2);
    f.skewness = m3 / (f.std * m2);
    f.kurtosis = m4 / (m2 * m2) - 3.0;
    return f;
}

/// Biased sample autocorrelation at the given lag; 0 for a constant series.
[[nodiscard]] inline double autocorrelation(std::span<const double> x, std::size_t lag) {
    if (lag >= x.size()) {
        fail(ErrorKind::LagTooLarge, "lag " + std::to_string(lag) + " is not below series length " +
                                         std::to_string(x.size()));
    }
    if (is_constant(x)) return 0.0;
    const double m = mean_of(x);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double c = x[t] - m;
        den += c * c;
        if (t + lag < x.size()) num += c * (x[t + lag] - m);
    }
    return num / den;
}

inline constexpr double kRocEpsilon = 1e-8;

struct RateOfChange {
    double mean = 0.0;
    double std = 0.0;
};

/// Relative step changes, skipping steps whose base value is within kRocEpsilon of zero.
[[nodiscard]] inline RateOfChange rate_of_change(std::span<const double> x) {
    if (x.size() < 2) fail(ErrorKind::WindowTooShort, "rate of change needs at least 2 values");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) {
        if (std::abs(x[t]) <= kRocEpsilon) continue;
        sum += (x[t + 1] - x[t]) / x[t];
        ++n;
    }
    RateOfChange r;
    if (n == 0) return r;
    r.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) {
        if (std::abs(x[t]) <= kRocEpsilon) continue;
        const double c = (x[t + 1] - x[t]) / x[t] - r.mean;
        ss += c * c;
    }
    r.std = std::sqrt(ss / static_cast<double>(n));
    return r;
}

struct Ar1Fit {
    double coefficient = 0.0;
    double intercept = 0.0;
    double residual_std = 0.0;
};

/// Ordinary least squares of x[t+1] = c + phi * x[t].
[[nodiscard]] inline Ar1Fit ar1_fit(std::span<const double> x) {
    if (x.size() < 3) fail(ErrorKind::WindowTooShort, "AR(1) fit needs at least 3 values");
    const auto lagged = x.first(x.size() - 1);
    const auto next = x.subspan(1);
    const double n = static_cast<double>(lagged.size());
    const double mx = mean_of(lagged);
    const double my = mean_of(next);
    Ar1Fit fit;
    if (!is_constant(lagged)) {
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t t = 0; t < lagged.size(); ++t) {
            sxy += (lagged[t] - mx) * (next[t] - my);
            sxx += (lagged[t] - mx) * (lagged[t] - mx);
        }
        fit.coefficient = sxy / sxx;
    }
    fit.intercept = my - fit.coefficient * mx;
    if (is_constant(x)) {
        fit.intercept = x[0];
        return fit;
    }
    double ss = 0.0;
    for (std::size_t t = 0; t < lagged.size(); ++t) {
        const double e = next[t] - fit.intercept - fit.coefficient * lagged[t];
        ss += e * e;
    }
    // Residuals of an OLS fit with intercept have zero mean.
    fit.residual_std = std::sqrt(ss / n);
    return fit;
}

}  // namespace timefuse
