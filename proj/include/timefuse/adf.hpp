#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "timefuse/error.hpp"
#include "timefuse/stats.hpp"
#include "timefuse/tensor.hpp"

namespace timefuse {

/// Augmented Dickey-Fuller regression with a constant and no trend:
///   dx[t] = a + g * x[t-1] + sum_{i=1..p} b_i * dx[t-i] + e[t]
struct AdfResult {
    double statistic = 0.0;  ///< t-ratio of g
    double p_value = 1.0;
    std::size_t lags = 0;    ///< lag order actually used
    std::size_t nobs = 0;
};

inline constexpr double kStationarityLevel = 0.05;

/// Largest lag order considered: Schwert rule floor(12 * (n/100)^(1/4)), capped at
/// n/2 - 2 so every candidate regression keeps more observations than parameters.
[[nodiscard]] inline std::size_t schwert_lag(std::size_t n) noexcept {
    const auto rule = static_cast<std::size_t>(
        std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
    const std::size_t cap = n / 2 >= 2 ? n / 2 - 2 : 0;
    return std::min(rule, cap);
}

/// MacKinnon (1994) response-surface p-value, constant-only case, one I(1) series.
[[nodiscard]] inline double mackinnon_pvalue(double statistic) noexcept {
    constexpr double kTauMax = 2.74;
    constexpr double kTauMin = -18.83;
    constexpr double kTauStar = -1.61;
    constexpr std::array<double, 3> kSmallP{2.1659, 1.4412, 0.038269};
    constexpr std::array<double, 4> kLargeP{1.7339, 0.93202, -0.12745, -0.010368};
    if (std::isnan(statistic)) return 1.0;
    if (statistic > kTauMax) return 1.0;
    if (statistic < kTauMin) return 0.0;
    double z = 0.0;
    if (statistic <= kTauStar) {
        for (auto it = kSmallP.rbegin(); it != kSmallP.rend(); ++it) z = z * statistic + *it;
    } else {
        for (auto it = kLargeP.rbegin(); it != kLargeP.rend(); ++it) z = z * statistic + *it;
    }
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

namespace detail {

// Relative pivot threshold below which the ADF design counts as rank deficient.
inline constexpr double kAdfRankTolerance = 1e-9;

struct AdfDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

/// Regression rows use differences dz[first_row..]; columns are the lagged level,
/// `lags` lagged differences and the constant.
inline AdfDesign adf_design(std::span<const double> z, std::size_t lags, std::size_t first_row) {
    const std::size_t n = z.size();
    std::vector<double> dz(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) dz[t] = z[t + 1] - z[t];
    const std::size_t nobs = dz.size() - first_row;
    AdfDesign design{Eigen::MatrixXd(nobs, lags + 2), Eigen::VectorXd(nobs)};
    for (std::size_t i = 0; i < nobs; ++i) {
        const std::size_t row = first_row + i;
        design.y(i) = dz[row];
        design.x(i, 0) = z[row];
        for (std::size_t l = 1; l <= lags; ++l) design.x(i, l) = dz[row - l];
        design.x(i, lags + 1) = 1.0;
    }
    return design;
}

inline bool full_rank(const Eigen::MatrixXd& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted(x);
    pivoted.setThreshold(kAdfRankTolerance);
    return pivoted.rank() == x.cols();
}

inline double residual_sum_of_squares(const AdfDesign& d) {
    const Eigen::VectorXd beta = d.x.householderQr().solve(d.y);
    return (d.y - d.x * beta).squaredNorm();
}

/// Lag order in 0..max_lag minimizing AIC, every candidate fit on the same rows.
/// Returns max_lag + 1 when no candidate design has full rank.
inline std::size_t select_lag_by_aic(std::span<const double> z, std::size_t max_lag) {
    std::size_t best = max_lag + 1;
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t lags = 0; lags <= max_lag; ++lags) {
        const auto design = adf_design(z, lags, max_lag);
        if (!full_rank(design.x)) continue;
        const auto nobs = static_cast<double>(design.x.rows());
        const double rss = residual_sum_of_squares(design);
        // Gaussian log-likelihood up to terms shared by every candidate.
        const double aic = nobs * std::log(rss / nobs) + 2.0 * static_cast<double>(lags + 2);
        if (best > max_lag || aic < best_aic) {
            best_aic = aic;
            best = lags;
        }
    }
    return best;
}

}  // namespace detail

/// ADF test. The lag order is chosen by AIC between 0 and schwert_lag(n), then the
/// regression is refit on all rows that lag order allows. A constant series is
/// reported as stationary (p = 0); if no candidate design has full rank the unit root
/// cannot be rejected (p = 1).
[[nodiscard]] inline AdfResult adf_test(std::span<const double> x) {
    if (x.size() < TimeSeriesWindow::kMinLength) {
        fail(ErrorKind::WindowTooShort, "ADF needs at least 8 values");
    }
    AdfResult result;
    if (is_constant(x)) {
        result.statistic = -std::numeric_limits<double>::infinity();
        result.p_value = 0.0;
        return result;
    }
    // The t-ratio is invariant under affine rescaling; standardizing keeps the
    // constant column and the level column on comparable scales.
    const double m = mean_of(x);
    const double s = population_std(x);
    std::vector<double> z(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) z[t] = (x[t] - m) / s;

    const std::size_t max_lag = schwert_lag(x.size());
    const std::size_t lags = detail::select_lag_by_aic(z, max_lag);
    if (lags > max_lag) {
        result.statistic = std::numeric_limits<double>::quiet_NaN();
        result.p_value = 1.0;
        return result;
    }
    const auto [design, y] = detail::adf_design(z, lags, lags);
    const auto params = static_cast<Eigen::Index>(design.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::VectorXd beta = qr.solve(y);
    const double rss = (y - design * beta).squaredNorm();
    result.lags = lags;
    result.nobs = static_cast<std::size_t>(design.rows());

    const double gamma = beta(0);
    if (rss <= 1e-24 * std::max(1.0, y.squaredNorm())) {
        result.statistic = gamma < 0.0 ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
    } else {
        const Eigen::MatrixXd r = qr.matrixQR().topRows(params).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd r_inv =
            r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(params, params));
        // (X'X)^-1 = R^-1 R^-T, so its (0,0) entry is the squared norm of row 0 of R^-1.
        const double xtx_inv_00 = r_inv.row(0).squaredNorm();
        const double sigma2 = rss / (static_cast<double>(result.nobs) - static_cast<double>(params));
        result.statistic = gamma / std::sqrt(sigma2 * xtx_inv_00);
    }
    result.p_value = mackinnon_pvalue(result.statistic);
    return result;
}

[[nodiscard]] inline bool is_stationary(std::span<const double> x) {
    return adf_test(x).p_value < kStationarityLevel;
}

/// Fraction of the window's variables whose ADF p-value falls below 0.05.
[[nodiscard]] inline double adf_stationarity_ratio(const TimeSeriesWindow& window) {
    std::size_t stationary = 0;
    for (std::size_t j = 0; j < window.variables(); ++j) {
        if (is_stationary(window.variable(j))) ++stationary;
    }
    return static_cast<double>(stationary) / static_cast<double>(window.variables());
}

}  // namespace timefuse
