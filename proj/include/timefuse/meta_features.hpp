#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "timefuse/adf.hpp"
#include "timefuse/error.hpp"
#include "timefuse/spectral.hpp"
#include "timefuse/stats.hpp"
#include "timefuse/tensor.hpp"

namespace timefuse {

inline constexpr std::size_t kNumMetaFeatures = 24;

/// Canonical feature order. Persisted files and fusor parameters index into this.
inline constexpr std::array<std::string_view, kNumMetaFeatures> kMetaFeatureNames{
    "mean",           "std",
    "min",            "max",
    "skewness",       "kurtosis",
    "autocorr_mean",  "stationarity",
    "roc_mean",       "roc_std",
    "autoreg_coef",   "residual_std",
    "freq_mean",      "freq_peak",
    "spectral_entropy", "spectral_skewness",
    "spectral_kurtosis", "spectral_variation",
    "cov_mean",       "cov_max",
    "cov_min",        "cov_std",
    "crosscorr_mean", "crosscorr_std",
};

enum class MetaFeature : std::size_t {
    Mean, Std, Min, Max, Skewness, Kurtosis,
    AutocorrMean, Stationarity, RocMean, RocStd, AutoregCoef, ResidualStd,
    FreqMean, FreqPeak, SpectralEntropy, SpectralSkewness, SpectralKurtosis, SpectralVariation,
    CovMean, CovMax, CovMin, CovStd, CrosscorrMean, CrosscorrStd,
};

/// The 24-dimensional descriptor of one input window.
struct MetaFeatureVector {
    std::array<double, kNumMetaFeatures> values{};

    [[nodiscard]] double operator[](MetaFeature f) const { return values[static_cast<std::size_t>(f)]; }
    [[nodiscard]] double& operator[](MetaFeature f) { return values[static_cast<std::size_t>(f)]; }
    [[nodiscard]] double operator[](std::size_t i) const { return values[i]; }
    [[nodiscard]] double& operator[](std::size_t i) { return values[i]; }
    [[nodiscard]] std::span<const double> span() const noexcept { return values; }

    bool operator==(const MetaFeatureVector&) const = default;
};

struct MultivariateFeatures {
    double cov_mean = 0.0;
    double cov_max = 0.0;
    double cov_min = 0.0;
    double cov_std = 0.0;
    double crosscorr_mean = 1.0;
    double crosscorr_std = 0.0;
};

/// Statistics of population covariances and Pearson correlations over all pairs i < j.
/// A single variable reports its own variance for the covariance terms and a perfect
/// self-correlation.
[[nodiscard]] inline MultivariateFeatures multivariate_features(const TimeSeriesWindow& window) {
    const std::size_t d = window.variables();
    const std::size_t n = window.length();
    std::vector<std::vector<double>> centered(d);
    std::vector<double> norms(d, 0.0);
    std::vector<bool> constant(d);
    for (std::size_t j = 0; j < d; ++j) {
        centered[j] = window.variable(j);
        constant[j] = is_constant(centered[j]);
        const double m = constant[j] ? centered[j][0] : mean_of(centered[j]);
        for (double& v : centered[j]) v -= m;
        for (double v : centered[j]) norms[j] += v * v;
    }

    MultivariateFeatures out;
    if (d == 1) {
        const double var = norms[0] / static_cast<double>(n);
        out.cov_mean = out.cov_max = out.cov_min = var;
        return out;
    }

    std::vector<double> covs, corrs;
    covs.reserve(d * (d - 1) / 2);
    corrs.reserve(d * (d - 1) / 2);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            double cross = 0.0;
            for (std::size_t t = 0; t < n; ++t) cross += centered[i][t] * centered[j][t];
            covs.push_back(cross / static_cast<double>(n));
            if (constant[i] || constant[j]) {
                corrs.push_back(0.0);
            } else {
                corrs.push_back(std::clamp(cross / std::sqrt(norms[i] * norms[j]), -1.0, 1.0));
            }
        }
    }
    const auto pop_std = [](std::span<const double> v, double m) {
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(v.size()));
    };
    out.cov_mean = mean_of(covs);
    out.cov_max = *std::max_element(covs.begin(), covs.end());
    out.cov_min = *std::min_element(covs.begin(), covs.end());
    out.cov_std = pop_std(covs, out.cov_mean);
    out.crosscorr_mean = mean_of(corrs);
    out.crosscorr_std = pop_std(corrs, out.crosscorr_mean);
    return out;
}

/// Extracts all 24 meta-features. Per-variable features are averaged across variables.
[[nodiscard]] inline MetaFeatureVector extract_meta_features(const TimeSeriesWindow& window) {
    if (window.length() < TimeSeriesWindow::kMinLength) {
        fail(ErrorKind::WindowTooShort, "window shorter than 8 steps");
    }
    const std::size_t d = window.variables();
    MetaFeatureVector out;
    std::size_t stationary = 0;
    for (std::size_t j = 0; j < d; ++j) {
        const auto series = window.variable(j);
        const auto st = statistical_features(series);
        const auto roc = rate_of_change(series);
        const auto ar = ar1_fit(series);
        const auto sp = spectral_features(series);
        const std::array<double, 18> per_var{
            st.mean,         st.std,          st.min,         st.max,
            st.skewness,     st.kurtosis,     autocorrelation(series, 1),
            0.0,  // stationarity is a ratio, filled below
            roc.mean,        roc.std,         ar.coefficient, ar.residual_std,
            sp.freq_mean,    sp.freq_peak,    sp.spectral_entropy,
            sp.spectral_skewness, sp.spectral_kurtosis, sp.spectral_variation,
        };
        for (std::size_t i = 0; i < per_var.size(); ++i) out.values[i] += per_var[i];
        if (is_stationary(series)) ++stationary;
    }
    for (std::size_t i = 0; i < 18; ++i) out.values[i] /= static_cast<double>(d);
    out[MetaFeature::Stationarity] = static_cast<double>(stationary) / static_cast<double>(d);

    const auto mv = multivariate_features(window);
    out[MetaFeature::CovMean] = mv.cov_mean;
    out[MetaFeature::CovMax] = mv.cov_max;
    out[MetaFeature::CovMin] = mv.cov_min;
    out[MetaFeature::CovStd] = mv.cov_std;
    out[MetaFeature::CrosscorrMean] = mv.crosscorr_mean;
    out[MetaFeature::CrosscorrStd] = mv.crosscorr_std;
    return out;
}

}  // namespace timefuse
