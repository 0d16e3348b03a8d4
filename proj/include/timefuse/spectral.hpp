#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "timefuse/error.hpp"
#include "timefuse/stats.hpp"
#include "timefuse/tensor.hpp"

namespace timefuse {

/// One-sided spectrum of a mean-removed series.
struct SpectralProfile {
    std::vector<double> psd;              ///< |DFT|^2 / n, bins 0..n/2
    std::vector<double> amplitudes;       ///< |DFT|, bins 0..n/2
    std::vector<double> bin_frequencies;  ///< cycles per step
};

namespace detail {

/// One-sided DFT moduli of x, bins 0..floor(n/2). Direct evaluation with an exact
/// twiddle table; window lengths here are a few hundred steps at most.
inline std::vector<double> dft_moduli(std::span<const double> x) {
    const std::size_t n = x.size();
    const std::size_t bins = n / 2 + 1;
    std::vector<double> cos_table(n), sin_table(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        cos_table[m] = std::cos(angle);
        sin_table[m] = std::sin(angle);
    }
    std::vector<double> out(bins);
    for (std::size_t f = 0; f < bins; ++f) {
        double re = 0.0, im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            re += x[t] * cos_table[idx];
            im -= x[t] * sin_table[idx];
            idx += f;
            if (idx >= n) idx -= n;
        }
        out[f] = std::hypot(re, im);
    }
    return out;
}

inline std::vector<double> demeaned(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    if (is_constant(x)) {
        std::fill(out.begin(), out.end(), 0.0);
        return out;
    }
    const double m = mean_of(x);
    for (double& v : out) v -= m;
    return out;
}

}  // namespace detail

/// Periodogram of the mean-removed series, no tapering.
[[nodiscard]] inline SpectralProfile periodogram(std::span<const double> x) {
    if (x.size() < 2) fail(ErrorKind::WindowTooShort, "periodogram needs at least 2 values");
    const std::size_t n = x.size();
    const auto centered = detail::demeaned(x);
    SpectralProfile p;
    p.amplitudes = detail::dft_moduli(centered);
    p.psd.resize(p.amplitudes.size());
    p.bin_frequencies.resize(p.amplitudes.size());
    for (std::size_t f = 0; f < p.psd.size(); ++f) {
        p.psd[f] = p.amplitudes[f] * p.amplitudes[f] / static_cast<double>(n);
        p.bin_frequencies[f] = static_cast<double>(f) / static_cast<double>(n);
    }
    return p;
}

/// Frame length used for the short-time spectrum behind spectral_variation.
[[nodiscard]] constexpr std::size_t spectrogram_frame_length(std::size_t n) noexcept {
    return std::max<std::size_t>(8, n / 4);
}

/// Mean Euclidean distance between consecutive short-time amplitude spectra.
/// Frames are rectangular, hop is half a frame; fewer than two frames gives 0.
[[nodiscard]] inline double spectral_flux(std::span<const double> x) {
    const std::size_t frame = spectrogram_frame_length(x.size());
    const std::size_t hop = frame / 2;
    if (x.size() < frame) return 0.0;
    const auto centered = detail::demeaned(x);
    const std::span<const double> s(centered);
    std::vector<std::vector<double>> frames;
    for (std::size_t start = 0; start + frame <= s.size(); start += hop) {
        frames.push_back(detail::dft_moduli(s.subspan(start, frame)));
    }
    if (frames.size() < 2) return 0.0;
    double total = 0.0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        double ss = 0.0;
        for (std::size_t f = 0; f < frames[t].size(); ++f) {
            const double diff = frames[t + 1][f] - frames[t][f];
            ss += diff * diff;
        }
        total += std::sqrt(ss);
    }
    return total / static_cast<double>(frames.size() - 1);
}

struct SpectralFeatures {
    double freq_mean = 0.0;
    double freq_peak = 0.0;
    double spectral_entropy = 0.0;
    double spectral_skewness = 0.0;
    double spectral_kurtosis = 0.0;  // not excess
    double spectral_variation = 0.0;
};

/// Index of the largest bin in 1..size-1, lowest index on ties; 0 when size < 2.
[[nodiscard]] inline std::size_t dominant_bin(std::span<const double> psd) noexcept {
    if (psd.size() < 2) return 0;
    std::size_t peak = 1;
    for (std::size_t f = 2; f < psd.size(); ++f) {
        if (psd[f] > psd[peak]) peak = f;
    }
    return peak;
}

// Amplitude spectra whose spread is below this fraction of their mean are treated
// as flat; their third and fourth moments would be pure rounding noise.
inline constexpr double kFlatSpectrumTolerance = 1e-10;

/// Spectral descriptors. The DC bin enters freq_mean only; peak, entropy and the
/// amplitude moments run over bins 1..n/2.
[[nodiscard]] inline SpectralFeatures spectral_features(std::span<const double> x) {
    if (x.size() < TimeSeriesWindow::kMinLength) {
        fail(ErrorKind::WindowTooShort, "spectral features need at least 8 values");
    }
    SpectralFeatures out;
    const auto profile = periodogram(x);
    const auto& psd = profile.psd;
    const std::size_t bins = psd.size();

    double psd_sum_all = 0.0;
    for (double v : psd) psd_sum_all += v;
    out.freq_mean = psd_sum_all / static_cast<double>(bins);
    out.spectral_variation = spectral_flux(x);

    double energy = 0.0;
    for (std::size_t f = 1; f < bins; ++f) energy += psd[f];
    if (energy <= 0.0) return out;
    out.freq_peak = profile.bin_frequencies[dominant_bin(psd)];

    double entropy = 0.0;
    for (std::size_t f = 1; f < bins; ++f) {
        const double p = psd[f] / energy;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    out.spectral_entropy = std::max(0.0, entropy);

    const auto amps = std::span<const double>(profile.amplitudes).subspan(1);
    const double a_mean = mean_of(amps);
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (double a : amps) {
        const double c = a - a_mean;
        s2 += c * c;
        s3 += c * c * c;
        s4 += c * c * c * c;
    }
    const double spread = std::sqrt(s2 / static_cast<double>(amps.size()));
    if (spread <= kFlatSpectrumTolerance * a_mean) return out;
    out.spectral_skewness = s3 / (s2 * std::sqrt(s2));
    out.spectral_kurtosis = s4 / (s2 * s2);
    return out;
}

}  // namespace timefuse
