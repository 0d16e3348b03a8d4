#pragma once

// Straight-from-formula reference implementations of the 24 meta-features. Written
// independently of include/timefuse: complex-exponential DFT, normal-equation OLS
// with Gauss-Jordan inversion, two-pass moments. Slow on purpose.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

using Series = std::vector<double>;

inline bool constant(const Series& x) {
    for (double v : x)
        if (v != x[0]) return false;
    return true;
}

inline double mean(const Series& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double pstd(const Series& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

inline double skewness(const Series& x) {
    if (constant(x)) return 0.0;
    const double m = mean(x), sd = pstd(x);
    double s = 0.0;
    for (double v : x) s += std::pow(v - m, 3);
    return (s / static_cast<double>(x.size())) / std::pow(sd, 3);
}

inline double kurtosis(const Series& x) {
    if (constant(x)) return 0.0;
    const double m = mean(x), sd = pstd(x);
    double s = 0.0;
    for (double v : x) s += std::pow(v - m, 4);
    return (s / static_cast<double>(x.size())) / std::pow(sd, 4) - 3.0;
}

inline double acf1(const Series& x) {
    if (constant(x)) return 0.0;
    const double m = mean(x);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) num += (x[t] - m) * (x[t + 1] - m);
    for (double v : x) den += (v - m) * (v - m);
    return num / den;
}

inline std::array<double, 2> roc(const Series& x) {
    Series r;
    for (std::size_t t = 0; t + 1 < x.size(); ++t)
        if (std::fabs(x[t]) > 1e-8) r.push_back((x[t + 1] - x[t]) / x[t]);
    if (r.empty()) return {0.0, 0.0};
    return {mean(r), pstd(r)};
}

// Solves the normal equations (A'A) b = A'y; also returns (A'A)^-1.
struct Ols {
    std::vector<double> beta;
    std::vector<std::vector<double>> inverse;
    bool singular = false;
};

inline Ols normal_equations(const std::vector<std::vector<double>>& rows, const Series& y) {
    const std::size_t p = rows[0].size();
    std::vector<std::vector<double>> aug(p, std::vector<double>(2 * p + 1, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t r = 0; r < rows.size(); ++r) aug[i][j] += rows[r][i] * rows[r][j];
        aug[i][p + i] = 1.0;
        for (std::size_t r = 0; r < rows.size(); ++r) aug[i][2 * p] += rows[r][i] * y[r];
    }
    Ols out;
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::fabs(aug[r][c]) > std::fabs(aug[piv][c])) piv = r;
        if (std::fabs(aug[piv][c]) < 1e-300) {
            out.singular = true;
            return out;
        }
        std::swap(aug[c], aug[piv]);
        const double d = aug[c][c];
        for (double& v : aug[c]) v /= d;
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = aug[r][c];
            for (std::size_t k = 0; k < 2 * p + 1; ++k) aug[r][k] -= f * aug[c][k];
        }
    }
    out.beta.resize(p);
    out.inverse.assign(p, std::vector<double>(p));
    for (std::size_t i = 0; i < p; ++i) {
        out.beta[i] = aug[i][2 * p];
        for (std::size_t j = 0; j < p; ++j) out.inverse[i][j] = aug[i][p + j];
    }
    return out;
}

inline std::array<double, 2> ar1(const Series& x) {
    if (constant(x)) return {0.0, 0.0};
    Series lag(x.begin(), x.end() - 1), nxt(x.begin() + 1, x.end());
    double phi = 0.0, c = mean(nxt);
    if (!constant(lag)) {
        std::vector<std::vector<double>> rows;
        for (double v : lag) rows.push_back({1.0, v});
        const auto fit = normal_equations(rows, nxt);
        c = fit.beta[0];
        phi = fit.beta[1];
    }
    Series resid;
    for (std::size_t t = 0; t < lag.size(); ++t) resid.push_back(nxt[t] - c - phi * lag[t]);
    return {phi, pstd(resid)};
}

inline std::vector<std::complex<double>> dft(const Series& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    for (std::size_t f = 0; f < out.size(); ++f)
        for (std::size_t t = 0; t < n; ++t)
            out[f] += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(f * t) /
                                                 static_cast<double>(n));
    return out;
}

inline Series centered(const Series& x) {
    Series c(x);
    if (constant(x)) {
        std::fill(c.begin(), c.end(), 0.0);
        return c;
    }
    const double m = mean(x);
    for (double& v : c) v -= m;
    return c;
}

struct Spectral {
    double freq_mean, freq_peak, entropy, skew, kurt, variation;
};

inline Spectral spectral(const Series& x) {
    const std::size_t n = x.size();
    const auto spec = dft(centered(x));
    Series psd, amp;
    for (const auto& c : spec) {
        psd.push_back(std::norm(c) / static_cast<double>(n));
        amp.push_back(std::abs(c));
    }
    Spectral s{};
    s.freq_mean = mean(psd);

    // short-time spectra
    const std::size_t w = std::max<std::size_t>(8, n / 4);
    const auto cx = centered(x);
    std::vector<Series> frames;
    for (std::size_t start = 0; start + w <= n; start += w / 2) {
        Series seg(cx.begin() + static_cast<long>(start), cx.begin() + static_cast<long>(start + w));
        Series a;
        for (const auto& c : dft(seg)) a.push_back(std::abs(c));
        frames.push_back(a);
    }
    if (frames.size() >= 2) {
        double total = 0.0;
        for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
            double ss = 0.0;
            for (std::size_t f = 0; f < frames[t].size(); ++f)
                ss += std::pow(frames[t + 1][f] - frames[t][f], 2);
            total += std::sqrt(ss);
        }
        s.variation = total / static_cast<double>(frames.size() - 1);
    }

    Series p(psd.begin() + 1, psd.end()), a(amp.begin() + 1, amp.end());
    double energy = 0.0;
    for (double v : p) energy += v;
    if (energy <= 0.0) return s;
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    s.freq_peak = static_cast<double>(best + 1) / static_cast<double>(n);
    for (double v : p) {
        const double q = v / energy;
        if (q > 0.0) s.entropy -= q * std::log(q);
    }
    const double am = mean(a);
    if (pstd(a) <= 1e-10 * am) return s;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : a) {
        m2 += std::pow(v - am, 2);
        m3 += std::pow(v - am, 3);
        m4 += std::pow(v - am, 4);
    }
    s.skew = m3 / std::pow(std::sqrt(m2), 3);
    s.kurt = m4 / (m2 * m2);
    return s;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// MacKinnon (1994) constant-only surface, as tabulated by statsmodels.
inline double mackinnon(double tau) {
    if (std::isnan(tau) || tau > 2.74) return 1.0;
    if (tau < -18.83) return 0.0;
    if (tau <= -1.61) return normal_cdf(2.1659 + 1.4412 * tau + 0.038269 * tau * tau);
    return normal_cdf(1.7339 + 0.93202 * tau - 0.12745 * tau * tau - 0.010368 * tau * tau * tau);
}

struct Adf {
    double tau;
    double p;
    std::size_t lags;
};

// Plain ADF on the raw series (no rescaling), constant-only regression. Lag order by
// AIC over 0..min(floor(12 (n/100)^0.25), n/2 - 2) on a common sample, then refit.
struct AdfFit {
    double tau;
    double rss;
    std::size_t rows;
    bool singular;
};

inline AdfFit adf_regression(const Series& x, std::size_t lags, std::size_t first) {
    Series dx;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) dx.push_back(x[t + 1] - x[t]);
    std::vector<std::vector<double>> rows;
    Series y;
    for (std::size_t t = first; t < dx.size(); ++t) {
        std::vector<double> row{x[t]};
        for (std::size_t l = 1; l <= lags; ++l) row.push_back(dx[t - l]);
        row.push_back(1.0);
        rows.push_back(row);
        y.push_back(dx[t]);
    }
    const auto fit = normal_equations(rows, y);
    if (fit.singular) return {0.0, 0.0, rows.size(), true};
    double rss = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double pred = 0.0;
        for (std::size_t c = 0; c < rows[r].size(); ++c) pred += rows[r][c] * fit.beta[c];
        rss += (y[r] - pred) * (y[r] - pred);
    }
    const double dof = static_cast<double>(rows.size() - rows[0].size());
    return {fit.beta[0] / std::sqrt(rss / dof * fit.inverse[0][0]), rss, rows.size(), false};
}

inline Adf adf(const Series& x) {
    if (constant(x)) return {-INFINITY, 0.0, 0};
    const std::size_t n = x.size();
    std::size_t max_lag = static_cast<std::size_t>(std::floor(12.0 * std::pow(n / 100.0, 0.25)));
    max_lag = std::min(max_lag, n / 2 - 2);
    std::size_t best = 0;
    double best_aic = INFINITY;
    for (std::size_t l = 0; l <= max_lag; ++l) {
        const auto f = adf_regression(x, l, max_lag);
        if (f.singular) continue;
        const double aic = f.rows * std::log(f.rss / f.rows) + 2.0 * (l + 2);
        if (aic < best_aic) {
            best_aic = aic;
            best = l;
        }
    }
    const auto f = adf_regression(x, best, best);
    return {f.tau, mackinnon(f.tau), best};
}

inline double cov(const Series& a, const Series& b) {
    const double ma = mean(a), mb = mean(b);
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - ma) * (b[t] - mb);
    return s / static_cast<double>(a.size());
}

// window[t][j]
inline std::array<double, 24> features(const std::vector<Series>& columns) {
    const std::size_t d = columns.size();
    std::array<double, 24> f{};
    for (const auto& x : columns) {
        const auto r = roc(x);
        const auto a = ar1(x);
        const auto s = spectral(x);
        const double sd = constant(x) ? 0.0 : pstd(x);
        const std::array<double, 18> v{mean(x), sd, *std::min_element(x.begin(), x.end()),
                                       *std::max_element(x.begin(), x.end()), skewness(x),
                                       kurtosis(x), acf1(x), adf(x).p < 0.05 ? 1.0 : 0.0,
                                       r[0], r[1], a[0], a[1], s.freq_mean, s.freq_peak,
                                       s.entropy, s.skew, s.kurt, s.variation};
        for (std::size_t i = 0; i < 18; ++i) f[i] += v[i] / static_cast<double>(d);
    }
    if (d == 1) {
        const double var = cov(columns[0], columns[0]);
        f[18] = f[19] = f[20] = var;
        f[21] = 0.0;
        f[22] = 1.0;
        f[23] = 0.0;
        return f;
    }
    Series covs, corrs;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            covs.push_back(cov(columns[i], columns[j]));
            if (constant(columns[i]) || constant(columns[j]))
                corrs.push_back(0.0);
            else
                corrs.push_back(cov(columns[i], columns[j]) /
                                std::sqrt(cov(columns[i], columns[i]) * cov(columns[j], columns[j])));
        }
    f[18] = mean(covs);
    f[19] = *std::max_element(covs.begin(), covs.end());
    f[20] = *std::min_element(covs.begin(), covs.end());
    f[21] = pstd(covs);
    f[22] = mean(corrs);
    f[23] = pstd(corrs);
    return f;
}

}  // namespace oracle
