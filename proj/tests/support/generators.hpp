#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "timefuse/tensor.hpp"

namespace testgen {

inline std::vector<double> white_noise(std::mt19937_64& rng, std::size_t n, double sd = 1.0) {
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> x(n);
    for (double& v : x) v = dist(rng);
    return x;
}

inline std::vector<double> ar1_series(std::mt19937_64& rng, std::size_t n, double phi, double sd) {
    std::normal_distribution<double> dist(0.0, sd);
    std::vector<double> x(n);
    double prev = 0.0;
    for (double& v : x) {
        prev = phi * prev + dist(rng);
        v = prev;
    }
    return x;
}

/// Random window mixing noise, trend, level shifts and a sinusoid per variable.
inline timefuse::TimeSeriesWindow random_window(std::mt19937_64& rng, std::size_t t_in, std::size_t d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> values(t_in * d);
    for (std::size_t j = 0; j < d; ++j) {
        const double level = 3.0 * u(rng);
        const double slope = 0.05 * u(rng);
        const double amp = 2.0 * std::abs(u(rng));
        const double freq = 0.02 + 0.2 * std::abs(u(rng));
        const double phi = 0.9 * u(rng);
        double ar = 0.0;
        for (std::size_t t = 0; t < t_in; ++t) {
            ar = phi * ar + 0.5 * g(rng);
            values[t * d + j] = level + slope * static_cast<double>(t) +
                                amp * std::sin(2.0 * 3.141592653589793 * freq * static_cast<double>(t)) + ar;
        }
    }
    return timefuse::TimeSeriesWindow(t_in, d, std::move(values));
}

}  // namespace testgen
