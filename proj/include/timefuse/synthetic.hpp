#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "timefuse/baselines.hpp"
#include "timefuse/meta_dataset.hpp"
#include "timefuse/parallel.hpp"
#include "timefuse/random.hpp"

namespace timefuse {

/// Generators for desk-scale experiments: each window follows one regime whose best
/// classical forecaster is known in expectation.
enum class Regime { Seasonal, Autoregressive, RandomWalk };

[[nodiscard]] constexpr std::string_view to_string(Regime r) noexcept {
    switch (r) {
        case Regime::Seasonal: return "seasonal";
        case Regime::Autoregressive: return "autoregressive";
        case Regime::RandomWalk: return "random_walk";
    }
    return "seasonal";
}

struct RegimeShare {
    Regime regime;
    double weight;
};

struct SyntheticTaskSpec {
    std::string task_id;
    std::vector<RegimeShare> mix;
    std::size_t t_in = 96;
    std::size_t t_out = 24;
    std::size_t d = 1;
    double level = 0.0;
    double scale = 1.0;
    std::size_t period = 12;
};

struct SyntheticSample {
    Regime regime;
    std::vector<double> window;  // t_in x d
    std::vector<double> truth;   // t_out x d
};

/// seasonal_naive(12), ar_p(1), naive_last: one forecaster matched to each regime.
[[nodiscard]] inline std::vector<ZooMethod> default_zoo(std::size_t period = 12) {
    return {{ZooKind::SeasonalNaive, period}, {ZooKind::ArP, 1}, {ZooKind::NaiveLast, 0}};
}

[[nodiscard]] inline std::vector<std::string> zoo_roster(const std::vector<ZooMethod>& zoo) {
    std::vector<std::string> names;
    for (const auto& m : zoo) names.push_back(m.name());
    return names;
}

namespace detail {

inline std::vector<double> regime_path(Regime regime, std::size_t n, const SyntheticTaskSpec& spec, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    switch (regime) {
        case Regime::Seasonal: {
            const double amp = 0.8 + 0.7 * u(rng);
            const double phase = 2.0 * std::numbers::pi * u(rng);
            const double w = 2.0 * std::numbers::pi / static_cast<double>(spec.period);
            for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::sin(w * static_cast<double>(t) + phase) + 0.15 * g(rng);
            break;
        }
        case Regime::Autoregressive: {
            constexpr double phi = 0.5, sd = 0.5;
            const double mu = g(rng);
            double v = mu + sd / std::sqrt(1.0 - phi * phi) * g(rng);
            for (std::size_t t = 0; t < n; ++t) {
                x[t] = v;
                v = mu + phi * (v - mu) + sd * g(rng);
            }
            break;
        }
        case Regime::RandomWalk: {
            double v = g(rng);
            for (std::size_t t = 0; t < n; ++t) {
                x[t] = v;
                v += 0.5 * g(rng);
            }
            break;
        }
    }
    return x;
}

}  // namespace detail

[[nodiscard]] inline std::vector<SyntheticSample> generate_synthetic_task(const SyntheticTaskSpec& spec, std::size_t n,
                                                                          std::uint64_t seed) {
    if (spec.mix.empty()) fail(ErrorKind::InvalidParameter, "synthetic task needs at least one regime");
    double total = 0.0;
    for (const auto& m : spec.mix) total += m.weight;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, total);
    std::vector<SyntheticSample> out;
    out.reserve(n);
    const std::size_t len = spec.t_in + spec.t_out;
    for (std::size_t i = 0; i < n; ++i) {
        double pick = u(rng);
        Regime regime = spec.mix.back().regime;
        for (const auto& m : spec.mix) {
            if (pick < m.weight) {
                regime = m.regime;
                break;
            }
            pick -= m.weight;
        }
        SyntheticSample s{regime, std::vector<double>(spec.t_in * spec.d), std::vector<double>(spec.t_out * spec.d)};
        for (std::size_t j = 0; j < spec.d; ++j) {
            const auto path = detail::regime_path(regime, len, spec, rng);
            for (std::size_t t = 0; t < len; ++t) {
                const double v = spec.level + spec.scale * path[t];
                if (t < spec.t_in) s.window[t * spec.d + j] = v;
                else s.truth[(t - spec.t_in) * spec.d + j] = v;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Zoo forecasts for one window, stacked k x t_out x d.
[[nodiscard]] inline PredictionTensor zoo_forecasts(const TimeSeriesWindow& window, const std::vector<ZooMethod>& zoo,
                                                    std::size_t t_out) {
    PredictionTensor p;
    p.roster = zoo_roster(zoo);
    p.t_out = t_out;
    p.d = window.variables();
    for (const auto& m : zoo) {
        const auto f = synthetic_zoo_forecast(window, m, t_out);
        p.values.insert(p.values.end(), f.data.begin(), f.data.end());
    }
    p.validate();
    return p;
}

/// Generates n samples, runs the zoo, and packages the triplets.
[[nodiscard]] inline MetaShard build_synthetic_shard(const SyntheticTaskSpec& spec, Split split, std::size_t n,
                                                     std::uint64_t seed, const std::vector<ZooMethod>& zoo = default_zoo(),
                                                     std::size_t threads = 1,
                                                     std::vector<Regime>* regimes = nullptr) {
    const auto samples = generate_synthetic_task(spec, n, seed);
    MetaShard shard{spec.task_id, split, {zoo_roster(zoo), spec.t_out, spec.d}, {}};
    shard.samples.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const TimeSeriesWindow window(spec.t_in, spec.d, samples[i].window);
        shard.samples[i] = collect_meta_sample(window, zoo_forecasts(window, zoo, spec.t_out),
                                               Matrix{spec.t_out, spec.d, samples[i].truth});
    });
    if (regimes) {
        regimes->clear();
        for (const auto& s : samples) regimes->push_back(s.regime);
    }
    return shard;
}

}  // namespace timefuse
