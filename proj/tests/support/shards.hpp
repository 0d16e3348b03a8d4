#pragma once

#include <random>
#include <string>
#include <vector>

#include "timefuse/meta_dataset.hpp"

namespace testgen {

/// Shard of n random samples; sample i carries i in features[0] so tests can trace it.
inline timefuse::MetaShard random_shard(std::string task, std::size_t n, std::uint64_t seed,
                                        std::vector<std::string> roster = {"a", "b", "c"},
                                        std::size_t t_out = 4, std::size_t d = 2) {
    timefuse::MetaShard shard{std::move(task), timefuse::Split::MetaTrain, {std::move(roster), t_out, d}, {}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, 1.0f);
    for (std::size_t i = 0; i < n; ++i) {
        timefuse::MetaSample s;
        for (auto& f : s.features) f = g(rng);
        s.features[0] = static_cast<float>(i);
        s.predictions.resize(shard.schema.k() * t_out * d);
        for (auto& v : s.predictions) v = g(rng);
        s.truth.resize(t_out * d);
        for (auto& v : s.truth) v = g(rng);
        shard.push_back(std::move(s));
    }
    return shard;
}

}  // namespace testgen
