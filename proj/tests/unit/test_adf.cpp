#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "support/feature_oracle.hpp"
#include "support/generators.hpp"
#include "timefuse/adf.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace timefuse;

namespace {

std::vector<double> closed_form(const std::string& name, std::size_t n) {
    std::vector<double> out(n);
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        if (name == "s1") {
            out[i] = std::sin(1.3 * t) + 0.4 * std::cos(0.21 * t * t);
        } else if (name == "s2") {
            state += std::sin(0.37 * t * t);
            out[i] = state;
        } else if (name == "s3") {
            state = 0.6 * state + std::sin(0.37 * t * t + 1.0);
            out[i] = state;
        } else {
            out[i] = std::sin(0.37 * t * t + 1.0);
        }
    }
    return out;
}

struct Reference {
    const char* series;
    std::size_t n;
    std::size_t lags;
    double statistic;
    double p_value;
};

// statsmodels 0.14 adfuller(x, maxlag=min(floor(12 (n/100)^0.25), n//2 - 2),
// autolag="AIC", regression="c")
const Reference kReferences[] = {
    {"s1", 96, 9, -2.3348544433069613, 0.16097294639031423},
    {"s1", 30, 1, -15.047487059719073, 9.398214196648702e-28},
    {"s1", 200, 14, -2.4508125957179634, 0.12790525741667746},
    {"s2", 96, 0, -0.2270964463938314, 0.9352137752396075},
    {"s2", 30, 6, -3.3882106267485943, 0.01136739643707295},
    {"s2", 200, 0, -1.7051020997359403, 0.4284856574206034},
    {"s3", 96, 0, -5.3109411747923, 5.197024200879767e-06},
    {"s3", 30, 0, -4.023465697942325, 0.0012925014705121361},
    {"s3", 200, 0, -7.514394337508969, 3.93818006622485e-11},
    {"s4", 96, 0, -10.588224895447336, 6.631137354518143e-19},
    {"s4", 30, 0, -6.668695369560265, 4.646731141787055e-09},
    {"s4", 200, 0, -14.895699526341952, 1.5335378378328488e-27},
};

}  // namespace

TEST_CASE("lag cap", "[adf]") {
    CHECK(schwert_lag(96) == 11);
    CHECK(schwert_lag(100) == 12);
    CHECK(schwert_lag(8) == 2);
    CHECK(schwert_lag(30) == 8);
}

TEST_CASE("MacKinnon surface", "[adf]") {
    CHECK(mackinnon_pvalue(3.0) == 1.0);
    CHECK(mackinnon_pvalue(-20.0) == 0.0);
    CHECK(mackinnon_pvalue(std::nan("")) == 1.0);
    // 5% critical value for the constant case is about -2.86
    CHECK_THAT(mackinnon_pvalue(-2.8615), WithinAbs(0.05, 0.003));
    // monotone in the statistic
    double prev = 0.0;
    for (double tau = -18.0; tau < 2.7; tau += 0.01) {
        const double p = mackinnon_pvalue(tau);
        CHECK(p >= prev - 1e-12);
        prev = p;
    }
}

TEST_CASE("ADF matches frozen statsmodels values", "[adf][reference]") {
    for (const auto& ref : kReferences) {
        CAPTURE(ref.series, ref.n);
        const auto x = closed_form(ref.series, ref.n);
        const auto r = adf_test(x);
        CHECK(r.lags == ref.lags);
        CHECK_THAT(r.statistic, WithinRel(ref.statistic, 1e-7));
        CHECK_THAT(r.p_value, WithinAbs(ref.p_value, 1e-6));
    }
}

TEST_CASE("ADF agrees with the normal-equation oracle", "[adf][oracle]") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = trial % 2 == 0 ? testgen::ar1_series(rng, 96, 0.9, 1.0)
                                      : testgen::white_noise(rng, 40 + trial % 60);
        const auto r = adf_test(x);
        const auto o = oracle::adf(x);
        CHECK(r.lags == o.lags);
        CHECK_THAT(r.p_value, WithinAbs(o.p, 1e-6));
    }
}

TEST_CASE("white noise is flagged stationary", "[adf]") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(seed);
        if (is_stationary(testgen::white_noise(rng, 96))) ++hits;
    }
    CHECK(hits >= 190);
}

TEST_CASE("random walks are mostly not stationary", "[adf]") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const auto x = testgen::ar1_series(rng, 96, 1.0, 1.0);
        if (is_stationary(x)) ++hits;
    }
    CHECK(hits <= 20);
}

TEST_CASE("degenerate inputs", "[adf]") {
    CHECK(adf_test(std::vector<double>(20, 1.5)).p_value == 0.0);
    std::vector<double> cycle(96);
    for (std::size_t t = 0; t < cycle.size(); ++t) cycle[t] = std::sin(2.0 * std::numbers::pi * 8.0 * t / 96.0);
    const auto r = adf_test(cycle);
    CHECK(std::isfinite(r.p_value));
    CHECK(r.p_value < 0.05);  // exact AR(2) recursion with a negative level coefficient
    std::vector<double> ramp(50);
    for (std::size_t t = 0; t < ramp.size(); ++t) ramp[t] = static_cast<double>(t);
    CHECK(std::isfinite(adf_test(ramp).p_value));
}

TEST_CASE("stationarity ratio", "[adf]") {
    std::mt19937_64 rng(4);
    // three noise variables and a random walk
    std::vector<std::vector<double>> cols{testgen::white_noise(rng, 96), testgen::white_noise(rng, 96),
                                          testgen::white_noise(rng, 96), testgen::ar1_series(rng, 96, 1.0, 1.0)};
    std::size_t expected = 0;
    for (const auto& c : cols) expected += oracle::adf(c).p < 0.05 ? 1 : 0;
    std::vector<double> values(96 * 4);
    for (std::size_t t = 0; t < 96; ++t)
        for (std::size_t j = 0; j < 4; ++j) values[t * 4 + j] = cols[j][t];
    const TimeSeriesWindow window(96, 4, values);
    CHECK(adf_stationarity_ratio(window) == static_cast<double>(expected) / 4.0);
    CHECK(expected == 3);

    const TimeSeriesWindow flat(16, 2, std::vector<double>(32, 7.0));
    CHECK(adf_stationarity_ratio(flat) == 1.0);
}
