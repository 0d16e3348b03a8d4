#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "timefuse/error.hpp"
#include "timefuse/fusor.hpp"
#include "timefuse/meta_dataset.hpp"
#include "timefuse/parallel.hpp"
#include "timefuse/tensor.hpp"

namespace timefuse {

// ---- static ensembles ----

/// Indices of the k_sel lowest scores, ascending by score, ties by roster order.
[[nodiscard]] inline std::vector<std::size_t> topk_select(std::span<const double> scores, std::size_t k_sel) {
    if (k_sel < 1 || k_sel > scores.size()) {
        fail(ErrorKind::KOutOfRange, "top-k needs 1 <= k <= " + std::to_string(scores.size()) + ", got " +
                                         std::to_string(k_sel));
    }
    for (double s : scores)
        if (!std::isfinite(s)) fail(ErrorKind::NonFiniteInput, "validation score is not finite");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    order.resize(k_sel);
    return order;
}

namespace detail {

inline void check_subset(std::span<const std::size_t> subset, std::size_t k) {
    if (subset.empty()) fail(ErrorKind::EmptySubset, "ensemble subset is empty");
    for (auto m : subset)
        if (m >= k) fail(ErrorKind::ShapeMismatch, "subset index " + std::to_string(m) + " out of range");
}

}  // namespace detail

/// Elementwise mean of the selected slices of a stacked k x h buffer.
template <class T>
[[nodiscard]] std::vector<double> mean_ensemble(std::span<const T> stacked, std::size_t h,
                                                std::span<const std::size_t> subset) {
    detail::check_subset(subset, stacked.size() / h);
    std::vector<double> out(h, 0.0);
    for (auto m : subset)
        for (std::size_t e = 0; e < h; ++e) out[e] += static_cast<double>(stacked[m * h + e]);
    for (auto& v : out) v /= static_cast<double>(subset.size());
    return out;
}

/// Elementwise median; even counts average the middle two.
template <class T>
[[nodiscard]] std::vector<double> median_ensemble(std::span<const T> stacked, std::size_t h,
                                                  std::span<const std::size_t> subset) {
    detail::check_subset(subset, stacked.size() / h);
    std::vector<double> out(h), column(subset.size());
    const std::size_t mid = subset.size() / 2;
    for (std::size_t e = 0; e < h; ++e) {
        for (std::size_t i = 0; i < subset.size(); ++i) column[i] = static_cast<double>(stacked[subset[i] * h + e]);
        std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
        double v = column[mid];
        if (subset.size() % 2 == 0) {
            v = 0.5 * (v + *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid)));
        }
        out[e] = v;
    }
    return out;
}

[[nodiscard]] inline Matrix mean_ensemble(const PredictionTensor& p, std::span<const std::size_t> subset) {
    return Matrix{p.t_out, p.d, mean_ensemble<double>(p.values, p.slice_size(), subset)};
}

[[nodiscard]] inline Matrix median_ensemble(const PredictionTensor& p, std::span<const std::size_t> subset) {
    return Matrix{p.t_out, p.d, median_ensemble<double>(p.values, p.slice_size(), subset)};
}

[[nodiscard]] inline std::vector<std::size_t> full_roster(std::size_t k) {
    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

/// Per-model MSE over every element of every sample in the shard. Samples may differ in
/// horizon length (pooled validation data), so each is read at its own size.
[[nodiscard]] inline std::vector<double> model_mse(const MetaShard& shard) {
    const std::size_t k = shard.schema.k();
    if (shard.samples.empty()) fail(ErrorKind::EmptyDataset, "shard '" + shard.task_id + "' has no samples");
    std::vector<double> sse(k, 0.0);
    std::size_t elements = 0;
    for (const auto& s : shard.samples) {
        const std::size_t h = s.truth.size();
        elements += h;
        for (std::size_t m = 0; m < k; ++m) {
            for (std::size_t e = 0; e < h; ++e) {
                const double r = static_cast<double>(s.predictions[m * h + e]) - static_cast<double>(s.truth[e]);
                sse[m] += r * r;
            }
        }
    }
    for (auto& v : sse) v /= static_cast<double>(elements);
    return sse;
}

[[nodiscard]] inline std::size_t argmin(std::span<const double> v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

// ---- forward selection ----

struct ForwardSelection {
    std::vector<std::size_t> members;  // in acceptance order, repeats allowed
    std::vector<double> weights;       // length k: multiplicity / |members|
    std::vector<double> loss_history;  // shard MSE after each accepted member
};

/// Greedy with-replacement ensemble selection on shard MSE of the running average.
/// Stops at max_members or when no candidate strictly improves; ties go to the lower index.
[[nodiscard]] inline ForwardSelection forward_selection_ensemble(const MetaShard& shard, std::size_t max_members) {
    if (shard.samples.empty()) fail(ErrorKind::EmptyDataset, "shard '" + shard.task_id + "' has no samples");
    if (max_members == 0) fail(ErrorKind::InvalidParameter, "max_members must be positive");
    const std::size_t k = shard.schema.k();
    std::vector<std::size_t> offset{0};
    for (const auto& s : shard.samples) offset.push_back(offset.back() + s.truth.size());
    const std::size_t elements = offset.back();
    std::vector<double> sum(elements, 0.0);
    ForwardSelection out;
    out.weights.assign(k, 0.0);
    double current = std::numeric_limits<double>::infinity();

    while (out.members.size() < max_members) {
        const double size = static_cast<double>(out.members.size() + 1);
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = k;
        for (std::size_t m = 0; m < k; ++m) {
            double sse = 0.0;
            for (std::size_t i = 0; i < shard.size(); ++i) {
                const auto& s = shard.samples[i];
                const std::size_t h = s.truth.size();
                for (std::size_t e = 0; e < h; ++e) {
                    const double avg = (sum[offset[i] + e] + static_cast<double>(s.predictions[m * h + e])) / size;
                    const double r = avg - static_cast<double>(s.truth[e]);
                    sse += r * r;
                }
            }
            const double mse = sse / static_cast<double>(elements);
            if (mse < best) {
                best = mse;
                pick = m;
            }
        }
        if (!(best < current)) break;
        current = best;
        out.members.push_back(pick);
        out.loss_history.push_back(best);
        for (std::size_t i = 0; i < shard.size(); ++i) {
            const auto& s = shard.samples[i];
            const std::size_t h = s.truth.size();
            for (std::size_t e = 0; e < h; ++e) sum[offset[i] + e] += static_cast<double>(s.predictions[pick * h + e]);
        }
    }
    for (auto m : out.members) out.weights[m] += 1.0 / static_cast<double>(out.members.size());
    return out;
}

// ---- zero-shot similarity ensemble ----

/// Task centroids in standardized feature space, each tagged with its best model.
struct SimilarityIndex {
    std::vector<std::string> task_ids;
    std::vector<std::array<double, kNumMetaFeatures>> centroids;  // standardized
    std::vector<std::size_t> best_model;
    FeatureStats stats;
    double temperature = 1.0;
    std::size_t k = 0;
};

[[nodiscard]] inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Builds the index from per-task shards. temperature <= 0 selects the median pairwise
/// centroid distance (1 when fewer than two tasks or all centroids coincide).
[[nodiscard]] inline SimilarityIndex build_similarity_index(std::span<const MetaShard> shards,
                                                            double temperature = 0.0) {
    if (shards.empty()) fail(ErrorKind::EmptyDataset, "similarity ensemble needs at least one task");
    SimilarityIndex index;
    index.k = shards.front().schema.k();
    index.stats = compute_feature_stats(shards);
    for (const auto& shard : shards) {
        if (shard.schema.roster != shards.front().schema.roster) {
            fail(ErrorKind::RosterMismatch, "shard '" + shard.task_id + "' roster differs");
        }
        std::array<double, kNumMetaFeatures> raw{};
        for (const auto& s : shard.samples)
            for (std::size_t f = 0; f < kNumMetaFeatures; ++f) raw[f] += static_cast<double>(s.features[f]);
        for (auto& v : raw) v /= static_cast<double>(shard.size());
        index.task_ids.push_back(shard.task_id);
        index.centroids.push_back(
            standardize_features<double>(index.stats, std::span<const double, kNumMetaFeatures>(raw)));
        index.best_model.push_back(argmin(model_mse(shard)));
    }
    if (temperature > 0.0) {
        index.temperature = temperature;
    } else {
        std::vector<double> dist;
        for (std::size_t a = 0; a < index.centroids.size(); ++a)
            for (std::size_t b = a + 1; b < index.centroids.size(); ++b)
                dist.push_back(euclidean(index.centroids[a], index.centroids[b]));
        if (!dist.empty()) {
            std::sort(dist.begin(), dist.end());
            const std::size_t n = dist.size();
            const double med = n % 2 ? dist[n / 2] : 0.5 * (dist[n / 2 - 1] + dist[n / 2]);
            if (med > 0.0) index.temperature = med;
        }
    }
    return index;
}

/// Softmax over negative query-to-centroid distances mixes each task's best-model
/// indicator. Entries are nonnegative and sum to one; models that are no task's best
/// receive zero.
template <class T>
[[nodiscard]] std::vector<double> zeroshot_similarity_ensemble(const SimilarityIndex& index,
                                                               std::span<const T, kNumMetaFeatures> query) {
    const auto z = standardize_features<T>(index.stats, query);
    std::vector<double> logits;
    for (const auto& c : index.centroids) logits.push_back(-euclidean(z, c) / index.temperature);
    const auto task_weights = softmax(logits);
    std::vector<double> w(index.k, 0.0);
    for (std::size_t t = 0; t < task_weights.size(); ++t) w[index.best_model[t]] += task_weights[t];
    return w;
}

[[nodiscard]] inline std::vector<double> zeroshot_similarity_ensemble(const SimilarityIndex& index,
                                                                      const MetaFeatureVector& query) {
    return zeroshot_similarity_ensemble<double>(index, std::span<const double, kNumMetaFeatures>(query.values));
}

// ---- classical model zoo ----

enum class ZooKind { NaiveLast, SeasonalNaive, MovingAverage, ArP };

struct ZooMethod {
    ZooKind kind = ZooKind::NaiveLast;
    std::size_t param = 0;  // period, width or order

    [[nodiscard]] std::string name() const {
        switch (kind) {
            case ZooKind::NaiveLast: return "naive_last";
            case ZooKind::SeasonalNaive: return "seasonal_naive:" + std::to_string(param);
            case ZooKind::MovingAverage: return "moving_average:" + std::to_string(param);
            case ZooKind::ArP: return "ar_p:" + std::to_string(param);
        }
        return "naive_last";
    }
};

/// Parses "naive_last", "seasonal_naive:P", "moving_average:W" or "ar_p:O".
[[nodiscard]] inline ZooMethod parse_zoo_method(std::string_view text) {
    const auto colon = text.find(':');
    const auto head = text.substr(0, colon);
    std::size_t param = 0;
    if (colon != std::string_view::npos) {
        const std::string digits(text.substr(colon + 1));
        if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
            fail(ErrorKind::InvalidParameter, "bad zoo parameter in '" + std::string(text) + "'");
        }
        param = std::stoul(digits);
    }
    if (head == "naive_last" && colon == std::string_view::npos) return {ZooKind::NaiveLast, 0};
    if (head == "seasonal_naive" && colon != std::string_view::npos) return {ZooKind::SeasonalNaive, param};
    if (head == "moving_average" && colon != std::string_view::npos) return {ZooKind::MovingAverage, param};
    if (head == "ar_p" && colon != std::string_view::npos) return {ZooKind::ArP, param};
    fail(ErrorKind::UnknownMethod, "unknown zoo method '" + std::string(text) + "'");
}

namespace detail {

/// Least-squares AR(order) with intercept, rolled forward t_out steps.
inline std::vector<double> ar_forecast(std::span<const double> x, std::size_t order, std::size_t t_out) {
    const std::size_t n = x.size();
    const auto rows = static_cast<Eigen::Index>(n - order);
    Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(order + 1));
    Eigen::VectorXd target(rows);
    for (std::size_t t = order; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t - order);
        design(r, 0) = 1.0;
        for (std::size_t i = 1; i <= order; ++i) design(r, static_cast<Eigen::Index>(i)) = x[t - i];
        target(r) = x[t];
    }
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
    std::vector<double> path(x.begin(), x.end());
    for (std::size_t h = 0; h < t_out; ++h) {
        double next = beta(0);
        for (std::size_t i = 1; i <= order; ++i) next += beta(static_cast<Eigen::Index>(i)) * path[path.size() - i];
        path.push_back(next);
    }
    return {path.end() - static_cast<std::ptrdiff_t>(t_out), path.end()};
}

}  // namespace detail

[[nodiscard]] inline Matrix synthetic_zoo_forecast(const TimeSeriesWindow& window, const ZooMethod& method,
                                                   std::size_t t_out) {
    const std::size_t n = window.length(), d = window.variables();
    if (t_out == 0) fail(ErrorKind::InvalidParameter, "forecast horizon must be positive");
    switch (method.kind) {
        case ZooKind::SeasonalNaive:
            if (method.param < 1 || method.param > n) {
                fail(ErrorKind::InvalidParameter, "seasonal period must be in [1, " + std::to_string(n) + "]");
            }
            break;
        case ZooKind::MovingAverage:
            if (method.param < 1 || method.param > n) {
                fail(ErrorKind::InvalidParameter, "moving-average width must be in [1, " + std::to_string(n) + "]");
            }
            break;
        case ZooKind::ArP:
            if (method.param < 1 || 2 * method.param + 1 > n) {
                fail(ErrorKind::InvalidParameter, "AR order must be in [1, " + std::to_string((n - 1) / 2) + "]");
            }
            break;
        case ZooKind::NaiveLast: break;
    }
    Matrix out{t_out, d, std::vector<double>(t_out * d)};
    for (std::size_t j = 0; j < d; ++j) {
        const auto x = window.variable(j);
        std::vector<double> path(t_out);
        switch (method.kind) {
            case ZooKind::NaiveLast: std::fill(path.begin(), path.end(), x.back()); break;
            case ZooKind::SeasonalNaive:
                for (std::size_t h = 0; h < t_out; ++h) path[h] = x[n - method.param + h % method.param];
                break;
            case ZooKind::MovingAverage: {
                double s = 0.0;
                for (std::size_t t = n - method.param; t < n; ++t) s += x[t];
                std::fill(path.begin(), path.end(), s / static_cast<double>(method.param));
                break;
            }
            case ZooKind::ArP:
                if (is_constant(x)) {
                    std::fill(path.begin(), path.end(), x.back());
                } else {
                    path = detail::ar_forecast(x, method.param, t_out);
                }
                break;
        }
        for (std::size_t h = 0; h < t_out; ++h) out(h, j) = path[h];
    }
    return out;
}

// ---- rank-first analysis ----

struct RankFirstReport {
    std::vector<double> fractions;             // per model, sums to 1
    std::size_t samples = 0;
    std::optional<double> fused_beats_best;    // vs the overall best individual model
    std::size_t best_individual = 0;
};

/// Per sample, the model with the lowest MSE gets credit (ties split). If `fused` is
/// given (one prediction per sample, in shard order), also reports how often the fused
/// forecast's MSE is strictly below that of the overall best individual model.
[[nodiscard]] inline RankFirstReport rank_first_analysis(std::span<const MetaShard> shards,
                                                         std::span<const std::vector<double>> fused = {},
                                                         std::size_t threads = 1) {
    std::size_t n = 0;
    for (const auto& s : shards) {
        if (s.schema.roster != shards.front().schema.roster) {
            fail(ErrorKind::RosterMismatch, "shard '" + s.task_id + "' roster differs");
        }
        n += s.size();
    }
    if (n == 0) fail(ErrorKind::EmptyDataset, "rank analysis needs at least one sample");
    if (!fused.empty() && fused.size() != n) fail(ErrorKind::ShapeMismatch, "one fused prediction per sample required");
    const std::size_t k = shards.front().schema.k();

    std::vector<std::pair<const MetaShard*, std::size_t>> refs;
    for (const auto& s : shards)
        for (std::size_t i = 0; i < s.size(); ++i) refs.emplace_back(&s, i);

    std::vector<std::vector<double>> per_sample(n);  // k model MSEs, then fused MSE
    parallel_for(n, threads, [&](std::size_t i) {
        const auto& shard = *refs[i].first;
        const auto& s = shard.samples[refs[i].second];
        const std::size_t h = shard.schema.horizon_size();
        auto& row = per_sample[i];
        row.assign(k + 1, 0.0);
        for (std::size_t m = 0; m <= k; ++m) {
            if (m == k && fused.empty()) break;
            if (m == k && fused[i].size() != h) fail(ErrorKind::ShapeMismatch, "fused prediction has wrong size");
            double sse = 0.0;
            for (std::size_t e = 0; e < h; ++e) {
                const double p = m < k ? static_cast<double>(s.predictions[m * h + e]) : fused[i][e];
                const double r = p - static_cast<double>(s.truth[e]);
                sse += r * r;
            }
            row[m] = sse / static_cast<double>(h);
        }
    });

    RankFirstReport report;
    report.samples = n;
    report.fractions.assign(k, 0.0);
    std::vector<double> total(k, 0.0);
    for (const auto& row : per_sample) {
        const double best = *std::min_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k));
        const auto ties = static_cast<double>(std::count(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), best));
        for (std::size_t m = 0; m < k; ++m) {
            if (row[m] == best) report.fractions[m] += 1.0 / ties;
            total[m] += row[m];
        }
    }
    for (auto& f : report.fractions) f /= static_cast<double>(n);
    report.best_individual = argmin(total);
    if (!fused.empty()) {
        std::size_t wins = 0;
        for (const auto& row : per_sample) wins += row[k] < row[report.best_individual];
        report.fused_beats_best = static_cast<double>(wins) / static_cast<double>(n);
    }
    return report;
}

}  // namespace timefuse
