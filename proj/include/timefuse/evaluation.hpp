#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timefuse/baselines.hpp"
#include "timefuse/error.hpp"
#include "timefuse/fusor.hpp"
#include "timefuse/meta_dataset.hpp"
#include "timefuse/parallel.hpp"
#include "timefuse/tensor.hpp"
#include "timefuse/text.hpp"

namespace timefuse {

inline constexpr double kMapeEpsilon = 1e-8;

struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mape;  // absent when every truth element is ~0
    std::size_t samples = 0;
    std::size_t elements = 0;
    std::size_t mape_elements = 0;

    bool operator==(const MetricsReport&) const = default;
};

/// Global element means over every sample added, in the order added.
class MetricsAccumulator {
public:
    template <class P, class T>
    void add(std::span<const P> prediction, std::span<const T> truth) {
        if (prediction.size() != truth.size()) {
            fail(ErrorKind::ShapeMismatch, "prediction has " + std::to_string(prediction.size()) +
                                               " elements, truth has " + std::to_string(truth.size()));
        }
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const double y = static_cast<double>(truth[i]);
            const double r = static_cast<double>(prediction[i]) - y;
            sse_ += r * r;
            sae_ += std::abs(r);
            if (std::abs(y) > kMapeEpsilon) {
                sape_ += std::abs(r) / std::abs(y);
                ++mape_n_;
            }
        }
        n_ += truth.size();
        ++samples_;
    }

    [[nodiscard]] MetricsReport report() const {
        if (n_ == 0) fail(ErrorKind::EmptyDataset, "no elements to score");
        MetricsReport r;
        r.mse = sse_ / static_cast<double>(n_);
        r.mae = sae_ / static_cast<double>(n_);
        r.rmse = std::sqrt(r.mse);
        if (mape_n_ > 0) r.mape = 100.0 * sape_ / static_cast<double>(mape_n_);
        r.samples = samples_;
        r.elements = n_;
        r.mape_elements = mape_n_;
        return r;
    }

private:
    double sse_ = 0.0, sae_ = 0.0, sape_ = 0.0;
    std::size_t n_ = 0, mape_n_ = 0, samples_ = 0;
};

[[nodiscard]] inline MetricsReport compute_metrics(std::span<const Matrix> predictions, std::span<const Matrix> truths) {
    if (predictions.size() != truths.size()) {
        fail(ErrorKind::ShapeMismatch, std::to_string(predictions.size()) + " predictions for " +
                                           std::to_string(truths.size()) + " truths");
    }
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!predictions[i].same_shape(truths[i])) {
            fail(ErrorKind::ShapeMismatch, "sample " + std::to_string(i) + " prediction and truth shapes differ");
        }
        acc.add<double, double>(predictions[i].data, truths[i].data);
    }
    return acc.report();
}

// ---- method dispatch ----

enum class MethodKind { Fused, Mean, Median, TopKMean, TopKMedian, Forward, ZeroShot, BestIndividual };

struct MethodSpec {
    MethodKind kind = MethodKind::Fused;
    std::size_t param = 0;  // k for top-k, member cap for forward
    std::string label;
};

inline constexpr std::size_t kDefaultForwardMembers = 32;

namespace detail {

inline std::size_t parse_count(std::string_view text, std::string_view method) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string_view::npos) {
        fail(ErrorKind::UnknownMethod, "bad count in method '" + std::string(method) + "'");
    }
    return std::stoul(std::string(text));
}

}  // namespace detail

/// Comma-separated list: fused, mean, median, topk:K, topk:A-B (sweep), topk-median:K,
/// topk-median:A-B, forward, forward:N, zeroshot, best-individual.
[[nodiscard]] inline std::vector<MethodSpec> parse_methods(std::string_view list) {
    std::vector<MethodSpec> out;
    for (auto item : detail::split(list, ',')) {
        const auto colon = item.find(':');
        const auto head = item.substr(0, colon);
        const auto arg = colon == std::string_view::npos ? std::string_view{} : item.substr(colon + 1);
        auto plain = [&](MethodKind kind) {
            if (colon != std::string_view::npos) fail(ErrorKind::UnknownMethod, "method '" + std::string(item) + "' takes no argument");
            out.push_back({kind, 0, std::string(head)});
        };
        if (head == "fused") plain(MethodKind::Fused);
        else if (head == "mean") plain(MethodKind::Mean);
        else if (head == "median") plain(MethodKind::Median);
        else if (head == "zeroshot") plain(MethodKind::ZeroShot);
        else if (head == "best-individual") plain(MethodKind::BestIndividual);
        else if (head == "forward") {
            const std::size_t n = arg.empty() && colon == std::string_view::npos ? kDefaultForwardMembers
                                                                                : detail::parse_count(arg, item);
            if (n == 0) fail(ErrorKind::UnknownMethod, "forward selection needs at least one member");
            out.push_back({MethodKind::Forward, n, n == kDefaultForwardMembers && colon == std::string_view::npos
                                                       ? std::string("forward")
                                                       : "forward:" + std::to_string(n)});
        } else if (head == "topk" || head == "topk-median") {
            if (colon == std::string_view::npos) fail(ErrorKind::UnknownMethod, "'" + std::string(head) + "' needs :K");
            const auto kind = head == "topk" ? MethodKind::TopKMean : MethodKind::TopKMedian;
            const auto dash = arg.find('-');
            const std::size_t lo = detail::parse_count(arg.substr(0, dash), item);
            const std::size_t hi = dash == std::string_view::npos ? lo : detail::parse_count(arg.substr(dash + 1), item);
            if (lo == 0 || hi < lo) fail(ErrorKind::UnknownMethod, "bad top-k range in '" + std::string(item) + "'");
            for (std::size_t k = lo; k <= hi; ++k) out.push_back({kind, k, std::string(head) + ":" + std::to_string(k)});
        } else {
            fail(ErrorKind::UnknownMethod, "unknown method '" + std::string(item) + "'");
        }
    }
    return out;
}

/// What a method may look at besides the test shard: the fusor, and shards whose
/// ground truth is fair game for choosing members (meta-train / meta-val).
struct EvaluationContext {
    const FusorModel* model = nullptr;
    std::span<const MetaShard> validation;
    std::size_t threads = 1;
};

namespace detail {

/// Validation samples for a task, pooled over its shards; all tasks pooled if it has none.
inline MetaShard validation_for(std::span<const MetaShard> validation, const MetaShard& test) {
    MetaShard pooled{test.task_id, Split::MetaVal, test.schema, {}};
    bool own = false;
    for (const auto& v : validation) own = own || v.task_id == test.task_id;
    for (const auto& v : validation) {
        if (own && v.task_id != test.task_id) continue;
        if (v.schema.roster != test.schema.roster) {
            fail(ErrorKind::RosterMismatch, "validation shard '" + v.task_id + "' roster differs from test shard");
        }
        pooled.samples.insert(pooled.samples.end(), v.samples.begin(), v.samples.end());
    }
    if (pooled.samples.empty()) {
        fail(ErrorKind::EmptyDataset, "no validation samples to select models for task '" + test.task_id + "'");
    }
    return pooled;
}

/// Per-task shards other than `task` (all of them if no other task exists), merged by task id.
inline std::vector<MetaShard> other_tasks(std::span<const MetaShard> validation, std::string_view task) {
    std::map<std::string, MetaShard> by_task;
    for (const auto& v : validation) {
        auto [it, inserted] = by_task.try_emplace(v.task_id, MetaShard{v.task_id, Split::MetaVal, v.schema, {}});
        it->second.samples.insert(it->second.samples.end(), v.samples.begin(), v.samples.end());
    }
    std::vector<MetaShard> out;
    for (auto& [id, shard] : by_task)
        if (id != task && !shard.samples.empty()) out.push_back(std::move(shard));
    if (out.empty())
        for (auto& [id, shard] : by_task)
            if (!shard.samples.empty()) out.push_back(std::move(shard));
    if (out.empty()) fail(ErrorKind::EmptyDataset, "similarity ensemble needs validation samples");
    return out;
}

}  // namespace detail

/// One prediction per test sample, in shard order.
[[nodiscard]] inline std::vector<std::vector<double>> predict_method(const EvaluationContext& ctx,
                                                                     const MethodSpec& method, const MetaShard& test) {
    const std::size_t k = test.schema.k(), h = test.schema.horizon_size();
    std::vector<std::vector<double>> out(test.size());
    auto each = [&](auto&& fn) { parallel_for(test.size(), ctx.threads, [&](std::size_t i) { out[i] = fn(test.samples[i]); }); };

    switch (method.kind) {
        case MethodKind::Fused: {
            if (ctx.model == nullptr) fail(ErrorKind::InvalidParameter, "method 'fused' needs a trained model");
            if (ctx.model->roster != test.schema.roster) {
                fail(ErrorKind::RosterMismatch, "model roster differs from shard '" + test.task_id + "'");
            }
            each([&](const MetaSample& s) { return fuse(predict_weights(*ctx.model, s), s); });
            break;
        }
        case MethodKind::Mean: {
            const auto all = full_roster(k);
            each([&](const MetaSample& s) { return mean_ensemble<float>(s.predictions, h, all); });
            break;
        }
        case MethodKind::Median: {
            const auto all = full_roster(k);
            each([&](const MetaSample& s) { return median_ensemble<float>(s.predictions, h, all); });
            break;
        }
        case MethodKind::TopKMean:
        case MethodKind::TopKMedian: {
            const auto subset = topk_select(model_mse(detail::validation_for(ctx.validation, test)), method.param);
            const bool median = method.kind == MethodKind::TopKMedian;
            each([&](const MetaSample& s) {
                return median ? median_ensemble<float>(s.predictions, h, subset)
                              : mean_ensemble<float>(s.predictions, h, subset);
            });
            break;
        }
        case MethodKind::Forward: {
            const auto fs = forward_selection_ensemble(detail::validation_for(ctx.validation, test), method.param);
            each([&](const MetaSample& s) { return fuse(fs.weights, s); });
            break;
        }
        case MethodKind::ZeroShot: {
            const auto shards = detail::other_tasks(ctx.validation, test.task_id);
            const auto index = build_similarity_index(shards);
            if (shards.front().schema.roster != test.schema.roster) {
                fail(ErrorKind::RosterMismatch, "validation roster differs from shard '" + test.task_id + "'");
            }
            each([&](const MetaSample& s) {
                return fuse(zeroshot_similarity_ensemble<float>(index, std::span<const float, kNumMetaFeatures>(s.features)), s);
            });
            break;
        }
        case MethodKind::BestIndividual: {
            std::vector<double> onehot(k, 0.0);
            onehot[argmin(model_mse(detail::validation_for(ctx.validation, test)))] = 1.0;
            each([&](const MetaSample& s) { return fuse(onehot, s); });
            break;
        }
    }
    return out;
}

[[nodiscard]] inline MetricsReport score(const MetaShard& test, std::span<const std::vector<double>> predictions) {
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < test.size(); ++i) {
        acc.add<double, float>(predictions[i], test.samples[i].truth);
    }
    return acc.report();
}

[[nodiscard]] inline MetricsReport evaluate_method(const EvaluationContext& ctx, const MethodSpec& method,
                                                   const MetaShard& test) {
    if (test.samples.empty()) fail(ErrorKind::EmptyDataset, "test shard '" + test.task_id + "' has no samples");
    return score(test, predict_method(ctx, method, test));
}

// ---- reports ----

struct Leaderboard {
    std::vector<std::string> methods;
    std::vector<std::string> tasks;
    std::vector<std::vector<MetricsReport>> cells;  // [task][method]
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::optional<double> metric(const MetricsReport& r, std::size_t which) {
    switch (which) {
        case 0: return r.mse;
        case 1: return r.mae;
        case 2: return r.rmse;
        default: return r.mape;
    }
}

}  // namespace detail

inline constexpr std::array<std::string_view, 4> kMetricNames{"mse", "mae", "rmse", "mape"};

/// Rows = tasks; columns = method x metric, then best/second-best method per metric
/// (lowest wins, ties to the earlier method; absent MAPE cells are empty and never ranked).
[[nodiscard]] inline std::string leaderboard_csv(const Leaderboard& board) {
    std::string out = "task";
    for (const auto& m : board.methods)
        for (auto metric : kMetricNames) out += "," + m + "_" + std::string(metric);
    for (auto metric : kMetricNames) out += ",best_" + std::string(metric) + ",second_" + std::string(metric);
    out += "\n";
    for (std::size_t t = 0; t < board.tasks.size(); ++t) {
        const auto& row = board.cells[t];
        out += board.tasks[t];
        for (const auto& r : row) {
            for (std::size_t q = 0; q < 4; ++q) {
                const auto v = detail::metric(r, q);
                out += "," + (v ? detail::num(*v) : std::string());
            }
        }
        for (std::size_t q = 0; q < 4; ++q) {
            std::vector<std::size_t> order;
            for (std::size_t m = 0; m < row.size(); ++m)
                if (detail::metric(row[m], q)) order.push_back(m);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return *detail::metric(row[a], q) < *detail::metric(row[b], q);
            });
            out += "," + (order.size() > 0 ? board.methods[order[0]] : std::string());
            out += "," + (order.size() > 1 ? board.methods[order[1]] : std::string());
        }
        out += "\n";
    }
    return out;
}

/// task,model,rank_first_fraction,samples,fused_beats_best
[[nodiscard]] inline std::string rank_first_csv(const std::vector<std::string>& roster,
                                                std::span<const std::pair<std::string, RankFirstReport>> rows) {
    std::string out = "task,model,rank_first_fraction,samples,fused_beats_best\n";
    for (const auto& [task, r] : rows) {
        for (std::size_t m = 0; m < roster.size(); ++m) {
            out += task + "," + roster[m] + "," + detail::num(r.fractions[m]) + "," + std::to_string(r.samples) + "," +
                   (r.fused_beats_best ? detail::num(*r.fused_beats_best) : std::string()) + "\n";
        }
    }
    return out;
}

// ---- zero-shot protocol ----

struct ZeroShotReport {
    std::string task;
    MetricsReport normal;         // fusor trained on every task
    MetricsReport zero_shot;      // fusor trained without the held-out task
    MetricsReport best_individual;
    MetricsReport uniform;
    std::string best_model;
    FusorModel normal_model;
    FusorModel zero_shot_model;
};

/// Trains a fusor on all tasks and another on all but `held_out`, then scores both on
/// the held-out task's test shard. The best individual model is the one with the lowest
/// MSE on the held-out task's own meta-training shard.
[[nodiscard]] inline ZeroShotReport zero_shot_protocol(std::span<const MetaShard> train, std::span<const MetaShard> test,
                                                       std::string_view held_out, const TrainConfig& config,
                                                       std::size_t threads = 1) {
    std::vector<std::string> tasks;
    for (const auto& s : train)
        if (std::find(tasks.begin(), tasks.end(), s.task_id) == tasks.end()) tasks.push_back(s.task_id);
    if (tasks.size() < 2) fail(ErrorKind::InsufficientTasks, "zero-shot evaluation needs at least two tasks");
    if (std::find(tasks.begin(), tasks.end(), held_out) == tasks.end()) {
        fail(ErrorKind::UnknownTask, "held-out task '" + std::string(held_out) + "' has no meta-training shard");
    }
    const auto target = std::find_if(test.begin(), test.end(), [&](const MetaShard& s) { return s.task_id == held_out; });
    if (target == test.end()) fail(ErrorKind::UnknownTask, "held-out task '" + std::string(held_out) + "' has no test shard");

    std::vector<MetaShard> others;
    for (const auto& s : train)
        if (s.task_id != held_out) others.push_back(s);

    ZeroShotReport report;
    report.task = std::string(held_out);
    report.normal_model = train_fusor(train, config);
    report.zero_shot_model = train_fusor(others, config);

    EvaluationContext ctx{&report.normal_model, train, threads};
    report.normal = evaluate_method(ctx, {MethodKind::Fused, 0, "fused"}, *target);
    ctx.model = &report.zero_shot_model;
    report.zero_shot = evaluate_method(ctx, {MethodKind::Fused, 0, "fused"}, *target);
    report.uniform = evaluate_method(ctx, {MethodKind::Mean, 0, "mean"}, *target);
    report.best_individual = evaluate_method(ctx, {MethodKind::BestIndividual, 0, "best-individual"}, *target);
    const auto own = detail::validation_for(train, *target);
    report.best_model = target->schema.roster[argmin(model_mse(own))];
    return report;
}

}  // namespace timefuse
