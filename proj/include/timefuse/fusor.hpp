#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "timefuse/error.hpp"
#include "timefuse/meta_dataset.hpp"
#include "timefuse/meta_features.hpp"
#include "timefuse/random.hpp"
#include "timefuse/shard_io.hpp"
#include "timefuse/tensor.hpp"
#include "timefuse/text.hpp"

namespace timefuse {

inline constexpr double kStdFloor = 1e-8;
inline constexpr double kStandardizedClamp = 10.0;
inline constexpr int kModelFormatVersion = 1;

struct FeatureStats {
    std::array<double, kNumMetaFeatures> mean{};
    std::array<double, kNumMetaFeatures> std{};

    bool operator==(const FeatureStats&) const = default;
};

/// Identity statistics: mean 0, std 1.
[[nodiscard]] inline FeatureStats identity_stats() {
    FeatureStats s;
    s.std.fill(1.0);
    return s;
}

/// Population mean/std of each feature over all samples pooled across shards, std
/// floored at kStdFloor.
[[nodiscard]] inline FeatureStats compute_feature_stats(std::span<const MetaShard> shards) {
    FeatureStats s;
    std::size_t n = 0;
    for (const auto& shard : shards) {
        for (const auto& sample : shard.samples) {
            ++n;
            for (std::size_t i = 0; i < kNumMetaFeatures; ++i) s.mean[i] += static_cast<double>(sample.features[i]);
        }
    }
    if (n == 0) fail(ErrorKind::EmptyDataset, "no samples to compute feature statistics from");
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (const auto& shard : shards) {
        for (const auto& sample : shard.samples) {
            for (std::size_t i = 0; i < kNumMetaFeatures; ++i) {
                const double c = static_cast<double>(sample.features[i]) - s.mean[i];
                s.std[i] += c * c;
            }
        }
    }
    for (auto& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), kStdFloor);
    return s;
}

template <class T>
[[nodiscard]] std::array<double, kNumMetaFeatures> standardize_features(const FeatureStats& stats,
                                                                        std::span<const T, kNumMetaFeatures> raw) {
    std::array<double, kNumMetaFeatures> z{};
    for (std::size_t i = 0; i < kNumMetaFeatures; ++i) {
        const double v = (static_cast<double>(raw[i]) - stats.mean[i]) / std::max(stats.std[i], kStdFloor);
        z[i] = std::clamp(v, -kStandardizedClamp, kStandardizedClamp);
    }
    return z;
}

[[nodiscard]] inline std::array<double, kNumMetaFeatures> standardize_features(const FeatureStats& stats,
                                                                               const MetaFeatureVector& raw) {
    return standardize_features<double>(stats, std::span<const double, kNumMetaFeatures>(raw.values));
}

struct FusorModel {
    std::vector<std::string> roster;
    std::vector<double> theta;  // 24 x k, row-major (feature, model)
    std::vector<double> bias;
    FeatureStats feature_stats = identity_stats();
    double huber_delta = 1.0;

    FusorModel() = default;

    /// Zero parameters: predicts the uniform ensemble.
    explicit FusorModel(std::vector<std::string> names, double delta = 1.0)
        : roster(std::move(names)), theta(kNumMetaFeatures * roster.size(), 0.0), bias(roster.size(), 0.0),
          huber_delta(delta) {
        validate();
    }

    [[nodiscard]] std::size_t k() const noexcept { return roster.size(); }
    [[nodiscard]] double& theta_at(std::size_t feature, std::size_t model) { return theta[feature * k() + model]; }
    [[nodiscard]] double theta_at(std::size_t feature, std::size_t model) const { return theta[feature * k() + model]; }

    void validate() const {
        if (k() < 2) fail(ErrorKind::ShapeMismatch, "fusor needs at least two models");
        require_unique_roster(roster);
        if (theta.size() != kNumMetaFeatures * k() || bias.size() != k()) {
            fail(ErrorKind::ShapeMismatch, "fusor parameters do not match roster length");
        }
        if (!(huber_delta > 0.0)) fail(ErrorKind::InvalidParameter, "huber_delta must be positive");
    }

    bool operator==(const FusorModel&) const = default;
};

/// Numerically stable softmax.
[[nodiscard]] inline std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += (w[i] = std::exp(logits[i] - top));
    for (auto& v : w) v /= sum;
    return w;
}

[[nodiscard]] inline std::vector<double> fusor_logits(const FusorModel& model,
                                                      std::span<const double, kNumMetaFeatures> z) {
    std::vector<double> logits(model.bias);
    for (std::size_t f = 0; f < kNumMetaFeatures; ++f) {
        if (z[f] == 0.0) continue;
        for (std::size_t m = 0; m < model.k(); ++m) logits[m] += model.theta_at(f, m) * z[f];
    }
    return logits;
}

template <class T>
[[nodiscard]] std::vector<double> predict_weights(const FusorModel& model, std::span<const T, kNumMetaFeatures> raw) {
    const auto z = standardize_features<T>(model.feature_stats, raw);
    return softmax(fusor_logits(model, z));
}

[[nodiscard]] inline std::vector<double> predict_weights(const FusorModel& model, const MetaFeatureVector& raw) {
    return predict_weights<double>(model, std::span<const double, kNumMetaFeatures>(raw.values));
}

[[nodiscard]] inline std::vector<double> predict_weights(const FusorModel& model, const MetaSample& sample) {
    return predict_weights<float>(model, std::span<const float, kNumMetaFeatures>(sample.features));
}

/// Convex combination of k stacked slices of length h.
template <class T>
[[nodiscard]] std::vector<double> fuse_slices(std::span<const double> weights, std::span<const T> stacked, std::size_t h) {
    if (h == 0 || stacked.size() != weights.size() * h) {
        fail(ErrorKind::ShapeMismatch, "weights length " + std::to_string(weights.size()) +
                                           " does not match the stacked predictions");
    }
    std::vector<double> out(h, 0.0);
    for (std::size_t m = 0; m < weights.size(); ++m) {
        const double w = weights[m];
        const T* slice = stacked.data() + m * h;
        for (std::size_t e = 0; e < h; ++e) out[e] += w * static_cast<double>(slice[e]);
    }
    return out;
}

[[nodiscard]] inline Matrix fuse(std::span<const double> weights, const PredictionTensor& predictions) {
    if (weights.size() != predictions.k()) {
        fail(ErrorKind::ShapeMismatch, "got " + std::to_string(weights.size()) + " weights for " +
                                           std::to_string(predictions.k()) + " models");
    }
    return Matrix{predictions.t_out, predictions.d,
                  fuse_slices<double>(weights, predictions.values, predictions.slice_size())};
}

[[nodiscard]] inline std::vector<double> fuse(std::span<const double> weights, const MetaSample& sample) {
    return fuse_slices<float>(weights, sample.predictions, sample.truth.size());
}

[[nodiscard]] inline double huber(double r, double delta) noexcept {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

/// Mean elementwise Huber loss.
template <class P, class T>
[[nodiscard]] double huber_loss(std::span<const P> prediction, std::span<const T> truth, double delta) {
    if (prediction.size() != truth.size() || prediction.empty()) {
        fail(ErrorKind::ShapeMismatch, "prediction and truth differ in size");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        sum += huber(static_cast<double>(prediction[i]) - static_cast<double>(truth[i]), delta);
    }
    return sum / static_cast<double>(prediction.size());
}

[[nodiscard]] inline double huber_loss(const Matrix& prediction, const Matrix& truth, double delta) {
    if (!prediction.same_shape(truth)) fail(ErrorKind::ShapeMismatch, "prediction and truth shapes differ");
    return huber_loss<double, double>(prediction.data, truth.data, delta);
}

/// Fusor loss on one sample.
[[nodiscard]] inline double sample_loss(const FusorModel& model, const MetaSample& sample) {
    const auto w = predict_weights(model, sample);
    const auto fused = fuse(w, sample);
    return huber_loss<double, float>(fused, sample.truth, model.huber_delta);
}

/// Gradient of the per-sample loss, flattened as [theta (24*k row-major), bias (k)].
/// Accumulates into `grad` scaled by `scale`; returns the loss.
inline double accumulate_gradient(const FusorModel& model, const MetaSample& sample, double scale,
                                  std::span<double> grad) {
    const std::size_t k = model.k();
    const std::size_t h = sample.truth.size();
    const auto z = standardize_features<float>(model.feature_stats,
                                               std::span<const float, kNumMetaFeatures>(sample.features));
    const auto w = softmax(fusor_logits(model, z));
    const auto fused = fuse(w, sample);

    // dL/dfused_e = psi(r_e)/h, psi the clipped residual; dL/dw_m = sum_e dL/dfused_e * P_m,e.
    double loss = 0.0;
    std::vector<double> d_fused(h);
    for (std::size_t e = 0; e < h; ++e) {
        const double r = fused[e] - static_cast<double>(sample.truth[e]);
        loss += huber(r, model.huber_delta);
        d_fused[e] = std::clamp(r, -model.huber_delta, model.huber_delta) / static_cast<double>(h);
    }
    loss /= static_cast<double>(h);

    std::vector<double> d_w(k, 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        const float* slice = sample.predictions.data() + m * h;
        double acc = 0.0;
        for (std::size_t e = 0; e < h; ++e) acc += d_fused[e] * static_cast<double>(slice[e]);
        d_w[m] = acc;
    }
    double mean_dw = 0.0;
    for (std::size_t m = 0; m < k; ++m) mean_dw += w[m] * d_w[m];

    for (std::size_t m = 0; m < k; ++m) {
        const double d_logit = scale * w[m] * (d_w[m] - mean_dw);
        grad[kNumMetaFeatures * k + m] += d_logit;
        for (std::size_t f = 0; f < kNumMetaFeatures; ++f) grad[f * k + m] += d_logit * z[f];
    }
    return loss;
}

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 50;
    std::size_t patience = 5;
    std::uint64_t seed = 0;
    double huber_delta = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const {
        if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidParameter, "learning_rate must be positive");
        if (batch_size == 0) fail(ErrorKind::InvalidParameter, "batch_size must be positive");
        if (!(huber_delta > 0.0)) fail(ErrorKind::InvalidParameter, "huber_delta must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // mean batch loss; at epoch 0 the initial training loss
    double val_loss = 0.0;
    double best_val_loss = 0.0;
};

struct TrainResult {
    FusorModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
    bool validation_from_training = false;  // no held-out samples; monitored the training loss
    std::vector<std::pair<std::string, std::size_t>> task_sizes;  // training samples per task after the carve-out
    std::size_t target_size = 0;                                   // per-task samples per epoch after oversampling
    std::size_t batches_per_task = 0;
};

/// Task-balanced loss: the mean over tasks of each task's mean sample loss.
[[nodiscard]] inline double task_balanced_loss(const FusorModel& model, std::span<const MetaShard> shards) {
    double total = 0.0;
    std::size_t tasks = 0;
    for (const auto& shard : shards) {
        if (shard.samples.empty()) continue;
        double sum = 0.0;
        for (const auto& s : shard.samples) sum += sample_loss(model, s);
        total += sum / static_cast<double>(shard.size());
        ++tasks;
    }
    return tasks == 0 ? 0.0 : total / static_cast<double>(tasks);
}

namespace detail {

class Adam {
public:
    Adam(std::size_t n, const TrainConfig& c) : m_(n, 0.0), v_(n, 0.0), c_(c) {}

    void step(std::span<double> params, std::span<const double> grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = c_.beta1 * m_[i] + (1.0 - c_.beta1) * grad[i];
            v_[i] = c_.beta2 * v_[i] + (1.0 - c_.beta2) * grad[i] * grad[i];
            params[i] -= c_.learning_rate * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + c_.adam_epsilon);
        }
    }

private:
    std::vector<double> m_, v_;
    const TrainConfig& c_;
    std::uint64_t t_ = 0;
};

inline void unpack(FusorModel& model, std::span<const double> params) {
    const std::size_t nt = model.theta.size();
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(nt), model.theta.begin());
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(nt), params.end(), model.bias.begin());
}

}  // namespace detail

/// Trains on meta-training shards. For each shard, a meta_val shard with the same
/// task_id in `validation` is used as its held-out set; otherwise 10% is carved out.
[[nodiscard]] inline TrainResult train_fusor_detailed(std::span<const MetaShard> shards, const TrainConfig& config,
                                                      std::span<const MetaShard> validation = {}) {
    config.validate();
    if (shards.empty()) fail(ErrorKind::EmptyDataset, "no meta-training shards");

    std::vector<MetaShard> train_parts, val_parts;
    for (std::size_t s = 0; s < shards.size(); ++s) {
        const auto& shard = shards[s];
        if (shard.samples.empty()) fail(ErrorKind::EmptyDataset, "shard '" + shard.task_id + "' has no samples");
        const auto given = std::find_if(validation.begin(), validation.end(),
                                        [&](const MetaShard& v) { return v.task_id == shard.task_id; });
        if (given != validation.end()) {
            if (given->schema.roster != shard.schema.roster) {
                fail(ErrorKind::RosterMismatch, "validation shard '" + given->task_id + "' roster differs");
            }
            train_parts.push_back(shard);
            val_parts.push_back(*given);
        } else {
            auto split = carve_validation(shard, mix_seed(config.seed, 0x7A1000 + s));
            train_parts.push_back(std::move(split.train));
            val_parts.push_back(std::move(split.val));
        }
    }

    TrainResult result;
    std::size_t n_val = 0;
    for (const auto& v : val_parts) n_val += v.size();
    result.validation_from_training = n_val == 0;

    const auto joint = build_joint_dataset(train_parts, mix_seed(config.seed, 0x10147));
    for (const auto& t : joint.shards) result.task_sizes.emplace_back(t.task_id, t.size());
    result.target_size = joint.target_size;
    result.batches_per_task = (joint.target_size + config.batch_size - 1) / config.batch_size;
    FusorModel model(joint.roster(), config.huber_delta);
    model.feature_stats = compute_feature_stats(train_parts);

    const std::span<const MetaShard> monitor =
        result.validation_from_training ? std::span<const MetaShard>(joint.shards) : std::span<const MetaShard>(val_parts);

    auto check_finite = [](double loss, const std::string& where) {
        if (!std::isfinite(loss)) fail(ErrorKind::NonFiniteLoss, "loss became non-finite " + where);
    };

    double best = task_balanced_loss(model, monitor);
    check_finite(best, "at initialization");
    result.model = model;
    result.history.push_back({0, task_balanced_loss(model, joint.shards), best, best});

    std::vector<double> params(model.theta);
    params.insert(params.end(), model.bias.begin(), model.bias.end());
    std::vector<double> grad(params.size());
    detail::Adam adam(params.size(), config);
    std::size_t stall = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        auto batches = batch_iterator(joint, config.batch_size, epoch - 1);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        while (auto batch = batches.next()) {
            std::fill(grad.begin(), grad.end(), 0.0);
            const double scale = 1.0 / static_cast<double>(batch->samples.size());
            double loss = 0.0;
            for (const auto* s : batch->samples) loss += accumulate_gradient(model, *s, scale, grad);
            loss *= scale;
            check_finite(loss, "in epoch " + std::to_string(epoch) + ", batch " + std::to_string(n_batches) +
                                   " (task '" + std::string(batch->task_id) + "')");
            adam.step(params, grad);
            detail::unpack(model, params);
            epoch_loss += loss;
            ++n_batches;
        }
        const double val = task_balanced_loss(model, monitor);
        check_finite(val, "on validation after epoch " + std::to_string(epoch));
        if (val < best) {
            best = val;
            result.model = model;
            result.best_epoch = epoch;
            stall = 0;
        } else {
            ++stall;
        }
        result.history.push_back({epoch, epoch_loss / static_cast<double>(n_batches), val, best});
        if (stall > 0 && stall >= config.patience) {
            result.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    return result;
}

[[nodiscard]] inline FusorModel train_fusor(std::span<const MetaShard> shards, const TrainConfig& config,
                                            std::span<const MetaShard> validation = {}) {
    return train_fusor_detailed(shards, config, validation).model;
}

[[nodiscard]] inline FusorModel train_fusor(const JointMetaDataset& joint, const TrainConfig& config) {
    return train_fusor(joint.shards, config);
}

// ---- serialization ----

namespace detail {

template <class Range>
std::string json_numbers(const Range& values) {
    std::string out = "[";
    bool first = true;
    for (double v : values) {
        if (!first) out += ", ";
        out += g17(v);
        first = false;
    }
    return out + "]";
}

template <class Range>
std::string json_strings(const Range& names) {
    std::string out = "[";
    bool first = true;
    for (const auto& n : names) {
        if (!first) out += ", ";
        out += nlohmann::json(std::string(n)).dump();
        first = false;
    }
    return out + "]";
}

}  // namespace detail

/// JSON text with every float at 17 significant digits.
[[nodiscard]] inline std::string model_to_json(const FusorModel& model) {
    model.validate();
    for (double v : model.theta)
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteLoss, "refusing to serialize non-finite theta");
    std::string out = "{\n";
    out += "  \"format_version\": " + std::to_string(kModelFormatVersion) + ",\n";
    out += "  \"roster\": " + detail::json_strings(model.roster) + ",\n";
    out += "  \"huber_delta\": " + detail::g17(model.huber_delta) + ",\n";
    out += "  \"feature_order\": " + detail::json_strings(kMetaFeatureNames) + ",\n";
    out += "  \"feature_means\": " + detail::json_numbers(model.feature_stats.mean) + ",\n";
    out += "  \"feature_stds\": " + detail::json_numbers(model.feature_stats.std) + ",\n";
    out += "  \"theta\": " + detail::json_numbers(model.theta) + ",\n";
    out += "  \"bias\": " + detail::json_numbers(model.bias) + "\n";
    return out + "}\n";
}

[[nodiscard]] inline FusorModel model_from_json(std::string_view text) {
    FusorModel model;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format_version").get<int>() != kModelFormatVersion) {
            fail(ErrorKind::FormatError, "unsupported model format_version");
        }
        const auto order = j.at("feature_order").get<std::vector<std::string>>();
        if (!std::equal(order.begin(), order.end(), kMetaFeatureNames.begin(), kMetaFeatureNames.end())) {
            fail(ErrorKind::FormatError, "model feature_order differs from the canonical order");
        }
        model.roster = j.at("roster").get<std::vector<std::string>>();
        model.huber_delta = j.at("huber_delta").get<double>();
        const auto means = j.at("feature_means").get<std::vector<double>>();
        const auto stds = j.at("feature_stds").get<std::vector<double>>();
        if (means.size() != kNumMetaFeatures || stds.size() != kNumMetaFeatures) {
            fail(ErrorKind::FormatError, "feature statistics must have 24 entries");
        }
        std::copy(means.begin(), means.end(), model.feature_stats.mean.begin());
        std::copy(stds.begin(), stds.end(), model.feature_stats.std.begin());
        for (auto& s : model.feature_stats.std) s = std::max(s, kStdFloor);
        model.theta = j.at("theta").get<std::vector<double>>();
        model.bias = j.at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::FormatError, std::string("malformed model file: ") + e.what());
    }
    try {
        model.validate();
    } catch (const Error& e) {
        fail(ErrorKind::FormatError, e.what());
    }
    return model;
}

inline void save_model(const std::filesystem::path& path, const FusorModel& model) {
    detail::write_atomically(path, model_to_json(model));
}

[[nodiscard]] inline FusorModel load_model(const std::filesystem::path& path) {
    return model_from_json(detail::read_all(path));
}

/// 24 x k CSV: header "feature,<roster...>", one row per canonical feature.
[[nodiscard]] inline std::string theta_csv(const FusorModel& model) {
    std::string out = "feature";
    for (const auto& name : model.roster) out += "," + name;
    out += "\n";
    for (std::size_t f = 0; f < kNumMetaFeatures; ++f) {
        out += kMetaFeatureNames[f];
        for (std::size_t m = 0; m < model.k(); ++m) out += "," + detail::g17(model.theta_at(f, m));
        out += "\n";
    }
    return out;
}

inline void export_theta(const std::filesystem::path& path, const FusorModel& model) {
    detail::write_atomically(path, theta_csv(model));
}

struct WeightSummary {
    std::string task_id;
    std::vector<double> mean;
    std::vector<double> std;
};

/// Per-model mean and population std of predicted weights over a shard.
[[nodiscard]] inline WeightSummary summarize_weights(const FusorModel& model, const MetaShard& shard) {
    if (shard.schema.roster != model.roster) {
        fail(ErrorKind::RosterMismatch, "shard '" + shard.task_id + "' roster differs from the model's");
    }
    if (shard.samples.empty()) fail(ErrorKind::EmptyDataset, "shard '" + shard.task_id + "' has no samples");
    WeightSummary s{shard.task_id, std::vector<double>(model.k(), 0.0), std::vector<double>(model.k(), 0.0)};
    for (const auto& sample : shard.samples) {
        const auto w = predict_weights(model, sample);
        for (std::size_t m = 0; m < model.k(); ++m) {
            s.mean[m] += w[m];
            s.std[m] += w[m] * w[m];
        }
    }
    const double n = static_cast<double>(shard.size());
    for (std::size_t m = 0; m < model.k(); ++m) {
        s.mean[m] /= n;
        s.std[m] = std::sqrt(std::max(0.0, s.std[m] / n - s.mean[m] * s.mean[m]));
    }
    return s;
}

/// Long CSV: task,model,mean_weight,std_weight.
[[nodiscard]] inline std::string weight_summary_csv(const FusorModel& model, std::span<const WeightSummary> rows) {
    std::string out = "task,model,mean_weight,std_weight\n";
    for (const auto& r : rows) {
        for (std::size_t m = 0; m < model.k(); ++m) {
            out += r.task_id + "," + model.roster[m] + "," + detail::g17(r.mean[m]) + "," + detail::g17(r.std[m]) + "\n";
        }
    }
    return out;
}

}  // namespace timefuse
