#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timefuse/error.hpp"
#include "timefuse/meta_features.hpp"
#include "timefuse/random.hpp"
#include "timefuse/tensor.hpp"

namespace timefuse {

enum class Split { MetaTrain, MetaVal, Test };

[[nodiscard]] constexpr std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::MetaTrain: return "meta_train";
        case Split::MetaVal: return "meta_val";
        case Split::Test: return "test";
    }
    return "meta_train";
}

[[nodiscard]] inline Split parse_split(std::string_view text) {
    if (text == "meta_train") return Split::MetaTrain;
    if (text == "meta_val") return Split::MetaVal;
    if (text == "test") return Split::Test;
    fail(ErrorKind::FormatError, "unknown split '" + std::string(text) + "'");
}

/// Meta-training triplet: features of the input window, stacked zoo forecasts
/// (k x t_out x d) and the ground truth (t_out x d). Stored as float32.
struct MetaSample {
    std::array<float, kNumMetaFeatures> features{};
    std::vector<float> predictions;
    std::vector<float> truth;

    bool operator==(const MetaSample&) const = default;
};

struct ShardSchema {
    std::vector<std::string> roster;
    std::size_t t_out = 0;
    std::size_t d = 0;

    [[nodiscard]] std::size_t k() const noexcept { return roster.size(); }
    [[nodiscard]] std::size_t horizon_size() const noexcept { return t_out * d; }
    bool operator==(const ShardSchema&) const = default;
};

/// All triplets of one task for one split.
struct MetaShard {
    std::string task_id;
    Split split = Split::MetaTrain;
    ShardSchema schema;
    std::vector<MetaSample> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }

    void push_back(MetaSample sample) {
        check_sample(sample);
        samples.push_back(std::move(sample));
    }

    void check_sample(const MetaSample& s) const {
        if (s.predictions.size() != schema.k() * schema.horizon_size() ||
            s.truth.size() != schema.horizon_size()) {
            fail(ErrorKind::ShapeMismatch, "sample does not match the schema of shard '" + task_id + "'");
        }
    }

    void validate() const {
        if (task_id.empty()) fail(ErrorKind::InvalidParameter, "shard task_id must not be empty");
        if (schema.k() < 2) fail(ErrorKind::ShapeMismatch, "shard roster needs at least two models");
        require_unique_roster(schema.roster);
        if (schema.t_out == 0 || schema.d == 0) fail(ErrorKind::ShapeMismatch, "shard horizon is empty");
        for (const auto& s : samples) check_sample(s);
    }
};

/// Packages one triplet after extracting the window's meta-features.
[[nodiscard]] inline MetaSample collect_meta_sample(const TimeSeriesWindow& window,
                                                    const PredictionTensor& predictions,
                                                    const Matrix& truth) {
    require_unique_roster(predictions.roster);
    if (predictions.k() < 2) fail(ErrorKind::ShapeMismatch, "a model zoo needs at least two models");
    if (predictions.values.size() != predictions.k() * predictions.t_out * predictions.d) {
        fail(ErrorKind::ShapeMismatch, "prediction payload does not match k x t_out x d");
    }
    if (truth.rows != predictions.t_out || truth.cols != predictions.d) {
        fail(ErrorKind::ShapeMismatch,
             "truth is " + std::to_string(truth.rows) + "x" + std::to_string(truth.cols) +
                 " but predictions are " + std::to_string(predictions.k()) + "x" +
                 std::to_string(predictions.t_out) + "x" + std::to_string(predictions.d));
    }
    for (double v : predictions.values)
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "prediction contains NaN or Inf");
    for (double v : truth.data)
        if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "truth contains NaN or Inf");

    const auto features = extract_meta_features(window);
    MetaSample sample;
    for (std::size_t i = 0; i < kNumMetaFeatures; ++i) sample.features[i] = static_cast<float>(features[i]);
    sample.predictions.assign(predictions.values.begin(), predictions.values.end());
    sample.truth.assign(truth.data.begin(), truth.data.end());
    return sample;
}

/// Index sequence of length `target`: whole seeded permutations of 0..n-1 laid end to
/// end, the last one truncated. Each index appears floor(target/n) or that plus one times.
[[nodiscard]] inline std::vector<std::size_t> oversample_sequence(std::size_t n, std::size_t target,
                                                                  std::uint64_t seed) {
    std::vector<std::size_t> out;
    out.reserve(target + n);
    std::mt19937_64 rng(seed);
    while (out.size() < target) {
        const auto perm = seeded_permutation(n, rng);
        out.insert(out.end(), perm.begin(), perm.end());
    }
    out.resize(target);
    return out;
}

/// All task shards oversampled to the size of the largest one.
struct JointMetaDataset {
    std::vector<MetaShard> shards;
    std::size_t target_size = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> oversample_indices;

    /// Epoch 0 uses oversample_indices; later epochs draw fresh permutations.
    [[nodiscard]] std::vector<std::vector<std::size_t>> epoch_indices(std::uint64_t epoch) const {
        if (epoch == 0) return oversample_indices;
        std::vector<std::vector<std::size_t>> out;
        for (std::size_t s = 0; s < shards.size(); ++s) {
            out.push_back(oversample_sequence(shards[s].size(), target_size,
                                              mix_seed(mix_seed(seed, s), epoch)));
        }
        return out;
    }

    [[nodiscard]] const std::vector<std::string>& roster() const { return shards.front().schema.roster; }
};

[[nodiscard]] inline JointMetaDataset build_joint_dataset(std::vector<MetaShard> shards, std::uint64_t seed) {
    if (shards.empty()) fail(ErrorKind::EmptyDataset, "joint dataset needs at least one shard");
    for (const auto& shard : shards) {
        shard.validate();
        if (shard.samples.empty()) {
            fail(ErrorKind::EmptyDataset, "shard '" + shard.task_id + "' has no samples");
        }
        if (shard.schema.roster != shards.front().schema.roster) {
            fail(ErrorKind::RosterMismatch, "shard '" + shard.task_id + "' roster differs from shard '" +
                                                shards.front().task_id + "'");
        }
    }
    JointMetaDataset joint;
    joint.seed = seed;
    for (const auto& shard : shards) joint.target_size = std::max(joint.target_size, shard.size());
    for (std::size_t s = 0; s < shards.size(); ++s) {
        joint.oversample_indices.push_back(
            oversample_sequence(shards[s].size(), joint.target_size, mix_seed(seed, s)));
    }
    joint.shards = std::move(shards);
    return joint;
}

struct Batch {
    std::size_t task_index = 0;
    std::string_view task_id;
    std::vector<const MetaSample*> samples;
};

/// Round-robin stream over one epoch: batch 0 of every task, then batch 1 of every
/// task, and so on. Each task contributes exactly target_size samples, the last batch
/// of a task possibly short.
class BatchIterator {
public:
    BatchIterator(const JointMetaDataset& joint, std::size_t batch_size, std::uint64_t epoch)
        : joint_(&joint), batch_size_(batch_size), indices_(joint.epoch_indices(epoch)) {
        if (batch_size_ == 0) fail(ErrorKind::InvalidParameter, "batch size must be positive");
        batches_per_task_ = (joint.target_size + batch_size_ - 1) / batch_size_;
    }

    [[nodiscard]] std::size_t batches_per_task() const noexcept { return batches_per_task_; }
    [[nodiscard]] std::size_t total_batches() const noexcept {
        return batches_per_task_ * joint_->shards.size();
    }

    std::optional<Batch> next() {
        const std::size_t tasks = joint_->shards.size();
        if (cursor_ >= total_batches()) return std::nullopt;
        const std::size_t task = cursor_ % tasks;
        const std::size_t round = cursor_ / tasks;
        ++cursor_;
        const std::size_t begin = round * batch_size_;
        const std::size_t end = std::min(begin + batch_size_, joint_->target_size);
        const auto& shard = joint_->shards[task];
        Batch batch{task, shard.task_id, {}};
        batch.samples.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) batch.samples.push_back(&shard.samples[indices_[task][i]]);
        return batch;
    }

private:
    const JointMetaDataset* joint_;
    std::size_t batch_size_;
    std::vector<std::vector<std::size_t>> indices_;
    std::size_t batches_per_task_ = 0;
    std::size_t cursor_ = 0;
};

[[nodiscard]] inline BatchIterator batch_iterator(const JointMetaDataset& joint, std::size_t batch_size,
                                                  std::uint64_t epoch) {
    return BatchIterator(joint, batch_size, epoch);
}

/// Number of samples held out from a task of n samples for the fusor's early stopping.
[[nodiscard]] inline std::size_t validation_count(std::size_t n) noexcept {
    if (n < 2) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
}

struct TrainValSplit {
    MetaShard train;
    MetaShard val;
};

/// Seeded 10% carve-out of a meta-training shard.
[[nodiscard]] inline TrainValSplit carve_validation(const MetaShard& shard, std::uint64_t seed) {
    TrainValSplit out{MetaShard{shard.task_id, Split::MetaTrain, shard.schema, {}},
                      MetaShard{shard.task_id, Split::MetaVal, shard.schema, {}}};
    std::mt19937_64 rng(seed);
    const auto perm = seeded_permutation(shard.size(), rng);
    const std::size_t n_val = validation_count(shard.size());
    std::vector<bool> is_val(shard.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[perm[i]] = true;
    for (std::size_t i = 0; i < shard.size(); ++i) {
        (is_val[i] ? out.val : out.train).samples.push_back(shard.samples[i]);
    }
    return out;
}

}  // namespace timefuse
