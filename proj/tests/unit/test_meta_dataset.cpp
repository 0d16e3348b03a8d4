#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "support/generators.hpp"
#include "support/shards.hpp"
#include "timefuse/meta_dataset.hpp"

using namespace timefuse;

namespace {

PredictionTensor zoo(std::vector<std::string> roster, std::size_t t_out, std::size_t d) {
    PredictionTensor p;
    p.values.resize(roster.size() * t_out * d);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = 0.5 * static_cast<double>(i);
    p.roster = std::move(roster);
    p.t_out = t_out;
    p.d = d;
    return p;
}

TimeSeriesWindow ramp_window(std::size_t t, std::size_t d) {
    std::vector<double> v(t * d);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.3 * static_cast<double>(i));
    return TimeSeriesWindow(t, d, v);
}

std::vector<Batch> drain(BatchIterator it) {
    std::vector<Batch> out;
    while (auto b = it.next()) out.push_back(*b);
    return out;
}

}  // namespace

TEST_CASE("collect_meta_sample packages the triplet", "[meta_dataset]") {
    const auto w = ramp_window(32, 1);
    const auto s = collect_meta_sample(w, zoo({"m1", "m2"}, 4, 1), Matrix{4, 1, {1, 2, 3, 4}});
    CHECK(s.features.size() == 24);
    CHECK(s.predictions.size() == 2 * 4 * 1);
    CHECK(s.truth == std::vector<float>{1, 2, 3, 4});
    const auto direct = extract_meta_features(w);
    for (std::size_t i = 0; i < 24; ++i) CHECK(s.features[i] == static_cast<float>(direct[i]));
    CHECK(s.predictions[7] == 3.5f);
}

TEST_CASE("collect_meta_sample rejects bad shapes and rosters", "[meta_dataset]") {
    const auto w = ramp_window(32, 1);
    CHECK_THROWS_MATCHES(collect_meta_sample(w, zoo({"m", "m"}, 4, 1), Matrix{4, 1, std::vector<double>(4)}),
                         Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::DuplicateModelName;
                         }));
    CHECK_THROWS_MATCHES(collect_meta_sample(w, zoo({"m1", "m2"}, 4, 1), Matrix{5, 1, std::vector<double>(5)}),
                         Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.kind() == ErrorKind::ShapeMismatch;
                         }));
    CHECK_THROWS_AS(collect_meta_sample(w, zoo({"m1"}, 4, 1), Matrix{4, 1, std::vector<double>(4)}), Error);
    auto bad = zoo({"m1", "m2"}, 4, 1);
    bad.values[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(collect_meta_sample(w, bad, Matrix{4, 1, std::vector<double>(4)}), Error);
}

TEST_CASE("oversampling matches the largest shard", "[meta_dataset]") {
    auto joint = build_joint_dataset({testgen::random_shard("A", 100, 1), testgen::random_shard("B", 40, 2)}, 7);
    CHECK(joint.target_size == 100);
    for (const auto& seq : joint.oversample_indices) CHECK(seq.size() == 100);

    // B: 100 = 2*40 + 20, so every index appears 2 or 3 times.
    std::map<std::size_t, int> counts;
    for (auto i : joint.oversample_indices[1]) ++counts[i];
    CHECK(counts.size() == 40);
    for (auto [idx, c] : counts) CHECK((c == 2 || c == 3));
}

TEST_CASE("single shard is covered exactly once", "[meta_dataset]") {
    auto joint = build_joint_dataset({testgen::random_shard("A", 10, 1)}, 3);
    CHECK(joint.target_size == 10);
    std::multiset<std::size_t> seen(joint.oversample_indices[0].begin(), joint.oversample_indices[0].end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("minority repetition counts follow floor and ceil", "[meta_dataset]") {
    for (std::uint64_t seed : {0u, 1u, 99u, 12345u}) {
        auto joint = build_joint_dataset({testgen::random_shard("A", 10, 1), testgen::random_shard("B", 3, 2)}, seed);
        std::map<std::size_t, int> counts;
        for (auto i : joint.oversample_indices[1]) ++counts[i];
        int fours = 0;
        for (auto [idx, c] : counts) {
            CHECK((c == 3 || c == 4));
            fours += c == 4;
        }
        CHECK(fours == 1);
    }
}

TEST_CASE("roster disagreement is rejected", "[meta_dataset]") {
    CHECK_THROWS_MATCHES(
        build_joint_dataset({testgen::random_shard("A", 5, 1), testgen::random_shard("B", 5, 2, {"a", "c", "b"})}, 0),
        Error, Catch::Matchers::Predicate<Error>([](const Error& e) { return e.kind() == ErrorKind::RosterMismatch; }));
    CHECK_THROWS_AS(build_joint_dataset({}, 0), Error);
}

TEST_CASE("heterogeneous horizons share a joint dataset", "[meta_dataset]") {
    auto joint = build_joint_dataset(
        {testgen::random_shard("short", 6, 1, {"a", "b", "c"}, 4, 1),
         testgen::random_shard("long", 9, 2, {"a", "b", "c"}, 12, 3)}, 0);
    CHECK(joint.target_size == 9);
}

TEST_CASE("batches alternate round-robin across tasks", "[meta_dataset]") {
    auto joint = build_joint_dataset({testgen::random_shard("T1", 4, 1), testgen::random_shard("T2", 3, 2)}, 5);
    const auto batches = drain(batch_iterator(joint, 2, 0));
    REQUIRE(batches.size() == 4);
    CHECK(batches[0].task_id == "T1");
    CHECK(batches[1].task_id == "T2");
    CHECK(batches[2].task_id == "T1");
    CHECK(batches[3].task_id == "T2");

    auto joint3 = build_joint_dataset(
        {testgen::random_shard("A", 7, 1), testgen::random_shard("B", 2, 2), testgen::random_shard("C", 5, 3)}, 5);
    const auto b3 = drain(batch_iterator(joint3, 3, 1));
    CHECK(b3.size() == 9);
    for (std::size_t n = 0; n < b3.size(); ++n) CHECK(b3[n].task_index == n % 3);
}

TEST_CASE("each task contributes target_size samples per epoch", "[meta_dataset]") {
    auto joint = build_joint_dataset(
        {testgen::random_shard("A", 100, 1), testgen::random_shard("B", 17, 2), testgen::random_shard("C", 33, 3)}, 11);
    for (std::uint64_t epoch : {0u, 1u, 4u}) {
        std::map<std::size_t, std::size_t> per_task;
        std::map<std::size_t, std::set<float>> covered;
        for (const auto& b : drain(batch_iterator(joint, 32, epoch))) {
            per_task[b.task_index] += b.samples.size();
            for (const auto* s : b.samples) covered[b.task_index].insert(s->features[0]);
        }
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(per_task[t] == 100);
            CHECK(covered[t].size() == joint.shards[t].size());
        }
    }
}

TEST_CASE("trailing short batch is emitted", "[meta_dataset]") {
    auto joint = build_joint_dataset({testgen::random_shard("A", 10, 1)}, 0);
    const auto b = drain(batch_iterator(joint, 4, 0));
    REQUIRE(b.size() == 3);
    CHECK(b[2].samples.size() == 2);
    CHECK_THROWS_AS(batch_iterator(joint, 0, 0), Error);
}

TEST_CASE("batch stream is deterministic in the seed", "[meta_dataset]") {
    auto make = [](std::uint64_t seed) {
        return build_joint_dataset({testgen::random_shard("A", 20, 1), testgen::random_shard("B", 7, 2)}, seed);
    };
    auto contents = [](const JointMetaDataset& j, std::uint64_t epoch) {
        std::vector<MetaSample> out;
        for (const auto& b : drain(batch_iterator(j, 3, epoch)))
            for (const auto* s : b.samples) out.push_back(*s);
        return out;
    };
    const auto j1 = make(42), j2 = make(42), j3 = make(43);
    CHECK(contents(j1, 0) == contents(j2, 0));
    CHECK(contents(j1, 2) == contents(j2, 2));
    CHECK(j1.oversample_indices != j3.oversample_indices);
    CHECK(j1.epoch_indices(1) != j1.epoch_indices(2));
}

TEST_CASE("validation carve-out holds out ten percent per task", "[meta_dataset]") {
    CHECK(validation_count(0) == 0);
    CHECK(validation_count(1) == 0);
    CHECK(validation_count(2) == 1);
    CHECK(validation_count(17) == 2);
    CHECK(validation_count(100) == 10);

    const auto shard = testgen::random_shard("A", 50, 1);
    const auto split = carve_validation(shard, 9);
    CHECK(split.train.size() == 45);
    CHECK(split.val.size() == 5);
    std::set<float> ids;
    for (const auto& s : split.train.samples) ids.insert(s.features[0]);
    for (const auto& s : split.val.samples) ids.insert(s.features[0]);
    CHECK(ids.size() == 50);
    CHECK(carve_validation(shard, 9).val.samples == split.val.samples);
}
