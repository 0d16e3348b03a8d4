// Writes a small synthetic benchmark in the CLI's interchange formats:
//   <out>/<task>/<split>/windows.csv, truths.csv, predictions/<model>.{bin,json}
// Each task mixes seasonal, AR(1) and random-walk series; the zoo is
// seasonal-naive, AR(1) and last-value, so no single model wins everywhere.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "timefuse/timefuse.hpp"

namespace fs = std::filesystem;
using namespace timefuse;

namespace {

std::vector<SyntheticTaskSpec> demo_suite(std::size_t t_in, std::size_t t_out) {
    std::vector<SyntheticTaskSpec> suite{
        {"retail", {{Regime::Seasonal, 0.7}, {Regime::RandomWalk, 0.3}}},
        {"sensors", {{Regime::Autoregressive, 0.7}, {Regime::RandomWalk, 0.3}}},
        {"markets", {{Regime::RandomWalk, 0.6}, {Regime::Autoregressive, 0.2}, {Regime::Seasonal, 0.2}}},
    };
    suite[0].level = 10.0;
    suite[1].level = 5.0;
    suite[2].level = 20.0;
    for (auto& s : suite) {
        s.t_in = t_in;
        s.t_out = t_out;
    }
    return suite;
}

void write_split(const fs::path& dir, const SyntheticTaskSpec& spec, std::size_t n, std::uint64_t seed,
                 const std::vector<ZooMethod>& zoo) {
    fs::create_directories(dir / "predictions");
    const auto samples = generate_synthetic_task(spec, n, seed);
    std::vector<std::string> ids;
    std::vector<std::vector<double>> windows, truths;
    std::vector<PredictionFile> files;
    for (const auto& m : zoo) files.push_back({m.name(), n, spec.t_out, spec.d, {}});
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "%s-%05zu", spec.task_id.c_str(), i);
        ids.emplace_back(id);
        windows.push_back(samples[i].window);
        truths.push_back(samples[i].truth);
        const TimeSeriesWindow window(spec.t_in, spec.d, samples[i].window);
        for (std::size_t m = 0; m < zoo.size(); ++m) {
            const auto f = synthetic_zoo_forecast(window, zoo[m], spec.t_out);
            files[m].values.insert(files[m].values.end(), f.data.begin(), f.data.end());
        }
    }
    detail::write_atomically(dir / "windows.csv", long_csv(ids, spec.t_in, spec.d, windows));
    detail::write_atomically(dir / "truths.csv", long_csv(ids, spec.t_out, spec.d, truths));
    for (const auto& f : files) write_prediction_file(dir / "predictions", f);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timefuse_demo: generate a synthetic multi-task forecasting benchmark"};
    std::string out;
    std::uint64_t seed = 0;
    std::size_t n_train = 300, n_val = 60, n_test = 150, t_in = 96, t_out = 24;
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
    app.add_option("--train", n_train, "meta_train samples per task")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--val", n_val, "meta_val samples per task (0 skips the split)")->capture_default_str();
    app.add_option("--test", n_test, "test samples per task")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--t-in", t_in, "window length")->capture_default_str()->check(CLI::Range(8, 100000));
    app.add_option("--t-out", t_out, "forecast horizon")->capture_default_str()->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        const auto zoo = default_zoo();
        const auto suite = demo_suite(t_in, t_out);
        for (std::size_t t = 0; t < suite.size(); ++t) {
            const auto& spec = suite[t];
            const fs::path base = fs::path(out) / spec.task_id;
            write_split(base / "meta_train", spec, n_train, mix_seed(seed, 3 * t), zoo);
            if (n_val > 0) write_split(base / "meta_val", spec, n_val, mix_seed(seed, 3 * t + 1), zoo);
            write_split(base / "test", spec, n_test, mix_seed(seed, 3 * t + 2), zoo);
            std::printf("%s: %zu train / %zu val / %zu test -> %s\n", spec.task_id.c_str(), n_train, n_val, n_test,
                        base.string().c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 70;
    }
    return 0;
}
