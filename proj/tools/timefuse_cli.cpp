// timefuse: extract | collect | train | fuse | report
//
// Exit codes: 0 ok, 2 completed with warnings, 64 usage, 65 bad input data,
// 70 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timefuse/timefuse.hpp"

namespace fs = std::filesystem;
using namespace timefuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitWarnings = 2;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitNumeric = 70;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::UnknownMethod:
        case ErrorKind::InvalidParameter:
        case ErrorKind::KOutOfRange: return kExitUsage;
        case ErrorKind::NonFiniteLoss: return kExitNumeric;
        default: return kExitData;
    }
}

struct Globals {
    std::uint64_t seed = 0;
    bool quiet = false;
    std::size_t threads = 0;
};

struct Log {
    bool quiet = false;
    template <class... Args>
    void operator()(const char* fmt, Args... args) const {
        if (quiet) return;
        std::printf(fmt, args...);
        std::fflush(stdout);
    }
};

/// Outputs go into existing directories only; checked before any work starts.
void require_output_dir(const std::string& path) {
    const auto parent = fs::absolute(path).parent_path();
    if (!fs::is_directory(parent)) fail(ErrorKind::InvalidParameter, "output directory " + parent.string() + " does not exist");
}

void write_text(const std::string& path, const std::string& text) { detail::write_atomically(path, text); }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto part : detail::split(text, ',')) out.emplace_back(part);
    return out;
}

std::vector<std::string> index_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return ids;
}

// ---- train flags shared by train and report --holdout ----

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", cfg.batch_size, "samples per batch")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--max-epochs", cfg.max_epochs, "epoch budget (0 keeps the uniform initialization)")->capture_default_str();
    cmd->add_option("--patience", cfg.patience, "epochs without validation improvement before stopping")->capture_default_str();
    cmd->add_option("--huber-delta", cfg.huber_delta, "Huber loss threshold")->capture_default_str()->check(CLI::PositiveNumber);
}

/// Shards grouped by split; shards of the same task and split are concatenated.
struct ShardSet {
    std::vector<MetaShard> train, val, test;
};

ShardSet load_shards(const std::vector<std::string>& paths) {
    ShardSet set;
    for (const auto& p : paths) {
        auto shard = read_shard(p);
        auto& bucket = shard.split == Split::MetaTrain ? set.train : shard.split == Split::MetaVal ? set.val : set.test;
        const auto same = std::find_if(bucket.begin(), bucket.end(), [&](const MetaShard& s) { return s.task_id == shard.task_id; });
        if (same == bucket.end()) {
            bucket.push_back(std::move(shard));
        } else {
            if (!(same->schema == shard.schema)) {
                fail(ErrorKind::ShapeMismatch, "shards of task '" + shard.task_id + "' disagree on roster or horizon");
            }
            same->samples.insert(same->samples.end(), shard.samples.begin(), shard.samples.end());
        }
    }
    return set;
}

// ---- extract ----

struct ExtractArgs {
    std::string windows, out;
};

int cmd_extract(const ExtractArgs& a, const Globals& g) {
    require_output_dir(a.out);
    const auto table = read_long_csv(a.windows);
    const auto windows = to_windows(table);
    std::vector<MetaFeatureVector> rows(windows.size());
    parallel_for(windows.size(), resolve_threads(g.threads), [&](std::size_t i) {
        try {
            rows[i] = extract_meta_features(windows[i]);
        } catch (const Error& e) {
            fail(e.kind(), "window '" + table.ids[i] + "': " + e.what());
        }
    });
    write_text(a.out, features_csv(table.ids, rows));
    Log{g.quiet}("extracted %zu windows (T=%zu, d=%zu) -> %s\n", windows.size(), table.length, table.d, a.out.c_str());
    return kExitOk;
}

// ---- collect ----

struct CollectArgs {
    std::string windows, predictions, truths, task, out, models, split = "meta_train";
};

int cmd_collect(const CollectArgs& a, const Globals& g) {
    const Split split = [&] {
        try {
            return parse_split(a.split);
        } catch (const Error&) {
            fail(ErrorKind::InvalidParameter, "--split must be meta_train, meta_val or test");
        }
    }();
    if (a.task.empty()) fail(ErrorKind::InvalidParameter, "--task must not be empty");
    require_output_dir(a.out);

    const auto wtable = read_long_csv(a.windows);
    const auto ttable = read_long_csv(a.truths);
    if (ttable.ids != wtable.ids) {
        fail(ErrorKind::ShapeMismatch, "truth sample ids do not match window sample ids (" + std::to_string(ttable.size()) +
                                           " vs " + std::to_string(wtable.size()) + " samples)");
    }
    const auto windows = to_windows(wtable);
    const auto roster = a.models.empty() ? discover_roster(a.predictions) : split_list(a.models);
    require_unique_roster(roster);
    if (roster.size() < 2) fail(ErrorKind::ShapeMismatch, "a model zoo needs at least two models, found " + std::to_string(roster.size()));

    std::vector<PredictionFile> files;
    for (const auto& m : roster) {
        auto f = read_prediction_file(a.predictions, m);
        if (f.n_samples != wtable.size() || f.t_out != ttable.length || f.d != ttable.d) {
            fail(ErrorKind::ShapeMismatch, "model '" + m + "' predicts " + std::to_string(f.n_samples) + "x" +
                                               std::to_string(f.t_out) + "x" + std::to_string(f.d) + ", expected " +
                                               std::to_string(wtable.size()) + "x" + std::to_string(ttable.length) + "x" +
                                               std::to_string(ttable.d));
        }
        files.push_back(std::move(f));
    }

    MetaShard shard{a.task, split, {roster, ttable.length, ttable.d}, {}};
    shard.samples.resize(windows.size());
    const std::size_t h = ttable.length * ttable.d;
    parallel_for(windows.size(), resolve_threads(g.threads), [&](std::size_t i) {
        PredictionTensor p;
        p.roster = roster;
        p.t_out = ttable.length;
        p.d = ttable.d;
        for (const auto& f : files) p.values.insert(p.values.end(), f.values.begin() + i * h, f.values.begin() + (i + 1) * h);
        try {
            shard.samples[i] = collect_meta_sample(windows[i], p, Matrix{ttable.length, ttable.d, ttable.values[i]});
        } catch (const Error& e) {
            fail(e.kind(), "sample '" + wtable.ids[i] + "': " + e.what());
        }
    });
    const auto bytes = encode_shard(shard);
    write_text(a.out, bytes);
    Log{g.quiet}("collected task '%s' (%s): %zu samples, k=%zu [%s], t_out=%zu, d=%zu -> %s\n", a.task.c_str(),
                 std::string(to_string(split)).c_str(), shard.size(), roster.size(),
                 [&] {
                     std::string s;
                     for (const auto& m : roster) s += (s.empty() ? "" : ",") + m;
                     return s;
                 }()
                     .c_str(),
                 ttable.length, ttable.d, a.out.c_str());
    return kExitOk;
}

// ---- train ----

struct TrainArgs {
    std::vector<std::string> shards;
    std::string out, export_theta, weights_summary;
    TrainConfig config;
};

int cmd_train(TrainArgs a, const Globals& g) {
    require_output_dir(a.out);
    if (!a.export_theta.empty()) require_output_dir(a.export_theta);
    if (!a.weights_summary.empty()) require_output_dir(a.weights_summary);
    a.config.seed = g.seed;
    a.config.validate();

    auto set = load_shards(a.shards);
    if (!set.test.empty()) fail(ErrorKind::InvalidParameter, "test shard '" + set.test.front().task_id + "' cannot be used for training");
    if (set.train.empty()) fail(ErrorKind::EmptyDataset, "no meta_train shards given");

    const Log log{g.quiet};
    const auto result = train_fusor_detailed(set.train, a.config, set.val);
    log("tasks:");
    for (const auto& [task, n] : result.task_sizes) log(" %s=%zu", task.c_str(), n);
    log("\noversampled to %zu samples per task; %zu batches per task per epoch (batch size %zu)\n", result.target_size,
        result.batches_per_task, a.config.batch_size);
    if (result.validation_from_training) log("no held-out samples; early stopping monitors the training loss\n");
    for (const auto& e : result.history) {
        log("epoch %3zu  train %.6g  val %.6g%s\n", e.epoch, e.train_loss, e.val_loss,
            e.epoch == result.best_epoch ? "  *" : "");
    }
    log("selected epoch %zu (val loss %.6g)%s\n", result.best_epoch, result.history[result.best_epoch].val_loss,
        result.stopped_early ? ", stopped early" : "");

    std::string summary;
    if (!a.weights_summary.empty()) {
        std::vector<WeightSummary> rows;
        for (const auto& s : set.train) rows.push_back(summarize_weights(result.model, s));
        summary = weight_summary_csv(result.model, rows);
    }
    save_model(a.out, result.model);
    if (!a.export_theta.empty()) export_theta(a.export_theta, result.model);
    if (!a.weights_summary.empty()) write_text(a.weights_summary, summary);
    log("model -> %s\n", a.out.c_str());
    return kExitOk;
}

// ---- fuse ----

struct FuseArgs {
    std::string model, shard, windows, predictions, models, out, emit_weights;
};

int cmd_fuse(const FuseArgs& a, const Globals& g) {
    if (a.shard.empty() == a.windows.empty()) fail(ErrorKind::InvalidParameter, "give either --shard or --windows with --predictions");
    if (!a.windows.empty() && a.predictions.empty()) fail(ErrorKind::InvalidParameter, "--windows needs --predictions");
    require_output_dir(a.out);
    if (!a.emit_weights.empty()) require_output_dir(a.emit_weights);
    const auto model = load_model(a.model);
    const std::size_t threads = resolve_threads(g.threads);

    std::vector<std::string> ids;
    std::vector<std::vector<double>> fused, weights;
    std::size_t t_out = 0, d = 0;
    auto check_roster = [&](const std::vector<std::string>& roster) {
        if (roster != model.roster) {
            std::string want, got;
            for (const auto& m : model.roster) want += (want.empty() ? "" : ",") + m;
            for (const auto& m : roster) got += (got.empty() ? "" : ",") + m;
            fail(ErrorKind::RosterMismatch, "input roster [" + got + "] differs from model roster [" + want + "]");
        }
    };

    if (!a.shard.empty()) {
        const auto shard = read_shard(a.shard);
        check_roster(shard.schema.roster);
        t_out = shard.schema.t_out;
        d = shard.schema.d;
        ids = index_ids(shard.size());
        fused.resize(shard.size());
        weights.resize(shard.size());
        parallel_for(shard.size(), threads, [&](std::size_t i) {
            weights[i] = predict_weights(model, shard.samples[i]);
            fused[i] = fuse(weights[i], shard.samples[i]);
        });
    } else {
        const auto roster = a.models.empty() ? model.roster : split_list(a.models);
        check_roster(roster);
        const auto table = read_long_csv(a.windows);
        const auto windows = to_windows(table);
        std::vector<PredictionFile> files;
        for (const auto& m : roster) {
            auto f = read_prediction_file(a.predictions, m);
            if (!files.empty() && (f.t_out != files.front().t_out || f.d != files.front().d)) {
                fail(ErrorKind::ShapeMismatch, "model '" + m + "' horizon " + std::to_string(f.t_out) + "x" + std::to_string(f.d) +
                                                   " disagrees with model '" + files.front().model + "'");
            }
            if (f.n_samples != table.size()) {
                fail(ErrorKind::ShapeMismatch, "model '" + m + "' has " + std::to_string(f.n_samples) + " samples, windows file has " +
                                                   std::to_string(table.size()));
            }
            files.push_back(std::move(f));
        }
        t_out = files.front().t_out;
        d = files.front().d;
        const std::size_t h = t_out * d;
        ids = table.ids;
        fused.resize(windows.size());
        weights.resize(windows.size());
        parallel_for(windows.size(), threads, [&](std::size_t i) {
            const auto features = extract_meta_features(windows[i]);
            weights[i] = predict_weights(model, features);
            std::vector<double> stacked;
            for (const auto& f : files) stacked.insert(stacked.end(), f.values.begin() + i * h, f.values.begin() + (i + 1) * h);
            fused[i] = fuse_slices<double>(weights[i], stacked, h);
        });
    }
    const auto out_text = long_csv(ids, t_out, d, fused);
    const auto weight_text = a.emit_weights.empty() ? std::string() : weights_csv(model.roster, ids, weights);
    write_text(a.out, out_text);
    if (!a.emit_weights.empty()) write_text(a.emit_weights, weight_text);
    Log{g.quiet}("fused %zu samples (t_out=%zu, d=%zu) -> %s\n", ids.size(), t_out, d, a.out.c_str());
    return kExitOk;
}

// ---- report ----

struct ReportArgs {
    std::vector<std::string> shards;
    std::string model, methods = "fused,mean,median,best-individual", out, rank_out, holdout;
    TrainConfig config;
};

int cmd_report(ReportArgs a, const Globals& g) {
    auto methods = parse_methods(a.methods);
    require_output_dir(a.out);
    if (!a.rank_out.empty()) require_output_dir(a.rank_out);
    const bool wants_fused = std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) { return m.kind == MethodKind::Fused; });
    if (wants_fused && a.model.empty() && a.holdout.empty()) {
        fail(ErrorKind::InvalidParameter, "method 'fused' needs --model (or use --holdout)");
    }
    a.config.seed = g.seed;
    a.config.validate();
    const std::size_t threads = resolve_threads(g.threads);

    std::optional<FusorModel> model;
    if (!a.model.empty()) model = load_model(a.model);
    auto set = load_shards(a.shards);
    if (set.test.empty()) fail(ErrorKind::InvalidParameter, "report needs at least one test shard");
    std::vector<MetaShard> validation = set.train;
    validation.insert(validation.end(), set.val.begin(), set.val.end());

    const Log log{g.quiet};
    Leaderboard board;
    std::vector<std::pair<std::string, RankFirstReport>> ranks;
    std::vector<std::vector<double>> all_fused;
    std::vector<MetaShard> ranked_tests;

    if (!a.holdout.empty()) {
        if (wants_fused && !model) {
            methods.erase(std::remove_if(methods.begin(), methods.end(), [](const MethodSpec& m) { return m.kind == MethodKind::Fused; }),
                          methods.end());
        }
        const auto zs = zero_shot_protocol(set.train, set.test, a.holdout, a.config, threads);
        const auto& target = *std::find_if(set.test.begin(), set.test.end(), [&](const MetaShard& s) { return s.task_id == a.holdout; });
        EvaluationContext ctx{model ? &*model : nullptr, validation, threads};
        board.tasks.push_back(a.holdout);
        board.cells.emplace_back();
        for (const auto& m : methods) {
            board.methods.push_back(m.label);
            board.cells.back().push_back(evaluate_method(ctx, m, target));
        }
        board.methods.push_back("normal-fused");
        board.cells.back().push_back(zs.normal);
        board.methods.push_back("zeroshot-fused");
        board.cells.back().push_back(zs.zero_shot);
        ctx.model = &zs.zero_shot_model;
        const auto fused = predict_method(ctx, {MethodKind::Fused, 0, "fused"}, target);
        const std::vector<MetaShard> one{target};
        ranks.emplace_back(a.holdout, rank_first_analysis(one, fused, threads));
        log("holdout %s: normal-fused mse %.6g, zeroshot-fused mse %.6g, uniform mse %.6g, best individual (%s) mse %.6g\n",
            a.holdout.c_str(), zs.normal.mse, zs.zero_shot.mse, zs.uniform.mse, zs.best_model.c_str(), zs.best_individual.mse);
    } else {
        for (const auto& m : methods) board.methods.push_back(m.label);
        const EvaluationContext ctx{model ? &*model : nullptr, validation, threads};
        for (const auto& test : set.test) {
            board.tasks.push_back(test.task_id);
            board.cells.emplace_back();
            for (const auto& m : methods) board.cells.back().push_back(evaluate_method(ctx, m, test));
            const std::vector<MetaShard> one{test};
            if (model) {
                const auto fused = predict_method(ctx, {MethodKind::Fused, 0, "fused"}, test);
                ranks.emplace_back(test.task_id, rank_first_analysis(one, fused, threads));
                all_fused.insert(all_fused.end(), fused.begin(), fused.end());
            } else {
                ranks.emplace_back(test.task_id, rank_first_analysis(one, {}, threads));
            }
        }
        if (set.test.size() > 1) ranks.emplace_back("all", rank_first_analysis(set.test, all_fused, threads));
    }

    bool warn = false;
    for (std::size_t t = 0; t < board.tasks.size(); ++t) {
        for (std::size_t m = 0; m < board.methods.size(); ++m) {
            const auto& r = board.cells[t][m];
            if (!r.mape) {
                warn = true;
                std::fprintf(stderr, "warning: MAPE undefined for %s/%s (all truths ~0)\n", board.tasks[t].c_str(),
                             board.methods[m].c_str());
            } else if (r.mape_elements < r.elements) {
                warn = true;
                std::fprintf(stderr, "warning: MAPE for %s/%s skipped %zu of %zu near-zero truths\n", board.tasks[t].c_str(),
                             board.methods[m].c_str(), r.elements - r.mape_elements, r.elements);
            }
            log("%-12s %-18s mse %-12.6g mae %-12.6g\n", board.tasks[t].c_str(), board.methods[m].c_str(), r.mse, r.mae);
        }
    }
    const auto roster = set.test.front().schema.roster;
    const auto board_text = leaderboard_csv(board);
    const auto rank_text = rank_first_csv(roster, ranks);
    write_text(a.out, board_text);
    if (!a.rank_out.empty()) write_text(a.rank_out, rank_text);
    log("leaderboard -> %s\n", a.out.c_str());
    return warn ? kExitWarnings : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timefuse: sample-level fusion of forecasting models"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed for every stochastic step")->capture_default_str();
    app.add_flag("--quiet", g.quiet, "suppress progress output");
    app.add_option("--threads", g.threads, "worker threads (default: TIMEFUSE_THREADS, else all cores)");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "compute the 24 meta-features of each window");
    extract->add_option("--windows", ex.windows, "long-format window CSV")->required()->check(CLI::ExistingFile);
    extract->add_option("--out", ex.out, "feature CSV to write")->required();

    CollectArgs co;
    auto* collect = app.add_subcommand("collect", "build a meta-training shard from windows, zoo forecasts and truths");
    collect->add_option("--windows", co.windows, "long-format window CSV")->required()->check(CLI::ExistingFile);
    collect->add_option("--predictions", co.predictions, "directory of <model>.bin + <model>.json")->required()->check(CLI::ExistingDirectory);
    collect->add_option("--truths", co.truths, "long-format truth CSV")->required()->check(CLI::ExistingFile);
    collect->add_option("--task", co.task, "task id")->required();
    collect->add_option("--out", co.out, "shard file to write")->required();
    collect->add_option("--models", co.models, "comma-separated roster (default: sorted sidecars)");
    collect->add_option("--split", co.split, "meta_train | meta_val | test")->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "train the fusor jointly on meta_train shards");
    train->add_option("shards", tr.shards, "shard files (meta_val shards are used for early stopping)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", tr.out, "model JSON to write")->required();
    train->add_option("--export-theta", tr.export_theta, "also write the 24 x k weight matrix as CSV");
    train->add_option("--weights-summary", tr.weights_summary, "also write per-task mean/std of predicted weights");
    add_train_flags(train, tr.config);

    FuseArgs fu;
    auto* fuse_cmd = app.add_subcommand("fuse", "apply a trained fusor");
    fuse_cmd->add_option("--model", fu.model, "model JSON")->required()->check(CLI::ExistingFile);
    fuse_cmd->add_option("--shard", fu.shard, "shard whose samples to fuse")->check(CLI::ExistingFile);
    fuse_cmd->add_option("--windows", fu.windows, "long-format window CSV (live inputs)")->check(CLI::ExistingFile);
    fuse_cmd->add_option("--predictions", fu.predictions, "prediction directory (live inputs)")->check(CLI::ExistingDirectory);
    fuse_cmd->add_option("--models", fu.models, "comma-separated roster; must equal the model's");
    fuse_cmd->add_option("--out", fu.out, "long-format CSV of fused forecasts")->required();
    fuse_cmd->add_option("--emit-weights", fu.emit_weights, "also write per-sample fusion weights");

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "compare fusion against baselines on test shards");
    report->add_option("shards", rp.shards, "test shards plus meta_train/meta_val shards for model selection")->required()->check(CLI::ExistingFile);
    report->add_option("--model", rp.model, "trained model JSON")->check(CLI::ExistingFile);
    report->add_option("--methods", rp.methods,
                       "fused,mean,median,topk:K,topk:A-B,topk-median:K,forward[:N],zeroshot,best-individual")
        ->capture_default_str();
    report->add_option("--out", rp.out, "leaderboard CSV")->required();
    report->add_option("--rank-out", rp.rank_out, "rank-first analysis CSV");
    report->add_option("--holdout", rp.holdout, "zero-shot protocol: retrain with and without this task");
    add_train_flags(report, rp.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*extract) return cmd_extract(ex, g);
        if (*collect) return cmd_collect(co, g);
        if (*train) return cmd_train(tr, g);
        if (*fuse_cmd) return cmd_fuse(fu, g);
        if (*report) return cmd_report(rp, g);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (e.kind() == ErrorKind::UnknownMethod || e.kind() == ErrorKind::InvalidParameter) {
            std::fprintf(stderr, "run with --help for usage\n");
        }
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitUsage;
}
