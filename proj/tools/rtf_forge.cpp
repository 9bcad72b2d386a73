// rtf-forge: config-driven harness around the pose->RTF regression library.
//
// Subcommands: gen | train | eval | sweep-distance | sweep-snr |
// repeat-measure | export-features. Exit codes: 0 success, 2 usage or
// validation failure, 3 runtime/numeric failure. Output files are written to
// a temp name and renamed, so failures never leave partial files behind.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rtfforge/config.hpp"
#include "rtfforge/harness.hpp"

namespace fs = std::filesystem;
using namespace rtfforge;

namespace {

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw ConfigError(what + " not found: " + path);
}

void validate_dataset_header(const DatasetFile& ds, const std::string& path) {
    if (ds.fft_size != kFftSize)
        throw ConfigError(path + ": fft_size " + std::to_string(ds.fft_size) +
                          " does not match the built-in " + std::to_string(kFftSize));
    if (ds.n_bins != kNumBins)
        throw ConfigError(path + ": n_bins " + std::to_string(ds.n_bins) +
                          " does not match the built-in " + std::to_string(kNumBins));
    if (ds.layout != "ild_sincos")
        throw ConfigError(path + ": unsupported target layout \"" + ds.layout + "\"");
}

DatasetFile load_checked(const std::string& path) {
    require_file(path, "dataset");
    DatasetFile ds = load_dataset(path);
    validate_dataset_header(ds, path);
    return ds;
}

std::string dataset_path(const ExperimentConfig& config, const char* name) {
    return (fs::path(config.output_dir) / (std::string(name) + ".rtfd")).string();
}

std::string checkpoint_path(const ExperimentConfig& config, const std::string& kind) {
    return (fs::path(config.output_dir) / (kind + ".ckpt")).string();
}

int cmd_gen(const ExperimentConfig& config) {
    fs::create_directories(config.output_dir);
    const RoomSpec room = config.room();
    const MicArray mics = config.mics();
    const SamplingGrid grid = config.grid();

    const DatasetFile full =
        generate_dataset(room, mics, grid, config.measurement(), config.seed);
    const SplitResult parts = split(full, config.split_spec());
    save_dataset(parts.train, dataset_path(config, "train"));
    save_dataset(parts.dev, dataset_path(config, "dev"));
    save_dataset(parts.test, dataset_path(config, "test"));

    nlohmann::json extra;
    extra["config"] = config.to_json();
    extra["outputs"] = {{"train", dataset_path(config, "train")},
                        {"dev", dataset_path(config, "dev")},
                        {"test", dataset_path(config, "test")}};
    extra["counts"] = {{"total", full.rows()},
                       {"train", parts.train.rows()},
                       {"dev", parts.dev.rows()},
                       {"test", parts.test.rows()}};
    write_manifest(full, (fs::path(config.output_dir) / "manifest.json").string(), extra);

    std::printf("generated %zu poses: train %zu, dev %zu, test %zu -> %s\n", full.rows(),
                parts.train.rows(), parts.dev.rows(), parts.test.rows(),
                config.output_dir.c_str());
    return 0;
}

int cmd_train(const ExperimentConfig& config, const std::string& kind_override,
              std::string train_path, std::string dev_path) {
    ExperimentConfig cfg = config;
    if (!kind_override.empty()) cfg.model_kind = kind_override;
    if (cfg.model_kind == "free_field")
        throw ConfigError("model kind free_field requires no training");

    if (train_path.empty()) train_path = dataset_path(cfg, "train");
    if (dev_path.empty()) dev_path = dataset_path(cfg, "dev");
    const DatasetFile train_ds = load_checked(train_path);
    const DatasetFile dev_ds = load_checked(dev_path);

    const auto model = fit_regressor(cfg, cfg.model_kind, train_ds, dev_ds);
    fs::create_directories(cfg.output_dir);
    const std::string ckpt = checkpoint_path(cfg, cfg.model_kind);
    save_regressor(*model, ckpt);

    if (cfg.model_kind == "dnn") {
        const auto* dnn = dynamic_cast<const DnnRegressor*>(model.get());
        const std::string history_path =
            (fs::path(cfg.output_dir) / "dnn_history.csv").string();
        const std::string tmp = history_path + ".tmp";
        {
            std::ofstream out(tmp);
            if (!out) throw IoError("cannot write history: " + tmp);
            out << "epoch,train_loss,dev_loss,learning_rate\n";
            char line[160];
            for (const auto& rec : dnn->history()) {
                std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.6g\n", rec.epoch,
                              rec.train_loss, rec.dev_loss, rec.learning_rate);
                out << line;
            }
        }
        std::error_code ec;
        fs::rename(tmp, history_path, ec);
        if (ec) throw IoError("cannot move history into place: " + ec.message());
        std::printf("trained dnn for %zu epochs -> %s\n", dnn->history().size(),
                    ckpt.c_str());
    } else {
        nlohmann::json diag;
        diag["kind"] = cfg.model_kind;
        diag["n_train"] = train_ds.rows();
        if (cfg.model_kind == "affine") diag["regions"] = cfg.affine.regions;
        if (cfg.model_kind == "linear") diag["mode"] = cfg.linear.mode;
        const std::string diag_path =
            (fs::path(cfg.output_dir) / (cfg.model_kind + "_fit.json")).string();
        std::ofstream out(diag_path + ".tmp");
        out << diag.dump(2) << "\n";
        out.close();
        std::error_code ec;
        fs::rename(diag_path + ".tmp", diag_path, ec);
        if (ec) throw IoError("cannot move diagnostics into place: " + ec.message());
        std::printf("fitted %s on %zu pairs -> %s\n", cfg.model_kind.c_str(),
                    train_ds.rows(), ckpt.c_str());
    }
    return 0;
}

int cmd_eval(const ExperimentConfig& config, const std::string& kind_override,
             std::string model_path, std::string test_path) {
    ExperimentConfig cfg = config;
    if (!kind_override.empty()) cfg.model_kind = kind_override;

    std::unique_ptr<Regressor> model;
    if (cfg.model_kind == "free_field" && model_path.empty()) {
        model = std::make_unique<FreeFieldRegressor>(cfg.mics(), cfg.speed_of_sound,
                                                     cfg.sample_rate);
    } else {
        if (model_path.empty()) model_path = checkpoint_path(cfg, cfg.model_kind);
        require_file(model_path, "model checkpoint");
        model = load_regressor(model_path);
    }

    EvalSet eval;
    if (cfg.use_test_split) {
        if (test_path.empty()) test_path = dataset_path(cfg, "test");
        eval = eval_set_from_dataset(load_checked(test_path));
    } else {
        eval = make_eval_set(cfg);
    }

    EvalReport report = evaluate_regressor(*model, eval);
    report.dataset_id = cfg.use_test_split ? "test_split" : "off_lattice";
    report.sample_rate = cfg.sample_rate;
    report.spacing = cfg.grid_spacing;

    fs::create_directories(cfg.output_dir);
    const std::string report_path =
        (fs::path(cfg.output_dir) / ("report_" + model->kind() + ".json")).string();
    write_report(report, report_path);
    const double f_a = aliasing_frequency(cfg.mics().spacing(), cfg.speed_of_sound);
    const std::string curve_path =
        (fs::path(cfg.output_dir) / ("curve_" + model->kind() + ".csv")).string();
    export_curve(report, curve_path, f_a);

    std::printf("%s on %zu poses: ILD MAE %.4g dB, IPD MAE %.4g rad -> %s\n",
                model->kind().c_str(), eval.poses.size(), report.agg_ild_mae,
                report.agg_ipd_mae, report_path.c_str());
    return 0;
}

int cmd_sweep_distance(const ExperimentConfig& config,
                       const std::vector<std::size_t>& factors,
                       std::vector<std::string> kinds, std::string train_path,
                       std::string dev_path) {
    if (factors.empty()) throw ConfigError("--factors must list at least one factor");
    for (std::size_t f : factors)
        if (f < 1) throw ConfigError("--factors entries must be >= 1");
    if (kinds.empty()) kinds.push_back(config.model_kind);

    if (train_path.empty()) train_path = dataset_path(config, "train");
    if (dev_path.empty()) dev_path = dataset_path(config, "dev");
    const DatasetFile train_ds = load_checked(train_path);
    const DatasetFile dev_ds = load_checked(dev_path);

    const EvalSet eval = make_eval_set(config);
    const auto rows = run_distance_sweep(config, factors, kinds, train_ds, dev_ds, eval);

    fs::create_directories(config.output_dir);
    const std::string table_path =
        (fs::path(config.output_dir) / "sweep_distance.csv").string();
    write_sweep_table(rows, table_path, "spacing_m");
    std::printf("distance sweep: %zu rows -> %s\n", rows.size(), table_path.c_str());
    return 0;
}

int cmd_sweep_snr(const ExperimentConfig& config, const std::vector<double>& snrs,
                  std::vector<std::string> kinds) {
    if (snrs.empty()) throw ConfigError("--snrs must list at least one SNR");
    if (kinds.empty()) kinds.push_back(config.model_kind);
    const EvalSet eval = make_eval_set(config);
    const auto rows = run_snr_sweep(config, snrs, kinds, eval);

    fs::create_directories(config.output_dir);
    const std::string table_path = (fs::path(config.output_dir) / "sweep_snr.csv").string();
    write_sweep_table(rows, table_path, "snr_db");
    std::printf("snr sweep: %zu rows -> %s\n", rows.size(), table_path.c_str());
    return 0;
}

int cmd_repeat_measure(const ExperimentConfig& config, std::size_t repeats,
                       double duration_s) {
    if (repeats < 2) throw ConfigError("--repeats must be >= 2");
    const RoomSpec room = config.room();
    const MicArray mics = config.mics();
    // a fixed off-lattice pose away from the array's symmetry plane
    const auto poses = random_poses_in_box(config.grid(), 1, derive_seed(config.eval_seed, 1));
    const Pose pose = poses.front();

    EvalReport report = measurement_error_experiment(room, mics, pose, repeats,
                                                     duration_s, config.seed);
    report.dataset_id = "repeat_measure";
    fs::create_directories(config.output_dir);
    nlohmann::json extra;
    extra["repeats"] = repeats;
    extra["duration_s"] = duration_s;
    extra["pose"] = {pose.position.x, pose.position.y, pose.position.z};
    const std::string path =
        (fs::path(config.output_dir) / "repeat_measure.json").string();
    write_report(report, path, extra);
    std::printf("measurement error over %zu repeats at %.3g s: ILD %.4g dB, IPD %.4g rad -> %s\n",
                repeats, duration_s, report.agg_ild_mae, report.agg_ipd_mae, path.c_str());
    return 0;
}

int cmd_export_features(const std::string& dataset_path_arg, const std::string& out_path) {
    const DatasetFile ds = load_checked(dataset_path_arg);
    const std::string tmp = out_path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write feature matrix: " + tmp);
        char cell[48];
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            for (std::size_t k = 0; k < kNumBins; ++k) {
                std::snprintf(cell, sizeof(cell), "%.6g", ds.targets.at(r, k));
                out << cell << (k + 1 < kNumBins ? "," : "\n");
            }
        }
    }
    std::error_code ec;
    fs::rename(tmp, out_path, ec);
    if (ec) throw IoError("cannot move feature matrix into place: " + ec.message());
    std::printf("exported %zu x %zu ILD matrix -> %s\n", ds.rows(), kNumBins,
                out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pose -> relative transfer function experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string model_path, train_path, dev_path, test_path, out_dir;
    std::vector<std::string> model_kinds;
    std::vector<std::size_t> factors;
    std::vector<double> snrs;
    std::size_t repeats = 200;
    double duration_s = 1.0;
    std::string export_dataset, export_out;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config JSON (or a run manifest)");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate and split a dataset");
    add_config(gen);
    gen->add_option("--out", out_dir, "output directory override");

    CLI::App* train_cmd = app.add_subcommand("train", "fit the configured regressor");
    add_config(train_cmd);
    train_cmd->add_option("--model", model_kinds, "model kind override");
    train_cmd->add_option("--train", train_path, "training dataset (RTFD)");
    train_cmd->add_option("--dev", dev_path, "development dataset (RTFD)");
    train_cmd->add_option("--out", out_dir, "output directory override");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a fitted model");
    add_config(eval_cmd);
    eval_cmd->add_option("--model", model_kinds, "model kind override");
    eval_cmd->add_option("--model-path", model_path, "checkpoint path");
    eval_cmd->add_option("--test", test_path, "test dataset (RTFD)");
    eval_cmd->add_option("--out", out_dir, "output directory override");

    CLI::App* sweep_d = app.add_subcommand("sweep-distance",
                                           "error vs training sample distance");
    add_config(sweep_d);
    sweep_d->add_option("--factors", factors, "decimation factors, e.g. 1 2 4")
        ->delimiter(',');
    sweep_d->add_option("--model", model_kinds, "model kinds to sweep");
    sweep_d->add_option("--train", train_path, "training dataset (RTFD)");
    sweep_d->add_option("--dev", dev_path, "development dataset (RTFD)");
    sweep_d->add_option("--out", out_dir, "output directory override");

    CLI::App* sweep_s = app.add_subcommand("sweep-snr", "error vs training SNR");
    add_config(sweep_s);
    sweep_s->add_option("--snrs", snrs, "SNRs in dB, e.g. 30 20 10")->delimiter(',');
    sweep_s->add_option("--model", model_kinds, "model kinds to sweep");
    sweep_s->add_option("--out", out_dir, "output directory override");

    CLI::App* repeat = app.add_subcommand("repeat-measure",
                                          "measurement-error floor of one pose");
    add_config(repeat);
    repeat->add_option("--repeats", repeats, "number of independent measurements");
    repeat->add_option("--duration", duration_s, "excitation length in seconds");
    repeat->add_option("--out", out_dir, "output directory override");

    CLI::App* exp = app.add_subcommand("export-features",
                                       "dump the ILD block as CSV for embedding tools");
    exp->add_option("--dataset", export_dataset, "dataset to export (RTFD)")->required();
    exp->add_option("--out", export_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message/help
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (exp->parsed()) return cmd_export_features(export_dataset, export_out);

        ExperimentConfig config;
        if (!config_path.empty()) {
            require_file(config_path, "config");
            config = load_config(config_path);
        }
        if (!out_dir.empty()) config.output_dir = out_dir;
        const std::string kind_override = model_kinds.empty() ? "" : model_kinds.front();

        if (gen->parsed()) return cmd_gen(config);
        if (train_cmd->parsed()) return cmd_train(config, kind_override, train_path, dev_path);
        if (eval_cmd->parsed()) return cmd_eval(config, kind_override, model_path, test_path);
        if (sweep_d->parsed())
            return cmd_sweep_distance(config, factors, model_kinds, train_path, dev_path);
        if (sweep_s->parsed()) return cmd_sweep_snr(config, snrs, model_kinds);
        if (repeat->parsed()) return cmd_repeat_measure(config, repeats, duration_s);
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
