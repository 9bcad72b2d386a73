#pragma once

// Experiment orchestration shared by the CLI and the acceptance suite:
// dataset production, model fitting by kind, shared evaluation poses, and
// the sample-distance / SNR sweeps.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rtfforge/config.hpp"
#include "rtfforge/dataset.hpp"
#include "rtfforge/eval.hpp"
#include "rtfforge/regressors.hpp"

namespace rtfforge {

// Off-lattice evaluation poses with analytically generated ground truth;
// predictions should not be scored against measurement noise.
struct EvalSet {
    std::vector<Pose> poses;
    std::vector<FeatureVector> targets;
};

inline EvalSet make_eval_set(const ExperimentConfig& config) {
    const RoomSpec room = config.room();
    const MicArray mics = config.mics();
    const SamplingGrid grid = config.grid();
    EvalSet set;
    set.poses = random_poses_in_box(grid, config.n_eval_poses, config.eval_seed);
    const Matrix targets = targets_for_poses(room, mics, set.poses,
                                             MeasurementMode::analytic(),
                                             derive_seed(config.eval_seed, 0x7eadULL));
    set.targets.reserve(set.poses.size());
    for (std::size_t r = 0; r < targets.rows; ++r)
        set.targets.push_back(FeatureVector::from_flat(
            std::vector<double>(targets.row(r), targets.row(r) + kFeatureDim)));
    return set;
}

inline EvalSet eval_set_from_dataset(const DatasetFile& ds) {
    EvalSet set;
    set.poses.reserve(ds.rows());
    set.targets.reserve(ds.rows());
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        set.poses.push_back(pose_from_row(ds.poses.row(r)));
        set.targets.push_back(FeatureVector::from_flat(
            std::vector<double>(ds.targets.row(r), ds.targets.row(r) + kFeatureDim)));
    }
    return set;
}

// Fits the regressor named by `kind` on the given splits.
inline std::unique_ptr<Regressor> fit_regressor(const ExperimentConfig& config,
                                                const std::string& kind,
                                                const DatasetFile& train,
                                                const DatasetFile& dev) {
    if (kind == "free_field") {
        return std::make_unique<FreeFieldRegressor>(config.mics(), config.speed_of_sound,
                                                    config.sample_rate);
    }
    if (kind == "linear") {
        const InterpMode mode = config.linear.mode == "axis" ? InterpMode::kAxisPair
                                                             : InterpMode::kInverseDistance;
        auto model = std::make_unique<LinearInterpRegressor>(
            mode, config.linear.neighbors, config.linear.exponent,
            config.linear_axis_index());
        model->fit(train.poses, train.targets, train.grid);
        return model;
    }
    if (kind == "affine") {
        auto model = std::make_unique<PiecewiseAffineRegressor>();
        model->fit(train.poses, train.targets, config.affine.regions, config.affine.seed,
                   config.affine.ridge, config.affine.kmeans_iters,
                   config.affine.kmeans_restarts);
        return model;
    }
    if (kind == "dnn") {
        DnnSettings settings;
        settings.hidden = config.dnn.hidden;
        settings.train.batch_size = config.dnn.batch_size;
        settings.train.max_epochs = config.dnn.max_epochs;
        settings.train.patience = config.dnn.patience;
        settings.train.learning_rate = config.dnn.learning_rate;
        settings.train.seed = config.dnn.train_seed;
        settings.train.renorm_in_training = config.dnn.renorm_in_training;
        settings.renorm_inference = config.dnn.renorm_inference;
        settings.normalize_by_direct = config.dnn.normalize_by_direct;
        settings.init_seed = config.dnn.init_seed;
        auto model = std::make_unique<DnnRegressor>(settings, config.mics(),
                                                    config.speed_of_sound,
                                                    config.sample_rate);
        model->fit(train.poses, train.targets, dev.poses, dev.targets);
        return model;
    }
    throw ConfigError("model.kind must be one of free_field, linear, affine, dnn");
}

inline EvalReport evaluate_regressor(const Regressor& model, const EvalSet& eval) {
    std::vector<FeatureVector> preds(eval.poses.size());
    parallel_for(eval.poses.size(), [&](std::size_t i) {
        preds[i] = model.predict(eval.poses[i]);
    });
    EvalReport report = mae_per_freq(preds, eval.targets);
    report.regressor_id = model.kind();
    return report;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepRow {
    std::string model;
    double condition = 0.0;  // spacing in meters, or SNR in dB
    std::size_t n_train = 0;
    EvalReport report;
};

// Table II shape: decimate the training lattice, refit, evaluate on shared
// off-lattice poses.
inline std::vector<SweepRow> run_distance_sweep(const ExperimentConfig& config,
                                                const std::vector<std::size_t>& factors,
                                                const std::vector<std::string>& kinds,
                                                const DatasetFile& train,
                                                const DatasetFile& dev,
                                                const EvalSet& eval) {
    if (factors.empty()) throw ConfigError("distance sweep: factors list is empty");
    if (kinds.empty()) throw ConfigError("distance sweep: model list is empty");
    if (!train.grid.has_value())
        throw ContractError("distance sweep: training set carries no grid metadata");
    std::vector<SweepRow> rows;
    for (const std::string& kind : kinds) {
        for (std::size_t factor : factors) {
            const DatasetFile decimated = decimate(train, factor);
            const auto model = fit_regressor(config, kind, decimated, dev);
            SweepRow row;
            row.model = kind;
            row.condition = decimated.grid->spacing;
            row.n_train = decimated.rows();
            row.report = evaluate_regressor(*model, eval);
            row.report.dataset_id = "decimated_x" + std::to_string(factor);
            row.report.spacing = decimated.grid->spacing;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// Table III shape: regenerate the training data at each SNR, refit, evaluate.
inline std::vector<SweepRow> run_snr_sweep(const ExperimentConfig& config,
                                           const std::vector<double>& snrs,
                                           const std::vector<std::string>& kinds,
                                           const EvalSet& eval) {
    if (snrs.empty()) throw ConfigError("snr sweep: snr list is empty");
    if (kinds.empty()) throw ConfigError("snr sweep: model list is empty");
    if (config.measurement_mode != "noise_excited")
        throw ConfigError("snr sweep: measurement.mode must be noise_excited");
    const RoomSpec room = config.room();
    const MicArray mics = config.mics();
    const SamplingGrid grid = config.grid();

    std::vector<SweepRow> rows;
    for (double snr : snrs) {
        const MeasurementMode mode = MeasurementMode::noise_excited(config.duration_s, snr);
        const DatasetFile ds = generate_dataset(room, mics, grid, mode, config.seed);
        const SplitResult parts = split(ds, config.split_spec());
        for (const std::string& kind : kinds) {
            const auto model = fit_regressor(config, kind, parts.train, parts.dev);
            SweepRow row;
            row.model = kind;
            row.condition = snr;
            row.n_train = parts.train.rows();
            row.report = evaluate_regressor(*model, eval);
            row.report.dataset_id = "snr_" + std::to_string(snr);
            row.report.has_snr = true;
            row.report.snr_db = snr;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path,
                              const std::string& condition_name) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write table: " + tmp);
        out << "model," << condition_name
            << ",n_train,ild_mae,ild_ci,ipd_mae,ipd_ci\n";
        char line[256];
        for (const auto& row : rows) {
            std::snprintf(line, sizeof(line), "%s,%.6g,%zu,%.6g,%.6g,%.6g,%.6g\n",
                          row.model.c_str(), row.condition, row.n_train,
                          row.report.agg_ild_mae, row.report.agg_ild_ci,
                          row.report.agg_ipd_mae, row.report.agg_ipd_ci);
            out << line;
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move table into place: " + ec.message());
}

}  // namespace rtfforge
