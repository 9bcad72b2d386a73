#pragma once

// The error metric of the experiments: per-frequency mean absolute error
// with a 95% confidence interval, ILD and IPD treated separately, plus the
// repeated-measurement analysis and the frequency-curve export.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtfforge/common.hpp"
#include "rtfforge/dataset.hpp"
#include "rtfforge/rtf.hpp"

namespace rtfforge {

struct EvalReport {
    std::vector<double> ild_mae;           // per bin, dB
    std::vector<double> ild_ci_halfwidth;  // per bin, dB
    std::vector<double> ipd_mae;           // per bin, radians
    std::vector<double> ipd_ci_halfwidth;  // per bin, radians
    double agg_ild_mae = 0.0;
    double agg_ild_ci = 0.0;
    double agg_ipd_mae = 0.0;
    double agg_ipd_ci = 0.0;
    std::size_t n_samples = 0;
    // metadata
    std::string regressor_id;
    std::string dataset_id;
    double spacing = 0.0;        // 0 when not applicable
    double snr_db = 0.0;         // meaningful only when has_snr
    bool has_snr = false;
    double sample_rate = 16000.0;
};

inline double aliasing_frequency(double mic_spacing, double speed_of_sound = 343.0) {
    if (mic_spacing <= 0.0)
        throw GeometryError("aliasing_frequency: spacing must be positive");
    return speed_of_sound / (2.0 * mic_spacing);
}

// Eq.-style per-frequency mean absolute error over a sample of predictions,
// with the normal-approximation confidence interval 1.96 * s / sqrt(N).
inline EvalReport mae_per_freq(const std::vector<FeatureVector>& preds,
                               const std::vector<FeatureVector>& targets) {
    const std::size_t n = preds.size();
    if (n != targets.size()) throw SizeError("mae_per_freq: sample count mismatch");
    if (n < 2)
        throw DataError("mae_per_freq: need at least 2 samples for a confidence interval");

    EvalReport report;
    report.n_samples = n;
    report.ild_mae.assign(kNumBins, 0.0);
    report.ild_ci_halfwidth.assign(kNumBins, 0.0);
    report.ipd_mae.assign(kNumBins, 0.0);
    report.ipd_ci_halfwidth.assign(kNumBins, 0.0);

    // per-bin absolute errors, samples x bins
    std::vector<double> ild_err(n * kNumBins);
    std::vector<double> ipd_err(n * kNumBins);
    for (std::size_t s = 0; s < n; ++s) {
        if (preds[s].ild.size() != kNumBins || targets[s].ild.size() != kNumBins)
            throw SizeError("mae_per_freq: feature shape mismatch");
        const auto ipd = ipd_error(preds[s], targets[s]);
        for (std::size_t k = 0; k < kNumBins; ++k) {
            ild_err[s * kNumBins + k] = std::abs(preds[s].ild[k] - targets[s].ild[k]);
            ipd_err[s * kNumBins + k] = ipd[k];
        }
    }

    auto reduce = [&](const std::vector<double>& err, std::vector<double>& mae,
                      std::vector<double>& ci) {
        for (std::size_t k = 0; k < kNumBins; ++k) {
            double mean = 0.0;
            for (std::size_t s = 0; s < n; ++s) mean += err[s * kNumBins + k];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double d = err[s * kNumBins + k] - mean;
                var += d * d;
            }
            var /= static_cast<double>(n - 1);
            mae[k] = mean;
            ci[k] = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(n));
        }
    };
    reduce(ild_err, report.ild_mae, report.ild_ci_halfwidth);
    reduce(ipd_err, report.ipd_mae, report.ipd_ci_halfwidth);

    auto mean_of = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(v.size());
    };
    report.agg_ild_mae = mean_of(report.ild_mae);
    report.agg_ild_ci = mean_of(report.ild_ci_halfwidth);
    report.agg_ipd_mae = mean_of(report.ipd_mae);
    report.agg_ipd_ci = mean_of(report.ipd_ci_halfwidth);
    return report;
}

// Repeated noise-excited measurement of one fixed pose against its analytic
// AIR-ratio ground truth; quantifies the white-noise measurement error.
inline EvalReport measurement_error_experiment(const RoomSpec& room, const MicArray& mics,
                                               const Pose& pose, std::size_t repeats,
                                               double duration_s, std::uint64_t seed) {
    if (repeats < 2)
        throw DataError("measurement_error_experiment: need at least 2 repeats");
    const FeatureVector truth =
        measure_pose(room, mics, pose, MeasurementMode::analytic(), seed);

    std::vector<FeatureVector> measured(repeats);
    const MeasurementMode mode = MeasurementMode::noise_excited(duration_s);
    parallel_for(repeats, [&](std::size_t r) {
        measured[r] = measure_pose(room, mics, pose, mode, derive_seed(seed, r + 1));
    });
    const std::vector<FeatureVector> truths(repeats, truth);
    EvalReport report = mae_per_freq(measured, truths);
    report.regressor_id = "noise_excited_measurement";
    report.sample_rate = room.sample_rate;
    return report;
}

// CSV curve: one comment header carrying the aliasing frequency, then one
// row per bin, 6 significant digits.
inline void export_curve(const EvalReport& report, const std::string& path,
                         double f_alias) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write curve: " + tmp);
        char line[256];
        std::snprintf(line, sizeof(line),
                      "# f_a_hz=%.6g columns=freq_bin,freq_hz,ild_mae,ild_ci,ipd_mae,ipd_ci\n",
                      f_alias);
        out << line;
        for (std::size_t k = 0; k < kNumBins; ++k) {
            const double freq =
                static_cast<double>(k) * report.sample_rate / static_cast<double>(kFftSize);
            std::snprintf(line, sizeof(line), "%zu,%.6g,%.6g,%.6g,%.6g,%.6g\n", k, freq,
                          report.ild_mae[k], report.ild_ci_halfwidth[k], report.ipd_mae[k],
                          report.ipd_ci_halfwidth[k]);
            out << line;
        }
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move curve into place: " + ec.message());
}

inline nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json j;
    j["ild_mae"] = report.ild_mae;
    j["ild_ci_halfwidth"] = report.ild_ci_halfwidth;
    j["ipd_mae"] = report.ipd_mae;
    j["ipd_ci_halfwidth"] = report.ipd_ci_halfwidth;
    j["aggregate"] = {{"ild_mae", report.agg_ild_mae},
                      {"ild_ci", report.agg_ild_ci},
                      {"ipd_mae", report.agg_ipd_mae},
                      {"ipd_ci", report.agg_ipd_ci}};
    j["n_samples"] = report.n_samples;
    nlohmann::json meta;
    meta["regressor_id"] = report.regressor_id;
    meta["dataset_id"] = report.dataset_id;
    if (report.spacing > 0.0) meta["spacing"] = report.spacing;
    if (report.has_snr) meta["snr_db"] = report.snr_db;
    j["metadata"] = meta;
    return j;
}

inline void write_report(const EvalReport& report, const std::string& path,
                         const nlohmann::json& extra = {}) {
    nlohmann::json j = report_json(report);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write report: " + tmp);
        out << j.dump(2) << "\n";
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move report into place: " + ec.message());
}

}  // namespace rtfforge
