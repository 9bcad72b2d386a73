#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rtfforge/eval.hpp"

using namespace rtfforge;

namespace {

FeatureVector uniform_features(double ild, double phase) {
    FeatureVector f;
    f.ild.assign(kNumBins, ild);
    f.ipd_sin.assign(kNumBins, std::sin(phase));
    f.ipd_cos.assign(kNumBins, std::cos(phase));
    return f;
}

}  // namespace

TEST_CASE("identical predictions give zero error and zero CI", "[eval]") {
    const std::vector<FeatureVector> both(3, uniform_features(2.0, 0.7));
    const EvalReport r = mae_per_freq(both, both);
    CHECK(r.n_samples == 3);
    for (std::size_t k = 0; k < kNumBins; ++k) {
        CHECK(r.ild_mae[k] == 0.0);
        CHECK(r.ild_ci_halfwidth[k] == 0.0);
        CHECK(r.ipd_mae[k] == 0.0);
        CHECK(r.ipd_ci_halfwidth[k] == 0.0);
    }
    CHECK(r.agg_ild_mae == 0.0);
    CHECK(r.agg_ipd_mae == 0.0);
}

TEST_CASE("two-sample ILD errors reproduce the hand computation", "[eval]") {
    // absolute errors {1, 3}: mean 2, sd sqrt(2), CI 1.96*sqrt(2)/sqrt(2) = 1.96
    const std::vector<FeatureVector> preds{uniform_features(1.0, 0.0),
                                           uniform_features(3.0, 0.0)};
    const std::vector<FeatureVector> targets(2, uniform_features(0.0, 0.0));
    const EvalReport r = mae_per_freq(preds, targets);
    for (std::size_t k = 0; k < kNumBins; k += 50) {
        CHECK(r.ild_mae[k] == Catch::Approx(2.0).margin(1e-12));
        CHECK(r.ild_ci_halfwidth[k] == Catch::Approx(1.96).margin(1e-12));
    }
    CHECK(r.agg_ild_mae == Catch::Approx(2.0).margin(1e-12));
    CHECK(r.agg_ild_ci == Catch::Approx(1.96).margin(1e-12));
}

TEST_CASE("IPD errors wrap around the circle", "[eval]") {
    const std::vector<FeatureVector> preds(2, uniform_features(0.0, 3.1));
    const std::vector<FeatureVector> targets(2, uniform_features(0.0, -3.1));
    const EvalReport r = mae_per_freq(preds, targets);
    for (std::size_t k = 0; k < kNumBins; k += 50)
        CHECK(r.ipd_mae[k] == Catch::Approx(kTwoPi - 6.2).margin(1e-9));
    CHECK(r.agg_ipd_mae == Catch::Approx(kTwoPi - 6.2).margin(1e-9));
    CHECK(r.agg_ipd_mae <= kPi);
}

TEST_CASE("metric symmetries and scaling", "[eval]") {
    GaussianRng rng(6);
    std::vector<FeatureVector> preds, targets;
    for (int s = 0; s < 5; ++s) {
        preds.push_back(uniform_features(rng.gaussian(), rng.uniform(-3.0, 3.0)));
        targets.push_back(uniform_features(rng.gaussian(), rng.uniform(-3.0, 3.0)));
    }
    const EvalReport forward = mae_per_freq(preds, targets);
    const EvalReport swapped = mae_per_freq(targets, preds);
    CHECK(forward.agg_ild_mae == Catch::Approx(swapped.agg_ild_mae).margin(1e-12));
    CHECK(forward.agg_ipd_mae == Catch::Approx(swapped.agg_ipd_mae).margin(1e-12));

    // sample order invariance
    std::vector<FeatureVector> rp(preds.rbegin(), preds.rend());
    std::vector<FeatureVector> rt(targets.rbegin(), targets.rend());
    const EvalReport reordered = mae_per_freq(rp, rt);
    CHECK(reordered.agg_ild_mae == Catch::Approx(forward.agg_ild_mae).margin(1e-12));
    CHECK(reordered.agg_ild_ci == Catch::Approx(forward.agg_ild_ci).margin(1e-12));

    // scaling every ILD error by a positive constant scales mean and CI
    std::vector<FeatureVector> scaled_preds = targets;
    for (std::size_t s = 0; s < preds.size(); ++s)
        for (std::size_t k = 0; k < kNumBins; ++k)
            scaled_preds[s].ild[k] =
                targets[s].ild[k] + 2.5 * (preds[s].ild[k] - targets[s].ild[k]);
    const EvalReport scaled = mae_per_freq(scaled_preds, targets);
    CHECK(scaled.agg_ild_mae == Catch::Approx(2.5 * forward.agg_ild_mae).margin(1e-9));
    CHECK(scaled.agg_ild_ci == Catch::Approx(2.5 * forward.agg_ild_ci).margin(1e-9));

    // aggregate equals the unweighted per-bin mean
    double mean = 0.0;
    for (double v : forward.ild_mae) mean += v;
    mean /= static_cast<double>(kNumBins);
    CHECK(forward.agg_ild_mae == Catch::Approx(mean).margin(1e-15));

    // duplicated samples leave no spread
    const std::vector<FeatureVector> dup_p(4, preds[0]);
    const std::vector<FeatureVector> dup_t(4, targets[0]);
    const EvalReport dup = mae_per_freq(dup_p, dup_t);
    CHECK(dup.agg_ild_ci == 0.0);

    CHECK_THROWS_AS(
        mae_per_freq(std::vector<FeatureVector>{preds[0]},
                     std::vector<FeatureVector>{targets[0]}),
        DataError);
}

TEST_CASE("aliasing frequency hand cases", "[eval]") {
    CHECK(aliasing_frequency(0.18, 343.0) == Catch::Approx(952.78).margin(0.01));
    CHECK(aliasing_frequency(343.0 / 2.0, 343.0) == Catch::Approx(1.0).margin(1e-12));
    CHECK(aliasing_frequency(0.343 / 4.0, 343.0) == Catch::Approx(2000.0).margin(1e-9));
    CHECK_THROWS_AS(aliasing_frequency(0.0, 343.0), GeometryError);
}

TEST_CASE("repeated measurement shows a positive error floor", "[eval][slow]") {
    const RoomSpec room = RoomSpec::from_rt60({4.0, 6.0, 3.0}, 0.0);
    const MicArray mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    // off the symmetry plane: equidistant poses measure exactly by symmetry
    Pose pose;
    pose.position = {1.83, 4.1, 1.37};

    const EvalReport r = measurement_error_experiment(room, mics, pose, 6, 0.5, 11);
    CHECK(r.n_samples == 6);
    CHECK(r.agg_ild_mae > 0.0);
    CHECK(r.agg_ipd_mae > 0.0);

    CHECK_THROWS_AS(measurement_error_experiment(room, mics, pose, 1, 0.5, 11), DataError);
}

TEST_CASE("curve export writes one header and 513 rows", "[eval]") {
    GaussianRng rng(2);
    std::vector<FeatureVector> preds, targets;
    for (int s = 0; s < 3; ++s) {
        preds.push_back(uniform_features(rng.gaussian(), rng.uniform(-2.0, 2.0)));
        targets.push_back(uniform_features(rng.gaussian(), rng.uniform(-2.0, 2.0)));
    }
    EvalReport r = mae_per_freq(preds, targets);
    r.sample_rate = 16000.0;

    const auto path = (std::filesystem::temp_directory_path() / "rtfforge_curve.csv").string();
    const double f_a = aliasing_frequency(0.18, 343.0);
    export_curve(r, path, f_a);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("f_a_hz=952.778") != std::string::npos);
    CHECK(line.find("freq_bin,freq_hz,ild_mae,ild_ci,ipd_mae,ipd_ci") != std::string::npos);

    std::size_t rows = 0;
    double freq0 = -1.0, freq_last = -1.0, ild0 = -1.0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        const std::size_t bin = std::stoul(tok);
        std::getline(ss, tok, ',');
        const double freq = std::stod(tok);
        std::getline(ss, tok, ',');
        const double ild = std::stod(tok);
        if (rows == 0) {
            freq0 = freq;
            ild0 = ild;
        }
        freq_last = freq;
        CHECK(bin == rows);
        ++rows;
    }
    CHECK(rows == 513);
    CHECK(freq0 == 0.0);
    CHECK(freq_last == Catch::Approx(8000.0));
    // parsed values match within 6-significant-digit rendering
    CHECK(ild0 == Catch::Approx(r.ild_mae[0]).epsilon(1e-5));
    std::filesystem::remove(path);
}

TEST_CASE("report JSON carries the EvalReport fields", "[eval]") {
    const std::vector<FeatureVector> preds{uniform_features(1.0, 0.2),
                                           uniform_features(2.0, 0.4)};
    const std::vector<FeatureVector> targets(2, uniform_features(0.0, 0.0));
    EvalReport r = mae_per_freq(preds, targets);
    r.regressor_id = "dnn";
    r.dataset_id = "desk";
    r.spacing = 0.05;
    r.has_snr = true;
    r.snr_db = 20.0;

    const nlohmann::json j = report_json(r);
    CHECK(j.at("ild_mae").size() == kNumBins);
    CHECK(j.at("ipd_ci_halfwidth").size() == kNumBins);
    CHECK(j.at("aggregate").contains("ild_mae"));
    CHECK(j.at("aggregate").contains("ipd_ci"));
    CHECK(j.at("n_samples") == 2);
    CHECK(j.at("metadata").at("regressor_id") == "dnn");
    CHECK(j.at("metadata").at("spacing") == 0.05);
    CHECK(j.at("metadata").at("snr_db") == 20.0);
}
