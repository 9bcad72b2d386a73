#pragma once

// Config-file schema for the experiment harness. A config is a single JSON
// document with nested blocks; every field has a desk-scale default, unknown
// keys are rejected, and validation errors name the offending key. A run
// manifest (which embeds its config under "config") can be re-ingested
// directly.

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtfforge/common.hpp"
#include "rtfforge/dataset.hpp"
#include "rtfforge/grid.hpp"
#include "rtfforge/nn.hpp"
#include "rtfforge/regressors.hpp"
#include "rtfforge/room.hpp"

namespace rtfforge {

struct DnnBlock {
    std::vector<std::size_t> hidden{1024, 1024, 1024};
    std::size_t batch_size = 128;
    std::size_t max_epochs = 60;
    std::size_t patience = 5;
    double learning_rate = 1e-3;
    std::uint64_t train_seed = 7;
    std::uint64_t init_seed = 1;
    bool renorm_in_training = true;
    bool renorm_inference = true;
    bool normalize_by_direct = false;
};

struct LinearBlock {
    std::string mode = "idw";  // "idw" or "axis"
    std::size_t neighbors = 2;
    double exponent = 1.0;
    std::string axis = "z";
};

struct AffineBlock {
    std::size_t regions = 8;
    std::uint64_t seed = 11;
    double ridge = 1e-6;
    std::size_t kmeans_iters = 50;
    std::size_t kmeans_restarts = 3;
};

struct ExperimentConfig {
    // room
    Vec3 room_dims{4.0, 6.0, 3.0};
    double rt60 = 0.2;
    double sample_rate = 16000.0;
    double speed_of_sound = 343.0;
    // mics
    std::array<Vec3, 2> mic_positions{Vec3{1.91, 1.0, 1.4}, Vec3{2.09, 1.0, 1.4}};
    // grid
    Vec3 grid_origin{1.5, 3.5, 1.15};
    Vec3 grid_extent{1.0, 1.0, 0.5};
    double grid_spacing = 0.05;
    // measurement
    std::string measurement_mode = "analytic";  // or "noise_excited"
    double duration_s = 1.0;
    std::optional<double> snr_db;
    std::uint64_t seed = 20250809;
    // split
    std::string split_rule = "alternating";  // or "random"
    std::uint64_t split_seed = 1;
    // model
    std::string model_kind = "dnn";  // free_field | linear | affine | dnn
    DnnBlock dnn;
    LinearBlock linear;
    AffineBlock affine;
    // eval
    std::size_t n_eval_poses = 1000;
    std::uint64_t eval_seed = 99;
    bool use_test_split = false;
    // output
    std::string output_dir = "out";

    RoomSpec room() const {
        return RoomSpec::from_rt60(room_dims, rt60, speed_of_sound, sample_rate);
    }

    MicArray mics() const {
        MicArray m;
        m.mic_poses[0].position = mic_positions[0];
        m.mic_poses[1].position = mic_positions[1];
        m.validate();
        return m;
    }

    SamplingGrid grid() const {
        if (grid_spacing <= 0.0)
            throw ConfigError("grid.spacing must be positive");
        return build_grid(grid_origin, grid_extent, grid_spacing);
    }

    MeasurementMode measurement() const {
        if (measurement_mode == "analytic") return MeasurementMode::analytic();
        if (measurement_mode == "noise_excited")
            return MeasurementMode::noise_excited(duration_s, snr_db);
        throw ConfigError("measurement.mode must be \"analytic\" or \"noise_excited\"");
    }

    SplitSpec split_spec() const {
        SplitSpec s;
        if (split_rule == "alternating") {
            s.rule = SplitSpec::Rule::kAlternating;
        } else if (split_rule == "random") {
            s.rule = SplitSpec::Rule::kRandom;
        } else {
            throw ConfigError("split.rule must be \"alternating\" or \"random\"");
        }
        s.seed = split_seed;
        return s;
    }

    int linear_axis_index() const {
        if (linear.axis == "x") return 0;
        if (linear.axis == "y") return 1;
        if (linear.axis == "z") return 2;
        throw ConfigError("model.linear.axis must be one of x, y, z");
    }

    nlohmann::json to_json() const;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& block,
                                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed)
            if (it.key() == key) {
                ok = true;
                break;
            }
        if (!ok)
            throw ConfigError("unknown key \"" + (block.empty() ? it.key() : block + "." + it.key()) +
                              "\"");
    }
}

inline Vec3 vec3_from(const nlohmann::json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(key + " must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
void fetch(const nlohmann::json& j, const char* key, T& into, const std::string& block) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for \"" + block + "." + key + "\"");
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    nlohmann::json j = root;
    // a manifest embeds its config; accept it directly
    if (j.contains("config") && j.at("config").is_object()) j = j.at("config");

    ExperimentConfig c;
    detail::reject_unknown_keys(
        j, "", {"room", "mics", "grid", "measurement", "split", "model", "eval",
                "output_dir"});

    if (j.contains("room")) {
        const auto& room = j.at("room");
        detail::reject_unknown_keys(room, "room",
                                    {"dims", "rt60", "sample_rate", "speed_of_sound"});
        if (room.contains("dims")) c.room_dims = detail::vec3_from(room.at("dims"), "room.dims");
        detail::fetch(room, "rt60", c.rt60, "room");
        detail::fetch(room, "sample_rate", c.sample_rate, "room");
        detail::fetch(room, "speed_of_sound", c.speed_of_sound, "room");
        if (c.rt60 < 0.0) throw ConfigError("room.rt60 must be non-negative");
        if (c.sample_rate <= 0.0) throw ConfigError("room.sample_rate must be positive");
    }
    if (j.contains("mics")) {
        const auto& mics = j.at("mics");
        detail::reject_unknown_keys(mics, "mics", {"positions"});
        if (mics.contains("positions")) {
            const auto& pos = mics.at("positions");
            if (!pos.is_array() || pos.size() != 2)
                throw ConfigError("mics.positions must hold exactly 2 positions");
            c.mic_positions[0] = detail::vec3_from(pos[0], "mics.positions[0]");
            c.mic_positions[1] = detail::vec3_from(pos[1], "mics.positions[1]");
        }
    }
    if (j.contains("grid")) {
        const auto& grid = j.at("grid");
        detail::reject_unknown_keys(grid, "grid", {"origin", "extent", "spacing"});
        if (grid.contains("origin"))
            c.grid_origin = detail::vec3_from(grid.at("origin"), "grid.origin");
        if (grid.contains("extent"))
            c.grid_extent = detail::vec3_from(grid.at("extent"), "grid.extent");
        detail::fetch(grid, "spacing", c.grid_spacing, "grid");
        if (c.grid_spacing <= 0.0) throw ConfigError("grid.spacing must be positive");
    }
    if (j.contains("measurement")) {
        const auto& m = j.at("measurement");
        detail::reject_unknown_keys(m, "measurement", {"mode", "duration_s", "snr_db", "seed"});
        detail::fetch(m, "mode", c.measurement_mode, "measurement");
        detail::fetch(m, "duration_s", c.duration_s, "measurement");
        if (m.contains("snr_db") && !m.at("snr_db").is_null())
            c.snr_db = m.at("snr_db").get<double>();
        detail::fetch(m, "seed", c.seed, "measurement");
        if (c.measurement_mode != "analytic" && c.measurement_mode != "noise_excited")
            throw ConfigError("measurement.mode must be \"analytic\" or \"noise_excited\"");
        if (c.duration_s <= 0.0) throw ConfigError("measurement.duration_s must be positive");
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        detail::reject_unknown_keys(s, "split", {"rule", "seed"});
        detail::fetch(s, "rule", c.split_rule, "split");
        detail::fetch(s, "seed", c.split_seed, "split");
        c.split_spec();  // validates the rule name
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown_keys(m, "model", {"kind", "dnn", "linear", "affine"});
        detail::fetch(m, "kind", c.model_kind, "model");
        if (c.model_kind != "free_field" && c.model_kind != "linear" &&
            c.model_kind != "affine" && c.model_kind != "dnn")
            throw ConfigError(
                "model.kind must be one of free_field, linear, affine, dnn");
        if (m.contains("dnn")) {
            const auto& d = m.at("dnn");
            detail::reject_unknown_keys(
                d, "model.dnn",
                {"hidden", "batch_size", "max_epochs", "patience", "learning_rate",
                 "train_seed", "init_seed", "renorm_in_training", "renorm_inference",
                 "normalize_by_direct"});
            detail::fetch(d, "hidden", c.dnn.hidden, "model.dnn");
            detail::fetch(d, "batch_size", c.dnn.batch_size, "model.dnn");
            detail::fetch(d, "max_epochs", c.dnn.max_epochs, "model.dnn");
            detail::fetch(d, "patience", c.dnn.patience, "model.dnn");
            detail::fetch(d, "learning_rate", c.dnn.learning_rate, "model.dnn");
            detail::fetch(d, "train_seed", c.dnn.train_seed, "model.dnn");
            detail::fetch(d, "init_seed", c.dnn.init_seed, "model.dnn");
            detail::fetch(d, "renorm_in_training", c.dnn.renorm_in_training, "model.dnn");
            detail::fetch(d, "renorm_inference", c.dnn.renorm_inference, "model.dnn");
            detail::fetch(d, "normalize_by_direct", c.dnn.normalize_by_direct, "model.dnn");
            if (c.dnn.hidden.empty()) throw ConfigError("model.dnn.hidden must be non-empty");
        }
        if (m.contains("linear")) {
            const auto& l = m.at("linear");
            detail::reject_unknown_keys(l, "model.linear",
                                        {"mode", "neighbors", "exponent", "axis"});
            detail::fetch(l, "mode", c.linear.mode, "model.linear");
            detail::fetch(l, "neighbors", c.linear.neighbors, "model.linear");
            detail::fetch(l, "exponent", c.linear.exponent, "model.linear");
            detail::fetch(l, "axis", c.linear.axis, "model.linear");
            if (c.linear.mode != "idw" && c.linear.mode != "axis")
                throw ConfigError("model.linear.mode must be \"idw\" or \"axis\"");
            if (c.linear.neighbors < 1)
                throw ConfigError("model.linear.neighbors must be >= 1");
            c.linear_axis_index();  // validates axis
        }
        if (m.contains("affine")) {
            const auto& a = m.at("affine");
            detail::reject_unknown_keys(
                a, "model.affine", {"regions", "seed", "ridge", "kmeans_iters", "kmeans_restarts"});
            detail::fetch(a, "regions", c.affine.regions, "model.affine");
            detail::fetch(a, "seed", c.affine.seed, "model.affine");
            detail::fetch(a, "ridge", c.affine.ridge, "model.affine");
            detail::fetch(a, "kmeans_iters", c.affine.kmeans_iters, "model.affine");
            detail::fetch(a, "kmeans_restarts", c.affine.kmeans_restarts, "model.affine");
            if (c.affine.regions < 1) throw ConfigError("model.affine.regions must be >= 1");
        }
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        detail::reject_unknown_keys(e, "eval", {"n_eval_poses", "eval_seed", "use_test_split"});
        detail::fetch(e, "n_eval_poses", c.n_eval_poses, "eval");
        detail::fetch(e, "eval_seed", c.eval_seed, "eval");
        detail::fetch(e, "use_test_split", c.use_test_split, "eval");
    }
    if (j.contains("output_dir")) {
        detail::fetch(j, "output_dir", c.output_dir, "");
        if (c.output_dir.empty()) throw ConfigError("output_dir must be non-empty");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

inline nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["room"] = {{"dims", {room_dims.x, room_dims.y, room_dims.z}},
                 {"rt60", rt60},
                 {"sample_rate", sample_rate},
                 {"speed_of_sound", speed_of_sound}};
    j["mics"] = {{"positions",
                  {{mic_positions[0].x, mic_positions[0].y, mic_positions[0].z},
                   {mic_positions[1].x, mic_positions[1].y, mic_positions[1].z}}}};
    j["grid"] = {{"origin", {grid_origin.x, grid_origin.y, grid_origin.z}},
                 {"extent", {grid_extent.x, grid_extent.y, grid_extent.z}},
                 {"spacing", grid_spacing}};
    j["measurement"] = {{"mode", measurement_mode},
                        {"duration_s", duration_s},
                        {"seed", seed}};
    if (snr_db) j["measurement"]["snr_db"] = *snr_db;
    j["split"] = {{"rule", split_rule}, {"seed", split_seed}};
    j["model"] = {
        {"kind", model_kind},
        {"dnn",
         {{"hidden", dnn.hidden},
          {"batch_size", dnn.batch_size},
          {"max_epochs", dnn.max_epochs},
          {"patience", dnn.patience},
          {"learning_rate", dnn.learning_rate},
          {"train_seed", dnn.train_seed},
          {"init_seed", dnn.init_seed},
          {"renorm_in_training", dnn.renorm_in_training},
          {"renorm_inference", dnn.renorm_inference},
          {"normalize_by_direct", dnn.normalize_by_direct}}},
        {"linear",
         {{"mode", linear.mode},
          {"neighbors", linear.neighbors},
          {"exponent", linear.exponent},
          {"axis", linear.axis}}},
        {"affine",
         {{"regions", affine.regions},
          {"seed", affine.seed},
          {"ridge", affine.ridge},
          {"kmeans_iters", affine.kmeans_iters},
          {"kmeans_restarts", affine.kmeans_restarts}}}};
    j["eval"] = {{"n_eval_poses", n_eval_poses},
                 {"eval_seed", eval_seed},
                 {"use_test_split", use_test_split}};
    j["output_dir"] = output_dir;
    return j;
}

}  // namespace rtfforge
