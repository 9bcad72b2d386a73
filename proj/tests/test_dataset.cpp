#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rtfforge/dataset.hpp"
#include "rtfforge/eval.hpp"

using namespace rtfforge;

namespace {

RoomSpec test_room(double rt60 = 0.0) {
    return RoomSpec::from_rt60({4.0, 6.0, 3.0}, rt60);
}

SamplingGrid small_grid() {
    return build_grid({1.9, 3.9, 1.3}, {0.2, 0.2, 0.1}, 0.1);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("grid construction counts and ordering", "[dataset]") {
    const SamplingGrid g = build_grid({0.0, 0.0, 0.0}, {0.1, 0.1, 0.05}, 0.05);
    CHECK(g.counts[0] == 3);
    CHECK(g.counts[1] == 3);
    CHECK(g.counts[2] == 2);
    CHECK(g.size() == 18);

    const auto poses = grid_poses(g);
    REQUIRE(poses.size() == 18);
    // z-fastest ordering: index 1 differs from index 0 only in z
    CHECK(poses[1].position.x == poses[0].position.x);
    CHECK(poses[1].position.y == poses[0].position.y);
    CHECK(poses[1].position.z != poses[0].position.z);

    // exact-multiple extents keep their endpoints
    const SamplingGrid fine = build_grid({0.0, 0.0, 0.0}, {1.0, 1.0, 0.5}, 0.05);
    CHECK(fine.counts[0] == 21);
    CHECK(fine.counts[1] == 21);
    CHECK(fine.counts[2] == 11);

    const SamplingGrid degenerate = build_grid({0.5, 0.5, 0.5}, {0.01, 0.02, 0.03}, 0.1);
    CHECK(degenerate.size() == 1);

    CHECK_THROWS_AS(build_grid({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 0.0), BoundsError);
}

TEST_CASE("grids must respect the wall clearance", "[dataset]") {
    const RoomSpec room = test_room();
    CHECK_NOTHROW(ensure_grid_inside(room, small_grid()));
    const SamplingGrid hugging = build_grid({0.05, 1.0, 1.0}, {0.5, 0.5, 0.5}, 0.1);
    CHECK_THROWS_AS(ensure_grid_inside(room, hugging), BoundsError);
    const SamplingGrid escaping = build_grid({3.0, 5.0, 2.0}, {2.0, 0.5, 0.5}, 0.1);
    CHECK_THROWS_AS(ensure_grid_inside(room, escaping), BoundsError);
}

TEST_CASE("anechoic dataset rows match the free-field model", "[dataset][slow]") {
    const RoomSpec room = test_room(0.0);
    const MicArray mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    const DatasetFile ds =
        generate_dataset(room, mics, small_grid(), MeasurementMode::analytic(), 7);
    REQUIRE(ds.rows() == 18);

    const std::size_t k_alias = static_cast<std::size_t>(
        aliasing_frequency(0.18, room.speed_of_sound) / (room.sample_rate / 1024.0));
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const Pose pose = pose_from_row(ds.poses.row(r));
        const FeatureVector row = FeatureVector::from_flat(std::vector<double>(
            ds.targets.row(r), ds.targets.row(r) + kFeatureDim));
        const FeatureVector model = features_from_rtf(
            free_field_rtf(pose, mics, room.speed_of_sound, room.sample_rate));
        const auto ipd = ipd_error(row, model);
        double ild_mae = 0.0, ipd_mae = 0.0;
        for (std::size_t k = 0; k < k_alias; ++k) {
            ild_mae += std::abs(row.ild[k] - model.ild[k]);
            ipd_mae += ipd[k];
        }
        CHECK(ild_mae / static_cast<double>(k_alias) < 0.1);
        CHECK(ipd_mae / static_cast<double>(k_alias) < 0.02);
    }
}

TEST_CASE("dataset generation is reproducible file for file", "[dataset][slow]") {
    const RoomSpec room = test_room(0.0);
    const MicArray mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "rtfforge_ds_a.rtfd").string();
    const auto p2 = (dir / "rtfforge_ds_b.rtfd").string();

    const MeasurementMode mode = MeasurementMode::noise_excited(0.25, 20.0);
    save_dataset(generate_dataset(room, mics, small_grid(), mode, 99), p1);
    save_dataset(generate_dataset(room, mics, small_grid(), mode, 99), p2);
    CHECK(slurp(p1) == slurp(p2));

    // a different seed changes the measured targets
    save_dataset(generate_dataset(room, mics, small_grid(), mode, 100), p2);
    CHECK(slurp(p1) != slurp(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("clean noise-excited measurement tracks the analytic targets",
          "[dataset][slow]") {
    const RoomSpec room = test_room(0.0);
    const MicArray mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    const SamplingGrid grid = build_grid({1.87, 3.9, 1.3}, {0.1, 0.1, 0.0}, 0.1);
    const DatasetFile analytic =
        generate_dataset(room, mics, grid, MeasurementMode::analytic(), 5);
    const DatasetFile measured =
        generate_dataset(room, mics, grid, MeasurementMode::noise_excited(1.0), 5);

    for (std::size_t r = 0; r < analytic.rows(); ++r) {
        double ild_mae = 0.0;
        for (std::size_t k = 0; k < kNumBins; ++k)
            ild_mae += std::abs(measured.targets.at(r, k) - analytic.targets.at(r, k));
        ild_mae /= static_cast<double>(kNumBins);
        CHECK(ild_mae > 0.0);
        CHECK(ild_mae < 1.5);
    }
}

TEST_CASE("alternating split partitions the rows", "[dataset]") {
    DatasetFile ds;
    ds.poses = Matrix(8, kPoseDim);
    ds.targets = Matrix(8, kFeatureDim);
    for (std::size_t r = 0; r < 8; ++r) {
        ds.poses.at(r, 0) = static_cast<double>(r);
        for (std::size_t k = 0; k < kNumBins; ++k) ds.targets.at(r, 2 * kNumBins + k) = 1.0;
        ds.targets.at(r, 0) = static_cast<double>(r);
    }

    const SplitResult sp = split(ds, SplitSpec{});
    CHECK(sp.train.rows() == 4);
    CHECK(sp.dev.rows() == 2);
    CHECK(sp.test.rows() == 2);
    CHECK(sp.train.poses.at(0, 0) == 0.0);
    CHECK(sp.train.poses.at(1, 0) == 2.0);
    CHECK(sp.dev.poses.at(0, 0) == 1.0);
    CHECK(sp.dev.poses.at(1, 0) == 5.0);
    CHECK(sp.test.poses.at(0, 0) == 3.0);
    CHECK(sp.test.poses.at(1, 0) == 7.0);

    // partition: disjoint and exhaustive
    std::vector<bool> seen(8, false);
    for (const DatasetFile* part : {&sp.train, &sp.dev, &sp.test})
        for (std::size_t r = 0; r < part->rows(); ++r) {
            const auto id = static_cast<std::size_t>(part->poses.at(r, 0));
            CHECK_FALSE(seen[id]);
            seen[id] = true;
        }
    for (bool s : seen) CHECK(s);

    DatasetFile tiny;
    tiny.poses = Matrix(3, kPoseDim);
    tiny.targets = Matrix(3, kFeatureDim);
    CHECK_THROWS_AS(split(tiny, SplitSpec{}), DataError);
}

TEST_CASE("random split is seeded and partitions the rows", "[dataset]") {
    DatasetFile ds;
    ds.poses = Matrix(21, kPoseDim);
    ds.targets = Matrix(21, kFeatureDim);
    for (std::size_t r = 0; r < 21; ++r) ds.poses.at(r, 0) = static_cast<double>(r);

    SplitSpec spec;
    spec.rule = SplitSpec::Rule::kRandom;
    spec.seed = 17;
    const SplitResult a = split(ds, spec);
    const SplitResult b = split(ds, spec);
    CHECK(a.train.poses.data == b.train.poses.data);
    CHECK(a.dev.poses.data == b.dev.poses.data);
    CHECK(a.test.poses.data == b.test.poses.data);
    CHECK(a.train.rows() == 11);
    CHECK(a.dev.rows() == 5);
    CHECK(a.test.rows() == 5);

    std::vector<bool> seen(21, false);
    for (const DatasetFile* part : {&a.train, &a.dev, &a.test})
        for (std::size_t r = 0; r < part->rows(); ++r)
            seen[static_cast<std::size_t>(part->poses.at(r, 0))] = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("decimation keeps the aligned sublattice", "[dataset]") {
    DatasetFile ds;
    const SamplingGrid g = build_grid({0.0, 0.0, 0.0}, {0.2, 0.2, 0.1}, 0.1);  // 3x3x2
    ds.grid = g;
    const auto poses = grid_poses(g);
    ds.poses = Matrix(poses.size(), kPoseDim);
    ds.targets = Matrix(poses.size(), kFeatureDim);
    for (std::size_t r = 0; r < poses.size(); ++r) pose_to_row(poses[r], ds.poses.row(r));

    const DatasetFile same = decimate(ds, 1);
    CHECK(same.rows() == 18);

    const DatasetFile halved = decimate(ds, 2);
    CHECK(halved.rows() == 4);  // 2x2x1
    CHECK(halved.grid->spacing == Catch::Approx(0.2));
    CHECK(halved.grid->counts[0] == 2);
    CHECK(halved.grid->counts[2] == 1);
    for (std::size_t r = 0; r < halved.rows(); ++r) {
        CHECK(halved.poses.at(r, 2) == 0.0);  // only the z=0 plane survives
    }

    const DatasetFile collapsed = decimate(ds, 5);
    CHECK(collapsed.rows() == 1);
    CHECK(collapsed.poses.at(0, 0) == 0.0);

    // composition property on lattice-compatible factors
    const SamplingGrid big = build_grid({0.0, 0.0, 0.0}, {0.8, 0.8, 0.4}, 0.1);
    DatasetFile dsb;
    dsb.grid = big;
    const auto bposes = grid_poses(big);
    dsb.poses = Matrix(bposes.size(), kPoseDim);
    dsb.targets = Matrix(bposes.size(), kFeatureDim);
    for (std::size_t r = 0; r < bposes.size(); ++r) pose_to_row(bposes[r], dsb.poses.row(r));
    const DatasetFile once = decimate(dsb, 4);
    const DatasetFile twice = decimate(decimate(dsb, 2), 2);
    CHECK(once.poses.data == twice.poses.data);

    DatasetFile no_grid;
    no_grid.poses = Matrix(4, kPoseDim);
    no_grid.targets = Matrix(4, kFeatureDim);
    CHECK_THROWS_AS(decimate(no_grid, 2), ContractError);
}

TEST_CASE("RTFD files round trip bit-exactly", "[dataset]") {
    const RoomSpec room = test_room(0.2);
    const MicArray mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    DatasetFile ds;
    ds.room = room;
    ds.mics = mics;
    ds.mode = MeasurementMode::noise_excited(1.0, 15.0);
    ds.seed = 31337;
    ds.grid = small_grid();
    GaussianRng rng(64);
    ds.poses = Matrix(5, kPoseDim);
    ds.targets = Matrix(5, kFeatureDim);
    for (double& v : ds.poses.data) v = rng.uniform(0.0, 4.0);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t k = 0; k < kNumBins; ++k) {
            ds.targets.at(r, k) = rng.gaussian();
            const double phase = rng.uniform(-kPi, kPi);
            // store float-exact sin/cos so the round trip stays bit-identical
            ds.targets.at(r, kNumBins + k) =
                static_cast<double>(static_cast<float>(std::sin(phase)));
            ds.targets.at(r, 2 * kNumBins + k) =
                static_cast<double>(static_cast<float>(std::cos(phase)));
        }

    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "rtfforge_roundtrip.rtfd").string();
    save_dataset(ds, path);
    const DatasetFile back = load_dataset(path);

    CHECK(back.rows() == 5);
    CHECK(back.sample_rate == ds.sample_rate);
    CHECK(back.room.rt60 == ds.room.rt60);
    CHECK(back.room.reflection == ds.room.reflection);
    CHECK(back.mode.kind == MeasurementMode::Kind::kNoiseExcited);
    CHECK(back.mode.snr_db.value() == 15.0);
    CHECK(back.seed == 31337);
    REQUIRE(back.grid.has_value());
    CHECK(back.grid->spacing == ds.grid->spacing);

    // float32 payload: reloading and re-saving is byte-identical
    const auto path2 = (dir / "rtfforge_roundtrip2.rtfd").string();
    save_dataset(back, path2);
    CHECK(slurp(path) == slurp(path2));

    // truncation: no partial dataset comes back
    const std::string full = slurp(path);
    const auto broken = (dir / "rtfforge_broken.rtfd").string();
    {
        std::ofstream out(broken, std::ios::binary);
        out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
    }
    CHECK_THROWS_AS(load_dataset(broken), FormatError);

    // corrupted magic names the expected tag
    {
        std::string bad = full;
        bad[0] = 'X';
        std::ofstream out(broken, std::ios::binary);
        out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_WITH(load_dataset(broken), Catch::Matchers::ContainsSubstring("RTFD"));

    // IPD invariant enforced on load
    {
        DatasetFile bad = ds;
        bad.targets.at(2, kNumBins + 7) = 3.0;
        save_dataset(bad, broken);
        CHECK_THROWS_AS(load_dataset(broken), FormatError);
    }

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
    std::filesystem::remove(broken);
}

TEST_CASE("manifests carry the header and extra configuration", "[dataset]") {
    DatasetFile ds;
    ds.room = test_room(0.2);
    ds.mics = mic_pair({2.0, 1.0, 1.4}, 0.18);
    ds.poses = Matrix(4, kPoseDim);
    ds.targets = Matrix(4, kFeatureDim);
    const auto path =
        (std::filesystem::temp_directory_path() / "rtfforge_manifest.json").string();
    nlohmann::json extra;
    extra["config"] = {{"output_dir", "out"}};
    write_manifest(ds, path, extra);

    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("header").at("n_rows") == 4);
    CHECK(j.at("header").at("room").at("rt60") == 0.2);
    CHECK(j.at("config").at("output_dir") == "out");
    std::filesystem::remove(path);
}
