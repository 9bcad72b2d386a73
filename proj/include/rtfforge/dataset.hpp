#pragma once

// Dataset construction and persistence: drive the simulation/measurement
// pipeline over a pose lattice, apply the train/dev/test split and the
// sample-distance decimation, and store everything in the RTFD container.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtfforge/common.hpp"
#include "rtfforge/grid.hpp"
#include "rtfforge/nn.hpp"
#include "rtfforge/regressors.hpp"
#include "rtfforge/room.hpp"
#include "rtfforge/rtf.hpp"
#include "rtfforge/signal.hpp"

namespace rtfforge {

struct MeasurementMode {
    enum class Kind { kAnalytic, kNoiseExcited } kind = Kind::kAnalytic;
    double duration_s = 1.0;            // noise-excited only
    std::optional<double> snr_db;       // per-channel noise, absent = clean

    static MeasurementMode analytic() { return {}; }
    static MeasurementMode noise_excited(double duration_s,
                                         std::optional<double> snr_db = std::nullopt) {
        MeasurementMode m;
        m.kind = Kind::kNoiseExcited;
        m.duration_s = duration_s;
        m.snr_db = snr_db;
        return m;
    }
};

struct DatasetFile {
    double sample_rate = 16000.0;
    std::size_t fft_size = kFftSize;
    std::size_t n_bins = kNumBins;
    std::string layout = "ild_sincos";
    RoomSpec room;
    MicArray mics;
    MeasurementMode mode;
    std::uint64_t seed = 0;
    std::optional<SamplingGrid> grid;
    Matrix poses;    // n x kPoseDim
    Matrix targets;  // n x kFeatureDim

    std::size_t rows() const { return poses.rows; }
};

inline constexpr char kDatasetMagic[4] = {'R', 'T', 'F', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

// ---------------------------------------------------------------------------
// Target generation.

// Features of one pose through the configured measurement path.
inline FeatureVector measure_pose(const RoomSpec& room, const MicArray& mics,
                                  const Pose& source, const MeasurementMode& mode,
                                  std::uint64_t pose_seed) {
    const std::size_t len = default_air_length(room);
    const AirSignal h1 = simulate_air(room, source, mics.mic_poses[0], len);
    const AirSignal h2 = simulate_air(room, source, mics.mic_poses[1], len);
    RtfVector rtf;
    if (mode.kind == MeasurementMode::Kind::kAnalytic) {
        rtf = rtf_from_airs(h1, h2);
    } else {
        const std::size_t n_samples =
            static_cast<std::size_t>(mode.duration_s * room.sample_rate);
        const TimeSeries source_noise =
            white_noise(derive_seed(pose_seed, 1), n_samples, room.sample_rate);
        TimeSeries a1 = convolve(source_noise, TimeSeries{h1.samples, room.sample_rate});
        TimeSeries a2 = convolve(source_noise, TimeSeries{h2.samples, room.sample_rate});
        if (mode.snr_db.has_value()) {
            const TimeSeries n1 =
                white_noise(derive_seed(pose_seed, 2), a1.samples.size(), room.sample_rate);
            const TimeSeries n2 =
                white_noise(derive_seed(pose_seed, 3), a2.samples.size(), room.sample_rate);
            a1 = add_noise_at_snr(a1, n1, *mode.snr_db);
            a2 = add_noise_at_snr(a2, n2, *mode.snr_db);
        }
        rtf = rtf_from_signals(stft(a1), stft(a2));
    }
    return features_from_rtf(rtf);
}

inline Matrix targets_for_poses(const RoomSpec& room, const MicArray& mics,
                                const std::vector<Pose>& poses,
                                const MeasurementMode& mode, std::uint64_t seed) {
    Matrix targets(poses.size(), kFeatureDim);
    parallel_for(poses.size(), [&](std::size_t i) {
        try {
            const FeatureVector f =
                measure_pose(room, mics, poses[i], mode, derive_seed(seed, i));
            const auto flat = f.flat();
            std::copy(flat.begin(), flat.end(), targets.row(i));
        } catch (const ValidationError& e) {
            throw ValidationError("pose " + std::to_string(i) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("pose " + std::to_string(i) + ": " + e.what());
        }
    });
    return targets;
}

inline DatasetFile generate_dataset(const RoomSpec& room, const MicArray& mics,
                                    const SamplingGrid& grid, const MeasurementMode& mode,
                                    std::uint64_t seed) {
    room.validate();
    mics.validate();
    ensure_grid_inside(room, grid);
    for (const auto& mic : mics.mic_poses)
        if (!room.contains(mic.position))
            throw BoundsError("generate_dataset: microphone outside the room");

    DatasetFile ds;
    ds.sample_rate = room.sample_rate;
    ds.room = room;
    ds.mics = mics;
    ds.mode = mode;
    ds.seed = seed;
    ds.grid = grid;

    const std::vector<Pose> poses = grid_poses(grid);
    ds.poses = Matrix(poses.size(), kPoseDim);
    for (std::size_t i = 0; i < poses.size(); ++i) pose_to_row(poses[i], ds.poses.row(i));
    ds.targets = targets_for_poses(room, mics, poses, mode, seed);
    return ds;
}

// Seeded off-lattice poses, uniform inside the sampling box.
inline std::vector<Pose> random_poses_in_box(const SamplingGrid& grid, std::size_t n,
                                             std::uint64_t seed) {
    GaussianRng rng(seed);
    std::vector<Pose> poses(n);
    for (auto& p : poses) {
        p.position = {rng.uniform(grid.origin.x, grid.origin.x + grid.extent.x),
                      rng.uniform(grid.origin.y, grid.origin.y + grid.extent.y),
                      rng.uniform(grid.origin.z, grid.origin.z + grid.extent.z)};
    }
    return poses;
}

// ---------------------------------------------------------------------------
// Splits.

struct SplitSpec {
    enum class Rule { kAlternating, kRandom } rule = Rule::kAlternating;
    std::uint64_t seed = 0;
};

struct SplitResult {
    DatasetFile train;
    DatasetFile dev;
    DatasetFile test;
};

namespace detail {

inline DatasetFile take_rows(const DatasetFile& ds, const std::vector<std::size_t>& rows) {
    DatasetFile out = ds;
    out.poses = Matrix(rows.size(), ds.poses.cols);
    out.targets = Matrix(rows.size(), ds.targets.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(ds.poses.row(rows[i]), ds.poses.row(rows[i]) + ds.poses.cols,
                  out.poses.row(i));
        std::copy(ds.targets.row(rows[i]), ds.targets.row(rows[i]) + ds.targets.cols,
                  out.targets.row(i));
    }
    return out;
}

}  // namespace detail

inline SplitResult split(const DatasetFile& ds, const SplitSpec& spec) {
    const std::size_t n = ds.rows();
    if (n < 4) throw DataError("split: need at least 4 rows, got " + std::to_string(n));
    std::vector<std::size_t> train_rows, dev_rows, test_rows;
    if (spec.rule == SplitSpec::Rule::kAlternating) {
        // even indices train; the remainder alternates dev/test
        std::size_t parity = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 2 == 0) {
                train_rows.push_back(i);
            } else if (parity++ % 2 == 0) {
                dev_rows.push_back(i);
            } else {
                test_rows.push_back(i);
            }
        }
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        GaussianRng rng(spec.seed);
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }
        const std::size_t n_train = (n + 1) / 2;
        const std::size_t n_dev = (n - n_train + 1) / 2;
        train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        dev_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                        order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
        test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev),
                         order.end());
    }
    return {detail::take_rows(ds, train_rows), detail::take_rows(ds, dev_rows),
            detail::take_rows(ds, test_rows)};
}

// ---------------------------------------------------------------------------
// Decimation: keep lattice points whose (i, j, k) are all multiples of the
// factor; the effective spacing grows accordingly.

inline DatasetFile decimate(const DatasetFile& ds, std::size_t factor) {
    if (!ds.grid.has_value())
        throw ContractError("decimate: dataset carries no grid metadata");
    if (factor < 1) throw ContractError("decimate: factor must be >= 1");
    if (factor == 1) return ds;
    const SamplingGrid& grid = *ds.grid;

    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        const double* row = ds.poses.row(r);
        bool all_aligned = true;
        for (int a = 0; a < 3; ++a) {
            const double coord = (a == 0 ? row[0] : a == 1 ? row[1] : row[2]);
            const double base = (a == 0 ? grid.origin.x : a == 1 ? grid.origin.y
                                                                  : grid.origin.z);
            const long idx = std::lround((coord - base) / grid.spacing);
            if (idx % static_cast<long>(factor) != 0) {
                all_aligned = false;
                break;
            }
        }
        if (all_aligned) keep.push_back(r);
    }
    DatasetFile out = detail::take_rows(ds, keep);
    SamplingGrid g = grid;
    g.spacing = grid.spacing * static_cast<double>(factor);
    for (int a = 0; a < 3; ++a)
        g.counts[a] = (grid.counts[a] - 1) / factor + 1;
    g.extent = {g.spacing * static_cast<double>(g.counts[0] - 1),
                g.spacing * static_cast<double>(g.counts[1] - 1),
                g.spacing * static_cast<double>(g.counts[2] - 1)};
    out.grid = g;
    return out;
}

// ---------------------------------------------------------------------------
// RTFD container.

namespace detail {

inline nlohmann::json header_json(const DatasetFile& ds) {
    nlohmann::json j;
    j["sample_rate"] = ds.sample_rate;
    j["fft_size"] = ds.fft_size;
    j["n_bins"] = ds.n_bins;
    j["layout"] = ds.layout;
    j["room"] = {{"dims", {ds.room.dims.x, ds.room.dims.y, ds.room.dims.z}},
                 {"rt60", ds.room.rt60},
                 {"reflection", ds.room.reflection},
                 {"speed_of_sound", ds.room.speed_of_sound},
                 {"sample_rate", ds.room.sample_rate}};
    j["mics"] = {{"positions",
                  {{ds.mics.mic_poses[0].position.x, ds.mics.mic_poses[0].position.y,
                    ds.mics.mic_poses[0].position.z},
                   {ds.mics.mic_poses[1].position.x, ds.mics.mic_poses[1].position.y,
                    ds.mics.mic_poses[1].position.z}}}};
    j["mode"] = {{"kind", ds.mode.kind == MeasurementMode::Kind::kAnalytic
                              ? "analytic"
                              : "noise_excited"}};
    if (ds.mode.kind == MeasurementMode::Kind::kNoiseExcited) {
        j["mode"]["duration_s"] = ds.mode.duration_s;
        if (ds.mode.snr_db.has_value()) j["mode"]["snr_db"] = *ds.mode.snr_db;
    }
    j["seed"] = ds.seed;
    j["n_rows"] = ds.rows();
    j["pose_dim"] = kPoseDim;
    j["target_dim"] = kFeatureDim;
    if (ds.grid) {
        j["grid"] = {{"origin", {ds.grid->origin.x, ds.grid->origin.y, ds.grid->origin.z}},
                     {"extent", {ds.grid->extent.x, ds.grid->extent.y, ds.grid->extent.z}},
                     {"spacing", ds.grid->spacing},
                     {"counts", {ds.grid->counts[0], ds.grid->counts[1], ds.grid->counts[2]}}};
    }
    return j;
}

inline void header_from_json(const nlohmann::json& j, DatasetFile& ds) {
    ds.sample_rate = j.at("sample_rate").get<double>();
    ds.fft_size = j.at("fft_size").get<std::size_t>();
    ds.n_bins = j.at("n_bins").get<std::size_t>();
    ds.layout = j.at("layout").get<std::string>();
    const auto& room = j.at("room");
    ds.room.dims = {room.at("dims")[0], room.at("dims")[1], room.at("dims")[2]};
    ds.room.rt60 = room.at("rt60").get<double>();
    ds.room.reflection = room.at("reflection").get<double>();
    ds.room.speed_of_sound = room.at("speed_of_sound").get<double>();
    ds.room.sample_rate = room.at("sample_rate").get<double>();
    const auto& mics = j.at("mics").at("positions");
    for (int m = 0; m < 2; ++m)
        ds.mics.mic_poses[m].position = {mics[m][0], mics[m][1], mics[m][2]};
    const auto& mode = j.at("mode");
    if (mode.at("kind") == "analytic") {
        ds.mode = MeasurementMode::analytic();
    } else {
        ds.mode = MeasurementMode::noise_excited(
            mode.at("duration_s").get<double>(),
            mode.contains("snr_db") ? std::optional<double>(mode.at("snr_db").get<double>())
                                    : std::nullopt);
    }
    ds.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("grid")) {
        SamplingGrid g;
        const auto& grid = j.at("grid");
        g.origin = {grid.at("origin")[0], grid.at("origin")[1], grid.at("origin")[2]};
        g.extent = {grid.at("extent")[0], grid.at("extent")[1], grid.at("extent")[2]};
        g.spacing = grid.at("spacing").get<double>();
        g.counts = {grid.at("counts")[0].get<std::size_t>(),
                    grid.at("counts")[1].get<std::size_t>(),
                    grid.at("counts")[2].get<std::size_t>()};
        ds.grid = g;
    }
}

}  // namespace detail

inline void save_dataset(const DatasetFile& ds, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write dataset: " + tmp);
        write_bytes(out, kDatasetMagic, 4);
        write_u32le(out, kDatasetVersion);
        const std::string header = detail::header_json(ds).dump();
        write_u64le(out, header.size());
        write_bytes(out, header.data(), header.size());
        for (std::size_t r = 0; r < ds.poses.rows; ++r)
            for (std::size_t c = 0; c < ds.poses.cols; ++c)
                write_f32le(out, static_cast<float>(ds.poses.at(r, c)));
        for (std::size_t r = 0; r < ds.targets.rows; ++r)
            for (std::size_t c = 0; c < ds.targets.cols; ++c)
                write_f32le(out, static_cast<float>(ds.targets.at(r, c)));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move dataset into place: " + ec.message());
}

inline DatasetFile load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset: " + path);
    LeReader reader(in);

    char magic[4];
    reader.read_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw FormatError("bad magic, expected \"RTFD\"", 0);
    const std::uint32_t version = reader.read_u32("version");
    if (version != kDatasetVersion)
        throw FormatError("unsupported dataset version " + std::to_string(version), 4);
    const std::uint64_t header_len = reader.read_u64("header length");
    if (header_len > (1ULL << 24))
        throw FormatError("implausible header length", reader.offset() - 8);
    std::string header(header_len, '\0');
    reader.read_bytes(header.data(), header_len, "header");

    DatasetFile ds;
    try {
        detail::header_from_json(nlohmann::json::parse(header), ds);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed header JSON: ") + e.what(), 16);
    }
    const std::size_t n_rows =
        nlohmann::json::parse(header).at("n_rows").get<std::size_t>();

    ds.poses = Matrix(n_rows, kPoseDim);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < kPoseDim; ++c)
            ds.poses.at(r, c) = static_cast<double>(reader.read_f32("poses"));
    ds.targets = Matrix(n_rows, kFeatureDim);
    for (std::size_t r = 0; r < n_rows; ++r)
        for (std::size_t c = 0; c < kFeatureDim; ++c)
            ds.targets.at(r, c) = static_cast<double>(reader.read_f32("targets"));

    // stored IPD blocks must still sit on the unit circle
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = ds.targets.row(r);
        for (std::size_t k = 0; k < kNumBins; ++k) {
            const double s = row[kNumBins + k];
            const double c = row[2 * kNumBins + k];
            if (std::abs(s * s + c * c - 1.0) > 1e-6)
                throw FormatError("row " + std::to_string(r) +
                                      ": IPD block violates the unit-norm invariant",
                                  reader.offset());
        }
    }
    return ds;
}

// Human-readable companion file; `extra` lets the caller embed the full run
// configuration so the manifest can reproduce the run.
inline void write_manifest(const DatasetFile& ds, const std::string& path,
                           const nlohmann::json& extra = {}) {
    nlohmann::json j;
    j["header"] = detail::header_json(ds);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write manifest: " + tmp);
        out << j.dump(2) << "\n";
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move manifest into place: " + ec.message());
}

}  // namespace rtfforge
