#pragma once

// The four pose -> feature regressors behind one interface: the analytic
// free-field model, linear interpolation over stored samples, piecewise
// affine maps on k-means regions, and the trained network. Fitted models are
// immutable; predictions always carry a unit-norm IPD block.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "rtfforge/common.hpp"
#include "rtfforge/grid.hpp"
#include "rtfforge/nn.hpp"
#include "rtfforge/rtf.hpp"
#include "rtfforge/room.hpp"

namespace rtfforge {

inline constexpr std::size_t kPoseDim = 6;

inline Pose pose_from_row(const double* row) {
    Pose p;
    p.position = {row[0], row[1], row[2]};
    p.azimuth = row[3];
    p.elevation = row[4];
    p.rotation = row[5];
    return p;
}

inline void pose_to_row(const Pose& p, double* row) {
    const auto v = p.as_input();
    std::copy(v.begin(), v.end(), row);
}

class Regressor {
public:
    virtual ~Regressor() = default;
    virtual std::string kind() const = 0;
    virtual bool needs_fit() const = 0;
    virtual bool needs_grid() const { return false; }
    virtual FeatureVector predict(const Pose& pose) const = 0;
    virtual void save(std::ostream& out) const = 0;
};

// ---------------------------------------------------------------------------
// Free field.

class FreeFieldRegressor : public Regressor {
public:
    FreeFieldRegressor(MicArray mics, double speed_of_sound, double sample_rate)
        : mics_(std::move(mics)), c_(speed_of_sound), fs_(sample_rate) {
        mics_.validate();
    }

    std::string kind() const override { return "free_field"; }
    bool needs_fit() const override { return false; }

    FeatureVector predict(const Pose& pose) const override {
        return features_from_rtf(free_field_rtf(pose, mics_, c_, fs_));
    }

    void save(std::ostream& out) const override {
        write_checkpoint_header(out, kind());
        for (const auto& mic : mics_.mic_poses) {
            write_f64le(out, mic.position.x);
            write_f64le(out, mic.position.y);
            write_f64le(out, mic.position.z);
        }
        write_f64le(out, c_);
        write_f64le(out, fs_);
    }

    static std::unique_ptr<FreeFieldRegressor> load(LeReader& in) {
        MicArray mics;
        for (auto& mic : mics.mic_poses) {
            mic.position.x = in.read_f64("mic x");
            mic.position.y = in.read_f64("mic y");
            mic.position.z = in.read_f64("mic z");
        }
        const double c = in.read_f64("speed of sound");
        const double fs = in.read_f64("sample rate");
        return std::make_unique<FreeFieldRegressor>(mics, c, fs);
    }

    const MicArray& mics() const { return mics_; }

private:
    MicArray mics_;
    double c_;
    double fs_;
};

// ---------------------------------------------------------------------------
// Linear interpolation.

enum class InterpMode : std::uint32_t {
    kInverseDistance = 0,  // weighted mean of the nearest stored poses
    kAxisPair = 1,         // arithmetic mean of the two grid neighbors on one axis
};

class LinearInterpRegressor : public Regressor {
public:
    LinearInterpRegressor(InterpMode mode, std::size_t neighbors, double exponent,
                          int axis)
        : mode_(mode), neighbors_(neighbors), exponent_(exponent), axis_(axis) {
        if (neighbors_ < 1) throw ConfigError("linear interpolation needs neighbors >= 1");
        if (axis_ < 0 || axis_ > 2) throw ConfigError("interpolation axis must be 0, 1 or 2");
    }

    std::string kind() const override { return "linear"; }
    bool needs_fit() const override { return true; }
    bool needs_grid() const override { return mode_ == InterpMode::kAxisPair; }

    void fit(Matrix poses, Matrix targets, std::optional<SamplingGrid> grid) {
        if (poses.rows != targets.rows) throw SizeError("linear fit: row mismatch");
        if (poses.rows == 0) throw DataError("linear fit: no training pairs");
        if (poses.cols != kPoseDim) throw SizeError("linear fit: pose width mismatch");
        if (mode_ == InterpMode::kInverseDistance && poses.rows < neighbors_)
            throw DataError("linear fit: fewer training pairs than neighbors");
        if (mode_ == InterpMode::kAxisPair && !grid.has_value())
            throw DataError("linear fit: axis-pair mode needs grid metadata");
        poses_ = std::move(poses);
        targets_ = std::move(targets);
        grid_ = std::move(grid);
        if (mode_ == InterpMode::kAxisPair) build_columns();
    }

    FeatureVector predict(const Pose& pose) const override {
        if (poses_.rows == 0) throw DataError("linear predict: model is not fitted");
        std::vector<double> flat(kFeatureDim, 0.0);
        if (mode_ == InterpMode::kInverseDistance) {
            predict_idw(pose, flat);
        } else {
            predict_axis_pair(pose, flat);
        }
        return ipd_renormalize(FeatureVector::from_flat(flat));
    }

    void save(std::ostream& out) const override {
        write_checkpoint_header(out, kind());
        write_u32le(out, static_cast<std::uint32_t>(mode_));
        write_u32le(out, static_cast<std::uint32_t>(neighbors_));
        write_f64le(out, exponent_);
        write_u32le(out, static_cast<std::uint32_t>(axis_));
        write_u32le(out, grid_.has_value() ? 1 : 0);
        if (grid_) {
            write_f64le(out, grid_->origin.x);
            write_f64le(out, grid_->origin.y);
            write_f64le(out, grid_->origin.z);
            write_f64le(out, grid_->extent.x);
            write_f64le(out, grid_->extent.y);
            write_f64le(out, grid_->extent.z);
            write_f64le(out, grid_->spacing);
            for (std::size_t c : grid_->counts) write_u64le(out, c);
        }
        write_matrix(out, poses_);
        write_matrix(out, targets_);
    }

    static std::unique_ptr<LinearInterpRegressor> load(LeReader& in) {
        const auto mode = static_cast<InterpMode>(in.read_u32("interp mode"));
        const std::size_t neighbors = in.read_u32("neighbor count");
        const double exponent = in.read_f64("weight exponent");
        const int axis = static_cast<int>(in.read_u32("axis"));
        auto model = std::make_unique<LinearInterpRegressor>(mode, neighbors, exponent, axis);
        std::optional<SamplingGrid> grid;
        if (in.read_u32("grid flag") != 0) {
            SamplingGrid g;
            g.origin.x = in.read_f64("grid origin");
            g.origin.y = in.read_f64("grid origin");
            g.origin.z = in.read_f64("grid origin");
            g.extent.x = in.read_f64("grid extent");
            g.extent.y = in.read_f64("grid extent");
            g.extent.z = in.read_f64("grid extent");
            g.spacing = in.read_f64("grid spacing");
            for (auto& c : g.counts) c = in.read_u64("grid counts");
            grid = g;
        }
        Matrix poses = read_matrix(in, "stored poses");
        Matrix targets = read_matrix(in, "stored targets");
        model->fit(std::move(poses), std::move(targets), std::move(grid));
        return model;
    }

    static void write_matrix(std::ostream& out, const Matrix& m) {
        write_u64le(out, m.rows);
        write_u64le(out, m.cols);
        write_tensor(out, m.data);
    }

    static Matrix read_matrix(LeReader& in, const char* what) {
        Matrix m;
        m.rows = in.read_u64(what);
        m.cols = in.read_u64(what);
        m.data = read_tensor(in, what);
        if (m.data.size() != m.rows * m.cols)
            throw FormatError(std::string("matrix size mismatch in ") + what, in.offset());
        return m;
    }

    const Matrix& stored_poses() const { return poses_; }

private:
    void predict_idw(const Pose& pose, std::vector<double>& flat) const {
        const auto q = pose.as_input();
        std::vector<std::pair<double, std::size_t>> dist(poses_.rows);
        for (std::size_t r = 0; r < poses_.rows; ++r) {
            const double* row = poses_.row(r);
            double acc = 0.0;
            for (std::size_t d = 0; d < kPoseDim; ++d) {
                const double diff = row[d] - q[d];
                acc += diff * diff;
            }
            dist[r] = {std::sqrt(acc), r};
        }
        const std::size_t take = std::min(neighbors_, poses_.rows);
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take),
                          dist.end());
        double weight_sum = 0.0;
        for (std::size_t n = 0; n < take; ++n) {
            const double w = 1.0 / std::pow(dist[n].first + 1e-9, exponent_);
            weight_sum += w;
            const double* t = targets_.row(dist[n].second);
            for (std::size_t d = 0; d < kFeatureDim; ++d) flat[d] += w * t[d];
        }
        for (double& v : flat) v /= weight_sum;
    }

    void predict_axis_pair(const Pose& pose, std::vector<double>& flat) const {
        // nearest stored column in the two off-axis coordinates, then the
        // bracketing pair along the interpolation axis
        const auto q = pose.as_input();
        const int a0 = (axis_ + 1) % 3;
        const int a1 = (axis_ + 2) % 3;
        const ColumnKey key{q[static_cast<std::size_t>(a0)], q[static_cast<std::size_t>(a1)]};
        const Column* column = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [ck, col] : columns_) {
            const double da = ck.u - key.u;
            const double db = ck.v - key.v;
            const double d2 = da * da + db * db;
            if (d2 < best) {
                best = d2;
                column = &col;
            }
        }
        if (!column) throw DataError("linear predict: no stored columns");

        const double coord = q[static_cast<std::size_t>(axis_)];
        const auto& entries = column->entries;  // sorted by axis coordinate
        auto it = std::lower_bound(
            entries.begin(), entries.end(), coord,
            [](const ColumnEntry& e, double v) { return e.coord < v; });
        std::size_t lo_row, hi_row;
        if (it != entries.end() && std::abs(it->coord - coord) < 1e-9) {
            lo_row = hi_row = it->row;  // exact lattice hit
        } else if (it == entries.begin() || it == entries.end()) {
            throw ExtrapolationError(
                "linear predict: query lies outside the stored span of the "
                "interpolation axis");
        } else {
            lo_row = std::prev(it)->row;
            hi_row = it->row;
        }
        const double* t0 = targets_.row(lo_row);
        const double* t1 = targets_.row(hi_row);
        for (std::size_t d = 0; d < kFeatureDim; ++d) flat[d] = 0.5 * (t0[d] + t1[d]);
    }

    struct ColumnKey {
        double u = 0.0;
        double v = 0.0;
        bool operator<(const ColumnKey& o) const {
            if (u != o.u) return u < o.u;
            return v < o.v;
        }
    };
    struct ColumnEntry {
        double coord = 0.0;
        std::size_t row = 0;
    };
    struct Column {
        std::vector<ColumnEntry> entries;
    };

    void build_columns() {
        columns_.clear();
        const int a0 = (axis_ + 1) % 3;
        const int a1 = (axis_ + 2) % 3;
        for (std::size_t r = 0; r < poses_.rows; ++r) {
            const double* row = poses_.row(r);
            const ColumnKey key{row[a0], row[a1]};
            columns_[key].entries.push_back(
                {row[static_cast<std::size_t>(axis_)], r});
        }
        for (auto& [key, col] : columns_) {
            std::sort(col.entries.begin(), col.entries.end(),
                      [](const ColumnEntry& a, const ColumnEntry& b) {
                          return a.coord < b.coord;
                      });
        }
    }

    InterpMode mode_;
    std::size_t neighbors_;
    double exponent_;
    int axis_;
    Matrix poses_;
    Matrix targets_;
    std::optional<SamplingGrid> grid_;
    std::map<ColumnKey, Column> columns_;
};

// ---------------------------------------------------------------------------
// Piecewise affine on k-means regions.

class PiecewiseAffineRegressor : public Regressor {
public:
    PiecewiseAffineRegressor() = default;

    std::string kind() const override { return "affine"; }
    bool needs_fit() const override { return true; }

    void fit(const Matrix& poses, const Matrix& targets, std::size_t regions,
             std::uint64_t seed, double ridge = 1e-6, std::size_t kmeans_iters = 50,
             std::size_t kmeans_restarts = 3) {
        if (poses.rows != targets.rows) throw SizeError("affine fit: row mismatch");
        if (regions < 1) throw ConfigError("affine fit: need at least one region");
        if (poses.rows < regions) throw DataError("affine fit: fewer pairs than regions");
        centroids_ = kmeans(poses, regions, seed, kmeans_iters, kmeans_restarts);

        std::vector<std::vector<std::size_t>> members(regions);
        for (std::size_t r = 0; r < poses.rows; ++r)
            members[assign_region(poses.row(r))].push_back(r);

        const std::size_t d_in = poses.cols;
        for (std::size_t k = 0; k < regions; ++k) {
            if (members[k].size() < d_in + 1)
                throw EmptyRegionError(
                    "affine fit: region " + std::to_string(k) + " holds " +
                    std::to_string(members[k].size()) + " pairs (< " +
                    std::to_string(d_in + 1) + "); refit with a smaller region count");
        }

        weights_.assign(regions, Matrix());
        biases_.assign(regions, std::vector<double>());
        for (std::size_t k = 0; k < regions; ++k)
            fit_region(poses, targets, members[k], ridge, weights_[k], biases_[k]);
    }

    FeatureVector predict(const Pose& pose) const override {
        if (weights_.empty()) throw DataError("affine predict: model is not fitted");
        const auto q = pose.as_input();
        const std::size_t k = assign_region(q.data());
        const Matrix& a = weights_[k];
        const std::vector<double>& b = biases_[k];
        std::vector<double> flat(kFeatureDim);
        for (std::size_t o = 0; o < kFeatureDim; ++o) {
            const double* arow = a.row(o);
            double acc = b[o];
            for (std::size_t i = 0; i < a.cols; ++i) acc += arow[i] * q[i];
            flat[o] = acc;
        }
        return ipd_renormalize(FeatureVector::from_flat(flat));
    }

    void save(std::ostream& out) const override {
        write_checkpoint_header(out, kind());
        write_u32le(out, static_cast<std::uint32_t>(weights_.size()));
        LinearInterpRegressor::write_matrix(out, centroids_);
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            LinearInterpRegressor::write_matrix(out, weights_[k]);
            write_tensor(out, biases_[k]);
        }
    }

    static std::unique_ptr<PiecewiseAffineRegressor> load(LeReader& in) {
        auto model = std::make_unique<PiecewiseAffineRegressor>();
        const std::uint32_t regions = in.read_u32("region count");
        model->centroids_ = LinearInterpRegressor::read_matrix(in, "centroids");
        model->weights_.resize(regions);
        model->biases_.resize(regions);
        for (std::uint32_t k = 0; k < regions; ++k) {
            model->weights_[k] = LinearInterpRegressor::read_matrix(in, "region weights");
            model->biases_[k] = read_tensor(in, "region bias");
        }
        return model;
    }

    std::size_t region_count() const { return weights_.size(); }
    const Matrix& centroids() const { return centroids_; }

private:
    std::size_t assign_region(const double* q) const {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < centroids_.rows; ++k) {
            const double* c = centroids_.row(k);
            double acc = 0.0;
            for (std::size_t d = 0; d < centroids_.cols; ++d) {
                const double diff = c[d] - q[d];
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best = k;
            }
        }
        return best;
    }

    static Matrix kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iters, std::size_t restarts) {
        Matrix best_centroids;
        double best_sse = std::numeric_limits<double>::infinity();
        for (std::size_t restart = 0; restart < restarts; ++restart) {
            GaussianRng rng(derive_seed(seed, restart));
            Matrix centroids = lloyd(points, k, rng, max_iters);
            const double sse = total_sse(points, centroids);
            if (sse < best_sse) {
                best_sse = sse;
                best_centroids = std::move(centroids);
            }
        }
        return best_centroids;
    }

    static Matrix lloyd(const Matrix& points, std::size_t k, GaussianRng& rng,
                        std::size_t max_iters) {
        // distinct random points as the initial centroids
        std::vector<std::size_t> pool(points.rows);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(
                                          rng.next_u64() % (points.rows - i));
            std::swap(pool[i], pool[j]);
        }
        Matrix centroids(k, points.cols);
        for (std::size_t i = 0; i < k; ++i)
            std::copy(points.row(pool[i]), points.row(pool[i]) + points.cols,
                      centroids.row(i));

        std::vector<std::size_t> assignment(points.rows, 0);
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            bool changed = false;
            for (std::size_t r = 0; r < points.rows; ++r) {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < k; ++c) {
                    double acc = 0.0;
                    const double* crow = centroids.row(c);
                    const double* prow = points.row(r);
                    for (std::size_t d = 0; d < points.cols; ++d) {
                        const double diff = crow[d] - prow[d];
                        acc += diff * diff;
                    }
                    if (acc < best_d) {
                        best_d = acc;
                        best = c;
                    }
                }
                if (assignment[r] != best) {
                    assignment[r] = best;
                    changed = true;
                }
            }
            if (!changed && iter > 0) break;
            Matrix sums(k, points.cols);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t r = 0; r < points.rows; ++r) {
                double* srow = sums.row(assignment[r]);
                const double* prow = points.row(r);
                for (std::size_t d = 0; d < points.cols; ++d) srow[d] += prow[d];
                ++counts[assignment[r]];
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) continue;  // keep the previous centroid
                double* crow = centroids.row(c);
                const double* srow = sums.row(c);
                for (std::size_t d = 0; d < points.cols; ++d)
                    crow[d] = srow[d] / static_cast<double>(counts[c]);
            }
        }
        return centroids;
    }

    static double total_sse(const Matrix& points, const Matrix& centroids) {
        double sse = 0.0;
        for (std::size_t r = 0; r < points.rows; ++r) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centroids.rows; ++c) {
                double acc = 0.0;
                for (std::size_t d = 0; d < points.cols; ++d) {
                    const double diff = centroids.at(c, d) - points.at(r, d);
                    acc += diff * diff;
                }
                best = std::min(best, acc);
            }
            sse += best;
        }
        return sse;
    }

    // Ridge least squares on the augmented design [X 1] for one region.
    static void fit_region(const Matrix& poses, const Matrix& targets,
                           const std::vector<std::size_t>& rows, double ridge,
                           Matrix& weights, std::vector<double>& bias) {
        const std::size_t d_in = poses.cols;
        const std::size_t d_aug = d_in + 1;
        const std::size_t d_out = targets.cols;

        // normal equations: (X^T X + ridge I) W = X^T Y
        std::vector<double> gram(d_aug * d_aug, 0.0);
        std::vector<double> moment(d_aug * d_out, 0.0);
        std::vector<double> x(d_aug, 1.0);
        for (std::size_t r : rows) {
            const double* prow = poses.row(r);
            for (std::size_t d = 0; d < d_in; ++d) x[d] = prow[d];
            x[d_in] = 1.0;
            for (std::size_t i = 0; i < d_aug; ++i)
                for (std::size_t j = 0; j < d_aug; ++j) gram[i * d_aug + j] += x[i] * x[j];
            const double* trow = targets.row(r);
            for (std::size_t i = 0; i < d_aug; ++i)
                for (std::size_t o = 0; o < d_out; ++o)
                    moment[i * d_out + o] += x[i] * trow[o];
        }
        for (std::size_t i = 0; i < d_aug; ++i) gram[i * d_aug + i] += ridge;

        // Cholesky factorization of the regularized Gram matrix
        std::vector<double> chol(gram);
        for (std::size_t i = 0; i < d_aug; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double acc = chol[i * d_aug + j];
                for (std::size_t m = 0; m < j; ++m)
                    acc -= chol[i * d_aug + m] * chol[j * d_aug + m];
                if (i == j) {
                    if (acc <= 0.0)
                        throw NumericError(
                            "affine fit: rank-deficient region despite ridge");
                    chol[i * d_aug + i] = std::sqrt(acc);
                } else {
                    chol[i * d_aug + j] = acc / chol[j * d_aug + j];
                }
            }
        }

        // forward/back substitution per output column
        weights = Matrix(d_out, d_in);
        bias.assign(d_out, 0.0);
        std::vector<double> y(d_aug), w(d_aug);
        for (std::size_t o = 0; o < d_out; ++o) {
            for (std::size_t i = 0; i < d_aug; ++i) {
                double acc = moment[i * d_out + o];
                for (std::size_t m = 0; m < i; ++m) acc -= chol[i * d_aug + m] * y[m];
                y[i] = acc / chol[i * d_aug + i];
            }
            for (std::size_t i = d_aug; i-- > 0;) {
                double acc = y[i];
                for (std::size_t m = i + 1; m < d_aug; ++m)
                    acc -= chol[m * d_aug + i] * w[m];
                w[i] = acc / chol[i * d_aug + i];
            }
            for (std::size_t d = 0; d < d_in; ++d) weights.at(o, d) = w[d];
            bias[o] = w[d_in];
        }
    }

    Matrix centroids_;            // regions x pose dim
    std::vector<Matrix> weights_;  // per region, kFeatureDim x pose dim
    std::vector<std::vector<double>> biases_;
};

// ---------------------------------------------------------------------------
// Trained network.

struct DnnSettings {
    std::vector<std::size_t> hidden{1024, 1024, 1024};
    TrainConfig train;
    bool renorm_inference = true;
    bool normalize_by_direct = false;
    std::uint64_t init_seed = 1;
};

class DnnRegressor : public Regressor {
public:
    DnnRegressor() = default;

    // Geometry is needed whenever direct-path normalization is on.
    DnnRegressor(DnnSettings settings, MicArray mics, double speed_of_sound,
                 double sample_rate)
        : settings_(std::move(settings)), mics_(std::move(mics)), c_(speed_of_sound),
          fs_(sample_rate) {}

    std::string kind() const override { return "dnn"; }
    bool needs_fit() const override { return true; }

    const std::vector<EpochRecord>& history() const { return history_; }
    const MlpModel& model() const { return model_; }

    void fit(const Matrix& train_poses, const Matrix& train_targets,
             const Matrix& dev_poses, const Matrix& dev_targets) {
        if (train_poses.rows == 0 || dev_poses.rows == 0)
            throw DataError("dnn fit: training and development sets must be non-empty");
        compute_standardization(train_poses);

        std::vector<std::size_t> sizes;
        sizes.push_back(train_poses.cols);
        for (std::size_t h : settings_.hidden) sizes.push_back(h);
        sizes.push_back(kFeatureDim);
        MlpModel model = init_model(sizes, settings_.init_seed, true);

        const Matrix tx = standardize(train_poses);
        const Matrix dx = standardize(dev_poses);
        const Matrix ty = map_targets(train_poses, train_targets);
        const Matrix dy = map_targets(dev_poses, dev_targets);

        TrainResult result = train(std::move(model), tx, ty, dx, dy, settings_.train);
        model_ = std::move(result.model);
        history_ = std::move(result.history);
    }

    FeatureVector predict(const Pose& pose) const override {
        if (model_.layers.empty()) throw DataError("dnn predict: model is not fitted");
        const auto input = pose.as_input();
        std::vector<double> x(input.begin(), input.end());
        for (std::size_t d = 0; d < x.size(); ++d)
            x[d] = (x[d] - input_mean_[d]) / input_std_[d];
        const auto raw = forward(model_, x, settings_.renorm_inference);
        FeatureVector f = ipd_renormalize(FeatureVector::from_flat(raw));
        if (settings_.normalize_by_direct) {
            const RtfVector direct = free_field_rtf(pose, mics_, c_, fs_);
            f = features_from_rtf(denormalize_by_direct(rtf_from_features(f), direct));
        }
        return f;
    }

    void save(std::ostream& out) const override {
        write_checkpoint_header(out, kind());
        write_mlp(out, model_);
        write_tensor(out, input_mean_);
        write_tensor(out, input_std_);
        write_u32le(out, settings_.renorm_inference ? 1 : 0);
        write_u32le(out, settings_.normalize_by_direct ? 1 : 0);
        for (const auto& mic : mics_.mic_poses) {
            write_f64le(out, mic.position.x);
            write_f64le(out, mic.position.y);
            write_f64le(out, mic.position.z);
        }
        write_f64le(out, c_);
        write_f64le(out, fs_);
    }

    static std::unique_ptr<DnnRegressor> load(LeReader& in) {
        auto model = std::make_unique<DnnRegressor>();
        model->model_ = read_mlp(in);
        model->input_mean_ = read_tensor(in, "input mean");
        model->input_std_ = read_tensor(in, "input std");
        model->settings_.renorm_inference = in.read_u32("renorm flag") != 0;
        model->settings_.normalize_by_direct = in.read_u32("direct-norm flag") != 0;
        for (auto& mic : model->mics_.mic_poses) {
            mic.position.x = in.read_f64("mic x");
            mic.position.y = in.read_f64("mic y");
            mic.position.z = in.read_f64("mic z");
        }
        model->c_ = in.read_f64("speed of sound");
        model->fs_ = in.read_f64("sample rate");
        return model;
    }

private:
    void compute_standardization(const Matrix& poses) {
        const std::size_t d_in = poses.cols;
        input_mean_.assign(d_in, 0.0);
        input_std_.assign(d_in, 1.0);
        for (std::size_t r = 0; r < poses.rows; ++r)
            for (std::size_t d = 0; d < d_in; ++d) input_mean_[d] += poses.at(r, d);
        for (double& v : input_mean_) v /= static_cast<double>(poses.rows);
        std::vector<double> var(d_in, 0.0);
        for (std::size_t r = 0; r < poses.rows; ++r)
            for (std::size_t d = 0; d < d_in; ++d) {
                const double diff = poses.at(r, d) - input_mean_[d];
                var[d] += diff * diff;
            }
        for (std::size_t d = 0; d < d_in; ++d) {
            const double std_dev = std::sqrt(var[d] / static_cast<double>(poses.rows));
            if (std_dev < 1e-12) {
                // constant dimension passes through untouched
                input_mean_[d] = 0.0;
                input_std_[d] = 1.0;
            } else {
                input_std_[d] = std_dev;
            }
        }
    }

    Matrix standardize(const Matrix& poses) const {
        Matrix out = poses;
        for (std::size_t r = 0; r < out.rows; ++r)
            for (std::size_t d = 0; d < out.cols; ++d)
                out.at(r, d) = (out.at(r, d) - input_mean_[d]) / input_std_[d];
        return out;
    }

    // Training targets, optionally re-expressed relative to the free-field
    // response of each pose.
    Matrix map_targets(const Matrix& poses, const Matrix& targets) const {
        if (!settings_.normalize_by_direct) return targets;
        Matrix out(targets.rows, targets.cols);
        for (std::size_t r = 0; r < targets.rows; ++r) {
            const Pose pose = pose_from_row(poses.row(r));
            const RtfVector direct = free_field_rtf(pose, mics_, c_, fs_);
            std::vector<double> row(targets.row(r), targets.row(r) + targets.cols);
            const RtfVector rtf = rtf_from_features(FeatureVector::from_flat(row));
            const FeatureVector mapped =
                features_from_rtf(normalize_by_direct(rtf, direct));
            const auto flat = mapped.flat();
            std::copy(flat.begin(), flat.end(), out.row(r));
        }
        return out;
    }

    DnnSettings settings_;
    MicArray mics_;
    double c_ = 343.0;
    double fs_ = 16000.0;
    MlpModel model_;
    std::vector<double> input_mean_;
    std::vector<double> input_std_;
    std::vector<EpochRecord> history_;
};

// ---------------------------------------------------------------------------
// Checkpoint loading by kind tag.

inline std::unique_ptr<Regressor> load_regressor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    LeReader reader(in);
    const std::string kind = read_checkpoint_header(reader);
    if (kind == "free_field") return FreeFieldRegressor::load(reader);
    if (kind == "linear") return LinearInterpRegressor::load(reader);
    if (kind == "affine") return PiecewiseAffineRegressor::load(reader);
    if (kind == "dnn") return DnnRegressor::load(reader);
    throw FormatError("unknown regressor kind \"" + kind + "\"", reader.offset());
}

inline void save_regressor(const Regressor& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint: " + tmp);
        model.save(out);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

}  // namespace rtfforge
