#pragma once

// Minimal feedforward network trained from scratch: dense layers with
// pre-activation layer normalization and ReLU, a linear output layer with an
// optional unit-circle renormalization of the IPD block, MSE loss,
// reverse-mode gradients, Adam, plateau-halved learning rate and early
// stopping on the development set.
//
// The loss convention is mean over batch and over output dimensions of the
// squared error (no 1/2 factor).
//
// Threading: matrix kernels split work over output elements while every
// reduction runs sequentially inside one worker, so results do not depend on
// the thread count.

#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rtfforge/common.hpp"
#include "rtfforge/rtf.hpp"

namespace rtfforge {

inline constexpr double kLayerNormEpsilon = 1e-5;

// Row-major dense matrix, the only tensor shape the network needs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct DenseLayer {
    Matrix weights;  // out x in
    std::vector<double> bias;
    // layer-norm parameters; empty on the output layer
    std::vector<double> ln_gain;
    std::vector<double> ln_bias;
};

struct MlpModel {
    std::vector<std::size_t> sizes;  // input, hidden..., output
    std::vector<DenseLayer> layers;
    bool ipd_renorm = true;  // renormalize the sin/cos block of the output

    std::size_t input_dim() const { return sizes.front(); }
    std::size_t output_dim() const { return sizes.back(); }
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-3;
    std::uint64_t step = 0;
    std::vector<double> m;  // first moments, one flat vector per model
    std::vector<double> v;  // second moments
};

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t max_epochs = 60;
    std::size_t patience = 5;
    double learning_rate = 1e-3;
    double lr_decay = 0.5;
    double lr_floor = 1e-5;
    std::size_t plateau_epochs = 2;  // halve the rate after this many flat epochs
    std::uint64_t seed = 0;
    bool renorm_in_training = true;  // apply the IPD post-map inside the loss

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_loss = 0.0;
    double learning_rate = 0.0;
};

// ---------------------------------------------------------------------------
// Model construction.

inline MlpModel init_model(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                           bool ipd_renorm = true) {
    if (sizes.size() < 3)
        throw SizeError("init_model: need at least one hidden layer");
    for (std::size_t s : sizes)
        if (s == 0) throw SizeError("init_model: zero-width layer");
    MlpModel model;
    model.sizes = sizes;
    model.ipd_renorm = ipd_renorm;
    GaussianRng rng(seed);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        DenseLayer layer;
        layer.weights = Matrix(sizes[i + 1], sizes[i]);
        const double std_dev = std::sqrt(1.0 / static_cast<double>(sizes[i]));
        for (double& w : layer.weights.data) w = std_dev * rng.gaussian();
        layer.bias.assign(sizes[i + 1], 0.0);
        const bool hidden = (i + 2 < sizes.size());
        if (hidden) {
            layer.ln_gain.assign(sizes[i + 1], 1.0);
            layer.ln_bias.assign(sizes[i + 1], 0.0);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Layer normalization over the feature dimension (biased variance).

inline std::vector<double> layer_norm(const std::vector<double>& a,
                                      const std::vector<double>& gain,
                                      const std::vector<double>& bias,
                                      double epsilon = kLayerNormEpsilon) {
    const std::size_t n = a.size();
    if (n < 2) throw SizeError("layer_norm: need at least 2 activations");
    if (gain.size() != n || bias.size() != n)
        throw SizeError("layer_norm: parameter shape mismatch");
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (a[i] - mean) * inv_std * gain[i] + bias[i];
    return out;
}

// ---------------------------------------------------------------------------
// Batched forward/backward pass.
//
// Activations are kept per batch so gradients can be formed as matrix
// products with a fixed summation order.

namespace detail {

struct LayerCache {
    Matrix input;       // batch x in, activations entering the layer
    Matrix pre_norm;    // batch x out, affine output (hidden layers only)
    Matrix normalized;  // batch x out, layer-norm output before gain/bias
    std::vector<double> inv_std;  // per batch row
    Matrix output;      // batch x out, after activation / post-map
    Matrix pre_map;     // output layer only: affine output before the IPD map
};

struct ForwardCache {
    std::vector<LayerCache> layers;
};

// C = A (batch x in) * W^T (in x out) + bias; parallel over batch rows.
inline void affine_forward(const Matrix& a, const DenseLayer& layer, Matrix& out) {
    const std::size_t batch = a.rows;
    const std::size_t in = layer.weights.cols;
    const std::size_t n_out = layer.weights.rows;
    out = Matrix(batch, n_out);
    parallel_for(batch, [&](std::size_t b) {
        const double* arow = a.row(b);
        double* orow = out.row(b);
        for (std::size_t o = 0; o < n_out; ++o) {
            const double* wrow = layer.weights.row(o);
            double acc = layer.bias[o];
            for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * arow[i];
            orow[o] = acc;
        }
    });
}

inline void ipd_renorm_forward(const double* pre, double* post) {
    for (std::size_t k = 0; k < kNumBins; ++k) post[k] = pre[k];
    for (std::size_t k = 0; k < kNumBins; ++k) {
        const double s = pre[kNumBins + k];
        const double c = pre[2 * kNumBins + k];
        const double r = std::sqrt(s * s + c * c);
        if (r < kMagnitudeFloor) {
            post[kNumBins + k] = 0.0;
            post[2 * kNumBins + k] = 1.0;
        } else {
            post[kNumBins + k] = s / r;
            post[2 * kNumBins + k] = c / r;
        }
    }
}

}  // namespace detail

// Forward pass for a whole batch; the cache feeds the backward pass.
inline Matrix forward_batch(const MlpModel& model, const Matrix& x,
                            bool apply_ipd_renorm, detail::ForwardCache* cache) {
    if (x.cols != model.input_dim())
        throw SizeError("forward: input width " + std::to_string(x.cols) +
                        " does not match model input " + std::to_string(model.input_dim()));
    if (cache) cache->layers.assign(model.layers.size(), {});
    Matrix act = x;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const DenseLayer& layer = model.layers[li];
        const bool hidden = (li + 1 < model.layers.size());
        detail::LayerCache* lc = cache ? &cache->layers[li] : nullptr;
        if (lc) lc->input = act;

        Matrix affine;
        detail::affine_forward(act, layer, affine);

        if (hidden) {
            const std::size_t n = affine.cols;
            Matrix normalized(affine.rows, n);
            Matrix out(affine.rows, n);
            std::vector<double> inv_stds(affine.rows);
            parallel_for(affine.rows, [&](std::size_t b) {
                const double* z = affine.row(b);
                double mean = 0.0;
                for (std::size_t i = 0; i < n; ++i) mean += z[i];
                mean /= static_cast<double>(n);
                double var = 0.0;
                for (std::size_t i = 0; i < n; ++i) var += (z[i] - mean) * (z[i] - mean);
                var /= static_cast<double>(n);
                const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
                inv_stds[b] = inv_std;
                double* nrow = normalized.row(b);
                double* orow = out.row(b);
                for (std::size_t i = 0; i < n; ++i) {
                    const double zhat = (z[i] - mean) * inv_std;
                    nrow[i] = zhat;
                    const double ln = zhat * layer.ln_gain[i] + layer.ln_bias[i];
                    orow[i] = ln > 0.0 ? ln : 0.0;  // ReLU
                }
            });
            if (lc) {
                lc->pre_norm = std::move(affine);
                lc->normalized = std::move(normalized);
                lc->inv_std = std::move(inv_stds);
                lc->output = out;
            }
            act = std::move(out);
        } else {
            const bool renorm = apply_ipd_renorm && model.ipd_renorm &&
                                affine.cols == kFeatureDim;
            if (renorm) {
                Matrix post(affine.rows, affine.cols);
                parallel_for(affine.rows, [&](std::size_t b) {
                    detail::ipd_renorm_forward(affine.row(b), post.row(b));
                });
                if (lc) {
                    lc->pre_map = std::move(affine);
                    lc->output = post;
                }
                act = std::move(post);
            } else {
                if (lc) lc->output = affine;
                act = std::move(affine);
            }
        }
    }
    for (double v : act.data)
        if (!std::isfinite(v)) throw NumericError("forward: non-finite activation");
    return act;
}

inline std::vector<double> forward(const MlpModel& model, const std::vector<double>& x,
                                   bool apply_ipd_renorm = true) {
    Matrix xm(1, x.size());
    std::copy(x.begin(), x.end(), xm.data.begin());
    const Matrix y = forward_batch(model, xm, apply_ipd_renorm, nullptr);
    return y.data;
}

// Gradients for every parameter, in the layer order of the model.
struct Gradients {
    std::vector<DenseLayer> layers;  // same shapes as the model's layers
};

inline Gradients zero_gradients(const MlpModel& model) {
    Gradients g;
    g.layers.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const DenseLayer& l = model.layers[i];
        g.layers[i].weights = Matrix(l.weights.rows, l.weights.cols);
        g.layers[i].bias.assign(l.bias.size(), 0.0);
        g.layers[i].ln_gain.assign(l.ln_gain.size(), 0.0);
        g.layers[i].ln_bias.assign(l.ln_bias.size(), 0.0);
    }
    return g;
}

// MSE over the batch: mean over rows and output dimensions of the squared
// error.
inline double mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw SizeError("mse_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.data.size());
}

// Reverse-mode gradients of the batch MSE loss. Returns the loss.
inline double backward_batch(const MlpModel& model, const detail::ForwardCache& cache,
                             const Matrix& target, bool applied_ipd_renorm,
                             Gradients& grads) {
    const Matrix& pred = cache.layers.back().output;
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw SizeError("backward: target shape mismatch");
    const double loss = mse_loss(pred, target);
    const double scale = 2.0 / static_cast<double>(pred.data.size());

    Matrix delta(pred.rows, pred.cols);
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        delta.data[i] = scale * (pred.data[i] - target.data[i]);

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const DenseLayer& layer = model.layers[li];
        const detail::LayerCache& lc = cache.layers[li];
        DenseLayer& g = grads.layers[li];
        const bool hidden = (li + 1 < model.layers.size());
        const std::size_t n_out = layer.weights.rows;
        const std::size_t n_in = layer.weights.cols;
        const std::size_t batch = delta.rows;

        if (!hidden && applied_ipd_renorm && model.ipd_renorm && n_out == kFeatureDim) {
            // Through y_s = s/r, y_c = c/r with r = sqrt(s^2 + c^2):
            // dL/ds = (dy_s * c - dy_c * s) * c / r^3, and symmetrically for c.
            Matrix mapped(batch, n_out);
            parallel_for(batch, [&](std::size_t b) {
                const double* pre = lc.pre_map.row(b);
                const double* drow = delta.row(b);
                double* mrow = mapped.row(b);
                for (std::size_t k = 0; k < kNumBins; ++k) mrow[k] = drow[k];
                for (std::size_t k = 0; k < kNumBins; ++k) {
                    const double s = pre[kNumBins + k];
                    const double c = pre[2 * kNumBins + k];
                    const double r2 = s * s + c * c;
                    const double r = std::sqrt(r2);
                    if (r < kMagnitudeFloor) {
                        mrow[kNumBins + k] = 0.0;
                        mrow[2 * kNumBins + k] = 0.0;
                        continue;
                    }
                    const double inv_r3 = 1.0 / (r2 * r);
                    const double ds = drow[kNumBins + k];
                    const double dc = drow[2 * kNumBins + k];
                    mrow[kNumBins + k] = (ds * c - dc * s) * c * inv_r3;
                    mrow[2 * kNumBins + k] = (dc * s - ds * c) * s * inv_r3;
                }
            });
            delta = std::move(mapped);
        }

        if (hidden) {
            // Back through ReLU, gain/bias and the normalization statistics.
            Matrix dz(batch, n_out);
            parallel_for(batch, [&](std::size_t b) {
                const double* out_row = lc.output.row(b);
                const double* norm_row = lc.normalized.row(b);
                const double* drow = delta.row(b);
                double* dzrow = dz.row(b);
                const double inv_std = lc.inv_std[b];
                const double inv_n = 1.0 / static_cast<double>(n_out);
                double sum_dzhat = 0.0;
                double sum_dzhat_zhat = 0.0;
                std::vector<double> dzhat(n_out);
                for (std::size_t i = 0; i < n_out; ++i) {
                    const double dln = (out_row[i] > 0.0) ? drow[i] : 0.0;
                    dzhat[i] = dln * layer.ln_gain[i];
                    sum_dzhat += dzhat[i];
                    sum_dzhat_zhat += dzhat[i] * norm_row[i];
                }
                for (std::size_t i = 0; i < n_out; ++i) {
                    dzrow[i] = inv_std * (dzhat[i] - inv_n * sum_dzhat -
                                          norm_row[i] * inv_n * sum_dzhat_zhat);
                }
            });
            // gain/bias gradients reduce over the batch in index order
            parallel_for(n_out, [&](std::size_t i) {
                double ggain = 0.0;
                double gbias = 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                    const double dln =
                        (lc.output.at(b, i) > 0.0) ? delta.at(b, i) : 0.0;
                    ggain += dln * lc.normalized.at(b, i);
                    gbias += dln;
                }
                g.ln_gain[i] += ggain;
                g.ln_bias[i] += gbias;
            });
            delta = std::move(dz);
        }

        // dW = delta^T * input; each output row accumulates over the batch
        // sequentially.
        parallel_for(n_out, [&](std::size_t o) {
            double* grow = g.weights.row(o);
            double gb = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const double d = delta.at(b, o);
                if (d == 0.0) continue;
                const double* in_row = lc.input.row(b);
                for (std::size_t i = 0; i < n_in; ++i) grow[i] += d * in_row[i];
                gb += d;
            }
            g.bias[o] += gb;
        });

        if (li > 0) {
            Matrix dinput(batch, n_in);
            parallel_for(batch, [&](std::size_t b) {
                const double* drow = delta.row(b);
                double* dirow = dinput.row(b);
                for (std::size_t o = 0; o < n_out; ++o) {
                    const double d = drow[o];
                    if (d == 0.0) continue;
                    const double* wrow = layer.weights.row(o);
                    for (std::size_t i = 0; i < n_in; ++i) dirow[i] += d * wrow[i];
                }
            });
            delta = std::move(dinput);
        }
    }
    return loss;
}

// Single-sample convenience wrapper used by the unit tests.
inline Gradients backward(const MlpModel& model, const std::vector<double>& x,
                          const std::vector<double>& target,
                          bool apply_ipd_renorm = true, double* loss_out = nullptr) {
    Matrix xm(1, x.size());
    std::copy(x.begin(), x.end(), xm.data.begin());
    Matrix tm(1, target.size());
    std::copy(target.begin(), target.end(), tm.data.begin());
    detail::ForwardCache cache;
    forward_batch(model, xm, apply_ipd_renorm, &cache);
    Gradients grads = zero_gradients(model);
    const double loss = backward_batch(model, cache, tm, apply_ipd_renorm, grads);
    if (loss_out) *loss_out = loss;
    return grads;
}

// ---------------------------------------------------------------------------
// Parameter flattening and the Adam update.

namespace detail {

template <typename ModelLike, typename F>
void for_each_tensor(ModelLike& m, F&& f) {
    for (auto& layer : m.layers) {
        f(layer.weights.data);
        f(layer.bias);
        if (!layer.ln_gain.empty()) {
            f(layer.ln_gain);
            f(layer.ln_bias);
        }
    }
}

inline std::size_t parameter_count(const MlpModel& model) {
    std::size_t n = 0;
    for_each_tensor(model, [&](const std::vector<double>& t) { n += t.size(); });
    return n;
}

}  // namespace detail

inline AdamState make_adam_state(const MlpModel& model, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    const std::size_t n = detail::parameter_count(model);
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
}

// Bias-corrected Adam step over all model parameters.
inline void adam_step(AdamState& state, MlpModel& model, const Gradients& grads) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t offset = 0;
    auto* mdata = state.m.data();
    auto* vdata = state.v.data();

    std::vector<std::vector<double>*> params;
    std::vector<const std::vector<double>*> gs;
    detail::for_each_tensor(model, [&](std::vector<double>& t) { params.push_back(&t); });
    detail::for_each_tensor(const_cast<Gradients&>(grads),
                            [&](std::vector<double>& t) { gs.push_back(&t); });
    if (params.size() != gs.size()) throw SizeError("adam_step: gradient layout mismatch");

    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        std::vector<double>& p = *params[ti];
        const std::vector<double>& g = *gs[ti];
        if (p.size() != g.size()) throw SizeError("adam_step: tensor shape mismatch");
        if (offset + p.size() > state.m.size())
            throw SizeError("adam_step: state shorter than the model");
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double grad = g[i];
            if (!std::isfinite(grad)) throw NumericError("adam_step: non-finite gradient");
            double& m = mdata[offset + i];
            double& v = vdata[offset + i];
            m = state.beta1 * m + (1.0 - state.beta1) * grad;
            v = state.beta2 * v + (1.0 - state.beta2) * grad * grad;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
        offset += p.size();
    }
}

// ---------------------------------------------------------------------------
// Training loop.

struct TrainResult {
    MlpModel model;  // best development-loss snapshot
    std::vector<EpochRecord> history;
    double best_dev_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

inline double evaluate_mse(const MlpModel& model, const Matrix& x, const Matrix& y,
                           bool apply_ipd_renorm) {
    const Matrix pred = forward_batch(model, x, apply_ipd_renorm, nullptr);
    return mse_loss(pred, y);
}

inline TrainResult train(MlpModel model, const Matrix& train_x, const Matrix& train_y,
                         const Matrix& dev_x, const Matrix& dev_y,
                         const TrainConfig& config) {
    config.validate();
    if (train_x.rows == 0 || dev_x.rows == 0)
        throw DataError("train: training and development sets must be non-empty");
    if (train_x.rows != train_y.rows || dev_x.rows != dev_y.rows)
        throw SizeError("train: input/target row mismatch");

    AdamState adam = make_adam_state(model, config.learning_rate);
    GaussianRng shuffle_rng(derive_seed(config.seed, 0x5u));

    TrainResult result;
    result.model = model;

    std::vector<std::size_t> order(train_x.rows);
    std::iota(order.begin(), order.end(), 0);
    std::size_t epochs_without_improvement = 0;
    std::size_t plateau = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        // Fisher-Yates on the seeded stream
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(shuffle_rng.next_u64() % i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::size_t bs = end - start;
            Matrix bx(bs, train_x.cols), by(bs, train_y.cols);
            for (std::size_t b = 0; b < bs; ++b) {
                const std::size_t src = order[start + b];
                std::copy(train_x.row(src), train_x.row(src) + train_x.cols, bx.row(b));
                std::copy(train_y.row(src), train_y.row(src) + train_y.cols, by.row(b));
            }
            detail::ForwardCache cache;
            forward_batch(model, bx, config.renorm_in_training, &cache);
            Gradients grads = zero_gradients(model);
            epoch_loss += backward_batch(model, cache, by, config.renorm_in_training, grads);
            ++n_batches;
            adam_step(adam, model, grads);
        }
        epoch_loss /= static_cast<double>(std::max<std::size_t>(n_batches, 1));

        const double dev_loss = evaluate_mse(model, dev_x, dev_y, config.renorm_in_training);
        result.history.push_back({epoch, epoch_loss, dev_loss, adam.learning_rate});

        if (dev_loss < result.best_dev_loss) {
            result.best_dev_loss = dev_loss;
            result.best_epoch = epoch;
            result.model = model;
            epochs_without_improvement = 0;
            plateau = 0;
        } else {
            ++epochs_without_improvement;
            ++plateau;
            if (plateau >= config.plateau_epochs) {
                adam.learning_rate =
                    std::max(config.lr_floor, adam.learning_rate * config.lr_decay);
                plateau = 0;
            }
            if (epochs_without_improvement >= config.patience) break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint container. Shared by the regressors: a kind tag follows the
// magic so any fitted model can live in the same format.

inline constexpr char kCheckpointMagic[4] = {'R', 'T', 'F', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_tensor(std::ostream& out, const std::vector<double>& t) {
    write_u64le(out, t.size());
    for (double v : t) write_f64le(out, v);
}

inline std::vector<double> read_tensor(LeReader& in, const char* what) {
    const std::uint64_t n = in.read_u64(what);
    if (n > (1ULL << 31))
        throw FormatError(std::string("implausible tensor size for ") + what,
                          in.offset() - 8);
    std::vector<double> t(n);
    for (std::uint64_t i = 0; i < n; ++i) t[i] = in.read_f64(what);
    return t;
}

inline void write_checkpoint_header(std::ostream& out, const std::string& kind) {
    write_bytes(out, kCheckpointMagic, 4);
    write_u32le(out, kCheckpointVersion);
    write_u32le(out, static_cast<std::uint32_t>(kind.size()));
    write_bytes(out, kind.data(), kind.size());
}

inline std::string read_checkpoint_header(LeReader& in) {
    char magic[4];
    in.read_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("bad magic, expected \"RTFM\"", 0);
    const std::uint32_t version = in.read_u32("version");
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
    const std::uint32_t kind_len = in.read_u32("kind length");
    if (kind_len > 64) throw FormatError("implausible kind length", in.offset() - 4);
    std::string kind(kind_len, '\0');
    in.read_bytes(kind.data(), kind_len, "kind");
    return kind;
}

inline void write_mlp(std::ostream& out, const MlpModel& model) {
    write_u32le(out, static_cast<std::uint32_t>(model.sizes.size()));
    for (std::size_t s : model.sizes) write_u32le(out, static_cast<std::uint32_t>(s));
    write_u32le(out, model.ipd_renorm ? 1 : 0);
    for (const DenseLayer& layer : model.layers) {
        write_tensor(out, layer.weights.data);
        write_tensor(out, layer.bias);
        write_u32le(out, layer.ln_gain.empty() ? 0 : 1);
        if (!layer.ln_gain.empty()) {
            write_tensor(out, layer.ln_gain);
            write_tensor(out, layer.ln_bias);
        }
    }
}

inline MlpModel read_mlp(LeReader& in) {
    MlpModel model;
    const std::uint32_t n_sizes = in.read_u32("topology length");
    if (n_sizes < 2 || n_sizes > 64)
        throw FormatError("implausible topology length", in.offset() - 4);
    model.sizes.resize(n_sizes);
    for (auto& s : model.sizes) s = in.read_u32("layer width");
    model.ipd_renorm = in.read_u32("ipd_renorm flag") != 0;
    for (std::size_t i = 0; i + 1 < model.sizes.size(); ++i) {
        DenseLayer layer;
        layer.weights.rows = model.sizes[i + 1];
        layer.weights.cols = model.sizes[i];
        layer.weights.data = read_tensor(in, "weights");
        if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols)
            throw FormatError("weight tensor size mismatch", in.offset());
        layer.bias = read_tensor(in, "bias");
        if (in.read_u32("layer-norm flag") != 0) {
            layer.ln_gain = read_tensor(in, "ln gain");
            layer.ln_bias = read_tensor(in, "ln bias");
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

}  // namespace rtfforge
