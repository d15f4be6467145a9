#include "sortpool/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace sortpool {

PoolConfig PoolConfig::max(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw) {
    PoolConfig c{kh, kw, sh, sw, PoolMode::Max, 1, 1};
    c.validate();
    return c;
}

PoolConfig PoolConfig::avg(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw) {
    PoolConfig c{kh, kw, sh, sw, PoolMode::Avg, 1, 1};
    c.validate();
    return c;
}

PoolConfig PoolConfig::kth_max(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                               std::size_t k) {
    PoolConfig c{kh, kw, sh, sw, PoolMode::KthMax, k, 1};
    c.validate();
    return c;
}

PoolConfig PoolConfig::sorted(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                              std::size_t K) {
    PoolConfig c{kh, kw, sh, sw, PoolMode::Sorted, 1, K};
    c.validate();
    return c;
}

void PoolConfig::validate() const {
    if (kh == 0 || kw == 0 || sh == 0 || sw == 0) {
        throw Error("pool config: kernel and stride extents must be positive");
    }
    if (mode == PoolMode::KthMax && (k < 1 || k > window_size())) {
        throw Error("pool config: k = " + std::to_string(k) + " out of range for a " +
                    std::to_string(kh) + "x" + std::to_string(kw) + " window");
    }
    if (mode == PoolMode::Sorted && (K < 1 || K > window_size())) {
        throw Error("pool config: K = " + std::to_string(K) + " out of range for a " +
                    std::to_string(kh) + "x" + std::to_string(kw) + " window");
    }
}

SortedPoolParams init_weights(std::size_t channels, std::size_t K,
                              WeightInit scheme, double lambda) {
    if (channels < 1 || K < 1) throw Error("init_weights: channels and K must be >= 1");
    if (scheme == WeightInit::ExpDecay && !(lambda > 0.0)) {
        throw Error("init_weights: lambda must be > 0 for exponential decay");
    }
    SortedPoolParams p;
    p.raw_weights = Tensor::zeros({channels, K});
    p.grad = Tensor::zeros({channels, K});
    if (scheme == WeightInit::ExpDecay) {
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t k = 0; k < K; ++k) {
                p.raw_weights.at2(c, k) = -lambda * static_cast<double>(k);
            }
        }
    }
    return p;
}

std::vector<double> softmax_normalize(const std::vector<double>& raw) {
    if (raw.empty()) throw Error("softmax_normalize: empty input");
    double m = raw[0];
    for (double v : raw) {
        if (std::isnan(v)) throw Error("softmax_normalize: NaN input");
        m = std::max(m, v);
    }
    std::vector<double> out(raw.size());
    double z = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::exp(raw[i] - m);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

namespace {

struct PoolDims {
    std::size_t B, C, H, W, outH, outW;
};

PoolDims pool_dims(const std::vector<std::size_t>& shape, const PoolConfig& cfg) {
    if (shape.size() != 4) {
        throw Error("pooling: expected a 4-D (batch,channel,height,width) input, got " +
                    shape_to_string(shape));
    }
    PoolDims d{shape[0], shape[1], shape[2], shape[3], 0, 0};
    if (d.H < cfg.kh || d.W < cfg.kw) {
        throw Error("pooling: kernel (" + std::to_string(cfg.kh) + "," + std::to_string(cfg.kw) +
                    ") does not fit input " + shape_to_string(shape));
    }
    d.outH = valid_out_extent(d.H, cfg.kh, cfg.sh);
    d.outW = valid_out_extent(d.W, cfg.kw, cfg.sw);
    return d;
}

// Stable descending order: larger value first, ties by lower linear index.
// Writes the top `sel` (value, index) pairs of one window.
inline void top_window(const double* slice, std::size_t W,
                       std::size_t oy, std::size_t ox, const PoolConfig& cfg,
                       std::size_t sel,
                       double* out_vals, std::size_t* out_idx) {
    // Insertion sort over kh*kw elements, keeping only the top `sel`.
    std::size_t count = 0;
    for (std::size_t dy = 0; dy < cfg.kh; ++dy) {
        std::size_t row = (oy * cfg.sh + dy) * W + ox * cfg.sw;
        for (std::size_t dx = 0; dx < cfg.kw; ++dx) {
            double v = slice[row + dx];
            std::size_t idx = row + dx;
            std::size_t pos = count < sel ? count : sel;
            while (pos > 0 && (out_vals[pos - 1] < v ||
                               (out_vals[pos - 1] == v && out_idx[pos - 1] > idx))) {
                if (pos < sel) {
                    out_vals[pos] = out_vals[pos - 1];
                    out_idx[pos] = out_idx[pos - 1];
                }
                --pos;
            }
            if (pos < sel) {
                out_vals[pos] = v;
                out_idx[pos] = idx;
            }
            if (count < sel) ++count;
        }
    }
}

void require_grad_shape(const Tensor& grad_out, const IndexTensor& top, const char* op) {
    if (grad_out.ndim() != 4 || top.shape.size() != 5 ||
        grad_out.extent(0) != top.shape[0] || grad_out.extent(1) != top.shape[1] ||
        grad_out.extent(2) != top.shape[2] || grad_out.extent(3) != top.shape[3]) {
        throw Error(std::string(op) + ": upstream gradient shape " +
                    shape_to_string(grad_out.shape()) + " does not match saved forward output");
    }
}

}  // namespace

std::pair<Tensor, PoolSaved> kth_max_forward(const Tensor& input, const PoolConfig& cfg) {
    if (cfg.mode != PoolMode::KthMax && cfg.mode != PoolMode::Max) {
        throw Error("kth_max_forward: config mode is not KthMax");
    }
    PoolDims d = pool_dims(input.shape(), cfg);
    std::size_t k = cfg.mode == PoolMode::Max ? 1 : cfg.k;
    Tensor out = Tensor::zeros({d.B, d.C, d.outH, d.outW});
    PoolSaved saved;
    saved.top_indices = IndexTensor::zeros({d.B, d.C, d.outH, d.outW, 1});
    std::size_t planeIn = d.H * d.W;
    std::size_t planeOut = d.outH * d.outW;
    std::int64_t slices = static_cast<std::int64_t>(d.B * d.C);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < slices; ++s) {
        const double* slice = input.data() + static_cast<std::size_t>(s) * planeIn;
        double* outSlice = out.data() + static_cast<std::size_t>(s) * planeOut;
        std::size_t* idxSlice = saved.top_indices.data.data() + static_cast<std::size_t>(s) * planeOut;
        std::vector<double> vals(k);
        std::vector<std::size_t> idx(k);
        for (std::size_t oy = 0; oy < d.outH; ++oy) {
            for (std::size_t ox = 0; ox < d.outW; ++ox) {
                top_window(slice, d.W, oy, ox, cfg, k, vals.data(), idx.data());
                outSlice[oy * d.outW + ox] = vals[k - 1];
                idxSlice[oy * d.outW + ox] = idx[k - 1];
            }
        }
    }
    return {std::move(out), std::move(saved)};
}

Tensor kth_max_backward(const Tensor& grad_out, const PoolSaved& saved,
                        const std::vector<std::size_t>& input_shape) {
    require_grad_shape(grad_out, saved.top_indices, "kth_max_backward");
    Tensor grad_in = Tensor::zeros(input_shape);
    std::size_t planeIn = input_shape[2] * input_shape[3];
    std::size_t planeOut = grad_out.extent(2) * grad_out.extent(3);
    std::int64_t slices = static_cast<std::int64_t>(input_shape[0] * input_shape[1]);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < slices; ++s) {
        const double* g = grad_out.data() + static_cast<std::size_t>(s) * planeOut;
        const std::size_t* idx = saved.top_indices.data.data() + static_cast<std::size_t>(s) * planeOut;
        double* gi = grad_in.data() + static_cast<std::size_t>(s) * planeIn;
        for (std::size_t o = 0; o < planeOut; ++o) {
            gi[idx[o]] += g[o];
        }
    }
    return grad_in;
}

std::pair<Tensor, PoolSaved> sorted_pool_forward(const Tensor& input,
                                                 const SortedPoolParams& params,
                                                 const PoolConfig& cfg) {
    if (cfg.mode != PoolMode::Sorted) throw Error("sorted_pool_forward: config mode is not Sorted");
    PoolDims d = pool_dims(input.shape(), cfg);
    std::size_t K = cfg.K;
    if (params.channels() != d.C || params.K() != K) {
        throw Error("sorted_pool_forward: params shape " + shape_to_string(params.raw_weights.shape()) +
                    " does not match " + std::to_string(d.C) + " channels, K = " + std::to_string(K));
    }
    if (!params.raw_weights.all_finite()) throw Error("sorted_pool_forward: non-finite raw weights");

    PoolSaved saved;
    saved.top_indices = IndexTensor::zeros({d.B, d.C, d.outH, d.outW, K});
    saved.sorted_values = Tensor::zeros({d.B, d.C, d.outH, d.outW, K});
    saved.normalized_weights = Tensor::zeros({d.C, K});
    for (std::size_t c = 0; c < d.C; ++c) {
        std::vector<double> row(params.raw_weights.data() + c * K,
                                params.raw_weights.data() + (c + 1) * K);
        std::vector<double> w = softmax_normalize(row);
        for (std::size_t k = 0; k < K; ++k) saved.normalized_weights.at2(c, k) = w[k];
    }

    Tensor out = Tensor::zeros({d.B, d.C, d.outH, d.outW});
    std::size_t planeIn = d.H * d.W;
    std::size_t planeOut = d.outH * d.outW;
    std::int64_t slices = static_cast<std::int64_t>(d.B * d.C);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < slices; ++s) {
        std::size_t c = static_cast<std::size_t>(s) % d.C;
        const double* wrow = saved.normalized_weights.data() + c * K;
        const double* slice = input.data() + static_cast<std::size_t>(s) * planeIn;
        double* outSlice = out.data() + static_cast<std::size_t>(s) * planeOut;
        double* valSlice = saved.sorted_values.data() + static_cast<std::size_t>(s) * planeOut * K;
        std::size_t* idxSlice = saved.top_indices.data.data() + static_cast<std::size_t>(s) * planeOut * K;
        for (std::size_t oy = 0; oy < d.outH; ++oy) {
            for (std::size_t ox = 0; ox < d.outW; ++ox) {
                std::size_t o = oy * d.outW + ox;
                top_window(slice, d.W, oy, ox, cfg, K, valSlice + o * K, idxSlice + o * K);
                double acc = 0.0;
                for (std::size_t k = 0; k < K; ++k) acc += wrow[k] * valSlice[o * K + k];
                outSlice[o] = acc;
            }
        }
    }
    return {std::move(out), std::move(saved)};
}

Tensor sorted_pool_backward(const Tensor& grad_out, const PoolSaved& saved,
                            SortedPoolParams& params,
                            const std::vector<std::size_t>& input_shape) {
    require_grad_shape(grad_out, saved.top_indices, "sorted_pool_backward");
    std::size_t B = input_shape[0], C = input_shape[1];
    std::size_t K = saved.top_indices.shape[4];
    std::size_t planeIn = input_shape[2] * input_shape[3];
    std::size_t planeOut = grad_out.extent(2) * grad_out.extent(3);
    Tensor grad_in = Tensor::zeros(input_shape);

    // Slices of one channel share a weight row; accumulate per channel so the
    // reduction order is fixed regardless of thread count.
#pragma omp parallel for schedule(static)
    for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(C); ++ci) {
        std::size_t c = static_cast<std::size_t>(ci);
        const double* wrow = saved.normalized_weights.data() + c * K;
        double* grow = params.grad.data() + c * K;
        for (std::size_t b = 0; b < B; ++b) {
            std::size_t s = b * C + c;
            const double* g = grad_out.data() + s * planeOut;
            const double* vals = saved.sorted_values.data() + s * planeOut * K;
            const std::size_t* idx = saved.top_indices.data.data() + s * planeOut * K;
            double* gi = grad_in.data() + s * planeIn;
            for (std::size_t o = 0; o < planeOut; ++o) {
                double gw = g[o];
                double out_w = 0.0;
                for (std::size_t k = 0; k < K; ++k) out_w += wrow[k] * vals[o * K + k];
                for (std::size_t k = 0; k < K; ++k) {
                    gi[idx[o * K + k]] += wrow[k] * gw;
                    // softmax Jacobian chained through the weighted sum
                    grow[k] += gw * wrow[k] * (vals[o * K + k] - out_w);
                }
            }
        }
    }
    return grad_in;
}

std::pair<Tensor, PoolSaved> max_pool_forward(const Tensor& input, const PoolConfig& cfg) {
    PoolConfig c = cfg;
    c.mode = PoolMode::KthMax;
    c.k = 1;
    return kth_max_forward(input, c);
}

Tensor max_pool_backward(const Tensor& grad_out, const PoolSaved& saved,
                         const std::vector<std::size_t>& input_shape) {
    return kth_max_backward(grad_out, saved, input_shape);
}

std::pair<Tensor, PoolSaved> avg_pool_forward(const Tensor& input, const PoolConfig& cfg) {
    PoolDims d = pool_dims(input.shape(), cfg);
    Tensor out = Tensor::zeros({d.B, d.C, d.outH, d.outW});
    double inv_n = 1.0 / static_cast<double>(cfg.window_size());
    std::size_t planeIn = d.H * d.W;
    std::size_t planeOut = d.outH * d.outW;
    std::int64_t slices = static_cast<std::int64_t>(d.B * d.C);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < slices; ++s) {
        const double* slice = input.data() + static_cast<std::size_t>(s) * planeIn;
        double* outSlice = out.data() + static_cast<std::size_t>(s) * planeOut;
        for (std::size_t oy = 0; oy < d.outH; ++oy) {
            for (std::size_t ox = 0; ox < d.outW; ++ox) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < cfg.kh; ++dy) {
                    std::size_t row = (oy * cfg.sh + dy) * d.W + ox * cfg.sw;
                    for (std::size_t dx = 0; dx < cfg.kw; ++dx) acc += slice[row + dx];
                }
                outSlice[oy * d.outW + ox] = acc * inv_n;
            }
        }
    }
    PoolSaved saved;  // average pooling needs no per-window bookkeeping
    return {std::move(out), std::move(saved)};
}

Tensor avg_pool_backward(const Tensor& grad_out, const PoolConfig& cfg,
                         const std::vector<std::size_t>& input_shape) {
    if (grad_out.ndim() != 4 || input_shape.size() != 4) {
        throw Error("avg_pool_backward: expected 4-D shapes");
    }
    PoolDims d = pool_dims(input_shape, cfg);
    if (grad_out.extent(2) != d.outH || grad_out.extent(3) != d.outW ||
        grad_out.extent(0) != d.B || grad_out.extent(1) != d.C) {
        throw Error("avg_pool_backward: upstream gradient shape " +
                    shape_to_string(grad_out.shape()) + " does not match input " +
                    shape_to_string(input_shape));
    }
    Tensor grad_in = Tensor::zeros(input_shape);
    double inv_n = 1.0 / static_cast<double>(cfg.window_size());
    std::size_t planeIn = d.H * d.W;
    std::size_t planeOut = d.outH * d.outW;
    std::int64_t slices = static_cast<std::int64_t>(d.B * d.C);
#pragma omp parallel for schedule(static)
    for (std::int64_t s = 0; s < slices; ++s) {
        const double* g = grad_out.data() + static_cast<std::size_t>(s) * planeOut;
        double* gi = grad_in.data() + static_cast<std::size_t>(s) * planeIn;
        for (std::size_t oy = 0; oy < d.outH; ++oy) {
            for (std::size_t ox = 0; ox < d.outW; ++ox) {
                double share = g[oy * d.outW + ox] * inv_n;
                for (std::size_t dy = 0; dy < cfg.kh; ++dy) {
                    std::size_t row = (oy * cfg.sh + dy) * d.W + ox * cfg.sw;
                    for (std::size_t dx = 0; dx < cfg.kw; ++dx) gi[row + dx] += share;
                }
            }
        }
    }
    return grad_in;
}

}  // namespace sortpool
