#include "sortpool/reference.hpp"

#include <algorithm>
#include <numeric>

namespace sortpool::ref {

namespace {

// Descending values, ties by lowest linear index.
std::vector<std::size_t> sorted_order(const std::vector<double>& vals) {
    std::vector<std::size_t> order(vals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    return order;
}

template <typename PerWindow>
Tensor per_window_pool(const Tensor& input, const PoolConfig& cfg, PerWindow fn) {
    std::size_t B = input.extent(0), C = input.extent(1);
    std::size_t H = input.extent(2), W = input.extent(3);
    std::size_t outH = valid_out_extent(H, cfg.kh, cfg.sh);
    std::size_t outW = valid_out_extent(W, cfg.kw, cfg.sw);
    Tensor out = Tensor::zeros({B, C, outH, outW});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> plane(H * W);
            for (std::size_t i = 0; i < H * W; ++i) {
                plane[i] = input.data()[(b * C + c) * H * W + i];
            }
            Tensor slice = Tensor::from_values({H, W}, plane);
            for (const Window& win : window_iter(slice, cfg.kh, cfg.kw, cfg.sh, cfg.sw)) {
                out.at4(b, c, win.out_row, win.out_col) = fn(c, win);
            }
        }
    }
    return out;
}

}  // namespace

Tensor kth_max(const Tensor& input, const PoolConfig& cfg) {
    std::size_t k = cfg.mode == PoolMode::Max ? 1 : cfg.k;
    return per_window_pool(input, cfg, [&](std::size_t, const Window& win) {
        std::vector<std::size_t> order = sorted_order(win.values);
        return win.values[order[k - 1]];
    });
}

Tensor sorted_pool(const Tensor& input, const SortedPoolParams& params, const PoolConfig& cfg) {
    std::vector<std::vector<double>> w(params.channels());
    for (std::size_t c = 0; c < params.channels(); ++c) {
        std::vector<double> row(params.raw_weights.data() + c * params.K(),
                                params.raw_weights.data() + (c + 1) * params.K());
        w[c] = softmax_normalize(row);
    }
    return per_window_pool(input, cfg, [&](std::size_t c, const Window& win) {
        std::vector<std::size_t> order = sorted_order(win.values);
        double acc = 0.0;
        for (std::size_t k = 0; k < cfg.K; ++k) acc += w[c][k] * win.values[order[k]];
        return acc;
    });
}

Tensor avg_pool(const Tensor& input, const PoolConfig& cfg) {
    return per_window_pool(input, cfg, [&](std::size_t, const Window& win) {
        double acc = 0.0;
        for (double v : win.values) acc += v;
        return acc / static_cast<double>(win.values.size());
    });
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride) {
    std::size_t B = input.extent(0), inC = input.extent(1);
    std::size_t H = input.extent(2), W = input.extent(3);
    std::size_t outC = weights.extent(0);
    std::size_t kh = weights.extent(2), kw = weights.extent(3);
    std::size_t outH = valid_out_extent(H, kh, stride);
    std::size_t outW = valid_out_extent(W, kw, stride);
    Tensor out = Tensor::zeros({B, outC, outH, outW});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t oc = 0; oc < outC; ++oc) {
            for (std::size_t oy = 0; oy < outH; ++oy) {
                for (std::size_t ox = 0; ox < outW; ++ox) {
                    double acc = bias[oc];
                    for (std::size_t ic = 0; ic < inC; ++ic) {
                        for (std::size_t dy = 0; dy < kh; ++dy) {
                            for (std::size_t dx = 0; dx < kw; ++dx) {
                                acc += weights.at4(oc, ic, dy, dx) *
                                       input.at4(b, ic, oy * stride + dy, ox * stride + dx);
                            }
                        }
                    }
                    out.at4(b, oc, oy, ox) = acc;
                }
            }
        }
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            out[i * n + j] = acc;
        }
    }
    return out;
}

}  // namespace sortpool::ref
