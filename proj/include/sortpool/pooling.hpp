#pragma once

#include <utility>
#include <vector>

#include "sortpool/tensor.hpp"

namespace sortpool {

enum class PoolMode { Max, Avg, KthMax, Sorted };

struct PoolConfig {
    std::size_t kh = 0, kw = 0;
    std::size_t sh = 0, sw = 0;
    PoolMode mode = PoolMode::Max;
    std::size_t k = 1;  // KthMax rank, 1-indexed
    std::size_t K = 1;  // Sorted top-K

    static PoolConfig max(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw);
    static PoolConfig avg(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw);
    static PoolConfig kth_max(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                              std::size_t k);
    static PoolConfig sorted(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw,
                             std::size_t K);

    std::size_t window_size() const { return kh * kw; }
    // Number of saved indices per window.
    std::size_t saved_per_window() const { return mode == PoolMode::Sorted ? K : 1; }
    void validate() const;
};

// Learnable per-channel raw weights w* of a sorted pooling layer, shape
// (channels, K), with a matching gradient accumulator.
struct SortedPoolParams {
    Tensor raw_weights;
    Tensor grad;

    std::size_t channels() const { return raw_weights.extent(0); }
    std::size_t K() const { return raw_weights.extent(1); }
};

enum class WeightInit { Uniform, ExpDecay };

// Uniform: w* = 0 everywhere (softmax gives equal weights).
// ExpDecay(lambda): w*_k = -lambda*(k-1), normalized weights decay
// geometrically with ratio e^{-lambda}.
SortedPoolParams init_weights(std::size_t channels, std::size_t K,
                              WeightInit scheme, double lambda = 1.0);

// Backward-pass bookkeeping for one forward call.
struct PoolSaved {
    // (B, C, outH, outW, K_or_1) linear indices into the input, in
    // descending-value order, ties broken by lowest linear index.
    IndexTensor top_indices;
    // Sorted-pool only: values at top_indices, and the (channels, K)
    // normalized weights used.
    Tensor sorted_values;
    Tensor normalized_weights;
};

// W_k = exp(w*_k - m) / sum_l exp(w*_l - m), m = max(w*). All outputs > 0,
// sum 1 within 1e-12.
std::vector<double> softmax_normalize(const std::vector<double>& raw);

std::pair<Tensor, PoolSaved> kth_max_forward(const Tensor& input, const PoolConfig& cfg);
Tensor kth_max_backward(const Tensor& grad_out, const PoolSaved& saved,
                        const std::vector<std::size_t>& input_shape);

std::pair<Tensor, PoolSaved> sorted_pool_forward(const Tensor& input,
                                                 const SortedPoolParams& params,
                                                 const PoolConfig& cfg);
// grad_in routes W_k * upstream to the k-th saved index of each window;
// params.grad accumulates the softmax Jacobian chained through the
// weighted sum: dL/dw*_k += g_w * W_k * (v_k - out_w) per window.
Tensor sorted_pool_backward(const Tensor& grad_out, const PoolSaved& saved,
                            SortedPoolParams& params,
                            const std::vector<std::size_t>& input_shape);

std::pair<Tensor, PoolSaved> max_pool_forward(const Tensor& input, const PoolConfig& cfg);
Tensor max_pool_backward(const Tensor& grad_out, const PoolSaved& saved,
                         const std::vector<std::size_t>& input_shape);

std::pair<Tensor, PoolSaved> avg_pool_forward(const Tensor& input, const PoolConfig& cfg);
Tensor avg_pool_backward(const Tensor& grad_out, const PoolConfig& cfg,
                         const std::vector<std::size_t>& input_shape);

}  // namespace sortpool
