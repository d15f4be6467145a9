#pragma once

#include "sortpool/pooling.hpp"
#include "sortpool/tensor.hpp"

// Serial reference kernels. Straight-line window_iter / triple-loop
// implementations kept as oracles for the OpenMP kernels and as the
// baseline side of the benchmark.
namespace sortpool::ref {

// Fully sorts every window (stable, descending) and indexes position k.
Tensor kth_max(const Tensor& input, const PoolConfig& cfg);

Tensor sorted_pool(const Tensor& input, const SortedPoolParams& params, const PoolConfig& cfg);

Tensor avg_pool(const Tensor& input, const PoolConfig& cfg);

// Direct triple-loop valid cross-correlation.
// input (B, inC, H, W), weights (outC, inC, kh, kw), bias (outC).
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              std::size_t stride = 1);

Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace sortpool::ref
