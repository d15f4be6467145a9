// Timing comparison of the OpenMP/im2col kernels against the serial
// reference implementations.
#include <chrono>
#include <cstdio>
#include <functional>

#include "sortpool/gradcheck.hpp"
#include "sortpool/layers.hpp"
#include "sortpool/reference.hpp"

using namespace sortpool;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double kernel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, kernel_ms,
                serial_ms / kernel_ms);
}

}  // namespace

int main() {
    SplitMix64 rng(1);
    const int reps = 5;
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "optimized", "speedup");

    {
        Tensor x = tie_free_random({8, 32, 64, 64}, rng);
        PoolConfig cfg = PoolConfig::kth_max(3, 3, 2, 2, 3);
        row("kth_max 8x32x64x64",
            time_ms([&] { ref::kth_max(x, cfg); }, reps),
            time_ms([&] { kth_max_forward(x, cfg); }, reps));
    }
    {
        Tensor x = tie_free_random({8, 32, 64, 64}, rng);
        PoolConfig cfg = PoolConfig::sorted(3, 3, 2, 2, 4);
        SortedPoolParams p = init_weights(32, 4, WeightInit::ExpDecay, 0.5);
        row("sorted_pool 8x32x64x64",
            time_ms([&] { ref::sorted_pool(x, p, cfg); }, reps),
            time_ms([&] { sorted_pool_forward(x, p, cfg); }, reps));
    }
    {
        Tensor x = tie_free_random({8, 32, 64, 64}, rng);
        PoolConfig cfg = PoolConfig::avg(3, 3, 2, 2);
        row("avg_pool 8x32x64x64",
            time_ms([&] { ref::avg_pool(x, cfg); }, reps),
            time_ms([&] { avg_pool_forward(x, cfg); }, reps));
    }
    {
        Conv2D conv(8, 32, 3, 3, 1, rng);
        Tensor x = tie_free_random({8, 8, 32, 32}, rng);
        row("conv2d 8->32 on 32x32",
            time_ms([&] { ref::conv2d(x, conv.weights, conv.bias, 1); }, reps),
            time_ms([&] { conv.forward(x); }, reps));
    }
    {
        Tensor a = tie_free_random({256, 256}, rng);
        Tensor b = tie_free_random({256, 256}, rng);
        row("matmul 256x256",
            time_ms([&] { ref::matmul(a, b); }, reps),
            time_ms([&] { matmul(a, b); }, reps));
    }
    return 0;
}
