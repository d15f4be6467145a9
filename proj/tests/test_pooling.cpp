#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sortpool/gradcheck.hpp"
#include "sortpool/pooling.hpp"
#include "sortpool/rng.hpp"

using namespace sortpool;

namespace {

// One kh x kw window wrapped as a 1x1xkh xkw batch.
Tensor one_window(std::size_t kh, std::size_t kw, std::vector<double> vals) {
    return Tensor::from_values({1, 1, kh, kw}, std::move(vals));
}

SortedPoolParams params_from_row(std::vector<double> row) {
    const std::size_t n = row.size();
    SortedPoolParams p;
    p.grad = Tensor::zeros({1, n});
    p.raw_weights = Tensor::from_values({1, n}, std::move(row));
    return p;
}

}  // namespace

TEST_CASE("softmax_normalize") {
    auto w = softmax_normalize({0, 0, 0, 0});
    for (double v : w) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    auto w2 = softmax_normalize({std::log(2.0), 0.0});
    CHECK(w2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w2[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    auto big = softmax_normalize({1000.0, 999.0});
    auto small = softmax_normalize({1.0, 0.0});
    CHECK(big[0] == doctest::Approx(small[0]).epsilon(1e-14));
    CHECK(big[1] == doctest::Approx(small[1]).epsilon(1e-14));

    CHECK_THROWS_AS(softmax_normalize({0.0, std::nan("")}), Error);
}

TEST_CASE("softmax weight simplex property") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t K = 1 + rng.next_below(9);
        std::vector<double> raw(K);
        for (double& v : raw) v = rng.uniform(-50, 50);
        auto w = softmax_normalize(raw);
        double s = 0.0;
        for (double v : w) {
            CHECK(v > 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("kth_max forward examples") {
    auto [out, saved] = kth_max_forward(one_window(2, 2, {3, 1, 4, 2}),
                                        PoolConfig::kth_max(2, 2, 1, 1, 2));
    CHECK(out[0] == 3.0);

    // tie rule: lowest linear index wins
    auto [out2, saved2] = kth_max_forward(one_window(1, 3, {5, 5, 1}),
                                          PoolConfig::kth_max(1, 3, 1, 1, 1));
    CHECK(out2[0] == 5.0);
    CHECK(saved2.top_indices.data[0] == 0);

    CHECK_THROWS_AS(PoolConfig::kth_max(2, 2, 1, 1, 5), Error);
    CHECK_THROWS_AS(PoolConfig::kth_max(2, 2, 1, 1, 0), Error);
}

TEST_CASE("kth_max equals full-sort oracle") {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor input = tie_free_random({1, 1, 6, 6}, rng);
        for (std::size_t k = 1; k <= 9; ++k) {
            PoolConfig cfg = PoolConfig::kth_max(3, 3, 1, 1, k);
            auto [out, saved] = kth_max_forward(input, cfg);
            Tensor slice = Tensor::from_values({6, 6}, input.values());
            for (const Window& win : window_iter(slice, 3, 3, 1, 1)) {
                std::vector<double> vals = win.values;
                std::sort(vals.begin(), vals.end(), std::greater<double>());
                CHECK(out.at4(0, 0, win.out_row, win.out_col) == vals[k - 1]);
            }
        }
    }
}

TEST_CASE("kth_max output non-increasing in k") {
    SplitMix64 rng(43);
    Tensor input = tie_free_random({2, 3, 6, 6}, rng);
    Tensor prev;
    for (std::size_t k = 1; k <= 9; ++k) {
        auto [out, saved] = kth_max_forward(input, PoolConfig::kth_max(3, 3, 2, 2, k));
        if (k > 1) {
            for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] <= prev[i]);
        }
        prev = out;
    }
}

TEST_CASE("kth_max backward examples") {
    PoolConfig cfg = PoolConfig::kth_max(2, 2, 1, 1, 2);
    Tensor input = one_window(2, 2, {3, 1, 4, 2});
    auto [out, saved] = kth_max_forward(input, cfg);
    Tensor g = Tensor::full({1, 1, 1, 1}, 1.0);
    Tensor gi = kth_max_backward(g, saved, input.shape());
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < gi.size(); ++i) {
        if (gi[i] != 0.0) {
            ++nonzero;
            CHECK(gi[i] == 1.0);
        }
    }
    CHECK(nonzero == 1);
    CHECK(gi[0] == 1.0);  // value 3 at index 0 is the 2nd largest

    // overlapping windows routing to the same element accumulate
    Tensor wide = Tensor::from_values({1, 1, 1, 3}, {1.0, 9.0, 2.0});
    PoolConfig cfg2 = PoolConfig::kth_max(1, 2, 1, 1, 1);
    auto [out2, saved2] = kth_max_forward(wide, cfg2);
    Tensor g2 = Tensor::from_values({1, 1, 1, 2}, {1.0, 2.0});
    Tensor gi2 = kth_max_backward(g2, saved2, wide.shape());
    CHECK(gi2[1] == 3.0);

    CHECK_THROWS_AS(kth_max_backward(Tensor::zeros({1, 1, 2, 2}), saved, input.shape()), Error);
}

TEST_CASE("kth_max gradient matches finite differences") {
    SplitMix64 rng(44);
    for (std::size_t k : {1, 2, 3, 4}) {
        PoolConfig cfg = PoolConfig::kth_max(3, 3, 2, 2, k);
        Tensor x = tie_free_random({1, 2, 7, 7}, rng);
        auto f = [&](const Tensor& t) {
            auto [out, saved] = kth_max_forward(t, cfg);
            return sum(out);
        };
        auto [out, saved] = kth_max_forward(x, cfg);
        Tensor analytic = kth_max_backward(Tensor::full(out.shape(), 1.0), saved, x.shape());
        GradReport rep = compare(analytic, finite_diff(f, x));
        CHECK(rep.max_relative_error < 1e-5);
    }
}

TEST_CASE("sorted_pool forward examples") {
    // uniform weights over the full window reduce to average pooling
    auto [out, saved] = sorted_pool_forward(one_window(2, 2, {4, 3, 2, 1}),
                                            params_from_row({0, 0, 0, 0}),
                                            PoolConfig::sorted(2, 2, 1, 1, 4));
    CHECK(out[0] == doctest::Approx(2.5).epsilon(1e-12));

    // K=1 is max pooling
    SplitMix64 rng(8);
    Tensor x = tie_free_random({2, 1, 5, 5}, rng);
    SortedPoolParams p1 = init_weights(1, 1, WeightInit::Uniform);
    auto [s_out, s_saved] = sorted_pool_forward(x, p1, PoolConfig::sorted(3, 3, 2, 2, 1));
    auto [m_out, m_saved] = max_pool_forward(x, PoolConfig::max(3, 3, 2, 2));
    CHECK(s_out.values() == m_out.values());

    // analytic weighted case
    auto [out3, saved3] = sorted_pool_forward(one_window(2, 2, {4, 3, 2, 1}),
                                              params_from_row({std::log(2.0), 0.0}),
                                              PoolConfig::sorted(2, 2, 1, 1, 2));
    CHECK(out3[0] == doctest::Approx(11.0 / 3.0).epsilon(1e-12));

    // channel-count mismatch
    CHECK_THROWS_AS(sorted_pool_forward(tie_free_random({1, 2, 4, 4}, rng),
                                        params_from_row({0, 0}),
                                        PoolConfig::sorted(2, 2, 2, 2, 2)),
                    Error);
}

TEST_CASE("sorted_pool saved invariants") {
    SplitMix64 rng(9);
    Tensor x = tie_free_random({1, 2, 6, 6}, rng);
    SortedPoolParams p = init_weights(2, 4, WeightInit::ExpDecay, 0.7);
    auto [out, saved] = sorted_pool_forward(x, p, PoolConfig::sorted(3, 3, 1, 1, 4));
    std::size_t K = 4;
    for (std::size_t w = 0; w < saved.top_indices.size() / K; ++w) {
        for (std::size_t k = 0; k + 1 < K; ++k) {
            CHECK(saved.sorted_values[w * K + k] >= saved.sorted_values[w * K + k + 1]);
            for (std::size_t j = k + 1; j < K; ++j) {
                CHECK(saved.top_indices.data[w * K + k] != saved.top_indices.data[w * K + j]);
            }
        }
    }
}

TEST_CASE("sorted_pool backward degenerate cases") {
    // uniform K=2: softmax Jacobian entries are +/-0.25, so the weight
    // gradient for window (v1,v2) with upstream g is g*0.25*(v1-v2), -that.
    SortedPoolParams p = params_from_row({0, 0});
    auto [out, saved] = sorted_pool_forward(one_window(1, 2, {5, 1}), p,
                                            PoolConfig::sorted(1, 2, 1, 1, 2));
    Tensor g = Tensor::full({1, 1, 1, 1}, 1.0);
    sorted_pool_backward(g, saved, p, {1, 1, 1, 2});
    CHECK(p.grad[0] == doctest::Approx(0.25 * (5 - 1)).epsilon(1e-12));
    CHECK(p.grad[1] == doctest::Approx(-0.25 * (5 - 1)).epsilon(1e-12));

    // K=1: weight gradient is identically zero
    SortedPoolParams p1 = params_from_row({0.3});
    SplitMix64 rng(10);
    Tensor x = tie_free_random({2, 1, 5, 5}, rng);
    auto [out1, saved1] = sorted_pool_forward(x, p1, PoolConfig::sorted(3, 3, 2, 2, 1));
    sorted_pool_backward(Tensor::full(out1.shape(), 1.0), saved1, p1, x.shape());
    CHECK(p1.grad[0] == 0.0);
}

TEST_CASE("sorted_pool gradients match finite differences") {
    SplitMix64 rng(45);
    for (std::size_t K : {1, 2, 3, 4, 9}) {
        PoolConfig cfg = PoolConfig::sorted(3, 3, 2, 2, K);
        Tensor x = tie_free_random({1, 2, 7, 7}, rng);
        SortedPoolParams p;
        p.raw_weights = Tensor::zeros({2, K});
        p.grad = Tensor::zeros({2, K});
        for (std::size_t i = 0; i < p.raw_weights.size(); ++i) {
            p.raw_weights[i] = rng.uniform(-1, 1);
        }

        auto [out, saved] = sorted_pool_forward(x, p, cfg);
        Tensor upstream = Tensor::full(out.shape(), 1.0);
        SortedPoolParams pwork = p;
        Tensor analytic_in = sorted_pool_backward(upstream, saved, pwork, x.shape());
        Tensor analytic_w = pwork.grad;

        auto f_input = [&](const Tensor& t) {
            auto [o, s] = sorted_pool_forward(t, p, cfg);
            return sum(o);
        };
        CHECK(compare(analytic_in, finite_diff(f_input, x)).max_relative_error < 1e-5);

        auto f_weights = [&](const Tensor& w) {
            SortedPoolParams pw;
            pw.raw_weights = w;
            pw.grad = Tensor::zeros(w.shape());
            auto [o, s] = sorted_pool_forward(x, pw, cfg);
            return sum(o);
        };
        CHECK(compare(analytic_w, finite_diff(f_weights, p.raw_weights)).max_relative_error < 1e-5);
    }
}

TEST_CASE("max and avg pooling") {
    Tensor w = one_window(2, 2, {5, 2, 0, -1});
    auto [mx, ms] = max_pool_forward(w, PoolConfig::max(2, 2, 1, 1));
    CHECK(mx[0] == 5.0);
    auto [av, as] = avg_pool_forward(w, PoolConfig::avg(2, 2, 1, 1));
    CHECK(av[0] == doctest::Approx(1.5).epsilon(1e-12));

    Tensor gi = avg_pool_backward(Tensor::full({1, 1, 1, 1}, 4.0),
                                  PoolConfig::avg(2, 2, 1, 1), {1, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(gi[i] == 1.0);

    SplitMix64 rng(12);
    Tensor x = tie_free_random({2, 3, 6, 6}, rng);
    auto [m, msv] = max_pool_forward(x, PoolConfig::max(3, 3, 2, 2));
    auto [k1, ksv] = kth_max_forward(x, PoolConfig::kth_max(3, 3, 2, 2, 1));
    CHECK(m.values() == k1.values());
}

TEST_CASE("avg pooling conserves gradient mass") {
    SplitMix64 rng(13);
    PoolConfig cfg = PoolConfig::avg(3, 3, 3, 3);  // non-overlapping
    Tensor g = tie_free_random({2, 2, 2, 2}, rng);
    Tensor gi = avg_pool_backward(g, cfg, {2, 2, 6, 6});
    CHECK(sum(gi) == doctest::Approx(sum(g)).epsilon(1e-12));
}

TEST_CASE("reduction to average within 1e-12") {
    SplitMix64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = tie_free_random({1, 1, 5, 5}, rng);
        SortedPoolParams p = init_weights(1, 9, WeightInit::Uniform);
        auto [s, ssv] = sorted_pool_forward(x, p, PoolConfig::sorted(3, 3, 1, 1, 9));
        auto [a, asv] = avg_pool_forward(x, PoolConfig::avg(3, 3, 1, 1));
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] - a[i]) <= 1e-12 * 9);
    }
}

TEST_CASE("permutation invariance of window values") {
    SplitMix64 rng(15);
    std::vector<double> vals(9);
    for (double& v : vals) v = rng.uniform(-1, 1);
    std::vector<double> shuffled = vals;
    rng.shuffle(shuffled);

    for (std::size_t k = 1; k <= 9; ++k) {
        auto [a, as] = kth_max_forward(one_window(3, 3, vals), PoolConfig::kth_max(3, 3, 1, 1, k));
        auto [b, bs] = kth_max_forward(one_window(3, 3, shuffled), PoolConfig::kth_max(3, 3, 1, 1, k));
        CHECK(a[0] == b[0]);
    }
    SortedPoolParams p = params_from_row({0.4, -0.2, 0.9});
    SortedPoolParams p2 = p;
    auto [sa, sas] = sorted_pool_forward(one_window(3, 3, vals), p, PoolConfig::sorted(3, 3, 1, 1, 3));
    auto [sb, sbs] = sorted_pool_forward(one_window(3, 3, shuffled), p2, PoolConfig::sorted(3, 3, 1, 1, 3));
    CHECK(sa[0] == doctest::Approx(sb[0]).epsilon(1e-14));
}

TEST_CASE("init_weights schemes") {
    SortedPoolParams u = init_weights(3, 4, WeightInit::Uniform);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<double> row(u.raw_weights.data() + c * 4, u.raw_weights.data() + (c + 1) * 4);
        for (double w : softmax_normalize(row)) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
    }

    SortedPoolParams e = init_weights(1, 2, WeightInit::ExpDecay, std::log(2.0));
    auto w = softmax_normalize({e.raw_weights[0], e.raw_weights[1]});
    CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    SortedPoolParams e3 = init_weights(1, 3, WeightInit::ExpDecay, 1.0);
    auto w3 = softmax_normalize({e3.raw_weights[0], e3.raw_weights[1], e3.raw_weights[2]});
    CHECK(w3[0] / w3[1] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    CHECK(w3[1] / w3[2] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(init_weights(0, 4, WeightInit::Uniform), Error);
    CHECK_THROWS_AS(init_weights(1, 4, WeightInit::ExpDecay, 0.0), Error);
}
