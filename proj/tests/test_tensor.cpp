#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sortpool/rng.hpp"
#include "sortpool/reference.hpp"
#include "sortpool/tensor.hpp"

using namespace sortpool;

TEST_CASE("constructors") {
    Tensor z = Tensor::zeros({2, 2});
    CHECK(z.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(z[i] == 0.0);

    Tensor f = Tensor::full({3}, 1.5);
    CHECK(f.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(f[i] == 1.5);

    Tensor v = Tensor::from_values({2}, {1.0, 2.0});
    CHECK(v[1] == 2.0);

    CHECK_THROWS_AS(Tensor::from_values({2}, {1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), Error);
    CHECK_THROWS_AS(Tensor::zeros({}), Error);
}

TEST_CASE("from_values round-trips") {
    SplitMix64 rng(7);
    std::vector<double> vals(24);
    for (double& v : vals) v = rng.uniform(-5, 5);
    Tensor t = Tensor::from_values({2, 3, 4}, vals);
    CHECK(t.values() == vals);
}

TEST_CASE("elementwise ops") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 2}, {10, 20, 30, 40});
    CHECK(add(a, b).values() == std::vector<double>{11, 22, 33, 44});
    CHECK(sub(b, a).values() == std::vector<double>{9, 18, 27, 36});
    CHECK(mul(a, b).values() == std::vector<double>{10, 40, 90, 160});
    CHECK(scale(a, 2.0).values() == std::vector<double>{2, 4, 6, 8});

    Tensor c = Tensor::zeros({3});
    CHECK_THROWS_WITH_AS(add(a, c), doctest::Contains("(2,2)"), Error);
}

TEST_CASE("matmul identity") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor id = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    CHECK(matmul(a, id).values() == a.values());
    CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), Error);
}

TEST_CASE("matmul against triple-loop oracle") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> av(25), bv(25);
        for (double& v : av) v = rng.uniform(-1, 1);
        for (double& v : bv) v = rng.uniform(-1, 1);
        Tensor a = Tensor::from_values({5, 5}, av);
        Tensor b = Tensor::from_values({5, 5}, bv);
        Tensor fast = matmul(a, b);
        Tensor slow = ref::matmul(a, b);
        for (std::size_t i = 0; i < fast.size(); ++i) {
            double denom = std::max(1e-12, std::abs(slow[i]));
            CHECK(std::abs(fast[i] - slow[i]) / denom < 1e-12);
        }
    }
}

TEST_CASE("sum and argmax") {
    CHECK(sum(Tensor::full({4}, 2.0)) == 8.0);
    Tensor t = Tensor::from_values({1, 3}, {0.1, 0.9, 0.2});
    CHECK(argmax_along_last(t) == std::vector<std::size_t>{1});
}

TEST_CASE("window_iter grid extents") {
    Tensor t4 = Tensor::zeros({4, 4});
    auto w = window_iter(t4, 3, 3, 2, 2);
    CHECK(w.size() == 1);  // floor((4-3)/2)+1 = 1

    Tensor t28 = Tensor::zeros({28, 28});
    auto w28 = window_iter(t28, 3, 3, 2, 2);
    CHECK(w28.size() == 13 * 13);

    Tensor t3 = Tensor::zeros({3, 3});
    auto w3 = window_iter(t3, 3, 3, 1, 1);
    REQUIRE(w3.size() == 1);
    std::vector<std::size_t> expect{0, 1, 2, 3, 4, 5, 6, 7, 8};
    CHECK(w3[0].indices == expect);

    CHECK_THROWS_AS(window_iter(t3, 4, 4, 1, 1), Error);
}

TEST_CASE("window_iter covers: indices in range, count matches grid") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t H = 3 + rng.next_below(10), W = 3 + rng.next_below(10);
        std::size_t kh = 1 + rng.next_below(std::min<std::size_t>(H, 4));
        std::size_t kw = 1 + rng.next_below(std::min<std::size_t>(W, 4));
        std::size_t sh = 1 + rng.next_below(3), sw = 1 + rng.next_below(3);
        Tensor t = Tensor::zeros({H, W});
        auto wins = window_iter(t, kh, kw, sh, sw);
        CHECK(wins.size() == valid_out_extent(H, kh, sh) * valid_out_extent(W, kw, sw));
        for (const Window& win : wins) {
            CHECK(win.values.size() == kh * kw);
            for (std::size_t idx : win.indices) CHECK(idx < H * W);
        }
    }
}
