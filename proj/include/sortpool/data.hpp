#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sortpool/rng.hpp"
#include "sortpool/tensor.hpp"

namespace sortpool {

struct Dataset {
    Tensor images;                    // (N, 1, H, W), values in [0,1]
    std::vector<std::size_t> labels;  // length N, values 0..9

    std::size_t size() const { return labels.size(); }

    // Copy of the images/labels at the given positions.
    Dataset subset(const std::vector<std::size_t>& positions) const;
    // Keep only samples whose label is in `classes`, relabeling 0..classes-1.
    Dataset filter_classes(const std::vector<std::size_t>& classes) const;
};

// IDX files as distributed for MNIST: big-endian, image magic 2051,
// label magic 2049. Gzip-compressed files are accepted alongside raw.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// Deterministic 28x28 digit-like dataset: each class is an oriented bright
// band (a locally consistent feature), plus isolated salt-noise pixels and
// a low uniform noise floor. Same seed, same bytes.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t classes);

struct BatchPlan {
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
};

struct Batch {
    Tensor images;
    std::vector<std::size_t> labels;
};

// Fisher-Yates shuffle of 0..n-1 driven by SplitMix64 seeded with
// seed + (epoch+1) * 0x9E3779B97F4A7C15.
std::vector<std::size_t> epoch_permutation(const BatchPlan& plan, std::size_t epoch, std::size_t n);

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& perm,
                 std::size_t start, std::size_t len);

// All batches of one epoch; the final partial batch is emitted.
std::vector<Batch> batches(const Dataset& ds, const BatchPlan& plan, std::size_t epoch);

}  // namespace sortpool
