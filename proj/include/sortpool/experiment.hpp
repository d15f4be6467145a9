#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sortpool/data.hpp"
#include "sortpool/layers.hpp"
#include "sortpool/tensor.hpp"

namespace sortpool {

struct ExperimentConfig {
    std::string dataset = "synthetic";  // synthetic | mnist
    std::string data_dir = "data/mnist";
    std::size_t synthetic_train = 10000;
    std::size_t synthetic_test = 2000;
    std::size_t subset = 0;  // 0 = full training set

    std::string mode = "max";  // max | avg | kth-max | sorted
    std::size_t k = 1;         // kth-max rank
    std::size_t K = 4;         // sorted top-K
    std::string weight_init = "uniform";  // uniform | expdecay
    double expdecay_lambda = 1.0;

    std::size_t epochs = 3;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double pool_learning_rate = 0.0;  // 0 = use learning_rate
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    std::size_t replicates = 5;
    std::size_t train_eval_cap = 2000;  // samples used for the train-error column
    std::string out_dir = "out";

    void validate() const;
    // key=value override; unknown key or bad value throws.
    void set(const std::string& key, const std::string& value);
    std::string to_text() const;  // print-config form, one key=value per line
};

ExperimentConfig parse_config(const std::string& path);

// Architecture fingerprint used to reject checkpoints from a different
// network layout.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Conv(1->8,3x3)/ReLU/Pool -> Conv(8->32)/ReLU/Pool -> Conv(32->64)/ReLU/Pool
// -> Flatten -> Dense(->10). Pool kernels are 3x3 stride 2 while they fit;
// the last stage drops to 2x2 (a 3x3 valid window no longer fits 28x28
// inputs after two pooling stages).
LayerGraph build_network(const ExperimentConfig& cfg, std::size_t in_h = 28, std::size_t in_w = 28);

struct EpochStat {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double train_loss = 0.0;
    double train_err_pct = 0.0;
    double test_err_pct = 0.0;
    // One mean normalized weight vector per sorted pool layer.
    std::vector<std::vector<double>> mean_weights;
};

struct TrainResult {
    std::vector<EpochStat> epochs;
    double final_test_err_pct = 0.0;
};

double evaluate_error_pct(LayerGraph& graph, const Dataset& ds, std::size_t batch_size);

// CSV columns: run_id,seed,variant,epoch,step,train_loss,train_err_pct,
// test_err_pct[,w_l{layer}_k{k}...]. csv may be null.
TrainResult train(const ExperimentConfig& cfg, LayerGraph& graph,
                  const Dataset& train_ds, const Dataset& test_ds,
                  std::ostream* csv, const std::string& variant, std::uint64_t seed,
                  bool write_header = true);

// Loads the configured dataset pair (train, test).
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg);

struct SweepVariant {
    std::string name;  // e.g. "k=1", "sorted(K=4)"
    std::string mode;
    std::size_t k = 1;
    std::size_t K = 4;
};

struct SweepRun {
    std::string variant;
    std::uint64_t seed = 0;
    TrainResult result;
};

// Each variant x replicate trained with shared data order and bit-identical
// non-pooling initial weights (same per-replicate seed).
std::vector<SweepRun> sweep(const ExperimentConfig& cfg,
                            const std::vector<SweepVariant>& variants,
                            std::ostream* csv);

void save_checkpoint(LayerGraph& graph, const std::string& path, std::uint64_t cfg_hash);
void load_checkpoint(LayerGraph& graph, const std::string& path, std::uint64_t cfg_hash);

struct EpisodicResult {
    double accuracy = 0.0;
    double std_error = 0.0;
    std::size_t episodes = 0;
};

// N-way 1-shot nearest-cosine-neighbor evaluation in the Flatten-layer
// embedding. `heldout` must carry labels 0..ways-1.
EpisodicResult episodic_eval(LayerGraph& graph, const Dataset& heldout,
                             std::size_t ways, std::size_t episodes, std::uint64_t seed);

// Both models judged on identical episodes.
std::pair<EpisodicResult, EpisodicResult> episodic_eval_paired(
    LayerGraph& a, LayerGraph& b, const Dataset& heldout,
    std::size_t ways, std::size_t episodes, std::uint64_t seed);

}  // namespace sortpool
