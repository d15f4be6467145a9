#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sortpool/pooling.hpp"
#include "sortpool/rng.hpp"
#include "sortpool/tensor.hpp"

namespace sortpool {

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamRef> params() { return {}; }
    virtual std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const = 0;
    virtual std::string name() const = 0;

protected:
    void require_forward_done(bool done) const {
        if (!done) throw Error(std::string("backward before forward"));
    }
};

// Valid cross-correlation, im2col + dgemm inside. Weight shape
// (outC, inC, kh, kw), bias (outC).
class Conv2D : public Layer {
public:
    Conv2D(std::size_t in_channels, std::size_t out_channels,
           std::size_t kh, std::size_t kw, std::size_t stride, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const override;
    std::string name() const override { return "conv2d"; }

    Tensor weights, bias;
    Tensor grad_weights, grad_bias;

private:
    std::size_t in_channels_, out_channels_, kh_, kw_, stride_;
    Tensor saved_input_;
    bool has_saved_ = false;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const override { return in; }
    std::string name() const override { return "relu"; }

private:
    Tensor saved_input_;
    bool has_saved_ = false;
};

// Pooling layer; owns the learnable weight rows when mode is Sorted.
class Pool : public Layer {
public:
    Pool(PoolConfig cfg, std::size_t channels);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const override;
    std::string name() const override;

    const PoolConfig& config() const { return cfg_; }
    SortedPoolParams& sorted_params() { return sorted_params_; }
    // Normalized weights averaged over channels; sorted mode only.
    std::vector<double> mean_normalized_weights() const;

private:
    PoolConfig cfg_;
    std::size_t channels_;
    SortedPoolParams sorted_params_;
    PoolSaved saved_;
    std::vector<std::size_t> saved_input_shape_;
    bool has_saved_ = false;
};

class Flatten : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const override;
    std::string name() const override { return "flatten"; }

private:
    std::vector<std::size_t> saved_input_shape_;
    bool has_saved_ = false;
};

// y = x W^T + b per batch row. Weight shape (outF, inF), bias (outF).
class Dense : public Layer {
public:
    Dense(std::size_t in_features, std::size_t out_features, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamRef> params() override;
    std::vector<std::size_t> out_shape(const std::vector<std::size_t>& in) const override;
    std::string name() const override { return "dense"; }

    Tensor weights, bias;
    Tensor grad_weights, grad_bias;

private:
    std::size_t in_features_, out_features_;
    Tensor saved_input_;
    bool has_saved_ = false;
};

struct LossResult {
    double loss;
    Tensor grad_logits;
};

// Mean cross-entropy over the batch with stable log-sum-exp;
// grad_logits = (softmax - onehot) / B.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

class LayerGraph {
public:
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& input);
    // Forward through the first n layers only (n = layers() runs all).
    Tensor forward_until(const Tensor& input, std::size_t n);
    void backward(const Tensor& grad_logits);
    std::vector<ParamRef> params();

    std::size_t layers() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    // Symbolic shape pass; throws on incompatible adjacent layers.
    std::vector<std::size_t> infer_shape(std::vector<std::size_t> in) const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

}  // namespace sortpool
