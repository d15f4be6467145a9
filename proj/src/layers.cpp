#include "sortpool/layers.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>

namespace sortpool {

namespace {

void dgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
           double alpha, const double* a, std::size_t lda,
           const double* b, std::size_t ldb,
           double beta, double* c, std::size_t ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha,
                a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
                c, static_cast<int>(ldc));
}

// (inC*kh*kw) x (outH*outW) patch matrix of one image.
void im2col(const double* img, std::size_t inC, std::size_t H, std::size_t W,
            std::size_t kh, std::size_t kw, std::size_t stride,
            std::size_t outH, std::size_t outW, double* col) {
    std::size_t outHW = outH * outW;
    for (std::size_t ic = 0; ic < inC; ++ic) {
        const double* plane = img + ic * H * W;
        for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
                double* row = col + ((ic * kh + dy) * kw + dx) * outHW;
                for (std::size_t oy = 0; oy < outH; ++oy) {
                    const double* src = plane + (oy * stride + dy) * W + dx;
                    for (std::size_t ox = 0; ox < outW; ++ox) {
                        row[oy * outW + ox] = src[ox * stride];
                    }
                }
            }
        }
    }
}

void col2im_accumulate(const double* col, std::size_t inC, std::size_t H, std::size_t W,
                       std::size_t kh, std::size_t kw, std::size_t stride,
                       std::size_t outH, std::size_t outW, double* img) {
    std::size_t outHW = outH * outW;
    for (std::size_t ic = 0; ic < inC; ++ic) {
        double* plane = img + ic * H * W;
        for (std::size_t dy = 0; dy < kh; ++dy) {
            for (std::size_t dx = 0; dx < kw; ++dx) {
                const double* row = col + ((ic * kh + dy) * kw + dx) * outHW;
                for (std::size_t oy = 0; oy < outH; ++oy) {
                    double* dst = plane + (oy * stride + dy) * W + dx;
                    for (std::size_t ox = 0; ox < outW; ++ox) {
                        dst[ox * stride] += row[oy * outW + ox];
                    }
                }
            }
        }
    }
}

Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, SplitMix64& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-s, s);
    return t;
}

}  // namespace

Conv2D::Conv2D(std::size_t in_channels, std::size_t out_channels,
               std::size_t kh, std::size_t kw, std::size_t stride, SplitMix64& rng)
    : in_channels_(in_channels), out_channels_(out_channels), kh_(kh), kw_(kw), stride_(stride) {
    std::size_t fan_in = in_channels * kh * kw;
    weights = init_uniform({out_channels, in_channels, kh, kw}, fan_in, rng);
    // small positive bias keeps early ReLU maps dense enough that order
    // statistics below the maximum still pass gradient (no batchnorm here)
    bias = Tensor::full({out_channels}, 0.1);
    grad_weights = Tensor::zeros(weights.shape());
    grad_bias = Tensor::zeros(bias.shape());
}

std::vector<std::size_t> Conv2D::out_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 4) throw Error("conv2d: expected 4-D input, got " + shape_to_string(in));
    if (in[1] != in_channels_) {
        throw Error("conv2d: input has " + std::to_string(in[1]) + " channels, layer expects " +
                    std::to_string(in_channels_));
    }
    if (in[2] < kh_ || in[3] < kw_) {
        throw Error("conv2d: kernel does not fit input " + shape_to_string(in));
    }
    return {in[0], out_channels_,
            valid_out_extent(in[2], kh_, stride_), valid_out_extent(in[3], kw_, stride_)};
}

Tensor Conv2D::forward(const Tensor& input) {
    std::vector<std::size_t> os = out_shape(input.shape());
    std::size_t B = os[0], outH = os[2], outW = os[3];
    std::size_t H = input.extent(2), W = input.extent(3);
    std::size_t ckk = in_channels_ * kh_ * kw_;
    std::size_t outHW = outH * outW;
    Tensor out = Tensor::zeros(os);
    std::vector<double> col(ckk * outHW);
    for (std::size_t b = 0; b < B; ++b) {
        im2col(input.data() + b * in_channels_ * H * W, in_channels_, H, W,
               kh_, kw_, stride_, outH, outW, col.data());
        double* o = out.data() + b * out_channels_ * outHW;
        dgemm(false, false, out_channels_, outHW, ckk, 1.0,
              weights.data(), ckk, col.data(), outHW, 0.0, o, outHW);
        for (std::size_t oc = 0; oc < out_channels_; ++oc) {
            double bv = bias[oc];
            for (std::size_t i = 0; i < outHW; ++i) o[oc * outHW + i] += bv;
        }
    }
    saved_input_ = input;
    has_saved_ = true;
    return out;
}

Tensor Conv2D::backward(const Tensor& grad_out) {
    require_forward_done(has_saved_);
    const Tensor& input = saved_input_;
    std::size_t B = input.extent(0), H = input.extent(2), W = input.extent(3);
    std::size_t outH = grad_out.extent(2), outW = grad_out.extent(3);
    std::size_t ckk = in_channels_ * kh_ * kw_;
    std::size_t outHW = outH * outW;
    Tensor grad_in = Tensor::zeros(input.shape());
    std::vector<double> col(ckk * outHW);
    std::vector<double> gcol(ckk * outHW);
    for (std::size_t b = 0; b < B; ++b) {
        const double* g = grad_out.data() + b * out_channels_ * outHW;
        im2col(input.data() + b * in_channels_ * H * W, in_channels_, H, W,
               kh_, kw_, stride_, outH, outW, col.data());
        // grad_w += g . col^T
        dgemm(false, true, out_channels_, ckk, outHW, 1.0,
              g, outHW, col.data(), outHW, 1.0, grad_weights.data(), ckk);
        for (std::size_t oc = 0; oc < out_channels_; ++oc) {
            double acc = 0.0;
            for (std::size_t i = 0; i < outHW; ++i) acc += g[oc * outHW + i];
            grad_bias[oc] += acc;
        }
        // gcol = W^T . g
        dgemm(true, false, ckk, outHW, out_channels_, 1.0,
              weights.data(), ckk, g, outHW, 0.0, gcol.data(), outHW);
        col2im_accumulate(gcol.data(), in_channels_, H, W, kh_, kw_, stride_,
                          outH, outW, grad_in.data() + b * in_channels_ * H * W);
    }
    return grad_in;
}

std::vector<ParamRef> Conv2D::params() {
    return {{"conv2d.weights", &weights, &grad_weights},
            {"conv2d.bias", &bias, &grad_bias}};
}

Tensor ReLU::forward(const Tensor& input) {
    Tensor out = input;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) out[i] = 0.0;
    }
    saved_input_ = input;
    has_saved_ = true;
    return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    require_forward_done(has_saved_);
    if (!grad_out.same_shape(saved_input_)) {
        throw Error("relu backward: shape mismatch " + shape_to_string(grad_out.shape()) +
                    " vs " + shape_to_string(saved_input_.shape()));
    }
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (saved_input_[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

Pool::Pool(PoolConfig cfg, std::size_t channels) : cfg_(cfg), channels_(channels) {
    cfg_.validate();
    if (cfg_.mode == PoolMode::Sorted) {
        sorted_params_ = init_weights(channels, cfg_.K, WeightInit::Uniform);
    }
}

std::string Pool::name() const {
    switch (cfg_.mode) {
        case PoolMode::Max: return "pool.max";
        case PoolMode::Avg: return "pool.avg";
        case PoolMode::KthMax: return "pool.kth_max(" + std::to_string(cfg_.k) + ")";
        case PoolMode::Sorted: return "pool.sorted(" + std::to_string(cfg_.K) + ")";
    }
    return "pool";
}

std::vector<std::size_t> Pool::out_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 4) throw Error("pool: expected 4-D input, got " + shape_to_string(in));
    if (in[1] != channels_) {
        throw Error("pool: input has " + std::to_string(in[1]) + " channels, layer expects " +
                    std::to_string(channels_));
    }
    if (in[2] < cfg_.kh || in[3] < cfg_.kw) {
        throw Error("pool: kernel does not fit input " + shape_to_string(in));
    }
    return {in[0], in[1], valid_out_extent(in[2], cfg_.kh, cfg_.sh),
            valid_out_extent(in[3], cfg_.kw, cfg_.sw)};
}

Tensor Pool::forward(const Tensor& input) {
    saved_input_shape_ = input.shape();
    has_saved_ = true;
    switch (cfg_.mode) {
        case PoolMode::Max: {
            auto [out, saved] = max_pool_forward(input, cfg_);
            saved_ = std::move(saved);
            return out;
        }
        case PoolMode::KthMax: {
            auto [out, saved] = kth_max_forward(input, cfg_);
            saved_ = std::move(saved);
            return out;
        }
        case PoolMode::Avg: {
            auto [out, saved] = avg_pool_forward(input, cfg_);
            saved_ = std::move(saved);
            return out;
        }
        case PoolMode::Sorted: {
            auto [out, saved] = sorted_pool_forward(input, sorted_params_, cfg_);
            saved_ = std::move(saved);
            return out;
        }
    }
    throw Error("pool: unknown mode");
}

Tensor Pool::backward(const Tensor& grad_out) {
    require_forward_done(has_saved_);
    switch (cfg_.mode) {
        case PoolMode::Max:
        case PoolMode::KthMax:
            return kth_max_backward(grad_out, saved_, saved_input_shape_);
        case PoolMode::Avg:
            return avg_pool_backward(grad_out, cfg_, saved_input_shape_);
        case PoolMode::Sorted:
            return sorted_pool_backward(grad_out, saved_, sorted_params_, saved_input_shape_);
    }
    throw Error("pool: unknown mode");
}

std::vector<ParamRef> Pool::params() {
    if (cfg_.mode != PoolMode::Sorted) return {};
    return {{"pool.sorted.raw_weights", &sorted_params_.raw_weights, &sorted_params_.grad}};
}

std::vector<double> Pool::mean_normalized_weights() const {
    if (cfg_.mode != PoolMode::Sorted) throw Error("mean_normalized_weights: not a sorted pool");
    std::vector<double> mean(cfg_.K, 0.0);
    for (std::size_t c = 0; c < channels_; ++c) {
        std::vector<double> row(sorted_params_.raw_weights.data() + c * cfg_.K,
                                sorted_params_.raw_weights.data() + (c + 1) * cfg_.K);
        std::vector<double> w = softmax_normalize(row);
        for (std::size_t k = 0; k < cfg_.K; ++k) mean[k] += w[k];
    }
    for (double& v : mean) v /= static_cast<double>(channels_);
    return mean;
}

Tensor Flatten::forward(const Tensor& input) {
    if (input.ndim() != 4) throw Error("flatten: expected 4-D input, got " + shape_to_string(input.shape()));
    saved_input_shape_ = input.shape();
    has_saved_ = true;
    std::size_t B = input.extent(0);
    return Tensor::from_values({B, input.size() / B}, input.values());
}

Tensor Flatten::backward(const Tensor& grad_out) {
    require_forward_done(has_saved_);
    return Tensor::from_values(saved_input_shape_, grad_out.values());
}

std::vector<std::size_t> Flatten::out_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 4) throw Error("flatten: expected 4-D input, got " + shape_to_string(in));
    return {in[0], in[1] * in[2] * in[3]};
}

Dense::Dense(std::size_t in_features, std::size_t out_features, SplitMix64& rng)
    : in_features_(in_features), out_features_(out_features) {
    weights = init_uniform({out_features, in_features}, in_features, rng);
    bias = Tensor::zeros({out_features});
    grad_weights = Tensor::zeros(weights.shape());
    grad_bias = Tensor::zeros(bias.shape());
}

std::vector<std::size_t> Dense::out_shape(const std::vector<std::size_t>& in) const {
    if (in.size() != 2) throw Error("dense: expected 2-D input, got " + shape_to_string(in));
    if (in[1] != in_features_) {
        throw Error("dense: input has " + std::to_string(in[1]) + " features, layer expects " +
                    std::to_string(in_features_));
    }
    return {in[0], out_features_};
}

Tensor Dense::forward(const Tensor& input) {
    std::vector<std::size_t> os = out_shape(input.shape());
    std::size_t B = os[0];
    Tensor out = Tensor::zeros(os);
    // y = x W^T
    dgemm(false, true, B, out_features_, in_features_, 1.0,
          input.data(), in_features_, weights.data(), in_features_,
          0.0, out.data(), out_features_);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_features_; ++o) out[b * out_features_ + o] += bias[o];
    }
    saved_input_ = input;
    has_saved_ = true;
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    require_forward_done(has_saved_);
    std::size_t B = saved_input_.extent(0);
    if (grad_out.ndim() != 2 || grad_out.extent(0) != B || grad_out.extent(1) != out_features_) {
        throw Error("dense backward: shape mismatch " + shape_to_string(grad_out.shape()));
    }
    // grad_W += gY^T . x
    dgemm(true, false, out_features_, in_features_, B, 1.0,
          grad_out.data(), out_features_, saved_input_.data(), in_features_,
          1.0, grad_weights.data(), in_features_);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_features_; ++o) {
            grad_bias[o] += grad_out[b * out_features_ + o];
        }
    }
    Tensor grad_in = Tensor::zeros(saved_input_.shape());
    // grad_x = gY . W
    dgemm(false, false, B, in_features_, out_features_, 1.0,
          grad_out.data(), out_features_, weights.data(), in_features_,
          0.0, grad_in.data(), in_features_);
    return grad_in;
}

std::vector<ParamRef> Dense::params() {
    return {{"dense.weights", &weights, &grad_weights},
            {"dense.bias", &bias, &grad_bias}};
}

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.ndim() != 2) throw Error("softmax_cross_entropy: expected (batch, classes) logits");
    std::size_t B = logits.extent(0), C = logits.extent(1);
    if (labels.size() != B) {
        throw Error("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                    std::to_string(B));
    }
    LossResult res{0.0, Tensor::zeros(logits.shape())};
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] >= C) {
            throw Error("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                        " out of range for " + std::to_string(C) + " classes");
        }
        const double* row = logits.data() + b * C;
        double m = row[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
        double log_z = std::log(z) + m;
        res.loss += log_z - row[labels[b]];
        for (std::size_t c = 0; c < C; ++c) {
            double p = std::exp(row[c] - log_z);
            res.grad_logits[b * C + c] = (p - (c == labels[b] ? 1.0 : 0.0)) / static_cast<double>(B);
        }
    }
    res.loss /= static_cast<double>(B);
    return res;
}

Tensor LayerGraph::forward(const Tensor& input) {
    Tensor x = input;
    for (auto& l : layers_) x = l->forward(x);
    forward_done_ = true;
    return x;
}

Tensor LayerGraph::forward_until(const Tensor& input, std::size_t n) {
    if (n > layers_.size()) throw Error("forward_until: layer index out of range");
    Tensor x = input;
    for (std::size_t i = 0; i < n; ++i) x = layers_[i]->forward(x);
    return x;
}

void LayerGraph::backward(const Tensor& grad_logits) {
    if (!forward_done_) throw Error("graph backward before forward");
    Tensor g = grad_logits;
    for (std::size_t i = layers_.size(); i > 0; --i) g = layers_[i - 1]->backward(g);
}

std::vector<ParamRef> LayerGraph::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (ParamRef p : layers_[i]->params()) {
            p.name = "layer" + std::to_string(i) + "." + p.name;
            out.push_back(p);
        }
    }
    return out;
}

std::vector<std::size_t> LayerGraph::infer_shape(std::vector<std::size_t> in) const {
    for (const auto& l : layers_) in = l->out_shape(in);
    return in;
}

}  // namespace sortpool
