#include "sortpool/optim.hpp"

#include <cmath>

namespace sortpool {

SgdState::SgdState(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {
    if (!(learning_rate > 0.0)) throw Error("sgd: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("sgd: momentum must be in [0,1)");
}

void SgdState::step(const std::vector<ParamRef>& params) {
    if (!initialized_) {
        velocity_.reserve(params.size());
        for (const ParamRef& p : params) velocity_.push_back(Tensor::zeros(p.value->shape()));
        initialized_ = true;
    }
    if (velocity_.size() != params.size()) {
        throw Error("sgd: parameter count changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (!p.grad->same_shape(*p.value)) {
            throw Error("sgd: gradient shape mismatch for " + p.name);
        }
        Tensor& v = velocity_[i];
        for (std::size_t j = 0; j < v.size(); ++j) {
            double g = (*p.grad)[j];
            if (std::isnan(g)) throw Error("sgd: NaN gradient in " + p.name);
            v[j] = momentum_ * v[j] + g;
            (*p.value)[j] -= lr_ * v[j];
        }
        p.grad->fill(0.0);
    }
}

void zero_grads(const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params) p.grad->fill(0.0);
}

}  // namespace sortpool
