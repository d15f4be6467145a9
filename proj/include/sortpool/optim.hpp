#pragma once

#include <vector>

#include "sortpool/layers.hpp"
#include "sortpool/tensor.hpp"

namespace sortpool {

// SGD with momentum: v <- momentum*v + g; p <- p - lr*v.
// Pooling weight rows go through the same path as conv/dense parameters.
class SgdState {
public:
    SgdState(double learning_rate, double momentum);

    void step(const std::vector<ParamRef>& params);

    double learning_rate() const { return lr_; }
    double momentum() const { return momentum_; }

private:
    double lr_;
    double momentum_;
    std::vector<Tensor> velocity_;
    bool initialized_ = false;
};

void zero_grads(const std::vector<ParamRef>& params);

}  // namespace sortpool
