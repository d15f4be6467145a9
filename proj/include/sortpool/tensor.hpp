#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace sortpool {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Dense n-dimensional array of doubles, row-major.
// 4-D convention is (batch, channel, height, width).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t dim) const { return shape_.at(dim); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w);
    double at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;
    double& at2(std::size_t r, std::size_t c);
    double at2(std::size_t r, std::size_t c) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double value);
    bool all_finite() const;

private:
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Flat array of linear indices into a companion Tensor.
struct IndexTensor {
    std::vector<std::size_t> shape;
    std::vector<std::size_t> data;

    static IndexTensor zeros(std::vector<std::size_t> shape);
    std::size_t size() const { return data.size(); }
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);

double sum(const Tensor& t);

// For a (..., n) tensor, returns the argmax over the last axis per row.
std::vector<std::size_t> argmax_along_last(const Tensor& t);

struct Window {
    std::size_t out_row;
    std::size_t out_col;
    std::vector<double> values;        // flat kh*kw values
    std::vector<std::size_t> indices;  // linear indices into the 2-D input
};

// Output grid extent for a valid (no padding) window sweep.
inline std::size_t valid_out_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
    return (in - kernel) / stride + 1;
}

// All fully-contained kh x kw windows of a 2-D tensor, row-major over the
// output grid. Each window carries the linear indices of its elements.
std::vector<Window> window_iter(const Tensor& t,
                                std::size_t kh, std::size_t kw,
                                std::size_t sh, std::size_t sw);

}  // namespace sortpool
