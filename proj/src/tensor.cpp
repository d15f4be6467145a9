#include "sortpool/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sortpool {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

static std::size_t checked_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw Error("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw Error("tensor extent must be >= 1, got shape " + shape_to_string(shape));
        n *= e;
    }
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = checked_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    std::size_t n = checked_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values) {
    std::size_t n = checked_product(shape);
    if (values.size() != n) {
        throw Error("from_values: shape " + shape_to_string(shape) + " requires " +
                    std::to_string(n) + " values, got " + std::to_string(values.size()));
    }
    return Tensor(std::move(shape), std::move(values));
}

double& Tensor::at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at4(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double& Tensor::at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
double Tensor::at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

IndexTensor IndexTensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = checked_product(shape);
    IndexTensor t;
    t.shape = std::move(shape);
    t.data.assign(n, 0);
    return t;
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw Error(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                    " vs " + shape_to_string(b.shape()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw Error("matmul: both operands must be 2-D, got " + shape_to_string(a.shape()) +
                    " and " + shape_to_string(b.shape()));
    }
    if (a.extent(1) != b.extent(0)) {
        throw Error("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) +
                    " x " + shape_to_string(b.shape()));
    }
    std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += av * b[p * n + j];
            }
        }
    }
    return out;
}

double sum(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
    return s;
}

std::vector<std::size_t> argmax_along_last(const Tensor& t) {
    std::size_t n = t.shape().back();
    std::size_t rows = t.size() / n;
    std::vector<std::size_t> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = t.data() + r * n;
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[r] = best;
    }
    return out;
}

std::vector<Window> window_iter(const Tensor& t,
                                std::size_t kh, std::size_t kw,
                                std::size_t sh, std::size_t sw) {
    if (t.ndim() != 2) throw Error("window_iter: expected a 2-D tensor, got " + shape_to_string(t.shape()));
    std::size_t H = t.extent(0), W = t.extent(1);
    if (kh > H || kw > W) {
        throw Error("window_iter: kernel (" + std::to_string(kh) + "," + std::to_string(kw) +
                    ") larger than input " + shape_to_string(t.shape()));
    }
    std::size_t outH = valid_out_extent(H, kh, sh);
    std::size_t outW = valid_out_extent(W, kw, sw);
    std::vector<Window> windows;
    windows.reserve(outH * outW);
    for (std::size_t oy = 0; oy < outH; ++oy) {
        for (std::size_t ox = 0; ox < outW; ++ox) {
            Window win;
            win.out_row = oy;
            win.out_col = ox;
            win.values.reserve(kh * kw);
            win.indices.reserve(kh * kw);
            for (std::size_t dy = 0; dy < kh; ++dy) {
                for (std::size_t dx = 0; dx < kw; ++dx) {
                    std::size_t idx = (oy * sh + dy) * W + (ox * sw + dx);
                    win.values.push_back(t[idx]);
                    win.indices.push_back(idx);
                }
            }
            windows.push_back(std::move(win));
        }
    }
    return windows;
}

}  // namespace sortpool
