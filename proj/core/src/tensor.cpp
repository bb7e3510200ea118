#include "csvreg/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "csvreg/errors.hpp"

namespace csvreg {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t d : shape) p *= d;
    return p;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (shape_product(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str() + " does not match data length " +
                             std::to_string(data.size()));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

std::size_t Tensor::rows() const {
    if (shape.size() != 2) throw DimensionError("rows() on tensor of shape " + shape_str());
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() != 2) throw DimensionError("cols() on tensor of shape " + shape_str());
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
    const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
    Tensor out = Tensor::zeros({r, c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double aij = a.data[i * k + j];
            if (aij == 0.0) continue;
            const double* brow = &b.data[j * c];
            double* orow = &out.data[i * c];
            for (std::size_t l = 0; l < c; ++l) orow[l] += aij * brow[l];
        }
    }
    return out;
}

}  // namespace csvreg
