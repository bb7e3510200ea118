#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace csvreg {

/// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 are what the
/// models need; nothing here broadcasts implicitly.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor scalar(double v);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return data.size() == 1 && shape.size() <= 1; }

    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

/// C = A (r x k) * B (k x c); throws DimensionError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace csvreg
