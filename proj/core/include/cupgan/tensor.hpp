#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace cupgan {

// Dense row-major tensor of doubles. Rank is dynamic but in practice 1-4:
// parameters, activations and batches all flow through this one type.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 4-D accessors for [N,C,H,W]-shaped tensors (tests and cold paths).
    double& at(int n, int c, int h, int w);
    double at(int n, int c, int h, int w) const;

    void fill(double v);
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    // Total elements for a prospective shape; throws ConfigError on
    // non-positive dimensions.
    static std::size_t checked_numel(const std::vector<int>& shape);

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Throws ShapeError unless a and b have identical shapes; `what` names the
// operation for the message.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace cupgan
