#include "cupgan/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "cupgan/errors.hpp"

namespace cupgan {

std::size_t Tensor::checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ConfigError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(checked_numel(shape_), 0.0);
}

double& Tensor::at(int n, int c, int h, int w) {
    const auto& s = shape_;
    return data_[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
}

double Tensor::at(int n, int c, int h, int w) const {
    const auto& s = shape_;
    return data_[((static_cast<std::size_t>(n) * s[1] + c) * s[2] + h) * s[3] + w];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

}  // namespace cupgan
