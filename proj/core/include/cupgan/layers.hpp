#pragma once

#include <string>
#include <vector>

#include "cupgan/rng.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::nn {

enum class Mode { Train, Eval };

struct Param {
    Tensor value;
    Tensor grad;

    void resize(std::vector<int> shape) {
        value = Tensor(shape);
        grad = Tensor(std::move(shape));
    }
};

struct NamedParam {
    std::string name;
    Param* param;
};

// Non-trainable state that still belongs in checkpoints (BN running stats).
struct NamedBuffer {
    std::string name;
    Tensor* tensor;
};

// 2-D convolution on [B,C,H,W], weight stored [OC, IC*K*K]. Forward caches
// the input; backward must follow the matching forward on the same instance.
class Conv2d {
public:
    Conv2d(int in_c, int out_c, int kernel, int stride, int pad);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y, bool accumulate_param_grads = true);

    void init_params(Rng& rng, double weight_std);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

    int out_size(int in) const { return (in + 2 * pad_ - kernel_) / stride_ + 1; }
    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }

    Param weight;  // [OC, IC*K*K]
    Param bias;    // [OC]

private:
    int in_c_, out_c_, kernel_, stride_, pad_;
    Tensor cached_x_;
    std::vector<double> col_;
};

// Transposed 2-D convolution, weight stored [IC, OC*K*K].
class ConvTranspose2d {
public:
    ConvTranspose2d(int in_c, int out_c, int kernel, int stride, int pad);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y, bool accumulate_param_grads = true);

    void init_params(Rng& rng, double weight_std);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

    int out_size(int in) const { return (in - 1) * stride_ - 2 * pad_ + kernel_; }
    int out_channels() const { return out_c_; }

    Param weight;  // [IC, OC*K*K]
    Param bias;    // [OC]

private:
    int in_c_, out_c_, kernel_, stride_, pad_;
    Tensor cached_x_;
    std::vector<double> col_;
};

// Fully connected layer on [B,IN].
class Linear {
public:
    Linear(int in_features, int out_features);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y, bool accumulate_param_grads = true);

    void init_params(Rng& rng, double weight_std);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

    int in_features() const { return in_f_; }
    int out_features() const { return out_f_; }

    Param weight;  // [OUT, IN]
    Param bias;    // [OUT]

private:
    int in_f_, out_f_;
    Tensor cached_x_;
};

// Batch normalization over the channel axis; accepts [B,C] and [B,C,H,W].
// Train mode normalizes with batch statistics and updates running stats;
// eval mode uses the running stats.
class BatchNorm {
public:
    explicit BatchNorm(int channels, double eps = 1e-5, double momentum = 0.1);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& grad_y);

    void init_params(Rng& rng, double weight_std);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

    Param gamma;
    Param beta;
    Tensor running_mean;
    Tensor running_var;

private:
    int channels_;
    double eps_, momentum_;
    Mode cached_mode_ = Mode::Eval;
    Tensor cached_xhat_;
    std::vector<double> inv_std_;
};

// Inverted dropout; masks are drawn from the caller's RNG so the trainer's
// checkpointed engine state fully determines them.
class Dropout {
public:
    explicit Dropout(double p) : p_(p) {}

    Tensor forward(const Tensor& x, Mode mode, Rng* rng);
    Tensor backward(const Tensor& grad_y);

    double p() const { return p_; }

private:
    double p_;
    Mode cached_mode_ = Mode::Eval;
    Tensor mask_;
};

class ReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y);

private:
    Tensor cached_x_;
};

class Tanh {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y);

private:
    Tensor cached_y_;
};

class Sigmoid {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_y);

private:
    Tensor cached_y_;
};

// Channel-axis concat/split for U-Net skip connections.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& grad, int a_channels, Tensor* grad_a, Tensor* grad_b);

}  // namespace cupgan::nn
