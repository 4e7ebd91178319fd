#include "cupgan/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "cupgan/errors.hpp"

namespace cupgan::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void check_input(const Tensor& x, int rank, int channels, const char* who) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(who) + ": expected rank-" + std::to_string(rank) +
                         " input, got " + x.shape_str());
    }
    if (x.dim(1) != channels) {
        throw ShapeError(std::string(who) + ": expected " + std::to_string(channels) +
                         " input channels, got " + x.shape_str());
    }
}

// Gather conv patches of `img` [C,H,W] into col [C*K*K, PH*PW], where the
// patch grid is PH x PW with the usual stride/pad geometry.
void im2col(const double* img, int c, int h, int w, int k, int stride, int pad,
            int ph, int pw, double* col) {
    std::size_t row = 0;
    const std::size_t area = static_cast<std::size_t>(ph) * pw;
    for (int ic = 0; ic < c; ++ic) {
        const double* plane = img + static_cast<std::size_t>(ic) * h * w;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw, ++row) {
                double* out = col + row * area;
                for (int oh = 0; oh < ph; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= h) {
                        for (int ow = 0; ow < pw; ++ow) out[oh * pw + ow] = 0.0;
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(ih) * w;
                    for (int ow = 0; ow < pw; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        out[oh * pw + ow] = (iw >= 0 && iw < w) ? src[iw] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
void col2im(const double* col, int c, int h, int w, int k, int stride, int pad,
            int ph, int pw, double* img) {
    std::fill(img, img + static_cast<std::size_t>(c) * h * w, 0.0);
    std::size_t row = 0;
    const std::size_t area = static_cast<std::size_t>(ph) * pw;
    for (int ic = 0; ic < c; ++ic) {
        double* plane = img + static_cast<std::size_t>(ic) * h * w;
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw, ++row) {
                const double* src = col + row * area;
                for (int oh = 0; oh < ph; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= h) continue;
                    double* dst = plane + static_cast<std::size_t>(ih) * w;
                    for (int ow = 0; ow < pw; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw >= 0 && iw < w) dst[iw] += src[oh * pw + ow];
                    }
                }
            }
        }
    }
}

void fill_normal(Tensor& t, Rng& rng, double std) {
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = normal_sample(rng) * std;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_c, int out_c, int kernel, int stride, int pad)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad) {
    weight.resize({out_c, in_c * kernel * kernel});
    bias.resize({out_c});
}

Tensor Conv2d::forward(const Tensor& x) {
    check_input(x, 4, in_c_, "Conv2d");
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    if (oh < 1 || ow < 1) {
        throw ShapeError("Conv2d: input " + x.shape_str() + " too small for kernel");
    }
    cached_x_ = x;
    Tensor y({b, out_c_, oh, ow});
    const std::size_t area = static_cast<std::size_t>(oh) * ow;
    const int rows = in_c_ * kernel_ * kernel_;
    col_.resize(static_cast<std::size_t>(rows) * area);
    MapConstMat wm(weight.value.data(), out_c_, rows);
    for (int n = 0; n < b; ++n) {
        im2col(x.data() + static_cast<std::size_t>(n) * in_c_ * h * w, in_c_, h, w, kernel_,
               stride_, pad_, oh, ow, col_.data());
        MapConstMat cols(col_.data(), rows, static_cast<Eigen::Index>(area));
        MapMat ym(y.data() + static_cast<std::size_t>(n) * out_c_ * area, out_c_,
                  static_cast<Eigen::Index>(area));
        ym.noalias() = wm * cols;
        for (int oc = 0; oc < out_c_; ++oc) ym.row(oc).array() += bias.value[oc];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_y, bool accumulate_param_grads) {
    const Tensor& x = cached_x_;
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    const std::size_t area = static_cast<std::size_t>(oh) * ow;
    const int rows = in_c_ * kernel_ * kernel_;
    Tensor gx({b, in_c_, h, w});
    std::vector<double> gcol(static_cast<std::size_t>(rows) * area);
    MapConstMat wm(weight.value.data(), out_c_, rows);
    MapMat gw(weight.grad.data(), out_c_, rows);
    for (int n = 0; n < b; ++n) {
        MapConstMat gym(grad_y.data() + static_cast<std::size_t>(n) * out_c_ * area, out_c_,
                        static_cast<Eigen::Index>(area));
        if (accumulate_param_grads) {
            im2col(x.data() + static_cast<std::size_t>(n) * in_c_ * h * w, in_c_, h, w, kernel_,
                   stride_, pad_, oh, ow, col_.data());
            MapConstMat cols(col_.data(), rows, static_cast<Eigen::Index>(area));
            gw.noalias() += gym * cols.transpose();
            for (int oc = 0; oc < out_c_; ++oc) bias.grad[oc] += gym.row(oc).sum();
        }
        MapMat gc(gcol.data(), rows, static_cast<Eigen::Index>(area));
        gc.noalias() = wm.transpose() * gym;
        col2im(gcol.data(), in_c_, h, w, kernel_, stride_, pad_, oh, ow,
               gx.data() + static_cast<std::size_t>(n) * in_c_ * h * w);
    }
    return gx;
}

void Conv2d::init_params(Rng& rng, double weight_std) {
    fill_normal(weight.value, rng, weight_std);
    bias.value.zero();
}

void Conv2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_c, int out_c, int kernel, int stride, int pad)
    : in_c_(in_c), out_c_(out_c), kernel_(kernel), stride_(stride), pad_(pad) {
    weight.resize({in_c, out_c * kernel * kernel});
    bias.resize({out_c});
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    check_input(x, 4, in_c_, "ConvTranspose2d");
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    cached_x_ = x;
    Tensor y({b, out_c_, oh, ow});
    const std::size_t in_area = static_cast<std::size_t>(h) * w;
    const std::size_t out_area = static_cast<std::size_t>(oh) * ow;
    const int rows = out_c_ * kernel_ * kernel_;
    col_.resize(static_cast<std::size_t>(rows) * in_area);
    MapConstMat wm(weight.value.data(), in_c_, rows);
    for (int n = 0; n < b; ++n) {
        MapConstMat xm(x.data() + static_cast<std::size_t>(n) * in_c_ * in_area, in_c_,
                       static_cast<Eigen::Index>(in_area));
        MapMat cols(col_.data(), rows, static_cast<Eigen::Index>(in_area));
        cols.noalias() = wm.transpose() * xm;
        double* yb = y.data() + static_cast<std::size_t>(n) * out_c_ * out_area;
        col2im(col_.data(), out_c_, oh, ow, kernel_, stride_, pad_, h, w, yb);
        for (int oc = 0; oc < out_c_; ++oc) {
            double* plane = yb + static_cast<std::size_t>(oc) * out_area;
            for (std::size_t i = 0; i < out_area; ++i) plane[i] += bias.value[oc];
        }
    }
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_y, bool accumulate_param_grads) {
    const Tensor& x = cached_x_;
    const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = out_size(h), ow = out_size(w);
    const std::size_t in_area = static_cast<std::size_t>(h) * w;
    const std::size_t out_area = static_cast<std::size_t>(oh) * ow;
    const int rows = out_c_ * kernel_ * kernel_;
    Tensor gx({b, in_c_, h, w});
    MapConstMat wm(weight.value.data(), in_c_, rows);
    MapMat gw(weight.grad.data(), in_c_, rows);
    for (int n = 0; n < b; ++n) {
        const double* gyb = grad_y.data() + static_cast<std::size_t>(n) * out_c_ * out_area;
        im2col(gyb, out_c_, oh, ow, kernel_, stride_, pad_, h, w, col_.data());
        MapConstMat cols(col_.data(), rows, static_cast<Eigen::Index>(in_area));
        MapMat gxm(gx.data() + static_cast<std::size_t>(n) * in_c_ * in_area, in_c_,
                   static_cast<Eigen::Index>(in_area));
        gxm.noalias() = wm * cols;
        if (accumulate_param_grads) {
            MapConstMat xm(x.data() + static_cast<std::size_t>(n) * in_c_ * in_area, in_c_,
                           static_cast<Eigen::Index>(in_area));
            gw.noalias() += xm * cols.transpose();
            for (int oc = 0; oc < out_c_; ++oc) {
                const double* plane = gyb + static_cast<std::size_t>(oc) * out_area;
                double s = 0.0;
                for (std::size_t i = 0; i < out_area; ++i) s += plane[i];
                bias.grad[oc] += s;
            }
        }
    }
    return gx;
}

void ConvTranspose2d::init_params(Rng& rng, double weight_std) {
    fill_normal(weight.value, rng, weight_std);
    bias.value.zero();
}

void ConvTranspose2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features) : in_f_(in_features), out_f_(out_features) {
    weight.resize({out_features, in_features});
    bias.resize({out_features});
}

Tensor Linear::forward(const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != in_f_) {
        throw ShapeError("Linear: expected [B," + std::to_string(in_f_) + "], got " +
                         x.shape_str());
    }
    cached_x_ = x;
    const int b = x.dim(0);
    Tensor y({b, out_f_});
    MapConstMat xm(x.data(), b, in_f_);
    MapConstMat wm(weight.value.data(), out_f_, in_f_);
    MapMat ym(y.data(), b, out_f_);
    ym.noalias() = xm * wm.transpose();
    for (int n = 0; n < b; ++n) {
        for (int o = 0; o < out_f_; ++o) ym(n, o) += bias.value[o];
    }
    return y;
}

Tensor Linear::backward(const Tensor& grad_y, bool accumulate_param_grads) {
    const int b = cached_x_.dim(0);
    Tensor gx({b, in_f_});
    MapConstMat gym(grad_y.data(), b, out_f_);
    MapConstMat wm(weight.value.data(), out_f_, in_f_);
    MapMat gxm(gx.data(), b, in_f_);
    gxm.noalias() = gym * wm;
    if (accumulate_param_grads) {
        MapConstMat xm(cached_x_.data(), b, in_f_);
        MapMat gwm(weight.grad.data(), out_f_, in_f_);
        gwm.noalias() += gym.transpose() * xm;
        for (int o = 0; o < out_f_; ++o) bias.grad[o] += gym.col(o).sum();
    }
    return gx;
}

void Linear::init_params(Rng& rng, double weight_std) {
    fill_normal(weight.value, rng, weight_std);
    bias.value.zero();
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
    gamma.resize({channels});
    beta.resize({channels});
    running_mean = Tensor({channels});
    running_var = Tensor({channels});
    running_var.fill(1.0);
    inv_std_.assign(channels, 0.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
    if ((x.rank() != 2 && x.rank() != 4) || x.dim(1) != channels_) {
        throw ShapeError("BatchNorm: expected [B," + std::to_string(channels_) +
                         ",...], got " + x.shape_str());
    }
    const int b = x.dim(0);
    const std::size_t spatial = x.rank() == 4
                                    ? static_cast<std::size_t>(x.dim(2)) * x.dim(3)
                                    : 1;
    const double n = static_cast<double>(b) * static_cast<double>(spatial);
    Tensor y(x.shape());
    cached_xhat_ = Tensor(x.shape());
    cached_mode_ = mode;
    for (int c = 0; c < channels_; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0.0, sq = 0.0;
            for (int nb = 0; nb < b; ++nb) {
                const double* p = x.data() + (static_cast<std::size_t>(nb) * channels_ + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    sum += p[i];
                    sq += p[i] * p[i];
                }
            }
            mean = sum / n;
            var = sq / n - mean * mean;
            if (var < 0.0) var = 0.0;  // guard against cancellation
            const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
            running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean;
            running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * unbiased;
        } else {
            mean = running_mean[c];
            var = running_var[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        const double g = gamma.value[c], bt = beta.value[c];
        for (int nb = 0; nb < b; ++nb) {
            const std::size_t off = (static_cast<std::size_t>(nb) * channels_ + c) * spatial;
            const double* p = x.data() + off;
            double* xh = cached_xhat_.data() + off;
            double* yo = y.data() + off;
            for (std::size_t i = 0; i < spatial; ++i) {
                xh[i] = (p[i] - mean) * inv;
                yo[i] = g * xh[i] + bt;
            }
        }
    }
    return y;
}

Tensor BatchNorm::backward(const Tensor& grad_y) {
    const Tensor& xhat = cached_xhat_;
    const int b = grad_y.dim(0);
    const std::size_t spatial = grad_y.rank() == 4
                                    ? static_cast<std::size_t>(grad_y.dim(2)) * grad_y.dim(3)
                                    : 1;
    const double n = static_cast<double>(b) * static_cast<double>(spatial);
    Tensor gx(grad_y.shape());
    for (int c = 0; c < channels_; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int nb = 0; nb < b; ++nb) {
            const std::size_t off = (static_cast<std::size_t>(nb) * channels_ + c) * spatial;
            const double* gy = grad_y.data() + off;
            const double* xh = xhat.data() + off;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_gy += gy[i];
                sum_gy_xhat += gy[i] * xh[i];
            }
        }
        gamma.grad[c] += sum_gy_xhat;
        beta.grad[c] += sum_gy;
        const double g_inv = gamma.value[c] * inv_std_[c];
        for (int nb = 0; nb < b; ++nb) {
            const std::size_t off = (static_cast<std::size_t>(nb) * channels_ + c) * spatial;
            const double* gy = grad_y.data() + off;
            const double* xh = xhat.data() + off;
            double* out = gx.data() + off;
            if (cached_mode_ == Mode::Train) {
                for (std::size_t i = 0; i < spatial; ++i) {
                    out[i] = g_inv * (gy[i] - (sum_gy + xh[i] * sum_gy_xhat) / n);
                }
            } else {
                for (std::size_t i = 0; i < spatial; ++i) out[i] = g_inv * gy[i];
            }
        }
    }
    return gx;
}

void BatchNorm::init_params(Rng&, double) {
    gamma.value.fill(1.0);
    beta.value.zero();
    running_mean.zero();
    running_var.fill(1.0);
}

void BatchNorm::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
}

void BatchNorm::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
}

// ---------------------------------------------------------------------------
// Dropout and activations

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
    cached_mode_ = mode;
    if (mode == Mode::Eval || p_ <= 0.0) return x;
    if (rng == nullptr) throw Error("Dropout: train-mode forward requires an RNG");
    mask_ = Tensor(x.shape());
    const double keep_scale = 1.0 / (1.0 - p_);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double m = uniform01(*rng) >= p_ ? keep_scale : 0.0;
        mask_[i] = m;
        y[i] = x[i] * m;
    }
    return y;
}

Tensor Dropout::backward(const Tensor& grad_y) {
    if (cached_mode_ == Mode::Eval || p_ <= 0.0) return grad_y;
    Tensor gx(grad_y.shape());
    for (std::size_t i = 0; i < grad_y.numel(); ++i) gx[i] = grad_y[i] * mask_[i];
    return gx;
}

Tensor ReLU::forward(const Tensor& x) {
    cached_x_ = x;
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor ReLU::backward(const Tensor& grad_y) {
    Tensor gx(grad_y.shape());
    for (std::size_t i = 0; i < grad_y.numel(); ++i) {
        gx[i] = cached_x_[i] > 0.0 ? grad_y[i] : 0.0;
    }
    return gx;
}

Tensor Tanh::forward(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    cached_y_ = y;
    return y;
}

Tensor Tanh::backward(const Tensor& grad_y) {
    Tensor gx(grad_y.shape());
    for (std::size_t i = 0; i < grad_y.numel(); ++i) {
        gx[i] = grad_y[i] * (1.0 - cached_y_[i] * cached_y_[i]);
    }
    return gx;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    cached_y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& grad_y) {
    Tensor gx(grad_y.shape());
    for (std::size_t i = 0; i < grad_y.numel(); ++i) {
        gx[i] = grad_y[i] * cached_y_[i] * (1.0 - cached_y_[i]);
    }
    return gx;
}

// ---------------------------------------------------------------------------
// Skip-connection helpers

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) ||
        a.dim(3) != b.dim(3)) {
        throw ShapeError("concat_channels: incompatible " + a.shape_str() + " and " +
                         b.shape_str());
    }
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const std::size_t area = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    Tensor y({n, ca + cb, a.dim(2), a.dim(3)});
    for (int nb = 0; nb < n; ++nb) {
        double* dst = y.data() + static_cast<std::size_t>(nb) * (ca + cb) * area;
        const double* pa = a.data() + static_cast<std::size_t>(nb) * ca * area;
        const double* pb = b.data() + static_cast<std::size_t>(nb) * cb * area;
        std::copy(pa, pa + static_cast<std::size_t>(ca) * area, dst);
        std::copy(pb, pb + static_cast<std::size_t>(cb) * area, dst + static_cast<std::size_t>(ca) * area);
    }
    return y;
}

void split_channels(const Tensor& grad, int a_channels, Tensor* grad_a, Tensor* grad_b) {
    const int n = grad.dim(0), c = grad.dim(1);
    const int cb = c - a_channels;
    const std::size_t area = static_cast<std::size_t>(grad.dim(2)) * grad.dim(3);
    *grad_a = Tensor({n, a_channels, grad.dim(2), grad.dim(3)});
    *grad_b = Tensor({n, cb, grad.dim(2), grad.dim(3)});
    for (int nb = 0; nb < n; ++nb) {
        const double* src = grad.data() + static_cast<std::size_t>(nb) * c * area;
        std::copy(src, src + static_cast<std::size_t>(a_channels) * area,
                  grad_a->data() + static_cast<std::size_t>(nb) * a_channels * area);
        std::copy(src + static_cast<std::size_t>(a_channels) * area,
                  src + static_cast<std::size_t>(c) * area,
                  grad_b->data() + static_cast<std::size_t>(nb) * cb * area);
    }
}

}  // namespace cupgan::nn
