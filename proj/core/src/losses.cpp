#include "cupgan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cupgan/errors.hpp"

namespace cupgan::losses {

namespace {

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }
inline bool prob_interior(double p) { return p > kProbEps && p < 1.0 - kProbEps; }

void check_probs(const Tensor& p, const char* who) {
    if (p.rank() != 2 || p.dim(1) != 1) {
        throw ShapeError(std::string(who) + ": expected probabilities [B,1], got " +
                         p.shape_str());
    }
}

void check_logits(const Tensor& logits, const Tensor& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("classification_loss: expected logits [B,K], got " + logits.shape_str());
    }
    require_same_shape(logits, labels, "classification_loss");
}

}  // namespace

std::string LossReport::to_log_line(long long step) const {
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%lld %.9g %.9g %.9g %.9g %.9g", step, adv, l1,
                  classification, perceptual, total);
    return buf;
}

double l1_chroma_loss(const Tensor& ab_pred, const Tensor& ab_target) {
    require_same_shape(ab_pred, ab_target, "l1_chroma_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < ab_pred.numel(); ++i) {
        sum += std::abs(ab_pred[i] - ab_target[i]);
    }
    return sum / static_cast<double>(ab_pred.numel());
}

Tensor l1_chroma_loss_grad(const Tensor& ab_pred, const Tensor& ab_target) {
    require_same_shape(ab_pred, ab_target, "l1_chroma_loss");
    Tensor g(ab_pred.shape());
    const double inv_n = 1.0 / static_cast<double>(ab_pred.numel());
    for (std::size_t i = 0; i < ab_pred.numel(); ++i) {
        const double d = ab_pred[i] - ab_target[i];
        g[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

double perceptual_loss(networks::FeatureExtractor& v, const Tensor& img_pred,
                       const Tensor& img_target) {
    return perceptual_loss_with_grad(v, img_pred, img_target, nullptr);
}

double perceptual_loss_with_grad(networks::FeatureExtractor& v, const Tensor& img_pred,
                                 const Tensor& img_target, Tensor* d_img_pred) {
    require_same_shape(img_pred, img_target, "perceptual_loss");
    const Tensor f_target = v.forward(img_target);
    // Run pred last so the extractor's caches describe the pred pass when a
    // gradient is requested.
    const Tensor f_pred = v.forward(img_pred);
    const std::size_t n = f_pred.numel();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = f_pred[i] - f_target[i];
        sum += d * d;
    }
    const double loss = sum / static_cast<double>(n);
    if (d_img_pred != nullptr) {
        Tensor d_feat(f_pred.shape());
        const double scale = 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) d_feat[i] = scale * (f_pred[i] - f_target[i]);
        *d_img_pred = v.backward_to_input(d_feat);
    }
    return loss;
}

double classification_loss(const Tensor& logits, const Tensor& labels, LabelMode mode) {
    check_logits(logits, labels);
    const int b = logits.dim(0), k = logits.dim(1);
    double total = 0.0;
    if (mode == LabelMode::SingleClass) {
        for (int n = 0; n < b; ++n) {
            const double* row = logits.data() + static_cast<std::size_t>(n) * k;
            const double* y = labels.data() + static_cast<std::size_t>(n) * k;
            const double m = *std::max_element(row, row + k);
            double z = 0.0;
            for (int j = 0; j < k; ++j) z += std::exp(row[j] - m);
            const double lse = m + std::log(z);
            for (int j = 0; j < k; ++j) total += y[j] * (lse - row[j]);
        }
        return total / b;
    }
    // Numerically stable per-attribute sigmoid cross-entropy.
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const double x = logits[i], y = labels[i];
        total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
    return total / static_cast<double>(logits.numel());
}

Tensor classification_loss_grad(const Tensor& logits, const Tensor& labels, LabelMode mode) {
    check_logits(logits, labels);
    const int b = logits.dim(0), k = logits.dim(1);
    Tensor g(logits.shape());
    if (mode == LabelMode::SingleClass) {
        for (int n = 0; n < b; ++n) {
            const double* row = logits.data() + static_cast<std::size_t>(n) * k;
            const double* y = labels.data() + static_cast<std::size_t>(n) * k;
            double* gr = g.data() + static_cast<std::size_t>(n) * k;
            const double m = *std::max_element(row, row + k);
            double z = 0.0, ysum = 0.0;
            for (int j = 0; j < k; ++j) {
                z += std::exp(row[j] - m);
                ysum += y[j];
            }
            for (int j = 0; j < k; ++j) {
                const double p = std::exp(row[j] - m) / z;
                gr[j] = (p * ysum - y[j]) / b;
            }
        }
        return g;
    }
    const double inv_n = 1.0 / static_cast<double>(logits.numel());
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-logits[i]));
        g[i] = (sig - labels[i]) * inv_n;
    }
    return g;
}

double discriminator_loss_from_probs(const Tensor& p_real, const Tensor& p_fake) {
    check_probs(p_real, "discriminator loss");
    check_probs(p_fake, "discriminator loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < p_real.numel(); ++i) sum -= std::log(clamp_prob(p_real[i]));
    double real_term = sum / static_cast<double>(p_real.numel());
    sum = 0.0;
    for (std::size_t i = 0; i < p_fake.numel(); ++i) sum -= std::log(1.0 - clamp_prob(p_fake[i]));
    return real_term + sum / static_cast<double>(p_fake.numel());
}

double generator_adv_from_probs(const Tensor& p_fake) {
    check_probs(p_fake, "generator adversarial loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < p_fake.numel(); ++i) sum -= std::log(clamp_prob(p_fake[i]));
    return sum / static_cast<double>(p_fake.numel());
}

Tensor discriminator_loss_grad_real(const Tensor& p_real) {
    check_probs(p_real, "discriminator loss");
    Tensor g(p_real.shape());
    const double inv_b = 1.0 / static_cast<double>(p_real.numel());
    for (std::size_t i = 0; i < p_real.numel(); ++i) {
        g[i] = prob_interior(p_real[i]) ? -inv_b / p_real[i] : 0.0;
    }
    return g;
}

Tensor discriminator_loss_grad_fake(const Tensor& p_fake) {
    check_probs(p_fake, "discriminator loss");
    Tensor g(p_fake.shape());
    const double inv_b = 1.0 / static_cast<double>(p_fake.numel());
    for (std::size_t i = 0; i < p_fake.numel(); ++i) {
        g[i] = prob_interior(p_fake[i]) ? inv_b / (1.0 - p_fake[i]) : 0.0;
    }
    return g;
}

Tensor generator_adv_grad(const Tensor& p_fake) {
    check_probs(p_fake, "generator adversarial loss");
    Tensor g(p_fake.shape());
    const double inv_b = 1.0 / static_cast<double>(p_fake.numel());
    for (std::size_t i = 0; i < p_fake.numel(); ++i) {
        g[i] = prob_interior(p_fake[i]) ? -inv_b / p_fake[i] : 0.0;
    }
    return g;
}

std::pair<double, double> adversarial_losses(networks::Discriminator& d, const Tensor& real,
                                             const Tensor& fake) {
    require_same_shape(real, fake, "adversarial_losses");
    const Tensor p_real = d.forward(real, nn::Mode::Eval);
    const Tensor p_fake = d.forward(fake, nn::Mode::Eval);
    return {discriminator_loss_from_probs(p_real, p_fake), generator_adv_from_probs(p_fake)};
}

LossReport total_generator_loss(const LossComponents& c, const LossWeights& w) {
    const struct {
        const char* name;
        double value;
    } checks[] = {{"adv", c.adv},
                  {"l1", c.l1},
                  {"classification", c.classification},
                  {"perceptual", c.perceptual}};
    for (const auto& chk : checks) {
        if (!std::isfinite(chk.value)) {
            throw NumericError(std::string("total_generator_loss: component '") + chk.name +
                               "' is not finite");
        }
    }
    LossReport r;
    r.adv = c.adv;
    r.l1 = c.l1;
    r.classification = c.classification;
    r.perceptual = c.perceptual;
    r.total = c.adv + w.lambda_l1 * c.l1 + w.lambda_class * c.classification +
              w.lambda_perceptual * c.perceptual;
    return r;
}

}  // namespace cupgan::losses
