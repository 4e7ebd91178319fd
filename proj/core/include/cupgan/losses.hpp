#pragma once

#include <string>
#include <utility>

#include "cupgan/labels.hpp"
#include "cupgan/networks.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::losses {

using cupgan::LabelMode;

// Composite-objective weights; defaults are the published operating point.
struct LossWeights {
    double lambda_l1 = 100.0;
    double lambda_class = 10.0;
    double lambda_perceptual = 1.0;
};

struct LossComponents {
    double adv = 0.0;
    double l1 = 0.0;
    double classification = 0.0;
    double perceptual = 0.0;
};

struct LossReport {
    double adv = 0.0;
    double l1 = 0.0;
    double classification = 0.0;
    double perceptual = 0.0;
    double total = 0.0;

    // One training-log line: "step adv l1 class per total".
    std::string to_log_line(long long step) const;
};

// Probabilities are clamped into [eps, 1-eps] before any log.
inline constexpr double kProbEps = 1e-7;

// Mean absolute chroma difference over all elements.
double l1_chroma_loss(const Tensor& ab_pred, const Tensor& ab_target);
Tensor l1_chroma_loss_grad(const Tensor& ab_pred, const Tensor& ab_target);

// Per-element mean squared feature distance between V(pred) and V(target).
double perceptual_loss(networks::FeatureExtractor& v, const Tensor& img_pred,
                       const Tensor& img_target);
// Same value, also producing d loss / d img_pred through the extractor.
double perceptual_loss_with_grad(networks::FeatureExtractor& v, const Tensor& img_pred,
                                 const Tensor& img_target, Tensor* d_img_pred);

// Single-class: mean softmax cross-entropy against one-hot rows.
// Multi-attribute: mean per-attribute sigmoid cross-entropy.
double classification_loss(const Tensor& logits, const Tensor& labels, LabelMode mode);
Tensor classification_loss_grad(const Tensor& logits, const Tensor& labels, LabelMode mode);

// Scalar adversarial pieces on probability tensors [B,1].
double discriminator_loss_from_probs(const Tensor& p_real, const Tensor& p_fake);
double generator_adv_from_probs(const Tensor& p_fake);
Tensor discriminator_loss_grad_real(const Tensor& p_real);
Tensor discriminator_loss_grad_fake(const Tensor& p_fake);
Tensor generator_adv_grad(const Tensor& p_fake);

// Runs the discriminator on both batches (eval mode) and evaluates
// d_loss = -E[log D(real)] - E[log(1 - D(fake))] and the non-saturating
// generator term g_adv = -E[log D(fake)].
std::pair<double, double> adversarial_losses(networks::Discriminator& d, const Tensor& real,
                                             const Tensor& fake);

// Weighted composition; throws NumericError naming any non-finite component.
LossReport total_generator_loss(const LossComponents& c, const LossWeights& w);

}  // namespace cupgan::losses
