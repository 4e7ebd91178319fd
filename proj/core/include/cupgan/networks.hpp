#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cupgan/layers.hpp"
#include "cupgan/rng.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::networks {

using nn::Mode;
using nn::NamedBuffer;
using nn::NamedParam;

struct NetworkConfig {
    int image_size = 256;
    int levels = 6;            // encoder depth; each level halves H and W
    int base_channels = 64;    // first encoder width; capped at 8x deeper in
    int head_hidden = 512;     // classification-head hidden width
    int num_classes = 2;
    int disc_base_channels = 64;

    bool operator==(const NetworkConfig&) const = default;
};

// Encoder channel progression: base, 2x, 4x, ... capped at 8x base.
std::vector<int> generator_channels(const NetworkConfig& cfg);

// U-Net style generator: stride-2 conv encoder, mirrored transpose-conv
// decoder with skip concatenation, plus a two-layer classification head on
// the flattened bottleneck. Chroma output is tanh-bounded.
class Generator {
public:
    explicit Generator(const NetworkConfig& cfg);

    struct Output {
        Tensor ab;      // [B,2,S,S] in (-1,1)
        Tensor logits;  // [B,num_classes]
    };

    // In train mode decoder dropout draws masks from `rng` and batch norm
    // uses batch statistics; eval mode is deterministic.
    Output forward(const Tensor& l_input, Mode mode, Rng* rng = nullptr);

    // Accumulates parameter gradients. `d_logits` may be empty when the
    // classification head takes no part in the objective.
    void backward(const Tensor& d_ab, const Tensor& d_logits);

    void init_params(Rng& rng);
    std::vector<NamedParam> parameters();
    std::vector<NamedBuffer> buffers();
    void zero_grad();

    const NetworkConfig& config() const { return cfg_; }
    int bottleneck_size() const { return cfg_.image_size >> cfg_.levels; }

private:
    struct EncBlock {
        nn::Conv2d conv;
        nn::BatchNorm bn;
        nn::ReLU relu;
        EncBlock(int in_c, int out_c) : conv(in_c, out_c, 4, 2, 1), bn(out_c) {}
    };
    struct DecBlock {
        nn::ConvTranspose2d tconv;
        nn::BatchNorm bn;
        nn::Dropout dropout{0.5};
        nn::ReLU relu;
        DecBlock(int in_c, int out_c) : tconv(in_c, out_c, 4, 2, 1), bn(out_c) {}
    };

    NetworkConfig cfg_;
    std::vector<int> ch_;
    std::vector<EncBlock> enc_;
    std::vector<DecBlock> dec_;  // dec_[j] refines level levels-1-j
    nn::ConvTranspose2d out_tconv_;
    nn::Tanh out_tanh_;
    nn::Linear head_fc1_;
    nn::ReLU head_relu_;
    nn::Linear head_fc2_;
    int batch_ = 0;
};

// Four 5x5 stride-2 conv layers, two FC layers, sigmoid head. Scores a
// 3-channel normalized-Lab image as real/fake.
class Discriminator {
public:
    explicit Discriminator(const NetworkConfig& cfg);

    Tensor forward(const Tensor& image, Mode mode);
    Tensor backward(const Tensor& d_prob, bool accumulate_param_grads = true);

    void init_params(Rng& rng);
    std::vector<NamedParam> parameters();
    std::vector<NamedBuffer> buffers();
    void zero_grad();

    const NetworkConfig& config() const { return cfg_; }

private:
    struct Block {
        nn::Conv2d conv;
        nn::BatchNorm bn;
        nn::ReLU relu;
        Block(int in_c, int out_c) : conv(in_c, out_c, 5, 2, 2), bn(out_c) {}
    };

    NetworkConfig cfg_;
    std::vector<Block> blocks_;
    nn::Linear fc1_;
    nn::BatchNorm fc1_bn_;
    nn::ReLU fc1_relu_;
    nn::Linear fc2_;
    nn::Sigmoid sigmoid_;
    int flat_features_ = 0;
};

struct FeatureConfig {
    int channels = 64;  // output feature channels
    int layers = 2;     // number of 3x3 convolutions
    int stride = 1;     // spatial stride applied by the first convolution
    std::string kind = "random";  // "random" (frozen seeded init) or "file"
    std::string weights_file;

    bool operator==(const FeatureConfig&) const = default;
};

// Fixed convolutional transform used by the perceptual loss. Parameters
// never receive gradient updates; gradients flow through to the input only.
class FeatureExtractor {
public:
    static FeatureExtractor random(const FeatureConfig& cfg, std::uint64_t seed);
    static FeatureExtractor from_file(const std::string& path);

    Tensor forward(const Tensor& image);
    Tensor backward_to_input(const Tensor& d_features);

    int out_channels() const { return cfg_.channels; }
    int stride() const { return cfg_.stride; }
    const FeatureConfig& config() const { return cfg_; }

    std::vector<NamedParam> parameters();  // exposed for checkpointing only

    void save(const std::string& path) const;

private:
    explicit FeatureExtractor(const FeatureConfig& cfg);

    FeatureConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::ReLU> relus_;
};

// Deterministically constructs and initializes both adversaries. Throws
// ConfigError when the image size cannot survive `levels` halvings.
std::pair<Generator, Discriminator> init_networks(const NetworkConfig& cfg, std::uint64_t seed);

void validate_network_config(const NetworkConfig& cfg);

}  // namespace cupgan::networks
