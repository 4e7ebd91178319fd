#include "cupgan/networks.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "cupgan/checkpoint.hpp"
#include "cupgan/errors.hpp"

namespace cupgan::networks {

namespace {

constexpr double kInitStd = 0.02;

Tensor reshape_copy(const Tensor& t, std::vector<int> shape) {
    Tensor out(std::move(shape));
    if (out.numel() != t.numel()) {
        throw ShapeError("reshape: element count mismatch " + t.shape_str() + " -> " +
                         out.shape_str());
    }
    std::copy(t.data(), t.data() + t.numel(), out.data());
    return out;
}

void add_into(Tensor& acc, const Tensor& g) {
    require_same_shape(acc, g, "gradient accumulate");
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += g[i];
}

}  // namespace

std::vector<int> generator_channels(const NetworkConfig& cfg) {
    std::vector<int> ch(static_cast<std::size_t>(cfg.levels));
    for (int i = 0; i < cfg.levels; ++i) {
        const long long w = static_cast<long long>(cfg.base_channels) << i;
        ch[static_cast<std::size_t>(i)] =
            static_cast<int>(std::min<long long>(w, 8LL * cfg.base_channels));
    }
    return ch;
}

void validate_network_config(const NetworkConfig& cfg) {
    if (cfg.levels < 1) throw ConfigError("network: levels must be >= 1");
    if (cfg.base_channels < 1 || cfg.disc_base_channels < 1) {
        throw ConfigError("network: channel widths must be >= 1");
    }
    if (cfg.head_hidden < 1) throw ConfigError("network: head_hidden must be >= 1");
    if (cfg.num_classes < 1) throw ConfigError("network: num_classes must be >= 1");
    if (cfg.levels >= 31 || cfg.image_size % (1 << cfg.levels) != 0 ||
        (cfg.image_size >> cfg.levels) < 1) {
        throw ConfigError("network: image size " + std::to_string(cfg.image_size) +
                          " does not survive " + std::to_string(cfg.levels) +
                          " halvings (bottleneck would be sub-pixel)");
    }
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const NetworkConfig& cfg)
    : cfg_(cfg),
      ch_(generator_channels(cfg)),
      out_tconv_(cfg.levels >= 2 ? 2 * ch_[0] : ch_[0], 2, 4, 2, 1),
      head_fc1_(ch_.back() * (cfg.image_size >> cfg.levels) * (cfg.image_size >> cfg.levels),
                cfg.head_hidden),
      head_fc2_(cfg.head_hidden, cfg.num_classes) {
    validate_network_config(cfg);
    enc_.reserve(static_cast<std::size_t>(cfg.levels));
    for (int i = 0; i < cfg.levels; ++i) {
        enc_.emplace_back(i == 0 ? 1 : ch_[static_cast<std::size_t>(i - 1)],
                          ch_[static_cast<std::size_t>(i)]);
    }
    // dec_[j] upsamples from level i = levels-1-j; its input is the
    // bottleneck for j == 0 and a skip concat (2x channels) afterwards.
    for (int i = cfg.levels - 1; i >= 1; --i) {
        const int in_c = (i == cfg.levels - 1) ? ch_[static_cast<std::size_t>(i)]
                                               : 2 * ch_[static_cast<std::size_t>(i)];
        dec_.emplace_back(in_c, ch_[static_cast<std::size_t>(i - 1)]);
    }
}

Generator::Output Generator::forward(const Tensor& l_input, Mode mode, Rng* rng) {
    if (l_input.rank() != 4 || l_input.dim(1) != 1 || l_input.dim(2) != cfg_.image_size ||
        l_input.dim(3) != cfg_.image_size) {
        throw ShapeError("generator: expected [B,1," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + l_input.shape_str());
    }
    batch_ = l_input.dim(0);

    std::vector<Tensor> skips;  // post-activation encoder outputs
    skips.reserve(enc_.size());
    Tensor cur = l_input;
    for (auto& block : enc_) {
        cur = block.relu.forward(block.bn.forward(block.conv.forward(cur), mode));
        skips.push_back(cur);
    }

    // Classification head on the flattened bottleneck.
    Tensor flat = reshape_copy(cur, {batch_, static_cast<int>(cur.numel()) / batch_});
    Tensor logits = head_fc2_.forward(head_relu_.forward(head_fc1_.forward(flat)));

    for (std::size_t j = 0; j < dec_.size(); ++j) {
        auto& block = dec_[j];
        cur = block.tconv.forward(cur);
        cur = block.bn.forward(cur, mode);
        cur = block.dropout.forward(cur, mode, rng);
        cur = block.relu.forward(cur);
        const std::size_t skip_level = dec_.size() - 1 - j;  // = i-1 for this block
        cur = nn::concat_channels(cur, skips[skip_level]);
    }

    Tensor ab = out_tanh_.forward(out_tconv_.forward(cur));
    return {std::move(ab), std::move(logits)};
}

void Generator::backward(const Tensor& d_ab, const Tensor& d_logits) {
    // Per-level gradient accumulators for encoder outputs.
    const int levels = cfg_.levels;
    std::vector<Tensor> grad_skip(static_cast<std::size_t>(levels));

    Tensor g = out_tconv_.backward(out_tanh_.backward(d_ab));

    // Walk the decoder in reverse; each concat splits into the decoder
    // branch and the skip branch.
    for (std::size_t rj = dec_.size(); rj-- > 0;) {
        auto& block = dec_[rj];
        const std::size_t skip_level = dec_.size() - 1 - rj;
        Tensor g_dec, g_skip;
        nn::split_channels(g, ch_[skip_level], &g_dec, &g_skip);
        grad_skip[skip_level] = std::move(g_skip);
        g_dec = block.relu.backward(g_dec);
        g_dec = block.dropout.backward(g_dec);
        g_dec = block.bn.backward(g_dec);
        g = block.tconv.backward(g_dec);
    }
    // g is now the gradient w.r.t. the bottleneck (encoder top).

    if (!d_logits.empty()) {
        Tensor gh = head_fc2_.backward(d_logits);
        gh = head_relu_.backward(gh);
        gh = head_fc1_.backward(gh);
        const int bs = bottleneck_size();
        add_into(g, reshape_copy(gh, {batch_, ch_.back(), bs, bs}));
    }

    for (int i = levels - 1; i >= 0; --i) {
        auto& block = enc_[static_cast<std::size_t>(i)];
        if (i != levels - 1 && !grad_skip[static_cast<std::size_t>(i)].empty()) {
            add_into(g, grad_skip[static_cast<std::size_t>(i)]);
        }
        g = block.conv.backward(block.bn.backward(block.relu.backward(g)));
    }
}

void Generator::init_params(Rng& rng) {
    for (auto& b : enc_) {
        b.conv.init_params(rng, kInitStd);
        b.bn.init_params(rng, kInitStd);
    }
    head_fc1_.init_params(rng, kInitStd);
    head_fc2_.init_params(rng, kInitStd);
    for (auto& b : dec_) {
        b.tconv.init_params(rng, kInitStd);
        b.bn.init_params(rng, kInitStd);
    }
    out_tconv_.init_params(rng, kInitStd);
}

std::vector<NamedParam> Generator::parameters() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
        enc_[i].conv.collect("enc" + std::to_string(i) + ".conv", out);
        enc_[i].bn.collect("enc" + std::to_string(i) + ".bn", out);
    }
    head_fc1_.collect("head.fc1", out);
    head_fc2_.collect("head.fc2", out);
    for (std::size_t j = 0; j < dec_.size(); ++j) {
        dec_[j].tconv.collect("dec" + std::to_string(j) + ".tconv", out);
        dec_[j].bn.collect("dec" + std::to_string(j) + ".bn", out);
    }
    out_tconv_.collect("out.tconv", out);
    return out;
}

std::vector<NamedBuffer> Generator::buffers() {
    std::vector<NamedBuffer> out;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
        enc_[i].bn.collect_buffers("enc" + std::to_string(i) + ".bn", out);
    }
    for (std::size_t j = 0; j < dec_.size(); ++j) {
        dec_[j].bn.collect_buffers("dec" + std::to_string(j) + ".bn", out);
    }
    return out;
}

void Generator::zero_grad() {
    for (auto& p : parameters()) p.param->grad.zero();
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const NetworkConfig& cfg)
    : cfg_(cfg),
      fc1_(1, 1),  // re-bound below once the flattened width is known
      fc1_bn_(8 * cfg.disc_base_channels),
      fc2_(8 * cfg.disc_base_channels, 1) {
    validate_network_config(cfg);
    int c = 3;
    int s = cfg.image_size;
    for (int i = 0; i < 4; ++i) {
        const int oc = cfg.disc_base_channels << i;
        blocks_.emplace_back(c, oc);
        c = oc;
        s = (s + 2 * 2 - 5) / 2 + 1;
        if (s < 1) throw ConfigError("discriminator: image size too small");
    }
    flat_features_ = c * s * s;
    fc1_ = nn::Linear(flat_features_, 8 * cfg.disc_base_channels);
}

Tensor Discriminator::forward(const Tensor& image, Mode mode) {
    if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg_.image_size ||
        image.dim(3) != cfg_.image_size) {
        throw ShapeError("discriminator: expected [B,3," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + image.shape_str());
    }
    const int b = image.dim(0);
    Tensor cur = image;
    for (auto& block : blocks_) {
        cur = block.relu.forward(block.bn.forward(block.conv.forward(cur), mode));
    }
    cur = reshape_copy(cur, {b, flat_features_});
    cur = fc1_relu_.forward(fc1_bn_.forward(fc1_.forward(cur), mode));
    return sigmoid_.forward(fc2_.forward(cur));
}

Tensor Discriminator::backward(const Tensor& d_prob, bool accumulate_param_grads) {
    Tensor g = sigmoid_.backward(d_prob);
    g = fc2_.backward(g, accumulate_param_grads);
    g = fc1_relu_.backward(g);
    g = fc1_bn_.backward(g);
    g = fc1_.backward(g, accumulate_param_grads);
    const int b = g.dim(0);
    int s = cfg_.image_size;
    for (int i = 0; i < 4; ++i) s = (s + 2 * 2 - 5) / 2 + 1;
    g = reshape_copy(g, {b, cfg_.disc_base_channels << 3, s, s});
    for (std::size_t i = blocks_.size(); i-- > 0;) {
        auto& block = blocks_[i];
        g = block.relu.backward(g);
        g = block.bn.backward(g);
        g = block.conv.backward(g, accumulate_param_grads);
    }
    return g;
}

void Discriminator::init_params(Rng& rng) {
    for (auto& b : blocks_) {
        b.conv.init_params(rng, kInitStd);
        b.bn.init_params(rng, kInitStd);
    }
    fc1_.init_params(rng, kInitStd);
    fc1_bn_.init_params(rng, kInitStd);
    fc2_.init_params(rng, kInitStd);
}

std::vector<NamedParam> Discriminator::parameters() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].conv.collect("conv" + std::to_string(i), out);
        blocks_[i].bn.collect("bn" + std::to_string(i), out);
    }
    fc1_.collect("fc1", out);
    fc1_bn_.collect("fc1.bn", out);
    fc2_.collect("fc2", out);
    return out;
}

std::vector<NamedBuffer> Discriminator::buffers() {
    std::vector<NamedBuffer> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        blocks_[i].bn.collect_buffers("bn" + std::to_string(i), out);
    }
    fc1_bn_.collect_buffers("fc1.bn", out);
    return out;
}

void Discriminator::zero_grad() {
    for (auto& p : parameters()) p.param->grad.zero();
}

// ---------------------------------------------------------------------------
// FeatureExtractor

FeatureExtractor::FeatureExtractor(const FeatureConfig& cfg) : cfg_(cfg) {
    if (cfg.channels < 1 || cfg.layers < 1 || cfg.stride < 1) {
        throw ConfigError("feature extractor: channels, layers and stride must be >= 1");
    }
    convs_.reserve(static_cast<std::size_t>(cfg.layers));
    relus_.resize(static_cast<std::size_t>(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i) {
        convs_.emplace_back(i == 0 ? 3 : cfg.channels, cfg.channels, 3,
                            i == 0 ? cfg.stride : 1, 1);
    }
}

FeatureExtractor FeatureExtractor::random(const FeatureConfig& cfg, std::uint64_t seed) {
    FeatureExtractor v(cfg);
    Rng rng(mix_seed(seed, 0x6665617475726573ULL));
    // Frozen random features need unit-scale responses, not GAN init scale:
    // He-style std keeps activations comparable across layers.
    for (auto& c : v.convs_) {
        const double fan_in = static_cast<double>(c.in_channels()) * 9.0;
        c.init_params(rng, std::sqrt(2.0 / fan_in));
    }
    return v;
}

Tensor FeatureExtractor::forward(const Tensor& image) {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw ShapeError("feature extractor: expected [B,3,H,W], got " + image.shape_str());
    }
    Tensor cur = image;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        cur = relus_[i].forward(convs_[i].forward(cur));
    }
    return cur;
}

Tensor FeatureExtractor::backward_to_input(const Tensor& d_features) {
    Tensor g = d_features;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        g = convs_[i].backward(relus_[i].backward(g), /*accumulate_param_grads=*/false);
    }
    return g;
}

std::vector<NamedParam> FeatureExtractor::parameters() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].collect("feat" + std::to_string(i), out);
    }
    return out;
}

void FeatureExtractor::save(const std::string& path) const {
    checkpoint::Archive archive;
    nlohmann::json meta;
    meta["kind"] = "feature_extractor";
    meta["channels"] = cfg_.channels;
    meta["layers"] = cfg_.layers;
    meta["stride"] = cfg_.stride;
    archive.meta = meta.dump();
    auto& self = const_cast<FeatureExtractor&>(*this);
    checkpoint::pack_params(archive, "feature", self.parameters());
    checkpoint::write_archive(path, archive);
}

FeatureExtractor FeatureExtractor::from_file(const std::string& path) {
    const checkpoint::Archive archive = checkpoint::read_archive(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(archive.meta);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("feature extractor: bad metadata: ") + e.what());
    }
    if (meta.value("kind", "") != "feature_extractor") {
        throw CheckpointError("feature extractor: archive is not a feature extractor");
    }
    FeatureConfig cfg;
    cfg.channels = meta.at("channels").get<int>();
    cfg.layers = meta.at("layers").get<int>();
    cfg.stride = meta.at("stride").get<int>();
    cfg.kind = "file";
    cfg.weights_file = path;
    FeatureExtractor v(cfg);
    checkpoint::unpack_params(archive, "feature", v.parameters());
    return v;
}

// ---------------------------------------------------------------------------

std::pair<Generator, Discriminator> init_networks(const NetworkConfig& cfg, std::uint64_t seed) {
    validate_network_config(cfg);
    Generator g(cfg);
    Discriminator d(cfg);
    Rng grng(mix_seed(seed, 0x67656e6572617430ULL));
    Rng drng(mix_seed(seed, 0x6469736372696d30ULL));
    g.init_params(grng);
    d.init_params(drng);
    return {std::move(g), std::move(d)};
}

}  // namespace cupgan::networks
