#include "cupgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cupgan/checkpoint.hpp"
#include "cupgan/colorspace.hpp"
#include "cupgan/errors.hpp"
#include "serialize_json.hpp"

namespace cupgan::trainer {

namespace fs = std::filesystem;

std::string to_string(LossMode m) {
    switch (m) {
        case LossMode::Full: return "full";
        case LossMode::L1Only: return "l1_only";
        case LossMode::PerOnly: return "per_only";
        case LossMode::L1PlusPer: return "l1_plus_per";
    }
    return "full";
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "full") return LossMode::Full;
    if (s == "l1_only") return LossMode::L1Only;
    if (s == "per_only") return LossMode::PerOnly;
    if (s == "l1_plus_per") return LossMode::L1PlusPer;
    throw ConfigError("unknown loss_mode '" + s +
                      "' (expected full, l1_only, per_only or l1_plus_per)");
}

void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (cfg.weights.lambda_l1 < 0.0 || cfg.weights.lambda_class < 0.0 ||
        cfg.weights.lambda_perceptual < 0.0) {
        throw ConfigError("loss weights must be non-negative");
    }
}

// ---------------------------------------------------------------------------
// Adagrad

void Adagrad::step(const std::vector<nn::NamedParam>& params) {
    for (const auto& np : params) {
        Tensor* acc = nullptr;
        for (auto& [name, t] : accum_) {
            if (name == np.name) {
                acc = &t;
                break;
            }
        }
        if (acc == nullptr) {
            accum_.emplace_back(np.name, Tensor(np.param->value.shape()));
            acc = &accum_.back().second;
        }
        if (!acc->same_shape(np.param->value)) {
            throw CheckpointError("adagrad: accumulator shape mismatch for " + np.name);
        }
        Tensor& v = np.param->value;
        const Tensor& g = np.param->grad;
        for (std::size_t i = 0; i < v.numel(); ++i) {
            (*acc)[i] += g[i] * g[i];
            v[i] -= lr_ * g[i] / (std::sqrt((*acc)[i]) + eps_);
        }
    }
}

// ---------------------------------------------------------------------------
// State

TrainState init_state(const TrainConfig& config, const networks::NetworkConfig& net,
                      const networks::FeatureConfig& feat, LabelMode label_mode) {
    validate_train_config(config);
    auto [g, d] = networks::init_networks(net, config.seed);
    networks::FeatureExtractor v =
        feat.kind == "file" ? networks::FeatureExtractor::from_file(feat.weights_file)
                            : networks::FeatureExtractor::random(feat, config.seed);
    return TrainState{std::move(g),
                      std::move(d),
                      std::move(v),
                      Adagrad(config.learning_rate),
                      Adagrad(config.learning_rate),
                      Rng(mix_seed(config.seed, 0x747261696e726e67ULL)),
                      0,
                      0,
                      label_mode,
                      config,
                      feat};
}

namespace {

struct ActiveComponents {
    bool l1 = false;
    bool classification = false;
    bool perceptual = false;
};

ActiveComponents active_components(LossMode mode) {
    switch (mode) {
        case LossMode::Full: return {true, true, true};
        case LossMode::L1Only: return {true, false, false};
        case LossMode::PerOnly: return {false, false, true};
        case LossMode::L1PlusPer: return {true, false, true};
    }
    return {true, true, true};
}

// Denormalizes (L_n, ab) and renders smooth unclipped RGB [B,3,S,S].
Tensor render_smooth(const Tensor& l_input, const Tensor& ab) {
    const int b = ab.dim(0);
    const std::size_t area = static_cast<std::size_t>(ab.dim(2)) * ab.dim(3);
    Tensor rgb({b, 3, ab.dim(2), ab.dim(3)});
    std::vector<double> lum(area), ca(area), cb(area);
    for (int n = 0; n < b; ++n) {
        const double* lp = l_input.data() + static_cast<std::size_t>(n) * area;
        const double* ap = ab.data() + static_cast<std::size_t>(n) * 2 * area;
        const double* bp = ap + area;
        for (std::size_t i = 0; i < area; ++i) {
            lum[i] = (lp[i] + 1.0) * 50.0;
            ca[i] = ap[i] * colorspace::kChromaScale;
            cb[i] = bp[i] * colorspace::kChromaScale;
        }
        colorspace::lab_to_rgb_smooth(lum.data(), ca.data(), cb.data(), area,
                                      rgb.data() + static_cast<std::size_t>(n) * 3 * area);
    }
    return rgb;
}

// d loss / d ab (normalized chroma) given d loss / d rgb.
Tensor render_smooth_backward(const Tensor& l_input, const Tensor& ab, const Tensor& d_rgb) {
    const int b = ab.dim(0);
    const std::size_t area = static_cast<std::size_t>(ab.dim(2)) * ab.dim(3);
    Tensor d_ab(ab.shape());
    std::vector<double> lum(area), ca(area), cb(area), da(area), db(area);
    for (int n = 0; n < b; ++n) {
        const double* lp = l_input.data() + static_cast<std::size_t>(n) * area;
        const double* ap = ab.data() + static_cast<std::size_t>(n) * 2 * area;
        const double* bp = ap + area;
        for (std::size_t i = 0; i < area; ++i) {
            lum[i] = (lp[i] + 1.0) * 50.0;
            ca[i] = ap[i] * colorspace::kChromaScale;
            cb[i] = bp[i] * colorspace::kChromaScale;
            da[i] = 0.0;
            db[i] = 0.0;
        }
        colorspace::lab_to_rgb_smooth_backward(
            lum.data(), ca.data(), cb.data(), area,
            d_rgb.data() + static_cast<std::size_t>(n) * 3 * area, da.data(), db.data());
        double* out_a = d_ab.data() + static_cast<std::size_t>(n) * 2 * area;
        double* out_b = out_a + area;
        for (std::size_t i = 0; i < area; ++i) {
            out_a[i] = da[i] * colorspace::kChromaScale;
            out_b[i] = db[i] * colorspace::kChromaScale;
        }
    }
    return d_ab;
}

void add_scaled(Tensor& acc, const Tensor& g, double scale) {
    require_same_shape(acc, g, "add_scaled");
    for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += scale * g[i];
}

}  // namespace

StepResult train_step(TrainState& state, const dataio::SampleBatch& batch,
                      const TrainConfig& config) {
    const ActiveComponents on = active_components(config.loss_mode);

    // Generator forward (train mode: dropout + batch statistics).
    auto gen_out = state.generator.forward(batch.l_input, nn::Mode::Train, &state.rng);
    const Tensor real = nn::concat_channels(batch.l_input, batch.ab_target);
    const Tensor fake = nn::concat_channels(batch.l_input, gen_out.ab);

    // --- Discriminator update -------------------------------------------
    const Tensor p_real = state.discriminator.forward(real, nn::Mode::Train);
    state.discriminator.backward(losses::discriminator_loss_grad_real(p_real));
    const Tensor p_fake = state.discriminator.forward(fake, nn::Mode::Train);
    state.discriminator.backward(losses::discriminator_loss_grad_fake(p_fake));
    const double d_loss = losses::discriminator_loss_from_probs(p_real, p_fake);
    if (!std::isfinite(d_loss)) {
        throw NumericError("train_step: discriminator adversarial loss is not finite");
    }
    state.opt_d.step(state.discriminator.parameters());
    state.discriminator.zero_grad();

    // --- Generator update -------------------------------------------------
    const Tensor p_fake2 = state.discriminator.forward(fake, nn::Mode::Train);
    const double adv = losses::generator_adv_from_probs(p_fake2);
    const Tensor d_fake_img =
        state.discriminator.backward(losses::generator_adv_grad(p_fake2),
                                     /*accumulate_param_grads=*/false);
    Tensor d_luma_unused, grad_ab;
    nn::split_channels(d_fake_img, 1, &d_luma_unused, &grad_ab);

    const double l1 = losses::l1_chroma_loss(gen_out.ab, batch.ab_target);
    if (on.l1 && config.weights.lambda_l1 > 0.0) {
        add_scaled(grad_ab, losses::l1_chroma_loss_grad(gen_out.ab, batch.ab_target),
                   config.weights.lambda_l1);
    }

    double perceptual = 0.0;
    if (on.perceptual) {
        const Tensor pred_rgb = render_smooth(batch.l_input, gen_out.ab);
        const Tensor target_rgb = render_smooth(batch.l_input, batch.ab_target);
        Tensor d_pred_rgb;
        perceptual = losses::perceptual_loss_with_grad(state.extractor, pred_rgb, target_rgb,
                                                       &d_pred_rgb);
        if (config.weights.lambda_perceptual > 0.0) {
            add_scaled(grad_ab, render_smooth_backward(batch.l_input, gen_out.ab, d_pred_rgb),
                       config.weights.lambda_perceptual);
        }
    }

    double classification = 0.0;
    Tensor d_logits;
    if (on.classification) {
        classification = losses::classification_loss(gen_out.logits, batch.labels,
                                                      state.label_mode);
        if (config.weights.lambda_class > 0.0) {
            d_logits = losses::classification_loss_grad(gen_out.logits, batch.labels,
                                                        state.label_mode);
            for (std::size_t i = 0; i < d_logits.numel(); ++i) {
                d_logits[i] *= config.weights.lambda_class;
            }
        }
    }

    losses::LossWeights effective = config.weights;
    if (!on.l1) effective.lambda_l1 = 0.0;
    if (!on.classification) effective.lambda_class = 0.0;
    if (!on.perceptual) effective.lambda_perceptual = 0.0;
    const losses::LossReport report =
        losses::total_generator_loss({adv, l1, classification, perceptual}, effective);

    state.generator.backward(grad_ab, d_logits);
    state.opt_g.step(state.generator.parameters());
    state.generator.zero_grad();
    state.discriminator.zero_grad();  // drop BN grads from the to-input pass

    ++state.global_step;
    return {report, d_loss};
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const TrainState& state, const fs::path& path) {
    auto& mut = const_cast<TrainState&>(state);
    checkpoint::Archive archive;

    nlohmann::json meta;
    meta["format"] = "cupgan-checkpoint";
    meta["version"] = 1;
    meta["epoch"] = state.epoch;
    meta["global_step"] = state.global_step;
    meta["seed"] = state.config.seed;
    meta["num_classes"] = state.generator.config().num_classes;
    meta["label_mode"] = cupgan::to_string(state.label_mode);
    meta["network"] = detail::network_to_json(state.generator.config());
    meta["feature"] = detail::feature_to_json(state.feature_config);
    meta["train"] = detail::train_to_json(state.config);
    {
        std::ostringstream os;
        os << mut.rng;
        meta["rng"] = os.str();
    }
    archive.meta = meta.dump();

    checkpoint::pack_params(archive, "g", mut.generator.parameters());
    checkpoint::pack_buffers(archive, "g.buf", mut.generator.buffers());
    checkpoint::pack_params(archive, "d", mut.discriminator.parameters());
    checkpoint::pack_buffers(archive, "d.buf", mut.discriminator.buffers());
    checkpoint::pack_params(archive, "feat", mut.extractor.parameters());
    for (const auto& [name, t] : state.opt_g.accumulators()) archive.add("optg." + name, t);
    for (const auto& [name, t] : state.opt_d.accumulators()) archive.add("optd." + name, t);

    checkpoint::write_archive(path.string(), archive);
}

TrainState load_checkpoint(const fs::path& path) {
    const checkpoint::Archive archive = checkpoint::read_archive(path.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(archive.meta);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint: bad metadata: ") + e.what());
    }
    if (meta.value("format", "") != "cupgan-checkpoint") {
        throw CheckpointError("checkpoint: not a trainer checkpoint: " + path.string());
    }
    const auto net = detail::network_from_json(meta.at("network"));
    const auto feat = detail::feature_from_json(meta.at("feature"));
    const auto train_cfg = detail::train_from_json(meta.at("train"));
    const auto label_mode = cupgan::parse_label_mode(meta.value("label_mode", "single-class"));

    TrainState state{networks::Generator(net),
                     networks::Discriminator(net),
                     networks::FeatureExtractor::random(feat, train_cfg.seed),
                     Adagrad(train_cfg.learning_rate),
                     Adagrad(train_cfg.learning_rate),
                     Rng(),
                     meta.at("global_step").get<long long>(),
                     meta.at("epoch").get<int>(),
                     label_mode,
                     train_cfg,
                     feat};

    checkpoint::unpack_params(archive, "g", state.generator.parameters());
    checkpoint::unpack_buffers(archive, "g.buf", state.generator.buffers());
    checkpoint::unpack_params(archive, "d", state.discriminator.parameters());
    checkpoint::unpack_buffers(archive, "d.buf", state.discriminator.buffers());
    checkpoint::unpack_params(archive, "feat", state.extractor.parameters());

    auto load_accums = [&archive](const std::string& prefix,
                                  const std::vector<nn::NamedParam>& params, Adagrad& opt) {
        for (const auto& p : params) {
            const Tensor* t = archive.find(prefix + "." + p.name);
            if (t == nullptr) continue;  // pre-first-step checkpoints carry none
            opt.accumulators().emplace_back(p.name, *t);
        }
    };
    load_accums("optg", state.generator.parameters(), state.opt_g);
    load_accums("optd", state.discriminator.parameters(), state.opt_d);

    {
        std::istringstream is(meta.at("rng").get<std::string>());
        is >> state.rng;
        if (!is) throw CheckpointError("checkpoint: bad RNG state");
    }
    return state;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

void write_latest(const fs::path& out_dir, const std::string& name) {
    std::ofstream os(out_dir / "latest", std::ios::trunc);
    os << name << "\n";
}

std::string step_checkpoint_name(long long step) {
    return "ckpt_" + std::to_string(step) + ".bin";
}

void check_resume_compatible(const TrainState& state, const TrainRun& run, int num_classes) {
    networks::NetworkConfig expect = run.network;
    expect.num_classes = num_classes;
    if (!(state.generator.config() == expect)) {
        throw CheckpointError("resume: checkpoint network config does not match the run config");
    }
    if (!(state.feature_config == run.feature)) {
        throw CheckpointError("resume: checkpoint feature extractor config does not match");
    }
    const TrainConfig& a = state.config;
    const TrainConfig& b = run.train;
    if (a.seed != b.seed || a.batch_size != b.batch_size ||
        a.learning_rate != b.learning_rate || a.loss_mode != b.loss_mode ||
        a.weights.lambda_l1 != b.weights.lambda_l1 ||
        a.weights.lambda_class != b.weights.lambda_class ||
        a.weights.lambda_perceptual != b.weights.lambda_perceptual) {
        throw CheckpointError("resume: checkpoint training config does not match the run config");
    }
}

}  // namespace

TrainResult train(const dataio::DatasetManifest& manifest, const TrainRun& run,
                  const std::optional<fs::path>& resume_from) {
    validate_train_config(run.train);
    fs::create_directories(run.out_dir);

    dataio::BatchStream stream = dataio::make_batches(manifest, run.filter,
                                                      run.train.batch_size, run.train.seed);
    const int steps_per_epoch = stream.batches_per_epoch();
    if (steps_per_epoch == 0) {
        throw DataError("train: fewer surviving images (" + std::to_string(stream.surviving()) +
                        ") than one batch of " + std::to_string(run.train.batch_size));
    }

    networks::NetworkConfig net = run.network;
    net.num_classes = manifest.num_classes;

    TrainResult result{
        resume_from ? load_checkpoint(*resume_from)
                    : init_state(run.train, net, run.feature, manifest.label_mode),
        {},
        {},
        steps_per_epoch,
        {}};
    TrainState& state = result.state;
    if (resume_from) {
        check_resume_compatible(state, run, manifest.num_classes);
        // Trajectory-relevant fields were just verified equal; adopt the live
        // config so later checkpoints reflect this run (e.g. extended epochs).
        state.config = run.train;
    }

    std::ofstream log(run.out_dir / "training_log.txt",
                      resume_from ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("train: cannot open training log in " + run.out_dir.string());

    const int start_epoch = static_cast<int>(state.global_step / steps_per_epoch);
    const int start_offset = static_cast<int>(state.global_step % steps_per_epoch);

    auto save_step_checkpoint = [&](long long step) {
        const std::string name = step_checkpoint_name(step);
        save_checkpoint(state, run.out_dir / name);
        write_latest(run.out_dir, name);
        result.final_checkpoint = run.out_dir / name;
    };

    for (int epoch = start_epoch; epoch < run.train.epochs; ++epoch) {
        stream.start_epoch(epoch);
        if (epoch == start_epoch && start_offset > 0) stream.skip_batches(start_offset);
        while (auto batch = stream.next()) {
            const StepResult sr = train_step(state, *batch, run.train);
            result.history.push_back(sr.report);
            result.d_history.push_back(sr.d_loss);
            log << sr.report.to_log_line(state.global_step) << "\n";
            if (run.train.checkpoint_every > 0 &&
                state.global_step % run.train.checkpoint_every == 0) {
                state.epoch = static_cast<int>(state.global_step / steps_per_epoch);
                save_step_checkpoint(state.global_step);
            }
        }
        state.epoch = epoch + 1;
        if (run.train.checkpoint_every == 0) save_step_checkpoint(state.global_step);
    }
    log.flush();

    save_step_checkpoint(state.global_step);
    return result;
}

// ---------------------------------------------------------------------------
// Inference and evaluation

RgbImage colorize(TrainState& state, const RgbImage& input) {
    const int size = state.generator.config().image_size;
    const RgbImage resized = dataio::resize_bilinear(input, size, size);
    const colorspace::LabImage lab = colorspace::rgb_to_lab(resized);
    Tensor l_input({1, 1, size, size});
    for (std::size_t i = 0; i < lab.L.size(); ++i) l_input[i] = lab.L[i] / 50.0 - 1.0;
    auto out = state.generator.forward(l_input, nn::Mode::Eval, nullptr);
    Plane luminance(size, size);
    luminance.values = lab.L;
    const RgbImage rendered = colorspace::merge_luminance_chroma(luminance, out.ab);
    return dataio::resize_bilinear(rendered, input.height, input.width);
}

bool is_held_out(const std::string& relative_path) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (unsigned char c : relative_path) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h % 10 == 0;
}

metrics::MetricReport evaluate_split(TrainState& state, const dataio::DatasetManifest& manifest,
                                     Split split) {
    std::vector<std::pair<RgbImage, RgbImage>> pairs;
    for (const auto& e : manifest.entries) {
        const bool held = is_held_out(e.path);
        if (split == Split::Train && held) continue;
        if (split == Split::HeldOut && !held) continue;
        const RgbImage truth =
            dataio::resize_to_training(dataio::load_image(manifest.root / e.path));
        pairs.emplace_back(colorize(state, truth), truth);
    }
    if (pairs.empty()) throw DataError("evaluate: selected split is empty");
    return metrics::evaluate_set(pairs);
}

// ---------------------------------------------------------------------------
// Ablation

AblationResult run_ablation(const dataio::DatasetManifest& manifest, const TrainRun& base) {
    dataio::DatasetManifest train_manifest = manifest;
    train_manifest.entries.clear();
    for (const auto& e : manifest.entries) {
        if (!is_held_out(e.path)) train_manifest.entries.push_back(e);
    }
    if (train_manifest.entries.empty()) throw DataError("ablation: train split is empty");
    if (train_manifest.entries.size() == manifest.entries.size()) {
        throw DataError("ablation: held-out split is empty");
    }

    const LossMode modes[] = {LossMode::L1Only, LossMode::PerOnly, LossMode::L1PlusPer};
    AblationResult result;
    for (LossMode mode : modes) {
        TrainRun run = base;
        run.train.loss_mode = mode;
        run.out_dir = base.out_dir / ("ablate_" + to_string(mode));
        TrainResult tr = train(train_manifest, run);
        AblationRun ar{mode,
                       evaluate_split(tr.state, manifest, Split::HeldOut),
                       tr.final_checkpoint,
                       std::move(tr.history),
                       tr.steps_per_epoch};
        result.runs.push_back(std::move(ar));
    }

    char buf[256];
    std::string table = "Metric      L1          per         L1+per\n";
    const auto& r = result.runs;
    const struct {
        const char* name;
        double metrics::MetricReport::*field;
    } rows[] = {{"PSNR", &metrics::MetricReport::psnr},
                {"SSIM", &metrics::MetricReport::ssim},
                {"MSE", &metrics::MetricReport::mse},
                {"UQI", &metrics::MetricReport::uqi},
                {"VIF", &metrics::MetricReport::vif}};
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%-11s %-11.4f %-11.4f %-11.4f\n", row.name,
                      r[0].held_out.*row.field, r[1].held_out.*row.field,
                      r[2].held_out.*row.field);
        table += buf;
    }
    result.table = table;

    fs::create_directories(base.out_dir);
    std::ofstream os(base.out_dir / "ablation_table.txt", std::ios::trunc);
    os << table;
    return result;
}

}  // namespace cupgan::trainer
