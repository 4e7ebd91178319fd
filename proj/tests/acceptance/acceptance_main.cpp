// Acceptance suite: runs every acceptance criterion end to end and prints
// one PASS/FAIL line per criterion. Exits with the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cupgan/colorspace.hpp"
#include "cupgan/dataio.hpp"
#include "cupgan/losses.hpp"
#include "cupgan/metrics.hpp"
#include "cupgan/networks.hpp"
#include "cupgan/trainer.hpp"
#include "metric_oracles.hpp"
#include "testutil.hpp"

using namespace cupgan;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    std::string name;
    bool passed = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

// ---------------------------------------------------------------------------
// 1. Colour-space round trip: 1,000 random images, sizes 8-256, error <= 1.

Criterion check_roundtrip() {
    Criterion c{"colorspace-round-trip"};
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    int worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 8 + static_cast<int>(rng() % 249);
        const int w = 8 + static_cast<int>(rng() % 249);
        const RgbImage img = testutil::random_image(h, w, rng);
        const RgbImage back = colorspace::lab_to_rgb(colorspace::rgb_to_lab(img));
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            worst = std::max(worst, std::abs(static_cast<int>(img.pixels[i]) -
                                             static_cast<int>(back.pixels[i])));
        }
    }
    const double elapsed = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max channel error %d (limit 1), %.1fs (limit 60s)", worst,
                  elapsed);
    c.detail = buf;
    c.passed = worst <= 1 && elapsed < 60.0;
    return c;
}

// ---------------------------------------------------------------------------
// 2. Metric oracles: 50 random pairs within 1e-6 relative of independent
//    scalar-loop references; identical images score exactly.

Criterion check_metric_oracles() {
    Criterion c{"metric-oracles"};
    std::mt19937_64 rng(7);
    double worst = 0.0;
    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
    };
    for (int trial = 0; trial < 50; ++trial) {
        const RgbImage a16 = testutil::random_image(16, 16, rng);
        const RgbImage b16 = testutil::random_image(16, 16, rng);
        worst = std::max(worst, rel(metrics::mse(a16, b16), oracle::mse(a16, b16)));
        worst = std::max(worst, rel(metrics::psnr(a16, b16), oracle::psnr(a16, b16)));
        worst = std::max(worst, rel(metrics::ssim(a16, b16), oracle::ssim(a16, b16)));
        worst = std::max(worst, rel(metrics::uqi(a16, b16), oracle::uqi(a16, b16)));
        // vif requires at least 32x32 inputs by contract.
        const RgbImage a32 = testutil::random_image(32, 32, rng);
        const RgbImage b32 = testutil::random_image(32, 32, rng);
        worst = std::max(worst, rel(metrics::vif(a32, b32), oracle::vif(a32, b32)));
    }

    const RgbImage same = testutil::random_image(32, 32, rng);
    const bool identical_exact = metrics::mse(same, same) == 0.0 &&
                                 metrics::psnr(same, same) == 99.0 &&
                                 metrics::ssim(same, same) == 1.0 &&
                                 metrics::uqi(same, same) == 1.0 &&
                                 metrics::vif(same, same) == 1.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "max oracle deviation %.3g (limit 1e-6), identical-image scores %s", worst,
                  identical_exact ? "exact" : "NOT exact");
    c.detail = buf;
    c.passed = worst < 1e-6 && identical_exact;
    return c;
}

// ---------------------------------------------------------------------------
// 3. Gradient checks: all four loss components through a tiny generator vs
//    central finite differences, three seeds, < 5 min.

struct TinyRig {
    networks::Generator g;
    networks::Discriminator d;
    networks::FeatureExtractor v;
    Tensor l_input;
    Tensor ab_target;
    Tensor labels;
};

TinyRig make_tiny_rig(std::uint64_t seed) {
    networks::NetworkConfig cfg;
    cfg.image_size = 8;
    cfg.levels = 2;
    cfg.base_channels = 4;
    cfg.head_hidden = 8;
    cfg.num_classes = 3;
    cfg.disc_base_channels = 4;
    auto [g, d] = networks::init_networks(cfg, seed);
    networks::FeatureConfig fc;
    fc.channels = 4;
    fc.layers = 2;
    fc.stride = 1;
    auto v = networks::FeatureExtractor::random(fc, seed + 17);

    std::mt19937_64 rng(seed * 31 + 5);
    TinyRig rig{std::move(g), std::move(d), std::move(v),
                testutil::random_tensor({2, 1, 8, 8}, rng, -0.8, 0.8),
                testutil::random_tensor({2, 2, 8, 8}, rng, -0.5, 0.5), Tensor({2, 3})};
    rig.labels.data()[0 * 3 + 1] = 1.0;
    rig.labels.data()[1 * 3 + 2] = 1.0;
    return rig;
}

Tensor render_rig(const Tensor& l_input, const Tensor& ab) {
    const int b = ab.dim(0);
    const std::size_t area = static_cast<std::size_t>(ab.dim(2)) * ab.dim(3);
    Tensor rgb({b, 3, ab.dim(2), ab.dim(3)});
    std::vector<double> lum(area), ca(area), cb(area);
    for (int n = 0; n < b; ++n) {
        const double* lp = l_input.data() + static_cast<std::size_t>(n) * area;
        const double* ap = ab.data() + static_cast<std::size_t>(n) * 2 * area;
        for (std::size_t i = 0; i < area; ++i) {
            lum[i] = (lp[i] + 1.0) * 50.0;
            ca[i] = ap[i] * colorspace::kChromaScale;
            cb[i] = ap[area + i] * colorspace::kChromaScale;
        }
        colorspace::lab_to_rgb_smooth(lum.data(), ca.data(), cb.data(), area,
                                      rgb.data() + static_cast<std::size_t>(n) * 3 * area);
    }
    return rgb;
}

Tensor render_rig_backward(const Tensor& l_input, const Tensor& ab, const Tensor& d_rgb) {
    const int b = ab.dim(0);
    const std::size_t area = static_cast<std::size_t>(ab.dim(2)) * ab.dim(3);
    Tensor d_ab(ab.shape());
    std::vector<double> lum(area), ca(area), cb(area), da(area), db(area);
    for (int n = 0; n < b; ++n) {
        const double* lp = l_input.data() + static_cast<std::size_t>(n) * area;
        const double* ap = ab.data() + static_cast<std::size_t>(n) * 2 * area;
        for (std::size_t i = 0; i < area; ++i) {
            lum[i] = (lp[i] + 1.0) * 50.0;
            ca[i] = ap[i] * colorspace::kChromaScale;
            cb[i] = ap[area + i] * colorspace::kChromaScale;
            da[i] = db[i] = 0.0;
        }
        colorspace::lab_to_rgb_smooth_backward(
            lum.data(), ca.data(), cb.data(), area,
            d_rgb.data() + static_cast<std::size_t>(n) * 3 * area, da.data(), db.data());
        double* out = d_ab.data() + static_cast<std::size_t>(n) * 2 * area;
        for (std::size_t i = 0; i < area; ++i) {
            out[i] = da[i] * colorspace::kChromaScale;
            out[area + i] = db[i] * colorspace::kChromaScale;
        }
    }
    return d_ab;
}

Criterion check_gradients() {
    Criterion c{"loss-gradient-checks"};
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_where;

    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        TinyRig rig = make_tiny_rig(seed);
        const Tensor zero_ab(rig.ab_target.shape());

        struct Component {
            const char* name;
            std::function<double()> eval;
            std::function<void()> analytic;
        };

        const auto forward_train = [&](Rng& rng) {
            return rig.g.forward(rig.l_input, nn::Mode::Train, &rng);
        };

        std::vector<Component> components;
        components.push_back(
            {"l1",
             [&] {
                 Rng r(777);
                 return losses::l1_chroma_loss(forward_train(r).ab, rig.ab_target);
             },
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 rig.g.backward(losses::l1_chroma_loss_grad(out.ab, rig.ab_target), Tensor{});
             }});
        components.push_back(
            {"classification",
             [&] {
                 Rng r(777);
                 return losses::classification_loss(forward_train(r).logits, rig.labels,
                                                    LabelMode::SingleClass);
             },
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 rig.g.backward(zero_ab,
                                losses::classification_loss_grad(out.logits, rig.labels,
                                                                 LabelMode::SingleClass));
             }});
        components.push_back(
            {"adversarial",
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 const Tensor fake = nn::concat_channels(rig.l_input, out.ab);
                 return losses::generator_adv_from_probs(rig.d.forward(fake, nn::Mode::Train));
             },
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 const Tensor fake = nn::concat_channels(rig.l_input, out.ab);
                 const Tensor p = rig.d.forward(fake, nn::Mode::Train);
                 const Tensor d_img =
                     rig.d.backward(losses::generator_adv_grad(p), false);
                 Tensor d_l, d_ab;
                 nn::split_channels(d_img, 1, &d_l, &d_ab);
                 rig.g.backward(d_ab, Tensor{});
             }});
        components.push_back(
            {"perceptual",
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 const Tensor pred = render_rig(rig.l_input, out.ab);
                 const Tensor target = render_rig(rig.l_input, rig.ab_target);
                 return losses::perceptual_loss(rig.v, pred, target);
             },
             [&] {
                 Rng r(777);
                 auto out = forward_train(r);
                 const Tensor pred = render_rig(rig.l_input, out.ab);
                 const Tensor target = render_rig(rig.l_input, rig.ab_target);
                 Tensor d_pred;
                 losses::perceptual_loss_with_grad(rig.v, pred, target, &d_pred);
                 rig.g.backward(render_rig_backward(rig.l_input, out.ab, d_pred), Tensor{});
             }});

        for (auto& comp : components) {
            rig.g.zero_grad();
            rig.d.zero_grad();
            comp.analytic();
            const auto fd = testutil::finite_difference(rig.g.parameters(), comp.eval, 1e-6);
            const double err = testutil::max_grad_rel_err(rig.g.parameters(), fd);
            if (err > worst) {
                worst = err;
                worst_where = std::string(comp.name) + "@seed" + std::to_string(seed);
            }
        }
    }

    const double elapsed = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "max relative error %.3g (%s, limit 1e-3), %.0fs (limit 300s)",
                  worst, worst_where.c_str(), elapsed);
    c.detail = buf;
    c.passed = worst < 1e-3 && elapsed < 300.0;
    return c;
}

// ---------------------------------------------------------------------------
// 4. Loss composition worked example.

Criterion check_composition() {
    Criterion c{"loss-composition"};
    const losses::LossReport r =
        losses::total_generator_loss({0.5, 0.01, 2.0, 0.1}, losses::LossWeights{});
    const double expect = 0.5 + 100.0 * 0.01 + 10.0 * 2.0 + 1.0 * 0.1;
    c.passed = r.total == expect && std::abs(r.total - 21.6) < 1e-12;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "total %.12f (expected 21.6)", r.total);
    c.detail = buf;
    return c;
}

// ---------------------------------------------------------------------------
// 5. Shape and range contracts at 256x256 for 2, 30 and 365 classes.

Criterion check_shapes() {
    Criterion c{"shape-range-contracts"};
    bool ok = true;
    std::string detail;
    for (int k : {2, 30, 365}) {
        networks::NetworkConfig cfg;
        cfg.image_size = 256;
        cfg.levels = 6;
        cfg.base_channels = 16;
        cfg.head_hidden = 128;
        cfg.num_classes = k;
        cfg.disc_base_channels = 8;
        auto [g, d] = networks::init_networks(cfg, 400 + static_cast<std::uint64_t>(k));
        std::mt19937_64 rng(k);
        const Tensor x = testutil::random_tensor({2, 1, 256, 256}, rng, -1.0, 1.0);
        auto out = g.forward(x, nn::Mode::Eval);
        ok = ok && out.ab.shape() == std::vector<int>{2, 2, 256, 256};
        ok = ok && out.logits.shape() == std::vector<int>{2, k};
        for (std::size_t i = 0; i < out.ab.numel() && ok; ++i) {
            ok = out.ab[i] > -1.0 && out.ab[i] < 1.0;
        }
        const Tensor img = testutil::random_tensor({2, 3, 256, 256}, rng, -1.0, 1.0);
        const Tensor p = d.forward(img, nn::Mode::Eval);
        ok = ok && p.shape() == std::vector<int>{2, 1};
        for (std::size_t i = 0; i < p.numel() && ok; ++i) ok = p[i] > 0.0 && p[i] < 1.0;
        detail += "K=" + std::to_string(k) + (ok ? " ok " : " FAILED ");
        if (!ok) break;
    }
    c.passed = ok;
    c.detail = detail;
    return c;
}

// ---------------------------------------------------------------------------
// Synthetic datasets for the training criteria.

RgbImage class_image(int cls, int variant, int size) {
    colorspace::LabImage lab(size, size);
    const double hues[4][2] = {{62.0, 12.0}, {-52.0, 28.0}, {8.0, 64.0}, {-24.0, -52.0}};
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * size + x;
            lab.L[i] = 22.0 + 55.0 * (x + y + 3.0 * variant) / (2.0 * size + 24.0);
            lab.a[i] = hues[cls][0] * (0.75 + 0.25 * std::sin(0.21 * x + 0.5 * variant));
            lab.b[i] = hues[cls][1] * (0.75 + 0.25 * std::cos(0.17 * y + 0.3 * variant));
        }
    }
    return colorspace::lab_to_rgb(lab);
}

dataio::DatasetManifest build_ablation_dataset(const std::filesystem::path& root) {
    for (int cls = 0; cls < 4; ++cls) {
        for (int i = 0; i < 16; ++i) {
            char name[48];
            std::snprintf(name, sizeof(name), "c%d/sample_%02d.png", cls, i);
            dataio::save_image(root / name, class_image(cls, i, 64));
        }
    }
    return dataio::build_manifest(root, LabelMode::SingleClass);
}

trainer::TrainRun ablation_run(const std::filesystem::path& out_dir, std::uint64_t seed) {
    trainer::TrainRun run;
    run.train.learning_rate = 0.05;
    run.train.batch_size = 16;
    run.train.epochs = 6;
    run.train.seed = seed;
    run.train.loss_mode = trainer::LossMode::L1PlusPer;
    run.network.image_size = 256;
    run.network.levels = 4;
    run.network.base_channels = 6;
    run.network.head_hidden = 32;
    run.network.disc_base_channels = 4;
    run.feature.channels = 6;
    run.feature.layers = 1;
    run.feature.stride = 4;
    run.out_dir = out_dir;
    return run;
}

double epoch_mean_l1(const std::vector<losses::LossReport>& history, int steps_per_epoch,
                     int epoch) {
    double sum = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
        sum += history[static_cast<std::size_t>(epoch * steps_per_epoch + s)].l1;
    }
    return sum / steps_per_epoch;
}

// 6. Overfit surrogate for the ablation ordering.

Criterion check_ablation() {
    Criterion c{"ablation-overfit-ordering"};
    const auto t0 = Clock::now();
    testutil::ScratchDir dir("accept_ablation");
    const auto manifest = build_ablation_dataset(dir.path() / "data");

    int l1_decreasing = 0, runs_total = 0;
    int ordering_holds = 0;
    std::string detail;
    for (std::uint64_t seed : {21ULL, 22ULL, 23ULL}) {
        const auto run = ablation_run(dir.path() / ("out_" + std::to_string(seed)), seed);
        const trainer::AblationResult result = trainer::run_ablation(manifest, run);
        double ssim_per = 0.0, ssim_both = 0.0;
        for (const auto& ar : result.runs) {
            ++runs_total;
            const int epochs = static_cast<int>(ar.history.size()) / ar.steps_per_epoch;
            const double first = epoch_mean_l1(ar.history, ar.steps_per_epoch, 0);
            const double last = epoch_mean_l1(ar.history, ar.steps_per_epoch, epochs - 1);
            if (last < first) ++l1_decreasing;
            if (ar.mode == trainer::LossMode::PerOnly) ssim_per = ar.held_out.ssim;
            if (ar.mode == trainer::LossMode::L1PlusPer) ssim_both = ar.held_out.ssim;
        }
        if (ssim_both >= ssim_per) ++ordering_holds;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "seed%llu ssim(L1+per)=%.3f ssim(per)=%.3f; ",
                      static_cast<unsigned long long>(seed), ssim_both, ssim_per);
        detail += buf;
    }
    const double elapsed = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "L1 decreasing %d/%d, SSIM ordering %d/3 (need >=2), %.0fs",
                  l1_decreasing, runs_total, ordering_holds, elapsed);
    c.detail = detail + buf;
    c.passed = l1_decreasing == runs_total && ordering_holds >= 2 && elapsed < 1800.0;
    return c;
}

// ---------------------------------------------------------------------------
// 7. Determinism: identical seeds give bit-identical logs and checkpoints.

Criterion check_determinism() {
    Criterion c{"training-determinism"};
    testutil::ScratchDir dir("accept_determinism");
    const auto data_root = dir.path() / "data";
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < 4; ++i) {
            char name[48];
            std::snprintf(name, sizeof(name), "c%d/im_%02d.png", cls, i);
            dataio::save_image(data_root / name, class_image(cls, i, 48));
        }
    }
    const auto manifest = dataio::build_manifest(data_root, LabelMode::SingleClass);

    trainer::TrainRun run;
    run.train.learning_rate = 0.02;
    run.train.batch_size = 4;
    run.train.epochs = 2;
    run.train.seed = 99;
    run.train.loss_mode = trainer::LossMode::Full;
    run.network.image_size = 256;
    run.network.levels = 3;
    run.network.base_channels = 2;
    run.network.head_hidden = 8;
    run.network.disc_base_channels = 2;
    run.feature.channels = 2;
    run.feature.layers = 1;
    run.feature.stride = 4;

    run.out_dir = dir.path() / "a";
    const auto ra = trainer::train(manifest, run);
    run.out_dir = dir.path() / "b";
    const auto rb = trainer::train(manifest, run);

    const bool logs_equal =
        slurp(dir.path() / "a" / "training_log.txt") == slurp(dir.path() / "b" / "training_log.txt");
    const bool ckpts_equal = slurp(ra.final_checkpoint) == slurp(rb.final_checkpoint);
    c.passed = logs_equal && ckpts_equal;
    c.detail = std::string("logs ") + (logs_equal ? "identical" : "DIFFER") + ", checkpoints " +
               (ckpts_equal ? "identical" : "DIFFER");
    return c;
}

// ---------------------------------------------------------------------------
// 8. Filter conservation through the real CLI binary.

Criterion check_filter_conservation() {
    Criterion c{"filter-conservation"};
    testutil::ScratchDir dir("accept_filter");
    const auto root = dir.path() / "data";
    std::mt19937_64 rng(606);
    int made_gray = 0, made_low = 0, made_col = 0;
    for (int i = 0; i < 100; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "c/img_%03d.png", i);
        RgbImage img;
        if (i < 20) {
            // Exactly grayscale.
            img = RgbImage(32, 32);
            for (int p = 0; p < 32 * 32; ++p) {
                const auto v = static_cast<std::uint8_t>(rng() % 256);
                img.pixels[3 * p] = img.pixels[3 * p + 1] = img.pixels[3 * p + 2] = v;
            }
            ++made_gray;
        } else if (i < 30) {
            // Low chroma (~2.5), not exactly gray.
            colorspace::LabImage lab(32, 32);
            for (std::size_t p = 0; p < lab.L.size(); ++p) {
                lab.L[p] = 35.0 + (p % 23);
                lab.a[p] = 2.5;
                lab.b[p] = 0.0;
            }
            img = colorspace::lab_to_rgb(lab);
            ++made_low;
        } else {
            img = class_image(i % 4, i, 32);
            ++made_col;
        }
        dataio::save_image(root / name, img);
    }

    // Construction sanity before involving the CLI.
    dataio::FilterPolicy policy;
    int g = 0, l = 0, col = 0;
    for (int i = 0; i < 100; ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "c/img_%03d.png", i);
        switch (dataio::classify_color_content(dataio::load_image(root / name), policy)) {
            case dataio::FilterVerdict::Grayscale: ++g; break;
            case dataio::FilterVerdict::LowChroma: ++l; break;
            case dataio::FilterVerdict::Colorful: ++col; break;
        }
    }
    if (g != 20 || l != 10 || col != 70) {
        c.detail = "synthetic construction off: gray " + std::to_string(g) + " low " +
                   std::to_string(l) + " colorful " + std::to_string(col);
        return c;
    }

    const auto stdout_path = dir.path() / "prepare_stdout.txt";
    const std::string cmd = std::string(CUPGAN_CLI_PATH) + " prepare-data --root " +
                            root.string() + " --out-dir " + (dir.path() / "out").string() + " > " +
                            stdout_path.string();
    const int rc = std::system(cmd.c_str());
    const std::string out = slurp(stdout_path);
    const bool counts_ok = out.find("total 100") != std::string::npos &&
                           out.find("rejected_grayscale 20") != std::string::npos &&
                           out.find("rejected_low_chroma 10") != std::string::npos &&
                           out.find("surviving 70") != std::string::npos;
    c.passed = rc == 0 && counts_ok;
    std::string flat = out;
    for (auto& ch : flat) {
        if (ch == '\n') ch = ' ';
    }
    c.detail = "cli reported: " + flat;
    return c;
}

}  // namespace

int main() {
    std::vector<Criterion> results;
    const auto t0 = Clock::now();

    results.push_back(check_roundtrip());
    results.push_back(check_metric_oracles());
    results.push_back(check_gradients());
    results.push_back(check_composition());
    results.push_back(check_shapes());
    results.push_back(check_ablation());
    results.push_back(check_determinism());
    results.push_back(check_filter_conservation());

    int failures = 0;
    for (const auto& r : results) {
        if (!r.passed) ++failures;
        std::printf("[%s] %s — %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
    }
    std::printf("%d/%zu criteria passed in %.0fs\n", static_cast<int>(results.size()) - failures,
                results.size(), seconds_since(t0));
    return failures;
}
