#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cupgan/dataio.hpp"
#include "cupgan/labels.hpp"
#include "cupgan/losses.hpp"
#include "cupgan/metrics.hpp"
#include "cupgan/networks.hpp"
#include "cupgan/rng.hpp"

namespace cupgan::trainer {

// Which generator-loss components participate in the objective. The
// adversarial term is always active; the measured L1 distance is always
// reported as a progress diagnostic even when it carries zero weight.
enum class LossMode { Full, L1Only, PerOnly, L1PlusPer };

std::string to_string(LossMode m);
LossMode parse_loss_mode(const std::string& s);

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    int epochs = 20;
    losses::LossWeights weights;
    LossMode loss_mode = LossMode::Full;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;  // steps; 0 = once per epoch
};

void validate_train_config(const TrainConfig& cfg);

// Everything one training run needs besides the manifest.
struct TrainRun {
    TrainConfig train;
    networks::NetworkConfig network;
    networks::FeatureConfig feature;
    dataio::FilterPolicy filter;
    std::filesystem::path out_dir;
};

// Adagrad with per-parameter accumulators keyed by parameter name, so the
// optimizer state survives checkpoints independent of object addresses.
class Adagrad {
public:
    explicit Adagrad(double learning_rate, double eps = 1e-10)
        : lr_(learning_rate), eps_(eps) {}

    void step(const std::vector<nn::NamedParam>& params);

    double learning_rate() const { return lr_; }
    std::vector<std::pair<std::string, Tensor>>& accumulators() { return accum_; }
    const std::vector<std::pair<std::string, Tensor>>& accumulators() const { return accum_; }

private:
    double lr_, eps_;
    std::vector<std::pair<std::string, Tensor>> accum_;
};

struct TrainState {
    networks::Generator generator;
    networks::Discriminator discriminator;
    networks::FeatureExtractor extractor;
    Adagrad opt_g;
    Adagrad opt_d;
    Rng rng;
    long long global_step = 0;
    int epoch = 0;
    LabelMode label_mode = LabelMode::SingleClass;
    TrainConfig config;
    networks::FeatureConfig feature_config;
};

// Builds fresh networks and optimizer state, all seeded from config.seed.
TrainState init_state(const TrainConfig& config, const networks::NetworkConfig& net,
                      const networks::FeatureConfig& feat, LabelMode label_mode);

struct StepResult {
    losses::LossReport report;
    double d_loss = 0.0;
};

// One discriminator update followed by one generator update, both Adagrad.
// Throws NumericError naming the offending component on non-finite loss.
StepResult train_step(TrainState& state, const dataio::SampleBatch& batch,
                      const TrainConfig& config);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct TrainResult {
    TrainState state;
    std::vector<losses::LossReport> history;  // one report per step
    std::vector<double> d_history;
    int steps_per_epoch = 0;
    std::filesystem::path final_checkpoint;
};

// Full training loop: epochs x steps_per_epoch steps over the filtered
// manifest, per-step log lines appended to out_dir/training_log.txt,
// checkpoints written on the configured cadence plus one at the end (with
// a `latest` pointer file). Pass `resume_from` to continue a run; the
// checkpoint's configuration must match the run's.
TrainResult train(const dataio::DatasetManifest& manifest, const TrainRun& run,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

// Eval-mode inference: resize to the training resolution, colourize the
// luminance, render, and resize back to the input dimensions.
RgbImage colorize(TrainState& state, const RgbImage& input);

enum class Split { All, Train, HeldOut };

// Deterministic 90/10 split on a path hash; independent of manifest order.
bool is_held_out(const std::string& relative_path);

// Colourizes every selected image at training resolution and scores it
// against the resized ground truth. Throws DataError on an empty split.
metrics::MetricReport evaluate_split(TrainState& state, const dataio::DatasetManifest& manifest,
                                     Split split);

struct AblationRun {
    LossMode mode;
    metrics::MetricReport held_out;
    std::filesystem::path checkpoint;
    std::vector<losses::LossReport> history;
    int steps_per_epoch = 0;
};

struct AblationResult {
    std::vector<AblationRun> runs;  // L1Only, PerOnly, L1PlusPer
    std::string table;
};

// Trains the three reduced-objective variants on the train side of the
// split (identical split for all three), evaluates each on the held-out
// side, and renders the comparison table.
AblationResult run_ablation(const dataio::DatasetManifest& manifest, const TrainRun& base);

}  // namespace cupgan::trainer
