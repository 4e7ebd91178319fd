#include "cupgan/commands.hpp"

#include <algorithm>
#include <cstdlib>

#include "cupgan/errors.hpp"
#include "cupgan/metrics.hpp"

namespace cupgan::cli {

namespace fs = std::filesystem;

namespace {

// CUPGAN_DEVICE selects the compute device; only the CPU backend exists, so
// anything else is a configuration error. Absence means the default device.
void check_device() {
    const char* dev = std::getenv("CUPGAN_DEVICE");
    if (dev == nullptr || *dev == '\0') return;
    std::string s(dev);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s != "cpu") {
        throw ConfigError("CUPGAN_DEVICE='" + std::string(dev) + "' is not available (only cpu)");
    }
}

int classify_exit(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitUsage;
    if (dynamic_cast<const DataError*>(&e) != nullptr) return kExitUsage;
    return kExitRuntime;
}

template <typename Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
    try {
        check_device();
        fn();
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        const auto* as_cupgan = dynamic_cast<const Error*>(&e);
        return as_cupgan != nullptr ? classify_exit(e) : kExitRuntime;
    }
}

trainer::TrainRun make_run(const RunConfig& cfg) {
    return trainer::TrainRun{cfg.train, cfg.network, cfg.feature, cfg.filter, cfg.out_dir};
}

void require_file(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

}  // namespace

RunConfig resolve_config(const CommonOptions& common) {
    RunConfig cfg = common.config_path ? load_run_config(*common.config_path) : RunConfig{};
    if (common.seed) cfg.train.seed = *common.seed;
    if (common.out_dir) cfg.out_dir = *common.out_dir;
    return cfg;
}

int cmd_prepare_data(const CommonOptions& common, const std::optional<fs::path>& root_override,
                     std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        RunConfig cfg = resolve_config(common);
        const fs::path root = root_override.value_or(cfg.dataset_root);
        if (root.empty()) {
            throw ConfigError("prepare-data: no dataset root (use --root or dataset.root)");
        }
        dataio::DatasetManifest scanned = dataio::build_manifest(root, cfg.label_mode);

        dataio::DatasetManifest surviving = scanned;
        surviving.entries.clear();
        long grayscale = 0, low_chroma = 0;
        for (const auto& e : scanned.entries) {
            const RgbImage img = dataio::load_image(scanned.root / e.path);
            switch (dataio::classify_color_content(img, cfg.filter)) {
                case dataio::FilterVerdict::Grayscale: ++grayscale; break;
                case dataio::FilterVerdict::LowChroma: ++low_chroma; break;
                case dataio::FilterVerdict::Colorful: surviving.entries.push_back(e); break;
            }
        }
        const fs::path manifest_path = cfg.resolved_manifest_path();
        dataio::save_manifest(surviving, manifest_path);

        out << "total " << scanned.entries.size() << "\n";
        out << "rejected_grayscale " << grayscale << "\n";
        out << "rejected_low_chroma " << low_chroma << "\n";
        out << "surviving " << surviving.entries.size() << "\n";
        out << "manifest " << manifest_path.string() << "\n";
    });
}

int cmd_train(const CommonOptions& common, const std::optional<fs::path>& resume_from,
              std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        RunConfig cfg = resolve_config(common);
        if (cfg.dataset_root.empty()) throw ConfigError("train: dataset.root is not set");
        const dataio::DatasetManifest manifest =
            dataio::load_manifest(cfg.resolved_manifest_path(), cfg.dataset_root);
        save_run_config(cfg, cfg.out_dir / "run_config.json");
        const trainer::TrainResult result = trainer::train(manifest, make_run(cfg), resume_from);
        out << "steps " << result.state.global_step << "\n";
        out << "checkpoint " << result.final_checkpoint.string() << "\n";
    });
}

int cmd_colorize(const CommonOptions& common, const fs::path& checkpoint, const fs::path& input,
                 const fs::path& output, std::ostream& out, std::ostream& err) {
    (void)common;
    return run_guarded(err, [&] {
        require_file(checkpoint, "checkpoint");
        require_file(input, "input image");
        trainer::TrainState state = trainer::load_checkpoint(checkpoint);
        const RgbImage img = dataio::load_image(input);
        dataio::save_image(output, trainer::colorize(state, img));
        out << "wrote " << output.string() << "\n";
    });
}

int cmd_evaluate(const CommonOptions& common, const fs::path& checkpoint,
                 const fs::path& manifest_path, const std::string& split, bool machine_readable,
                 bool oracle_mode, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        RunConfig cfg = resolve_config(common);
        if (cfg.dataset_root.empty()) throw ConfigError("evaluate: dataset.root is not set");
        require_file(manifest_path, "manifest");
        const dataio::DatasetManifest manifest =
            dataio::load_manifest(manifest_path, cfg.dataset_root);

        trainer::Split sel;
        if (split == "held-out") {
            sel = trainer::Split::HeldOut;
        } else if (split == "train") {
            sel = trainer::Split::Train;
        } else if (split == "all") {
            sel = trainer::Split::All;
        } else {
            throw ConfigError("evaluate: unknown split '" + split +
                              "' (expected held-out, train or all)");
        }

        metrics::MetricReport report;
        if (oracle_mode) {
            // Sanity harness: ground truth scored against itself.
            std::vector<std::pair<RgbImage, RgbImage>> pairs;
            for (const auto& e : manifest.entries) {
                const bool held = trainer::is_held_out(e.path);
                if (sel == trainer::Split::Train && held) continue;
                if (sel == trainer::Split::HeldOut && !held) continue;
                RgbImage truth =
                    dataio::resize_to_training(dataio::load_image(manifest.root / e.path));
                pairs.emplace_back(truth, truth);
            }
            if (pairs.empty()) throw DataError("evaluate: selected split is empty");
            report = metrics::evaluate_set(pairs);
        } else {
            require_file(checkpoint, "checkpoint");
            trainer::TrainState state = trainer::load_checkpoint(checkpoint);
            report = trainer::evaluate_split(state, manifest, sel);
        }
        out << (machine_readable ? metrics::format_kv(report) : metrics::format_table(report));
    });
}

int cmd_ablate(const CommonOptions& common, std::ostream& out, std::ostream& err) {
    return run_guarded(err, [&] {
        RunConfig cfg = resolve_config(common);
        if (cfg.dataset_root.empty()) throw ConfigError("ablate: dataset.root is not set");
        const dataio::DatasetManifest manifest =
            dataio::load_manifest(cfg.resolved_manifest_path(), cfg.dataset_root);
        save_run_config(cfg, cfg.out_dir / "run_config.json");
        const trainer::AblationResult result = trainer::run_ablation(manifest, make_run(cfg));
        out << result.table;
        for (const auto& run : result.runs) {
            out << "checkpoint_" << trainer::to_string(run.mode) << " " << run.checkpoint.string()
                << "\n";
        }
    });
}

}  // namespace cupgan::cli
