#pragma once

#include <filesystem>

#include "cupgan/dataio.hpp"
#include "cupgan/labels.hpp"
#include "cupgan/networks.hpp"
#include "cupgan/trainer.hpp"

namespace cupgan::cli {

// The run-config file: one JSON document holding every knob a run needs.
// Missing keys fall back to these defaults; unknown keys are rejected so a
// typo cannot silently train the wrong model.
struct RunConfig {
    std::filesystem::path dataset_root;
    LabelMode label_mode = LabelMode::SingleClass;
    std::filesystem::path manifest_path;  // empty = <out_dir>/manifest.tsv

    dataio::FilterPolicy filter;
    networks::NetworkConfig network;
    networks::FeatureConfig feature;
    trainer::TrainConfig train;

    std::filesystem::path out_dir = "out";

    std::filesystem::path resolved_manifest_path() const {
        return manifest_path.empty() ? out_dir / "manifest.tsv" : manifest_path;
    }
};

RunConfig load_run_config(const std::filesystem::path& path);

// Stores the configuration beside the run's outputs as its reproducibility
// record.
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace cupgan::cli
