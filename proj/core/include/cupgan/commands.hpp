#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "cupgan/config.hpp"

namespace cupgan::cli {

// Exit-code contract shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // usage / config / data errors
inline constexpr int kExitRuntime = 3;  // runtime / numeric errors

// Global flags: --config, --seed, --out-dir.
struct CommonOptions {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
};

// Loads the config file (or defaults) and applies flag overrides.
RunConfig resolve_config(const CommonOptions& common);

int cmd_prepare_data(const CommonOptions& common,
                     const std::optional<std::filesystem::path>& root_override, std::ostream& out,
                     std::ostream& err);

int cmd_train(const CommonOptions& common,
              const std::optional<std::filesystem::path>& resume_from, std::ostream& out,
              std::ostream& err);

int cmd_colorize(const CommonOptions& common, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& input, const std::filesystem::path& output,
                 std::ostream& out, std::ostream& err);

int cmd_evaluate(const CommonOptions& common, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& manifest_path, const std::string& split,
                 bool machine_readable, bool oracle_mode, std::ostream& out, std::ostream& err);

int cmd_ablate(const CommonOptions& common, std::ostream& out, std::ostream& err);

}  // namespace cupgan::cli
