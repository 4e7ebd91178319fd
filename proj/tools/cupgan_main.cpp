#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "cupgan/commands.hpp"

namespace cli = cupgan::cli;

int main(int argc, char** argv) {
    CLI::App app{"cupgan - conditional-GAN image colourization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON run-config file")->expected(1);
    app.add_option("--seed", seed, "override the training seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--out-dir", out_dir, "override the output directory");

    auto common = [&]() {
        cli::CommonOptions c;
        if (!config_path.empty()) c.config_path = config_path;
        if (seed_set) c.seed = seed;
        if (!out_dir.empty()) c.out_dir = out_dir;
        return c;
    };

    // prepare-data
    auto* prep = app.add_subcommand("prepare-data",
                                    "scan a dataset, filter out colourless images, write the manifest");
    std::string prep_root;
    prep->add_option("--root", prep_root, "dataset root directory");

    // train
    auto* train = app.add_subcommand("train", "train the colourization model");
    std::string resume;
    train->add_option("--resume", resume, "checkpoint to resume from");

    // colorize
    auto* col = app.add_subcommand("colorize", "colourize one image with a trained checkpoint");
    std::string col_ckpt, col_in, col_out;
    col->add_option("--checkpoint", col_ckpt, "trained checkpoint")->required();
    col->add_option("--input", col_in, "grayscale or colour input image")->required();
    col->add_option("--output", col_out, "output image path")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score colourizations on a manifest split");
    std::string eval_ckpt, eval_manifest, eval_split = "held-out";
    bool eval_kv = false, eval_oracle = false;
    eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint");
    eval->add_option("--manifest", eval_manifest, "manifest file")->required();
    eval->add_option("--split", eval_split, "held-out | train | all");
    eval->add_flag("--kv", eval_kv, "machine-readable key=value output");
    eval->add_flag("--oracle", eval_oracle, "score ground truth against itself");

    // ablate
    app.add_subcommand("ablate", "train and compare the reduced-objective variants");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitUsage;
    }

    if (prep->parsed()) {
        std::optional<std::filesystem::path> root;
        if (!prep_root.empty()) root = prep_root;
        return cli::cmd_prepare_data(common(), root, std::cout, std::cerr);
    }
    if (train->parsed()) {
        std::optional<std::filesystem::path> resume_from;
        if (!resume.empty()) resume_from = resume;
        return cli::cmd_train(common(), resume_from, std::cout, std::cerr);
    }
    if (col->parsed()) {
        return cli::cmd_colorize(common(), col_ckpt, col_in, col_out, std::cout, std::cerr);
    }
    if (eval->parsed()) {
        return cli::cmd_evaluate(common(), eval_ckpt, eval_manifest, eval_split, eval_kv,
                                 eval_oracle, std::cout, std::cerr);
    }
    return cli::cmd_ablate(common(), std::cout, std::cerr);
}
