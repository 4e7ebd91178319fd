#include "cupgan/config.hpp"

#include <fstream>

#include "cupgan/errors.hpp"
#include "serialize_json.hpp"

namespace cupgan::cli {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config: parse failure in " + path.string() + ": " + e.what());
    }
    check_keys(j, {"dataset", "filter", "network", "feature", "train", "output_dir"},
               path.string());

    RunConfig cfg;
    try {
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            check_keys(d, {"root", "label_mode", "manifest"}, "dataset");
            cfg.dataset_root = d.value("root", std::string());
            if (d.contains("label_mode")) cfg.label_mode = parse_label_mode(d.at("label_mode"));
            cfg.manifest_path = d.value("manifest", std::string());
        }
        if (j.contains("filter")) {
            check_keys(j.at("filter"), {"chroma_threshold", "grayscale_epsilon"}, "filter");
            cfg.filter = detail::filter_from_json(j.at("filter"));
        }
        if (j.contains("network")) {
            check_keys(j.at("network"),
                       {"image_size", "levels", "base_channels", "head_hidden",
                        "disc_base_channels"},
                       "network");
            cfg.network = detail::network_from_json(j.at("network"));
        }
        if (j.contains("feature")) {
            check_keys(j.at("feature"), {"channels", "layers", "stride", "kind", "weights_file"},
                       "feature");
            cfg.feature = detail::feature_from_json(j.at("feature"));
            if (cfg.feature.kind != "random" && cfg.feature.kind != "file") {
                throw ConfigError("config: feature.kind must be 'random' or 'file'");
            }
            if (cfg.feature.kind == "file" && cfg.feature.weights_file.empty()) {
                throw ConfigError("config: feature.kind 'file' needs feature.weights_file");
            }
        }
        if (j.contains("train")) {
            check_keys(j.at("train"),
                       {"learning_rate", "batch_size", "epochs", "lambda_l1", "lambda_class",
                        "lambda_perceptual", "loss_mode", "seed", "checkpoint_every"},
                       "train");
            cfg.train = detail::train_from_json(j.at("train"));
        }
        if (j.contains("output_dir")) cfg.out_dir = j.at("output_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value in " + path.string() + ": " + e.what());
    }

    if (cfg.filter.chroma_threshold < 0.0 || cfg.filter.grayscale_epsilon < 0.0) {
        throw ConfigError("config: filter thresholds must be non-negative");
    }
    trainer::validate_train_config(cfg.train);
    return cfg;
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
    json j;
    j["dataset"] = {{"root", cfg.dataset_root.string()},
                    {"label_mode", to_string(cfg.label_mode)},
                    {"manifest", cfg.manifest_path.string()}};
    j["filter"] = detail::filter_to_json(cfg.filter);
    j["network"] = detail::network_to_json(cfg.network);
    j["network"].erase("num_classes");  // manifest-derived, not a config input
    j["feature"] = detail::feature_to_json(cfg.feature);
    j["train"] = detail::train_to_json(cfg.train);
    j["output_dir"] = cfg.out_dir.string();
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("config: cannot write " + path.string());
    os << j.dump(2) << "\n";
}

}  // namespace cupgan::cli
