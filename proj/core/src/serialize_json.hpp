// Private JSON (de)serializers shared by the checkpoint and config code.
#pragma once

#include <nlohmann/json.hpp>

#include "cupgan/dataio.hpp"
#include "cupgan/networks.hpp"
#include "cupgan/trainer.hpp"

namespace cupgan::detail {

inline nlohmann::json network_to_json(const networks::NetworkConfig& c) {
    return {{"image_size", c.image_size},
            {"levels", c.levels},
            {"base_channels", c.base_channels},
            {"head_hidden", c.head_hidden},
            {"num_classes", c.num_classes},
            {"disc_base_channels", c.disc_base_channels}};
}

inline networks::NetworkConfig network_from_json(const nlohmann::json& j) {
    networks::NetworkConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.levels = j.value("levels", c.levels);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.head_hidden = j.value("head_hidden", c.head_hidden);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.disc_base_channels = j.value("disc_base_channels", c.disc_base_channels);
    return c;
}

inline nlohmann::json feature_to_json(const networks::FeatureConfig& c) {
    return {{"channels", c.channels},
            {"layers", c.layers},
            {"stride", c.stride},
            {"kind", c.kind},
            {"weights_file", c.weights_file}};
}

inline networks::FeatureConfig feature_from_json(const nlohmann::json& j) {
    networks::FeatureConfig c;
    c.channels = j.value("channels", c.channels);
    c.layers = j.value("layers", c.layers);
    c.stride = j.value("stride", c.stride);
    c.kind = j.value("kind", c.kind);
    c.weights_file = j.value("weights_file", c.weights_file);
    return c;
}

inline nlohmann::json train_to_json(const trainer::TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"lambda_l1", c.weights.lambda_l1},
            {"lambda_class", c.weights.lambda_class},
            {"lambda_perceptual", c.weights.lambda_perceptual},
            {"loss_mode", trainer::to_string(c.loss_mode)},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every}};
}

inline trainer::TrainConfig train_from_json(const nlohmann::json& j) {
    trainer::TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.weights.lambda_l1 = j.value("lambda_l1", c.weights.lambda_l1);
    c.weights.lambda_class = j.value("lambda_class", c.weights.lambda_class);
    c.weights.lambda_perceptual = j.value("lambda_perceptual", c.weights.lambda_perceptual);
    if (j.contains("loss_mode")) c.loss_mode = trainer::parse_loss_mode(j.at("loss_mode"));
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    return c;
}

inline nlohmann::json filter_to_json(const dataio::FilterPolicy& p) {
    return {{"chroma_threshold", p.chroma_threshold}, {"grayscale_epsilon", p.grayscale_epsilon}};
}

inline dataio::FilterPolicy filter_from_json(const nlohmann::json& j) {
    dataio::FilterPolicy p;
    p.chroma_threshold = j.value("chroma_threshold", p.chroma_threshold);
    p.grayscale_epsilon = j.value("grayscale_epsilon", p.grayscale_epsilon);
    return p;
}

}  // namespace cupgan::detail
