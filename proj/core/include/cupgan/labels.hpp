#pragma once

#include <string>

#include "cupgan/errors.hpp"

namespace cupgan {

// Whether manifests carry a single class index per image or a 0/1
// attribute vector (CelebA-style).
enum class LabelMode { SingleClass, MultiAttribute };

inline std::string to_string(LabelMode m) {
    return m == LabelMode::SingleClass ? "single-class" : "multi-attribute";
}

inline LabelMode parse_label_mode(const std::string& s) {
    if (s == "single-class") return LabelMode::SingleClass;
    if (s == "multi-attribute") return LabelMode::MultiAttribute;
    throw ConfigError("unknown label_mode '" + s + "' (expected single-class or multi-attribute)");
}

}  // namespace cupgan
