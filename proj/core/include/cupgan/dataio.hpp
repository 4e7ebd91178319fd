#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cupgan/image.hpp"
#include "cupgan/labels.hpp"
#include "cupgan/rng.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::dataio {

// Training resolution; every sample is resampled to this size.
inline constexpr int kTrainingSize = 256;

struct FilterPolicy {
    // Reject when mean per-pixel CIELAB chroma falls below this.
    double chroma_threshold = 5.0;
    // Reject when |R-G| and |G-B| never exceed this anywhere.
    double grayscale_epsilon = 0.0;
};

enum class FilterVerdict { Colorful, Grayscale, LowChroma };

struct ManifestEntry {
    std::string path;  // relative to the manifest root
    int class_index = -1;
    std::vector<std::uint8_t> attributes;  // multi-attribute mode
};

struct DatasetManifest {
    std::filesystem::path root;
    LabelMode label_mode = LabelMode::SingleClass;
    int num_classes = 0;
    std::vector<ManifestEntry> entries;
};

// One training step's worth of normalized samples.
struct SampleBatch {
    Tensor l_input;    // [B,1,256,256] in [-1,1]
    Tensor ab_target;  // [B,2,256,256] in [-1,1]
    Tensor labels;     // [B,num_classes]
    int batch_size = 0;
};

// Decodes a PNG/JPEG file; single-channel images are expanded to R=G=B.
// Missing file or undecodable bytes raise DataError.
RgbImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const RgbImage& img);

// Bilinear resample with half-pixel centers; an identity-size resample
// reproduces the input exactly.
RgbImage resize_bilinear(const RgbImage& img, int out_height, int out_width);
RgbImage resize_to_training(const RgbImage& img);

FilterVerdict classify_color_content(const RgbImage& img, const FilterPolicy& policy);
bool is_colorful(const RgbImage& img, const FilterPolicy& policy);

// Scans `root` and assembles a deterministic, lexicographically ordered
// manifest. Single-class mode expects root/<class_name>/<image> with class
// indices assigned by sorted directory name; multi-attribute mode expects
// an attributes.tsv of "relative_path<TAB>0,1,..." lines next to the
// images. Throws DataError when no images are found.
DatasetManifest build_manifest(const std::filesystem::path& root, LabelMode label_mode);

// Text round trip: "#cupgan-manifest v1 mode=<mode> classes=<n>" header,
// then one "relative_path<TAB>label_spec" line per entry.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path,
                              const std::filesystem::path& root);

// Deterministic shuffled batch source. Construction decodes every image
// once, applies the filter policy, and keeps the surviving resized rasters
// in memory (this pipeline targets desk-scale datasets). The final partial
// batch of each epoch is dropped.
class BatchStream {
public:
    BatchStream(const DatasetManifest& manifest, const FilterPolicy& policy, int batch_size,
                std::uint64_t seed);

    int surviving() const { return static_cast<int>(samples_.size()); }
    int batches_per_epoch() const { return surviving() / batch_size_; }
    int num_classes() const { return num_classes_; }

    // Reshuffles for the given epoch; the order is a pure function of
    // (seed, epoch).
    void start_epoch(int epoch);
    // Skips ahead within the current epoch (checkpoint resume).
    void skip_batches(int count);
    std::optional<SampleBatch> next();

private:
    struct Sample {
        RgbImage resized;
        int class_index;
        std::vector<std::uint8_t> attributes;
    };

    SampleBatch assemble(const std::vector<int>& indices) const;

    std::vector<Sample> samples_;
    LabelMode label_mode_;
    int num_classes_ = 0;
    int batch_size_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<int> order_;
    int cursor_ = 0;
};

BatchStream make_batches(const DatasetManifest& manifest, const FilterPolicy& policy,
                         int batch_size, std::uint64_t seed);

}  // namespace cupgan::dataio
