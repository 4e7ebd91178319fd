#include "cupgan/dataio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cupgan/colorspace.hpp"
#include "cupgan/errors.hpp"

namespace cupgan::dataio {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::uint8_t> parse_attribute_spec(const std::string& spec, const std::string& where) {
    std::vector<std::uint8_t> attrs;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "0") {
            attrs.push_back(0);
        } else if (tok == "1") {
            attrs.push_back(1);
        } else {
            throw DataError("manifest: bad attribute value '" + tok + "' in " + where);
        }
    }
    if (attrs.empty()) throw DataError("manifest: empty attribute vector in " + where);
    return attrs;
}

std::string attribute_spec(const std::vector<std::uint8_t>& attrs) {
    std::string s;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) s += ',';
        s += attrs[i] ? '1' : '0';
    }
    return s;
}

}  // namespace

RgbImage load_image(const fs::path& path) {
    if (!fs::exists(path)) throw DataError("image not found: " + path.string());
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw DataError("cannot decode image: " + path.string());
    if (m.depth() != CV_8U) {
        cv::Mat m8;
        m.convertTo(m8, CV_8U, m.depth() == CV_16U ? 255.0 / 65535.0 : 1.0);
        m = m8;
    }
    RgbImage out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            std::uint8_t r, g, b;
            if (m.channels() == 1) {
                r = g = b = m.at<std::uint8_t>(y, x);
            } else if (m.channels() == 3) {
                const auto px = m.at<cv::Vec3b>(y, x);  // OpenCV stores BGR
                b = px[0], g = px[1], r = px[2];
            } else if (m.channels() == 4) {
                const auto px = m.at<cv::Vec4b>(y, x);
                b = px[0], g = px[1], r = px[2];
            } else {
                throw DataError("unsupported channel count in " + path.string());
            }
            out.at(y, x, 0) = r;
            out.at(y, x, 1) = g;
            out.at(y, x, 2) = b;
        }
    }
    return out;
}

void save_image(const fs::path& path, const RgbImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(img.at(y, x, 2), img.at(y, x, 1), img.at(y, x, 0));
        }
    }
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) {
        throw DataError("cannot write image: " + path.string());
    }
}

RgbImage resize_bilinear(const RgbImage& img, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) throw ShapeError("resize: target size must be positive");
    if (out_height == img.height && out_width == img.width) return img;
    RgbImage out(out_height, out_width);
    const double sy = static_cast<double>(img.height) / out_height;
    const double sx = static_cast<double>(img.width) / out_width;
    for (int y = 0; y < out_height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
                const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
                const double v = (1.0 - wy) * top + wy * bot;
                out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

RgbImage resize_to_training(const RgbImage& img) {
    return resize_bilinear(img, kTrainingSize, kTrainingSize);
}

FilterVerdict classify_color_content(const RgbImage& img, const FilterPolicy& policy) {
    bool gray = true;
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t i = 0; i < n; ++i) {
        const int r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
        if (std::abs(r - g) > policy.grayscale_epsilon ||
            std::abs(g - b) > policy.grayscale_epsilon) {
            gray = false;
            break;
        }
    }
    if (gray) return FilterVerdict::Grayscale;
    const colorspace::LabImage lab = colorspace::rgb_to_lab(img);
    double chroma_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        chroma_sum += std::sqrt(lab.a[i] * lab.a[i] + lab.b[i] * lab.b[i]);
    }
    if (chroma_sum / static_cast<double>(n) < policy.chroma_threshold) {
        return FilterVerdict::LowChroma;
    }
    return FilterVerdict::Colorful;
}

bool is_colorful(const RgbImage& img, const FilterPolicy& policy) {
    return classify_color_content(img, policy) == FilterVerdict::Colorful;
}

DatasetManifest build_manifest(const fs::path& root, LabelMode label_mode) {
    if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
    DatasetManifest m;
    m.root = root;
    m.label_mode = label_mode;

    if (label_mode == LabelMode::SingleClass) {
        std::vector<std::string> class_names;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) class_names.push_back(e.path().filename().string());
        }
        std::sort(class_names.begin(), class_names.end());
        for (std::size_t ci = 0; ci < class_names.size(); ++ci) {
            std::vector<std::string> files;
            for (const auto& e : fs::directory_iterator(root / class_names[ci])) {
                if (e.is_regular_file() && has_image_extension(e.path())) {
                    files.push_back(class_names[ci] + "/" + e.path().filename().string());
                }
            }
            std::sort(files.begin(), files.end());
            for (auto& f : files) {
                m.entries.push_back({std::move(f), static_cast<int>(ci), {}});
            }
        }
        m.num_classes = static_cast<int>(class_names.size());
        if (m.entries.empty()) throw DataError("empty dataset: no class images under " + root.string());
        return m;
    }

    const fs::path attr_file = root / "attributes.tsv";
    if (!fs::exists(attr_file)) {
        throw DataError("multi-attribute dataset needs " + attr_file.string());
    }
    std::ifstream is(attr_file);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError("attributes.tsv:" + std::to_string(lineno) + ": missing tab separator");
        }
        ManifestEntry entry;
        entry.path = line.substr(0, tab);
        entry.attributes = parse_attribute_spec(line.substr(tab + 1),
                                                "attributes.tsv:" + std::to_string(lineno));
        if (m.num_classes == 0) {
            m.num_classes = static_cast<int>(entry.attributes.size());
        } else if (static_cast<int>(entry.attributes.size()) != m.num_classes) {
            throw DataError("attributes.tsv:" + std::to_string(lineno) +
                            ": inconsistent attribute count");
        }
        if (!fs::exists(root / entry.path)) {
            throw DataError("attributes.tsv:" + std::to_string(lineno) + ": missing image " +
                            entry.path);
        }
        m.entries.push_back(std::move(entry));
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    if (m.entries.empty()) throw DataError("empty dataset: no attribute rows in " + attr_file.string());
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write manifest: " + path.string());
    os << "#cupgan-manifest v1 mode=" << to_string(manifest.label_mode)
       << " classes=" << manifest.num_classes << "\n";
    for (const auto& e : manifest.entries) {
        os << e.path << '\t';
        if (manifest.label_mode == LabelMode::SingleClass) {
            os << e.class_index;
        } else {
            os << attribute_spec(e.attributes);
        }
        os << '\n';
    }
}

DatasetManifest load_manifest(const fs::path& path, const fs::path& root) {
    std::ifstream is(path);
    if (!is) throw DataError("manifest not found: " + path.string());
    DatasetManifest m;
    m.root = root;
    std::string line;
    if (!std::getline(is, line)) throw DataError("manifest is empty: " + path.string());
    LabelMode mode = LabelMode::SingleClass;
    int classes = 0;
    {
        std::stringstream ss(line);
        std::string magic, version, mode_kv, classes_kv;
        ss >> magic >> version >> mode_kv >> classes_kv;
        if (magic != "#cupgan-manifest" || version != "v1" ||
            mode_kv.rfind("mode=", 0) != 0 || classes_kv.rfind("classes=", 0) != 0) {
            throw DataError("manifest: bad header in " + path.string());
        }
        mode = parse_label_mode(mode_kv.substr(5));
        classes = std::stoi(classes_kv.substr(8));
    }
    m.label_mode = mode;
    m.num_classes = classes;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing tab");
        }
        ManifestEntry e;
        e.path = line.substr(0, tab);
        const std::string spec = line.substr(tab + 1);
        if (mode == LabelMode::SingleClass) {
            try {
                e.class_index = std::stoi(spec);
            } catch (const std::exception&) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad class index");
            }
            if (e.class_index < 0 || e.class_index >= classes) {
                throw DataError(path.string() + ":" + std::to_string(lineno) +
                                ": class index out of range");
            }
        } else {
            e.attributes =
                parse_attribute_spec(spec, path.string() + ":" + std::to_string(lineno));
            if (static_cast<int>(e.attributes.size()) != classes) {
                throw DataError(path.string() + ":" + std::to_string(lineno) +
                                ": attribute count mismatch");
            }
        }
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw DataError("manifest has no entries: " + path.string());
    return m;
}

// ---------------------------------------------------------------------------
// BatchStream

BatchStream::BatchStream(const DatasetManifest& manifest, const FilterPolicy& policy,
                         int batch_size, std::uint64_t seed)
    : label_mode_(manifest.label_mode),
      num_classes_(manifest.num_classes),
      batch_size_(batch_size),
      seed_(seed) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    for (const auto& e : manifest.entries) {
        RgbImage img = load_image(manifest.root / e.path);
        if (!is_colorful(img, policy)) continue;
        samples_.push_back({resize_to_training(img), e.class_index, e.attributes});
    }
    if (samples_.empty()) {
        throw DataError("empty dataset: no images survive the colour filter");
    }
    order_.resize(samples_.size());
    start_epoch(0);
}

void BatchStream::start_epoch(int epoch) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
}

void BatchStream::skip_batches(int count) { cursor_ += count * batch_size_; }

std::optional<SampleBatch> BatchStream::next() {
    if (cursor_ + batch_size_ > static_cast<int>(order_.size())) return std::nullopt;
    std::vector<int> indices(order_.begin() + cursor_, order_.begin() + cursor_ + batch_size_);
    cursor_ += batch_size_;
    return assemble(indices);
}

SampleBatch BatchStream::assemble(const std::vector<int>& indices) const {
    const int b = static_cast<int>(indices.size());
    const int s = kTrainingSize;
    SampleBatch batch;
    batch.batch_size = b;
    batch.l_input = Tensor({b, 1, s, s});
    batch.ab_target = Tensor({b, 2, s, s});
    batch.labels = Tensor({b, num_classes_});
    const std::size_t area = static_cast<std::size_t>(s) * s;
    for (int n = 0; n < b; ++n) {
        const Sample& sample = samples_[static_cast<std::size_t>(indices[static_cast<std::size_t>(n)])];
        const auto norm = colorspace::normalize_lab(colorspace::rgb_to_lab(sample.resized));
        std::copy(norm.L_n.begin(), norm.L_n.end(),
                  batch.l_input.data() + static_cast<std::size_t>(n) * area);
        std::copy(norm.ab_n.begin(), norm.ab_n.end(),
                  batch.ab_target.data() + static_cast<std::size_t>(n) * 2 * area);
        double* label_row = batch.labels.data() + static_cast<std::size_t>(n) * num_classes_;
        if (label_mode_ == LabelMode::SingleClass) {
            label_row[sample.class_index] = 1.0;
        } else {
            for (int k = 0; k < num_classes_; ++k) label_row[k] = sample.attributes[static_cast<std::size_t>(k)];
        }
    }
    return batch;
}

BatchStream make_batches(const DatasetManifest& manifest, const FilterPolicy& policy,
                         int batch_size, std::uint64_t seed) {
    return BatchStream(manifest, policy, batch_size, seed);
}

}  // namespace cupgan::dataio
