#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "cupgan/colorspace.hpp"
#include "cupgan/dataio.hpp"
#include "cupgan/errors.hpp"
#include "testutil.hpp"

using namespace cupgan;
using namespace cupgan::dataio;

namespace {

RgbImage solid(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RgbImage img(h, w);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
        img.pixels[i] = r;
        img.pixels[i + 1] = g;
        img.pixels[i + 2] = b;
    }
    return img;
}

// Low-chroma but not exactly gray: constant Lab with small a.
RgbImage low_chroma_image(int h, int w, double chroma) {
    colorspace::LabImage lab(h, w);
    for (std::size_t i = 0; i < lab.L.size(); ++i) {
        lab.L[i] = 55.0;
        lab.a[i] = chroma;
        lab.b[i] = 0.0;
    }
    return colorspace::lab_to_rgb(lab);
}

RgbImage gray_noise(int h, int w, std::mt19937_64& rng) {
    RgbImage img(h, w);
    for (int i = 0; i < h * w; ++i) {
        const std::uint8_t v = static_cast<std::uint8_t>(rng() % 256);
        img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = v;
    }
    return img;
}

}  // namespace

TEST_CASE("png save/load round trip and error paths") {
    testutil::ScratchDir dir("io");
    std::mt19937_64 rng(1);
    const RgbImage img = testutil::random_image(9, 7, rng);
    const auto path = dir.path() / "img.png";
    save_image(path, img);

    const RgbImage back = load_image(path);
    CHECK(back.height == 9);
    CHECK(back.width == 7);
    CHECK(back.pixels == img.pixels);  // PNG is lossless

    CHECK_THROWS_AS(load_image(dir.path() / "absent.png"), DataError);

    std::ofstream bad(dir.path() / "bad.png", std::ios::binary);
    bad << "this is not a png";
    bad.close();
    CHECK_THROWS_AS(load_image(dir.path() / "bad.png"), DataError);
}

TEST_CASE("single-channel files expand to R=G=B") {
    testutil::ScratchDir dir("gray");
    // Hand-rolled 4x3 8-bit PGM.
    const auto path = dir.path() / "gray.pgm";
    std::ofstream os(path, std::ios::binary);
    os << "P5\n4 3\n255\n";
    for (int i = 0; i < 12; ++i) os.put(static_cast<char>(i * 20));
    os.close();

    const RgbImage img = load_image(path);
    CHECK(img.height == 3);
    CHECK(img.width == 4);
    for (int i = 0; i < 12; ++i) {
        CHECK(img.pixels[3 * i] == i * 20);
        CHECK(img.pixels[3 * i + 1] == i * 20);
        CHECK(img.pixels[3 * i + 2] == i * 20);
    }
}

TEST_CASE("bilinear resize contracts") {
    std::mt19937_64 rng(2);
    const RgbImage big = testutil::random_image(512, 512, rng);
    const RgbImage small = resize_to_training(big);
    CHECK(small.height == 256);
    CHECK(small.width == 256);

    const RgbImage flat = solid(20, 30, 77, 140, 200);
    const RgbImage flat_resized = resize_bilinear(flat, 256, 256);
    bool constant = true;
    for (std::size_t i = 0; i < flat_resized.pixels.size(); i += 3) {
        constant = constant && flat_resized.pixels[i] == 77 && flat_resized.pixels[i + 1] == 140 &&
                   flat_resized.pixels[i + 2] == 200;
    }
    CHECK(constant);

    const RgbImage same = testutil::random_image(256, 256, rng);
    CHECK(resize_to_training(same).pixels == same.pixels);  // identity resample
}

TEST_CASE("colour-content filter verdicts") {
    std::mt19937_64 rng(3);
    FilterPolicy policy;  // chroma 5.0, gray eps 0

    CHECK_FALSE(is_colorful(gray_noise(16, 16, rng), policy));
    CHECK(classify_color_content(gray_noise(16, 16, rng), policy) == FilterVerdict::Grayscale);

    // Saturated red: mean chroma ~104.5, far above any sane threshold.
    CHECK(is_colorful(solid(8, 8, 255, 0, 0), policy));

    const RgbImage faint = low_chroma_image(8, 8, 3.0);
    bool exactly_gray = true;
    for (std::size_t i = 0; i < faint.pixels.size(); i += 3) {
        if (faint.pixels[i] != faint.pixels[i + 1] || faint.pixels[i + 1] != faint.pixels[i + 2]) {
            exactly_gray = false;
        }
    }
    CHECK_FALSE(exactly_gray);  // construction sanity: low chroma, not gray
    CHECK(classify_color_content(faint, policy) == FilterVerdict::LowChroma);
    CHECK_FALSE(is_colorful(faint, policy));

    FilterPolicy lenient;
    lenient.chroma_threshold = 1.0;
    CHECK(is_colorful(faint, lenient));
}

TEST_CASE("single-class manifest: sorted, deterministic, indexed by directory") {
    testutil::ScratchDir dir("manifest");
    std::mt19937_64 rng(4);
    for (const char* cls : {"forest", "beach"}) {
        for (int i = 0; i < 2; ++i) {
            save_image(dir.path() / cls / ("img" + std::to_string(i) + ".png"),
                       testutil::random_image(8, 8, rng));
        }
    }
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    CHECK(m.entries.size() == 4);
    CHECK(m.num_classes == 2);
    CHECK(m.entries[0].path == "beach/img0.png");
    CHECK(m.entries[0].class_index == 0);
    CHECK(m.entries[3].path == "forest/img1.png");
    CHECK(m.entries[3].class_index == 1);

    const DatasetManifest again = build_manifest(dir.path(), LabelMode::SingleClass);
    CHECK(again.entries.size() == m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(again.entries[i].path == m.entries[i].path);
        CHECK(again.entries[i].class_index == m.entries[i].class_index);
    }

    testutil::ScratchDir empty("empty");
    CHECK_THROWS_AS(build_manifest(empty.path(), LabelMode::SingleClass), DataError);
    CHECK_THROWS_AS(build_manifest(dir.path() / "nope", LabelMode::SingleClass), DataError);
}

TEST_CASE("manifest text round trip is byte-stable") {
    testutil::ScratchDir dir("roundtrip");
    std::mt19937_64 rng(5);
    for (const char* cls : {"a", "b"}) {
        save_image(dir.path() / cls / "x.png", testutil::random_image(8, 8, rng));
    }
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    const auto p1 = dir.path() / "m1.tsv";
    const auto p2 = dir.path() / "m2.tsv";
    save_manifest(m, p1);
    const DatasetManifest loaded = load_manifest(p1, dir.path());
    CHECK(loaded.num_classes == m.num_classes);
    CHECK(loaded.label_mode == m.label_mode);
    CHECK(loaded.entries.size() == m.entries.size());
    save_manifest(loaded, p2);

    std::ifstream f1(p1), f2(p2);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
}

TEST_CASE("multi-attribute manifest from attributes.tsv") {
    testutil::ScratchDir dir("attrs");
    std::mt19937_64 rng(6);
    save_image(dir.path() / "one.png", testutil::random_image(8, 8, rng));
    save_image(dir.path() / "two.png", testutil::random_image(8, 8, rng));
    {
        std::ofstream os(dir.path() / "attributes.tsv");
        os << "two.png\t1,0,1\n";
        os << "one.png\t0,1,1\n";
    }
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::MultiAttribute);
    CHECK(m.num_classes == 3);
    CHECK(m.entries.size() == 2);
    CHECK(m.entries[0].path == "one.png");  // sorted
    CHECK(m.entries[0].attributes == std::vector<std::uint8_t>{0, 1, 1});

    {
        std::ofstream os(dir.path() / "attributes.tsv");
        os << "one.png\t0,1\n";
        os << "two.png\t0,1,1\n";  // inconsistent width
    }
    CHECK_THROWS_AS(build_manifest(dir.path(), LabelMode::MultiAttribute), DataError);
}

TEST_CASE("batch stream: counts, determinism, pipeline composition") {
    testutil::ScratchDir dir("batches");
    std::mt19937_64 rng(7);
    // 33 colourful images, one class; batch 16 -> 2 batches per epoch.
    for (int i = 0; i < 33; ++i) {
        RgbImage img(16, 16);
        for (int p = 0; p < 16 * 16; ++p) {
            img.pixels[3 * p] = static_cast<std::uint8_t>(150 + rng() % 100);
            img.pixels[3 * p + 1] = static_cast<std::uint8_t>(rng() % 80);
            img.pixels[3 * p + 2] = static_cast<std::uint8_t>(rng() % 80);
        }
        char name[32];
        std::snprintf(name, sizeof(name), "c/im%02d.png", i);
        save_image(dir.path() / name, img);
    }
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    FilterPolicy policy;

    BatchStream s1 = make_batches(m, policy, 16, 99);
    CHECK(s1.surviving() == 33);
    CHECK(s1.batches_per_epoch() == 2);
    int batches = 0;
    while (auto b = s1.next()) {
        CHECK(b->l_input.shape() == std::vector<int>{16, 1, 256, 256});
        CHECK(b->ab_target.shape() == std::vector<int>{16, 2, 256, 256});
        CHECK(b->labels.shape() == std::vector<int>{16, 1});
        bool in_range = true;
        for (std::size_t i = 0; i < b->l_input.numel(); ++i) {
            in_range = in_range && b->l_input[i] >= -1.0 && b->l_input[i] <= 1.0;
        }
        CHECK(in_range);
        ++batches;
    }
    CHECK(batches == 2);

    // Identical seed -> identical batch order, bit for bit.
    BatchStream s2 = make_batches(m, policy, 16, 99);
    s1.start_epoch(3);
    s2.start_epoch(3);
    auto b1 = s1.next();
    auto b2 = s2.next();
    REQUIRE(b1.has_value());
    REQUIRE(b2.has_value());
    bool identical = true;
    for (std::size_t i = 0; i < b1->l_input.numel(); ++i) {
        identical = identical && b1->l_input[i] == b2->l_input[i];
    }
    CHECK(identical);
    // Different seed -> different order (first batch content differs).
    BatchStream s3 = make_batches(m, policy, 16, 100);
    s3.start_epoch(3);
    auto b3 = s3.next();
    bool same = true;
    for (std::size_t i = 0; i < b1->l_input.numel() && same; ++i) {
        same = b1->l_input[i] == b3->l_input[i];
    }
    CHECK_FALSE(same);
}

TEST_CASE("batch targets equal the normalized chroma of the resized source") {
    testutil::ScratchDir dir("single");
    std::mt19937_64 rng(8);
    RgbImage img = testutil::random_image(32, 32, rng);
    // Force obvious chroma so the filter keeps it.
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) img.pixels[i] = 255;
    save_image(dir.path() / "c/only.png", img);

    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    BatchStream stream = make_batches(m, FilterPolicy{}, 1, 1);
    auto batch = stream.next();
    REQUIRE(batch.has_value());

    const RgbImage resized = resize_to_training(load_image(dir.path() / "c/only.png"));
    const auto norm = colorspace::normalize_lab(colorspace::rgb_to_lab(resized));
    bool targets_match = true;
    for (std::size_t i = 0; i < norm.ab_n.size(); ++i) {
        targets_match = targets_match && batch->ab_target[i] == norm.ab_n[i];
    }
    for (std::size_t i = 0; i < norm.L_n.size(); ++i) {
        targets_match = targets_match && batch->l_input[i] == norm.L_n[i];
    }
    CHECK(targets_match);

    // Reconstructing RGB from (L_n, ab_target) recovers the resized source
    // within resize + quantization tolerance.
    Plane lum(256, 256);
    for (std::size_t i = 0; i < lum.values.size(); ++i) {
        lum.values[i] = (batch->l_input[i] + 1.0) * 50.0;
    }
    Tensor ab({2, 256, 256});
    std::copy(batch->ab_target.data(), batch->ab_target.data() + ab.numel(), ab.data());
    const RgbImage rebuilt = colorspace::merge_luminance_chroma(lum, ab);
    int worst = 0;
    for (std::size_t i = 0; i < rebuilt.pixels.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<int>(rebuilt.pixels[i]) -
                                         static_cast<int>(resized.pixels[i])));
    }
    CHECK(worst <= 2);
}

TEST_CASE("streams reject empty survivor sets and bad batch sizes") {
    testutil::ScratchDir dir("allgray");
    std::mt19937_64 rng(9);
    save_image(dir.path() / "c/g1.png", gray_noise(16, 16, rng));
    save_image(dir.path() / "c/g2.png", gray_noise(16, 16, rng));
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    CHECK_THROWS_AS(make_batches(m, FilterPolicy{}, 1, 1), DataError);
    CHECK_THROWS_AS(make_batches(m, FilterPolicy{}, 0, 1), ConfigError);
}

TEST_CASE("one-hot and attribute label tensors") {
    testutil::ScratchDir dir("labels");
    std::mt19937_64 rng(10);
    save_image(dir.path() / "x/r.png", solid(16, 16, 255, 0, 0));
    save_image(dir.path() / "y/g.png", solid(16, 16, 0, 255, 0));
    const DatasetManifest m = build_manifest(dir.path(), LabelMode::SingleClass);
    BatchStream stream = make_batches(m, FilterPolicy{}, 2, 5);
    auto batch = stream.next();
    REQUIRE(batch.has_value());
    // Each row is one-hot over 2 classes.
    for (int n = 0; n < 2; ++n) {
        const double* row = batch->labels.data() + n * 2;
        CHECK(row[0] + row[1] == 1.0);
        CHECK((row[0] == 1.0 || row[1] == 1.0));
    }
}
