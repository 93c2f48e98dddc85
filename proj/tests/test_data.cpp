#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pacfno/data.hpp"
#include "pacfno/metrics.hpp"
#include "pacfno/nn.hpp"
#include "pacfno/rng.hpp"

using namespace pacfno;
namespace fs = std::filesystem;

namespace {

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) return false;
    for (int64_t i = 0; i < a.size(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "pacfno_data_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("gen_shapes determinism and class balance") {
    LabeledImageSet a = gen_shapes(7, 40, 8, 32);
    LabeledImageSet b = gen_shapes(7, 40, 8, 32);
    REQUIRE(a.size() == 40);
    for (size_t i = 0; i < a.size(); ++i) CHECK(bit_equal(a.images[i], b.images[i]));

    LabeledImageSet c = gen_shapes(7, 80, 8, 32);
    std::vector<int> counts(8, 0);
    for (int label : c.labels) counts[label]++;
    for (int k = 0; k < 8; ++k) CHECK(counts[k] == 10);

    for (const Tensor& img : a.images)
        for (int64_t i = 0; i < img.size(); ++i) {
            CHECK(img.data()[i] >= 0.0);
            CHECK(img.data()[i] <= 1.0);
        }
    CHECK_THROWS_AS(gen_shapes(0, 10, 9, 32), ConfigError);
    CHECK_THROWS_AS(gen_shapes(0, 10, 4, 8), ConfigError);
}

TEST_CASE("a linear probe on raw pixels beats chance") {
    // Multinomial logistic regression trained on raw pixels; the classes must
    // be separable enough for the rest of the harness to be meaningful.
    const int k = 8, res = 16;
    LabeledImageSet train = gen_shapes(11, 320, k, res);
    LabeledImageSet test = gen_shapes(12, 160, k, res);
    Tensor w = Tensor::zeros({k, 3 * res * res}).set_requires_grad(true);
    Tensor b = Tensor::zeros({k}).set_requires_grad(true);
    std::vector<Tensor> params = {w, b};
    OptimState opt = OptimState::create(params, 0.05);
    std::vector<int> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    for (int epoch = 0; epoch < 40; ++epoch) {
        std::vector<int> labels;
        Tensor xb = stack_batch(train, idx, &labels);
        Tensor flat = reshape(xb, {static_cast<int>(train.size()), 3 * res * res});
        for (Tensor& p : params) p.zero_grad();
        Tape tape;
        {
            TapeScope scope(tape);
            backward(cross_entropy(linear(flat, w, b), labels));
        }
        adam_step(params, opt);
    }
    std::vector<int> tidx(test.size());
    for (size_t i = 0; i < tidx.size(); ++i) tidx[i] = static_cast<int>(i);
    std::vector<int> tlabels;
    Tensor xt = stack_batch(test, tidx, &tlabels);
    Tensor logits = linear(reshape(xt, {static_cast<int>(test.size()), 3 * res * res}), w, b);
    double acc = top1(logits, tlabels);
    CHECK(acc > 1.5 / k);  // comfortably above chance (1/8)
}

TEST_CASE("load_idx round trip with a synthetic fixture") {
    fs::path dir = temp_dir();
    fs::path img_path = dir / "fixture-images.idx";
    fs::path lab_path = dir / "fixture-labels.idx";
    {
        std::ofstream img(img_path, std::ios::binary);
        auto be32 = [&](uint32_t v) {
            unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
            img.write(reinterpret_cast<char*>(b), 4);
        };
        be32(0x00000803u);
        be32(4);
        be32(28);
        be32(28);
        for (int i = 0; i < 4 * 28 * 28; ++i) img.put(static_cast<char>(i % 256));
    }
    {
        std::ofstream lab(lab_path, std::ios::binary);
        unsigned char hdr[8] = {0, 0, 8, 1, 0, 0, 0, 4};
        lab.write(reinterpret_cast<char*>(hdr), 8);
        for (unsigned char l : {1, 0, 3, 2}) lab.put(static_cast<char>(l));
    }
    LabeledImageSet set = load_idx(img_path.string(), lab_path.string());
    REQUIRE(set.size() == 4);
    CHECK(set.images[0].shape() == Shape{3, 28, 28});
    CHECK(set.labels == std::vector<int>{1, 0, 3, 2});
    // Pixel 255 maps to exactly 1.0, replicated across channels.
    CHECK(set.images[0].data()[255] == 1.0);
    CHECK(set.images[0].data()[28 * 28 + 255] == 1.0);

    // Bad magic.
    fs::path bad = dir / "bad-magic.idx";
    {
        std::ofstream f(bad, std::ios::binary);
        for (int i = 0; i < 16; ++i) f.put(0);
    }
    CHECK_THROWS_WITH_AS(load_idx(bad.string(), lab_path.string()),
                         doctest::Contains("bad image magic"), DataError);

    // Truncated payload.
    fs::path trunc = dir / "trunc.idx";
    {
        std::ofstream f(trunc, std::ios::binary);
        unsigned char hdr[16] = {0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 28, 0, 0, 0, 28};
        f.write(reinterpret_cast<char*>(hdr), 16);
        f.put(1);
    }
    CHECK_THROWS_WITH_AS(load_idx(trunc.string(), lab_path.string()),
                         doctest::Contains("truncated"), DataError);

    // Count mismatch.
    fs::path lab2 = dir / "count-mismatch.idx";
    {
        std::ofstream f(lab2, std::ios::binary);
        unsigned char hdr[8] = {0, 0, 8, 1, 0, 0, 0, 3};
        f.write(reinterpret_cast<char*>(hdr), 8);
        for (int i = 0; i < 3; ++i) f.put(0);
    }
    CHECK_THROWS_WITH_AS(load_idx(img_path.string(), lab2.string()),
                         doctest::Contains("count mismatch"), DataError);
}

TEST_CASE("make_multires basics") {
    LabeledImageSet src = gen_shapes(3, 16, 4, 32);
    src.split = "train";
    MultiResDataset single = make_multires(src, {32});
    REQUIRE(single.by_resolution.size() == 1);
    for (size_t i = 0; i < src.size(); ++i)
        CHECK(bit_equal(single.by_resolution.at(32).images[i], src.images[i]));

    MultiResDataset multi = make_multires(src, {8, 16, 32});
    CHECK(multi.target_resolution == 32);
    CHECK(multi.by_resolution.at(8).images[0].shape() == Shape{3, 8, 8});
    CHECK(multi.by_resolution.at(8).labels == src.labels);
    CHECK_THROWS_AS(make_multires(src, {64}), ConfigError);

    // Constant image downscales to the same constant.
    LabeledImageSet flat;
    flat.images.push_back(Tensor::full({3, 32, 32}, 0.25));
    flat.labels.push_back(0);
    flat.class_count = 1;
    flat.resolution = 32;
    MultiResDataset fm = make_multires(flat, {8});
    for (int64_t i = 0; i < fm.by_resolution.at(8).images[0].size(); ++i)
        CHECK(fm.by_resolution.at(8).images[0].data()[i] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("bilinear downscale preserves the mean of a half-black/half-white image") {
    Tensor img = Tensor::zeros({3, 32, 32});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 16; x < 32; ++x)
                img.data()[(static_cast<int64_t>(c) * 32 + y) * 32 + x] = 1.0;
    LabeledImageSet set;
    set.images.push_back(img);
    set.labels.push_back(0);
    set.class_count = 1;
    set.resolution = 32;
    MultiResDataset ds = make_multires(set, {8});
    const Tensor& low = ds.by_resolution.at(8).images[0];
    double mean = 0.0;
    for (int64_t i = 0; i < low.size(); ++i) mean += low.data()[i];
    mean /= static_cast<double>(low.size());
    CHECK(std::abs(mean - 0.5) <= 1.0 / 255.0);
}

TEST_CASE("corrupt: identity limits at severity 0") {
    Rng rng(5);
    Tensor x = Tensor::zeros({3, 16, 16});
    for (int64_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    for (auto kind : {CorruptionKind::kGaussianNoise, CorruptionKind::kBrightness,
                      CorruptionKind::kContrast, CorruptionKind::kPixelate, CorruptionKind::kFog})
        CHECK(bit_equal(corrupt(x, kind, 0, 9), x));
    CHECK_THROWS_AS(corrupt(x, CorruptionKind::kFog, 6, 9), ConfigError);
    CHECK_THROWS_AS(corruption_from_name("sandstorm"), ConfigError);
}

TEST_CASE("brightness severity 5 clamps an all-0.7 image at 1.0") {
    Tensor x = Tensor::full({3, 8, 8}, 0.7);
    Tensor y = corrupt(x, CorruptionKind::kBrightness, 5, 0);
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 1.0);
}

TEST_CASE("fog adds seeded spatial structure and pulls toward the plasma mean") {
    Tensor x = Tensor::full({3, 32, 32}, 0.2);
    Tensor y = corrupt(x, CorruptionKind::kFog, 3, 1234);
    double mean = 0.0, var = 0.0;
    for (int64_t i = 0; i < y.size(); ++i) mean += y.data()[i];
    mean /= static_cast<double>(y.size());
    for (int64_t i = 0; i < y.size(); ++i) {
        double d = y.data()[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(y.size());
    CHECK(var > 1e-4);      // plasma structure present
    CHECK(mean > 0.2 + 0.02);  // pulled toward the plasma mean (~0.5 mix)
    CHECK(bit_equal(corrupt(x, CorruptionKind::kFog, 3, 1234),
                    corrupt(x, CorruptionKind::kFog, 3, 1234)));
}

TEST_CASE("expected distortion is non-decreasing in severity for noise and fog") {
    LabeledImageSet probe = gen_shapes(21, 4, 4, 32);
    for (auto kind : {CorruptionKind::kGaussianNoise, CorruptionKind::kFog}) {
        double prev = 0.0;
        for (int severity = 1; severity <= 5; ++severity) {
            double acc = 0.0;
            int count = 0;
            for (uint64_t s = 0; s < 100; ++s)
                for (const Tensor& img : probe.images) {
                    Tensor y = corrupt(img, kind, severity, s);
                    double l2 = 0.0;
                    for (int64_t i = 0; i < y.size(); ++i) {
                        double d = y.data()[i] - img.data()[i];
                        l2 += d * d;
                    }
                    acc += l2 / static_cast<double>(y.size());
                    ++count;
                }
            double mean = acc / count;
            CHECK(mean >= prev);
            prev = mean;
        }
    }
}

TEST_CASE("ppm round trip and header handling") {
    Rng rng(6);
    Tensor x = Tensor::zeros({3, 9, 7});
    for (int64_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    fs::path dir = temp_dir();
    fs::path file = dir / "roundtrip.ppm";
    write_ppm(x, file.string());
    Tensor y = read_ppm(file.string());
    REQUIRE(y.shape() == x.shape());
    for (int64_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.data()[i] - x.data()[i]) <= 1.0 / 255.0);

    fs::path hdr = dir / "header.ppm";
    {
        std::ofstream f(hdr, std::ios::binary);
        f << "P6\n4 4\n255\n";
        for (int i = 0; i < 48; ++i) f.put(static_cast<char>(i));
    }
    Tensor t = read_ppm(hdr.string());
    CHECK(t.shape() == Shape{3, 4, 4});

    fs::path trunc = dir / "trunc.ppm";
    {
        std::ofstream f(trunc, std::ios::binary);
        f << "P6\n4 4\n255\n";
        for (int i = 0; i < 10; ++i) f.put(1);
    }
    CHECK_THROWS_WITH_AS(read_ppm(trunc.string()), doctest::Contains("truncated"), DataError);

    fs::path badmagic = dir / "bad.ppm";
    {
        std::ofstream f(badmagic, std::ios::binary);
        f << "P5\n4 4\n255\n";
    }
    CHECK_THROWS_AS(read_ppm(badmagic.string()), DataError);
}

TEST_CASE("dataset directory layout round trip") {
    LabeledImageSet set = gen_shapes(9, 12, 4, 32);
    set.split = "val";
    fs::path root = temp_dir() / "layout";
    fs::remove_all(root);
    save_set_ppm(set, root.string());
    CHECK(fs::exists(root / "val" / "32" / "0_0.ppm"));
    LabeledImageSet loaded = load_set_ppm(root.string(), "val", 32);
    REQUIRE(loaded.size() == set.size());
    CHECK(loaded.labels == set.labels);
    for (size_t i = 0; i < set.size(); ++i)
        for (int64_t j = 0; j < set.images[i].size(); ++j)
            CHECK(std::abs(loaded.images[i].data()[j] - set.images[i].data()[j]) <= 1.0 / 255.0);
    CHECK_THROWS_AS(load_set_ppm(root.string(), "test", 32), DataError);
}

TEST_CASE("multires stays index-aligned under label permutation") {
    LabeledImageSet src = gen_shapes(13, 24, 4, 32);
    // Permute the set; alignment between images and labels must survive the
    // pyramid construction.
    LabeledImageSet shuffled = src;
    Rng rng(77);
    std::vector<int> perm(src.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    for (size_t i = 0; i < perm.size(); ++i) {
        shuffled.images[i] = src.images[perm[i]];
        shuffled.labels[i] = src.labels[perm[i]];
    }
    MultiResDataset ds = make_multires(shuffled, {16, 32});
    for (size_t i = 0; i < perm.size(); ++i) {
        CHECK(ds.by_resolution.at(16).labels[i] == shuffled.labels[i]);
        CHECK(bit_equal(ds.by_resolution.at(32).images[i], shuffled.images[i]));
    }
}
