#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "cpwc/dataset.hpp"

using namespace cpwc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cpwc-test-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Deterministic pseudo-pixel pattern so expected values are reproducible.
unsigned char pixel_byte(int record, int index) {
    return static_cast<unsigned char>((record * 37 + index * 7 + 3) & 0xFF);
}

void write_cifar_file(const fs::path& path, CifarFlavor flavor, int records,
                      const std::vector<std::array<int, 2>>& labels) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    for (int r = 0; r < records; ++r) {
        if (flavor == CifarFlavor::Cifar100) {
            out.put(static_cast<char>(labels[r][0]));  // coarse
            out.put(static_cast<char>(labels[r][1]));  // fine
        } else {
            out.put(static_cast<char>(labels[r][1]));
        }
        for (int i = 0; i < 3072; ++i) {
            out.put(static_cast<char>(pixel_byte(r, i)));
        }
    }
}

void check_pixels(const Dataset& data, CifarFlavor flavor) {
    const CifarNormalization norm = cifar_normalization(flavor);
    for (int r = 0; r < data.images.n(); ++r) {
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < 32; ++i) {
                for (int j = 0; j < 32; ++j) {
                    const float raw =
                        static_cast<float>(pixel_byte(r, c * 1024 + i * 32 + j)) / 255.0f;
                    const float expect = (raw - norm.mean[c]) / norm.stddev[c];
                    REQUIRE(data.images.at(r, c, i, j) == doctest::Approx(expect).epsilon(1e-6));
                }
            }
        }
    }
}

}  // namespace

TEST_CASE("cifar100 two-record fixture parses exactly") {
    TempDir dir;
    write_cifar_file(dir.path / "train.bin", CifarFlavor::Cifar100, 2, {{5, 42}, {19, 99}});
    write_cifar_file(dir.path / "test.bin", CifarFlavor::Cifar100, 2, {{0, 0}, {3, 7}});

    auto [train_set, val_set] = load_cifar(dir.path.string(), CifarFlavor::Cifar100);
    CHECK(train_set.images.n() == 2);
    CHECK(train_set.num_classes == 100);
    CHECK(train_set.labels == std::vector<int>{42, 99});
    CHECK(val_set.labels == std::vector<int>{0, 7});
    CHECK(train_set.split == "train");
    CHECK(val_set.split == "val");
    check_pixels(train_set, CifarFlavor::Cifar100);
}

TEST_CASE("cifar10 two-record fixture parses exactly") {
    TempDir dir;
    write_cifar_file(dir.path / "data_batch_1.bin", CifarFlavor::Cifar10, 2, {{0, 3}, {0, 9}});
    write_cifar_file(dir.path / "test_batch.bin", CifarFlavor::Cifar10, 2, {{0, 1}, {0, 0}});

    auto [train_set, val_set] = load_cifar(dir.path.string(), CifarFlavor::Cifar10);
    CHECK(train_set.images.n() == 2);
    CHECK(train_set.num_classes == 10);
    CHECK(train_set.labels == std::vector<int>{3, 9});
    CHECK(val_set.labels == std::vector<int>{1, 0});
    check_pixels(train_set, CifarFlavor::Cifar10);
}

TEST_CASE("cifar10 concatenates every data batch present") {
    TempDir dir;
    write_cifar_file(dir.path / "data_batch_1.bin", CifarFlavor::Cifar10, 2, {{0, 1}, {0, 2}});
    write_cifar_file(dir.path / "data_batch_3.bin", CifarFlavor::Cifar10, 1, {{0, 5}});
    write_cifar_file(dir.path / "test_batch.bin", CifarFlavor::Cifar10, 1, {{0, 0}});

    auto [train_set, val_set] = load_cifar(dir.path.string(), CifarFlavor::Cifar10);
    CHECK(train_set.images.n() == 3);
    CHECK(train_set.labels == std::vector<int>{1, 2, 5});
    CHECK(val_set.images.n() == 1);
}

TEST_CASE("truncated cifar file reports the byte offset") {
    TempDir dir;
    write_cifar_file(dir.path / "train.bin", CifarFlavor::Cifar100, 2, {{1, 2}, {3, 4}});
    // Chop 100 bytes off the second record.
    fs::resize_file(dir.path / "train.bin", 2 * 3074 - 100);
    try {
        load_cifar_file((dir.path / "train.bin").string(), CifarFlavor::Cifar100, "train");
        FAIL("expected truncation error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("truncated") != std::string::npos);
        CHECK(msg.find("3074") != std::string::npos);  // offset of the incomplete record
    }
}

TEST_CASE("out-of-range label bytes are rejected") {
    TempDir dir;
    {
        std::ofstream out(dir.path / "bad.bin", std::ios::binary);
        out.put(static_cast<char>(2));    // coarse ok
        out.put(static_cast<char>(200));  // fine out of range
        for (int i = 0; i < 3072; ++i) {
            out.put(static_cast<char>(0));
        }
    }
    CHECK_THROWS_WITH_AS(
        load_cifar_file((dir.path / "bad.bin").string(), CifarFlavor::Cifar100, "train"),
        doctest::Contains("200"), std::runtime_error);
}

TEST_CASE("missing cifar files are reported") {
    TempDir dir;
    CHECK_THROWS_AS(load_cifar(dir.path.string(), CifarFlavor::Cifar100), std::runtime_error);
    CHECK_THROWS_AS(load_cifar(dir.path.string(), CifarFlavor::Cifar10), std::runtime_error);
}

TEST_CASE("synth dataset is bit-identical for the same seed") {
    Dataset a = synth_context_dataset(7, 64, 4);
    Dataset b = synth_context_dataset(7, 64, 4);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);

    Dataset c = synth_context_dataset(8, 64, 4);
    CHECK(!(a.images == c.images));
}

TEST_CASE("synth dataset label histogram is balanced") {
    const int n = 500;
    const int classes = 5;
    Dataset data = synth_context_dataset(3, n, classes);
    validate_dataset(data);
    std::map<int, int> histogram;
    for (int label : data.labels) {
        ++histogram[label];
    }
    CHECK(histogram.size() == classes);
    for (const auto& [label, count] : histogram) {
        CHECK(count >= n / classes - 1);
        CHECK(count <= n / classes + 1);
    }
}

TEST_CASE("validate_dataset rejects count and range violations") {
    Dataset a = synth_context_dataset(1, 8, 4);
    a.labels.pop_back();
    CHECK_THROWS_AS(validate_dataset(a), std::invalid_argument);

    Dataset b = synth_context_dataset(1, 8, 4);
    b.labels[0] = 7;
    CHECK_THROWS_AS(validate_dataset(b), std::invalid_argument);
}

TEST_CASE("synth dataset rejects bad arguments") {
    CHECK_THROWS_AS(synth_context_dataset(1, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_context_dataset(1, 10, 9), std::invalid_argument);
    CHECK_THROWS_AS(synth_context_dataset(1, 2, 4), std::invalid_argument);
    SynthConfig tiny;
    tiny.height = 10;
    tiny.width = 10;
    CHECK_THROWS_AS(synth_context_dataset(1, 10, 4, tiny), std::invalid_argument);
}

TEST_CASE("motif pixels stay clear of the margin") {
    SynthConfig cfg;
    Dataset data = synth_context_dataset(11, 200, 8, cfg);
    // Outside the margin band plus motif reach, pixels are pure noise; their
    // magnitude should never reach the motif amplitude minus noise tails.
    int strong_border_pixels = 0;
    for (int i = 0; i < data.images.n(); ++i) {
        for (int y = 0; y < cfg.height; ++y) {
            for (int x = 0; x < cfg.width; ++x) {
                const bool border = y < cfg.margin || y >= cfg.height - cfg.margin ||
                                    x < cfg.margin || x >= cfg.width - cfg.margin;
                if (border && std::fabs(data.images.at(i, 0, y, x)) > cfg.amplitude) {
                    ++strong_border_pixels;
                }
            }
        }
    }
    CHECK(strong_border_pixels == 0);
}

TEST_CASE("single-pixel linear probe stays near chance") {
    // The oracle establishing context dependence: a multinomial logistic
    // regression on pooled pointwise statistics (a 1x1 receptive field
    // model). Per construction every class shares the pixel-value
    // distribution, so this probe cannot beat chance by a real margin.
    const int classes = 4;
    Dataset train_set = synth_context_dataset(21, 1024, classes);
    Dataset val_set = synth_context_dataset(22, 512, classes);

    constexpr int kFeatures = 5;
    auto features = [](const Dataset& data, int i) {
        std::array<double, kFeatures> f{};
        const int hw = data.images.h() * data.images.w();
        for (int y = 0; y < data.images.h(); ++y) {
            for (int x = 0; x < data.images.w(); ++x) {
                const double v = data.images.at(i, 0, y, x);
                f[0] += v;
                f[1] += v * v;
                f[2] += v * v * v;
                f[3] += std::fabs(v);
                f[4] += v > 0 ? v : 0;
            }
        }
        for (double& v : f) {
            v /= hw;
        }
        return f;
    };

    // Full-batch softmax regression on the pooled features.
    std::vector<std::array<double, kFeatures>> train_x(train_set.images.n());
    for (int i = 0; i < train_set.images.n(); ++i) {
        train_x[i] = features(train_set, i);
    }
    std::array<double, kFeatures> mu{}, sigma{};
    for (const auto& f : train_x) {
        for (int k = 0; k < kFeatures; ++k) {
            mu[k] += f[k] / train_x.size();
        }
    }
    for (const auto& f : train_x) {
        for (int k = 0; k < kFeatures; ++k) {
            sigma[k] += (f[k] - mu[k]) * (f[k] - mu[k]) / train_x.size();
        }
    }
    for (int k = 0; k < kFeatures; ++k) {
        sigma[k] = std::sqrt(sigma[k]) + 1e-9;
    }
    auto normalize = [&](std::array<double, kFeatures> f) {
        for (int k = 0; k < kFeatures; ++k) {
            f[k] = (f[k] - mu[k]) / sigma[k];
        }
        return f;
    };
    for (auto& f : train_x) {
        f = normalize(f);
    }

    std::vector<std::array<double, kFeatures + 1>> weights(classes);  // + bias
    for (auto& w : weights) {
        w.fill(0.0);
    }
    auto logits_of = [&](const std::array<double, kFeatures>& f) {
        std::vector<double> logits(classes);
        for (int k = 0; k < classes; ++k) {
            double z = weights[k][kFeatures];
            for (int j = 0; j < kFeatures; ++j) {
                z += weights[k][j] * f[j];
            }
            logits[k] = z;
        }
        return logits;
    };

    const double lr = 0.5;
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<std::array<double, kFeatures + 1>> grad(classes);
        for (auto& g : grad) {
            g.fill(0.0);
        }
        for (std::size_t i = 0; i < train_x.size(); ++i) {
            auto logits = logits_of(train_x[i]);
            const double mx = *std::max_element(logits.begin(), logits.end());
            double denom = 0.0;
            for (double z : logits) {
                denom += std::exp(z - mx);
            }
            for (int k = 0; k < classes; ++k) {
                const double p = std::exp(logits[k] - mx) / denom;
                const double d = (p - (train_set.labels[i] == k ? 1.0 : 0.0)) / train_x.size();
                for (int j = 0; j < kFeatures; ++j) {
                    grad[k][j] += d * train_x[i][j];
                }
                grad[k][kFeatures] += d;
            }
        }
        for (int k = 0; k < classes; ++k) {
            for (int j = 0; j <= kFeatures; ++j) {
                weights[k][j] -= lr * grad[k][j];
            }
        }
    }

    int correct = 0;
    for (int i = 0; i < val_set.images.n(); ++i) {
        auto logits = logits_of(normalize(features(val_set, i)));
        const int argmax = static_cast<int>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (argmax == val_set.labels[i]) {
            ++correct;
        }
    }
    const double accuracy = static_cast<double>(correct) / val_set.images.n();
    const double chance = 1.0 / classes;
    CHECK(accuracy <= chance + 0.10);
}
