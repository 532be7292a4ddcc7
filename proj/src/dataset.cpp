#include "cpwc/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

namespace cpwc {

namespace {

namespace fs = std::filesystem;

std::vector<unsigned char> read_all_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cifar: missing file " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

Dataset concat(Dataset a, const Dataset& b) {
    const int n = a.images.n() + b.images.n();
    Tensor<float> images(n, a.images.c(), a.images.h(), a.images.w());
    std::copy(a.images.data().begin(), a.images.data().end(), images.data().begin());
    std::copy(b.images.data().begin(), b.images.data().end(),
              images.data().begin() + static_cast<std::ptrdiff_t>(a.images.size()));
    a.images = std::move(images);
    a.labels.insert(a.labels.end(), b.labels.begin(), b.labels.end());
    return a;
}

// The eight motif archetypes: dihedral stripe patterns sharing the value
// multiset {-1 x3, 0 x3, +1 x3}, so every class has identical per-pixel
// statistics.
using Motif = std::array<std::array<int, 3>, 3>;

const Motif kVertical = {{{1, 0, -1}, {1, 0, -1}, {1, 0, -1}}};
const Motif kHorizontal = {{{1, 1, 1}, {0, 0, 0}, {-1, -1, -1}}};
const Motif kDiagonal = {{{0, 1, 1}, {-1, 0, 1}, {-1, -1, 0}}};
const Motif kAntiDiagonal = {{{1, 1, 0}, {1, 0, -1}, {0, -1, -1}}};

struct ClassRecipe {
    Motif first;
    Motif second;
    bool directed;  // second placed at a fixed offset from first
    int dy = 0;
    int dx = 0;
};

// Classes 0..1 and 4..5 differ in which motif appears (solvable with a 3x3
// view); classes 2..3 and 6..7 share the same motif bag and differ only in
// the relative placement of the pair (requires a receptive field spanning
// the offset).
const ClassRecipe kRecipes[8] = {
    {kVertical, kVertical, false},
    {kHorizontal, kHorizontal, false},
    {kVertical, kHorizontal, true, 1, 1},    // down-right diagonal, scaled by offset
    {kVertical, kHorizontal, true, -1, 1},   // up-right anti-diagonal
    {kDiagonal, kDiagonal, false},
    {kAntiDiagonal, kAntiDiagonal, false},
    {kVertical, kHorizontal, true, 0, 1},    // to the right
    {kVertical, kHorizontal, true, 1, 0},    // below
};

void stamp(Tensor<float>& images, int n, int top, int left, const Motif& motif, float amplitude) {
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            images.at(n, 0, top + i, left + j) += amplitude * static_cast<float>(motif[i][j]);
        }
    }
}

}  // namespace

void validate_dataset(const Dataset& data) {
    if (static_cast<int>(data.labels.size()) != data.images.n()) {
        throw std::invalid_argument("dataset: image count " + std::to_string(data.images.n()) +
                                    " does not match label count " +
                                    std::to_string(data.labels.size()));
    }
    if (data.num_classes < 1) {
        throw std::invalid_argument("dataset: class count must be positive");
    }
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        if (data.labels[i] < 0 || data.labels[i] >= data.num_classes) {
            throw std::invalid_argument("dataset: label " + std::to_string(data.labels[i]) +
                                        " at index " + std::to_string(i) + " outside [0," +
                                        std::to_string(data.num_classes) + ")");
        }
    }
}

CifarNormalization cifar_normalization(CifarFlavor flavor) {
    if (flavor == CifarFlavor::Cifar100) {
        return {{0.5071f, 0.4865f, 0.4409f}, {0.2673f, 0.2564f, 0.2762f}};
    }
    return {{0.4914f, 0.4822f, 0.4465f}, {0.2470f, 0.2435f, 0.2616f}};
}

Dataset load_cifar_file(const std::string& path, CifarFlavor flavor, const std::string& split) {
    const std::vector<unsigned char> bytes = read_all_bytes(path);
    const int record = cifar_record_size(flavor);
    if (bytes.empty() || bytes.size() % record != 0) {
        const std::size_t valid = (bytes.size() / record) * record;
        throw std::runtime_error("cifar: " + path + " is truncated: " +
                                 std::to_string(bytes.size()) + " bytes, record " +
                                 std::to_string(bytes.size() / record) + " incomplete at byte offset " +
                                 std::to_string(valid));
    }
    const int n = static_cast<int>(bytes.size()) / record;
    const int label_bytes = flavor == CifarFlavor::Cifar100 ? 2 : 1;
    const int num_classes = flavor == CifarFlavor::Cifar100 ? 100 : 10;
    const CifarNormalization norm = cifar_normalization(flavor);

    Dataset data;
    data.images = Tensor<float>(n, 3, 32, 32);
    data.labels.resize(n);
    data.num_classes = num_classes;
    data.split = split;

    for (int r = 0; r < n; ++r) {
        const unsigned char* rec = bytes.data() + static_cast<std::size_t>(r) * record;
        if (flavor == CifarFlavor::Cifar100) {
            const int coarse = rec[0];
            const int fine = rec[1];
            if (coarse >= 20) {
                throw std::runtime_error("cifar: " + path + " record " + std::to_string(r) +
                                         " has coarse label " + std::to_string(coarse) +
                                         " outside [0,20)");
            }
            if (fine >= 100) {
                throw std::runtime_error("cifar: " + path + " record " + std::to_string(r) +
                                         " has fine label " + std::to_string(fine) +
                                         " outside [0,100)");
            }
            data.labels[r] = fine;
        } else {
            const int label = rec[0];
            if (label >= 10) {
                throw std::runtime_error("cifar: " + path + " record " + std::to_string(r) +
                                         " has label " + std::to_string(label) +
                                         " outside [0,10)");
            }
            data.labels[r] = label;
        }
        // channel-planar: 1024 red bytes, then green, then blue, row-major
        const unsigned char* px = rec + label_bytes;
        for (int c = 0; c < 3; ++c) {
            for (int i = 0; i < 32; ++i) {
                for (int j = 0; j < 32; ++j) {
                    const float raw = static_cast<float>(px[c * 1024 + i * 32 + j]) / 255.0f;
                    data.images.at(r, c, i, j) = (raw - norm.mean[c]) / norm.stddev[c];
                }
            }
        }
    }
    return data;
}

std::pair<Dataset, Dataset> load_cifar(const std::string& dir, CifarFlavor flavor) {
    if (flavor == CifarFlavor::Cifar100) {
        Dataset train = load_cifar_file((fs::path(dir) / "train.bin").string(), flavor, "train");
        Dataset val = load_cifar_file((fs::path(dir) / "test.bin").string(), flavor, "val");
        return {std::move(train), std::move(val)};
    }

    Dataset train;
    bool have_train = false;
    for (int b = 1; b <= 5; ++b) {
        const fs::path path = fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin");
        if (!fs::exists(path)) {
            continue;
        }
        Dataset batch = load_cifar_file(path.string(), flavor, "train");
        train = have_train ? concat(std::move(train), batch) : std::move(batch);
        have_train = true;
    }
    if (!have_train) {
        throw std::runtime_error("cifar: no data_batch_*.bin files found in " + dir);
    }
    Dataset val = load_cifar_file((fs::path(dir) / "test_batch.bin").string(), flavor, "val");
    return {std::move(train), std::move(val)};
}

Dataset synth_context_dataset(std::uint64_t seed, int n, int classes, const SynthConfig& cfg) {
    if (classes < 2 || classes > 8) {
        throw std::invalid_argument("synth_context_dataset: classes must be in [2,8]");
    }
    if (n < classes) {
        throw std::invalid_argument("synth_context_dataset: need at least one image per class");
    }
    const int m = cfg.margin;
    const int lo = m;                    // smallest valid motif top-left
    const int hi_r = cfg.height - 3 - m;  // largest valid motif top-left, rows
    const int hi_c = cfg.width - 3 - m;
    if (hi_r - lo < cfg.pair_offset || hi_c - lo < cfg.pair_offset) {
        throw std::invalid_argument(
            "synth_context_dataset: image too small for the pair offset and margin");
    }

    Dataset data;
    data.images = Tensor<float>(n, 1, cfg.height, cfg.width);
    data.labels.resize(n);
    data.num_classes = classes;
    data.split = "train";

    std::mt19937_64 rng(seed);

    // Round-robin labels, shuffled: balanced to within one image per class.
    for (int i = 0; i < n; ++i) {
        data.labels[i] = i % classes;
    }
    std::shuffle(data.labels.begin(), data.labels.end(), rng);

    std::normal_distribution<double> noise(0.0, cfg.noise);
    std::uniform_int_distribution<int> row(lo, hi_r);
    std::uniform_int_distribution<int> col(lo, hi_c);

    for (int i = 0; i < n; ++i) {
        for (int y = 0; y < cfg.height; ++y) {
            for (int x = 0; x < cfg.width; ++x) {
                data.images.at(i, 0, y, x) = static_cast<float>(noise(rng));
            }
        }
        const ClassRecipe& recipe = kRecipes[data.labels[i]];
        if (recipe.directed) {
            const int dy = recipe.dy * cfg.pair_offset;
            const int dx = recipe.dx * cfg.pair_offset;
            std::uniform_int_distribution<int> prow(std::max(lo, lo - dy),
                                                    std::min(hi_r, hi_r - dy));
            std::uniform_int_distribution<int> pcol(std::max(lo, lo - dx),
                                                    std::min(hi_c, hi_c - dx));
            const int top = prow(rng);
            const int left = pcol(rng);
            stamp(data.images, i, top, left, recipe.first, cfg.amplitude);
            stamp(data.images, i, top + dy, left + dx, recipe.second, cfg.amplitude);
        } else {
            // Free pair: any placement whose top-left corners are at least
            // min_gap apart in Chebyshev distance, so no small window ever
            // sees both motifs. Both points are resampled together; a lone
            // midfield first point may have no valid partner at all.
            int t1 = 0, l1 = 0, t2 = 0, l2 = 0;
            int attempts = 0;
            do {
                if (++attempts > 1000) {
                    throw std::invalid_argument(
                        "synth_context_dataset: min_gap infeasible for the image size");
                }
                t1 = row(rng);
                l1 = col(rng);
                t2 = row(rng);
                l2 = col(rng);
            } while (std::max(std::abs(t2 - t1), std::abs(l2 - l1)) < cfg.min_gap);
            stamp(data.images, i, t1, l1, recipe.first, cfg.amplitude);
            stamp(data.images, i, t2, l2, recipe.second, cfg.amplitude);
        }
    }
    return data;
}

}  // namespace cpwc
