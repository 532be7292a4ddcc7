#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpwc/tensor.hpp"

namespace cpwc {

struct Dataset {
    Tensor<float> images;  // (N, C, H, W), normalized
    std::vector<int> labels;
    int num_classes = 0;
    std::string split;  // "train" or "val"
};

/// Throws std::invalid_argument on label-range or count violations.
void validate_dataset(const Dataset& data);

enum class CifarFlavor { Cifar10, Cifar100 };

/// Per-channel mean/std applied after scaling pixels to [0,1]. These are the
/// widely used statistics of the respective training sets.
struct CifarNormalization {
    std::array<float, 3> mean;
    std::array<float, 3> stddev;
};
CifarNormalization cifar_normalization(CifarFlavor flavor);

constexpr int cifar_record_size(CifarFlavor flavor) {
    return flavor == CifarFlavor::Cifar100 ? 3074 : 3073;  // label byte(s) + 3*32*32 pixels
}

/// Parse one binary batch file. CIFAR-100 records are 1 coarse-label byte,
/// 1 fine-label byte and 3072 channel-planar pixel bytes; CIFAR-10 records
/// drop the coarse byte. Truncated files and out-of-range label bytes are
/// rejected with the offending byte offset / record index in the message.
Dataset load_cifar_file(const std::string& path, CifarFlavor flavor, const std::string& split);

/// Load the standard train/test binaries from a directory:
/// CIFAR-100 expects train.bin and test.bin; CIFAR-10 expects test_batch.bin
/// plus at least one of data_batch_1.bin .. data_batch_5.bin.
std::pair<Dataset, Dataset> load_cifar(const std::string& dir, CifarFlavor flavor);

/// Geometry of the synthetic context task. Class identity is carried only by
/// 3x3 texture motifs and, for the pair classes, by the relative placement of
/// two motifs too far apart to fall inside one small receptive field. Every
/// class shares the same per-pixel value distribution, so models that never
/// look beyond a single pixel are stuck at chance.
struct SynthConfig {
    int height = 20;
    int width = 20;
    int pair_offset = 5;  // top-left offset between paired motifs
    int min_gap = 5;      // minimum top-left Chebyshev distance for free pairs
    int margin = 4;       // keep motif pixels clear of the zero-padding border
    float noise = 0.3f;
    float amplitude = 2.0f;
};

/// Deterministic generator: identical seeds produce bit-identical datasets.
/// classes must be in [2, 8]; labels are assigned round-robin then shuffled,
/// so the histogram is balanced to within one image per class.
Dataset synth_context_dataset(std::uint64_t seed, int n, int classes,
                              const SynthConfig& cfg = {});

}  // namespace cpwc
