#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace cpwc {

/// Accumulator type for sum-of-products loops: at least double, and wide
/// enough never to narrow the element type.
template <typename T>
using acc_t = std::conditional_t<(sizeof(T) > sizeof(double)), T, double>;

/// Dense 4-d array in batch / channel / height / width order. This is the
/// only value currency passed between kernels; data is row-major NCHW.
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>, "Tensor requires float or double");

public:
    Tensor() = default;

    Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
        if (n < 1 || c < 1 || h < 1 || w < 1) {
            throw std::invalid_argument("Tensor: all shape components must be >= 1, got (" +
                                        std::to_string(n) + "," + std::to_string(c) + "," +
                                        std::to_string(h) + "," + std::to_string(w) + ")");
        }
        data_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
                         static_cast<std::size_t>(h) * static_cast<std::size_t>(w),
                     T(0));
    }

    static Tensor filled(int n, int c, int h, int w, T value) {
        Tensor t(n, c, h, w);
        for (auto& v : t.data_) {
            v = value;
        }
        return t;
    }

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w;
    }

    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Tensor& o) const {
        return same_shape(o) && data_ == o.data_;
    }

private:
    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<T> data_;
};

/// A bank of convolution filters where every filter carries an explicit,
/// ordered list of the input channels it reads. Overlapping channel lists
/// are allowed (one input channel may feed several filters); a standard
/// dense convolution is the special case where every filter lists all
/// channels. Weights are stored per filter as (slot, kh, kw) row-major,
/// one value per listed channel and kernel tap. No bias terms.
template <typename T>
struct ConvFilterBank {
    int kh = 1;
    int kw = 1;
    std::vector<std::vector<int>> channels;  // per filter: ordered input channel indices
    std::vector<std::vector<T>> weights;     // per filter: channels[f].size()*kh*kw values

    int filter_count() const { return static_cast<int>(channels.size()); }

    T& w(int filter, int slot, int i, int j) {
        return weights[filter][(static_cast<std::size_t>(slot) * kh + i) * kw + j];
    }
    const T& w(int filter, int slot, int i, int j) const {
        return weights[filter][(static_cast<std::size_t>(slot) * kh + i) * kw + j];
    }

    /// Dense bank: `out_ch` filters, each listing all `in_ch` channels, zero weights.
    static ConvFilterBank dense(int in_ch, int out_ch, int kh, int kw) {
        if (in_ch < 1 || out_ch < 1 || kh < 1 || kw < 1) {
            throw std::invalid_argument("ConvFilterBank::dense: all arguments must be >= 1");
        }
        ConvFilterBank bank;
        bank.kh = kh;
        bank.kw = kw;
        bank.channels.resize(out_ch);
        bank.weights.resize(out_ch);
        for (int f = 0; f < out_ch; ++f) {
            bank.channels[f].resize(in_ch);
            for (int c = 0; c < in_ch; ++c) {
                bank.channels[f][c] = c;
            }
            bank.weights[f].assign(static_cast<std::size_t>(in_ch) * kh * kw, T(0));
        }
        return bank;
    }

    void validate(int input_channels) const {
        if (kh < 1 || kw < 1) {
            throw std::invalid_argument("ConvFilterBank: kernel dims must be >= 1");
        }
        if (channels.size() != weights.size()) {
            throw std::invalid_argument("ConvFilterBank: channels/weights filter counts differ");
        }
        if (channels.empty()) {
            throw std::invalid_argument("ConvFilterBank: bank has no filters");
        }
        for (std::size_t f = 0; f < channels.size(); ++f) {
            for (int c : channels[f]) {
                if (c < 0 || c >= input_channels) {
                    throw std::invalid_argument("ConvFilterBank: filter " + std::to_string(f) +
                                                " lists channel " + std::to_string(c) +
                                                " outside input range [0," +
                                                std::to_string(input_channels) + ")");
                }
            }
            const std::size_t expect = channels[f].size() * static_cast<std::size_t>(kh) * kw;
            if (weights[f].size() != expect) {
                throw std::invalid_argument("ConvFilterBank: filter " + std::to_string(f) +
                                            " has " + std::to_string(weights[f].size()) +
                                            " weights, expected " + std::to_string(expect));
            }
        }
    }
};

/// Reference convolution: direct sum-of-products over each filter's listed
/// channels and kernel window, zero padding at the borders, no bias.
/// Output shape (N, filters, (H+2p-kh)/stride+1, (W+2p-kw)/stride+1).
/// This is the correctness oracle for every other convolution path in the
/// project; it stays naive on purpose.
template <typename T>
Tensor<T> conv2d_oracle(const Tensor<T>& x, const ConvFilterBank<T>& bank, int stride,
                        int padding) {
    if (stride < 1) {
        throw std::invalid_argument("conv2d_oracle: stride must be positive");
    }
    if (padding < 0) {
        throw std::invalid_argument("conv2d_oracle: padding must be non-negative");
    }
    bank.validate(x.c());

    const int oh = (x.h() + 2 * padding - bank.kh) / stride + 1;
    const int ow = (x.w() + 2 * padding - bank.kw) / stride + 1;
    if (x.h() + 2 * padding < bank.kh || x.w() + 2 * padding < bank.kw) {
        throw std::invalid_argument("conv2d_oracle: kernel larger than padded input");
    }

    Tensor<T> out(x.n(), bank.filter_count(), oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        for (int f = 0; f < bank.filter_count(); ++f) {
            const auto& chans = bank.channels[f];
            const auto& w = bank.weights[f];
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    acc_t<T> acc = 0;
                    for (std::size_t j = 0; j < chans.size(); ++j) {
                        const int c = chans[j];
                        for (int ki = 0; ki < bank.kh; ++ki) {
                            const int iy = oy * stride - padding + ki;
                            if (iy < 0 || iy >= x.h()) {
                                continue;
                            }
                            for (int kj = 0; kj < bank.kw; ++kj) {
                                const int ix = ox * stride - padding + kj;
                                if (ix < 0 || ix >= x.w()) {
                                    continue;
                                }
                                acc += static_cast<acc_t<T>>(w[(j * bank.kh + ki) * bank.kw + kj]) *
                                       static_cast<acc_t<T>>(x.at(n, c, iy, ix));
                            }
                        }
                    }
                    out.at(n, f, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> add_elementwise(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add_elementwise: shape mismatch");
    }
    Tensor<T> out = a;
    auto& d = out.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] += bd[i];
    }
    return out;
}

}  // namespace cpwc
