#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpwc/cpwc.hpp"
#include "cpwc/tensor.hpp"

namespace cpwc {

/// A (value, gradient) pair the optimizer steps over.
template <typename T>
struct ParamRef {
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
};

namespace layers {

/// One contextual pointwise block as a trainable layer. The plain input
/// convolution of the toy model is the PwcOnly special case.
template <typename T>
class CpwcNode {
public:
    CpwcNode() = default;
    CpwcNode(int in_channels, int out_channels, CpwcVariant variant, int stride,
             std::uint64_t seed)
        : params_(init_params<T>(plan_groups(in_channels, out_channels), variant, stride, seed)) {
        grad_pwc_.assign(params_.pwc.size(), T(0));
        grad_stage1_.resize(params_.stage1.size());
        for (std::size_t i = 0; i < params_.stage1.size(); ++i) {
            grad_stage1_[i].assign(params_.stage1[i].size(), T(0));
        }
        grad_stage2_.assign(params_.stage2.size(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        x_cache_ = x;
        return cpwc_forward(x, params_);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        CpwcGrads<T> g = cpwc_backward(x_cache_, params_, grad_out);
        for (std::size_t i = 0; i < grad_pwc_.size(); ++i) {
            grad_pwc_[i] += g.pwc[i];
        }
        for (std::size_t z = 0; z < grad_stage1_.size(); ++z) {
            for (std::size_t i = 0; i < grad_stage1_[z].size(); ++i) {
                grad_stage1_[z][i] += g.stage1[z][i];
            }
        }
        for (std::size_t i = 0; i < grad_stage2_.size(); ++i) {
            grad_stage2_[i] += g.stage2[i];
        }
        return std::move(g.input);
    }

    void zero_grad() {
        std::fill(grad_pwc_.begin(), grad_pwc_.end(), T(0));
        for (auto& g : grad_stage1_) {
            std::fill(g.begin(), g.end(), T(0));
        }
        std::fill(grad_stage2_.begin(), grad_stage2_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        if (!params_.pwc.empty()) {
            out.push_back({&params_.pwc, &grad_pwc_});
        }
        for (std::size_t z = 0; z < params_.stage1.size(); ++z) {
            out.push_back({&params_.stage1[z], &grad_stage1_[z]});
        }
        if (!params_.stage2.empty()) {
            out.push_back({&params_.stage2, &grad_stage2_});
        }
    }

    const CpwcParams<T>& params() const { return params_; }
    long long param_count() const { return params_.weight_count(); }

private:
    CpwcParams<T> params_;
    std::vector<T> grad_pwc_;
    std::vector<std::vector<T>> grad_stage1_;
    std::vector<T> grad_stage2_;
    Tensor<T> x_cache_;
};

/// Per-channel batch normalization with affine parameters. Training mode
/// normalizes by batch statistics and updates running estimates; eval mode
/// uses the running estimates. Backward covers the training path.
template <typename T>
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int channels)
        : channels_(channels),
          gamma_(channels, T(1)),
          beta_(channels, T(0)),
          grad_gamma_(channels, T(0)),
          grad_beta_(channels, T(0)),
          running_mean_(channels, T(0)),
          running_var_(channels, T(1)) {}

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        const int C = x.c();
        if (C != channels_) {
            throw std::invalid_argument("BatchNorm: channel mismatch");
        }
        const double m = static_cast<double>(x.n()) * x.h() * x.w();
        Tensor<T> out(x.n(), C, x.h(), x.w());

        if (training) {
            mean_.assign(C, 0.0);
            invstd_.assign(C, 0.0);
            for (int n = 0; n < x.n(); ++n) {
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int i = 0; i < x.h(); ++i) {
                        for (int j = 0; j < x.w(); ++j) {
                            acc += x.at(n, c, i, j);
                        }
                    }
                    mean_[c] += acc;
                }
            }
            for (int c = 0; c < C; ++c) {
                mean_[c] /= m;
            }
            std::vector<double> var(C, 0.0);
            for (int n = 0; n < x.n(); ++n) {
                for (int c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (int i = 0; i < x.h(); ++i) {
                        for (int j = 0; j < x.w(); ++j) {
                            const double d = x.at(n, c, i, j) - mean_[c];
                            acc += d * d;
                        }
                    }
                    var[c] += acc;
                }
            }
            for (int c = 0; c < C; ++c) {
                var[c] /= m;
                invstd_[c] = 1.0 / std::sqrt(var[c] + kEps);
                running_mean_[c] =
                    static_cast<T>((1.0 - kMomentum) * running_mean_[c] + kMomentum * mean_[c]);
                running_var_[c] =
                    static_cast<T>((1.0 - kMomentum) * running_var_[c] + kMomentum * var[c]);
            }
            xhat_ = Tensor<T>(x.n(), C, x.h(), x.w());
            for (int n = 0; n < x.n(); ++n) {
                for (int c = 0; c < C; ++c) {
                    for (int i = 0; i < x.h(); ++i) {
                        for (int j = 0; j < x.w(); ++j) {
                            const double xn = (x.at(n, c, i, j) - mean_[c]) * invstd_[c];
                            xhat_.at(n, c, i, j) = static_cast<T>(xn);
                            out.at(n, c, i, j) = static_cast<T>(xn * gamma_[c] + beta_[c]);
                        }
                    }
                }
            }
            trained_forward_ = true;
        } else {
            for (int c = 0; c < C; ++c) {
                const double invstd = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + kEps);
                for (int n = 0; n < x.n(); ++n) {
                    for (int i = 0; i < x.h(); ++i) {
                        for (int j = 0; j < x.w(); ++j) {
                            const double xn = (x.at(n, c, i, j) - running_mean_[c]) * invstd;
                            out.at(n, c, i, j) = static_cast<T>(xn * gamma_[c] + beta_[c]);
                        }
                    }
                }
            }
            trained_forward_ = false;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!trained_forward_) {
            throw std::logic_error("BatchNorm::backward requires a preceding training forward");
        }
        const int C = channels_;
        const double m = static_cast<double>(grad_out.n()) * grad_out.h() * grad_out.w();
        std::vector<double> sum_dy(C, 0.0);
        std::vector<double> sum_dy_xhat(C, 0.0);
        for (int n = 0; n < grad_out.n(); ++n) {
            for (int c = 0; c < C; ++c) {
                for (int i = 0; i < grad_out.h(); ++i) {
                    for (int j = 0; j < grad_out.w(); ++j) {
                        const double dy = grad_out.at(n, c, i, j);
                        sum_dy[c] += dy;
                        sum_dy_xhat[c] += dy * xhat_.at(n, c, i, j);
                    }
                }
            }
        }
        Tensor<T> dx(grad_out.n(), C, grad_out.h(), grad_out.w());
        for (int n = 0; n < grad_out.n(); ++n) {
            for (int c = 0; c < C; ++c) {
                const double g = gamma_[c];
                const double invstd = invstd_[c];
                for (int i = 0; i < grad_out.h(); ++i) {
                    for (int j = 0; j < grad_out.w(); ++j) {
                        const double dy = grad_out.at(n, c, i, j);
                        const double xh = xhat_.at(n, c, i, j);
                        dx.at(n, c, i, j) = static_cast<T>(
                            g * invstd * (dy - sum_dy[c] / m - xh * sum_dy_xhat[c] / m));
                    }
                }
            }
        }
        for (int c = 0; c < C; ++c) {
            grad_gamma_[c] += static_cast<T>(sum_dy_xhat[c]);
            grad_beta_[c] += static_cast<T>(sum_dy[c]);
        }
        return dx;
    }

    void zero_grad() {
        std::fill(grad_gamma_.begin(), grad_gamma_.end(), T(0));
        std::fill(grad_beta_.begin(), grad_beta_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&gamma_, &grad_gamma_});
        out.push_back({&beta_, &grad_beta_});
    }

    long long param_count() const { return 2LL * channels_; }

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

private:
    int channels_ = 0;
    std::vector<T> gamma_, beta_, grad_gamma_, grad_beta_;
    std::vector<T> running_mean_, running_var_;
    std::vector<double> mean_, invstd_;
    Tensor<T> xhat_;
    bool trained_forward_ = false;
};

template <typename T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        x_cache_ = x;
        Tensor<T> out = x;
        for (auto& v : out.data()) {
            if (v < T(0)) {
                v = T(0);
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> dx = grad_out;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (x_cache_.data()[i] <= T(0)) {
                dx.data()[i] = T(0);
            }
        }
        return dx;
    }

private:
    Tensor<T> x_cache_;
};

template <typename T>
class GlobalAvgPool {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        in_h_ = x.h();
        in_w_ = x.w();
        Tensor<T> out(x.n(), x.c(), 1, 1);
        const double scale = 1.0 / (static_cast<double>(x.h()) * x.w());
        for (int n = 0; n < x.n(); ++n) {
            for (int c = 0; c < x.c(); ++c) {
                double acc = 0.0;
                for (int i = 0; i < x.h(); ++i) {
                    for (int j = 0; j < x.w(); ++j) {
                        acc += x.at(n, c, i, j);
                    }
                }
                out.at(n, c, 0, 0) = static_cast<T>(acc * scale);
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> dx(grad_out.n(), grad_out.c(), in_h_, in_w_);
        const double scale = 1.0 / (static_cast<double>(in_h_) * in_w_);
        for (int n = 0; n < grad_out.n(); ++n) {
            for (int c = 0; c < grad_out.c(); ++c) {
                const T g = static_cast<T>(grad_out.at(n, c, 0, 0) * scale);
                for (int i = 0; i < in_h_; ++i) {
                    for (int j = 0; j < in_w_; ++j) {
                        dx.at(n, c, i, j) = g;
                    }
                }
            }
        }
        return dx;
    }

private:
    int in_h_ = 1;
    int in_w_ = 1;
};

/// Fully connected classifier head on (N, C, 1, 1) input. The only layer
/// with bias terms.
template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(int in_features, int out_features, std::uint64_t seed)
        : in_(in_features), out_(out_features) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in_features));
        weight_.resize(static_cast<std::size_t>(out_) * in_);
        for (auto& w : weight_) {
            w = static_cast<T>(dist(rng));
        }
        bias_.assign(out_, T(0));
        grad_weight_.assign(weight_.size(), T(0));
        grad_bias_.assign(bias_.size(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.h() != 1 || x.w() != 1 || x.c() != in_) {
            throw std::invalid_argument("Linear: expected (N," + std::to_string(in_) +
                                        ",1,1) input");
        }
        x_cache_ = x;
        Tensor<T> out(x.n(), out_, 1, 1);
        for (int n = 0; n < x.n(); ++n) {
            for (int k = 0; k < out_; ++k) {
                double acc = bias_[k];
                for (int c = 0; c < in_; ++c) {
                    acc += static_cast<double>(weight_[static_cast<std::size_t>(k) * in_ + c]) *
                           x.at(n, c, 0, 0);
                }
                out.at(n, k, 0, 0) = static_cast<T>(acc);
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> dx(x_cache_.n(), in_, 1, 1);
        for (int n = 0; n < x_cache_.n(); ++n) {
            for (int k = 0; k < out_; ++k) {
                const T g = grad_out.at(n, k, 0, 0);
                grad_bias_[k] += g;
                for (int c = 0; c < in_; ++c) {
                    grad_weight_[static_cast<std::size_t>(k) * in_ + c] +=
                        g * x_cache_.at(n, c, 0, 0);
                    dx.at(n, c, 0, 0) += weight_[static_cast<std::size_t>(k) * in_ + c] * g;
                }
            }
        }
        return dx;
    }

    void zero_grad() {
        std::fill(grad_weight_.begin(), grad_weight_.end(), T(0));
        std::fill(grad_bias_.begin(), grad_bias_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&weight_, &grad_weight_});
        out.push_back({&bias_, &grad_bias_});
    }

    std::vector<T>& bias() { return bias_; }
    long long param_count() const { return static_cast<long long>(in_) * out_ + out_; }

private:
    int in_ = 0;
    int out_ = 0;
    std::vector<T> weight_, bias_, grad_weight_, grad_bias_;
    Tensor<T> x_cache_;
};

}  // namespace layers

struct ToyModelConfig {
    CpwcVariant variant = CpwcVariant::Full;
    int in_channels = 1;
    int channels = 24;  // width after the input conv; halves per block
    int blocks = 2;     // 2..4
    int classes = 4;
    std::uint64_t seed = 1;
};

/// Block widths: the input conv lifts to `channels`, then each block halves
/// the width (floor 4). Every cpwc node therefore reduces channels, so its
/// stage-1 groups hold several channels and the context paths mix channels
/// spatially, as in the bottleneck layers the block replaces.
inline std::vector<int> toy_model_widths(const ToyModelConfig& cfg) {
    std::vector<int> widths(cfg.blocks + 1);
    widths[0] = cfg.channels;
    for (int b = 1; b <= cfg.blocks; ++b) {
        widths[b] = std::max(4, widths[b - 1] / 2);
    }
    return widths;
}

/// Small trainable CNN: pointwise input conv, then `blocks` units of
/// [cpwc -> batchnorm -> relu], global average pooling and a linear
/// classifier. The variant of the cpwc nodes is the only thing that changes
/// across ablation arms.
template <typename T>
class ToyModel {
public:
    explicit ToyModel(const ToyModelConfig& cfg) : cfg_(cfg) {
        if (cfg.blocks < 2 || cfg.blocks > 4) {
            throw std::invalid_argument("ToyModel: blocks must be in [2,4]");
        }
        if (cfg.channels < 4) {
            throw std::invalid_argument("ToyModel: channels must be >= 4");
        }
        if (cfg.classes < 2) {
            throw std::invalid_argument("ToyModel: classes must be >= 2");
        }
        const std::vector<int> widths = toy_model_widths(cfg);
        std::uint64_t seed = cfg.seed;
        input_conv_ = layers::CpwcNode<T>(cfg.in_channels, widths[0], CpwcVariant::PwcOnly, 1,
                                          seed++);
        blocks_.resize(cfg.blocks);
        for (int b = 0; b < cfg.blocks; ++b) {
            blocks_[b].node =
                layers::CpwcNode<T>(widths[b], widths[b + 1], cfg.variant, 1, seed++);
            blocks_[b].bn = layers::BatchNorm<T>(widths[b + 1]);
        }
        fc_ = layers::Linear<T>(widths.back(), cfg.classes, seed++);
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        Tensor<T> h = input_conv_.forward(x);
        for (auto& block : blocks_) {
            h = block.node.forward(h);
            h = block.bn.forward(h, training);
            h = block.relu.forward(h);
        }
        h = pool_.forward(h);
        return fc_.forward(h);
    }

    /// Propagates the logits cotangent back through the stack, accumulating
    /// parameter gradients. Requires a preceding training-mode forward.
    Tensor<T> backward(const Tensor<T>& grad_logits) {
        Tensor<T> g = fc_.backward(grad_logits);
        g = pool_.backward(g);
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            g = it->relu.backward(g);
            g = it->bn.backward(g);
            g = it->node.backward(g);
        }
        return input_conv_.backward(g);
    }

    void zero_grad() {
        input_conv_.zero_grad();
        for (auto& block : blocks_) {
            block.node.zero_grad();
            block.bn.zero_grad();
        }
        fc_.zero_grad();
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        input_conv_.collect(out);
        for (auto& block : blocks_) {
            block.node.collect(out);
            block.bn.collect(out);
        }
        fc_.collect(out);
        return out;
    }

    long long param_count() const {
        long long n = input_conv_.param_count() + fc_.param_count();
        for (const auto& block : blocks_) {
            n += block.node.param_count() + block.bn.param_count();
        }
        return n;
    }

    /// Per-image multiply-accumulates at the given input resolution; norm,
    /// rectifier and pooling excluded, matching the analyzer convention.
    long long macs(int h, int w) const {
        const std::vector<int> widths = toy_model_widths(cfg_);
        long long n = macs_cpwc(cfg_.in_channels, widths[0], CpwcVariant::PwcOnly, h, w);
        for (int b = 0; b < cfg_.blocks; ++b) {
            n += macs_cpwc(widths[b], widths[b + 1], cfg_.variant, h, w);
        }
        n += static_cast<long long>(widths.back()) * cfg_.classes;
        return n;
    }

    /// (in, out) channel shapes of the variant-bearing nodes, in order.
    std::vector<std::pair<int, int>> cpwc_node_shapes() const {
        const std::vector<int> widths = toy_model_widths(cfg_);
        std::vector<std::pair<int, int>> shapes;
        for (int b = 0; b < cfg_.blocks; ++b) {
            shapes.emplace_back(widths[b], widths[b + 1]);
        }
        return shapes;
    }

    const ToyModelConfig& config() const { return cfg_; }
    layers::Linear<T>& classifier() { return fc_; }

private:
    struct Block {
        layers::CpwcNode<T> node;
        layers::BatchNorm<T> bn;
        layers::Relu<T> relu;
    };

    ToyModelConfig cfg_;
    layers::CpwcNode<T> input_conv_;
    std::vector<Block> blocks_;
    layers::GlobalAvgPool<T> pool_;
    layers::Linear<T> fc_;
};

template <typename T>
struct LossResult {
    double loss = 0.0;
    int correct = 0;
    Tensor<T> grad_logits;
};

/// Mean softmax cross-entropy over the batch, with the logits cotangent
/// (softmax - onehot)/N and the argmax hit count.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (static_cast<int>(labels.size()) != logits.n()) {
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    }
    const int N = logits.n();
    const int K = logits.c();
    LossResult<T> result;
    result.grad_logits = Tensor<T>(N, K, 1, 1);
    double total = 0.0;
    for (int n = 0; n < N; ++n) {
        const int label = labels[n];
        if (label < 0 || label >= K) {
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        }
        double max_logit = logits.at(n, 0, 0, 0);
        int argmax = 0;
        for (int k = 1; k < K; ++k) {
            if (logits.at(n, k, 0, 0) > max_logit) {
                max_logit = logits.at(n, k, 0, 0);
                argmax = k;
            }
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) {
            denom += std::exp(static_cast<double>(logits.at(n, k, 0, 0)) - max_logit);
        }
        total -= static_cast<double>(logits.at(n, label, 0, 0)) - max_logit - std::log(denom);
        for (int k = 0; k < K; ++k) {
            const double p =
                std::exp(static_cast<double>(logits.at(n, k, 0, 0)) - max_logit) / denom;
            result.grad_logits.at(n, k, 0, 0) =
                static_cast<T>((p - (k == label ? 1.0 : 0.0)) / N);
        }
        if (argmax == label) {
            ++result.correct;
        }
    }
    result.loss = total / N;
    return result;
}

}  // namespace cpwc
