#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cpwc/tensor.hpp"

namespace cpwc {

/// Assignment of C input channels to the Z stage-1 groups.
///
/// Three cases, by the relation of Z to C:
///   Z == C  every group holds exactly one channel, each channel used once
///   Z <  C  the groups partition [0,C): with rm = C mod Z, the first rm
///           groups hold floor(C/Z)+1 contiguous channels, the rest floor(C/Z)
///   Z >  C  every group holds one channel; with rm = Z mod C, each of the
///           first rm channels is shared by floor(Z/C)+1 groups, the rest by
///           floor(Z/C); group indices ascend with channel indices
///
/// In all cases the group sizes sum to max(C, Z).
struct GroupPlan {
    int in_channels = 0;   // C
    int out_channels = 0;  // Z
    std::vector<std::vector<int>> groups;

    /// 1, 2 or 3 per the case split above.
    int case_label() const;
    long long total_slots() const;  // sum of group sizes == max(C, Z)
};

GroupPlan plan_groups(int in_channels, int out_channels);

/// Which of the three paths (pointwise, stage 1, stage 2) are active.
enum class CpwcVariant {
    Full,           // pwc + stage1 + stage2
    NoStage2,       // pwc + stage1
    NoPwc,          // stage1 + stage2
    NoPwcNoStage2,  // stage1 only
    PwcOnly,        // plain 1x1 convolution (the unmodified baseline)
};

constexpr bool has_pwc(CpwcVariant v) {
    return v == CpwcVariant::Full || v == CpwcVariant::NoStage2 || v == CpwcVariant::PwcOnly;
}
constexpr bool has_stage1(CpwcVariant v) { return v != CpwcVariant::PwcOnly; }
constexpr bool has_stage2(CpwcVariant v) {
    return v == CpwcVariant::Full || v == CpwcVariant::NoPwc;
}

std::string_view to_string(CpwcVariant v);
std::optional<CpwcVariant> variant_from_string(std::string_view s);
const std::vector<CpwcVariant>& all_variants();

/// Closed-form weight count of one block:
///   pwc C*Z, stage1 9*max(C,Z), stage2 9*Z, summed over the active paths.
long long count_cpwc(int in_channels, int out_channels, CpwcVariant v);

/// Multiply-accumulate count at the given output resolution. Stage 2 runs at
/// stride 1 on stage-1 output, so all three terms scale by out_h*out_w.
long long macs_cpwc(int in_channels, int out_channels, CpwcVariant v, int out_h, int out_w);

/// The three weight banks of one block. Absent banks are empty vectors.
/// stage1[i] holds r_i*9 values (slot-major 3x3 taps); stage2 holds Z 3x3
/// blocks; pwc is Z x C row-major. No bias terms anywhere.
template <typename T>
struct CpwcParams {
    GroupPlan plan;
    CpwcVariant variant = CpwcVariant::Full;
    int stride = 1;
    std::vector<T> pwc;                  // Z*C, [z][c]
    std::vector<std::vector<T>> stage1;  // per group: r_i*9, [slot][kh][kw]
    std::vector<T> stage2;               // Z*9, [z][kh][kw]

    long long weight_count() const {
        long long n = static_cast<long long>(pwc.size()) + static_cast<long long>(stage2.size());
        for (const auto& g : stage1) {
            n += static_cast<long long>(g.size());
        }
        return n;
    }
};

/// Gradients in the same layout as CpwcParams, plus the input gradient.
template <typename T>
struct CpwcGrads {
    Tensor<T> input;
    std::vector<T> pwc;
    std::vector<std::vector<T>> stage1;
    std::vector<T> stage2;
};

namespace detail {

inline std::pair<int, int> strided_out_dims(int h, int w, int stride) {
    return {(h - 1) / stride + 1, (w - 1) / stride + 1};
}

/// 1x1 convolution, stride s, no padding. weights Z x C row-major.
template <typename T>
Tensor<T> pointwise_forward(const Tensor<T>& x, const std::vector<T>& w, int out_channels,
                            int stride) {
    const int C = x.c();
    const auto [oh, ow] = strided_out_dims(x.h(), x.w(), stride);
    Tensor<T> out(x.n(), out_channels, oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < out_channels; ++z) {
            const T* wz = w.data() + static_cast<std::size_t>(z) * C;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    acc_t<T> acc = 0;
                    for (int c = 0; c < C; ++c) {
                        acc += static_cast<acc_t<T>>(wz[c]) *
                               static_cast<acc_t<T>>(x.at(n, c, oy * stride, ox * stride));
                    }
                    out.at(n, z, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

template <typename T>
void pointwise_backward(const Tensor<T>& x, const std::vector<T>& w, int out_channels, int stride,
                        const Tensor<T>& grad_out, Tensor<T>& grad_x, std::vector<T>& grad_w) {
    const int C = x.c();
    grad_w.assign(w.size(), T(0));
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < out_channels; ++z) {
            const T* wz = w.data() + static_cast<std::size_t>(z) * C;
            T* gwz = grad_w.data() + static_cast<std::size_t>(z) * C;
            for (int oy = 0; oy < grad_out.h(); ++oy) {
                for (int ox = 0; ox < grad_out.w(); ++ox) {
                    const T g = grad_out.at(n, z, oy, ox);
                    if (g == T(0)) {
                        continue;
                    }
                    const int iy = oy * stride;
                    const int ix = ox * stride;
                    for (int c = 0; c < C; ++c) {
                        grad_x.at(n, c, iy, ix) += wz[c] * g;
                        gwz[c] += x.at(n, c, iy, ix) * g;
                    }
                }
            }
        }
    }
}

/// Per-group 3x3 convolution, pad 1, stride s. Group i reads its listed
/// channels and writes output channel i.
template <typename T>
Tensor<T> grouped3x3_forward(const Tensor<T>& x, const GroupPlan& plan,
                             const std::vector<std::vector<T>>& w, int stride) {
    const auto [oh, ow] = strided_out_dims(x.h(), x.w(), stride);
    Tensor<T> out(x.n(), plan.out_channels, oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < plan.out_channels; ++z) {
            const auto& chans = plan.groups[z];
            const auto& wz = w[z];
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    acc_t<T> acc = 0;
                    for (std::size_t j = 0; j < chans.size(); ++j) {
                        const int c = chans[j];
                        for (int ki = 0; ki < 3; ++ki) {
                            const int iy = oy * stride - 1 + ki;
                            if (iy < 0 || iy >= x.h()) {
                                continue;
                            }
                            for (int kj = 0; kj < 3; ++kj) {
                                const int ix = ox * stride - 1 + kj;
                                if (ix < 0 || ix >= x.w()) {
                                    continue;
                                }
                                acc += static_cast<acc_t<T>>(wz[(j * 3 + ki) * 3 + kj]) *
                                       static_cast<acc_t<T>>(x.at(n, c, iy, ix));
                            }
                        }
                    }
                    out.at(n, z, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

template <typename T>
void grouped3x3_backward(const Tensor<T>& x, const GroupPlan& plan,
                         const std::vector<std::vector<T>>& w, int stride,
                         const Tensor<T>& grad_out, Tensor<T>& grad_x,
                         std::vector<std::vector<T>>& grad_w) {
    grad_w.resize(w.size());
    for (std::size_t z = 0; z < w.size(); ++z) {
        grad_w[z].assign(w[z].size(), T(0));
    }
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < plan.out_channels; ++z) {
            const auto& chans = plan.groups[z];
            const auto& wz = w[z];
            auto& gwz = grad_w[z];
            for (int oy = 0; oy < grad_out.h(); ++oy) {
                for (int ox = 0; ox < grad_out.w(); ++ox) {
                    const T g = grad_out.at(n, z, oy, ox);
                    if (g == T(0)) {
                        continue;
                    }
                    for (std::size_t j = 0; j < chans.size(); ++j) {
                        const int c = chans[j];
                        for (int ki = 0; ki < 3; ++ki) {
                            const int iy = oy * stride - 1 + ki;
                            if (iy < 0 || iy >= x.h()) {
                                continue;
                            }
                            for (int kj = 0; kj < 3; ++kj) {
                                const int ix = ox * stride - 1 + kj;
                                if (ix < 0 || ix >= x.w()) {
                                    continue;
                                }
                                grad_x.at(n, c, iy, ix) += wz[(j * 3 + ki) * 3 + kj] * g;
                                gwz[(j * 3 + ki) * 3 + kj] += x.at(n, c, iy, ix) * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Depthwise 3x3, pad 1, stride 1: one filter per channel.
template <typename T>
Tensor<T> depthwise3x3_forward(const Tensor<T>& x, const std::vector<T>& w) {
    Tensor<T> out(x.n(), x.c(), x.h(), x.w());
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < x.c(); ++z) {
            const T* wz = w.data() + static_cast<std::size_t>(z) * 9;
            for (int oy = 0; oy < x.h(); ++oy) {
                for (int ox = 0; ox < x.w(); ++ox) {
                    acc_t<T> acc = 0;
                    for (int ki = 0; ki < 3; ++ki) {
                        const int iy = oy - 1 + ki;
                        if (iy < 0 || iy >= x.h()) {
                            continue;
                        }
                        for (int kj = 0; kj < 3; ++kj) {
                            const int ix = ox - 1 + kj;
                            if (ix < 0 || ix >= x.w()) {
                                continue;
                            }
                            acc += static_cast<acc_t<T>>(wz[ki * 3 + kj]) *
                                   static_cast<acc_t<T>>(x.at(n, z, iy, ix));
                        }
                    }
                    out.at(n, z, oy, ox) = static_cast<T>(acc);
                }
            }
        }
    }
    return out;
}

template <typename T>
void depthwise3x3_backward(const Tensor<T>& x, const std::vector<T>& w, const Tensor<T>& grad_out,
                           Tensor<T>& grad_x, std::vector<T>& grad_w) {
    grad_w.assign(w.size(), T(0));
    for (int n = 0; n < x.n(); ++n) {
        for (int z = 0; z < x.c(); ++z) {
            const T* wz = w.data() + static_cast<std::size_t>(z) * 9;
            T* gwz = grad_w.data() + static_cast<std::size_t>(z) * 9;
            for (int oy = 0; oy < x.h(); ++oy) {
                for (int ox = 0; ox < x.w(); ++ox) {
                    const T g = grad_out.at(n, z, oy, ox);
                    if (g == T(0)) {
                        continue;
                    }
                    for (int ki = 0; ki < 3; ++ki) {
                        const int iy = oy - 1 + ki;
                        if (iy < 0 || iy >= x.h()) {
                            continue;
                        }
                        for (int kj = 0; kj < 3; ++kj) {
                            const int ix = ox - 1 + kj;
                            if (ix < 0 || ix >= x.w()) {
                                continue;
                            }
                            grad_x.at(n, z, iy, ix) += wz[ki * 3 + kj] * g;
                            gwz[ki * 3 + kj] += x.at(n, z, iy, ix) * g;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Seeded fan-in-scaled init: each bank drawn from N(0, 2/fan_in). The same
/// (plan, variant, stride, seed) always produces bit-identical parameters.
template <typename T>
CpwcParams<T> init_params(const GroupPlan& plan, CpwcVariant variant, int stride,
                          std::uint64_t seed) {
    if (plan.in_channels < 1 || plan.out_channels < 1 ||
        static_cast<int>(plan.groups.size()) != plan.out_channels) {
        throw std::invalid_argument("init_params: malformed group plan");
    }
    if (stride < 1) {
        throw std::invalid_argument("init_params: stride must be positive");
    }
    CpwcParams<T> p;
    p.plan = plan;
    p.variant = variant;
    p.stride = stride;

    std::mt19937_64 rng(seed);
    auto fill = [&rng](std::vector<T>& v, std::size_t count, double fan_in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        v.resize(count);
        for (auto& x : v) {
            x = static_cast<T>(dist(rng));
        }
    };

    const int C = plan.in_channels;
    const int Z = plan.out_channels;
    if (has_pwc(variant)) {
        fill(p.pwc, static_cast<std::size_t>(Z) * C, static_cast<double>(C));
    }
    if (has_stage1(variant)) {
        p.stage1.resize(Z);
        for (int z = 0; z < Z; ++z) {
            fill(p.stage1[z], plan.groups[z].size() * 9, 9.0 * plan.groups[z].size());
        }
    }
    if (has_stage2(variant)) {
        fill(p.stage2, static_cast<std::size_t>(Z) * 9, 9.0);
    }
    return p;
}

/// Fused block output: pwc(x) + stage1(x) + stage2(stage1(x)), with absent
/// paths contributing zero. The pointwise path and stage 1 use the block
/// stride; stage 2 is stride 1 on stage-1 output, so all paths share the
/// output shape (N, Z, ceil(H/s), ceil(W/s)). No bias, no nonlinearity,
/// no normalization inside the block.
template <typename T>
Tensor<T> cpwc_forward(const Tensor<T>& x, const CpwcParams<T>& p) {
    if (x.c() != p.plan.in_channels) {
        throw std::invalid_argument("cpwc_forward: input has " + std::to_string(x.c()) +
                                    " channels, plan expects " +
                                    std::to_string(p.plan.in_channels));
    }
    Tensor<T> out;
    if (has_pwc(p.variant)) {
        out = detail::pointwise_forward(x, p.pwc, p.plan.out_channels, p.stride);
    }
    if (has_stage1(p.variant)) {
        Tensor<T> s1 = detail::grouped3x3_forward(x, p.plan, p.stage1, p.stride);
        Tensor<T> acc = has_stage2(p.variant) ? add_elementwise(s1, detail::depthwise3x3_forward(s1, p.stage2))
                                              : std::move(s1);
        out = out.empty() ? std::move(acc) : add_elementwise(out, acc);
    }
    return out;
}

/// Analytic gradients of cpwc_forward. Stage-1 weights receive cotangent
/// contributions both from the direct sum path and through stage 2.
template <typename T>
CpwcGrads<T> cpwc_backward(const Tensor<T>& x, const CpwcParams<T>& p, const Tensor<T>& grad_out) {
    if (x.c() != p.plan.in_channels) {
        throw std::invalid_argument("cpwc_backward: input channel mismatch with plan");
    }
    const auto [oh, ow] = detail::strided_out_dims(x.h(), x.w(), p.stride);
    if (grad_out.n() != x.n() || grad_out.c() != p.plan.out_channels || grad_out.h() != oh ||
        grad_out.w() != ow) {
        throw std::invalid_argument("cpwc_backward: grad_out shape does not match forward output");
    }

    CpwcGrads<T> g;
    g.input = Tensor<T>(x.n(), x.c(), x.h(), x.w());
    if (has_pwc(p.variant)) {
        detail::pointwise_backward(x, p.pwc, p.plan.out_channels, p.stride, grad_out, g.input,
                                   g.pwc);
    }
    if (has_stage1(p.variant)) {
        Tensor<T> grad_s1 = grad_out;
        if (has_stage2(p.variant)) {
            Tensor<T> s1 = detail::grouped3x3_forward(x, p.plan, p.stage1, p.stride);
            Tensor<T> ds1(s1.n(), s1.c(), s1.h(), s1.w());
            detail::depthwise3x3_backward(s1, p.stage2, grad_out, ds1, g.stage2);
            grad_s1 = add_elementwise(grad_s1, ds1);
        }
        detail::grouped3x3_backward(x, p.plan, p.stage1, p.stride, grad_s1, g.input, g.stage1);
    }
    return g;
}

/// Result of one finite-difference sweep: the max relative error per weight
/// bank and for the input gradient, against central differences of the loss
/// sum(y^2). Relative error uses denominator max(|analytic|, |numeric|, 1e-12).
struct FdCheckReport {
    double pwc_err = 0.0;
    double stage1_err = 0.0;
    double stage2_err = 0.0;
    double input_err = 0.0;
    double tolerance = 0.0;
    bool passed = false;

    double max_err() const {
        double m = pwc_err;
        if (stage1_err > m) m = stage1_err;
        if (stage2_err > m) m = stage2_err;
        if (input_err > m) m = input_err;
        return m;
    }
};

FdCheckReport finite_difference_compare(const CpwcParams<double>& p, const Tensor<double>& x,
                                        double epsilon, double tolerance,
                                        const CpwcGrads<double>& analytic);

FdCheckReport finite_difference_check(const CpwcParams<double>& p, const Tensor<double>& x,
                                      double epsilon, double tolerance);

// The check needs double precision; reject single precision outright.
FdCheckReport finite_difference_check(const CpwcParams<float>&, const Tensor<float>&, double,
                                      double);

}  // namespace cpwc
