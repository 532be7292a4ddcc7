#include "cpwc/cpwc.hpp"

#include <algorithm>
#include <cmath>

namespace cpwc {

int GroupPlan::case_label() const {
    if (out_channels == in_channels) {
        return 1;
    }
    return out_channels < in_channels ? 2 : 3;
}

long long GroupPlan::total_slots() const {
    long long n = 0;
    for (const auto& g : groups) {
        n += static_cast<long long>(g.size());
    }
    return n;
}

GroupPlan plan_groups(int in_channels, int out_channels) {
    if (in_channels < 1 || out_channels < 1) {
        throw std::invalid_argument("plan_groups: channel counts must be positive");
    }
    GroupPlan plan;
    plan.in_channels = in_channels;
    plan.out_channels = out_channels;
    plan.groups.resize(out_channels);

    const int C = in_channels;
    const int Z = out_channels;
    if (Z <= C) {
        // Cases 1 and 2: contiguous ascending partition of [0, C). With
        // rm = C mod Z the first rm groups take floor(C/Z)+1 channels.
        const int base = C / Z;
        const int rm = C % Z;
        int next = 0;
        for (int z = 0; z < Z; ++z) {
            const int size = base + (z < rm ? 1 : 0);
            plan.groups[z].resize(size);
            for (int j = 0; j < size; ++j) {
                plan.groups[z][j] = next++;
            }
        }
    } else {
        // Case 3: singleton groups, channels shared; group indices ascend
        // with channel indices. With rm = Z mod C the first rm channels are
        // shared by floor(Z/C)+1 groups.
        const int base = Z / C;
        const int rm = Z % C;
        int z = 0;
        for (int c = 0; c < C; ++c) {
            const int shares = base + (c < rm ? 1 : 0);
            for (int s = 0; s < shares; ++s) {
                plan.groups[z++] = {c};
            }
        }
    }
    return plan;
}

std::string_view to_string(CpwcVariant v) {
    switch (v) {
        case CpwcVariant::Full: return "full";
        case CpwcVariant::NoStage2: return "no-stage2";
        case CpwcVariant::NoPwc: return "no-pwc";
        case CpwcVariant::NoPwcNoStage2: return "no-pwc-no-stage2";
        case CpwcVariant::PwcOnly: return "pwc-only";
    }
    return "unknown";
}

std::optional<CpwcVariant> variant_from_string(std::string_view s) {
    for (CpwcVariant v : all_variants()) {
        if (s == to_string(v)) {
            return v;
        }
    }
    return std::nullopt;
}

const std::vector<CpwcVariant>& all_variants() {
    static const std::vector<CpwcVariant> variants = {
        CpwcVariant::Full, CpwcVariant::NoStage2, CpwcVariant::NoPwc, CpwcVariant::NoPwcNoStage2,
        CpwcVariant::PwcOnly};
    return variants;
}

long long count_cpwc(int in_channels, int out_channels, CpwcVariant v) {
    if (in_channels < 1 || out_channels < 1) {
        throw std::invalid_argument("count_cpwc: channel counts must be positive");
    }
    const long long C = in_channels;
    const long long Z = out_channels;
    long long n = 0;
    if (has_pwc(v)) {
        n += C * Z;
    }
    if (has_stage1(v)) {
        n += 9 * std::max(C, Z);
    }
    if (has_stage2(v)) {
        n += 9 * Z;
    }
    return n;
}

long long macs_cpwc(int in_channels, int out_channels, CpwcVariant v, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("macs_cpwc: output dims must be positive");
    }
    return static_cast<long long>(out_h) * out_w * count_cpwc(in_channels, out_channels, v);
}

namespace {

// The probe loss sum(y^2) is exactly quadratic along every single-scalar
// perturbation (the block is linear in each weight and in the input), so
// central differences have no truncation term. The remaining enemy is
// cancellation in L(+eps) - L(-eps); evaluating the perturbed losses in
// extended precision pushes that noise floor well below the tolerances the
// check is used with.
using wide = long double;

Tensor<wide> widen(const Tensor<double>& x) {
    Tensor<wide> out(x.n(), x.c(), x.h(), x.w());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data()[i] = x.data()[i];
    }
    return out;
}

CpwcParams<wide> widen(const CpwcParams<double>& p) {
    CpwcParams<wide> out;
    out.plan = p.plan;
    out.variant = p.variant;
    out.stride = p.stride;
    out.pwc.assign(p.pwc.begin(), p.pwc.end());
    out.stage1.resize(p.stage1.size());
    for (std::size_t i = 0; i < p.stage1.size(); ++i) {
        out.stage1[i].assign(p.stage1[i].begin(), p.stage1[i].end());
    }
    out.stage2.assign(p.stage2.begin(), p.stage2.end());
    return out;
}

wide squared_output_loss(const CpwcParams<wide>& p, const Tensor<wide>& x) {
    const Tensor<wide> y = cpwc_forward(x, p);
    wide loss = 0;
    for (wide v : y.data()) {
        loss += v * v;
    }
    return loss;
}

// Indices to probe: every scalar for small banks, a seeded subsample above
// the threshold so large blocks stay cheap to check.
std::vector<std::size_t> probe_indices(std::size_t count, std::uint64_t tag) {
    constexpr std::size_t kThreshold = 256;
    std::vector<std::size_t> idx;
    if (count <= kThreshold) {
        idx.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            idx[i] = i;
        }
        return idx;
    }
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ tag);
    std::uniform_int_distribution<std::size_t> dist(0, count - 1);
    idx.reserve(kThreshold);
    for (std::size_t i = 0; i < kThreshold; ++i) {
        idx.push_back(dist(rng));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
    return std::fabs(analytic - numeric) / denom;
}

// Central difference of the loss along one scalar, reusing storage.
double central_diff(CpwcParams<wide>& p, const Tensor<wide>& x, wide& slot, double eps) {
    const wide saved = slot;
    slot = saved + eps;
    const wide hi = squared_output_loss(p, x);
    slot = saved - eps;
    const wide lo = squared_output_loss(p, x);
    slot = saved;
    return static_cast<double>((hi - lo) / (2.0L * eps));
}

}  // namespace

FdCheckReport finite_difference_compare(const CpwcParams<double>& p, const Tensor<double>& x,
                                        double epsilon, double tolerance,
                                        const CpwcGrads<double>& analytic) {
    if (!(epsilon > 0.0) || epsilon > 1e-2) {
        throw std::invalid_argument("finite_difference_compare: epsilon must be in (0, 1e-2]");
    }
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("finite_difference_compare: tolerance must be positive");
    }

    CpwcParams<wide> probe = widen(p);
    const Tensor<wide> xw = widen(x);
    FdCheckReport report;
    report.tolerance = tolerance;

    if (has_pwc(p.variant)) {
        for (std::size_t i : probe_indices(probe.pwc.size(), 1)) {
            const double numeric = central_diff(probe, xw, probe.pwc[i], epsilon);
            report.pwc_err = std::max(report.pwc_err, rel_err(analytic.pwc[i], numeric));
        }
    }
    if (has_stage1(p.variant)) {
        for (std::size_t z = 0; z < probe.stage1.size(); ++z) {
            for (std::size_t i : probe_indices(probe.stage1[z].size(), 2 + z)) {
                const double numeric = central_diff(probe, xw, probe.stage1[z][i], epsilon);
                report.stage1_err =
                    std::max(report.stage1_err, rel_err(analytic.stage1[z][i], numeric));
            }
        }
    }
    if (has_stage2(p.variant)) {
        for (std::size_t i : probe_indices(probe.stage2.size(), 3)) {
            const double numeric = central_diff(probe, xw, probe.stage2[i], epsilon);
            report.stage2_err = std::max(report.stage2_err, rel_err(analytic.stage2[i], numeric));
        }
    }

    Tensor<wide> xprobe = xw;
    for (std::size_t i : probe_indices(xprobe.size(), 4)) {
        wide& slot = xprobe.data()[i];
        const wide saved = slot;
        slot = saved + epsilon;
        const wide hi = squared_output_loss(probe, xprobe);
        slot = saved - epsilon;
        const wide lo = squared_output_loss(probe, xprobe);
        slot = saved;
        const double numeric = static_cast<double>((hi - lo) / (2.0L * epsilon));
        report.input_err = std::max(report.input_err, rel_err(analytic.input.data()[i], numeric));
    }

    report.passed = report.max_err() < tolerance;
    return report;
}

FdCheckReport finite_difference_check(const CpwcParams<double>& p, const Tensor<double>& x,
                                      double epsilon, double tolerance) {
    Tensor<double> y = cpwc_forward(x, p);
    for (auto& v : y.data()) {
        v *= 2.0;  // d(sum y^2)/dy
    }
    const CpwcGrads<double> analytic = cpwc_backward(x, p, y);
    return finite_difference_compare(p, x, epsilon, tolerance, analytic);
}

FdCheckReport finite_difference_check(const CpwcParams<float>&, const Tensor<float>&, double,
                                      double) {
    throw std::invalid_argument(
        "finite_difference_check: requires double precision; the check is meaningless in single "
        "precision");
}

}  // namespace cpwc
