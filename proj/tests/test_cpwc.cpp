#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cpwc/cpwc.hpp"

using namespace cpwc;

namespace {

Tensor<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
    Tensor<double> t(n, c, h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : t.data()) {
        v = dist(rng);
    }
    return t;
}

// Brute-force check of every GroupPlan invariant; the oracle the planner is
// tested against.
void check_plan_invariants(const GroupPlan& plan, int C, int Z) {
    REQUIRE(plan.in_channels == C);
    REQUIRE(plan.out_channels == Z);
    REQUIRE(static_cast<int>(plan.groups.size()) == Z);
    REQUIRE(plan.total_slots() == std::max(C, Z));

    std::vector<int> uses(C, 0);
    for (const auto& g : plan.groups) {
        REQUIRE(!g.empty());
        for (int c : g) {
            REQUIRE(c >= 0);
            REQUIRE(c < C);
            ++uses[c];
        }
    }

    if (Z <= C) {
        // Cases 1 and 2: exact partition of [0, C).
        for (int c = 0; c < C; ++c) {
            REQUIRE(uses[c] == 1);
        }
        const int base = C / Z;
        const int rm = C % Z;
        for (int z = 0; z < Z; ++z) {
            const int expect = base + (z < rm ? 1 : 0);
            REQUIRE(static_cast<int>(plan.groups[z].size()) == expect);
        }
        if (Z == C) {
            for (int z = 0; z < Z; ++z) {
                REQUIRE(plan.groups[z].size() == 1);
            }
        }
    } else {
        // Case 3: singleton groups with the stated share counts.
        const int base = Z / C;
        const int rm = Z % C;
        for (const auto& g : plan.groups) {
            REQUIRE(g.size() == 1);
        }
        for (int c = 0; c < C; ++c) {
            const int expect = base + (c < rm ? 1 : 0);
            REQUIRE(uses[c] == expect);
        }
    }
}

// Assemble the three paths from conv2d_oracle alone; the independent route
// the fused forward is compared against.
Tensor<double> oracle_forward(const Tensor<double>& x, const CpwcParams<double>& p) {
    const int C = p.plan.in_channels;
    const int Z = p.plan.out_channels;
    Tensor<double> out;
    auto accumulate = [&out](Tensor<double> t) {
        out = out.empty() ? std::move(t) : add_elementwise(out, t);
    };

    if (has_pwc(p.variant)) {
        ConvFilterBank<double> bank = ConvFilterBank<double>::dense(C, Z, 1, 1);
        for (int z = 0; z < Z; ++z) {
            for (int c = 0; c < C; ++c) {
                bank.weights[z][c] = p.pwc[static_cast<std::size_t>(z) * C + c];
            }
        }
        accumulate(conv2d_oracle(x, bank, p.stride, 0));
    }
    if (has_stage1(p.variant)) {
        ConvFilterBank<double> s1bank;
        s1bank.kh = s1bank.kw = 3;
        s1bank.channels = p.plan.groups;
        s1bank.weights = p.stage1;
        Tensor<double> s1 = conv2d_oracle(x, s1bank, p.stride, 1);
        accumulate(s1);
        if (has_stage2(p.variant)) {
            ConvFilterBank<double> s2bank;
            s2bank.kh = s2bank.kw = 3;
            s2bank.channels.resize(Z);
            s2bank.weights.resize(Z);
            for (int z = 0; z < Z; ++z) {
                s2bank.channels[z] = {z};
                s2bank.weights[z].assign(p.stage2.begin() + static_cast<std::ptrdiff_t>(z) * 9,
                                         p.stage2.begin() + static_cast<std::ptrdiff_t>(z + 1) * 9);
            }
            accumulate(conv2d_oracle(s1, s2bank, 1, 1));
        }
    }
    return out;
}

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom =
            std::max({std::fabs(a.data()[i]), std::fabs(b.data()[i]), 1e-12});
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]) / denom);
    }
    return m;
}

}  // namespace

TEST_CASE("plan_groups worked examples") {
    SUBCASE("256 into 64 groups of 4") {
        auto plan = plan_groups(256, 64);
        CHECK(plan.case_label() == 2);
        REQUIRE(plan.groups.size() == 64);
        for (int z = 0; z < 64; ++z) {
            REQUIRE(plan.groups[z].size() == 4);
            for (int j = 0; j < 4; ++j) {
                CHECK(plan.groups[z][j] == 4 * z + j);
            }
        }
    }
    SUBCASE("identity partition when Z == C") {
        auto plan = plan_groups(7, 7);
        CHECK(plan.case_label() == 1);
        for (int z = 0; z < 7; ++z) {
            REQUIRE(plan.groups[z].size() == 1);
            CHECK(plan.groups[z][0] == z);
        }
    }
    SUBCASE("remainder split 10 into 3") {
        auto plan = plan_groups(10, 3);
        CHECK(plan.case_label() == 2);
        CHECK(plan.groups[0] == std::vector<int>{0, 1, 2, 3});
        CHECK(plan.groups[1] == std::vector<int>{4, 5, 6});
        CHECK(plan.groups[2] == std::vector<int>{7, 8, 9});
        check_plan_invariants(plan, 10, 3);
    }
    SUBCASE("shared channels 3 into 10") {
        auto plan = plan_groups(3, 10);
        CHECK(plan.case_label() == 3);
        for (int z = 0; z <= 3; ++z) {
            CHECK(plan.groups[z] == std::vector<int>{0});
        }
        for (int z = 4; z <= 6; ++z) {
            CHECK(plan.groups[z] == std::vector<int>{1});
        }
        for (int z = 7; z <= 9; ++z) {
            CHECK(plan.groups[z] == std::vector<int>{2});
        }
        check_plan_invariants(plan, 3, 10);
    }
    SUBCASE("rejects non-positive arguments") {
        CHECK_THROWS_AS(plan_groups(0, 4), std::invalid_argument);
        CHECK_THROWS_AS(plan_groups(4, 0), std::invalid_argument);
        CHECK_THROWS_AS(plan_groups(-1, 4), std::invalid_argument);
    }
}

TEST_CASE("plan_groups invariants hold for the exhaustive sweep") {
    for (int C = 1; C <= 64; ++C) {
        for (int Z = 1; Z <= 64; ++Z) {
            check_plan_invariants(plan_groups(C, Z), C, Z);
        }
    }
}

TEST_CASE("init_params determinism and structure") {
    auto plan = plan_groups(6, 4);
    SUBCASE("same seed, bit-identical") {
        auto a = init_params<double>(plan, CpwcVariant::Full, 1, 42);
        auto b = init_params<double>(plan, CpwcVariant::Full, 1, 42);
        CHECK(a.pwc == b.pwc);
        CHECK(a.stage1 == b.stage1);
        CHECK(a.stage2 == b.stage2);
    }
    SUBCASE("adjacent seeds differ") {
        auto a = init_params<double>(plan, CpwcVariant::Full, 1, 42);
        auto b = init_params<double>(plan, CpwcVariant::Full, 1, 43);
        CHECK(a.pwc != b.pwc);
    }
    SUBCASE("variant controls which banks exist") {
        auto p = init_params<double>(plan, CpwcVariant::NoStage2, 1, 1);
        CHECK(!p.pwc.empty());
        CHECK(!p.stage1.empty());
        CHECK(p.stage2.empty());

        auto q = init_params<double>(plan, CpwcVariant::NoPwc, 1, 1);
        CHECK(q.pwc.empty());
        CHECK(!q.stage1.empty());
        CHECK(!q.stage2.empty());

        auto r = init_params<double>(plan, CpwcVariant::PwcOnly, 1, 1);
        CHECK(!r.pwc.empty());
        CHECK(r.stage1.empty());
        CHECK(r.stage2.empty());
    }
}

TEST_CASE("count_cpwc worked examples") {
    CHECK(count_cpwc(256, 64, CpwcVariant::Full) == 19264);
    CHECK(count_cpwc(256, 64, CpwcVariant::PwcOnly) == 16384);
    CHECK(count_cpwc(256, 64, CpwcVariant::NoStage2) == 18688);
    CHECK(count_cpwc(8, 8, CpwcVariant::Full) == 208);  // 64 + 72 + 72
}

TEST_CASE("count_cpwc equals instantiated weight-bank totals") {
    for (int C = 1; C <= 64; C += 7) {
        for (int Z = 1; Z <= 64; Z += 5) {
            auto plan = plan_groups(C, Z);
            for (CpwcVariant v : all_variants()) {
                auto p = init_params<double>(plan, v, 1, 9);
                CHECK(p.weight_count() == count_cpwc(C, Z, v));
            }
        }
    }
}

TEST_CASE("macs_cpwc worked examples") {
    CHECK(macs_cpwc(256, 64, CpwcVariant::Full, 56, 56) == 60411904LL);
    CHECK(macs_cpwc(7, 3, CpwcVariant::PwcOnly, 1, 1) == 21);
    CHECK(macs_cpwc(256, 64, CpwcVariant::NoStage2, 56, 56) == 3136LL * 18688);
}

TEST_CASE("count and mac formulas reject non-positive arguments") {
    CHECK_THROWS_AS(count_cpwc(0, 4, CpwcVariant::Full), std::invalid_argument);
    CHECK_THROWS_AS(count_cpwc(4, -1, CpwcVariant::Full), std::invalid_argument);
    CHECK_THROWS_AS(macs_cpwc(4, 4, CpwcVariant::Full, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(macs_cpwc(4, 4, CpwcVariant::Full, 5, 0), std::invalid_argument);
}

TEST_CASE("macs_cpwc matches multiplies performed by the fused forward") {
    // Count multiplies by instrumenting through the closed form's terms on a
    // tiny shape: every weight touches each output pixel exactly once.
    const int C = 5, Z = 3, H = 4, W = 6;
    auto plan = plan_groups(C, Z);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 3);
    long long per_pixel = 0;
    per_pixel += static_cast<long long>(p.pwc.size()) / (Z * C) * (C * Z);
    for (const auto& g : p.stage1) {
        per_pixel += static_cast<long long>(g.size());
    }
    per_pixel += static_cast<long long>(p.stage2.size());
    CHECK(macs_cpwc(C, Z, CpwcVariant::Full, H, W) == per_pixel * H * W);
}

TEST_CASE("cpwc_forward single pixel hand example") {
    auto x = Tensor<double>::filled(1, 1, 1, 1, 2.0);
    auto plan = plan_groups(1, 1);
    CpwcParams<double> p;
    p.plan = plan;
    p.variant = CpwcVariant::Full;
    p.stride = 1;
    p.pwc = {1.0};
    p.stage1 = {std::vector<double>(9, 0.0)};
    p.stage1[0][4] = 0.5;  // center tap
    p.stage2.assign(9, 0.0);
    p.stage2[4] = 0.25;

    auto y = cpwc_forward(x, p);
    REQUIRE(y.size() == 1);
    // 2*1 + 2*0.5 + (2*0.5)*0.25
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(3.25).epsilon(1e-15));
    CHECK(max_rel_diff(y, oracle_forward(x, p)) < 1e-15);
}

TEST_CASE("cpwc_forward identity configuration") {
    const int C = 5;
    auto plan = plan_groups(C, C);
    CpwcParams<double> p;
    p.plan = plan;
    p.variant = CpwcVariant::Full;
    p.stride = 1;
    p.pwc.assign(static_cast<std::size_t>(C) * C, 0.0);
    for (int i = 0; i < C; ++i) {
        p.pwc[static_cast<std::size_t>(i) * C + i] = 1.0;
    }
    p.stage1.assign(C, std::vector<double>(9, 0.0));
    p.stage2.assign(static_cast<std::size_t>(C) * 9, 0.0);

    auto x = random_tensor(2, C, 4, 4, 77);
    CHECK(cpwc_forward(x, p) == x);
}

TEST_CASE("cpwc_forward PwcOnly reduces to the 1x1 oracle") {
    const int C = 6, Z = 4;
    auto plan = plan_groups(C, Z);
    auto p = init_params<double>(plan, CpwcVariant::PwcOnly, 2, 5);
    auto x = random_tensor(1, C, 5, 7, 99);
    CHECK(max_rel_diff(cpwc_forward(x, p), oracle_forward(x, p)) < 1e-15);
}

TEST_CASE("cpwc_forward rejects channel mismatch") {
    auto plan = plan_groups(4, 4);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 1);
    auto x = random_tensor(1, 3, 4, 4, 1);
    CHECK_THROWS_AS(cpwc_forward(x, p), std::invalid_argument);
}

TEST_CASE("cpwc_forward decomposes into oracle paths for all variants") {
    const std::pair<int, int> shapes[] = {{4, 4}, {8, 2}, {2, 8}, {10, 3}, {3, 10}};
    for (auto [C, Z] : shapes) {
        for (int stride : {1, 2}) {
            for (CpwcVariant v : all_variants()) {
                auto plan = plan_groups(C, Z);
                auto p = init_params<double>(plan, v, stride,
                                             static_cast<std::uint64_t>(C * 100 + Z + stride));
                auto x = random_tensor(2, C, 6, 5, static_cast<std::uint64_t>(C * 7 + Z));
                CHECK(max_rel_diff(cpwc_forward(x, p), oracle_forward(x, p)) <= 1e-12);
            }
        }
    }
}

TEST_CASE("cpwc_forward single precision decomposition stays within 1e-5") {
    auto plan = plan_groups(10, 3);
    auto pf = init_params<float>(plan, CpwcVariant::Full, 1, 4);
    Tensor<float> xf(1, 10, 5, 5);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : xf.data()) {
        v = static_cast<float>(dist(rng));
    }
    // Promote to double and run the oracle there; the float path must agree
    // to single-precision accuracy.
    CpwcParams<double> pd;
    pd.plan = pf.plan;
    pd.variant = pf.variant;
    pd.stride = pf.stride;
    pd.pwc.assign(pf.pwc.begin(), pf.pwc.end());
    pd.stage1.resize(pf.stage1.size());
    for (std::size_t i = 0; i < pf.stage1.size(); ++i) {
        pd.stage1[i].assign(pf.stage1[i].begin(), pf.stage1[i].end());
    }
    pd.stage2.assign(pf.stage2.begin(), pf.stage2.end());
    Tensor<double> xd(1, 10, 5, 5);
    for (std::size_t i = 0; i < xd.size(); ++i) {
        xd.data()[i] = xf.data()[i];
    }

    auto yf = cpwc_forward(xf, pf);
    auto yd = oracle_forward(xd, pd);
    double m = 0.0;
    for (std::size_t i = 0; i < yf.size(); ++i) {
        const double a = yf.data()[i];
        const double b = yd.data()[i];
        m = std::max(m, std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6}));
    }
    CHECK(m <= 1e-5);
}

TEST_CASE("cpwc_forward is homogeneous in the input") {
    auto plan = plan_groups(6, 9);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 13);
    auto x = random_tensor(1, 6, 5, 5, 14);
    const double alpha = -2.5;
    Tensor<double> ax = x;
    for (auto& v : ax.data()) {
        v *= alpha;
    }
    auto ya = cpwc_forward(ax, p);
    auto y = cpwc_forward(x, p);
    for (auto& v : y.data()) {
        v *= alpha;
    }
    CHECK(max_rel_diff(ya, y) <= 1e-12);
}

TEST_CASE("cpwc_forward output shape follows ceil division") {
    for (int stride : {1, 2, 3}) {
        for (int H : {1, 4, 5, 7}) {
            for (int W : {1, 3, 8}) {
                auto plan = plan_groups(3, 5);
                auto p = init_params<double>(plan, CpwcVariant::Full, stride, 2);
                auto x = random_tensor(2, 3, H, W, 3);
                auto y = cpwc_forward(x, p);
                CHECK(y.n() == 2);
                CHECK(y.c() == 5);
                CHECK(y.h() == (H + stride - 1) / stride);
                CHECK(y.w() == (W + stride - 1) / stride);
            }
        }
    }
}

TEST_CASE("cpwc_backward zero cotangent gives zero gradients") {
    auto plan = plan_groups(4, 3);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 6);
    auto x = random_tensor(1, 4, 4, 4, 7);
    auto y = cpwc_forward(x, p);
    Tensor<double> zeros(y.n(), y.c(), y.h(), y.w());
    auto g = cpwc_backward(x, p, zeros);
    for (double v : g.input.data()) {
        CHECK(v == 0.0);
    }
    for (double v : g.pwc) {
        CHECK(v == 0.0);
    }
    for (const auto& gg : g.stage1) {
        for (double v : gg) {
            CHECK(v == 0.0);
        }
    }
    for (double v : g.stage2) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("cpwc_backward scales linearly with the cotangent") {
    auto plan = plan_groups(5, 2);
    auto p = init_params<double>(plan, CpwcVariant::Full, 2, 16);
    auto x = random_tensor(1, 5, 5, 5, 17);
    auto y = cpwc_forward(x, p);
    auto g1 = cpwc_backward(x, p, y);
    Tensor<double> scaled = y;
    const double alpha = 3.5;
    for (auto& v : scaled.data()) {
        v *= alpha;
    }
    auto g2 = cpwc_backward(x, p, scaled);
    for (std::size_t i = 0; i < g1.pwc.size(); ++i) {
        CHECK(g2.pwc[i] == doctest::Approx(alpha * g1.pwc[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < g1.input.size(); ++i) {
        CHECK(g2.input.data()[i] == doctest::Approx(alpha * g1.input.data()[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < g1.stage2.size(); ++i) {
        CHECK(g2.stage2[i] == doctest::Approx(alpha * g1.stage2[i]).epsilon(1e-12));
    }
}

TEST_CASE("cpwc_backward rejects cotangent shape mismatch") {
    auto plan = plan_groups(4, 3);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 6);
    auto x = random_tensor(1, 4, 4, 4, 7);
    Tensor<double> wrong(1, 3, 5, 4);
    CHECK_THROWS_AS(cpwc_backward(x, p, wrong), std::invalid_argument);
}

TEST_CASE("finite_difference_check passes on a small config") {
    auto plan = plan_groups(4, 3);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 23);
    auto x = random_tensor(1, 4, 5, 5, 24);
    auto report = finite_difference_check(p, x, 1e-5, 1e-6);
    CHECK(report.passed);
    CHECK(report.max_err() < 1e-6);
}

TEST_CASE("finite_difference_check covers every grouping case and stride") {
    const std::pair<int, int> shapes[] = {{4, 4}, {10, 3}, {3, 10}};
    for (auto [C, Z] : shapes) {
        for (int stride : {1, 2}) {
            auto plan = plan_groups(C, Z);
            auto p = init_params<double>(plan, CpwcVariant::Full, stride,
                                         static_cast<std::uint64_t>(C + Z * 31 + stride));
            auto x = random_tensor(2, C, 4, 5, static_cast<std::uint64_t>(C * Z));
            auto report = finite_difference_check(p, x, 1e-5, 1e-6);
            CHECK(report.passed);
        }
    }
}

TEST_CASE("finite_difference_check rejects bad epsilon and single precision") {
    auto plan = plan_groups(4, 3);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 23);
    auto x = random_tensor(1, 4, 4, 4, 24);
    CHECK_THROWS_AS(finite_difference_check(p, x, 0.0, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(finite_difference_check(p, x, 0.5, 1e-6), std::invalid_argument);

    auto pf = init_params<float>(plan, CpwcVariant::Full, 1, 23);
    Tensor<float> xf(1, 4, 4, 4);
    CHECK_THROWS_AS(finite_difference_check(pf, xf, 1e-5, 1e-6), std::invalid_argument);
}

TEST_CASE("corrupted stage-2 gradient fails localized to the stage-2 bank") {
    auto plan = plan_groups(4, 4);
    auto p = init_params<double>(plan, CpwcVariant::Full, 1, 31);
    auto x = random_tensor(1, 4, 5, 5, 32);

    Tensor<double> y = cpwc_forward(x, p);
    for (auto& v : y.data()) {
        v *= 2.0;
    }
    CpwcGrads<double> analytic = cpwc_backward(x, p, y);

    // Transpose each 3x3 stage-2 block: the classic off-by-transpose bug.
    CpwcGrads<double> corrupted = analytic;
    for (int z = 0; z < plan.out_channels; ++z) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                corrupted.stage2[static_cast<std::size_t>(z) * 9 + i * 3 + j] =
                    analytic.stage2[static_cast<std::size_t>(z) * 9 + j * 3 + i];
            }
        }
    }

    auto clean = finite_difference_compare(p, x, 1e-5, 1e-6, analytic);
    CHECK(clean.passed);

    auto report = finite_difference_compare(p, x, 1e-5, 1e-6, corrupted);
    CHECK(!report.passed);
    CHECK(report.stage2_err >= 1e-6);
    CHECK(report.pwc_err < 1e-6);
    CHECK(report.stage1_err < 1e-6);
    CHECK(report.input_err < 1e-6);
}

TEST_CASE("variant names round-trip") {
    for (CpwcVariant v : all_variants()) {
        auto parsed = variant_from_string(to_string(v));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == v);
    }
    CHECK(!variant_from_string("bogus").has_value());
}
