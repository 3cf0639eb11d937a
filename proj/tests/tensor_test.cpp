/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/adam.hpp"
#include "gssc/error.hpp"
#include "gssc/gradcheck.hpp"
#include "gssc/ops.hpp"
#include "gssc/parallel.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

using namespace gssc;
using gssc::testing::random_buffer;

namespace {

    constexpr double kGradTol = 1e-5;
    constexpr int kPoints = 10;

    // Runs grad_check on kPoints random input draws and returns the worst error.
    double worst_error(const DiffKernel& op, const std::vector<Shape>& shapes, double lo = -1.0, double hi = 1.0) {
        std::mt19937_64 rng(17);
        double worst = 0.0;
        for (int p = 0; p < kPoints; ++p) {
            std::vector<NdBuffer> inputs;
            for (const auto& s : shapes)
                inputs.push_back(random_buffer(s, rng, lo, hi));
            worst = std::max(worst, grad_check(op, inputs, 1e-6, 100 + p).max_rel_error);
        }
        return worst;
    }

    bool bit_equal(const NdBuffer& a, const NdBuffer& b) {
        return a.shape() == b.shape() && std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(double)) == 0;
    }

} // namespace

TEST(Matmul, IdentityAndScalar) {
    Tape t;
    auto r = ops::matmul(t.constant(NdBuffer::matrix(2, 2, {1, 0, 0, 1})), t.constant(NdBuffer::matrix(2, 1, {3, 4})));
    EXPECT_EQ(r.value(), NdBuffer::matrix(2, 1, {3, 4}));
    auto s = ops::matmul(t.constant(NdBuffer::matrix(1, 1, {2})), t.constant(NdBuffer::matrix(1, 1, {5})));
    EXPECT_DOUBLE_EQ(s.value()[0], 10.0);
}

TEST(Matmul, MismatchNamesBothShapes) {
    Tape t;
    try {
        ops::matmul(t.constant(NdBuffer({3, 4})), t.constant(NdBuffer({5, 2})));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("3x4"), std::string::npos) << msg;
        EXPECT_NE(msg.find("5x2"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(3);
    std::vector<NdBuffer> in{random_buffer({3, 4}, rng), random_buffer({4, 2}, rng)};
    auto rep = grad_check([](Tape&, std::span<const Var> v) { return ops::matmul(v[0], v[1]); }, in);
    EXPECT_LT(rep.max_rel_error, 1e-6);
    EXPECT_EQ(rep.checked, 20u);
}

TEST(SoftplusClamped, Values) {
    EXPECT_NEAR(ops::softplus_clamped(0.0, 0.1, 10.0), std::log(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(ops::softplus_clamped(-100.0, 0.1, 10.0), 0.1);
    EXPECT_NEAR(ops::softplus_clamped(3.0, 0.1, 10.0), 3.0486, 1e-4);
    EXPECT_NEAR(ops::softplus_clamped(3.0, 0.1, 10.0), std::log1p(std::exp(3.0)), 1e-15);
    EXPECT_DOUBLE_EQ(ops::softplus_clamped(50.0, 0.1, 10.0), 10.0);
}

TEST(SoftplusClamped, RejectsBadBand) {
    EXPECT_THROW(ops::softplus_clamped(0.0, 1.0, 1.0), ConfigError);
    EXPECT_THROW(ops::softplus_clamped(0.0, 2.0, 1.0), ConfigError);
    EXPECT_THROW(ops::softplus_clamped(0.0, 0.0, 1.0), ConfigError);
}

TEST(SoftplusClamped, GradientInsideAndOutsideBand) {
    Tape t;
    auto x = t.leaf(NdBuffer::vector({0.5, -100.0, 100.0}));
    t.backward(ops::sum(ops::softplus_clamped(x, 0.1, 10.0)));
    const auto& g = *t.grad(x);
    EXPECT_NEAR(g[0], 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_EQ(g[2], 0.0);

    std::vector<NdBuffer> in{NdBuffer::vector({0.3, 1.7, -0.8})};
    auto rep = grad_check([](Tape&, std::span<const Var> v) { return ops::softplus_clamped(v[0], 0.1, 10.0); }, in);
    EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(BilinearSample, LatticeMidpointAndClamp) {
    Tape t;
    NdBuffer plane({5, 4, 2});
    for (std::size_t i = 0; i < plane.size(); ++i)
        plane[i] = static_cast<double>(i) * 0.25;
    auto p = t.constant(plane);
    // (u, v) = (2, 3) reads row 3, column 2.
    auto r = ops::sample_bilinear(p, t.constant(NdBuffer::matrix(1, 2, {2, 3})));
    EXPECT_EQ(r.value()[0], plane[(3 * 4 + 2) * 2]);
    EXPECT_EQ(r.value()[1], plane[(3 * 4 + 2) * 2 + 1]);

    auto corner = ops::sample_bilinear(p, t.constant(NdBuffer::matrix(1, 2, {-5, -5})));
    EXPECT_EQ(corner.value()[0], plane[0]);
    EXPECT_EQ(corner.value()[1], plane[1]);

    NdBuffer two({1, 2, 1}, std::vector<double>{0.0, 1.0});
    auto mid = ops::sample_bilinear(t.constant(two), t.constant(NdBuffer::matrix(1, 2, {0.5, 0.0})));
    EXPECT_DOUBLE_EQ(mid.value()[0], 0.5);
}

TEST(BilinearSample, LipschitzWithinTexel) {
    std::mt19937_64 rng(8);
    Tape t;
    const auto plane = random_buffer({6, 6, 3}, rng);
    auto p = t.constant(plane);
    double sup = 0.0;
    for (double x : plane.data())
        sup = std::max(sup, std::abs(x));
    std::uniform_real_distribution<double> cell(0.0, 4.0), frac(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double u0 = std::floor(cell(rng)), v0 = std::floor(cell(rng));
        const double a = frac(rng), b = frac(rng), c = frac(rng);
        auto r1 = ops::sample_bilinear(p, t.constant(NdBuffer::matrix(1, 2, {u0 + a, v0 + c})));
        auto r2 = ops::sample_bilinear(p, t.constant(NdBuffer::matrix(1, 2, {u0 + b, v0 + c})));
        for (std::size_t ch = 0; ch < 3; ++ch)
            EXPECT_LE(std::abs(r1.value()[ch] - r2.value()[ch]), 2.0 * sup * std::abs(a - b) + 1e-12);
    }
}

TEST(ScatterAdd, SingleAndColliding) {
    Tape t;
    auto target = t.constant(NdBuffer({3, 3, 2}, 0.0));
    std::vector<ops::Cell> one{{1, 2}};
    auto r = ops::scatter_add(target, one, t.constant(NdBuffer::matrix(1, 2, {4, 5})));
    for (std::size_t i = 0; i < r.value().size(); ++i)
        EXPECT_EQ(r.value()[i], (i == (1 * 3 + 2) * 2) ? 4.0 : (i == (1 * 3 + 2) * 2 + 1 ? 5.0 : 0.0));

    std::vector<ops::Cell> two{{0, 0}, {0, 0}};
    auto s = ops::scatter_add(target, two, t.constant(NdBuffer::matrix(2, 2, {1.5, 2, 2.25, -1})));
    EXPECT_EQ(s.value()[0], 3.75);
    EXPECT_EQ(s.value()[1], 1.0);
}

TEST(ScatterAdd, PermutationIsBitIdentical) {
    std::mt19937_64 rng(21);
    const std::size_t n = 64;
    std::vector<ops::Cell> cells;
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_real_distribution<double> mag(-1e3, 1e3);
    NdBuffer vals({n, 3});
    for (std::size_t i = 0; i < n; ++i) {
        cells.push_back({pick(rng), pick(rng)});
        for (std::size_t c = 0; c < 3; ++c)
            vals[i * 3 + c] = mag(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    }
    Tape t;
    auto base = random_buffer({3, 3, 3}, rng);
    auto ref = ops::scatter_add(t.constant(base), cells, t.constant(vals)).value();

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<ops::Cell> pc(n);
        NdBuffer pv({n, 3});
        for (std::size_t i = 0; i < n; ++i) {
            pc[i] = cells[perm[i]];
            for (std::size_t c = 0; c < 3; ++c)
                pv[i * 3 + c] = vals[perm[i] * 3 + c];
        }
        auto out = ops::scatter_add(t.constant(base), pc, t.constant(pv)).value();
        EXPECT_TRUE(bit_equal(out, ref)) << "permutation " << trial;
    }
}

TEST(ScatterAdd, BadIndexNamesEntry) {
    Tape t;
    std::vector<ops::Cell> cells{{0, 0}, {3, 1}};
    try {
        ops::scatter_add(t.constant(NdBuffer({3, 3, 1})), cells, t.constant(NdBuffer({2, 1})));
        FAIL() << "expected IndexError";
    } catch (const IndexError& e) {
        EXPECT_NE(std::string(e.what()).find("(3, 1)"), std::string::npos) << e.what();
    }
}

TEST(ScatterAdd, GradientRoutesToValues) {
    std::vector<ops::Cell> cells{{0, 1}, {2, 2}, {0, 1}};
    double worst = worst_error(
        [&](Tape&, std::span<const Var> v) { return ops::scatter_add(v[0], cells, v[1]); }, {{3, 3, 2}, {3, 2}});
    EXPECT_LE(worst, kGradTol);
}

TEST(GradCheck, ConstantOpHasZeroError) {
    std::vector<NdBuffer> in{NdBuffer::vector({1, 2, 3})};
    auto rep = grad_check([](Tape& t, std::span<const Var>) { return t.constant(NdBuffer::vector({4, 5})); }, in);
    EXPECT_EQ(rep.max_rel_error, 0.0);
}

TEST(GradCheck, NonFiniteForwardThrows) {
    std::vector<NdBuffer> in{NdBuffer::vector({-1.0})};
    EXPECT_THROW(grad_check([](Tape&, std::span<const Var> v) { return ops::log(v[0]); }, in), NumericError);
}

TEST(GradCheck, DetectsWrongGradient) {
    // A kernel whose recorded VJP is off by a factor of two must be flagged.
    std::vector<NdBuffer> in{NdBuffer::vector({0.4, -0.7})};
    auto rep = grad_check(
        [](Tape& t, std::span<const Var> v) {
            Var x = v[0];
            NdBuffer out = x.value();
            for (auto& e : out.storage())
                e = e * e;
            return t.record("bad_square", std::move(out), {x}, [x](Tape& tt, const NdBuffer& g) {
                if (NdBuffer* gx = tt.grad_slot(x))
                    for (std::size_t i = 0; i < g.size(); ++i)
                        (*gx)[i] += 4.0 * tt.value(x)[i] * g[i];
            });
        },
        in);
    EXPECT_GT(rep.max_rel_error, 0.1);
}

struct OpCase {
    const char* name;
    DiffKernel op;
    std::vector<Shape> shapes;
    double lo = -1.0;
    double hi = 1.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, WithinTolerance) {
    const auto& c = GetParam();
    EXPECT_LE(worst_error(c.op, c.shapes, c.lo, c.hi), kGradTol) << c.name;
}

namespace {
    std::vector<OpCase> op_cases() {
        using V = std::span<const Var>;
        return {
            {"matmul", [](Tape&, V v) { return ops::matmul(v[0], v[1]); }, {{4, 3}, {3, 5}}},
            {"add", [](Tape&, V v) { return ops::add(v[0], v[1]); }, {{3, 2}, {3, 2}}},
            {"sub", [](Tape&, V v) { return ops::sub(v[0], v[1]); }, {{3, 2}, {3, 2}}},
            {"mul", [](Tape&, V v) { return ops::mul(v[0], v[1]); }, {{3, 2}, {3, 2}}},
            {"scale", [](Tape&, V v) { return ops::scale(v[0], -2.5); }, {{4}}},
            {"add_scalar", [](Tape&, V v) { return ops::add_scalar(v[0], 0.3); }, {{4}}},
            {"add_bias", [](Tape&, V v) { return ops::add_bias(v[0], v[1]); }, {{2, 3, 4}, {4}}},
            {"mul_rows", [](Tape&, V v) { return ops::mul_rows(v[0], v[1]); }, {{5, 3}, {5}}},
            {"concat_cols", [](Tape&, V v) { return ops::concat_cols({v[0], v[1]}); }, {{3, 2}, {3, 4}}},
            {"slice_cols", [](Tape&, V v) { return ops::slice_cols(v[0], 1, 2); }, {{3, 4}}},
            {"reshape", [](Tape&, V v) { return ops::reshape(v[0], {6, 2}); }, {{3, 4}}},
            {"sum", [](Tape&, V v) { return ops::sum(v[0]); }, {{3, 4}}},
            {"mean", [](Tape&, V v) { return ops::mean(v[0]); }, {{3, 4}}},
            {"dot", [](Tape&, V v) { return ops::dot(v[0], NdBuffer::matrix(2, 2, {1, -2, 3, 0.5})); }, {{2, 2}}},
            {"sigmoid", [](Tape&, V v) { return ops::sigmoid(v[0]); }, {{6}}, -4.0, 4.0},
            {"silu", [](Tape&, V v) { return ops::silu(v[0]); }, {{6}}, -4.0, 4.0},
            {"exp", [](Tape&, V v) { return ops::exp(v[0]); }, {{6}}},
            {"log", [](Tape&, V v) { return ops::log(v[0]); }, {{6}}, 0.2, 3.0},
            {"abs", [](Tape&, V v) { return ops::abs(v[0]); }, {{6}}, 0.1, 2.0},
            {"square", [](Tape&, V v) { return ops::square(v[0]); }, {{6}}},
            {"softplus_clamped", [](Tape&, V v) { return ops::softplus_clamped(v[0], 1e-3, 50.0); }, {{6}}, -3.0, 3.0},
            {"softmax_rows", [](Tape&, V v) { return ops::softmax_rows(v[0]); }, {{3, 5}}, -2.0, 2.0},
            {"log_softmax_rows", [](Tape&, V v) { return ops::log_softmax_rows(v[0]); }, {{3, 5}}, -2.0, 2.0},
            {"gather_rows", [](Tape&, V v) { return ops::gather_rows(v[0], {2, 0, 2, 1, 2}); }, {{3, 4}}},
            {"scatter_add_rows",
             [](Tape&, V v) { return ops::scatter_add_rows(v[0], {1, 3, 1, 0}, v[1]); },
             {{4, 2}, {4, 2}}},
            {"sample_bilinear", [](Tape&, V v) { return ops::sample_bilinear(v[0], v[1]); }, {{4, 5, 3}, {6, 2}}, 0.05,
             2.95},
            {"group_weighted_sum", [](Tape&, V v) { return ops::group_weighted_sum(v[0], v[1]); }, {{6, 3}, {2, 3}}},
            {"weighted_sum",
             [](Tape&, V v) {
                 return ops::weighted_sum({NdBuffer::matrix(2, 2, {1, 2, 3, 4}), NdBuffer::matrix(2, 2, {-1, 0, 5, 2})},
                                          v[0]);
             },
             {{2}}},
        };
    }
} // namespace

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_cases()),
                         [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Softmax, RowsSumToOne) {
    std::mt19937_64 rng(4);
    Tape t;
    auto s = ops::softmax_rows(t.constant(random_buffer({20, 7}, rng, -30.0, 30.0)));
    for (std::size_t r = 0; r < 20; ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < 7; ++c)
            total += s.value().at(r, c);
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Tape, SharedInputAccumulatesBothPaths) {
    Tape t;
    auto x = t.leaf(NdBuffer::vector({3.0}));
    auto y = ops::add(ops::mul(x, x), ops::scale(x, 2.0));  // x^2 + 2x
    t.backward(ops::sum(y));
    EXPECT_DOUBLE_EQ((*t.grad(x))[0], 8.0);
}

TEST(Tape, BackwardNeedsScalarRoot) {
    Tape t;
    auto x = t.leaf(NdBuffer::vector({1.0, 2.0}));
    EXPECT_THROW(t.backward(ops::scale(x, 2.0)), DimensionError);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
    std::mt19937_64 rng(5);
    const auto a = random_buffer({300, 40}, rng);
    const auto b = random_buffer({40, 30}, rng);
    std::vector<std::int32_t> idx(900);
    for (auto& i : idx)
        i = static_cast<std::int32_t>(rng() % 300);
    auto run = [&] {
        Tape t;
        auto va = t.leaf(a);
        auto vb = t.leaf(b);
        auto y = ops::gather_rows(ops::silu(ops::matmul(va, vb)), idx);
        t.backward(ops::sum(ops::square(y)));
        return std::vector<NdBuffer>{y.value(), *t.grad(va), *t.grad(vb)};
    };
    set_num_threads(1);
    auto one = run();
    set_num_threads(4);
    auto four = run();
    set_num_threads(1);
    for (std::size_t i = 0; i < one.size(); ++i)
        EXPECT_TRUE(bit_equal(one[i], four[i])) << i;
}

TEST(Parallel, RejectsNonPositiveThreads) {
    EXPECT_THROW(set_num_threads(0), ConfigError);
}

TEST(Adam, ZeroGradientOnlyDecaysMoments) {
    std::vector<NdBuffer> p{NdBuffer::vector({1.0, -2.0})};
    std::vector<NdBuffer> g{NdBuffer::vector({0.0, 0.0})};
    OptimizerState st;
    adam_step(p, g, st);
    EXPECT_EQ(p[0], NdBuffer::vector({1.0, -2.0}));
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, DescendsOnSquare) {
    std::vector<NdBuffer> p{NdBuffer::vector({1.0})};
    OptimizerState st;
    st.lr = 0.1;
    std::vector<NdBuffer> g{NdBuffer::vector({2.0 * p[0][0]})};
    adam_step(p, g, st);
    EXPECT_LT(p[0][0], 1.0);

    for (int i = 1; i < 200; ++i) {
        g[0][0] = 2.0 * p[0][0];
        adam_step(p, g, st);
    }
    EXPECT_LT(std::abs(p[0][0]), 1e-2);
    EXPECT_EQ(st.step, 200);
}

TEST(Adam, ShapeMismatchThrows) {
    std::vector<NdBuffer> p{NdBuffer::vector({1.0, 2.0})};
    std::vector<NdBuffer> g{NdBuffer::vector({1.0})};
    OptimizerState st;
    EXPECT_THROW(adam_step(p, g, st), DimensionError);
}

TEST(NdBuffer, RejectsEmptyExtentAndSizeMismatch) {
    EXPECT_THROW(NdBuffer(Shape{2, 0}), DimensionError);
    EXPECT_THROW(NdBuffer(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}
