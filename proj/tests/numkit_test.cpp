#include "latentcast/numkit/gradcheck.hpp"
#include "latentcast/numkit/io.hpp"
#include "latentcast/numkit/optim.hpp"
#include "support/op_catalog.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace latentcast::numkit;

namespace {

Tensor make(Shape shape, std::vector<float> values) { return Tensor(std::move(shape), std::move(values)); }

}  // namespace

TEST(Tensor, RejectsMismatchedDataLength) { EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError); }

TEST(Ops, MatmulWithIdentityReturnsOperand) {
    Graph g;
    auto eye = g.constant(make({2, 2}, {1, 0, 0, 1}));
    auto a = g.constant(make({2, 2}, {3.5f, -1, 2, 7}));
    EXPECT_EQ(matmul(eye, a).value(), a.value());
}

TEST(Ops, ShapeErrorNamesOpAndShapes) {
    Graph g;
    auto a = g.constant(Tensor({2, 3}));
    auto b = g.constant(Tensor({4, 5}));
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
        EXPECT_NE(msg.find("[4, 5]"), std::string::npos);
    }
    EXPECT_THROW(add(a, b), ShapeError);
    EXPECT_THROW(attention(g.constant(Tensor({1, 2, 6})), g.constant(Tensor({1, 3, 6})),
                           g.constant(Tensor({1, 3, 6})), 4),
                 ShapeError);
}

TEST(Ops, LayerNormOfConstantRowIsZero) {
    Graph g;
    auto x = g.constant(Tensor({1, 5}, 3.25f));
    auto y = layer_norm(x, g.constant(Tensor({5}, 1.0f)), g.constant(Tensor({5})));
    for (float v : y.value().data()) EXPECT_EQ(v, 0.0f);
}

TEST(Ops, LayerNormRowsAreStandardizedAndShiftInvariant) {
    Rng rng(11);
    auto x = rng.normal_tensor<double>({6, 16}, 3.0);
    auto shifted = x;
    for (std::int64_t r = 0; r < 6; ++r) {
        for (std::int64_t c = 0; c < 16; ++c) shifted[r * 16 + c] += 10.0 * static_cast<double>(r + 1);
    }
    BasicGraph<double> g;
    auto one = g.constant(TensorD({16}, 1.0));
    auto zero = g.constant(TensorD({16}));
    auto y = layer_norm(g.constant(x), one, zero);
    auto ys = layer_norm(g.constant(shifted), one, zero);
    const auto m = y.value().matrix();
    for (int r = 0; r < 6; ++r) {
        EXPECT_NEAR(m.row(r).mean(), 0.0, 1e-5);
        EXPECT_NEAR((m.row(r).array() - m.row(r).mean()).square().mean(), 1.0, 1e-5);
    }
    EXPECT_LT((y.value().array() - ys.value().array()).abs().maxCoeff(), 1e-5);
}

TEST(Ops, SingleKeyAttentionReturnsValue) {
    Rng rng(3);
    Graph g;
    auto q = g.constant(rng.normal_tensor<float>({2, 3, 8}));
    auto k = g.constant(rng.normal_tensor<float>({2, 1, 8}));
    auto v = g.constant(rng.normal_tensor<float>({2, 1, 8}));
    auto out = attention(q, k, v, 2).value();
    for (std::int64_t b = 0; b < 2; ++b) {
        for (std::int64_t i = 0; i < 3; ++i) {
            for (std::int64_t c = 0; c < 8; ++c) EXPECT_EQ(out[(b * 3 + i) * 8 + c], v.value()[b * 8 + c]);
        }
    }
}

TEST(Backward, SumGivesOnes) {
    Graph g;
    auto x = g.leaf(make({3}, {1, -2, 5}));
    g.backward(sum(x));
    for (float v : g.grad(x).data()) EXPECT_EQ(v, 1.0f);
}

TEST(Backward, SumOfSquaresGivesTwoX) {
    Graph g;
    auto x = g.leaf(make({4}, {1, -2, 0.5f, 3}));
    g.backward(sum(mul(x, x)));
    for (std::int64_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(g.grad(x)[i], 2.0f * x.value()[i]);
}

TEST(Backward, NonScalarLossIsAnError) {
    Graph g;
    auto x = g.leaf(Tensor({3}));
    EXPECT_THROW(g.backward(x), ShapeError);
}

TEST(Backward, RepeatedCallsAfterZeroingMatch) {
    Rng rng(5);
    ParamStore store;
    Mlp<float> mlp(store, "mlp", 6, 12, rng);
    Graph g;
    auto x = g.constant(rng.normal_tensor<float>({4, 6}));
    auto loss = mean(mul(mlp(x), mlp(x)));
    store.zero_grad();
    g.backward(loss);
    std::vector<Tensor> first;
    for (auto& [_, p] : store) first.push_back(p.grad);
    store.zero_grad();
    g.backward(loss);
    std::size_t i = 0;
    for (auto& [_, p] : store) EXPECT_EQ(p.grad, first[i++]);
}

TEST(GradCheck, QuadraticForm) {
    Rng rng(21);
    const auto a = rng.normal_tensor<double>({5, 5});
    const auto point = rng.normal_tensor<double>({1, 5});
    double err = grad_check<double>(
        [&](BasicGraph<double>& g, BasicVar<double> x) { return sum(mul(matmul(x, g.constant(a)), x)); }, point, 1e-3);
    EXPECT_LT(err, 1e-6);
}

TEST(GradCheck, LayerNormComposedWithSum) {
    Rng rng(8);
    const auto point = rng.normal_tensor<double>({3, 7});
    const auto weights = rng.normal_tensor<double>({3, 7});
    const auto gamma = rng.normal_tensor<double>({7});
    auto ln_sum = [&](BasicGraph<double>& g, BasicVar<double> x) {
        return sum(layer_norm(x, g.constant(gamma), g.constant(TensorD({7}))));
    };
    EXPECT_LT(grad_check<double>(ln_sum, point, 1e-3), 1e-4);
    auto ln_weighted = [&](BasicGraph<double>& g, BasicVar<double> x) {
        return sum(mul(layer_norm(x, g.constant(TensorD({7}, 1.5)), g.constant(TensorD({7}, 0.2))),
                       g.constant(weights)));
    };
    EXPECT_LT(grad_check<double>(ln_weighted, point, 1e-3), 1e-4);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
    const TensorD point({4}, 2.0);
    double err = grad_check<double>(
        [](BasicGraph<double>& g, BasicVar<double> x) { return sum(g.constant(TensorD({2}, 3.0))); }, point, 1e-3);
    EXPECT_EQ(err, 0.0);
}

TEST(GradCheck, NonFiniteIsReportedAsFailure) {
    const TensorD point({2}, 1.0);
    double err = grad_check<double>(
        [](BasicGraph<double>&, BasicVar<double> x) { return sum(scale(x, std::numeric_limits<double>::quiet_NaN())); },
        point, 1e-3);
    EXPECT_TRUE(std::isinf(err));
}

TEST(GradCheck, EveryOpAtTenRandomPoints) {
    for (const auto& entry : latentcast::testing::op_catalog()) {
        for (std::uint64_t trial = 0; trial < 10; ++trial) {
            Rng rng(mix_seed(1000, trial));
            EXPECT_LT(entry.check(rng), 1e-3) << entry.name << " trial " << trial;
        }
    }
}

TEST(GradCheck, TwoLayerNetworkOverEveryParameter) {
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        Rng rng(mix_seed(77, trial));
        EXPECT_LT(latentcast::testing::two_layer_net_error(rng), 1e-3);
    }
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    Rng rng(1);
    ParamStore store;
    auto& p = store.create("w", rng.normal_tensor<float>({3, 3}));
    const Tensor before = p.value;
    OptimizerState state;
    store.zero_grad();
    adam_step(state, store);
    EXPECT_EQ(p.value, before);
    EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
    ParamStore store;
    auto& p = store.create("w", make({4}, {1, 1, 1, 1}));
    p.grad = make({4}, {0.3f, -2.0f, 0.0f, 1e-3f});
    OptimizerState state;
    state.config.learning_rate = 0.01;
    adam_step(state, store);
    EXPECT_NEAR(p.value[0], 1.0f - 0.01f, 1e-6);
    EXPECT_NEAR(p.value[1], 1.0f + 0.01f, 1e-6);
    EXPECT_EQ(p.value[2], 1.0f);
    EXPECT_NEAR(p.value[3], 1.0f - 0.01f, 1e-4);
}

TEST(Adam, ConvexQuadraticLossDropsHundredfold) {
    Rng rng(4);
    ParamStore store;
    auto& w = store.create("w", rng.normal_tensor<float>({1, 8}, 3.0));
    const Tensor target = rng.normal_tensor<float>({1, 8});
    OptimizerState state;
    state.config.learning_rate = 0.1;
    auto loss_value = [&] {
        Graph g;
        return mse(g.parameter(w), target).value().item();
    };
    const float initial = loss_value();
    for (int i = 0; i < 200; ++i) {
        store.zero_grad();
        Graph g;
        g.backward(mse(g.parameter(w), target));
        adam_step(state, store);
    }
    EXPECT_LT(loss_value(), initial / 100.0f);
}

TEST(Adam, NanGradientSignalsDivergence) {
    ParamStore store;
    auto& p = store.create("w", Tensor({2}));
    p.grad = make({2}, {0.0f, std::numeric_limits<float>::quiet_NaN()});
    OptimizerState state;
    EXPECT_THROW(adam_step(state, store), TrainingDiverged);
}

TEST(Determinism, SameSeedsGiveBitIdenticalForwardAndBackward) {
    auto run = [] {
        Rng rng(99);
        ParamStore store;
        SelfAttentionBlock<float> block(store, "blk", 16, 4, rng);
        Graph g;
        auto x = g.constant(rng.normal_tensor<float>({2, 5, 16}));
        auto y = block(x);
        store.zero_grad();
        g.backward(mean(mul(y, y)));
        std::vector<Tensor> out{y.value()};
        for (auto& [_, p] : store) out.push_back(p.grad);
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(TensorIo, RoundTripIsByteIdentical) {
    Rng rng(2);
    const Tensor t = rng.normal_tensor<float>({2, 3, 4});
    const std::string bytes = encode_tensor(t);
    EXPECT_EQ(decode_tensor(bytes), t);
    EXPECT_EQ(encode_tensor(decode_tensor(bytes)), bytes);
    EXPECT_EQ(bytes.substr(0, 4), "LTEN");
    EXPECT_EQ(bytes.size(), 4u + 4u + 1u + 1u + 3u * 8u + 24u * 4u);
}

TEST(TensorIo, CorruptionIsReported) {
    const std::string bytes = encode_tensor(Tensor({2, 2}, 1.0f));
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_tensor(bad_magic), FormatError);
    std::string bad_version = bytes;
    bad_version[4] = 7;
    EXPECT_THROW(decode_tensor(bad_version), FormatError);
    EXPECT_THROW(decode_tensor(bytes.substr(0, bytes.size() - 3)), FormatError);
    std::string bad_dtype = bytes;
    bad_dtype[8] = 3;
    EXPECT_THROW(decode_tensor(bad_dtype), FormatError);
}

TEST(Checkpoint, RoundTripRestoresValuesAndMeta) {
    const auto dir = std::filesystem::temp_directory_path() / "latentcast_ckpt_test";
    std::filesystem::remove_all(dir);
    Rng rng(6);
    ParamStore a;
    Mlp<float> ma(a, "m", 4, 8, rng);
    save_checkpoint(dir, a, {{"kind", "test"}});
    Rng other(7);
    ParamStore b;
    Mlp<float> mb(b, "m", 4, 8, other);
    EXPECT_NE(checksum(a), checksum(b));
    auto meta = load_checkpoint(dir, b);
    EXPECT_EQ(meta.at("kind"), "test");
    EXPECT_EQ(checksum(a), checksum(b));
    ParamStore c;
    Mlp<float> mc(c, "m", 4, 9, other);
    EXPECT_THROW(load_checkpoint(dir, c), ShapeError);
    std::filesystem::remove_all(dir);
}
