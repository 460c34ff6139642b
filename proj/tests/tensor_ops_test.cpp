#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "wnet/models.hpp"
#include "wnet/ops.hpp"

using namespace wnet;

TEST_CASE("conv2d with identity-embedding 1x1 weights reproduces the input") {
    Rng rng(1);
    Tensor<float> x(1, 4, 4, 3);
    x.fill_uniform(rng, -1.0, 1.0);
    Tensor<float> w(1, 1, 3, 3);
    for (int c = 0; c < 3; ++c) w.at(0, 0, c, c) = 1.0f;
    Tensor<float> y = conv2d_fw(x, w, 1);
    REQUIRE(testutil::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d all-ones 1x1 kernel sums the channels") {
    Tensor<float> x(1, 2, 2, 2);
    x.fill(1.0f);
    Tensor<float> w(1, 1, 2, 1);
    w.fill(1.0f);
    Tensor<float> y = conv2d_fw(x, w, 1);
    for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(y[i] == 2.0f);
}

TEST_CASE("conv2d matches the naive nested-loop oracle on a 5x5x3 input") {
    Rng rng(2);
    Tensor<float> x(1, 5, 5, 3);
    x.fill_uniform(rng, -1.0, 1.0);
    Tensor<float> w(3, 3, 3, 4);
    w.fill_uniform(rng, -0.5, 0.5);
    Tensor<float> y = conv2d_fw(x, w, 1);
    REQUIRE(testutil::max_abs_diff(y, testutil::naive_conv2d(x, w, 1)) < 1e-6);
}

TEST_CASE("conv2d and depthwise agree with naive oracles over shapes N<=8, D<=16") {
    Rng rng(3);
    for (int n : {1, 3, 5, 8}) {
        for (int d : {1, 2, 5, 16}) {
            for (int k : {1, 3}) {
                for (int stride : {1, 2}) {
                    Tensor<float> x(2, n, n, d);
                    x.fill_uniform(rng, -1.0, 1.0);
                    Tensor<float> w(k, k, d, 3);
                    w.fill_uniform(rng, -0.7, 0.7);
                    REQUIRE(testutil::max_abs_diff(conv2d_fw(x, w, stride), testutil::naive_conv2d(x, w, stride)) <=
                            1e-5);
                    Tensor<float> dw(k, k, d, 1);
                    dw.fill_uniform(rng, -0.7, 0.7);
                    REQUIRE(testutil::max_abs_diff(depthwise_conv2d_fw(x, dw, stride),
                                                   testutil::naive_depthwise(x, dw, stride)) <= 1e-5);
                }
            }
        }
    }
}

TEST_CASE("depthwise conv with a center-one kernel is the identity") {
    Rng rng(4);
    Tensor<float> x(2, 4, 4, 5);
    x.fill_uniform(rng, -2.0, 2.0);
    Tensor<float> w(3, 3, 5, 1);
    for (int c = 0; c < 5; ++c) w.at(1, 1, c, 0) = 1.0f;
    REQUIRE(testutil::max_abs_diff(depthwise_conv2d_fw(x, w, 1), x) == 0.0);
}

TEST_CASE("depthwise parameter count is 9D") {
    LayerDesc d;
    d.kind = LayerKind::dwconv;
    d.kernel = 3;
    d.in_c = d.out_c = 32;
    REQUIRE(count_params(d) == 288);
}

TEST_CASE("conv2d rejects mismatched channel counts naming both shapes") {
    Tensor<float> x(1, 4, 4, 3);
    Tensor<float> w(1, 1, 5, 2);
    REQUIRE_THROWS_WITH(conv2d_fw(x, w, 1), Catch::Matchers::ContainsSubstring("1x4x4x3") &&
                                                Catch::Matchers::ContainsSubstring("1x1x5x2"));
    Tensor<float> dw(3, 3, 4, 1);
    REQUIRE_THROWS_AS(depthwise_conv2d_fw(x, dw, 1), std::invalid_argument);
}

TEST_CASE("relu6 clamps to [0, 6]") {
    Tensor<float> x(1, 1, 1, 3);
    x[0] = -1.0f;
    x[1] = 3.0f;
    x[2] = 9.0f;
    Tensor<float> y = relu6_fw(x);
    REQUIRE(y[0] == 0.0f);
    REQUIRE(y[1] == 3.0f);
    REQUIRE(y[2] == 6.0f);
}

TEST_CASE("batch norm with unit affine leaves normalized input in place") {
    // construct an exactly zero-mean, unit-variance channel
    Tensor<float> x(1, 1, 2, 1);
    x[0] = 1.0f;
    x[1] = -1.0f;
    Tensor<float> gamma(1, 1, 1, 1), beta(1, 1, 1, 1);
    gamma.fill(1.0f);
    std::vector<double> rm(1, 0.0), rv(1, 1.0);
    Tensor<float> y = batch_norm_fw(x, gamma, beta, rm, rv, true, 0.9, 1e-5, (BatchNormCache<float>*)nullptr);
    REQUIRE(testutil::max_abs_diff(x, y) < 1e-4);
}

TEST_CASE("batch norm rejects affine parameters of the wrong width") {
    Tensor<float> x(1, 2, 2, 3);
    Tensor<float> gamma(1, 1, 1, 2), beta(1, 1, 1, 2);
    std::vector<double> rm(2), rv(2);
    REQUIRE_THROWS_AS(batch_norm_fw(x, gamma, beta, rm, rv, true, 0.9, 1e-5, (BatchNormCache<float>*)nullptr),
                      std::invalid_argument);
}

TEST_CASE("softmax cross entropy of uniform logits is ln(num_classes)") {
    Tensor<float> logits(2, 1, 1, 10);
    logits.fill(0.37f);
    Tensor<float> probs;
    const double loss = softmax_cross_entropy_fw(logits, {3, 7}, probs);
    REQUIRE(loss == Catch::Approx(std::log(10.0)).epsilon(1e-6));
}

TEST_CASE("global average pool averages each channel over space") {
    Tensor<float> x(1, 2, 2, 2);
    for (int i = 0; i < 4; ++i) {
        x[2 * i] = static_cast<float>(i);
        x[2 * i + 1] = 1.0f;
    }
    Tensor<float> y = global_avg_pool_fw(x);
    REQUIRE(y.at(0, 0, 0, 0) == Catch::Approx(1.5));
    REQUIRE(y.at(0, 0, 0, 1) == Catch::Approx(1.0));
}

TEST_CASE("same-padding geometry reproduces the 224 to 7 progression") {
    int extent = 224;
    for (int expected : {112, 56, 28, 14, 7}) {
        ConvGeom g = conv_geometry(extent, extent, 3, 2);
        REQUIRE(g.out_h == expected);
        extent = g.out_h;
    }
    REQUIRE(conv_geometry(32, 32, 3, 1).out_h == 32);
    REQUIRE(conv_geometry(32, 32, 3, 1).pad_top == 1);
}

TEST_CASE("the same seeded computation twice is bit-identical") {
    auto run = [] {
        ModelPlan plan = plan_model(tiny_config(8, 2, 16));
        Model<float> model(plan, 42);
        Rng rng(7);
        Tensor<float> x(2, 8, 8, 3);
        x.fill_uniform(rng, -1.0, 1.0);
        return model.infer(x);
    };
    Tensor<float> a = run();
    Tensor<float> b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}
