#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "wnet/layers.hpp"
#include "wnet/ops.hpp"

using namespace wnet;

TEST_CASE("loss = sum(x) gives an all-ones gradient") {
    Rng rng(1);
    Tensor<float> x(2, 3, 3, 4);
    x.fill_uniform(rng, -1.0, 1.0);
    auto xin = make_leaf(x, true);
    Tape<float> tape;
    auto loss = reduce_sum(&tape, xin);
    tape.backward(loss);
    for (std::size_t i = 0; i < xin->grad().size(); ++i) REQUIRE(xin->grad()[i] == 1.0f);
}

TEST_CASE("1x1 conv weight gradient under a sum loss is the channel-summed input") {
    Rng rng(2);
    Tensor<float> x(1, 3, 3, 2);
    x.fill_uniform(rng, -1.0, 1.0);
    Tensor<float> w(1, 1, 2, 3);
    w.fill_uniform(rng, -1.0, 1.0);
    auto xin = make_leaf(x);
    auto win = make_leaf(w, true);
    Tape<float> tape;
    auto loss = reduce_sum(&tape, conv2d(&tape, xin, win, 1));
    tape.backward(loss);
    // dL/dw[ci][co] = sum over positions of x[.., ci]
    for (int ci = 0; ci < 2; ++ci) {
        double expected = 0.0;
        for (int h = 0; h < 3; ++h)
            for (int ww = 0; ww < 3; ++ww) expected += x.at(0, h, ww, ci);
        for (int co = 0; co < 3; ++co)
            REQUIRE(win->grad().at(0, 0, ci, co) == Catch::Approx(expected).margin(1e-5));
    }
}

TEST_CASE("every primitive matches finite differences") {
    using D = double;
    Rng rng(3);

    SECTION("conv2d, stride 2") {
        Tensor<D> x(2, 5, 5, 3);
        x.fill_uniform(rng, -1.0, 1.0);
        Tensor<D> w(3, 3, 3, 4);
        w.fill_uniform(rng, -0.5, 0.5);
        auto xin = make_leaf(x, true);
        auto win = make_leaf(w, true);
        auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, conv2d(t, xin, win, 2), 10); };
        REQUIRE(testutil::fd_max_rel_err<D>({xin, win}, fwd) <= 1e-3);
    }
    SECTION("depthwise conv, stride 2") {
        Tensor<D> x(2, 5, 5, 4);
        x.fill_uniform(rng, -1.0, 1.0);
        Tensor<D> w(3, 3, 4, 1);
        w.fill_uniform(rng, -0.5, 0.5);
        auto xin = make_leaf(x, true);
        auto win = make_leaf(w, true);
        auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, depthwise_conv2d(t, xin, win, 2), 11); };
        REQUIRE(testutil::fd_max_rel_err<D>({xin, win}, fwd) <= 1e-3);
    }
    SECTION("batch norm, training mode") {
        Tensor<D> x(2, 3, 3, 4);
        x.fill_uniform(rng, -1.0, 1.0);
        Tensor<D> gamma(1, 1, 1, 4), beta(1, 1, 1, 4);
        gamma.fill_uniform(rng, 0.5, 1.5);
        beta.fill_uniform(rng, -0.3, 0.3);
        auto xin = make_leaf(x, true);
        auto gin = make_leaf(gamma, true);
        auto bin = make_leaf(beta, true);
        std::vector<double> rm(4, 0.0), rv(4, 1.0);
        auto fwd = [&](Tape<D>* t) {
            return testutil::projected_sum(t, batch_norm(t, xin, gin, bin, rm, rv, true), 12);
        };
        REQUIRE(testutil::fd_max_rel_err<D>({xin, gin, bin}, fwd) <= 1e-3);
    }
    SECTION("relu6") {
        Tensor<D> x(2, 3, 3, 4);
        x.fill_uniform(rng, -2.0, 8.0);
        auto xin = make_leaf(x, true);
        auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, relu6(t, xin), 13); };
        REQUIRE(testutil::fd_max_rel_err<D>({xin}, fwd) <= 1e-3);
    }
    SECTION("global average pool") {
        Tensor<D> x(2, 4, 4, 3);
        x.fill_uniform(rng, -1.0, 1.0);
        auto xin = make_leaf(x, true);
        auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, global_avg_pool(t, xin), 14); };
        REQUIRE(testutil::fd_max_rel_err<D>({xin}, fwd) <= 1e-3);
    }
    SECTION("softmax cross entropy") {
        Tensor<D> logits(3, 1, 1, 5);
        logits.fill_uniform(rng, -2.0, 2.0);
        auto lin = make_leaf(logits, true);
        std::vector<int> labels{0, 3, 4};
        auto fwd = [&](Tape<D>* t) { return softmax_cross_entropy(t, lin, labels); };
        REQUIRE(testutil::fd_max_rel_err<D>({lin}, fwd) <= 1e-3);
    }
    SECTION("dfwt, both sign conventions") {
        for (HaarSign sign : {HaarSign::algorithm2, HaarSign::matrix}) {
            Tensor<D> x(2, 3, 3, 8);
            x.fill_uniform(rng, -1.0, 1.0);
            auto xin = make_leaf(x, true);
            auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, dfwt(t, xin, 3, sign), 15); };
            REQUIRE(testutil::fd_max_rel_err<D>({xin}, fwd) <= 1e-3);
        }
    }
    SECTION("residual add") {
        Tensor<D> x(1, 2, 2, 3), y(1, 2, 2, 3);
        x.fill_uniform(rng, -1.0, 1.0);
        y.fill_uniform(rng, -1.0, 1.0);
        auto a = make_leaf(x, true);
        auto b = make_leaf(y, true);
        auto fwd = [&](Tape<D>* t) { return testutil::projected_sum(t, add(t, a, b), 16); };
        REQUIRE(testutil::fd_max_rel_err<D>({a, b}, fwd) <= 1e-3);
    }
    SECTION("channel slice and concat") {
        Tensor<D> x(2, 2, 2, 6);
        x.fill_uniform(rng, -1.0, 1.0);
        auto xin = make_leaf(x, true);
        auto fwd = [&](Tape<D>* t) {
            auto lo = slice_channels(t, xin, 0, 2);
            auto hi = slice_channels(t, xin, 2, 4);
            return testutil::projected_sum(t, concat_channels(t, {hi, lo}), 17);
        };
        REQUIRE(testutil::fd_max_rel_err<D>({xin}, fwd) <= 1e-3);
    }
}

TEST_CASE("composed conv-bn-relu6 block passes a float32 finite-difference check") {
    Rng rng(5);
    Conv2dLayer<float> conv(3, 8, 3, 1, rng);
    BatchNormLayer<float> bn(8);
    Tensor<float> x(2, 4, 4, 3);
    x.fill_uniform(rng, -1.0, 1.0);
    auto xin = make_leaf(x);
    std::vector<ParamRef<float>> params;
    conv.collect_params("conv", params);
    bn.collect_params("bn", params);
    std::vector<NodePtr<float>> nodes;
    for (auto& p : params) nodes.push_back(p.node);
    auto fwd = [&](Tape<float>* t) {
        auto h = conv.forward(t, xin, true);
        h = bn.forward(t, h, true);
        h = relu6(t, h);
        h = global_avg_pool(t, h);
        return softmax_cross_entropy(t, h, std::vector<int>{1, 4});
    };
    REQUIRE(testutil::fd_max_rel_err<float>(nodes, fwd, 1e-3) <= 1e-3);
}

TEST_CASE("backward demands a scalar produced under the right tape") {
    Tensor<float> x(1, 1, 1, 1);
    auto leaf = make_leaf(x, true);
    Tape<float> tape;
    REQUIRE_THROWS_AS(tape.backward(leaf), std::runtime_error); // not produced under the tape

    Tape<float> other;
    auto produced = other.emit(Tensor<float>(1, 1, 1, 1));
    REQUIRE_THROWS_AS(tape.backward(produced), std::runtime_error);

    auto vec = tape.emit(Tensor<float>(1, 1, 1, 3));
    REQUIRE_THROWS_AS(tape.backward(vec), std::runtime_error); // not a scalar
}

TEST_CASE("parameters unreachable from the loss keep a zero gradient") {
    Rng rng(6);
    Tensor<float> x(1, 2, 2, 2);
    x.fill_uniform(rng, -1.0, 1.0);
    auto xin = make_leaf(x);
    Tensor<float> w(1, 1, 2, 2);
    w.fill_uniform(rng, -1.0, 1.0);
    auto used = make_leaf(w, true);
    auto unused = make_leaf(w, true);
    Tape<float> tape;
    auto loss = reduce_sum(&tape, conv2d(&tape, xin, used, 1));
    used->zero_grad();
    unused->zero_grad();
    tape.backward(loss);
    bool any_nonzero = false;
    for (std::size_t i = 0; i < used->grad().size(); ++i) any_nonzero |= used->grad()[i] != 0.0f;
    REQUIRE(any_nonzero);
    for (std::size_t i = 0; i < unused->grad().size(); ++i) REQUIRE(unused->grad()[i] == 0.0f);
}

TEST_CASE("backward replays each recorded step exactly once, in reverse order") {
    Tape<float> tape;
    std::vector<int> visits;
    auto out = tape.emit(Tensor<float>(1, 1, 1, 1));
    tape.record([&] { visits.push_back(0); });
    tape.record([&] { visits.push_back(1); });
    tape.record([&] { visits.push_back(2); });
    tape.backward(out);
    REQUIRE(visits == std::vector<int>{2, 1, 0});
}
