#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ggr/net.hpp"
#include "ggr/rng.hpp"

using namespace ggr;

namespace {

DenseNetwork random_net(const std::vector<LayerSpec>& specs, uint64_t seed) {
    return DenseNetwork::create(specs, seed);
}

// keep relu pre-activations away from the kink for finite differences
bool relu_safe(const DenseNetwork& net, std::span<const double> input) {
    std::vector<double> a(input.begin(), input.end());
    for (const auto& layer : net.layers()) {
        std::vector<double> next(layer.spec.out);
        for (int o = 0; o < layer.spec.out; ++o) {
            double z = layer.b[o];
            for (int i = 0; i < layer.spec.in; ++i)
                z += layer.w[static_cast<size_t>(o) * layer.spec.in + i] * a[i];
            if (layer.spec.act == Activation::relu && std::fabs(z) < 1e-3) return false;
            next[o] = layer.spec.act == Activation::relu ? std::max(z, 0.0)
                      : layer.spec.act == Activation::sigmoid ? 1.0 / (1.0 + std::exp(-z))
                                                              : z;
        }
        a = std::move(next);
    }
    return true;
}

}  // namespace

TEST_CASE("forward: identity, sigmoid midpoint, hand-computed two-layer") {
    DenseNetwork identity = random_net({{3, 3, Activation::linear}}, 1);
    for (auto& l : identity.layers()) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        for (int i = 0; i < 3; ++i) l.w[static_cast<size_t>(i) * 3 + i] = 1.0;
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    const std::vector<double> x{1.5, -2.0, 0.25};
    CHECK(identity.forward(x) == x);

    DenseNetwork sig = random_net({{1, 1, Activation::sigmoid}}, 2);
    sig.layers()[0].w[0] = 0.0;
    sig.layers()[0].b[0] = 0.0;
    CHECK(sig.forward(std::vector<double>{3.7})[0] == doctest::Approx(0.5));

    // 2-layer with hand-set weights on input (1,2):
    // h = relu([[1,2],[0,-1]]*(1,2) + (0.5,0)) = relu(5.5, -2) = (5.5, 0)
    // y = [1, 3]*(5.5,0) - 1 = 4.5
    DenseNetwork two = random_net({{2, 2, Activation::relu}, {2, 1, Activation::linear}}, 3);
    two.layers()[0].w = {1, 2, 0, -1};
    two.layers()[0].b = {0.5, 0};
    two.layers()[1].w = {1, 3};
    two.layers()[1].b = {-1};
    CHECK(two.forward(std::vector<double>{1, 2})[0] == doctest::Approx(4.5).epsilon(1e-12));

    CHECK_THROWS(two.forward(std::vector<double>{1, 2, 3}));
}

TEST_CASE("losses: worked examples and properties") {
    CHECK(mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(mse_loss(std::vector<double>{3, 2}, std::vector<double>{1, 2}) == doctest::Approx(2.0));
    // scaling residuals by c multiplies the loss by c^2
    CHECK(mse_loss(std::vector<double>{5, 2}, std::vector<double>{1, 2}) == doctest::Approx(8.0));

    CHECK(bce_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(std::vector<double>{0.9, 0.2}, std::vector<double>{1, 0}) ==
          doctest::Approx(-0.5 * (std::log(0.9) + std::log(0.8))).epsilon(1e-12));
    // perfect confident predictions are finite thanks to clipping
    const double tiny = bce_loss(std::vector<double>{1.0, 0.0}, std::vector<double>{1, 0});
    CHECK(tiny > 0.0);
    CHECK(tiny <= -std::log(1.0 - 1e-7) + 1e-12);
    CHECK_THROWS(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}));
}

TEST_CASE("backward: single linear unit and zero-residual batches") {
    DenseNetwork unit = random_net({{1, 1, Activation::linear}}, 4);
    unit.layers()[0].w = {1.5};
    unit.layers()[0].b = {0.0};
    Matrix x(1, 1);
    x(0, 0) = 3.0;
    Matrix y(1, 1);
    y(0, 0) = 2.0;
    const Gradients g = backward(unit, x, y, Loss::mse);
    // dL/dw = 2(yhat - y)x with yhat = 4.5
    CHECK(g.layers[0].dw[0] == doctest::Approx(2.0 * (4.5 - 2.0) * 3.0).epsilon(1e-12));
    CHECK(g.layers[0].db[0] == doctest::Approx(2.0 * (4.5 - 2.0)).epsilon(1e-12));

    Matrix y2(1, 1);
    y2(0, 0) = 4.5;  // zero residual
    const Gradients gz = backward(unit, x, y2, Loss::mse);
    CHECK(gz.layers[0].dw[0] == 0.0);
    CHECK(gz.layers[0].db[0] == 0.0);
}

TEST_CASE("gradient check: 100 random nets per loss stay under 1e-4") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const int in = rng.uniform_int(1, 4);
        const int hidden = rng.uniform_int(1, 5);
        const Activation hidden_act =
            trial % 3 == 0 ? Activation::relu : (trial % 3 == 1 ? Activation::sigmoid
                                                                : Activation::linear);
        const Loss loss = trial % 2 == 0 ? Loss::mse : Loss::bce;
        const Activation out_act = loss == Loss::bce ? Activation::sigmoid : Activation::linear;
        DenseNetwork net = random_net(
            {{in, hidden, hidden_act}, {hidden, 1, out_act}}, rng.next_u64());

        std::vector<double> input(in), target(1);
        for (double& v : input) v = rng.uniform(-2.0, 2.0);
        target[0] = loss == Loss::bce ? static_cast<double>(rng.bernoulli(0.5))
                                      : rng.uniform(-2.0, 2.0);
        if (hidden_act == Activation::relu && !relu_safe(net, input)) continue;
        CHECK(gradient_check(net, input, target, loss, 1e-5) < 1e-4);
    }
}

TEST_CASE("gradient check rejects a deliberately corrupted gradient") {
    DenseNetwork net = random_net({{2, 3, Activation::sigmoid}, {3, 1, Activation::linear}}, 12);
    const std::vector<double> input{0.7, -0.4}, target{1.0};
    Matrix x(1, 2), t(1, 1);
    x(0, 0) = input[0];
    x(0, 1) = input[1];
    t(0, 0) = target[0];
    const Gradients g = backward(net, x, t, Loss::mse);

    // recompute the finite difference for the first weight and compare with a
    // corrupted analytic value: the relative error must be conspicuous
    DenseNetwork probe = net;
    const double eps = 1e-5;
    auto loss_at = [&]() { return batch_loss(probe.forward_batch(x), t, Loss::mse); };
    probe.layers()[0].w[0] += eps;
    const double up = loss_at();
    probe.layers()[0].w[0] -= 2 * eps;
    const double down = loss_at();
    probe.layers()[0].w[0] += eps;
    const double numeric = (up - down) / (2 * eps);
    const double corrupted = g.layers[0].dw[0] * 1.2 + 0.05;
    const double denom = std::max({std::fabs(numeric), std::fabs(corrupted), 1e-8});
    CHECK(std::fabs(numeric - corrupted) / denom > 1e-2);
}

TEST_CASE("sgd_step: vanilla, momentum trace, decay schedule") {
    // single parameter, constant gradient 1
    DenseNetwork net = random_net({{1, 1, Activation::linear}}, 5);
    net.layers()[0].w = {1.0};
    net.layers()[0].b = {0.0};
    Gradients g;
    g.layers.resize(1);
    g.layers[0].dw = {1.0};
    g.layers[0].db = {0.0};

    SUBCASE("momentum 0, decay 0 is vanilla gradient descent") {
        SgdState st = SgdState::for_network(net);
        TrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.momentum = 0.0;
        cfg.decay = 0.0;
        sgd_step(net, g, st, cfg);
        CHECK(net.layers()[0].w[0] == doctest::Approx(0.9).epsilon(1e-15));
    }

    SUBCASE("momentum 0.9 reproduces the hand-iterated sequence") {
        SgdState st = SgdState::for_network(net);
        TrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.momentum = 0.9;
        cfg.decay = 0.0;
        sgd_step(net, g, st, cfg);
        CHECK(net.layers()[0].w[0] == doctest::Approx(0.9).epsilon(1e-15));  // v = -0.1
        sgd_step(net, g, st, cfg);
        CHECK(net.layers()[0].w[0] == doctest::Approx(0.71).epsilon(1e-15));  // v = -0.19
    }

    SUBCASE("inverse-time decay: lr halves at t = 1e6 with decay 1e-6") {
        SgdState st = SgdState::for_network(net);
        st.t = 1000000;
        TrainConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.momentum = 0.0;
        cfg.decay = 1e-6;
        sgd_step(net, g, st, cfg);
        CHECK(1.0 - net.layers()[0].w[0] == doctest::Approx(0.05).epsilon(1e-12));
    }

    SUBCASE("non-finite gradients are rejected") {
        SgdState st = SgdState::for_network(net);
        g.layers[0].dw = {std::nan("")};
        TrainConfig cfg;
        CHECK_THROWS(sgd_step(net, g, st, cfg));
    }
}

TEST_CASE("train: linear regression convergence, zero epochs, determinism") {
    // y = 2x, single linear unit
    Matrix x(16, 1), y(16, 1);
    for (int i = 0; i < 16; ++i) {
        x(i, 0) = (i - 8) / 4.0;
        y(i, 0) = 2.0 * x(i, 0);
    }
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.9;
    cfg.decay = 0.0;
    cfg.epochs = 600;
    cfg.loss = Loss::mse;
    cfg.patience = 0;  // run to the end
    cfg.seed = 7;
    DenseNetwork net = random_net({{1, 1, Activation::linear}}, 7);
    const auto trace = train(net, x, y, cfg);
    CHECK(net.layers()[0].w[0] == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(net.layers()[0].b[0] == doctest::Approx(0.0).epsilon(1e-3));
    CHECK(trace.back() < trace.front());

    // zero epochs leaves the network untouched
    DenseNetwork before = random_net({{1, 1, Activation::linear}}, 8);
    DenseNetwork after = before;
    TrainConfig none = cfg;
    none.epochs = 0;
    const auto empty_trace = train(after, x, y, none);
    CHECK(empty_trace.empty());
    CHECK(after.layers()[0].w == before.layers()[0].w);

    // identical seeds give identical traces (and networks)
    DenseNetwork n1 = random_net({{1, 4, Activation::relu}, {4, 1, Activation::linear}}, 9);
    DenseNetwork n2 = random_net({{1, 4, Activation::relu}, {4, 1, Activation::linear}}, 9);
    TrainConfig mini = cfg;
    mini.epochs = 50;
    mini.batch_size = 4;  // exercises seeded shuffling
    mini.seed = 123;
    const auto t1 = train(n1, x, y, mini);
    const auto t2 = train(n2, x, y, mini);
    CHECK(t1 == t2);
    CHECK(n1.layers()[1].w == n2.layers()[1].w);
}

TEST_CASE("weight initialization is seeded and bounded") {
    const DenseNetwork a = random_net({{10, 20, Activation::relu}}, 77);
    const DenseNetwork b = random_net({{10, 20, Activation::relu}}, 77);
    const DenseNetwork c = random_net({{10, 20, Activation::relu}}, 78);
    CHECK(a.layers()[0].w == b.layers()[0].w);
    CHECK(a.layers()[0].w != c.layers()[0].w);
    const double bound = std::sqrt(6.0 / 30.0);
    for (double w : a.layers()[0].w) CHECK(std::fabs(w) <= bound);
    for (double bb : a.layers()[0].b) CHECK(bb == 0.0);
    CHECK(a.parameter_count() == 10 * 20 + 20);
}

TEST_CASE("network serialization round-trips bit-exactly") {
    DenseNetwork net = random_net({{4, 6, Activation::relu}, {6, 1, Activation::sigmoid}}, 31);
    std::stringstream buf;
    save_network(net, buf);
    const DenseNetwork back = load_network(buf);
    REQUIRE(back.layers().size() == net.layers().size());
    for (size_t i = 0; i < net.layers().size(); ++i) {
        CHECK(back.layers()[i].w == net.layers()[i].w);
        CHECK(back.layers()[i].b == net.layers()[i].b);
        CHECK(back.layers()[i].spec.act == net.layers()[i].spec.act);
    }
    const std::vector<double> probe{0.1, -0.5, 2.0, 0.7};
    CHECK(net.forward(probe) == back.forward(probe));
}

TEST_CASE("train aborts on divergence with a diagnostic") {
    Matrix x(4, 1), y(4, 1);
    for (int i = 0; i < 4; ++i) {
        x(i, 0) = 1000.0 * (i + 1);
        y(i, 0) = -1000.0 * (i + 1);
    }
    DenseNetwork net = random_net({{1, 1, Activation::linear}}, 3);
    TrainConfig cfg;
    cfg.learning_rate = 10.0;  // hopeless step size
    cfg.epochs = 200;
    cfg.loss = Loss::mse;
    CHECK_THROWS_WITH_AS(train(net, x, y, cfg), doctest::Contains("diverged"), std::runtime_error);
}
