#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <vector>

#include "navforge/neuralnet.hpp"

using namespace navforge;

namespace {

// Straight-line matrix-arithmetic reimplementation, the forward oracle.
std::vector<double> oracle_forward(const DenseNet& net,
                                   const std::vector<double>& input) {
    std::vector<double> x = input;
    for (const auto& l : net.layers()) {
        std::vector<double> y(l.out);
        for (int o = 0; o < l.out; ++o) {
            double acc = l.b[o];
            for (int i = 0; i < l.in; ++i)
                acc += l.w[static_cast<size_t>(o) * l.in + i] * x[i];
            switch (l.act) {
                case Activation::Linear: break;
                case Activation::ReLU: acc = acc > 0 ? acc : 0; break;
                case Activation::Tanh: acc = std::tanh(acc); break;
                case Activation::Sigmoid: acc = 1.0 / (1.0 + std::exp(-acc)); break;
                case Activation::Softplus:
                    acc = (acc > 0 ? acc : 0) + std::log1p(std::exp(-std::abs(acc)));
                    break;
            }
            y[o] = acc;
        }
        x = std::move(y);
    }
    return x;
}

// Loss used for gradient checks: L = sum_j c_j * y_j over the batch.
double probe_loss(const DenseNet& net, const std::vector<double>& X, int batch,
                  const std::vector<double>& c) {
    double loss = 0.0;
    int in = net.input_dim();
    for (int b = 0; b < batch; ++b) {
        std::vector<double> x(X.begin() + static_cast<size_t>(b) * in,
                              X.begin() + static_cast<size_t>(b + 1) * in);
        auto y = oracle_forward(net, x);
        for (size_t j = 0; j < y.size(); ++j)
            loss += c[static_cast<size_t>(b) * y.size() + j] * y[j];
    }
    return loss;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// True when any ReLU pre-activation in the batch sits within `margin` of
// its kink.
bool has_relu_kink(const DenseNet& net, const std::vector<double>& X, int batch,
                   double margin) {
    int in = net.input_dim();
    for (int b = 0; b < batch; ++b) {
        std::vector<double> x(X.begin() + static_cast<size_t>(b) * in,
                              X.begin() + static_cast<size_t>(b + 1) * in);
        for (const auto& l : net.layers()) {
            std::vector<double> y(l.out);
            for (int o = 0; o < l.out; ++o) {
                double acc = l.b[o];
                for (int i = 0; i < l.in; ++i)
                    acc += l.w[static_cast<size_t>(o) * l.in + i] * x[i];
                if (l.act == Activation::ReLU && std::abs(acc) < margin)
                    return true;
                switch (l.act) {
                    case Activation::Linear: break;
                    case Activation::ReLU: acc = acc > 0 ? acc : 0; break;
                    case Activation::Tanh: acc = std::tanh(acc); break;
                    case Activation::Sigmoid: acc = 1.0 / (1.0 + std::exp(-acc)); break;
                    case Activation::Softplus:
                        acc = (acc > 0 ? acc : 0) + std::log1p(std::exp(-std::abs(acc)));
                        break;
                }
                y[o] = acc;
            }
            x = std::move(y);
        }
    }
    return false;
}

DenseNet random_net(const std::vector<LayerSpec>& spec, uint64_t seed) {
    Rng rng(seed);
    return DenseNet(spec, rng);
}

}  // namespace

TEST_CASE("forward through an identity linear layer is the identity") {
    Rng rng(1);
    DenseNet net({{3, 3, Activation::Linear}}, rng);
    auto& l = net.layers()[0];
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
    for (int i = 0; i < 3; ++i)
        l.w[static_cast<size_t>(i) * 3 + i] = 1.0;
    std::vector<double> x{0.5, -2.0, 3.25};
    auto y = net.forward(x);
    CHECK(y == x);
}

TEST_CASE("ReLU zeroes all-negative pre-activations") {
    Rng rng(2);
    DenseNet net({{2, 4, Activation::ReLU}}, rng);
    auto& l = net.layers()[0];
    std::fill(l.w.begin(), l.w.end(), -1.0);
    std::fill(l.b.begin(), l.b.end(), -0.5);
    auto y = net.forward(std::vector<double>{1.0, 2.0});
    for (double v : y)
        CHECK(v == 0.0);
}

TEST_CASE("random 4-8-2 net matches the matrix oracle within 1e-12") {
    DenseNet net = random_net({{4, 8, Activation::Tanh}, {8, 2, Activation::Linear}}, 3);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x)
            v = rng.uniform(-2.0, 2.0);
        auto got = net.forward(x);
        auto want = oracle_forward(net, x);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("dimension mismatch is rejected") {
    DenseNet net = random_net({{4, 2, Activation::Linear}}, 5);
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), std::invalid_argument);
    Rng rng(1);
    CHECK_THROWS_AS(
        DenseNet({{4, 8, Activation::ReLU}, {7, 2, Activation::Linear}}, rng),
        std::invalid_argument);
}

TEST_CASE("backward on y = wx + b with loss y gives dw = x, db = 1") {
    Rng rng(6);
    DenseNet net({{1, 1, Activation::Linear}}, rng);
    ForwardCache cache;
    std::vector<double> x{3.0};
    net.forward_batch(x, 1, &cache);
    GradientBundle g = net.make_gradient_bundle();
    std::vector<double> dx;
    net.backward_batch(cache, std::vector<double>{1.0}, g, &dx);
    CHECK(g.dw[0][0] == 3.0);
    CHECK(g.db[0][0] == 1.0);
    CHECK(dx[0] == net.layers()[0].w[0]);
}

TEST_CASE("ReLU at exactly zero pre-activation uses subgradient 0") {
    Rng rng(7);
    DenseNet net({{1, 1, Activation::ReLU}}, rng);
    net.layers()[0].w[0] = 1.0;
    net.layers()[0].b[0] = 0.0;
    ForwardCache cache;
    net.forward_batch(std::vector<double>{0.0}, 1, &cache);
    GradientBundle g = net.make_gradient_bundle();
    std::vector<double> dx;
    net.backward_batch(cache, std::vector<double>{1.0}, g, &dx);
    CHECK(g.dw[0][0] == 0.0);
    CHECK(g.db[0][0] == 0.0);
    CHECK(dx[0] == 0.0);
}

TEST_CASE("gradients match central finite differences over random configs") {
    // Every activation, up to 3 hidden layers, 100 configurations.
    Rng meta(8);
    const Activation acts[] = {Activation::Linear, Activation::ReLU,
                               Activation::Tanh, Activation::Sigmoid,
                               Activation::Softplus};
    int config = 0;
    while (config < 100) {
        int n_hidden = static_cast<int>(meta.uniform_int(4));  // 0..3
        std::vector<LayerSpec> spec;
        int in = 2 + static_cast<int>(meta.uniform_int(4));
        int prev = in;
        for (int k = 0; k < n_hidden; ++k) {
            int width = 2 + static_cast<int>(meta.uniform_int(5));
            spec.push_back({prev, width, acts[meta.uniform_int(5)]});
            prev = width;
        }
        int out = 1 + static_cast<int>(meta.uniform_int(3));
        spec.push_back({prev, out, acts[meta.uniform_int(5)]});

        DenseNet net = random_net(spec, 1000 + config);
        const int batch = 1 + static_cast<int>(meta.uniform_int(4));
        std::vector<double> X(static_cast<size_t>(batch) * in);
        for (auto& v : X)
            v = meta.uniform(-1.5, 1.5);
        std::vector<double> c(static_cast<size_t>(batch) * out);
        for (auto& v : c)
            v = meta.uniform(-1.0, 1.0);

        // ReLU kinks invalidate finite differences near zero
        // pre-activations; redraw such configurations.
        if (has_relu_kink(net, X, batch, 1e-3))
            continue;

        ForwardCache cache;
        net.forward_batch(X, batch, &cache);
        GradientBundle g = net.make_gradient_bundle();
        std::vector<double> dX;
        net.backward_batch(cache, c, g, &dX);

        const double h = 1e-5;
        auto fd_param = [&](double& p) {
            double save = p;
            p = save + h;
            double up = probe_loss(net, X, batch, c);
            p = save - h;
            double down = probe_loss(net, X, batch, c);
            p = save;
            return (up - down) / (2.0 * h);
        };
        DenseNet probe = net;
        for (size_t k = 0; k < probe.layers().size(); ++k) {
            auto& l = probe.layers()[k];
            for (size_t i = 0; i < l.w.size(); ++i) {
                double fd = fd_param(l.w[i]);
                CHECK(rel_err(g.dw[k][i], fd) <= 1e-6);
            }
            for (size_t i = 0; i < l.b.size(); ++i) {
                double fd = fd_param(l.b[i]);
                CHECK(rel_err(g.db[k][i], fd) <= 1e-6);
            }
        }
        // Input gradient against finite differences too.
        for (size_t i = 0; i < X.size(); ++i) {
            double save = X[i];
            X[i] = save + h;
            double up = probe_loss(net, X, batch, c);
            X[i] = save - h;
            double down = probe_loss(net, X, batch, c);
            X[i] = save;
            CHECK(rel_err(dX[i], (up - down) / (2.0 * h)) <= 1e-6);
        }
        ++config;
    }
}

TEST_CASE("adam leaves parameters alone on zero gradient but advances the step") {
    DenseNet net = random_net({{2, 3, Activation::Tanh}, {3, 1, Activation::Linear}}, 9);
    DenseNet before = net;
    AdamState state = make_adam_state(net);
    GradientBundle g = net.make_gradient_bundle();
    adam_step(net, g, state);
    CHECK(state.step == 1);
    for (size_t k = 0; k < net.layers().size(); ++k) {
        CHECK(net.layers()[k].w == before.layers()[k].w);
        CHECK(net.layers()[k].b == before.layers()[k].b);
    }
}

TEST_CASE("first adam step moves by about -lr * sign(g)") {
    DenseNet net = random_net({{1, 1, Activation::Linear}}, 10);
    double w0 = net.layers()[0].w[0];
    AdamState state = make_adam_state(net, 0.0003);
    GradientBundle g = net.make_gradient_bundle();
    g.dw[0][0] = 0.37;
    g.db[0][0] = -2.5;
    double b0 = net.layers()[0].b[0];
    adam_step(net, g, state);
    // Bias-corrected moments cancel the magnitude: step = lr * g/(|g| + ~eps).
    CHECK(net.layers()[0].w[0] == doctest::Approx(w0 - 0.0003).epsilon(1e-6));
    CHECK(net.layers()[0].b[0] == doctest::Approx(b0 + 0.0003).epsilon(1e-6));
}

TEST_CASE("adam trace matches an independent scalar reference to 1e-12") {
    DenseNet net = random_net({{1, 1, Activation::Linear}}, 11);
    AdamState state = make_adam_state(net, 0.001);
    double w = net.layers()[0].w[0];
    // Scalar reference implementation.
    double m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.001;
    const double grads[] = {0.5, 0.5, -1.25, 0.03, 7.0};
    for (int t = 1; t <= 5; ++t) {
        double grad = grads[t - 1];
        m = b1 * m + (1 - b1) * grad;
        v = b2 * v + (1 - b2) * grad * grad;
        double mhat = m / (1 - std::pow(b1, t));
        double vhat = v / (1 - std::pow(b2, t));
        w -= lr * mhat / (std::sqrt(vhat) + eps);

        GradientBundle g = net.make_gradient_bundle();
        g.dw[0][0] = grad;
        adam_step(net, g, state);
        CHECK(std::abs(net.layers()[0].w[0] - w) <= 1e-12);
    }
}

TEST_CASE("non-finite gradients reject the update and keep state intact") {
    DenseNet net = random_net({{2, 2, Activation::Linear}}, 12);
    DenseNet before = net;
    AdamState state = make_adam_state(net);
    GradientBundle g = net.make_gradient_bundle();
    g.dw[0][1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, g, state), DivergenceError);
    CHECK(state.step == 0);
    CHECK(net.layers()[0].w == before.layers()[0].w);
}

TEST_CASE("soft update blends and converges geometrically") {
    Rng rng(13);
    DenseNet online({{2, 2, Activation::Linear}}, rng);
    DenseNet target = online;
    for (auto& w : target.layers()[0].w)
        w = 0.0;
    for (auto& w : online.layers()[0].w)
        w = 1.0;

    DenseNet t1 = target;
    soft_update(t1, online, 1.0);
    CHECK(t1.layers()[0].w == online.layers()[0].w);

    DenseNet t2 = target;
    soft_update(t2, online, 0.005);
    for (double w : t2.layers()[0].w)
        CHECK(w == doctest::Approx(0.005).epsilon(1e-15));

    // ||target - online|| shrinks by (1 - tau) per call with frozen online.
    double dist = 1.0;
    DenseNet t3 = target;
    for (int i = 0; i < 5; ++i) {
        soft_update(t3, online, 0.25);
        double d = std::abs(t3.layers()[0].w[0] - 1.0);
        CHECK(d == doctest::Approx(dist * 0.75).epsilon(1e-12));
        dist = d;
    }

    DenseNet other({{2, 3, Activation::Linear}}, rng);
    CHECK_THROWS_AS(soft_update(other, online, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(soft_update(t3, online, 0.0), std::invalid_argument);
}

TEST_CASE("checkpoint round trip reproduces forward outputs exactly") {
    DenseNet net = random_net({{4, 8, Activation::ReLU}, {8, 8, Activation::Softplus},
                               {8, 2, Activation::Linear}},
                              14);
    AdamState state = make_adam_state(net, 0.0003);
    // Dirty the optimizer state so the round trip is non-trivial.
    GradientBundle g = net.make_gradient_bundle();
    g.dw[0][0] = 0.5;
    adam_step(net, g, state);

    const std::string path = "net_roundtrip.tmp";
    save_net_file(path, net, &state);
    AdamState loaded_state;
    DenseNet loaded = load_net_file(path, &loaded_state);
    std::remove(path.c_str());

    CHECK(loaded.manifest() == net.manifest());
    CHECK(loaded_state.step == state.step);
    CHECK(loaded_state.m_w[0] == state.m_w[0]);
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(4);
        for (auto& v : x)
            v = rng.uniform(-3.0, 3.0);
        CHECK(net.forward(x) == loaded.forward(x));
    }
}

TEST_CASE("truncated checkpoint loads as an error, not as data") {
    DenseNet net = random_net({{3, 3, Activation::Tanh}}, 16);
    const std::string path = "net_truncated.tmp";
    save_net_file(path, net);
    std::string bytes = read_file_bytes(path);
    write_file_bytes(path, std::string_view(bytes).substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_net_file(path), IoError);
    // Corrupt one payload byte: the CRC must catch it.
    std::string corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x40;
    write_file_bytes(path, corrupt);
    CHECK_THROWS_AS(load_net_file(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("manifest mismatch reports both manifests") {
    DenseNet net = random_net({{3, 3, Activation::Tanh}}, 17);
    CHECK_THROWS_WITH_AS(
        require_manifest(net, {{61, 512, Activation::ReLU}}),
        doctest::Contains("3x3:tanh"), IoError);
}
