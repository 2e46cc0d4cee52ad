#include "navforge/neuralnet.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace navforge {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softplus: return "softplus";
    }
    return "?";
}

namespace {

inline double apply_act(Activation a, double x) {
    switch (a) {
        case Activation::Linear: return x;
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Softplus:
            return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    return x;
}

// Derivative as a function of the post-activation value y.
inline double act_deriv_from_output(Activation a, double y) {
    switch (a) {
        case Activation::Linear: return 1.0;
        case Activation::ReLU: return y > 0.0 ? 1.0 : 0.0;  // subgradient 0 at 0
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Softplus: return 1.0 - std::exp(-y);
    }
    return 1.0;
}

// Y[b,o] = dot(X[b,:], W[o,:]) + bias[o]
void affine_forward(const double* X, int batch, int in, const double* W,
                    const double* bias, int out, double* Y) {
    for (int b = 0; b < batch; ++b) {
        const double* x = X + static_cast<size_t>(b) * in;
        double* y = Y + static_cast<size_t>(b) * out;
        for (int o = 0; o < out; ++o) {
            const double* w = W + static_cast<size_t>(o) * in;
            double acc = bias[o];
            for (int i = 0; i < in; ++i)
                acc += x[i] * w[i];
            y[o] = acc;
        }
    }
}

// dX[b,i] = sum_o dY[b,o] * W[o,i]
void affine_backward_input(const double* dY, int batch, int in, const double* W,
                           int out, double* dX) {
    for (int b = 0; b < batch; ++b) {
        const double* dy = dY + static_cast<size_t>(b) * out;
        double* dx = dX + static_cast<size_t>(b) * in;
        for (int i = 0; i < in; ++i)
            dx[i] = 0.0;
        for (int o = 0; o < out; ++o) {
            const double g = dy[o];
            if (g == 0.0)
                continue;
            const double* w = W + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i)
                dx[i] += g * w[i];
        }
    }
}

// dW[o,i] = sum_b dY[b,o] * X[b,i];  dB[o] = sum_b dY[b,o]
void affine_backward_params(const double* dY, const double* X, int batch, int in,
                            int out, double* dW, double* dB) {
    for (size_t k = 0; k < static_cast<size_t>(out) * in; ++k)
        dW[k] = 0.0;
    for (int o = 0; o < out; ++o)
        dB[o] = 0.0;
    for (int b = 0; b < batch; ++b) {
        const double* dy = dY + static_cast<size_t>(b) * out;
        const double* x = X + static_cast<size_t>(b) * in;
        for (int o = 0; o < out; ++o) {
            const double g = dy[o];
            if (g == 0.0)
                continue;
            dB[o] += g;
            double* dw = dW + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i)
                dw[i] += g * x[i];
        }
    }
}

}  // namespace

void GradientBundle::zero() {
    for (auto& g : dw)
        std::fill(g.begin(), g.end(), 0.0);
    for (auto& g : db)
        std::fill(g.begin(), g.end(), 0.0);
}

bool GradientBundle::finite() const {
    for (const auto& g : dw)
        for (double v : g)
            if (!std::isfinite(v))
                return false;
    for (const auto& g : db)
        for (double v : g)
            if (!std::isfinite(v))
                return false;
    return true;
}

DenseNet::DenseNet(const std::vector<LayerSpec>& spec, Rng& rng,
                   double final_layer_scale) {
    if (spec.empty())
        throw std::invalid_argument("DenseNet: empty layer spec");
    for (size_t k = 0; k + 1 < spec.size(); ++k)
        if (spec[k].out != spec[k + 1].in)
            throw std::invalid_argument("DenseNet: adjacent layer dims disagree");
    layers_.reserve(spec.size());
    for (size_t k = 0; k < spec.size(); ++k) {
        const auto& s = spec[k];
        if (s.in <= 0 || s.out <= 0)
            throw std::invalid_argument("DenseNet: layer dims must be positive");
        Layer layer;
        layer.in = s.in;
        layer.out = s.out;
        layer.act = s.act;
        layer.w.resize(static_cast<size_t>(s.out) * s.in);
        layer.b.resize(s.out);
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        const double scale = (k + 1 == spec.size()) ? final_layer_scale : 1.0;
        for (auto& w : layer.w)
            w = scale * rng.uniform(-bound, bound);
        for (auto& b : layer.b)
            b = scale * rng.uniform(-bound, bound);
        layers_.push_back(std::move(layer));
    }
}

std::vector<LayerSpec> DenseNet::manifest() const {
    std::vector<LayerSpec> m;
    m.reserve(layers_.size());
    for (const auto& l : layers_)
        m.push_back({l.in, l.out, l.act});
    return m;
}

size_t DenseNet::param_count() const {
    size_t n = 0;
    for (const auto& l : layers_)
        n += l.w.size() + l.b.size();
    return n;
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
    return forward_batch(input, 1, nullptr);
}

std::vector<double> DenseNet::forward_batch(std::span<const double> X, int batch,
                                            ForwardCache* cache) const {
    if (layers_.empty())
        throw std::logic_error("DenseNet: forward on empty net");
    if (X.size() != static_cast<size_t>(batch) * input_dim())
        throw std::invalid_argument("DenseNet: input size != batch * input_dim");

    std::vector<double> cur(X.begin(), X.end());
    if (cache) {
        cache->batch = batch;
        cache->acts.clear();
        cache->acts.reserve(layers_.size() + 1);
        cache->acts.push_back(cur);
    }
    for (const auto& l : layers_) {
        std::vector<double> next(static_cast<size_t>(batch) * l.out);
        affine_forward(cur.data(), batch, l.in, l.w.data(), l.b.data(), l.out,
                       next.data());
        if (l.act != Activation::Linear)
            for (auto& v : next)
                v = apply_act(l.act, v);
        cur = std::move(next);
        if (cache)
            cache->acts.push_back(cur);
    }
    return cur;
}

GradientBundle DenseNet::make_gradient_bundle() const {
    GradientBundle g;
    g.dw.reserve(layers_.size());
    g.db.reserve(layers_.size());
    for (const auto& l : layers_) {
        g.dw.emplace_back(l.w.size(), 0.0);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void DenseNet::backward_batch(const ForwardCache& cache, std::span<const double> dY,
                              GradientBundle& grads, std::vector<double>* dX) const {
    if (cache.acts.size() != layers_.size() + 1)
        throw std::invalid_argument("DenseNet: cache does not match this net");
    const int batch = cache.batch;
    if (dY.size() != static_cast<size_t>(batch) * output_dim())
        throw std::invalid_argument("DenseNet: dY size != batch * output_dim");

    if (grads.dw.size() != layers_.size())
        grads = make_gradient_bundle();

    std::vector<double> delta(dY.begin(), dY.end());
    for (size_t k = layers_.size(); k-- > 0;) {
        const Layer& l = layers_[k];
        const std::vector<double>& y = cache.acts[k + 1];
        const std::vector<double>& x = cache.acts[k];
        if (x.size() != static_cast<size_t>(batch) * l.in ||
            y.size() != static_cast<size_t>(batch) * l.out)
            throw std::invalid_argument("DenseNet: stale forward cache");

        if (l.act != Activation::Linear)
            for (size_t j = 0; j < delta.size(); ++j)
                delta[j] *= act_deriv_from_output(l.act, y[j]);

        affine_backward_params(delta.data(), x.data(), batch, l.in, l.out,
                               grads.dw[k].data(), grads.db[k].data());
        if (k > 0 || dX) {
            std::vector<double> prev(static_cast<size_t>(batch) * l.in);
            affine_backward_input(delta.data(), batch, l.in, l.w.data(), l.out,
                                  prev.data());
            delta = std::move(prev);
        }
    }
    if (dX)
        *dX = std::move(delta);
}

std::vector<double> DenseNet::backward_batch_input(const ForwardCache& cache,
                                                   std::span<const double> dY) const {
    if (cache.acts.size() != layers_.size() + 1)
        throw std::invalid_argument("DenseNet: cache does not match this net");
    const int batch = cache.batch;
    if (dY.size() != static_cast<size_t>(batch) * output_dim())
        throw std::invalid_argument("DenseNet: dY size != batch * output_dim");

    std::vector<double> delta(dY.begin(), dY.end());
    for (size_t k = layers_.size(); k-- > 0;) {
        const Layer& l = layers_[k];
        const std::vector<double>& y = cache.acts[k + 1];
        if (l.act != Activation::Linear)
            for (size_t j = 0; j < delta.size(); ++j)
                delta[j] *= act_deriv_from_output(l.act, y[j]);
        std::vector<double> prev(static_cast<size_t>(batch) * l.in);
        affine_backward_input(delta.data(), batch, l.in, l.w.data(), l.out,
                              prev.data());
        delta = std::move(prev);
    }
    return delta;
}

AdamState make_adam_state(const DenseNet& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (const auto& l : net.layers()) {
        s.m_w.emplace_back(l.w.size(), 0.0);
        s.v_w.emplace_back(l.w.size(), 0.0);
        s.m_b.emplace_back(l.b.size(), 0.0);
        s.v_b.emplace_back(l.b.size(), 0.0);
    }
    return s;
}

namespace {

void adam_update_array(std::vector<double>& p, const std::vector<double>& g,
                       std::vector<double>& m, std::vector<double>& v,
                       double lr, double b1, double b2, double eps,
                       double bc1, double bc2) {
    for (size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

void adam_step(DenseNet& net, const GradientBundle& grads, AdamState& state) {
    auto& layers = net.layers();
    if (grads.dw.size() != layers.size() || state.m_w.size() != layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (size_t k = 0; k < layers.size(); ++k)
        if (grads.dw[k].size() != layers[k].w.size() ||
            grads.db[k].size() != layers[k].b.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!grads.finite())
        throw DivergenceError("adam_step: non-finite gradient, update rejected");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < layers.size(); ++k) {
        adam_update_array(layers[k].w, grads.dw[k], state.m_w[k], state.v_w[k],
                          state.lr, state.beta1, state.beta2, state.eps, bc1, bc2);
        adam_update_array(layers[k].b, grads.db[k], state.m_b[k], state.v_b[k],
                          state.lr, state.beta1, state.beta2, state.eps, bc1, bc2);
    }
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("soft_update: tau must be in (0, 1]");
    auto& tl = target.layers();
    const auto& ol = online.layers();
    if (tl.size() != ol.size())
        throw std::invalid_argument("soft_update: architecture mismatch");
    for (size_t k = 0; k < tl.size(); ++k) {
        if (tl[k].w.size() != ol[k].w.size() || tl[k].b.size() != ol[k].b.size() ||
            tl[k].act != ol[k].act)
            throw std::invalid_argument("soft_update: architecture mismatch");
        for (size_t i = 0; i < tl[k].w.size(); ++i)
            tl[k].w[i] = tau * ol[k].w[i] + (1.0 - tau) * tl[k].w[i];
        for (size_t i = 0; i < tl[k].b.size(); ++i)
            tl[k].b[i] = tau * ol[k].b[i] + (1.0 - tau) * tl[k].b[i];
    }
}

void AdamScalar::update(double& param, double grad) {
    if (!std::isfinite(grad))
        throw DivergenceError("AdamScalar: non-finite gradient");
    step += 1;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(step)));
    const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(step)));
    param -= lr * mhat / (std::sqrt(vhat) + eps);
}

namespace {

constexpr char kNetMagic[4] = {'N', 'A', 'V', 'F'};
constexpr uint32_t kNetVersion = 1;

}  // namespace

std::string manifest_string(const std::vector<LayerSpec>& m) {
    std::ostringstream ss;
    for (size_t i = 0; i < m.size(); ++i) {
        if (i)
            ss << " ";
        ss << m[i].in << "x" << m[i].out << ":" << to_string(m[i].act);
    }
    return ss.str();
}

void require_manifest(const DenseNet& net, const std::vector<LayerSpec>& expected) {
    if (net.manifest() != expected)
        throw IoError("net checkpoint manifest mismatch: have [" +
                      manifest_string(net.manifest()) + "], expected [" +
                      manifest_string(expected) + "]");
}

void append_net_block(ByteWriter& w, const DenseNet& net, const AdamState* adam) {
    ByteWriter block;
    block.put_bytes(std::string_view(kNetMagic, 4));
    block.put_u32(kNetVersion);
    const auto& layers = net.layers();
    block.put_u32(static_cast<uint32_t>(layers.size()));
    for (const auto& l : layers) {
        block.put_u32(static_cast<uint32_t>(l.in));
        block.put_u32(static_cast<uint32_t>(l.out));
        block.put_u8(static_cast<uint8_t>(l.act));
    }
    block.put_u8(adam ? 1 : 0);
    for (const auto& l : layers) {
        for (double v : l.w)
            block.put_f64(v);
        for (double v : l.b)
            block.put_f64(v);
    }
    if (adam) {
        block.put_u64(adam->step);
        block.put_f64(adam->lr);
        block.put_f64(adam->beta1);
        block.put_f64(adam->beta2);
        block.put_f64(adam->eps);
        for (size_t k = 0; k < layers.size(); ++k) {
            for (double v : adam->m_w[k]) block.put_f64(v);
            for (double v : adam->v_w[k]) block.put_f64(v);
            for (double v : adam->m_b[k]) block.put_f64(v);
            for (double v : adam->v_b[k]) block.put_f64(v);
        }
    }
    block.seal();
    // Length-prefixed so blocks compose into larger checkpoints.
    w.put_u64(block.buf.size());
    w.put_bytes(block.buf);
}

DenseNet read_net_block(ByteReader& r, AdamState* adam) {
    uint64_t len = r.get_u64();
    std::string_view bytes = r.get_bytes(len);
    ByteReader b(bytes);
    b.check_crc();

    std::string_view magic = b.get_bytes(4);
    if (magic != std::string_view(kNetMagic, 4))
        throw IoError("net checkpoint: bad magic");
    uint32_t version = b.get_u32();
    if (version != kNetVersion)
        throw IoError("net checkpoint: unsupported version " + std::to_string(version));

    uint32_t n_layers = b.get_u32();
    if (n_layers == 0 || n_layers > 64)
        throw IoError("net checkpoint: implausible layer count");
    std::vector<LayerSpec> spec(n_layers);
    for (auto& l : spec) {
        l.in = static_cast<int>(b.get_u32());
        l.out = static_cast<int>(b.get_u32());
        uint8_t act = b.get_u8();
        if (act > static_cast<uint8_t>(Activation::Softplus))
            throw IoError("net checkpoint: unknown activation code");
        l.act = static_cast<Activation>(act);
    }
    bool has_adam = b.get_u8() != 0;

    Rng dummy(0);
    DenseNet net(spec, dummy);
    for (auto& l : net.layers()) {
        for (auto& v : l.w)
            v = b.get_f64();
        for (auto& v : l.b)
            v = b.get_f64();
    }
    if (has_adam) {
        AdamState s = make_adam_state(net);
        s.step = b.get_u64();
        s.lr = b.get_f64();
        s.beta1 = b.get_f64();
        s.beta2 = b.get_f64();
        s.eps = b.get_f64();
        for (size_t k = 0; k < net.layer_count(); ++k) {
            for (auto& v : s.m_w[k]) v = b.get_f64();
            for (auto& v : s.v_w[k]) v = b.get_f64();
            for (auto& v : s.m_b[k]) v = b.get_f64();
            for (auto& v : s.v_b[k]) v = b.get_f64();
        }
        if (adam)
            *adam = std::move(s);
    } else if (adam) {
        throw IoError("net checkpoint: optimizer state requested but absent");
    }
    return net;
}

void save_net_file(const std::string& path, const DenseNet& net,
                   const AdamState* adam) {
    ByteWriter w;
    append_net_block(w, net, adam);
    write_file_bytes(path, w.buf);
}

DenseNet load_net_file(const std::string& path, AdamState* adam) {
    std::string bytes = read_file_bytes(path);
    ByteReader r(bytes);
    return read_net_block(r, adam);
}

}  // namespace navforge
