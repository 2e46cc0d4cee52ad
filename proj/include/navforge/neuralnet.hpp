#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "navforge/bytes.hpp"
#include "navforge/rng.hpp"

namespace navforge {

enum class Activation : uint8_t { Linear = 0, ReLU = 1, Tanh = 2, Sigmoid = 3, Softplus = 4 };

const char* to_string(Activation a);

struct LayerSpec {
    int in = 0;
    int out = 0;
    Activation act = Activation::Linear;
    bool operator==(const LayerSpec&) const = default;
};

// Per-parameter gradients, shape-congruent with a DenseNet.
struct GradientBundle {
    std::vector<std::vector<double>> dw;  // per layer, out*in row-major
    std::vector<std::vector<double>> db;  // per layer, out

    void zero();
    bool finite() const;
};

// Retained activations from a batched forward pass. acts[0] is the input
// batch; acts[k+1] the output of layer k. Every activation derivative used
// here is computable from the post-activation value, so pre-activations
// are not kept.
struct ForwardCache {
    int batch = 0;
    std::vector<std::vector<double>> acts;
};

// Plain dense network on 64-bit scalars. Mutable value with single-writer
// semantics; copies are deep.
class DenseNet {
public:
    DenseNet() = default;
    // Uniform +-1/sqrt(fan_in) init; the last layer is additionally scaled
    // by final_layer_scale (actors start near-zero actions with 0.003).
    DenseNet(const std::vector<LayerSpec>& spec, Rng& rng,
             double final_layer_scale = 1.0);

    int input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
    int output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
    size_t layer_count() const { return layers_.size(); }
    std::vector<LayerSpec> manifest() const;
    size_t param_count() const;

    // Single-sample forward.
    std::vector<double> forward(std::span<const double> input) const;

    // Batched forward over X (batch rows, input_dim columns, row-major).
    // Pass a cache to retain activations for backward().
    std::vector<double> forward_batch(std::span<const double> X, int batch,
                                      ForwardCache* cache = nullptr) const;

    // Exact reverse-mode gradients for the retained forward. dY is
    // batch x output_dim. Parameter gradients land in `grads` (resized);
    // if dX is non-null the input gradient is written there.
    void backward_batch(const ForwardCache& cache, std::span<const double> dY,
                        GradientBundle& grads, std::vector<double>* dX = nullptr) const;

    // Input gradient only; parameters of this net get no gradients.
    // Gradients flowing from a critic into actor actions take this path.
    std::vector<double> backward_batch_input(const ForwardCache& cache,
                                             std::span<const double> dY) const;

    GradientBundle make_gradient_bundle() const;

    // Direct parameter access (adam/soft-update/serialization).
    struct Layer {
        int in = 0;
        int out = 0;
        Activation act = Activation::Linear;
        std::vector<double> w;  // out x in, row-major
        std::vector<double> b;  // out
    };
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

private:
    std::vector<Layer> layers_;
};

struct AdamState {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t step = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
};

AdamState make_adam_state(const DenseNet& net, double lr = 3e-4);

// Bias-corrected Adam update. Non-finite gradients reject the whole
// update (state untouched) with DivergenceError.
void adam_step(DenseNet& net, const GradientBundle& grads, AdamState& state);

// target <- tau * online + (1 - tau) * target, per parameter.
void soft_update(DenseNet& target, const DenseNet& online, double tau);

// Scalar Adam for lone trainable scalars (the entropy temperature).
struct AdamScalar {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t step = 0;
    double m = 0.0;
    double v = 0.0;

    void update(double& param, double grad);
};

// Checkpoint block: magic "NAVF", version, layer manifest, little-endian
// 64-bit parameters, optional Adam state, trailing CRC.
void append_net_block(ByteWriter& w, const DenseNet& net,
                      const AdamState* adam = nullptr);
DenseNet read_net_block(ByteReader& r, AdamState* adam = nullptr);

void save_net_file(const std::string& path, const DenseNet& net,
                   const AdamState* adam = nullptr);
DenseNet load_net_file(const std::string& path, AdamState* adam = nullptr);

std::string manifest_string(const std::vector<LayerSpec>& m);

// Throws IoError carrying both manifests when a loaded net does not have
// the architecture the caller requires.
void require_manifest(const DenseNet& net, const std::vector<LayerSpec>& expected);

}  // namespace navforge
