#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ggr/array.hpp"

namespace ggr {

enum class Activation : uint8_t { linear = 0, relu = 1, sigmoid = 2 };
enum class Loss : uint8_t { mse = 0, bce = 1 };

struct LayerSpec {
    int in = 0, out = 0;
    Activation act = Activation::linear;
};

// Plain dense network. Weights are out x in, row-major. Initialization is
// uniform in +-sqrt(6/(fan_in+fan_out)), drawn from the seeded portable RNG,
// weights first then biases (biases start at zero).
class DenseNetwork {
public:
    struct Layer {
        LayerSpec spec;
        std::vector<double> w;  // out x in
        std::vector<double> b;  // out
    };

    DenseNetwork() = default;
    static DenseNetwork create(const std::vector<LayerSpec>& specs, uint64_t seed);

    int input_width() const { return layers_.empty() ? 0 : layers_.front().spec.in; }
    int output_width() const { return layers_.empty() ? 0 : layers_.back().spec.out; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    size_t parameter_count() const;

    std::vector<double> forward(std::span<const double> input) const;
    Matrix forward_batch(const Matrix& inputs) const;  // n x out

private:
    std::vector<Layer> layers_;
};

double mse_loss(std::span<const double> pred, std::span<const double> target);
// Predictions are clipped to [1e-7, 1-1e-7] before the log terms.
double bce_loss(std::span<const double> pred, std::span<const double> label);
double batch_loss(const Matrix& pred, const Matrix& target, Loss loss);

struct Gradients {
    struct LayerGrad {
        std::vector<double> dw, db;
    };
    std::vector<LayerGrad> layers;
    Matrix dinput;  // gradient of the mean loss w.r.t. the input batch
};

// Exact reverse-mode gradients of the mean batch loss.
Gradients backward(const DenseNetwork& net, const Matrix& inputs, const Matrix& targets, Loss loss);
// Same, but seeded with an externally supplied d(loss)/d(output) matrix —
// used to chain composite models.
Gradients backward_from_output_grad(const DenseNetwork& net, const Matrix& inputs,
                                    const Matrix& output_grad);

struct SgdState {
    struct LayerVel {
        std::vector<double> vw, vb;
    };
    std::vector<LayerVel> layers;
    long t = 0;  // completed updates

    static SgdState for_network(const DenseNetwork& net);
};

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double decay = 1e-6;  // lr_t = lr0 / (1 + decay*t), t = prior update count
    int epochs = 300;
    int batch_size = 0;  // 0 = full batch
    uint64_t seed = 0;   // initialization and batch-order shuffling
    Loss loss = Loss::mse;
    int patience = 50;        // plateau early stop; <= 0 disables
    double min_delta = 1e-6;

    void validate() const;
};

// lr_t = lr0/(1+decay*t); v <- momentum*v - lr_t*grad; param += v.
void sgd_step(DenseNetwork& net, const Gradients& grads, SgdState& state,
              const TrainConfig& config);

// Returns the per-epoch training loss trace (loss of the forward pass each
// update batch, averaged over the epoch). Throws on divergence.
std::vector<double> train(DenseNetwork& net, const Matrix& inputs, const Matrix& targets,
                          const TrainConfig& config);

// Max relative error between analytic and central finite-difference
// gradients over all parameters.
double gradient_check(const DenseNetwork& net, std::span<const double> input,
                      std::span<const double> target, Loss loss, double epsilon);

// Versioned binary serialization (GGRNET01), documented in docs/formats.md.
void save_network(const DenseNetwork& net, std::ostream& out);
DenseNetwork load_network(std::istream& in);

}  // namespace ggr
