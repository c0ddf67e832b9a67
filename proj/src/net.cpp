#include "ggr/net.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ggr/rng.hpp"

namespace ggr {

namespace {

constexpr double kBceClip = 1e-7;

double activate(double z, Activation act) {
    switch (act) {
        case Activation::linear: return z;
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

// derivative expressed through the activation output a (and pre-activation z
// for relu, where the derivative at the kink is taken as 0)
double activate_grad(double a, double z, Activation act) {
    switch (act) {
        case Activation::linear: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return a * (1.0 - a);
    }
    return 1.0;
}

void check_widths(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("network needs at least one layer");
    for (size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].in < 1 || specs[i].out < 1)
            throw std::invalid_argument("layer widths must be >= 1");
        if (i > 0 && specs[i].in != specs[i - 1].out)
            throw std::invalid_argument("consecutive layer widths incompatible");
    }
}

}  // namespace

DenseNetwork DenseNetwork::create(const std::vector<LayerSpec>& specs, uint64_t seed) {
    check_widths(specs);
    DenseNetwork net;
    Rng rng(seed);
    for (const auto& spec : specs) {
        Layer layer;
        layer.spec = spec;
        const double bound = std::sqrt(6.0 / (spec.in + spec.out));
        layer.w.resize(static_cast<size_t>(spec.out) * spec.in);
        for (double& w : layer.w) w = rng.uniform(-bound, bound);
        layer.b.assign(spec.out, 0.0);
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

size_t DenseNetwork::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
}

std::vector<double> DenseNetwork::forward(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != input_width())
        throw std::invalid_argument("forward: input width mismatch");
    for (double v : input)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    std::vector<double> a(input.begin(), input.end());
    for (const auto& layer : layers_) {
        std::vector<double> next(layer.spec.out);
        for (int o = 0; o < layer.spec.out; ++o) {
            double z = layer.b[o];
            const double* wrow = &layer.w[static_cast<size_t>(o) * layer.spec.in];
            for (int i = 0; i < layer.spec.in; ++i) z += wrow[i] * a[i];
            next[o] = activate(z, layer.spec.act);
        }
        a = std::move(next);
    }
    return a;
}

Matrix DenseNetwork::forward_batch(const Matrix& inputs) const {
    Matrix out(inputs.rows(), output_width());
    std::vector<double> row(inputs.cols());
    for (int r = 0; r < inputs.rows(); ++r) {
        for (int c = 0; c < inputs.cols(); ++c) row[c] = inputs(r, c);
        const auto y = forward(row);
        for (int c = 0; c < out.cols(); ++c) out(r, c) = y[c];
    }
    return out;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument("mse_loss: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = target[i] - pred[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

double bce_loss(std::span<const double> pred, std::span<const double> label) {
    if (pred.size() != label.size() || pred.empty())
        throw std::invalid_argument("bce_loss: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], kBceClip, 1.0 - kBceClip);
        s += label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p);
    }
    return -s / static_cast<double>(pred.size());
}

double batch_loss(const Matrix& pred, const Matrix& target, Loss loss) {
    const std::span<const double> p(pred.data(), pred.size());
    const std::span<const double> t(target.data(), target.size());
    return loss == Loss::mse ? mse_loss(p, t) : bce_loss(p, t);
}

namespace {

struct ForwardTrace {
    // per layer: pre-activations z and activations a, each n x out
    std::vector<Matrix> z, a;
};

ForwardTrace forward_trace(const DenseNetwork& net, const Matrix& inputs) {
    ForwardTrace tr;
    const Matrix* prev = &inputs;
    for (const auto& layer : net.layers()) {
        Matrix z(inputs.rows(), layer.spec.out), a(inputs.rows(), layer.spec.out);
        for (int r = 0; r < inputs.rows(); ++r)
            for (int o = 0; o < layer.spec.out; ++o) {
                double s = layer.b[o];
                const double* wrow = &layer.w[static_cast<size_t>(o) * layer.spec.in];
                for (int i = 0; i < layer.spec.in; ++i) s += wrow[i] * (*prev)(r, i);
                z(r, o) = s;
                a(r, o) = activate(s, layer.spec.act);
            }
        tr.z.push_back(std::move(z));
        tr.a.push_back(std::move(a));
        prev = &tr.a.back();
    }
    return tr;
}

Gradients backprop(const DenseNetwork& net, const Matrix& inputs, const ForwardTrace& tr,
                   Matrix delta /* dL/d(output activation) */) {
    const int n = inputs.rows();
    const auto& layers = net.layers();
    Gradients g;
    g.layers.resize(layers.size());

    for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
        const auto& layer = layers[li];
        const Matrix& a = tr.a[li];
        const Matrix& z = tr.z[li];
        // delta currently holds dL/da for this layer; convert to dL/dz
        for (int r = 0; r < n; ++r)
            for (int o = 0; o < layer.spec.out; ++o)
                delta(r, o) *= activate_grad(a(r, o), z(r, o), layer.spec.act);

        const Matrix& below = li == 0 ? inputs : tr.a[li - 1];
        auto& lg = g.layers[li];
        lg.dw.assign(layer.w.size(), 0.0);
        lg.db.assign(layer.b.size(), 0.0);
        for (int r = 0; r < n; ++r)
            for (int o = 0; o < layer.spec.out; ++o) {
                const double dz = delta(r, o);
                if (dz == 0.0) continue;
                double* dwrow = &lg.dw[static_cast<size_t>(o) * layer.spec.in];
                for (int i = 0; i < layer.spec.in; ++i) dwrow[i] += dz * below(r, i);
                lg.db[o] += dz;
            }

        Matrix prev_delta(n, layer.spec.in, 0.0);
        for (int r = 0; r < n; ++r)
            for (int o = 0; o < layer.spec.out; ++o) {
                const double dz = delta(r, o);
                if (dz == 0.0) continue;
                const double* wrow = &layer.w[static_cast<size_t>(o) * layer.spec.in];
                for (int i = 0; i < layer.spec.in; ++i) prev_delta(r, i) += dz * wrow[i];
            }
        delta = std::move(prev_delta);
    }
    g.dinput = std::move(delta);
    return g;
}

}  // namespace

Gradients backward(const DenseNetwork& net, const Matrix& inputs, const Matrix& targets,
                   Loss loss) {
    if (inputs.rows() != targets.rows() || targets.cols() != net.output_width())
        throw std::invalid_argument("backward: shape mismatch");
    const ForwardTrace tr = forward_trace(net, inputs);
    const Matrix& out = tr.a.back();
    const double m = static_cast<double>(out.size());
    Matrix delta(out.rows(), out.cols());
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) {
            if (loss == Loss::mse) {
                delta(r, c) = 2.0 * (out(r, c) - targets(r, c)) / m;
            } else {
                const double p = std::clamp(out(r, c), kBceClip, 1.0 - kBceClip);
                // clip treated as identity for the gradient
                delta(r, c) = (p - targets(r, c)) / (p * (1.0 - p)) / m;
            }
        }
    return backprop(net, inputs, tr, std::move(delta));
}

Gradients backward_from_output_grad(const DenseNetwork& net, const Matrix& inputs,
                                    const Matrix& output_grad) {
    if (inputs.rows() != output_grad.rows() || output_grad.cols() != net.output_width())
        throw std::invalid_argument("backward_from_output_grad: shape mismatch");
    const ForwardTrace tr = forward_trace(net, inputs);
    return backprop(net, inputs, tr, output_grad);
}

SgdState SgdState::for_network(const DenseNetwork& net) {
    SgdState st;
    for (const auto& l : net.layers()) {
        LayerVel v;
        v.vw.assign(l.w.size(), 0.0);
        v.vb.assign(l.b.size(), 0.0);
        st.layers.push_back(std::move(v));
    }
    return st;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
    if (!(decay >= 0.0)) throw std::invalid_argument("decay must be >= 0");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
}

void sgd_step(DenseNetwork& net, const Gradients& grads, SgdState& state,
              const TrainConfig& config) {
    if (grads.layers.size() != net.layers().size() || state.layers.size() != net.layers().size())
        throw std::invalid_argument("sgd_step: mismatched gradient/state shapes");
    const double lr = config.learning_rate / (1.0 + config.decay * static_cast<double>(state.t));
    for (size_t li = 0; li < net.layers().size(); ++li) {
        auto& layer = net.layers()[li];
        const auto& lg = grads.layers[li];
        auto& vel = state.layers[li];
        for (size_t i = 0; i < layer.w.size(); ++i) {
            if (!std::isfinite(lg.dw[i])) throw std::runtime_error("sgd_step: non-finite gradient");
            vel.vw[i] = config.momentum * vel.vw[i] - lr * lg.dw[i];
            layer.w[i] += vel.vw[i];
        }
        for (size_t i = 0; i < layer.b.size(); ++i) {
            if (!std::isfinite(lg.db[i])) throw std::runtime_error("sgd_step: non-finite gradient");
            vel.vb[i] = config.momentum * vel.vb[i] - lr * lg.db[i];
            layer.b[i] += vel.vb[i];
        }
    }
    ++state.t;
}

std::vector<double> train(DenseNetwork& net, const Matrix& inputs, const Matrix& targets,
                          const TrainConfig& config) {
    config.validate();
    if (inputs.rows() < 1) throw std::invalid_argument("train: empty dataset");
    if (inputs.rows() != targets.rows()) throw std::invalid_argument("train: input/target mismatch");

    SgdState state = SgdState::for_network(net);
    Rng shuffle_rng(Rng::mix(config.seed, 0x5badcafeULL));
    std::vector<double> trace;
    trace.reserve(config.epochs);

    const int n = inputs.rows();
    const int bs = config.batch_size > 0 ? std::min(config.batch_size, n) : n;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (bs < n) shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        long batches = 0;
        for (int start = 0; start < n; start += bs) {
            const int count = std::min(bs, n - start);
            Matrix bx(count, inputs.cols()), bt(count, targets.cols());
            for (int r = 0; r < count; ++r) {
                const int src = order[start + r];
                for (int c = 0; c < inputs.cols(); ++c) bx(r, c) = inputs(src, c);
                for (int c = 0; c < targets.cols(); ++c) bt(r, c) = targets(src, c);
            }
            const double loss = batch_loss(net.forward_batch(bx), bt, config.loss);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;
            ++batches;
            sgd_step(net, backward(net, bx, bt, config.loss), state, config);
        }
        epoch_loss /= static_cast<double>(batches);
        trace.push_back(epoch_loss);

        if (config.patience > 0) {
            if (epoch_loss < best - config.min_delta) {
                best = epoch_loss;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
    }
    return trace;
}

double gradient_check(const DenseNetwork& net, std::span<const double> input,
                      std::span<const double> target, Loss loss, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("gradient_check: epsilon must be > 0");
    Matrix x(1, static_cast<int>(input.size()));
    Matrix t(1, static_cast<int>(target.size()));
    for (size_t i = 0; i < input.size(); ++i) x(0, static_cast<int>(i)) = input[i];
    for (size_t i = 0; i < target.size(); ++i) t(0, static_cast<int>(i)) = target[i];

    const Gradients g = backward(net, x, t, loss);
    DenseNetwork probe = net;
    double worst = 0.0;

    auto loss_at = [&]() { return batch_loss(probe.forward_batch(x), t, loss); };
    for (size_t li = 0; li < probe.layers().size(); ++li) {
        auto check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
            for (size_t i = 0; i < params.size(); ++i) {
                const double saved = params[i];
                params[i] = saved + epsilon;
                const double up = loss_at();
                params[i] = saved - epsilon;
                const double down = loss_at();
                params[i] = saved;
                const double numeric = (up - down) / (2.0 * epsilon);
                const double denom = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
                worst = std::max(worst, std::fabs(numeric - analytic[i]) / denom);
            }
        };
        check(probe.layers()[li].w, g.layers[li].dw);
        check(probe.layers()[li].b, g.layers[li].db);
    }
    return worst;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(&v), 8);  // little-endian hosts
}

double read_f64(std::istream& in) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace

void save_network(const DenseNetwork& net, std::ostream& out) {
    out.write("GGRNET01", 8);
    write_u32(out, static_cast<uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
        write_u32(out, static_cast<uint32_t>(l.spec.in));
        write_u32(out, static_cast<uint32_t>(l.spec.out));
        out.put(static_cast<char>(l.spec.act));
        for (double w : l.w) write_f64(out, w);
        for (double b : l.b) write_f64(out, b);
    }
    if (!out) throw std::runtime_error("save_network: write failed");
}

DenseNetwork load_network(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "GGRNET01")
        throw std::runtime_error("load_network: bad magic");
    const uint32_t n_layers = read_u32(in);
    if (n_layers == 0 || n_layers > 1000) throw std::runtime_error("load_network: bad layer count");
    DenseNetwork net;
    for (uint32_t i = 0; i < n_layers; ++i) {
        DenseNetwork::Layer layer;
        layer.spec.in = static_cast<int>(read_u32(in));
        layer.spec.out = static_cast<int>(read_u32(in));
        const int act = in.get();
        if (act < 0 || act > 2) throw std::runtime_error("load_network: bad activation tag");
        layer.spec.act = static_cast<Activation>(act);
        if (layer.spec.in < 1 || layer.spec.out < 1 || layer.spec.in > (1 << 20) ||
            layer.spec.out > (1 << 20))
            throw std::runtime_error("load_network: bad layer widths");
        layer.w.resize(static_cast<size_t>(layer.spec.in) * layer.spec.out);
        for (double& w : layer.w) w = read_f64(in);
        layer.b.resize(layer.spec.out);
        for (double& b : layer.b) b = read_f64(in);
        net.layers().push_back(std::move(layer));
    }
    if (!in) throw std::runtime_error("load_network: truncated stream");
    return net;
}

}  // namespace ggr
