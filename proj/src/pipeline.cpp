#include "ggr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ggr/rng.hpp"
#include "ggr/stats.hpp"

namespace ggr {

Mode parse_mode(const std::string& name) {
    for (Mode m : all_modes())
        if (mode_name(m) == name) return m;
    throw std::invalid_argument("unknown mode: " + name);
}

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::ggr_fusion: return "ggr_fusion";
        case Mode::ggr_handcrafted: return "ggr_handcrafted";
        case Mode::ggr_deep: return "ggr_deep";
        case Mode::direct_radiomics: return "direct_radiomics";
        case Mode::direct_deep: return "direct_deep";
        case Mode::direct_fusion: return "direct_fusion";
        case Mode::gene_truth: return "gene_truth";
        case Mode::gene_truth_plus_radiomics: return "gene_truth_plus_radiomics";
    }
    return "?";
}

std::vector<Mode> all_modes() {
    return {Mode::ggr_fusion,      Mode::ggr_handcrafted, Mode::ggr_deep,
            Mode::direct_radiomics, Mode::direct_deep,     Mode::direct_fusion,
            Mode::gene_truth,       Mode::gene_truth_plus_radiomics};
}

bool mode_uses_deep(Mode mode) {
    return mode == Mode::ggr_fusion || mode == Mode::ggr_deep || mode == Mode::direct_deep ||
           mode == Mode::direct_fusion;
}

bool mode_uses_handcrafted(Mode mode) {
    return mode != Mode::ggr_deep && mode != Mode::direct_deep && mode != Mode::gene_truth;
}

bool mode_estimates_genes(Mode mode) {
    return mode == Mode::ggr_fusion || mode == Mode::ggr_handcrafted || mode == Mode::ggr_deep;
}

bool mode_uses_true_genes(Mode mode) {
    return mode == Mode::gene_truth || mode == Mode::gene_truth_plus_radiomics;
}

Standardizer Standardizer::fit(const Matrix& x) {
    Standardizer s;
    s.mean.resize(x.cols());
    s.sd.resize(x.cols());
    std::vector<double> col(x.rows());
    for (int j = 0; j < x.cols(); ++j) {
        for (int i = 0; i < x.rows(); ++i) col[i] = x(i, j);
        s.mean[j] = stats::mean(col);
        const double sd = stats::sd_population(col);
        s.sd[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (static_cast<size_t>(x.cols()) != mean.size())
        throw std::invalid_argument("Standardizer: width mismatch");
    Matrix out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / sd[j];
    return out;
}

std::vector<double> Standardizer::apply_row(std::span<const double> row) const {
    if (row.size() != mean.size()) throw std::invalid_argument("Standardizer: width mismatch");
    std::vector<double> out(row.size());
    for (size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / sd[j];
    return out;
}

int GeneRegressor::handcrafted_width() const {
    const int concat = trunk.input_width();
    return deep_reducer ? concat - deep_reducer->output_width() : concat;
}

double GeneRegressor::predict(std::span<const double> hand, std::span<const double> deep) const {
    std::vector<double> input;
    input.reserve(trunk.input_width());
    input.insert(input.end(), hand.begin(), hand.end());
    if (deep_reducer) {
        const auto reduced = deep_reducer->forward(deep);
        input.insert(input.end(), reduced.begin(), reduced.end());
    }
    return trunk.forward(input)[0];
}

GeneRegressor build_gene_regressor(int n_handcrafted, int n_deep_selected, int reduce_width,
                                   int hidden_width, uint64_t seed) {
    if (n_handcrafted < 0 || n_deep_selected < 0 || hidden_width < 1)
        throw std::invalid_argument("build_gene_regressor: invalid widths");
    if (n_handcrafted == 0 && n_deep_selected == 0)
        throw std::invalid_argument("build_gene_regressor: no input branch");
    GeneRegressor reg;
    int concat = n_handcrafted;
    if (n_deep_selected > 0) {
        if (reduce_width < 1) throw std::invalid_argument("build_gene_regressor: invalid reduce width");
        reg.deep_reducer = DenseNetwork::create(
            {{n_deep_selected, reduce_width, Activation::linear}}, Rng::mix(seed, 1));
        concat += reduce_width;
    }
    reg.trunk = DenseNetwork::create({{concat, hidden_width, Activation::relu},
                                      {hidden_width, 1, Activation::linear}},
                                     Rng::mix(seed, 2));
    return reg;
}

namespace {

Matrix select_columns(const Matrix& x, const std::vector<int>& cols) {
    Matrix out(x.rows(), static_cast<int>(cols.size()));
    for (int i = 0; i < x.rows(); ++i)
        for (size_t j = 0; j < cols.size(); ++j) {
            const int c = cols[j];
            if (c < 0 || c >= x.cols()) throw std::out_of_range("selection index out of range");
            out(i, static_cast<int>(j)) = x(i, c);
        }
    return out;
}

std::vector<double> select_row(std::span<const double> row, const std::vector<int>& cols) {
    std::vector<double> out;
    out.reserve(cols.size());
    for (int c : cols) {
        if (c < 0 || static_cast<size_t>(c) >= row.size())
            throw std::out_of_range("selection index out of range");
        out.push_back(row[c]);
    }
    return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0 || a.cols() == 0) return b;
    if (b.rows() == 0 || b.cols() == 0) return a;
    if (a.rows() != b.rows()) throw std::invalid_argument("hstack: row mismatch");
    Matrix out(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

// Top-k handcrafted indices by F-test p-value against the labels.
std::vector<int> handcrafted_topk(const Matrix& hand, std::span<const int> labels, int k) {
    std::vector<double> p(hand.cols()), score(hand.cols());
    std::vector<double> col(hand.rows());
    for (int j = 0; j < hand.cols(); ++j) {
        for (int i = 0; i < hand.rows(); ++i) col[i] = hand(i, j);
        const TestResult r = f_test(col, labels);
        p[j] = r.p;
        score[j] = r.score;
    }
    return top_k_by_pvalue(p, score, k);
}

// Deep selection: F-test p < threshold, falling back to top-k when empty.
std::vector<int> deep_select(const Matrix& deep, std::span<const int> labels, double pvalue,
                             int fallback_k, bool& used_fallback) {
    std::vector<double> p(deep.cols()), score(deep.cols());
    std::vector<double> col(deep.rows());
    for (int j = 0; j < deep.cols(); ++j) {
        for (int i = 0; i < deep.rows(); ++i) col[i] = deep(i, j);
        const TestResult r = f_test(col, labels);
        p[j] = r.p;
        score[j] = r.score;
    }
    auto sel = select_by_pvalue(p, pvalue);
    if (sel.empty()) {
        used_fallback = true;
        sel = top_k_by_pvalue(p, score, fallback_k);
    }
    return sel;
}

// Joint full-batch training of the (reducer, trunk) pair with a shared SGD
// schedule; mirrors net::train including plateau early stop and divergence
// detection. Returns the final training loss.
double train_regressor(GeneRegressor& reg, const Matrix& hand, const Matrix& deep,
                       const Matrix& targets, const TrainConfig& config) {
    config.validate();
    const int n = targets.rows();
    SgdState trunk_state = SgdState::for_network(reg.trunk);
    SgdState reducer_state;
    if (reg.deep_reducer) reducer_state = SgdState::for_network(*reg.deep_reducer);

    double best = std::numeric_limits<double>::infinity();
    double last = std::numeric_limits<double>::quiet_NaN();
    int since_best = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Matrix reduced(n, 0);
        if (reg.deep_reducer) reduced = reg.deep_reducer->forward_batch(deep);
        const Matrix concat = hstack(hand, reduced);
        const Matrix out = reg.trunk.forward_batch(concat);
        const double loss = batch_loss(out, targets, Loss::mse);
        if (!std::isfinite(loss))
            throw std::runtime_error("regressor diverged at epoch " + std::to_string(epoch));
        last = loss;

        Gradients trunk_grads = backward(reg.trunk, concat, targets, Loss::mse);
        if (reg.deep_reducer) {
            const int off = hand.cols();
            Matrix gout(n, reg.deep_reducer->output_width());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < gout.cols(); ++j) gout(i, j) = trunk_grads.dinput(i, off + j);
            const Gradients red_grads = backward_from_output_grad(*reg.deep_reducer, deep, gout);
            sgd_step(*reg.deep_reducer, red_grads, reducer_state, config);
        }
        sgd_step(reg.trunk, trunk_grads, trunk_state, config);

        if (config.patience > 0) {
            if (loss < best - config.min_delta) {
                best = loss;
                since_best = 0;
            } else if (++since_best >= config.patience) {
                break;
            }
        }
    }
    return last;
}

}  // namespace

GgrPipeline train_pipeline(Mode mode, const TrainData& data, const PipelineConfig& config) {
    const int n = data.handcrafted.rows() > 0 ? data.handcrafted.rows() : data.genes.rows();
    if (n < 4) throw std::invalid_argument("train_pipeline: too few training patients");
    if (static_cast<int>(data.labels.size()) != n)
        throw std::invalid_argument("train_pipeline: label count mismatch");
    {
        int pos = 0;
        for (int y : data.labels) pos += y;
        if (pos == 0 || pos == n)
            throw std::runtime_error("train_pipeline: single-class training fold");
    }
    if (mode_uses_deep(mode) && data.deep.cols() == 0)
        throw std::invalid_argument("train_pipeline: mode requires deep features");
    if ((mode_estimates_genes(mode) || mode_uses_true_genes(mode)) && data.genes.cols() == 0)
        throw std::invalid_argument("train_pipeline: mode requires gene data");

    GgrPipeline pipe;
    pipe.mode = mode;

    // fold-local feature selections
    if (mode_uses_handcrafted(mode))
        pipe.handcrafted_sel = handcrafted_topk(data.handcrafted, data.labels,
                                                std::min(config.n_handcrafted, data.handcrafted.cols()));
    bool deep_fallback = false;
    if (mode_uses_deep(mode))
        pipe.deep_sel = deep_select(data.deep, data.labels, config.deep_pvalue,
                                    std::min(config.reduce_width, data.deep.cols()), deep_fallback);

    Matrix hand_sel, deep_sel_m;
    if (!pipe.handcrafted_sel.empty()) {
        hand_sel = select_columns(data.handcrafted, pipe.handcrafted_sel);
        pipe.hand_in = Standardizer::fit(hand_sel);
        hand_sel = pipe.hand_in.apply(hand_sel);
    }
    if (!pipe.deep_sel.empty()) {
        deep_sel_m = select_columns(data.deep, pipe.deep_sel);
        pipe.deep_in = Standardizer::fit(deep_sel_m);
        deep_sel_m = pipe.deep_in.apply(deep_sel_m);
    }

    Matrix clf_inputs;  // raw-scale classifier inputs, standardized below

    if (mode_estimates_genes(mode) || mode_uses_true_genes(mode)) {
        if (config.fixed_gene_selection) {
            pipe.gene_sel = *config.fixed_gene_selection;
        } else {
            SelectionResult gene_sel =
                select_features(data.genes, data.labels, config.gene_selection);
            pipe.gene_sel = gene_sel.selected;
            pipe.selection_fallback = gene_sel.used_fallback;
        }
        if (pipe.gene_sel.empty()) throw std::runtime_error("train_pipeline: no genes selected");
        for (int g : pipe.gene_sel)
            pipe.selected_gene_names.push_back(
                g < static_cast<int>(data.gene_names.size()) ? data.gene_names[g]
                                                             : "g" + std::to_string(g));
    }

    if (mode_estimates_genes(mode)) {
        const Matrix targets_raw = select_columns(data.genes, pipe.gene_sel);
        const int n_genes = targets_raw.cols();
        pipe.gene_mean.assign(n_genes, 0.0);
        pipe.gene_sd.assign(n_genes, 1.0);
        if (config.standardize_targets) {
            std::vector<double> col(n);
            for (int g = 0; g < n_genes; ++g) {
                for (int i = 0; i < n; ++i) col[i] = targets_raw(i, g);
                pipe.gene_mean[g] = stats::mean(col);
                const double sd = stats::sd_population(col);
                pipe.gene_sd[g] = sd > 0.0 ? sd : 1.0;
            }
        }

        pipe.regressor_final_mse.assign(n_genes, 0.0);
        for (int g = 0; g < n_genes; ++g) {
            GeneRegressor reg = build_gene_regressor(
                hand_sel.cols(), deep_sel_m.cols(), config.reduce_width, config.regressor_hidden,
                Rng::mix(config.seed, 1000 + static_cast<uint64_t>(g)));
            Matrix t(n, 1);
            for (int i = 0; i < n; ++i)
                t(i, 0) = (targets_raw(i, g) - pipe.gene_mean[g]) / pipe.gene_sd[g];
            TrainConfig tc = config.regressor_train;
            tc.seed = Rng::mix(config.seed, 5000 + static_cast<uint64_t>(g));
            try {
                train_regressor(reg, hand_sel, deep_sel_m, t, tc);
            } catch (const std::exception& e) {
                throw std::runtime_error("gene regressor '" + pipe.selected_gene_names[g] +
                                         "' failed: " + e.what());
            }
            // report the final fit in raw FPKM units
            double mse = 0.0;
            for (int i = 0; i < n; ++i) {
                std::vector<double> hrow(hand_sel.cols()), drow(deep_sel_m.cols());
                for (int j = 0; j < hand_sel.cols(); ++j) hrow[j] = hand_sel(i, j);
                for (int j = 0; j < deep_sel_m.cols(); ++j) drow[j] = deep_sel_m(i, j);
                const double est = reg.predict(hrow, drow) * pipe.gene_sd[g] + pipe.gene_mean[g];
                const double d = est - targets_raw(i, g);
                mse += d * d;
            }
            pipe.regressor_final_mse[g] = mse / n;
            pipe.regressors.push_back(std::move(reg));
        }

        // classifier trains on the fold's own gene estimates
        Matrix est(n, n_genes);
        for (int i = 0; i < n; ++i) {
            std::vector<double> hrow(hand_sel.cols()), drow(deep_sel_m.cols());
            for (int j = 0; j < hand_sel.cols(); ++j) hrow[j] = hand_sel(i, j);
            for (int j = 0; j < deep_sel_m.cols(); ++j) drow[j] = deep_sel_m(i, j);
            for (int g = 0; g < n_genes; ++g)
                est(i, g) = pipe.regressors[g].predict(hrow, drow) * pipe.gene_sd[g] +
                            pipe.gene_mean[g];
        }
        clf_inputs = est;
    } else if (mode_uses_true_genes(mode)) {
        clf_inputs = select_columns(data.genes, pipe.gene_sel);
        if (mode == Mode::gene_truth_plus_radiomics)
            clf_inputs = hstack(clf_inputs, select_columns(data.handcrafted, pipe.handcrafted_sel));
    } else {
        // direct feature baselines on raw selected columns
        Matrix features;
        if (mode_uses_handcrafted(mode))
            features = select_columns(data.handcrafted, pipe.handcrafted_sel);
        if (mode_uses_deep(mode)) features = hstack(features, select_columns(data.deep, pipe.deep_sel));
        clf_inputs = features;
    }

    if (clf_inputs.cols() == 0) throw std::runtime_error("train_pipeline: empty classifier input");
    pipe.clf_in = Standardizer::fit(clf_inputs);
    const Matrix clf_x = pipe.clf_in.apply(clf_inputs);
    Matrix clf_y(n, 1);
    for (int i = 0; i < n; ++i) clf_y(i, 0) = data.labels[i];

    pipe.classifier = DenseNetwork::create({{clf_x.cols(), config.classifier_hidden, Activation::relu},
                                            {config.classifier_hidden, 1, Activation::sigmoid}},
                                           Rng::mix(config.seed, 2));
    TrainConfig cc = config.classifier_train;
    cc.loss = Loss::bce;
    cc.seed = Rng::mix(config.seed, 3);
    train(pipe.classifier, clf_x, clf_y, cc);

    pipe.fitted = true;
    return pipe;
}

std::vector<double> estimate_genes(const GgrPipeline& pipe, std::span<const double> hand,
                                   std::span<const double> deep) {
    if (!pipe.fitted) throw std::runtime_error("estimate_genes: pipeline not fitted");
    if (!mode_estimates_genes(pipe.mode))
        throw std::runtime_error("estimate_genes: mode has no gene regressors");
    const auto hrow = pipe.handcrafted_sel.empty()
                          ? std::vector<double>{}
                          : pipe.hand_in.apply_row(select_row(hand, pipe.handcrafted_sel));
    const auto drow = pipe.deep_sel.empty()
                          ? std::vector<double>{}
                          : pipe.deep_in.apply_row(select_row(deep, pipe.deep_sel));
    std::vector<double> out(pipe.regressors.size());
    for (size_t g = 0; g < pipe.regressors.size(); ++g)
        out[g] = pipe.regressors[g].predict(hrow, drow) * pipe.gene_sd[g] + pipe.gene_mean[g];
    return out;
}

double predict_recurrence(const GgrPipeline& pipe, std::span<const double> hand,
                          std::span<const double> deep, std::span<const double> true_genes) {
    if (!pipe.fitted) throw std::runtime_error("predict_recurrence: pipeline not fitted");
    if (mode_uses_deep(pipe.mode) && deep.empty())
        throw std::runtime_error("predict_recurrence: mode requires deep features");

    std::vector<double> input;
    if (mode_estimates_genes(pipe.mode)) {
        input = estimate_genes(pipe, hand, deep);
    } else if (mode_uses_true_genes(pipe.mode)) {
        if (true_genes.empty())
            throw std::runtime_error("predict_recurrence: gene-truth mode requires gene data");
        input = select_row(true_genes, pipe.gene_sel);
        if (pipe.mode == Mode::gene_truth_plus_radiomics) {
            const auto h = select_row(hand, pipe.handcrafted_sel);
            input.insert(input.end(), h.begin(), h.end());
        }
    } else {
        if (mode_uses_handcrafted(pipe.mode)) input = select_row(hand, pipe.handcrafted_sel);
        if (mode_uses_deep(pipe.mode)) {
            const auto d = select_row(deep, pipe.deep_sel);
            input.insert(input.end(), d.begin(), d.end());
        }
    }
    const auto x = pipe.clf_in.apply_row(input);
    return pipe.classifier.forward(x)[0];
}

namespace {

void write_u32v(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

uint32_t read_u32v(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64v(std::ostream& out, const std::vector<double>& v) {
    write_u32v(out, static_cast<uint32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_f64v(std::istream& in) {
    const uint32_t n = read_u32v(in);
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}

void write_i32v(std::ostream& out, const std::vector<int>& v) {
    write_u32v(out, static_cast<uint32_t>(v.size()));
    for (int x : v) write_u32v(out, static_cast<uint32_t>(x));
}

std::vector<int> read_i32v(std::istream& in) {
    const uint32_t n = read_u32v(in);
    std::vector<int> v(n);
    for (auto& x : v) x = static_cast<int>(read_u32v(in));
    return v;
}

void write_str(std::ostream& out, const std::string& s) {
    write_u32v(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& in) {
    const uint32_t n = read_u32v(in);
    if (n > (1u << 20)) throw std::runtime_error("pipeline bundle: oversized string");
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

void write_standardizer(std::ostream& out, const Standardizer& s) {
    write_f64v(out, s.mean);
    write_f64v(out, s.sd);
}

Standardizer read_standardizer(std::istream& in) {
    Standardizer s;
    s.mean = read_f64v(in);
    s.sd = read_f64v(in);
    return s;
}

}  // namespace

void save_pipeline(const GgrPipeline& pipe, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write pipeline bundle: " + path.string());
    out.write("GGRPIPE1", 8);
    out.put(static_cast<char>(pipe.mode));
    out.put(pipe.fitted ? 1 : 0);
    write_i32v(out, pipe.handcrafted_sel);
    write_i32v(out, pipe.deep_sel);
    write_i32v(out, pipe.gene_sel);
    write_u32v(out, static_cast<uint32_t>(pipe.selected_gene_names.size()));
    for (const auto& s : pipe.selected_gene_names) write_str(out, s);
    write_standardizer(out, pipe.hand_in);
    write_standardizer(out, pipe.deep_in);
    write_standardizer(out, pipe.clf_in);
    write_f64v(out, pipe.gene_mean);
    write_f64v(out, pipe.gene_sd);
    write_u32v(out, static_cast<uint32_t>(pipe.regressors.size()));
    for (const auto& reg : pipe.regressors) {
        out.put(reg.deep_reducer ? 1 : 0);
        if (reg.deep_reducer) save_network(*reg.deep_reducer, out);
        save_network(reg.trunk, out);
    }
    save_network(pipe.classifier, out);
    if (!out) throw std::runtime_error("pipeline bundle write failed: " + path.string());
}

GgrPipeline load_pipeline(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open pipeline bundle: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "GGRPIPE1")
        throw std::runtime_error("bad pipeline bundle magic: " + path.string());
    GgrPipeline pipe;
    pipe.mode = static_cast<Mode>(in.get());
    pipe.fitted = in.get() != 0;
    pipe.handcrafted_sel = read_i32v(in);
    pipe.deep_sel = read_i32v(in);
    pipe.gene_sel = read_i32v(in);
    const uint32_t n_names = read_u32v(in);
    for (uint32_t i = 0; i < n_names; ++i) pipe.selected_gene_names.push_back(read_str(in));
    pipe.hand_in = read_standardizer(in);
    pipe.deep_in = read_standardizer(in);
    pipe.clf_in = read_standardizer(in);
    pipe.gene_mean = read_f64v(in);
    pipe.gene_sd = read_f64v(in);
    const uint32_t n_regs = read_u32v(in);
    for (uint32_t i = 0; i < n_regs; ++i) {
        GeneRegressor reg;
        if (in.get() != 0) reg.deep_reducer = load_network(in);
        reg.trunk = load_network(in);
        pipe.regressors.push_back(std::move(reg));
    }
    pipe.classifier = load_network(in);
    if (!in) throw std::runtime_error("truncated pipeline bundle: " + path.string());
    return pipe;
}

}  // namespace ggr
