#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ggr/array.hpp"
#include "ggr/net.hpp"
#include "ggr/select.hpp"

namespace ggr {

enum class Mode : uint8_t {
    ggr_fusion = 0,
    ggr_handcrafted = 1,
    ggr_deep = 2,
    direct_radiomics = 3,
    direct_deep = 4,
    direct_fusion = 5,
    gene_truth = 6,
    gene_truth_plus_radiomics = 7,
};

Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);
std::vector<Mode> all_modes();
bool mode_uses_deep(Mode mode);
bool mode_uses_handcrafted(Mode mode);
bool mode_estimates_genes(Mode mode);   // two-stage GGR variants
bool mode_uses_true_genes(Mode mode);   // gene-truth baselines

// Per-column standardization stats fitted on a training fold.
struct Standardizer {
    std::vector<double> mean, sd;  // sd 0 replaced by 1

    static Standardizer fit(const Matrix& x);
    Matrix apply(const Matrix& x) const;
    std::vector<double> apply_row(std::span<const double> row) const;
    bool empty() const { return mean.empty(); }
};

// One per selected gene: optional deep-reduction branch (D -> reduce width,
// linear) whose output is concatenated with the handcrafted features, then
// a relu hidden layer and a linear output. Branches train jointly.
struct GeneRegressor {
    std::optional<DenseNetwork> deep_reducer;
    DenseNetwork trunk;

    int handcrafted_width() const;
    double predict(std::span<const double> hand, std::span<const double> deep) const;
};

GeneRegressor build_gene_regressor(int n_handcrafted, int n_deep_selected, int reduce_width,
                                   int hidden_width, uint64_t seed);

struct PipelineConfig {
    int n_handcrafted = 12;      // top-k F-test handcrafted features
    int reduce_width = 12;       // deep branch reduction width
    int regressor_hidden = 16;
    int classifier_hidden = 32;
    double deep_pvalue = 0.02;   // deep-feature F-test threshold
    SelectionConfig gene_selection{};  // intersection, p < 0.02, lambda 0.1
    // Set to bypass per-fold gene selection (the --global-selection path).
    std::optional<std::vector<int>> fixed_gene_selection;
    bool standardize_targets = true;   // false = raw-FPKM targets
    TrainConfig regressor_train{5e-6, 0.9, 1e-6, 500, 0, 0, Loss::mse, 50, 1e-6};
    TrainConfig classifier_train{0.05, 0.9, 1e-6, 300, 0, 0, Loss::bce, 50, 1e-6};
    uint64_t seed = 0;
};

// Training-fold matrices. Deep/gene blocks may be empty when the mode does
// not use them.
struct TrainData {
    Matrix handcrafted;  // n x 450
    Matrix deep;         // n x D or 0 x 0
    Matrix genes;        // n x G or 0 x 0
    std::vector<std::string> gene_names;
    std::vector<int> labels;
};

struct GgrPipeline {
    Mode mode = Mode::ggr_fusion;
    std::vector<int> handcrafted_sel;
    std::vector<int> deep_sel;
    std::vector<int> gene_sel;
    std::vector<std::string> selected_gene_names;
    Standardizer hand_in, deep_in;       // model input scaling
    std::vector<double> gene_mean, gene_sd;  // target scaling (raw mode: 0/1)
    std::vector<GeneRegressor> regressors;
    Standardizer clf_in;                 // classifier input scaling
    DenseNetwork classifier;
    bool fitted = false;

    // diagnostics from fitting
    std::vector<double> regressor_final_mse;  // raw-scale, per gene
    bool selection_fallback = false;
};

GgrPipeline train_pipeline(Mode mode, const TrainData& data, const PipelineConfig& config);

// Per-gene estimates on the raw FPKM scale. hand/deep are full-width rows;
// the pipeline applies its own selections.
std::vector<double> estimate_genes(const GgrPipeline& pipeline, std::span<const double> hand,
                                   std::span<const double> deep);

// Recurrence probability for one patient; gene data is never an input.
double predict_recurrence(const GgrPipeline& pipeline, std::span<const double> hand,
                          std::span<const double> deep,
                          std::span<const double> true_genes = {});

void save_pipeline(const GgrPipeline& pipeline, const std::filesystem::path& path);
GgrPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace ggr
