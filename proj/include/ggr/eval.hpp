#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ggr/array.hpp"
#include "ggr/cohort.hpp"
#include "ggr/pipeline.hpp"
#include "ggr/texture.hpp"

namespace ggr {

// Stratified, seeded, repeated k-fold plan. Within a repeat the test folds
// are disjoint, cover every index, differ in size by at most one, and keep
// each fold's class count within one patient of the proportional share.
struct FoldPlan {
    int k = 10;
    int repeats = 5;
    uint64_t seed = 0;
    bool stratified = true;
    std::vector<std::vector<std::vector<int>>> test_folds;  // [repeat][fold] -> indices

    std::vector<int> train_indices(int repeat, int fold, int n) const;
};

FoldPlan make_folds(std::span<const int> labels, int k, int repeats, uint64_t seed);

struct ConfusionMetrics {
    double accuracy, sensitivity, specificity;  // NaN when a denominator is empty
};

ConfusionMetrics confusion_metrics(std::span<const double> probabilities,
                                   std::span<const int> labels, double threshold = 0.5);

struct RocPoint {
    double fpr, tpr;
};

// Threshold sweep over the distinct scores (ties grouped), endpoints included.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area under roc_curve; equals the Mann-Whitney pair statistic.
double auc(std::span<const double> scores, std::span<const int> labels);

// Vertical averaging on a fixed 101-point FPR grid.
std::vector<RocPoint> average_roc(const std::vector<std::vector<RocPoint>>& curves);

struct FoldResult {
    int repeat = 0, fold = 0;
    ConfusionMetrics metrics{};
    double auc_value = 0.0;
    std::vector<RocPoint> roc;
    std::vector<int> test_indices;
    std::vector<double> probabilities;
};

struct CvReport {
    Mode mode = Mode::ggr_fusion;
    int k = 10, repeats = 5;
    uint64_t seed = 0;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0, sd_accuracy = 0.0;
    double mean_sensitivity = 0.0, sd_sensitivity = 0.0;
    double mean_specificity = 0.0, sd_specificity = 0.0;
    double mean_auc = 0.0, sd_auc = 0.0;
    std::vector<RocPoint> averaged_roc;
    bool hygiene_ok = false;  // no test-fold reads before the predict phase
    long hygiene_fit_reads = 0;
    std::string config_echo;
};

struct ExperimentConfig {
    PipelineConfig pipeline{};
    int k = 10;
    int repeats = 5;
    uint64_t seed = 0;
    int jobs = 1;
    TextureConfig texture{};
    // Select genes once on the full cohort instead of per fold. Leaks label
    // information across folds by design; the report flags it.
    bool global_gene_selection = false;
};

// Handcrafted features are a pure per-patient map; they are computed once
// and reused across folds and modes.
Matrix compute_handcrafted_matrix(const CohortDataset& cohort, const TextureConfig& config = {},
                                  int jobs = 1);

// Fits selection + pipeline on each training fold, predicts its test fold,
// aggregates over repeats x folds. `shared_plan` lets several modes run on
// one plan for paired comparison; `precomputed` skips feature extraction.
CvReport run_experiment(const CohortDataset& cohort, Mode mode, const ExperimentConfig& config,
                        const FoldPlan* shared_plan = nullptr, const Matrix* precomputed = nullptr);

// Report files: per-fold metrics CSV, averaged ROC CSV, summary CSV, SVG plot.
void write_report_files(const CvReport& report, const std::filesystem::path& dir,
                        const std::string& prefix);
void write_roc_svg(const std::vector<RocPoint>& curve, const std::string& title,
                   const std::filesystem::path& path);

// Deterministic per-fold seed, shared by the CLI stage commands.
uint64_t fold_seed(uint64_t base_seed, int repeat, int fold);

}  // namespace ggr
