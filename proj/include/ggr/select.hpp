#pragma once

#include <span>
#include <string>
#include <vector>

#include "ggr/array.hpp"

namespace ggr {

struct TestResult {
    double score = 0.0;
    double p = 1.0;
};

// One-way ANOVA between the two label groups; p from the F(1, n-2) upper tail.
TestResult f_test(std::span<const double> x, std::span<const int> y);

// Univariate chi-square on per-class sums of a non-negative feature, df = 1.
TestResult chi2_test(std::span<const double> x, std::span<const int> y);

struct LassoResult {
    std::vector<double> beta;
    int sweeps = 0;
    bool converged = false;
};

// Minimizes (1/2)||y - X beta||^2 + lambda*||beta||_1 by cyclic coordinate
// descent with soft thresholding. Columns are used as given (callers
// standardize); stops when the largest coordinate change in a sweep is
// below 1e-8, or after 10^4 sweeps. The objective is checked to be
// non-increasing every sweep.
LassoResult lasso_fit(const Matrix& x, std::span<const double> y, double lambda);
double lasso_lambda_max(const Matrix& x, std::span<const double> y);  // ||X^T y||_inf

// Indices with p < threshold (strict), ascending.
std::vector<int> select_by_pvalue(std::span<const double> pvalues, double threshold = 0.02);

// Smallest-p indices (ties by larger score, then lower index), ascending result.
std::vector<int> top_k_by_pvalue(std::span<const double> pvalues, std::span<const double> scores,
                                 int k);

enum class SelectionMethod { none, ftest, chi2, lasso, intersection };
SelectionMethod parse_selection_method(const std::string& name);
std::string selection_method_name(SelectionMethod m);

struct SelectionConfig {
    SelectionMethod method = SelectionMethod::intersection;
    double pvalue = 0.02;
    double lambda_frac = 0.1;  // lambda = lambda_frac * lambda_max
    // Last-resort fallback when even the F-test set is empty: top-k by p.
    int fallback_top_k = 8;
};

struct SelectionResult {
    SelectionMethod method = SelectionMethod::none;
    std::vector<double> scores;   // per feature; LASSO reports |beta|
    std::vector<double> pvalues;  // NaN where undefined (lasso, none)
    std::vector<int> selected;    // ascending
    double threshold = 0.02;
    bool used_fallback = false;
    std::string note;
};

// Columns of x are features. LASSO standardizes internally and centers y;
// chi2 sees min-max scaled columns. intersection = lasso support AND f-test
// p < t AND chi2 p < t, with the documented fallback chain when empty.
SelectionResult select_features(const Matrix& x, std::span<const int> y,
                                const SelectionConfig& config);

}  // namespace ggr
