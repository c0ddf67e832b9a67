#include "ggr/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "ggr/stats.hpp"

namespace ggr {

TestResult f_test(std::span<const double> x, std::span<const int> y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::invalid_argument("f_test: need matching x/y with n >= 3");
    double sum[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw std::invalid_argument("f_test: non-finite input");
        if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("f_test: labels must be 0/1");
        sum[y[i]] += x[i];
        ++count[y[i]];
    }
    if (count[0] == 0 || count[1] == 0) throw std::invalid_argument("f_test: single-class input");

    const double n = static_cast<double>(x.size());
    const double grand = (sum[0] + sum[1]) / n;
    const double mean0 = sum[0] / count[0], mean1 = sum[1] / count[1];
    double ssw = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - (y[i] ? mean1 : mean0);
        ssw += d * d;
    }
    const double ssb = count[0] * (mean0 - grand) * (mean0 - grand) +
                       count[1] * (mean1 - grand) * (mean1 - grand);
    const double df1 = 1.0, df2 = n - 2.0;
    const double msb = ssb / df1;
    const double msw = ssw / df2;
    TestResult res;
    if (msw <= 0.0) {
        // zero within-class variance: F defined 0 when means also coincide
        res.score = ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        res.p = ssb > 0.0 ? 0.0 : 1.0;
        return res;
    }
    res.score = msb / msw;
    res.p = stats::f_upper_tail(res.score, df1, df2);
    return res;
}

TestResult chi2_test(std::span<const double> x, std::span<const int> y) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("chi2_test: size mismatch");
    double obs[2] = {0.0, 0.0};
    long count[2] = {0, 0};
    double total = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0)) throw std::invalid_argument("chi2_test: x must be non-negative");
        if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("chi2_test: labels must be 0/1");
        obs[y[i]] += x[i];
        ++count[y[i]];
        total += x[i];
    }
    TestResult res;
    if (total <= 0.0) {
        res.score = 0.0;
        res.p = 1.0;
        return res;
    }
    const double n = static_cast<double>(x.size());
    double chi2 = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double expected = total * (static_cast<double>(count[c]) / n);
        if (expected > 0.0) {
            const double d = obs[c] - expected;
            chi2 += d * d / expected;
        }
    }
    res.score = chi2;
    res.p = stats::chi2_upper_tail(chi2, 1.0);
    return res;
}

double lasso_lambda_max(const Matrix& x, std::span<const double> y) {
    double m = 0.0;
    for (int j = 0; j < x.cols(); ++j) {
        double dot = 0.0;
        for (int i = 0; i < x.rows(); ++i) dot += x(i, j) * y[i];
        m = std::max(m, std::fabs(dot));
    }
    return m;
}

LassoResult lasso_fit(const Matrix& x, std::span<const double> y, double lambda) {
    const int n = x.rows(), d = x.cols();
    if (static_cast<size_t>(n) != y.size()) throw std::invalid_argument("lasso_fit: size mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso_fit: lambda must be >= 0");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("lasso_fit: non-finite y");
    for (int i = 0; i < static_cast<int>(x.size()); ++i)
        if (!std::isfinite(x.data()[i])) throw std::invalid_argument("lasso_fit: non-finite X");

    std::vector<double> col_sq(d, 0.0);
    for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += x(i, j) * x(i, j);
        col_sq[j] = s;
    }

    LassoResult res;
    res.beta.assign(d, 0.0);
    std::vector<double> residual(y.begin(), y.end());  // r = y - X beta

    auto objective = [&]() {
        double sq = 0.0;
        for (double r : residual) sq += r * r;
        double l1 = 0.0;
        for (double b : res.beta) l1 += std::fabs(b);
        return 0.5 * sq + lambda * l1;
    };

    double prev_obj = objective();
    constexpr int kMaxSweeps = 10000;
    constexpr double kTol = 1e-8;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double max_change = 0.0;
        for (int j = 0; j < d; ++j) {
            if (col_sq[j] <= 0.0) continue;  // all-zero column stays at 0
            const double old = res.beta[j];
            double rho = 0.0;
            for (int i = 0; i < n; ++i) rho += x(i, j) * residual[i];
            rho += col_sq[j] * old;
            const double mag = std::fabs(rho) - lambda;
            const double next = mag > 0.0 ? std::copysign(mag, rho) / col_sq[j] : 0.0;
            const double delta = next - old;
            if (delta != 0.0) {
                for (int i = 0; i < n; ++i) residual[i] -= delta * x(i, j);
                res.beta[j] = next;
            }
            max_change = std::max(max_change, std::fabs(delta));
        }
        res.sweeps = sweep + 1;
        const double obj = objective();
        if (obj > prev_obj + 1e-9 * (1.0 + std::fabs(prev_obj)))
            throw std::runtime_error("lasso_fit: objective increased across a sweep");
        prev_obj = obj;
        if (max_change < kTol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

std::vector<int> select_by_pvalue(std::span<const double> pvalues, double threshold) {
    std::vector<int> out;
    for (size_t i = 0; i < pvalues.size(); ++i)
        if (pvalues[i] < threshold) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> top_k_by_pvalue(std::span<const double> pvalues, std::span<const double> scores,
                                 int k) {
    std::vector<int> idx(pvalues.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (pvalues[a] != pvalues[b]) return pvalues[a] < pvalues[b];
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    idx.resize(std::min<size_t>(idx.size(), static_cast<size_t>(std::max(k, 0))));
    std::sort(idx.begin(), idx.end());
    return idx;
}

SelectionMethod parse_selection_method(const std::string& name) {
    if (name == "none") return SelectionMethod::none;
    if (name == "ftest") return SelectionMethod::ftest;
    if (name == "chi2") return SelectionMethod::chi2;
    if (name == "lasso") return SelectionMethod::lasso;
    if (name == "intersection") return SelectionMethod::intersection;
    throw std::invalid_argument("unknown selection method: " + name);
}

std::string selection_method_name(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::none: return "none";
        case SelectionMethod::ftest: return "ftest";
        case SelectionMethod::chi2: return "chi2";
        case SelectionMethod::lasso: return "lasso";
        case SelectionMethod::intersection: return "intersection";
    }
    return "?";
}

namespace {

std::vector<double> column(const Matrix& x, int j) {
    std::vector<double> v(x.rows());
    for (int i = 0; i < x.rows(); ++i) v[i] = x(i, j);
    return v;
}

// Column-wise min-max scaling to [0,1]; constant columns map to 0.
Matrix minmax_scaled(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        double lo = x(0, j), hi = x(0, j);
        for (int i = 1; i < x.rows(); ++i) {
            lo = std::min(lo, x(i, j));
            hi = std::max(hi, x(i, j));
        }
        const double range = hi - lo;
        for (int i = 0; i < x.rows(); ++i)
            out(i, j) = range > 0.0 ? (x(i, j) - lo) / range : 0.0;
    }
    return out;
}

// Column-standardized X (population SD; constant columns become 0) and
// centered y for the LASSO path. Also reports |X^T y| per column, the
// ranking used when the support comes back empty.
std::vector<int> lasso_support(const Matrix& x, std::span<const int> y, double lambda_frac,
                               std::vector<double>* correlation_out) {
    const int n = x.rows(), d = x.cols();
    Matrix xs(n, d);
    for (int j = 0; j < d; ++j) {
        const auto col = column(x, j);
        const double m = stats::mean(col);
        const double sd = stats::sd_population(col);
        for (int i = 0; i < n; ++i) xs(i, j) = sd > 0.0 ? (x(i, j) - m) / sd : 0.0;
    }
    std::vector<double> yc(n);
    double ym = 0.0;
    for (int i = 0; i < n; ++i) ym += y[i];
    ym /= n;
    for (int i = 0; i < n; ++i) yc[i] = y[i] - ym;

    if (correlation_out) {
        correlation_out->assign(d, 0.0);
        for (int j = 0; j < d; ++j) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += xs(i, j) * yc[i];
            (*correlation_out)[j] = std::fabs(dot);
        }
    }
    const double lambda = lambda_frac * lasso_lambda_max(xs, yc);
    const LassoResult fit = lasso_fit(xs, yc, lambda);
    std::vector<int> support;
    for (int j = 0; j < d; ++j)
        if (fit.beta[j] != 0.0) support.push_back(j);
    return support;
}

}  // namespace

SelectionResult select_features(const Matrix& x, std::span<const int> y,
                                const SelectionConfig& config) {
    const int d = x.cols();
    if (x.rows() < 3 || d < 1) throw std::invalid_argument("select_features: degenerate input");

    SelectionResult res;
    res.method = config.method;
    res.threshold = config.pvalue;
    res.scores.assign(d, 0.0);
    res.pvalues.assign(d, std::numeric_limits<double>::quiet_NaN());

    if (config.method == SelectionMethod::none) {
        res.selected.resize(d);
        std::iota(res.selected.begin(), res.selected.end(), 0);
        return res;
    }

    if (config.method == SelectionMethod::lasso) {
        std::vector<double> corr;
        res.selected = lasso_support(x, y, config.lambda_frac, &corr);
        res.scores = corr;
        if (res.selected.empty()) {
            res.used_fallback = true;
            res.note = "empty LASSO support; fell back to top-k by |X^T y|";
            std::vector<double> pseudo_p(d);
            for (int j = 0; j < d; ++j) pseudo_p[j] = -corr[j];  // rank only
            res.selected = top_k_by_pvalue(pseudo_p, corr, config.fallback_top_k);
        }
        return res;
    }

    // univariate tests
    std::vector<double> f_p(d), f_score(d), c_p(d), c_score(d);
    const Matrix scaled = minmax_scaled(x);
    for (int j = 0; j < d; ++j) {
        const auto col = column(x, j);
        const TestResult f = f_test(col, y);
        f_score[j] = f.score;
        f_p[j] = f.p;
        const TestResult c = chi2_test(column(scaled, j), y);
        c_score[j] = c.score;
        c_p[j] = c.p;
    }

    if (config.method == SelectionMethod::ftest) {
        res.scores = f_score;
        res.pvalues = f_p;
        res.selected = select_by_pvalue(f_p, config.pvalue);
        if (res.selected.empty()) {
            res.used_fallback = true;
            res.note = "no F-test p below threshold; fell back to top-k by p";
            res.selected = top_k_by_pvalue(f_p, f_score, config.fallback_top_k);
        }
        return res;
    }
    if (config.method == SelectionMethod::chi2) {
        res.scores = c_score;
        res.pvalues = c_p;
        res.selected = select_by_pvalue(c_p, config.pvalue);
        if (res.selected.empty()) {
            res.used_fallback = true;
            res.note = "no chi2 p below threshold; fell back to top-k by p";
            res.selected = top_k_by_pvalue(c_p, c_score, config.fallback_top_k);
        }
        return res;
    }

    // intersection of LASSO support, F-test and chi2 p < threshold
    res.scores = f_score;
    res.pvalues = f_p;
    const auto lasso_set = lasso_support(x, y, config.lambda_frac, nullptr);
    const auto f_set = select_by_pvalue(f_p, config.pvalue);
    const auto c_set = select_by_pvalue(c_p, config.pvalue);
    std::set<int> inter(lasso_set.begin(), lasso_set.end());
    auto intersect = [&inter](const std::vector<int>& keep) {
        std::set<int> next;
        for (int i : keep)
            if (inter.count(i)) next.insert(i);
        inter = std::move(next);
    };
    intersect(f_set);
    intersect(c_set);
    res.selected.assign(inter.begin(), inter.end());

    if (res.selected.empty()) {
        // Documented fallback chain: F-test selection, then top-k by p.
        res.used_fallback = true;
        res.selected = f_set;
        res.note = "empty intersection; fell back to F-test selection";
        if (res.selected.empty()) {
            res.selected = top_k_by_pvalue(f_p, f_score, config.fallback_top_k);
            res.note = "empty intersection and F-test set; fell back to top-k by p";
        }
    }
    return res;
}

}  // namespace ggr
