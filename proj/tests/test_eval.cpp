#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "ggr/eval.hpp"
#include "ggr/rng.hpp"

using namespace ggr;

namespace {

// independent threshold-sweep ROC oracle
std::vector<RocPoint> roc_sweep_oracle(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    long pos = 0;
    for (int y : labels) pos += y;
    const long neg = static_cast<long>(labels.size()) - pos;
    std::vector<RocPoint> out{{0.0, 0.0}};
    for (double t : thresholds) {
        long tp = 0, fp = 0;
        for (size_t i = 0; i < scores.size(); ++i)
            if (scores[i] >= t) labels[i] ? ++tp : ++fp;
        out.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return out;
}

// Mann-Whitney pair-counting oracle
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] != 1 || labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    return wins / static_cast<double>(pairs);
}

std::vector<int> labels_88() {
    std::vector<int> labels(88, 0);
    for (int i = 0; i < 59; ++i) labels[i] = 1;  // 59 recurrences of 88
    return labels;
}

}  // namespace

TEST_CASE("fold plan: sizes, disjoint cover, stratification, determinism") {
    const auto labels = labels_88();
    const FoldPlan plan = make_folds(labels, 10, 5, 2024);
    CHECK(plan.stratified);
    for (int rep = 0; rep < 5; ++rep) {
        std::set<int> seen;
        for (const auto& fold : plan.test_folds[rep]) {
            CHECK(fold.size() >= 8);  // n=88, k=10 forces sizes in {8,9}
            CHECK(fold.size() <= 9);
            long pos = 0;
            for (int i : fold) {
                CHECK(seen.insert(i).second);  // disjoint
                pos += labels[i];
            }
            // class count within one patient of the proportional share
            const double expected = 59.0 * static_cast<double>(fold.size()) / 88.0;
            CHECK(std::fabs(static_cast<double>(pos) - expected) <= 1.0);
        }
        CHECK(seen.size() == 88);  // coverage
    }

    const FoldPlan again = make_folds(labels, 10, 5, 2024);
    CHECK(again.test_folds == plan.test_folds);
    const FoldPlan other = make_folds(labels, 10, 5, 2025);
    CHECK(other.test_folds != plan.test_folds);

    // train/test complementarity
    const auto train = plan.train_indices(0, 0, 88);
    CHECK(train.size() + plan.test_folds[0][0].size() == 88);

    // class too small to stratify falls back to an unstratified plan
    std::vector<int> tiny(20, 0);
    tiny[3] = 1;
    tiny[11] = 1;
    const FoldPlan fallback = make_folds(tiny, 5, 1, 1);
    CHECK(!fallback.stratified);
    CHECK_THROWS(make_folds(std::vector<int>{1, 0}, 5, 1, 1));
}

TEST_CASE("confusion metrics: perfect, worked example, all-positive baseline") {
    const std::vector<int> labels{1, 1, 0, 0};
    const std::vector<double> perfect{0.9, 0.8, 0.1, 0.2};
    const ConfusionMetrics p = confusion_metrics(perfect, labels);
    CHECK(p.accuracy == 1.0);
    CHECK(p.sensitivity == 1.0);
    CHECK(p.specificity == 1.0);

    const std::vector<double> mixed{0.9, 0.4, 0.6, 0.1};
    const ConfusionMetrics m = confusion_metrics(mixed, labels);
    CHECK(m.accuracy == 0.5);
    CHECK(m.sensitivity == 0.5);
    CHECK(m.specificity == 0.5);

    // all-positive predictor on the 59/88 label split
    const auto big = labels_88();
    const std::vector<double> ones(88, 1.0);
    const ConfusionMetrics a = confusion_metrics(ones, big);
    CHECK(a.accuracy == doctest::Approx(59.0 / 88.0));
    CHECK(a.sensitivity == 1.0);
    CHECK(a.specificity == 0.0);

    // single-class input: the undefined rate is NaN, not 0
    const std::vector<int> onlypos{1, 1};
    const ConfusionMetrics u = confusion_metrics(std::vector<double>{0.9, 0.2}, onlypos);
    CHECK(std::isnan(u.specificity));
    CHECK(u.sensitivity == 0.5);
}

TEST_CASE("roc_curve: separation, constants, oracle equivalence") {
    const std::vector<int> labels{1, 1, 0, 0};
    const auto perfect = roc_curve(std::vector<double>{0.9, 0.8, 0.3, 0.2}, labels);
    bool hits_corner = false;
    for (const auto& p : perfect) hits_corner |= p.fpr == 0.0 && p.tpr == 1.0;
    CHECK(hits_corner);
    CHECK(perfect.front().fpr == 0.0);
    CHECK(perfect.back().tpr == 1.0);

    const auto flat = roc_curve(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels);
    CHECK(flat.size() == 2);  // endpoints with one tied group
    CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, labels) == doctest::Approx(0.5));

    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores(50);
        std::vector<int> y(50);
        for (int i = 0; i < 50; ++i) {
            scores[i] = std::floor(rng.uniform(0.0, 10.0)) / 10.0;  // force ties
            y[i] = rng.bernoulli(0.4);
        }
        if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0)
            continue;
        const auto curve = roc_curve(scores, y);
        const auto oracle = roc_sweep_oracle(scores, y);
        REQUIRE(curve.size() == oracle.size());
        for (size_t i = 0; i < curve.size(); ++i) {
            CHECK(curve[i].fpr == oracle[i].fpr);
            CHECK(curve[i].tpr == oracle[i].tpr);
        }
    }
    CHECK_THROWS(roc_curve(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}));
}

TEST_CASE("auc: worked examples, Mann-Whitney equality, invariances") {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
    CHECK(auc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc(s, std::vector<int>{1, 0, 0, 1}) == doctest::Approx(0.5));

    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = rng.uniform_int(6, 40);
        std::vector<double> scores(n);
        std::vector<int> y(n);
        bool both = false;
        do {
            for (int i = 0; i < n; ++i) {
                scores[i] = std::floor(rng.uniform(0.0, 8.0));  // heavy ties
                y[i] = rng.bernoulli(0.5);
            }
            const long pos = std::count(y.begin(), y.end(), 1);
            both = pos > 0 && pos < n;
        } while (!both);

        const double trap = auc(scores, y);
        CHECK(std::fabs(trap - auc_pair_oracle(scores, y)) <= 1e-12);

        // strictly increasing transform leaves AUC unchanged
        std::vector<double> warped(n);
        for (int i = 0; i < n; ++i) warped[i] = std::exp(0.5 * scores[i]) + 3.0;
        CHECK(auc(warped, y) == doctest::Approx(trap).epsilon(1e-12));

        // AUC(-s) = 1 - AUC(s)
        std::vector<double> neg(n);
        for (int i = 0; i < n; ++i) neg[i] = -scores[i];
        CHECK(auc(neg, y) == doctest::Approx(1.0 - trap).epsilon(1e-12));
    }
}

TEST_CASE("average_roc: identity, duplicates, pointwise arithmetic") {
    const std::vector<RocPoint> diag{{0.0, 0.0}, {1.0, 1.0}};       // TPR(f) = f
    const std::vector<RocPoint> step{{0.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};  // TPR(f) = 1

    const auto self = average_roc({diag});
    REQUIRE(self.size() == 101);
    for (const auto& p : self) CHECK(p.tpr == doctest::Approx(p.fpr).epsilon(1e-12));

    const auto dup = average_roc({step, step});
    for (size_t i = 1; i < dup.size(); ++i) CHECK(dup[i].tpr == doctest::Approx(1.0));

    const auto avg = average_roc({diag, step});
    for (const auto& p : avg) CHECK(p.tpr == doctest::Approx((p.fpr + 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("run_experiment: structure, aggregates, determinism, hygiene") {
    SyntheticSpec spec;
    spec.n_patients = 48;
    spec.n_genes = 12;
    spec.latent_dim = 3;
    spec.signal_strength = 4.0;
    spec.n_deep = 8;
    spec.dim_slices = 4;
    spec.dim_rows = 20;
    spec.dim_cols = 20;
    const CohortDataset cohort = generate_synthetic_cohort(spec, 71);

    ExperimentConfig config;
    config.k = 4;
    config.repeats = 2;
    config.seed = 5;
    config.pipeline.gene_selection.method = SelectionMethod::ftest;
    config.pipeline.gene_selection.fallback_top_k = 3;
    config.pipeline.regressor_train.learning_rate = 0.05;
    config.pipeline.regressor_train.epochs = 40;
    config.pipeline.classifier_train.epochs = 40;

    const Matrix hand = compute_handcrafted_matrix(cohort, config.texture, 2);
    CHECK(hand.cols() == kHandcraftedCount);

    const CvReport report = run_experiment(cohort, Mode::direct_radiomics, config, nullptr, &hand);
    CHECK(report.folds.size() == 8);
    CHECK(report.hygiene_ok);
    CHECK(report.hygiene_fit_reads > 0);

    // aggregate accuracy equals the mean of fold accuracies
    double mean_acc = 0.0;
    for (const auto& f : report.folds) mean_acc += f.metrics.accuracy;
    mean_acc /= static_cast<double>(report.folds.size());
    CHECK(report.mean_accuracy == doctest::Approx(mean_acc).epsilon(1e-15));
    CHECK(report.averaged_roc.size() == 101);

    // deterministic rerun, also under a different worker count
    const CvReport again = run_experiment(cohort, Mode::direct_radiomics, config, nullptr, &hand);
    REQUIRE(again.folds.size() == report.folds.size());
    for (size_t i = 0; i < report.folds.size(); ++i)
        CHECK(again.folds[i].probabilities == report.folds[i].probabilities);
    ExperimentConfig parallel = config;
    parallel.jobs = 2;
    const CvReport par = run_experiment(cohort, Mode::direct_radiomics, parallel, nullptr, &hand);
    for (size_t i = 0; i < report.folds.size(); ++i)
        CHECK(par.folds[i].probabilities == report.folds[i].probabilities);

    // shared plan: identical test folds across modes (paired comparison)
    const FoldPlan plan = make_folds(cohort.labels(), config.k, config.repeats, config.seed);
    const CvReport m1 = run_experiment(cohort, Mode::gene_truth, config, &plan, &hand);
    const CvReport m2 = run_experiment(cohort, Mode::ggr_deep, config, &plan, &hand);
    for (size_t i = 0; i < m1.folds.size(); ++i)
        CHECK(m1.folds[i].test_indices == m2.folds[i].test_indices);
}
