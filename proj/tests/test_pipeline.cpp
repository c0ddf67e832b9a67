#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ggr/cohort.hpp"
#include "ggr/pipeline.hpp"
#include "ggr/rng.hpp"
#include "ggr/stats.hpp"

using namespace ggr;

namespace {

void zero_params(DenseNetwork& net) {
    for (auto& l : net.layers()) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

TrainData synthetic_train_data(const CohortDataset& cohort, bool with_deep) {
    const int n = static_cast<int>(cohort.records.size());
    TrainData data;
    data.handcrafted = Matrix(n, 0);
    data.genes = cohort.gene_matrix();
    data.gene_names = cohort.gene_names;
    data.labels = cohort.labels();
    if (with_deep) {
        const int d = static_cast<int>(cohort.records[0].deep_features->size());
        data.deep = Matrix(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) data.deep(i, j) = (*cohort.records[i].deep_features)[j];
    }
    return data;
}

}  // namespace

TEST_CASE("gene regressor structure: parameter count and branch layout") {
    const GeneRegressor fusion = build_gene_regressor(12, 100, 12, 16, 1);
    REQUIRE(fusion.deep_reducer);
    const size_t params =
        fusion.deep_reducer->parameter_count() + fusion.trunk.parameter_count();
    CHECK(params == 1629);  // 100*12+12 + 24*16+16 + 16*1+1
    CHECK(fusion.trunk.input_width() == 24);
    CHECK(fusion.handcrafted_width() == 12);

    const GeneRegressor hand_only = build_gene_regressor(12, 0, 12, 16, 2);
    CHECK(!hand_only.deep_reducer);
    CHECK(hand_only.trunk.input_width() == 12);

    const GeneRegressor deep_only = build_gene_regressor(0, 50, 12, 16, 3);
    REQUIRE(deep_only.deep_reducer);
    CHECK(deep_only.trunk.input_width() == 12);

    GeneRegressor zeroed = build_gene_regressor(2, 3, 2, 4, 4);
    zero_params(*zeroed.deep_reducer);
    zero_params(zeroed.trunk);
    CHECK(zeroed.predict(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0, 0.0}) == 0.0);

    CHECK_THROWS(build_gene_regressor(0, 0, 12, 16, 5));
}

TEST_CASE("regressor fits an exactly linear gene to the variance floor") {
    Rng rng(5);
    const int n = 60;
    TrainData data;
    data.handcrafted = Matrix(n, 12);
    data.genes = Matrix(n, 1);
    data.gene_names = {"G0"};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 12; ++j) data.handcrafted(i, j) = rng.normal();
        data.genes(i, 0) = 3.0 * data.handcrafted(i, 0) + 5.0;
        data.labels.push_back(i % 2);
    }
    PipelineConfig pc;
    pc.gene_selection.method = SelectionMethod::none;
    pc.regressor_train.learning_rate = 0.05;
    pc.regressor_train.epochs = 3000;
    pc.regressor_train.patience = 0;
    pc.classifier_train.epochs = 10;
    pc.seed = 3;
    const GgrPipeline pipe = train_pipeline(Mode::ggr_handcrafted, data, pc);
    REQUIRE(pipe.regressor_final_mse.size() == 1);
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = data.genes(i, 0);
    CHECK(pipe.regressor_final_mse[0] <= 1e-4 * stats::variance_population(g));
}

TEST_CASE("held-out gene estimates track the true values on a planted cohort") {
    SyntheticSpec spec;
    spec.n_patients = 150;
    spec.n_genes = 40;
    spec.latent_dim = 5;
    spec.signal_strength = 4.0;
    spec.n_deep = 32;
    spec.dim_slices = 4;
    spec.dim_rows = 16;
    spec.dim_cols = 16;
    const CohortDataset cohort = generate_synthetic_cohort(spec, 21);
    const TrainData full = synthetic_train_data(cohort, /*with_deep=*/true);

    const int n_train = 100;
    TrainData train;
    train.handcrafted = Matrix(n_train, 0);
    train.deep = Matrix(n_train, full.deep.cols());
    train.genes = Matrix(n_train, full.genes.cols());
    train.gene_names = full.gene_names;
    for (int i = 0; i < n_train; ++i) {
        for (int j = 0; j < full.deep.cols(); ++j) train.deep(i, j) = full.deep(i, j);
        for (int j = 0; j < full.genes.cols(); ++j) train.genes(i, j) = full.genes(i, j);
        train.labels.push_back(full.labels[i]);
    }

    PipelineConfig pc;
    pc.gene_selection.method = SelectionMethod::ftest;
    pc.regressor_train.learning_rate = 0.05;
    pc.regressor_train.epochs = 500;
    pc.classifier_train.epochs = 100;
    pc.seed = 9;
    const GgrPipeline pipe = train_pipeline(Mode::ggr_deep, train, pc);
    REQUIRE(!pipe.gene_sel.empty());
    CHECK(pipe.regressors.size() == pipe.gene_sel.size());

    const int n_test = spec.n_patients - n_train;
    double mean_corr = 0.0;
    for (size_t k = 0; k < pipe.gene_sel.size(); ++k) {
        std::vector<double> est(n_test), truth(n_test);
        for (int i = 0; i < n_test; ++i) {
            std::vector<double> deep(full.deep.cols());
            for (int j = 0; j < full.deep.cols(); ++j) deep[j] = full.deep(n_train + i, j);
            est[i] = estimate_genes(pipe, {}, deep)[k];
            truth[i] = full.genes(n_train + i, pipe.gene_sel[k]);
        }
        mean_corr += stats::pearson_correlation(est, truth);
    }
    mean_corr /= static_cast<double>(pipe.gene_sel.size());
    CHECK(mean_corr >= 0.5);
}

TEST_CASE("classifier: separable toy set, constant inputs, output range") {
    // linearly separable two-gene toy set
    Rng rng(13);
    const int n = 40;
    TrainData data;
    data.handcrafted = Matrix(n, 0);
    data.genes = Matrix(n, 2);
    data.gene_names = {"GA", "GB"};
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        data.genes(i, 0) = (y ? 8.0 : 2.0) + rng.uniform(-0.5, 0.5);
        data.genes(i, 1) = (y ? 1.0 : 5.0) + rng.uniform(-0.5, 0.5);
        data.labels.push_back(y);
    }
    PipelineConfig pc;
    pc.gene_selection.method = SelectionMethod::none;
    pc.classifier_train.epochs = 400;
    pc.seed = 31;
    const GgrPipeline pipe = train_pipeline(Mode::gene_truth, data, pc);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> genes{data.genes(i, 0), data.genes(i, 1)};
        const double p = predict_recurrence(pipe, {}, {}, genes);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        correct += (p >= 0.5) == (data.labels[i] == 1);
    }
    CHECK(correct == n);

    // all-identical inputs: prediction converges to the class prior
    TrainData flat;
    flat.handcrafted = Matrix(30, 0);
    flat.genes = Matrix(30, 2, 4.0);
    flat.gene_names = {"GA", "GB"};
    for (int i = 0; i < 30; ++i) flat.labels.push_back(i < 21 ? 1 : 0);  // 70% positive
    PipelineConfig fc = pc;
    fc.classifier_train.epochs = 2000;
    fc.classifier_train.patience = 0;
    const GgrPipeline fpipe = train_pipeline(Mode::gene_truth, flat, fc);
    const double prior = predict_recurrence(fpipe, {}, {}, std::vector<double>{4.0, 4.0});
    CHECK(prior == doctest::Approx(0.7).epsilon(0.08));
}

TEST_CASE("predict_recurrence: determinism and monotone wiring") {
    SyntheticSpec spec;
    spec.n_patients = 80;
    spec.n_genes = 20;
    spec.latent_dim = 3;
    spec.signal_strength = 4.0;
    spec.n_deep = 16;
    spec.dim_slices = 4;
    spec.dim_rows = 16;
    spec.dim_cols = 16;
    const CohortDataset cohort = generate_synthetic_cohort(spec, 33);
    TrainData data = synthetic_train_data(cohort, /*with_deep=*/true);
    PipelineConfig pc;
    pc.gene_selection.method = SelectionMethod::ftest;
    pc.regressor_train.learning_rate = 0.05;
    pc.regressor_train.epochs = 200;
    pc.classifier_train.epochs = 200;
    pc.seed = 17;
    const GgrPipeline pipe = train_pipeline(Mode::ggr_deep, data, pc);

    std::vector<double> deep(data.deep.cols());
    for (int j = 0; j < data.deep.cols(); ++j) deep[j] = data.deep(0, j);
    const double p1 = predict_recurrence(pipe, {}, deep);
    const double p2 = predict_recurrence(pipe, {}, deep);
    CHECK(p1 == p2);
    CHECK(p1 > 0.0);
    CHECK(p1 < 1.0);

    // Perturbing one gene estimate must move the output in the direction of
    // the classifier's analytic input gradient.
    const auto est = estimate_genes(pipe, {}, deep);
    const auto x0 = pipe.clf_in.apply_row(est);
    Matrix xin(1, static_cast<int>(x0.size()));
    for (size_t j = 0; j < x0.size(); ++j) xin(0, static_cast<int>(j)) = x0[j];
    Matrix ones(1, 1, 1.0);
    const Gradients g = backward_from_output_grad(pipe.classifier, xin, ones);
    for (size_t gi = 0; gi < est.size(); ++gi) {
        const double grad = g.dinput(0, static_cast<int>(gi));
        if (std::fabs(grad) < 1e-9) continue;
        auto bumped = est;
        bumped[gi] += 1e-4 * pipe.clf_in.sd[gi];
        const double pb = pipe.classifier.forward(pipe.clf_in.apply_row(bumped))[0];
        const double base = pipe.classifier.forward(x0)[0];
        CHECK(((pb - base > 0.0) == (grad > 0.0)));
    }
}

TEST_CASE("pipeline serialization round-trips to bit-identical predictions") {
    SyntheticSpec spec;
    spec.n_patients = 60;
    spec.n_genes = 15;
    spec.latent_dim = 3;
    spec.n_deep = 10;
    spec.dim_slices = 4;
    spec.dim_rows = 16;
    spec.dim_cols = 16;
    const CohortDataset cohort = generate_synthetic_cohort(spec, 41);
    TrainData data = synthetic_train_data(cohort, /*with_deep=*/true);
    PipelineConfig pc;
    pc.gene_selection.method = SelectionMethod::ftest;
    pc.regressor_train.learning_rate = 0.05;
    pc.regressor_train.epochs = 100;
    pc.classifier_train.epochs = 100;
    pc.seed = 55;
    const GgrPipeline pipe = train_pipeline(Mode::ggr_deep, data, pc);

    const auto path = std::filesystem::temp_directory_path() / "ggr_pipe_roundtrip.ggr";
    save_pipeline(pipe, path);
    const GgrPipeline back = load_pipeline(path);
    CHECK(back.mode == pipe.mode);
    CHECK(back.gene_sel == pipe.gene_sel);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> deep(data.deep.cols());
        for (int j = 0; j < data.deep.cols(); ++j) deep[j] = data.deep(i, j);
        CHECK(predict_recurrence(pipe, {}, deep) == predict_recurrence(back, {}, deep));
        CHECK(estimate_genes(pipe, {}, deep) == estimate_genes(back, {}, deep));
    }
}

TEST_CASE("pipeline guards: single-class folds, missing deep features, gene stripping") {
    TrainData data;
    data.handcrafted = Matrix(10, 5, 1.0);
    data.genes = Matrix(10, 2, 1.0);
    data.gene_names = {"GA", "GB"};
    data.labels.assign(10, 1);  // single class
    PipelineConfig pc;
    CHECK_THROWS_WITH_AS(train_pipeline(Mode::direct_radiomics, data, pc),
                         doctest::Contains("single-class"), std::runtime_error);

    data.labels.clear();
    for (int i = 0; i < 10; ++i) data.labels.push_back(i % 2);
    CHECK_THROWS_WITH_AS(train_pipeline(Mode::ggr_fusion, data, pc),
                         doctest::Contains("deep features"), std::invalid_argument);

    // GGR-mode prediction never needs gene data: genes argument stays empty
    Rng rng(87);
    TrainData ok;
    ok.handcrafted = Matrix(24, 6);
    for (double& v : ok.handcrafted) v = rng.normal();
    ok.genes = Matrix(24, 2);
    for (int i = 0; i < 24; ++i) {
        ok.genes(i, 0) = 1.0 + ok.handcrafted(i, 0) * 0.5 + 2.0;
        ok.genes(i, 1) = 2.0 + rng.uniform(0.0, 1.0);
        ok.labels.push_back(i % 2);
    }
    ok.gene_names = {"GA", "GB"};
    PipelineConfig okc;
    okc.gene_selection.method = SelectionMethod::none;
    okc.regressor_train.learning_rate = 0.05;
    okc.regressor_train.epochs = 50;
    okc.classifier_train.epochs = 50;
    const GgrPipeline pipe = train_pipeline(Mode::ggr_handcrafted, ok, okc);
    std::vector<double> hand(6, 0.3);
    CHECK_NOTHROW(predict_recurrence(pipe, hand, {}));  // no gene span passed
    CHECK(estimate_genes(pipe, hand, {}).size() == pipe.gene_sel.size());
}
