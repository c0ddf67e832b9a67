#include "ggr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ggr/csv.hpp"
#include "ggr/preprocess.hpp"
#include "ggr/rng.hpp"
#include "ggr/stats.hpp"
#include "ggr/texture.hpp"

namespace ggr {

std::vector<int> FoldPlan::train_indices(int repeat, int fold, int n) const {
    std::vector<uint8_t> is_test(n, 0);
    for (int i : test_folds.at(repeat).at(fold)) is_test.at(i) = 1;
    std::vector<int> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        if (!is_test[i]) out.push_back(i);
    return out;
}

FoldPlan make_folds(std::span<const int> labels, int k, int repeats, uint64_t seed) {
    const int n = static_cast<int>(labels.size());
    if (k < 2 || n < k) throw std::invalid_argument("make_folds: need n >= k >= 2");
    if (repeats < 1) throw std::invalid_argument("make_folds: repeats must be >= 1");
    long pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("make_folds: labels must be 0/1");
        pos += y;
    }
    const long neg = n - pos;
    const bool stratified = pos >= k && neg >= k;

    FoldPlan plan;
    plan.k = k;
    plan.repeats = repeats;
    plan.seed = seed;
    plan.stratified = stratified;
    plan.test_folds.resize(repeats);

    for (int rep = 0; rep < repeats; ++rep) {
        Rng rng(Rng::mix(seed, 0xF01D0000ULL + static_cast<uint64_t>(rep)));
        auto& folds = plan.test_folds[rep];
        folds.assign(k, {});
        if (!stratified) {
            std::vector<int> order(n);
            std::iota(order.begin(), order.end(), 0);
            rng.shuffle(order);
            for (int i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
        } else {
            // Per-class round-robin; the starting fold of each class is
            // staggered so total fold sizes differ by at most one.
            std::vector<int> class_idx[2];
            for (int i = 0; i < n; ++i) class_idx[labels[i]].push_back(i);
            int offset = 0;
            for (int c = 0; c < 2; ++c) {
                rng.shuffle(class_idx[c]);
                for (size_t j = 0; j < class_idx[c].size(); ++j)
                    folds[(offset + static_cast<int>(j)) % k].push_back(class_idx[c][j]);
                offset = (offset + static_cast<int>(class_idx[c].size())) % k;
            }
        }
        for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    }
    return plan;
}

ConfusionMetrics confusion_metrics(std::span<const double> probabilities,
                                   std::span<const int> labels, double threshold) {
    if (probabilities.size() != labels.size() || labels.empty())
        throw std::invalid_argument("confusion_metrics: size mismatch");
    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] >= threshold;
        if (labels[i] == 1)
            predicted ? ++tp : ++fn;
        else
            predicted ? ++fp : ++tn;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ConfusionMetrics m{};
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(labels.size());
    m.sensitivity = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : nan;
    m.specificity = (tn + fp) > 0 ? static_cast<double>(tn) / (tn + fp) : nan;
    return m;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("roc_curve: size mismatch");
    long pos = 0;
    for (int y : labels) pos += y;
    const long neg = static_cast<long>(labels.size()) - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("roc_curve: single-class input");

    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0});
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {  // group tied scores
            labels[order[i]] ? ++tp : ++fp;
            ++i;
        }
        curve.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return curve;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    const auto curve = roc_curve(scores, labels);
    double area = 0.0;
    for (size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
    return area;
}

namespace {

double tpr_at(const std::vector<RocPoint>& curve, double f) {
    // last point with fpr <= f (points are sorted; ties carry rising tpr)
    size_t last = 0;
    for (size_t i = 0; i < curve.size(); ++i)
        if (curve[i].fpr <= f) last = i;
    if (curve[last].fpr == f || last + 1 >= curve.size()) return curve[last].tpr;
    const auto& a = curve[last];
    const auto& b = curve[last + 1];
    return a.tpr + (b.tpr - a.tpr) * (f - a.fpr) / (b.fpr - a.fpr);
}

}  // namespace

std::vector<RocPoint> average_roc(const std::vector<std::vector<RocPoint>>& curves) {
    if (curves.empty()) throw std::invalid_argument("average_roc: need >= 1 curve");
    std::vector<RocPoint> out;
    out.reserve(101);
    for (int g = 0; g <= 100; ++g) {
        const double f = static_cast<double>(g) / 100.0;
        double sum = 0.0;
        for (const auto& c : curves) sum += tpr_at(c, f);
        out.push_back({f, sum / static_cast<double>(curves.size())});
    }
    return out;
}

uint64_t fold_seed(uint64_t base_seed, int repeat, int fold) {
    return Rng::mix(Rng::mix(base_seed, 0xFE1D0000ULL + static_cast<uint64_t>(repeat)),
                    0xAB1E0000ULL + static_cast<uint64_t>(fold));
}

Matrix compute_handcrafted_matrix(const CohortDataset& cohort, const TextureConfig& config,
                                  int jobs) {
    const int n = static_cast<int>(cohort.records.size());
    Matrix out(n, kHandcraftedCount);
    std::atomic<int> next_row{0};
    std::vector<std::string> errors(static_cast<size_t>(n));
    auto worker = [&]() {
        for (;;) {
            const int i = next_row.fetch_add(1);
            if (i >= n) return;
            try {
                const auto& rec = cohort.records[i];
                const Slab slab = preprocess_patient(rec.volume, rec.mask);
                const FeatureVector fv = extract_handcrafted(slab, config);
                for (int j = 0; j < kHandcraftedCount; ++j) out(i, j) = fv.values[j];
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (int i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("feature extraction failed for " + cohort.records[i].id +
                                     ": " + errors[i]);
    return out;
}

namespace {

// Per-fold read instrumentation. Every per-patient row that reaches the
// fitting code flows through note(); reading a test-fold row during the fit
// phase is both counted and rejected.
struct AccessGuard {
    enum class Phase { fit, predict };
    const std::vector<uint8_t>* is_test = nullptr;
    Phase phase = Phase::fit;
    long fit_reads = 0;
    long violations = 0;

    void note(int idx) {
        if (phase == Phase::fit) {
            ++fit_reads;
            if ((*is_test)[idx]) {
                ++violations;
                throw std::logic_error("hygiene violation: test-fold row read during fit");
            }
        }
    }
};

struct FoldTask {
    int repeat, fold;
};

struct DataBundle {
    const CohortDataset* cohort;
    const Matrix* hand;   // n x 450
    Matrix deep;          // n x D or empty
    bool has_deep = false;
};

FoldResult run_one_fold(const DataBundle& data, Mode mode, const ExperimentConfig& config,
                        const PipelineConfig& base_pipeline, const FoldPlan& plan,
                        const std::vector<int>& labels, FoldTask task, long* fit_reads_out) {
    const int n = static_cast<int>(labels.size());
    const auto& test_idx = plan.test_folds[task.repeat][task.fold];
    std::vector<uint8_t> is_test(n, 0);
    for (int i : test_idx) is_test[i] = 1;
    AccessGuard guard;
    guard.is_test = &is_test;

    const bool need_genes = mode_estimates_genes(mode) || mode_uses_true_genes(mode);

    // ---- fit phase: only training rows may be touched ----
    guard.phase = AccessGuard::Phase::fit;
    const auto train_idx = plan.train_indices(task.repeat, task.fold, n);
    TrainData train;
    train.gene_names = data.cohort->gene_names;
    train.handcrafted = Matrix(static_cast<int>(train_idx.size()), data.hand->cols());
    if (data.has_deep) train.deep = Matrix(static_cast<int>(train_idx.size()), data.deep.cols());
    if (need_genes)
        train.genes = Matrix(static_cast<int>(train_idx.size()),
                             static_cast<int>(data.cohort->gene_names.size()));
    for (size_t r = 0; r < train_idx.size(); ++r) {
        const int src = train_idx[r];
        guard.note(src);
        for (int c = 0; c < data.hand->cols(); ++c)
            train.handcrafted(static_cast<int>(r), c) = (*data.hand)(src, c);
        if (data.has_deep)
            for (int c = 0; c < data.deep.cols(); ++c)
                train.deep(static_cast<int>(r), c) = data.deep(src, c);
        if (need_genes) {
            const auto& g = *data.cohort->records[src].genes;
            for (size_t c = 0; c < g.size(); ++c)
                train.genes(static_cast<int>(r), static_cast<int>(c)) = g[c];
        }
        train.labels.push_back(labels[src]);
    }

    PipelineConfig pc = base_pipeline;
    pc.seed = fold_seed(config.seed, task.repeat, task.fold);
    const GgrPipeline pipe = train_pipeline(mode, train, pc);

    // ---- predict phase: test rows, genes stripped unless the mode is a
    // gene-truth baseline ----
    guard.phase = AccessGuard::Phase::predict;
    FoldResult result;
    result.repeat = task.repeat;
    result.fold = task.fold;
    result.test_indices = test_idx;
    std::vector<int> test_labels;
    for (int i : test_idx) {
        std::vector<double> hand_row(data.hand->cols());
        for (int c = 0; c < data.hand->cols(); ++c) hand_row[c] = (*data.hand)(i, c);
        std::vector<double> deep_row;
        if (data.has_deep) {
            deep_row.resize(data.deep.cols());
            for (int c = 0; c < data.deep.cols(); ++c) deep_row[c] = data.deep(i, c);
        }
        std::span<const double> genes_span;  // stripped by construction
        if (mode_uses_true_genes(mode)) genes_span = *data.cohort->records[i].genes;
        result.probabilities.push_back(predict_recurrence(pipe, hand_row, deep_row, genes_span));
        test_labels.push_back(labels[i]);
    }

    result.metrics = confusion_metrics(result.probabilities, test_labels);
    result.roc = roc_curve(result.probabilities, test_labels);
    result.auc_value = auc(result.probabilities, test_labels);
    *fit_reads_out = guard.fit_reads;
    if (guard.violations != 0) throw std::logic_error("hygiene violation recorded");
    return result;
}

double mean_defined(const std::vector<double>& v) {
    double s = 0.0;
    long n = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            s += x;
            ++n;
        }
    return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

double sd_defined(const std::vector<double>& v) {
    const double m = mean_defined(v);
    if (std::isnan(m)) return m;
    double s = 0.0;
    long n = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            s += (x - m) * (x - m);
            ++n;
        }
    return std::sqrt(s / n);
}

}  // namespace

CvReport run_experiment(const CohortDataset& cohort, Mode mode, const ExperimentConfig& config,
                        const FoldPlan* shared_plan, const Matrix* precomputed) {
    const auto labels = cohort.labels();
    const int n = static_cast<int>(labels.size());

    const FoldPlan plan = shared_plan ? *shared_plan
                                      : make_folds(labels, config.k, config.repeats, config.seed);

    Matrix hand_local;
    const Matrix* hand = precomputed;
    if (!hand) {
        hand_local = compute_handcrafted_matrix(cohort, config.texture, config.jobs);
        hand = &hand_local;
    }
    if (hand->rows() != n) throw std::invalid_argument("run_experiment: feature matrix row mismatch");

    PipelineConfig base_pipeline = config.pipeline;
    if (config.global_gene_selection &&
        (mode_estimates_genes(mode) || mode_uses_true_genes(mode))) {
        const SelectionResult global =
            select_features(cohort.gene_matrix(), labels, config.pipeline.gene_selection);
        if (global.selected.empty())
            throw std::runtime_error("run_experiment: global gene selection selected nothing");
        base_pipeline.fixed_gene_selection = global.selected;
    }

    DataBundle data;
    data.cohort = &cohort;
    data.hand = hand;
    if (mode_uses_deep(mode)) {
        int dim = -1;
        for (const auto& rec : cohort.records) {
            if (!rec.deep_features)
                throw std::runtime_error("run_experiment: mode requires deep features; patient " +
                                         rec.id + " has none");
            if (dim < 0) dim = static_cast<int>(rec.deep_features->size());
            if (static_cast<int>(rec.deep_features->size()) != dim)
                throw std::runtime_error("run_experiment: inconsistent deep-feature widths");
        }
        data.deep = Matrix(n, dim);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < dim; ++d) data.deep(i, d) = (*cohort.records[i].deep_features)[d];
        data.has_deep = true;
    }

    std::vector<FoldTask> tasks;
    for (int rep = 0; rep < plan.repeats; ++rep)
        for (int fold = 0; fold < plan.k; ++fold) tasks.push_back({rep, fold});

    std::vector<FoldResult> results(tasks.size());
    std::vector<long> fit_reads(tasks.size(), 0);
    std::vector<std::string> errors(tasks.size());

    const int jobs = std::max(1, config.jobs);
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t ti = next.fetch_add(1);
            if (ti >= tasks.size()) return;
            try {
                results[ti] = run_one_fold(data, mode, config, base_pipeline, plan, labels,
                                           tasks[ti], &fit_reads[ti]);
            } catch (const std::exception& e) {
                errors[ti] = "repeat " + std::to_string(tasks[ti].repeat) + " fold " +
                             std::to_string(tasks[ti].fold) + ": " + e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& err : errors)
        if (!err.empty()) throw std::runtime_error("run_experiment aborted at " + err);

    CvReport report;
    report.mode = mode;
    report.k = plan.k;
    report.repeats = plan.repeats;
    report.seed = config.seed;
    report.folds = std::move(results);

    std::vector<double> accs, sens, specs, aucs;
    std::vector<std::vector<RocPoint>> curves;
    for (const auto& f : report.folds) {
        accs.push_back(f.metrics.accuracy);
        sens.push_back(f.metrics.sensitivity);
        specs.push_back(f.metrics.specificity);
        aucs.push_back(f.auc_value);
        curves.push_back(f.roc);
    }
    report.mean_accuracy = mean_defined(accs);
    report.sd_accuracy = sd_defined(accs);
    report.mean_sensitivity = mean_defined(sens);
    report.sd_sensitivity = sd_defined(sens);
    report.mean_specificity = mean_defined(specs);
    report.sd_specificity = sd_defined(specs);
    report.mean_auc = mean_defined(aucs);
    report.sd_auc = sd_defined(aucs);
    report.averaged_roc = average_roc(curves);
    report.hygiene_fit_reads = std::accumulate(fit_reads.begin(), fit_reads.end(), 0L);
    // Any in-fold violation would have aborted the run; global selection
    // deliberately reads all rows before folding, so it is flagged here.
    report.hygiene_ok = !config.global_gene_selection;
    return report;
}

void write_roc_svg(const std::vector<RocPoint>& curve, const std::string& title,
                   const std::filesystem::path& path) {
    const double size = 420.0, margin = 40.0, plot = size - 2 * margin;
    auto px = [&](double f) { return margin + f * plot; };
    auto py = [&](double t) { return size - margin - t * plot; };
    char buf[128];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write SVG: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"420\" height=\"420\" "
           "viewBox=\"0 0 420 420\">\n";
    out << "<rect width=\"420\" height=\"420\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
                  "stroke=\"black\"/>\n",
                  margin, margin, plot, plot);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#999\" "
                  "stroke-dasharray=\"4 4\"/>\n",
                  px(0.0), py(0.0), px(1.0), py(1.0));
    out << buf;
    out << "<polyline fill=\"none\" stroke=\"#d95f02\" stroke-width=\"2\" points=\"";
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(p.fpr), py(p.tpr));
        out << buf;
    }
    out << "\"/>\n";
    out << "<text x=\"210\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"14\">"
        << title << "</text>\n";
    out << "<text x=\"210\" y=\"410\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\">false positive rate</text>\n";
    out << "<text x=\"14\" y=\"210\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"12\" transform=\"rotate(-90 14 210)\">true positive rate</text>\n";
    out << "</svg>\n";
}

void write_report_files(const CvReport& report, const std::filesystem::path& dir,
                        const std::string& prefix) {
    std::filesystem::create_directories(dir);
    {
        CsvTable folds;
        folds.header = {"repeat", "fold",        "n_test",      "accuracy",
                        "sensitivity", "specificity", "auc"};
        for (const auto& f : report.folds)
            folds.rows.push_back({std::to_string(f.repeat), std::to_string(f.fold),
                                  std::to_string(f.test_indices.size()),
                                  format_double(f.metrics.accuracy),
                                  format_double(f.metrics.sensitivity),
                                  format_double(f.metrics.specificity),
                                  format_double(f.auc_value)});
        write_csv(folds, dir / (prefix + "_folds.csv"));
    }
    {
        CsvTable roc;
        roc.header = {"fpr", "mean_tpr"};
        for (const auto& p : report.averaged_roc)
            roc.rows.push_back({format_double(p.fpr), format_double(p.tpr)});
        write_csv(roc, dir / (prefix + "_roc.csv"));
    }
    {
        CsvTable summary;
        summary.header = {"metric", "mean", "sd"};
        summary.rows.push_back({"accuracy", format_double(report.mean_accuracy),
                                format_double(report.sd_accuracy)});
        summary.rows.push_back({"sensitivity", format_double(report.mean_sensitivity),
                                format_double(report.sd_sensitivity)});
        summary.rows.push_back({"specificity", format_double(report.mean_specificity),
                                format_double(report.sd_specificity)});
        summary.rows.push_back({"auc", format_double(report.mean_auc), format_double(report.sd_auc)});
        summary.rows.push_back({"hygiene_ok", report.hygiene_ok ? "1" : "0", ""});
        summary.rows.push_back({"hygiene_fit_reads", std::to_string(report.hygiene_fit_reads), ""});
        write_csv(summary, dir / (prefix + "_summary.csv"));
    }
    write_roc_svg(report.averaged_roc, prefix, dir / (prefix + "_roc.svg"));
}

}  // namespace ggr
