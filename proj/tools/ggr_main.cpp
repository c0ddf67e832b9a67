// ggr - genotype-guided radiomics pipeline CLI.
//
// Subcommands: synth, preprocess, extract-features, select, train-ggr,
// predict, evaluate. File formats are documented in docs/formats.md.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ggr/cohort.hpp"
#include "ggr/csv.hpp"
#include "ggr/eval.hpp"
#include "ggr/hash.hpp"
#include "ggr/net.hpp"
#include "ggr/pipeline.hpp"
#include "ggr/preprocess.hpp"
#include "ggr/select.hpp"
#include "ggr/texture.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string default_out_dir() {
    const char* env = std::getenv("GGR_OUT_DIR");
    return env ? env : "ggr_out";
}

struct SynthArgs {
    std::string out_dir = default_out_dir();
    uint64_t seed = 7;
    ggr::SyntheticSpec spec;
};

struct EvalArgs {
    std::string cohort_dir;
    std::string out_dir = default_out_dir();
    std::string modes = "ggr_fusion";
    uint64_t seed = 7;
    int k = 10;
    int repeats = 5;
    int jobs = 1;
    bool global_selection = false;
    bool raw_targets = false;
    double pvalue = 0.02;
    double lambda_frac = 0.1;
    std::string gene_method = "intersection";
    double regressor_lr = 5e-6;
    int regressor_epochs = 500;
    double classifier_lr = 0.05;
    int classifier_epochs = 300;
    double momentum = 0.9;
    double decay = 1e-6;
    int batch_size = 0;
};

ggr::PipelineConfig make_pipeline_config(const EvalArgs& a) {
    ggr::PipelineConfig pc;
    pc.gene_selection.method = ggr::parse_selection_method(a.gene_method);
    pc.gene_selection.pvalue = a.pvalue;
    pc.gene_selection.lambda_frac = a.lambda_frac;
    pc.standardize_targets = !a.raw_targets;
    pc.regressor_train.learning_rate = a.regressor_lr;
    pc.regressor_train.epochs = a.regressor_epochs;
    pc.regressor_train.momentum = a.momentum;
    pc.regressor_train.decay = a.decay;
    pc.regressor_train.batch_size = a.batch_size;
    pc.classifier_train.learning_rate = a.classifier_lr;
    pc.classifier_train.epochs = a.classifier_epochs;
    pc.classifier_train.momentum = a.momentum;
    pc.classifier_train.decay = a.decay;
    pc.classifier_train.batch_size = a.batch_size;
    return pc;
}

std::vector<ggr::Mode> parse_modes(const std::string& arg) {
    if (arg == "all") return ggr::all_modes();
    std::vector<ggr::Mode> modes;
    std::string token;
    for (char ch : arg + ",") {
        if (ch == ',') {
            if (!token.empty()) modes.push_back(ggr::parse_mode(token));
            token.clear();
        } else {
            token.push_back(ch);
        }
    }
    if (modes.empty()) throw std::runtime_error("no modes requested");
    return modes;
}

uint64_t checksum_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        h ^= ggr::fnv1a64(name.data(), name.size());
        h *= 0x100000001b3ULL;
        h ^= ggr::fnv1a64_file(f);
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_features_csv(const ggr::CohortDataset& cohort, const ggr::Matrix& features,
                        const fs::path& path) {
    ggr::CsvTable csv;
    csv.header.push_back("patient_id");
    for (const auto& name : ggr::handcrafted_feature_names()) csv.header.push_back(name);
    for (size_t i = 0; i < cohort.records.size(); ++i) {
        std::vector<std::string> row{cohort.records[i].id};
        for (int j = 0; j < features.cols(); ++j)
            row.push_back(ggr::format_double(features(static_cast<int>(i), j)));
        csv.rows.push_back(std::move(row));
    }
    ggr::write_csv(csv, path);
}

int cmd_synth(const SynthArgs& args) {
    const ggr::CohortDataset cohort = ggr::generate_synthetic_cohort(args.spec, args.seed);
    ggr::save_cohort_dir(cohort, args.out_dir);
    std::cout << "wrote synthetic cohort: " << cohort.records.size() << " patients, "
              << cohort.gene_names.size() << " genes -> " << args.out_dir << "\n";
    return 0;
}

int cmd_evaluate(const EvalArgs& args, const std::string& config_echo) {
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);

    const ggr::CohortDataset cohort = ggr::load_cohort_dir(args.cohort_dir);
    const auto labels = cohort.labels();

    ggr::ExperimentConfig config;
    config.pipeline = make_pipeline_config(args);
    config.k = args.k;
    config.repeats = args.repeats;
    config.seed = args.seed;
    config.jobs = args.jobs;
    config.global_gene_selection = args.global_selection;

    const std::vector<ggr::Mode> modes = parse_modes(args.modes);
    std::cout << "cohort: " << cohort.records.size() << " patients, " << cohort.gene_names.size()
              << " genes\n";

    std::cout << "extracting handcrafted features...\n";
    const ggr::Matrix hand = ggr::compute_handcrafted_matrix(cohort, config.texture, args.jobs);

    // one fold plan shared across modes so comparisons are paired
    const ggr::FoldPlan plan = ggr::make_folds(labels, config.k, config.repeats, config.seed);

    for (ggr::Mode mode : modes) {
        std::cout << "mode " << ggr::mode_name(mode) << ": running " << config.repeats << "x"
                  << config.k << " folds...\n";
        const ggr::CvReport report = ggr::run_experiment(cohort, mode, config, &plan, &hand);
        ggr::write_report_files(report, out_dir, ggr::mode_name(mode));
        std::cout << "  accuracy " << report.mean_accuracy << "  auc " << report.mean_auc << "\n";
    }

    {
        std::ofstream echo(out_dir / "config_echo.toml");
        echo << config_echo;
    }
    json manifest;
    manifest["tool"] = "ggr";
    manifest["version"] = kVersion;
    manifest["subcommand"] = "evaluate";
    manifest["seed"] = args.seed;
    manifest["k"] = args.k;
    manifest["repeats"] = args.repeats;
    manifest["jobs"] = args.jobs;
    manifest["global_selection"] = args.global_selection;
    json mode_list = json::array();
    for (ggr::Mode m : modes) mode_list.push_back(ggr::mode_name(m));
    manifest["modes"] = mode_list;
    manifest["cohort_dir"] = args.cohort_dir;
    manifest["cohort_checksum"] = "fnv1a:" + ggr::hex64(checksum_dir(args.cohort_dir));
    manifest["config_echo"] = "config_echo.toml";
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"genotype-guided radiomics pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ggr ") + kVersion);

    // ---- synth ----
    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-signal synthetic cohort");
    synth_cmd->add_option("--out", synth.out_dir, "output cohort directory");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--patients", synth.spec.n_patients, "number of patients (>= 20)")
        ->check(CLI::Range(20, 1000000));
    synth_cmd->add_option("--genes", synth.spec.n_genes, "number of genes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--latent", synth.spec.latent_dim, "latent dim = informative genes")
        ->check(CLI::PositiveNumber);
    synth_cmd->add_option("--signal", synth.spec.signal_strength, "label signal strength");
    synth_cmd->add_option("--noise", synth.spec.noise, "gene/deep noise level")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--slices", synth.spec.dim_slices, "volume slices")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--rows", synth.spec.dim_rows, "volume rows")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--cols", synth.spec.dim_cols, "volume cols")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--deep-dim", synth.spec.n_deep, "deep feature width")
        ->check(CLI::PositiveNumber);

    // ---- preprocess ----
    std::string pp_volume, pp_mask, pp_out_slab, pp_out_mask;
    auto* pp_cmd = app.add_subcommand("preprocess", "volume+mask -> 224x224x3 tumor slab");
    pp_cmd->add_option("--volume", pp_volume, "GGRVOL input")->required()->check(CLI::ExistingFile);
    pp_cmd->add_option("--mask", pp_mask, "GGRMSK input")->required()->check(CLI::ExistingFile);
    pp_cmd->add_option("--out-slab", pp_out_slab, "GGRSLB output")->required();
    pp_cmd->add_option("--out-slab-mask", pp_out_mask, "GGRSLM output")->required();

    // ---- extract-features ----
    std::string xf_cohort, xf_volume, xf_mask, xf_slab, xf_slab_mask, xf_id = "patient", xf_out;
    int xf_jobs = 1;
    auto* xf_cmd = app.add_subcommand("extract-features", "handcrafted 450-feature signature CSV");
    xf_cmd->add_option("--cohort", xf_cohort, "cohort directory (all patients)");
    xf_cmd->add_option("--volume", xf_volume, "single GGRVOL input");
    xf_cmd->add_option("--mask", xf_mask, "single GGRMSK input");
    xf_cmd->add_option("--slab", xf_slab, "single GGRSLB input");
    xf_cmd->add_option("--slab-mask", xf_slab_mask, "single GGRSLM input");
    xf_cmd->add_option("--id", xf_id, "patient id for single-input rows");
    xf_cmd->add_option("--jobs", xf_jobs, "worker threads")->check(CLI::PositiveNumber);
    xf_cmd->add_option("--out", xf_out, "output features CSV")->required();

    // ---- select ----
    std::string sel_features, sel_labels, sel_out, sel_method = "intersection";
    double sel_pvalue = 0.02, sel_lambda = 0.1;
    auto* sel_cmd = app.add_subcommand("select", "univariate/sparse feature selection");
    sel_cmd->add_option("--features", sel_features, "features CSV (patient_id + columns)")
        ->required()
        ->check(CLI::ExistingFile);
    sel_cmd->add_option("--labels", sel_labels, "labels CSV (patient_id,recurrence)")
        ->required()
        ->check(CLI::ExistingFile);
    sel_cmd->add_option("--method", sel_method, "none|ftest|chi2|lasso|intersection");
    sel_cmd->add_option("--pvalue", sel_pvalue, "p-value threshold")->check(CLI::Range(0.0, 1.0));
    sel_cmd->add_option("--lambda-frac", sel_lambda, "lambda as a fraction of lambda_max")
        ->check(CLI::NonNegativeNumber);
    sel_cmd->add_option("--out", sel_out, "selection CSV output")->required();

    // ---- train-ggr ----
    EvalArgs tg;  // reuse training parameter block
    std::string tg_out = "pipeline.ggr";
    std::string tg_mode = "ggr_fusion";
    auto* tg_cmd = app.add_subcommand("train-ggr", "fit a pipeline on a full cohort directory");
    tg_cmd->add_option("--cohort", tg.cohort_dir, "cohort directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    tg_cmd->add_option("--mode", tg_mode, "pipeline mode");
    tg_cmd->add_option("--seed", tg.seed, "training seed");
    tg_cmd->add_option("--out", tg_out, "pipeline bundle output");
    tg_cmd->add_option("--pvalue", tg.pvalue, "selection p-value threshold")
        ->check(CLI::Range(0.0, 1.0));
    tg_cmd->add_option("--lambda-frac", tg.lambda_frac, "LASSO lambda fraction")
        ->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--gene-method", tg.gene_method, "gene selection method");
    tg_cmd->add_flag("--raw-targets", tg.raw_targets, "train regressors on raw FPKM targets");
    tg_cmd->add_option("--regressor-lr", tg.regressor_lr, "regressor learning rate")
        ->check(CLI::PositiveNumber);
    tg_cmd->add_option("--regressor-epochs", tg.regressor_epochs)->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--classifier-lr", tg.classifier_lr, "classifier learning rate")
        ->check(CLI::PositiveNumber);
    tg_cmd->add_option("--classifier-epochs", tg.classifier_epochs)->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--momentum", tg.momentum)->check(CLI::Range(0.0, 0.999999));
    tg_cmd->add_option("--decay", tg.decay)->check(CLI::NonNegativeNumber);
    tg_cmd->add_option("--jobs", tg.jobs, "worker threads")->check(CLI::PositiveNumber);

    // ---- predict ----
    std::string pr_pipeline, pr_volume, pr_mask, pr_deep, pr_genes, pr_id = "patient", pr_out;
    auto* pr_cmd = app.add_subcommand("predict", "recurrence probability for one patient");
    pr_cmd->add_option("--pipeline", pr_pipeline, "pipeline bundle")->required()->check(CLI::ExistingFile);
    pr_cmd->add_option("--volume", pr_volume, "GGRVOL input")->required()->check(CLI::ExistingFile);
    pr_cmd->add_option("--mask", pr_mask, "GGRMSK input")->required()->check(CLI::ExistingFile);
    pr_cmd->add_option("--deep", pr_deep, "deep-feature CSV (fusion/deep modes)");
    pr_cmd->add_option("--genes", pr_genes, "gene CSV (gene-truth modes only)");
    pr_cmd->add_option("--id", pr_id, "patient id for CSV joins and output");
    pr_cmd->add_option("--out", pr_out, "write id,probability,label CSV here (default stdout)");

    // ---- evaluate ----
    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "repeated stratified k-fold comparison");
    ev_cmd->set_config("--config", "", "read defaults from a TOML/INI config file");
    ev_cmd->allow_config_extras(false);
    ev_cmd->add_option("--cohort", ev.cohort_dir, "cohort directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    ev_cmd->add_option("--out", ev.out_dir, "report output directory");
    ev_cmd->add_option("--modes", ev.modes, "comma list of modes, or 'all'");
    ev_cmd->add_option("--seed", ev.seed, "fold/init seed");
    ev_cmd->add_option("--k", ev.k, "folds per repeat")->check(CLI::Range(2, 1000));
    ev_cmd->add_option("--repeats", ev.repeats, "repeats")->check(CLI::PositiveNumber);
    ev_cmd->add_option("--jobs", ev.jobs, "parallel fold workers")->check(CLI::PositiveNumber);
    ev_cmd->add_flag("--global-selection", ev.global_selection,
                     "select genes once on the full cohort (leaks; off by default)");
    ev_cmd->add_flag("--raw-targets", ev.raw_targets, "train regressors on raw FPKM targets");
    ev_cmd->add_option("--pvalue", ev.pvalue, "selection p-value threshold")
        ->check(CLI::Range(0.0, 1.0));
    ev_cmd->add_option("--lambda-frac", ev.lambda_frac, "LASSO lambda fraction")
        ->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--gene-method", ev.gene_method, "gene selection method");
    ev_cmd->add_option("--regressor-lr", ev.regressor_lr, "regressor learning rate")
        ->check(CLI::PositiveNumber);
    ev_cmd->add_option("--regressor-epochs", ev.regressor_epochs)->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--classifier-lr", ev.classifier_lr, "classifier learning rate")
        ->check(CLI::PositiveNumber);
    ev_cmd->add_option("--classifier-epochs", ev.classifier_epochs)->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--momentum", ev.momentum)->check(CLI::Range(0.0, 0.999999));
    ev_cmd->add_option("--decay", ev.decay)->check(CLI::NonNegativeNumber);
    ev_cmd->add_option("--batch-size", ev.batch_size, "0 = full batch")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);

        if (pp_cmd->parsed()) {
            const auto volume = ggr::load_volume(pp_volume);
            const auto mask = ggr::load_mask(pp_mask);
            const ggr::Slab slab = ggr::preprocess_patient(volume, mask);
            ggr::save_slab(slab, pp_out_slab, pp_out_mask);
            std::cout << "wrote slab (center slice " << slab.image.source_slices[1] << ")\n";
            return 0;
        }

        if (xf_cmd->parsed()) {
            if (!xf_cohort.empty()) {
                const ggr::CohortDataset cohort = ggr::load_cohort_dir(xf_cohort);
                const ggr::Matrix features =
                    ggr::compute_handcrafted_matrix(cohort, {}, xf_jobs);
                write_features_csv(cohort, features, xf_out);
                std::cout << "wrote " << cohort.records.size() << " feature rows\n";
                return 0;
            }
            ggr::Slab slab;
            if (!xf_slab.empty()) {
                slab = ggr::load_slab(xf_slab, xf_slab_mask);
            } else if (!xf_volume.empty()) {
                slab = ggr::preprocess_patient(ggr::load_volume(xf_volume), ggr::load_mask(xf_mask));
            } else {
                throw std::runtime_error("extract-features needs --cohort, --slab or --volume");
            }
            const ggr::FeatureVector fv = ggr::extract_handcrafted(slab);
            ggr::CsvTable csv;
            csv.header.push_back("patient_id");
            for (const auto& n : fv.names) csv.header.push_back(n);
            std::vector<std::string> row{xf_id};
            for (double v : fv.values) row.push_back(ggr::format_double(v));
            csv.rows.push_back(std::move(row));
            ggr::write_csv(csv, xf_out);
            return 0;
        }

        if (sel_cmd->parsed()) {
            const ggr::CsvTable feat = ggr::read_csv(sel_features);
            if (feat.header.empty() || feat.header[0] != "patient_id")
                throw std::runtime_error("features CSV must start with patient_id");
            const ggr::CsvTable lab = ggr::read_csv(sel_labels);
            std::map<std::string, int> label_by_id;
            for (const auto& row : lab.rows)
                if (row.size() >= 2 && !row[1].empty()) label_by_id[row[0]] = std::stoi(row[1]);
            const int d = static_cast<int>(feat.header.size()) - 1;
            ggr::Matrix x(static_cast<int>(feat.rows.size()), d);
            std::vector<int> y;
            for (size_t r = 0; r < feat.rows.size(); ++r) {
                const auto it = label_by_id.find(feat.rows[r][0]);
                if (it == label_by_id.end())
                    throw std::runtime_error("no label for patient " + feat.rows[r][0]);
                y.push_back(it->second);
                for (int c = 0; c < d; ++c)
                    x(static_cast<int>(r), c) = ggr::parse_double(feat.rows[r][c + 1], "features");
            }
            ggr::SelectionConfig config;
            config.method = ggr::parse_selection_method(sel_method);
            config.pvalue = sel_pvalue;
            config.lambda_frac = sel_lambda;
            const ggr::SelectionResult res = ggr::select_features(x, y, config);
            ggr::CsvTable out;
            out.header = {"index", "name", "score", "p", "selected"};
            std::vector<char> chosen(d, 0);
            for (int i : res.selected) chosen[i] = 1;
            for (int j = 0; j < d; ++j)
                out.rows.push_back({std::to_string(j), feat.header[j + 1],
                                    ggr::format_double(res.scores[j]),
                                    ggr::format_double(res.pvalues[j]), chosen[j] ? "1" : "0"});
            ggr::write_csv(out, sel_out);
            std::cout << "selected " << res.selected.size() << " of " << d
                      << (res.used_fallback ? " (fallback: " + res.note + ")" : "") << "\n";
            return 0;
        }

        if (tg_cmd->parsed()) {
            const ggr::CohortDataset cohort = ggr::load_cohort_dir(tg.cohort_dir);
            const ggr::Mode mode = ggr::parse_mode(tg_mode);
            const ggr::Matrix hand = ggr::compute_handcrafted_matrix(cohort, {}, tg.jobs);
            ggr::TrainData data;
            data.handcrafted = hand;
            data.gene_names = cohort.gene_names;
            data.labels = cohort.labels();
            if (ggr::mode_estimates_genes(mode) || ggr::mode_uses_true_genes(mode))
                data.genes = cohort.gene_matrix();
            if (ggr::mode_uses_deep(mode)) {
                int dim = -1;
                for (const auto& rec : cohort.records) {
                    if (!rec.deep_features)
                        throw std::runtime_error("mode requires deep features; missing for " +
                                                 rec.id);
                    dim = static_cast<int>(rec.deep_features->size());
                }
                data.deep = ggr::Matrix(static_cast<int>(cohort.records.size()), dim);
                for (size_t i = 0; i < cohort.records.size(); ++i)
                    for (int c = 0; c < dim; ++c)
                        data.deep(static_cast<int>(i), c) = (*cohort.records[i].deep_features)[c];
            }
            ggr::PipelineConfig pc = make_pipeline_config(tg);
            pc.seed = tg.seed;
            const ggr::GgrPipeline pipe = ggr::train_pipeline(mode, data, pc);
            ggr::save_pipeline(pipe, tg_out);
            std::cout << "trained " << ggr::mode_name(mode) << " pipeline ("
                      << pipe.regressors.size() << " gene regressors) -> " << tg_out << "\n";
            return 0;
        }

        if (pr_cmd->parsed()) {
            const ggr::GgrPipeline pipe = ggr::load_pipeline(pr_pipeline);
            const ggr::Slab slab =
                ggr::preprocess_patient(ggr::load_volume(pr_volume), ggr::load_mask(pr_mask));
            const ggr::FeatureVector fv = ggr::extract_handcrafted(slab);
            std::vector<double> deep_row;
            if (ggr::mode_uses_deep(pipe.mode)) {
                if (pr_deep.empty()) throw std::runtime_error("pipeline mode requires --deep CSV");
                const ggr::DeepFeatureTable deep = ggr::load_deep_features(pr_deep);
                bool found = false;
                for (size_t i = 0; i < deep.patient_ids.size(); ++i)
                    if (deep.patient_ids[i] == pr_id) {
                        deep_row = deep.values[i];
                        found = true;
                    }
                if (!found) throw std::runtime_error("patient id not in deep-feature CSV: " + pr_id);
            }
            std::vector<double> genes_row;
            if (ggr::mode_uses_true_genes(pipe.mode)) {
                if (pr_genes.empty()) throw std::runtime_error("pipeline mode requires --genes CSV");
                const ggr::GeneExpressionTable genes = ggr::load_gene_table(pr_genes);
                const int row = genes.patient_index(pr_id);
                if (row < 0) throw std::runtime_error("patient id not in gene CSV: " + pr_id);
                genes_row.resize(genes.gene_names.size());
                for (size_t g = 0; g < genes_row.size(); ++g)
                    genes_row[g] = genes.values(row, static_cast<int>(g));
            }
            const double prob = ggr::predict_recurrence(pipe, fv.values, deep_row, genes_row);
            ggr::CsvTable out;
            out.header = {"patient_id", "probability", "label"};
            out.rows.push_back({pr_id, ggr::format_double(prob), prob >= 0.5 ? "1" : "0"});
            if (pr_out.empty()) {
                std::cout << "patient_id,probability,label\n"
                          << pr_id << ',' << ggr::format_double(prob) << ','
                          << (prob >= 0.5 ? "1" : "0") << "\n";
            } else {
                ggr::write_csv(out, pr_out);
            }
            return 0;
        }

        if (ev_cmd->parsed()) return cmd_evaluate(ev, ev_cmd->config_to_str(true, true));

        std::cerr << "error: usage: no subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 1;
    }
}
