#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fdd/baselines.hpp"
#include "fdd/classifier.hpp"
#include "fdd/data.hpp"
#include "fdd/harness.hpp"
#include "fdd/kvconfig.hpp"
#include "fdd/preprocess.hpp"
#include "fdd/semigan.hpp"

namespace {

struct GenOptions {
    std::size_t n = 0; // 0: generator default
    std::uint64_t seed = 0;
    bool seed_set = false;
    double sigma = 0.1;
    double noise = fdd::SyntheticChillerOptions{}.noise;
    double magnitude = fdd::SyntheticChillerOptions{}.fault_magnitude;
};

// Default sizes give a source large enough for the largest default sweep cell.
fdd::Dataset generate(const std::string& kind, const GenOptions& g)
{
    if (kind == "two-rings") {
        return fdd::gen_two_rings(g.n ? g.n : 3000, g.sigma, g.seed_set ? g.seed : 7);
    }
    if (kind == "synthetic-chiller") {
        fdd::SyntheticChillerOptions opt;
        opt.noise = g.noise;
        opt.fault_magnitude = g.magnitude;
        return fdd::gen_synthetic_chiller(g.n ? g.n : 1200, g.seed_set ? g.seed : 11, opt);
    }
    throw fdd::InputError("unknown generator '" + kind + "' (expected two-rings or synthetic-chiller)");
}

bool is_generator(const std::string& s) { return s == "two-rings" || s == "synthetic-chiller"; }

fdd::Dataset load_source(const std::string& spec, const GenOptions& g)
{
    return is_generator(spec) ? generate(spec, g) : fdd::load_csv(spec, false);
}

int infer_classes(const fdd::Dataset& d)
{
    int mx = -1;
    for (int t : d.labels) {
        mx = std::max(mx, t);
    }
    return mx + 1;
}

fdd::Dataset filtered(const fdd::Dataset& raw, bool quiet)
{
    auto res = fdd::filter_source(raw);
    if (!quiet) {
        fdd::write_report(std::cerr, res.report);
    }
    return std::move(res.data);
}

void add_gen_options(CLI::App* cmd, GenOptions& g)
{
    cmd->add_option("--n", g.n, "Rows per ring (two-rings) or per class and severity (synthetic-chiller)");
    cmd->add_option_function<std::uint64_t>(
        "--gen-seed", [&g](const std::uint64_t& s) { g.seed = s; g.seed_set = true; }, "Generator seed");
    cmd->add_option("--sigma", g.sigma, "Two-rings radial noise");
    cmd->add_option("--noise", g.noise, "Synthetic chiller sensor noise");
    cmd->add_option("--magnitude", g.magnitude, "Synthetic chiller fault magnitude");
}

int cmd_preprocess(const std::string& in, const std::string& out, const std::string& report_path)
{
    const auto raw = fdd::load_csv(in, false);
    const auto res = fdd::filter_source(raw);
    fdd::save_csv(out, res.data);
    if (report_path.empty()) {
        fdd::write_report(std::cout, res.report);
    } else {
        std::ofstream os(report_path);
        if (!os) {
            throw fdd::IoError("cannot write '" + report_path + "'");
        }
        fdd::write_report(os, res.report);
    }
    return 0;
}

// Training config: every SemiGanConfig key, plus where the data comes from and where the model goes.
int cmd_train(const std::string& config_path, const GenOptions& g)
{
    auto kv = fdd::KeyValues::load(config_path);
    fdd::SemiGanConfig cfg;
    const bool classes_given = kv.has("n_classes");
    fdd::read_semigan_keys(kv, cfg);
    std::string data = "synthetic-chiller", model_path = "model.fdd", log_path, method = "semigan";
    fdd::SplitSpec spec{.n_labeled = 80, .n_unlabeled = 16000};
    std::uint64_t split_seed = 0;
    std::size_t baseline_epochs = 1000;
    double baseline_lr = 2e-3;
    kv.read("data", data);
    kv.read("model", model_path);
    kv.read("log", log_path);
    kv.read("method", method);
    kv.read("n_labeled", spec.n_labeled);
    kv.read("n_unlabeled", spec.n_unlabeled);
    kv.read("n_validation", spec.n_validation);
    kv.read("n_test", spec.n_test);
    kv.read("stratified", spec.stratified);
    kv.read("split_seed", split_seed);
    kv.read("baseline_epochs", baseline_epochs);
    kv.read("baseline_lr", baseline_lr);
    kv.ensure_consumed();
    spec.seed = split_seed;

    const auto source = filtered(load_source(data, g), false);
    if (!classes_given) {
        cfg.n_classes = infer_classes(source);
    }
    spec.n_classes = cfg.n_classes;

    fdd::Dataset labeled;
    fdd::UnlabeledSet unlabeled;
    std::optional<fdd::Dataset> validation, test;
    if (source.fully_labeled()) {
        auto s = fdd::split(source, spec);
        labeled = std::move(s.labeled);
        unlabeled = std::move(s.unlabeled);
        validation = std::move(s.validation);
        test = std::move(s.test);
    } else {
        // Rows with an empty label are the unlabeled set; nothing is held out.
        std::vector<std::size_t> lab, unl;
        for (std::size_t r = 0; r < source.rows(); ++r) {
            (source.labels[r] == fdd::kUnlabeled ? unl : lab).push_back(r);
        }
        labeled = source.select_rows(lab);
        unlabeled.features = source.features.select_rows(unl);
    }

    fdd::Batch train = labeled.features;
    for (std::size_t r = 0; r < unlabeled.features.rows(); ++r) {
        train.append_row(unlabeled.features.row(r));
    }
    fdd::Classifier clf;
    clf.feature_names = source.feature_names;
    clf.stats = fdd::fit_standardizer(train);
    const auto lab_std = fdd::apply_standardizer(clf.stats, labeled);
    if (method == "semigan") {
        cfg = cfg.with_shape(source.width(), cfg.n_classes);
        std::vector<fdd::IterationLog> log;
        std::optional<fdd::Dataset> val_std;
        if (validation) {
            val_std = fdd::apply_standardizer(clf.stats, *validation);
        }
        auto m = fdd::train_semigan(cfg, lab_std, fdd::UnlabeledSet{fdd::apply_standardizer(clf.stats, unlabeled.features)},
                                    val_std ? &*val_std : nullptr, &log);
        if (!log_path.empty()) {
            std::ofstream os(log_path);
            if (!os) {
                throw fdd::IoError("cannot write '" + log_path + "'");
            }
            fdd::write_training_log(os, log);
        }
        clf.net = std::move(m.discriminator);
    } else {
        fdd::ExperimentPlan plan;
        plan.semigan = cfg;
        plan.baseline_epochs = baseline_epochs;
        plan.baseline_lr = baseline_lr;
        auto bc = plan.baseline(fdd::parse_method(method));
        bc.seed = cfg.seed;
        clf.net = fdd::train_supervised(bc, lab_std);
    }
    fdd::save_classifier(model_path, clf);
    std::cout << "model " << model_path << '\n';
    if (test) {
        const auto ev = fdd::evaluate(clf.net, fdd::apply_standardizer(clf.stats, *test));
        std::printf("test_accuracy %.4f\n", ev.accuracy);
        for (std::size_t s = 0; s < ev.per_severity.size(); ++s) {
            if (ev.severity_counts[s] > 0) {
                std::printf("severity%zu_accuracy %.4f\n", s + 1, ev.per_severity[s]);
            }
        }
    }
    return 0;
}

int cmd_classify(const std::string& model_path, const std::string& in)
{
    auto clf = fdd::load_classifier(model_path);
    const auto raw = fdd::load_csv(in, false);
    const auto pred = clf.predict(raw);
    std::cout << "row,predicted,label\n";
    std::size_t hits = 0, known = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        std::cout << r << ',' << pred[r] << ',';
        if (raw.labels[r] != fdd::kUnlabeled) {
            std::cout << raw.labels[r];
            ++known;
            hits += pred[r] == raw.labels[r];
        }
        std::cout << '\n';
    }
    if (known > 0) {
        std::fprintf(stderr, "accuracy %.4f over %zu labeled rows\n",
                     static_cast<double>(hits) / static_cast<double>(known), known);
    }
    return 0;
}

int cmd_sweep(const std::string& plan_path, const std::string& data, const std::string& out,
              std::optional<std::size_t> workers, bool paper_selection, bool verbose, const GenOptions& g)
{
    auto kv = fdd::KeyValues::load(plan_path);
    const bool classes_given = kv.has("n_classes");
    auto plan = fdd::read_plan(kv);
    if (workers) {
        plan.workers = *workers;
    }
    if (paper_selection) {
        plan.paper_selection = true;
    }
    if (plan.paper_selection) {
        std::cerr << "WARNING: selecting the best init by TEST accuracy. Reported accuracies are optimistic.\n";
    }
    const auto source = filtered(load_source(data, g), false);
    if (!classes_given) {
        plan.semigan.n_classes = infer_classes(source);
    }
    plan.validate();
    std::cerr << "plan hash " << std::hex << fdd::plan_hash(plan) << std::dec << '\n';

    fdd::ProgressFn progress;
    if (verbose) {
        progress = [](const fdd::RunRecord& r, std::size_t done, std::size_t total) {
            std::fprintf(stderr, "[%zu/%zu] %s L=%zu U=%zu redraw=%zu init=%zu test=%.4f\n", done, total,
                         fdd::method_name(r.method), r.n_labeled, r.n_unlabeled, r.redraw, r.init, r.test_accuracy);
        };
    }
    const auto report = fdd::run_sweep(plan, source, progress);
    for (const auto& w : report.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    if (report.records.empty()) {
        throw fdd::InputError("sweep produced no records");
    }
    fdd::emit_report(report, out);
    {
        std::ofstream os(std::filesystem::path(out) / "plan.txt");
        os << fdd::serialize_plan(plan);
    }
    std::printf("%-8s %6s %6s %8s %8s %8s\n", "method", "L", "U", "mean", "std", "best");
    for (const auto& c : report.cells) {
        std::printf("%-8s %6zu %6zu %8.4f %8.4f %8.4f\n", fdd::method_name(c.method), c.n_labeled, c.n_unlabeled,
                    c.mean, c.std, c.mean_best_of_inits);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Semi-supervised GAN fault diagnosis"};
    app.require_subcommand(1);

    std::string pre_in, pre_out, pre_report;
    auto* pre = app.add_subcommand("preprocess", "Remove outliers and constant features from a CSV");
    pre->add_option("input", pre_in, "Input CSV")->required();
    pre->add_option("output", pre_out, "Output CSV")->required();
    pre->add_option("--report", pre_report, "Write the filtering report here instead of stdout");

    std::string train_config;
    GenOptions train_gen;
    auto* train = app.add_subcommand("train", "Train a classifier from a key-value config");
    train->add_option("--config", train_config, "Config file")->required();
    add_gen_options(train, train_gen);

    std::string cls_model, cls_in;
    auto* cls = app.add_subcommand("classify", "Predict classes for the rows of a CSV");
    cls->add_option("--model", cls_model, "Model file written by train")->required();
    cls->add_option("input", cls_in, "Input CSV")->required();

    std::string sw_plan, sw_data, sw_out;
    std::optional<std::size_t> sw_workers;
    bool sw_paper = false, sw_verbose = false;
    GenOptions sw_gen;
    auto* sw = app.add_subcommand("sweep", "Run a labeled/unlabeled size sweep");
    sw->add_option("--plan", sw_plan, "Plan file")->required();
    sw->add_option("--data", sw_data, "CSV path, two-rings or synthetic-chiller")->required();
    sw->add_option("--out", sw_out, "Output directory")->required();
    sw->add_option("--workers", sw_workers, "Parallel runs (overrides the plan)");
    sw->add_flag("--paper-selection", sw_paper, "Select the best init on the test set");
    sw->add_flag("-v,--verbose", sw_verbose, "Print one line per finished run");
    add_gen_options(sw, sw_gen);

    std::string gen_kind, gen_out;
    GenOptions gen_opts;
    auto* gen = app.add_subcommand("gen", "Write a synthetic dataset");
    gen->add_option("kind", gen_kind, "two-rings or synthetic-chiller")->required();
    gen->add_option("--out", gen_out, "Output CSV")->required();
    add_gen_options(gen, gen_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pre) {
            return cmd_preprocess(pre_in, pre_out, pre_report);
        }
        if (*train) {
            return cmd_train(train_config, train_gen);
        }
        if (*cls) {
            return cmd_classify(cls_model, cls_in);
        }
        if (*sw) {
            return cmd_sweep(sw_plan, sw_data, sw_out, sw_workers, sw_paper, sw_verbose, sw_gen);
        }
        if (*gen) {
            fdd::save_csv(gen_out, generate(gen_kind, gen_opts));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "fdd: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
