#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "fdd/baselines.hpp"
#include "fdd/data.hpp"
#include "fdd/error.hpp"
#include "fdd/kvconfig.hpp"
#include "fdd/preprocess.hpp"
#include "fdd/rng.hpp"
#include "fdd/semigan.hpp"

namespace fdd {

enum class Method { SemiGan = 0, Nn1 = 1, Nn2 = 2 };

inline const char* method_name(Method m)
{
    switch (m) {
    case Method::SemiGan: return "semigan";
    case Method::Nn1: return "nn1";
    case Method::Nn2: return "nn2";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "semigan") return Method::SemiGan;
    if (s == "nn1") return Method::Nn1;
    if (s == "nn2") return Method::Nn2;
    throw InputError("unknown method '" + s + "' (expected semigan, nn1 or nn2)");
}

struct ExperimentPlan {
    std::vector<std::size_t> labeled_sizes = {40, 80, 160, 320, 800, 1600};
    std::vector<std::size_t> unlabeled_sizes = {800, 1600, 3200, 4800, 8000, 16000};
    std::size_t n_redraws = 10;
    std::size_t n_inits = 10;
    std::vector<Method> methods = {Method::SemiGan, Method::Nn1, Method::Nn2};
    std::uint64_t base_seed = 0;
    std::size_t n_validation = 2000;
    std::size_t n_test = 16000;
    bool stratified = true;
    /// Select the best init by test accuracy instead of validation accuracy.
    bool paper_selection = false;
    std::size_t workers = 1;
    /// Hidden widths of the one-layer baseline. The two-layer baseline reuses the discriminator's.
    std::size_t nn1_hidden = 32;
    std::size_t baseline_epochs = 1000;
    double baseline_lr = 2e-3;
    /// Shape fields are adapted to the data; n_classes, widths of hidden layers and training knobs are used as given.
    SemiGanConfig semigan;

    void validate() const
    {
        auto positive = [](const std::vector<std::size_t>& v, const char* what) {
            if (v.empty()) {
                throw InputError(std::string("plan: ") + what + " is empty");
            }
            for (auto s : v) {
                if (s == 0) {
                    throw InputError(std::string("plan: ") + what + " must be positive");
                }
            }
        };
        positive(labeled_sizes, "labeled_sizes");
        positive(unlabeled_sizes, "unlabeled_sizes");
        if (n_redraws == 0 || n_inits == 0) {
            throw InputError("plan: n_redraws and n_inits must be >= 1");
        }
        if (methods.empty()) {
            throw InputError("plan: no methods");
        }
        if (n_validation == 0 || n_test == 0) {
            throw InputError("plan: validation and test sizes must be >= 1");
        }
        if (workers == 0) {
            throw InputError("plan: workers must be >= 1");
        }
        if (semigan.disc_layers.size() < 2) {
            throw InputError("plan: discriminator needs at least two widths");
        }
    }

    SupervisedConfig baseline(Method m) const
    {
        SupervisedConfig c;
        c.n_classes = semigan.n_classes;
        c.epochs = baseline_epochs;
        c.adam = semigan.adam;
        c.adam.lr = baseline_lr;
        c.leaky_slope = semigan.leaky_slope;
        if (m == Method::Nn1) {
            c.hidden = {nn1_hidden};
        } else {
            c.hidden.assign(semigan.disc_layers.begin() + 1, semigan.disc_layers.end() - 1);
        }
        return c;
    }
};

namespace detail {

template <class T>
std::string join(const std::vector<T>& v)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        os << (i ? "," : "") << v[i];
    }
    return os.str();
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

inline void read_semigan_keys(KeyValues& kv, SemiGanConfig& c)
{
    kv.read("n_classes", c.n_classes);
    kv.read("noise_dim", c.noise_dim);
    kv.read_list("gen_layers", c.gen_layers);
    kv.read_list("disc_layers", c.disc_layers);
    kv.read("batch_size", c.batch_size);
    kv.read("iterations", c.iterations);
    kv.read("lr", c.adam.lr);
    kv.read("beta1", c.adam.beta1);
    kv.read("beta2", c.adam.beta2);
    kv.read("eps", c.adam.eps);
    kv.read("gen_lr", c.gen_lr);
    kv.read("leaky_slope", c.leaky_slope);
    kv.read("seed", c.seed);
    kv.read("labeled_only", c.labeled_only);
}

inline void write_semigan_keys(std::ostream& os, const SemiGanConfig& c)
{
    os << "n_classes = " << c.n_classes << '\n'
       << "noise_dim = " << c.noise_dim << '\n'
       << "gen_layers = " << detail::join(c.gen_layers) << '\n'
       << "disc_layers = " << detail::join(c.disc_layers) << '\n'
       << "batch_size = " << c.batch_size << '\n'
       << "iterations = " << c.iterations << '\n'
       << "lr = " << detail::format_double(c.adam.lr) << '\n'
       << "beta1 = " << detail::format_double(c.adam.beta1) << '\n'
       << "beta2 = " << detail::format_double(c.adam.beta2) << '\n'
       << "eps = " << detail::format_double(c.adam.eps) << '\n'
       << "gen_lr = " << detail::format_double(c.gen_lr) << '\n'
       << "leaky_slope = " << detail::format_double(c.leaky_slope) << '\n'
       << "seed = " << c.seed << '\n'
       << "labeled_only = " << (c.labeled_only ? "true" : "false") << '\n';
}

inline ExperimentPlan read_plan(KeyValues& kv)
{
    ExperimentPlan p;
    kv.read_list("labeled_sizes", p.labeled_sizes);
    kv.read_list("unlabeled_sizes", p.unlabeled_sizes);
    kv.read("n_redraws", p.n_redraws);
    kv.read("n_inits", p.n_inits);
    std::vector<std::string> methods;
    kv.read_list("methods", methods);
    if (!methods.empty()) {
        p.methods.clear();
        for (const auto& m : methods) {
            p.methods.push_back(parse_method(m));
        }
    }
    kv.read("base_seed", p.base_seed);
    kv.read("n_validation", p.n_validation);
    kv.read("n_test", p.n_test);
    kv.read("stratified", p.stratified);
    kv.read("paper_selection", p.paper_selection);
    kv.read("workers", p.workers);
    kv.read("nn1_hidden", p.nn1_hidden);
    kv.read("baseline_epochs", p.baseline_epochs);
    kv.read("baseline_lr", p.baseline_lr);
    read_semigan_keys(kv, p.semigan);
    kv.ensure_consumed();
    p.validate();
    return p;
}

inline ExperimentPlan load_plan(const std::string& path)
{
    auto kv = KeyValues::load(path);
    return read_plan(kv);
}

/// Canonical text form. Parsing it back yields an equal plan.
inline std::string serialize_plan(const ExperimentPlan& p)
{
    std::ostringstream os;
    std::vector<std::string> methods;
    for (auto m : p.methods) {
        methods.emplace_back(method_name(m));
    }
    os << "labeled_sizes = " << detail::join(p.labeled_sizes) << '\n'
       << "unlabeled_sizes = " << detail::join(p.unlabeled_sizes) << '\n'
       << "n_redraws = " << p.n_redraws << '\n'
       << "n_inits = " << p.n_inits << '\n'
       << "methods = " << detail::join(methods) << '\n'
       << "base_seed = " << p.base_seed << '\n'
       << "n_validation = " << p.n_validation << '\n'
       << "n_test = " << p.n_test << '\n'
       << "stratified = " << (p.stratified ? "true" : "false") << '\n'
       << "paper_selection = " << (p.paper_selection ? "true" : "false") << '\n'
       << "workers = " << p.workers << '\n'
       << "nn1_hidden = " << p.nn1_hidden << '\n'
       << "baseline_epochs = " << p.baseline_epochs << '\n'
       << "baseline_lr = " << detail::format_double(p.baseline_lr) << '\n';
    write_semigan_keys(os, p.semigan);
    return os.str();
}

/// Hash of everything that affects results. The worker count is excluded.
inline std::uint64_t plan_hash(const ExperimentPlan& p)
{
    ExperimentPlan q = p;
    q.workers = 1;
    return detail::fnv1a(serialize_plan(q));
}

// Seed derivation. Every random draw of a sweep comes from one of these two seeds.
//   split seed: derive_seed(base_seed, {kSplitTag, redraw})
//   init seed:  derive_seed(base_seed, {kInitTag, method, n_labeled, n_unlabeled, redraw, init})
// The split seed ignores method and cell so every method (and every cell) of a redraw
// shares the same test and validation rows.
inline constexpr std::uint64_t kSplitTag = 0x5350;
inline constexpr std::uint64_t kInitTag = 0x494e;

inline std::uint64_t split_seed(std::uint64_t base, std::size_t redraw) { return derive_seed(base, {kSplitTag, redraw}); }

inline std::uint64_t init_seed(std::uint64_t base, Method m, std::size_t n_labeled, std::size_t n_unlabeled,
                               std::size_t redraw, std::size_t init)
{
    return derive_seed(base, {kInitTag, static_cast<std::uint64_t>(m), n_labeled, n_unlabeled, redraw, init});
}

struct RunRecord {
    Method method = Method::SemiGan;
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled = 0;
    std::size_t redraw = 0;
    std::size_t init = 0;
    std::uint64_t redraw_seed = 0;
    std::uint64_t init_seed = 0;
    double val_accuracy = 0.0;  // NaN when training diverged
    double test_accuracy = 0.0; // NaN when training diverged
    std::array<double, kMaxSeverity> severity_accuracy{}; // NaN where the test set has no such rows

    auto key() const { return std::tuple(static_cast<int>(method), n_labeled, n_unlabeled, redraw, init); }
};

struct CellSummary {
    Method method = Method::SemiGan;
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled = 0;
    std::size_t n_redraws = 0;
    /// Over redraws, of the test accuracy of the selected init.
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for a single redraw
    /// Over redraws, of the maximum test accuracy over inits.
    double mean_best_of_inits = 0.0;
    /// Over all runs of the cell.
    double mean_over_inits = 0.0;
    std::array<double, kMaxSeverity> severity_mean{};

    auto key() const { return std::tuple(static_cast<int>(method), n_labeled, n_unlabeled); }
};

struct ExperimentReport {
    std::vector<RunRecord> records; // canonical order
    std::vector<CellSummary> cells; // canonical order
    std::vector<std::string> warnings;
    bool paper_selection = false;
};

namespace detail {

inline double nan_mean(const std::vector<double>& xs)
{
    double s = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        if (!std::isnan(x)) {
            s += x;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(n);
}

inline double sample_std(const std::vector<double>& xs)
{
    if (xs.size() < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

} // namespace detail

/// Index of the init chosen for one (cell, redraw) group: highest validation accuracy
/// (or test accuracy when `by_test`), lowest init on ties. Diverged runs are never chosen
/// unless every run diverged.
inline std::size_t select_init(std::span<const RunRecord> group, bool by_test)
{
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        const double s = by_test ? group[i].test_accuracy : group[i].val_accuracy;
        if (!std::isnan(s) && s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

/// Aggregates canonically sorted records into one summary per cell.
inline std::vector<CellSummary> summarize(std::span<const RunRecord> records, bool paper_selection)
{
    std::vector<CellSummary> out;
    std::size_t i = 0;
    while (i < records.size()) {
        const auto& first = records[i];
        std::size_t j = i;
        while (j < records.size() && records[j].method == first.method && records[j].n_labeled == first.n_labeled &&
               records[j].n_unlabeled == first.n_unlabeled) {
            ++j;
        }
        CellSummary cell;
        cell.method = first.method;
        cell.n_labeled = first.n_labeled;
        cell.n_unlabeled = first.n_unlabeled;
        std::vector<double> selected, best, all;
        std::array<std::vector<double>, kMaxSeverity> sev;
        for (std::size_t g = i; g < j;) {
            std::size_t h = g;
            while (h < j && records[h].redraw == records[g].redraw) {
                ++h;
            }
            const std::span<const RunRecord> group(records.data() + g, h - g);
            const auto& chosen = group[select_init(group, paper_selection)];
            selected.push_back(chosen.test_accuracy);
            for (std::size_t s = 0; s < kMaxSeverity; ++s) {
                sev[s].push_back(chosen.severity_accuracy[s]);
            }
            double mx = std::numeric_limits<double>::quiet_NaN();
            for (const auto& r : group) {
                all.push_back(r.test_accuracy);
                if (!std::isnan(r.test_accuracy) && (std::isnan(mx) || r.test_accuracy > mx)) {
                    mx = r.test_accuracy;
                }
            }
            best.push_back(mx);
            g = h;
        }
        cell.n_redraws = selected.size();
        cell.mean = detail::nan_mean(selected);
        cell.std = detail::sample_std(selected);
        cell.mean_best_of_inits = detail::nan_mean(best);
        cell.mean_over_inits = detail::nan_mean(all);
        for (std::size_t s = 0; s < kMaxSeverity; ++s) {
            cell.severity_mean[s] = detail::nan_mean(sev[s]);
        }
        out.push_back(cell);
        i = j;
    }
    return out;
}

/// Per-run progress callback; called from worker threads under a lock.
using ProgressFn = std::function<void(const RunRecord&, std::size_t done, std::size_t total)>;

namespace detail {

struct SweepJob {
    Method method;
    std::size_t n_labeled;
    std::size_t n_unlabeled;
    std::size_t redraw;
    std::size_t init;
};

inline RunRecord run_job(const ExperimentPlan& plan, const Dataset& source, const SweepJob& job)
{
    RunRecord rec;
    rec.method = job.method;
    rec.n_labeled = job.n_labeled;
    rec.n_unlabeled = job.n_unlabeled;
    rec.redraw = job.redraw;
    rec.init = job.init;
    rec.redraw_seed = split_seed(plan.base_seed, job.redraw);
    rec.init_seed = init_seed(plan.base_seed, job.method, job.n_labeled, job.n_unlabeled, job.redraw, job.init);

    SplitSpec spec;
    spec.n_labeled = job.n_labeled;
    spec.n_unlabeled = job.n_unlabeled;
    spec.n_validation = plan.n_validation;
    spec.n_test = plan.n_test;
    spec.seed = rec.redraw_seed;
    spec.n_classes = plan.semigan.n_classes;
    spec.stratified = plan.stratified;
    const Split raw = split(source, spec);

    // Standardization is fitted on the training rows (labeled and unlabeled) only.
    Batch train = raw.labeled.features;
    for (std::size_t r = 0; r < raw.unlabeled.features.rows(); ++r) {
        train.append_row(raw.unlabeled.features.row(r));
    }
    const auto stats = fit_standardizer(train);
    const Dataset labeled = apply_standardizer(stats, raw.labeled);
    const Dataset validation = apply_standardizer(stats, raw.validation);
    const Dataset test = apply_standardizer(stats, raw.test);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.severity_accuracy.fill(nan);
    try {
        DenseNet net;
        if (job.method == Method::SemiGan) {
            auto cfg = plan.semigan.with_shape(source.width(), plan.semigan.n_classes);
            cfg.seed = rec.init_seed;
            const UnlabeledSet unlabeled{apply_standardizer(stats, raw.unlabeled.features)};
            net = std::move(train_semigan(cfg, labeled, unlabeled).discriminator);
        } else {
            auto cfg = plan.baseline(job.method);
            cfg.seed = rec.init_seed;
            net = train_supervised(cfg, labeled);
        }
        rec.val_accuracy = evaluate(net, validation).accuracy;
        const auto ev = evaluate(net, test);
        rec.test_accuracy = ev.accuracy;
        for (std::size_t s = 0; s < kMaxSeverity; ++s) {
            rec.severity_accuracy[s] = ev.per_severity[s];
        }
    } catch (const DivergenceError&) {
        rec.val_accuracy = nan;
        rec.test_accuracy = nan;
    }
    return rec;
}

} // namespace detail

/// Runs every (method, labeled size, unlabeled size, redraw, init) combination of the plan on
/// an already filtered source. Results do not depend on the worker count or completion order.
inline ExperimentReport run_sweep(const ExperimentPlan& plan, const Dataset& source, const ProgressFn& progress = {})
{
    plan.validate();
    source.validate();
    if (!source.fully_labeled()) {
        throw InputError("sweep: every source row needs a label");
    }
    ExperimentReport report;
    report.paper_selection = plan.paper_selection;

    // Feasibility is checked up front with the redraw-0 split; a cell that cannot be drawn is skipped.
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (auto nl : plan.labeled_sizes) {
        for (auto nu : plan.unlabeled_sizes) {
            SplitSpec spec{.n_labeled = nl,
                           .n_unlabeled = nu,
                           .n_validation = plan.n_validation,
                           .n_test = plan.n_test,
                           .seed = split_seed(plan.base_seed, 0),
                           .n_classes = plan.semigan.n_classes,
                           .stratified = plan.stratified};
            try {
                (void)split(source, spec);
                cells.emplace_back(nl, nu);
            } catch (const InputError& e) {
                report.warnings.push_back("skipping cell " + std::to_string(nl) + " labeled / " + std::to_string(nu) +
                                          " unlabeled: " + e.what());
            }
        }
    }

    std::vector<detail::SweepJob> jobs;
    for (auto m : plan.methods) {
        for (const auto& [nl, nu] : cells) {
            for (std::size_t r = 0; r < plan.n_redraws; ++r) {
                for (std::size_t i = 0; i < plan.n_inits; ++i) {
                    jobs.push_back({m, nl, nu, r, i});
                }
            }
        }
    }

    std::vector<std::optional<RunRecord>> results(jobs.size());
    std::vector<std::string> failures;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            std::optional<RunRecord> rec;
            std::string failure;
            try {
                rec = detail::run_job(plan, source, jobs[k]);
            } catch (const InputError& e) {
                failure = e.what();
            }
            const std::lock_guard lock(mu);
            ++done;
            if (rec) {
                results[k] = *rec;
                if (rec->test_accuracy != rec->test_accuracy) {
                    failures.push_back(std::string(method_name(rec->method)) + " diverged at " +
                                       std::to_string(rec->n_labeled) + "/" + std::to_string(rec->n_unlabeled) +
                                       " redraw " + std::to_string(rec->redraw) + " init " +
                                       std::to_string(rec->init));
                }
                if (progress) {
                    progress(*rec, done, jobs.size());
                }
            } else {
                failures.push_back(failure);
            }
        }
    };
    const std::size_t n_threads = std::min(plan.workers, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    // A cell where any run could not be drawn is dropped whole, so every emitted cell is complete.
    std::vector<std::tuple<int, std::size_t, std::size_t>> broken;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!results[k]) {
            broken.emplace_back(static_cast<int>(jobs[k].method), jobs[k].n_labeled, jobs[k].n_unlabeled);
        }
    }
    std::sort(failures.begin(), failures.end());
    for (auto& f : failures) {
        report.warnings.push_back(std::move(f));
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (!results[k]) {
            continue;
        }
        const auto cell = std::tuple(static_cast<int>(jobs[k].method), jobs[k].n_labeled, jobs[k].n_unlabeled);
        if (std::find(broken.begin(), broken.end(), cell) == broken.end()) {
            report.records.push_back(*results[k]);
        }
    }
    std::sort(report.records.begin(), report.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.key() < b.key(); });
    report.cells = summarize(report.records, plan.paper_selection);
    return report;
}

/// Smallest size in `grid` (ascending) whose mean accuracy reaches `target`; nullopt when none does.
inline std::optional<std::size_t> minimal_labeled_size(const std::function<double(std::size_t)>& mean_accuracy,
                                                       double target, std::span<const std::size_t> grid)
{
    std::vector<std::size_t> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end());
    for (auto n : sorted) {
        const double acc = mean_accuracy(n);
        if (!std::isnan(acc) && acc >= target) {
            return n;
        }
    }
    return std::nullopt;
}

/// Same search over the cells of a finished report.
inline std::optional<std::size_t> minimal_labeled_size(const ExperimentReport& report, Method method, double target,
                                                       std::size_t n_unlabeled)
{
    std::vector<std::size_t> grid;
    for (const auto& c : report.cells) {
        if (c.method == method && c.n_unlabeled == n_unlabeled) {
            grid.push_back(c.n_labeled);
        }
    }
    auto lookup = [&](std::size_t n) {
        for (const auto& c : report.cells) {
            if (c.method == method && c.n_unlabeled == n_unlabeled && c.n_labeled == n) {
                return c.mean;
            }
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    return minimal_labeled_size(lookup, target, grid);
}

/// Published test accuracies on the real chiller data, 16000 unlabeled rows: mean and std
/// over ten redraws. The LS-SVM, DBN and semi-SVM methods are not reimplemented here.
struct PublishedRow {
    std::size_t n_labeled;
    const char* method;
    double mean;
    double std;
};

inline constexpr std::array<PublishedRow, 36> kPublishedAccuracy{{
    {40, "semigan", 0.7101, 0.0524}, {80, "semigan", 0.8404, 0.0329}, {160, "semigan", 0.8914, 0.0192},
    {320, "semigan", 0.9193, 0.0065}, {800, "semigan", 0.9441, 0.0034}, {1600, "semigan", 0.9579, 0.0016},
    {40, "nn1", 0.4450, 0.0238}, {80, "nn1", 0.6479, 0.0323}, {160, "nn1", 0.7755, 0.0182},
    {320, "nn1", 0.8512, 0.0102}, {800, "nn1", 0.9113, 0.0040}, {1600, "nn1", 0.9352, 0.0028},
    {40, "nn2", 0.4412, 0.0332}, {80, "nn2", 0.6482, 0.0348}, {160, "nn2", 0.7861, 0.0168},
    {320, "nn2", 0.8575, 0.0094}, {800, "nn2", 0.9091, 0.0038}, {1600, "nn2", 0.9336, 0.0034},
    {40, "lssvm", 0.3654, 0.0439}, {80, "lssvm", 0.5960, 0.0359}, {160, "lssvm", 0.7388, 0.0148},
    {320, "lssvm", 0.8224, 0.0116}, {800, "lssvm", 0.9002, 0.0068}, {1600, "lssvm", 0.9379, 0.0029},
    {40, "dbn", 0.4278, 0.0241}, {80, "dbn", 0.6159, 0.0347}, {160, "dbn", 0.7536, 0.0194},
    {320, "dbn", 0.8437, 0.0135}, {800, "dbn", 0.9061, 0.0036}, {1600, "dbn", 0.9370, 0.0030},
    {40, "semisvm", 0.4696, 0.0364}, {80, "semisvm", 0.6887, 0.0346}, {160, "semisvm", 0.8020, 0.0156},
    {320, "semisvm", 0.8667, 0.0137}, {800, "semisvm", 0.9254, 0.0050}, {1600, "semisvm", 0.9512, 0.0035},
}};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) {
        throw IoError("cannot write '" + p.string() + "'");
    }
    return os;
}

inline std::string fmt_acc(double x) { return std::isnan(x) ? "nan" : format_double(x); }

inline std::string fmt_target(double t)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

} // namespace detail

/// Target accuracies used for the minimal-labeled-size curves: 0.40, 0.41, ..., 0.99.
inline std::vector<double> target_grid()
{
    std::vector<double> t;
    for (int k = 40; k <= 99; ++k) {
        t.push_back(k / 100.0);
    }
    return t;
}

/// Writes records.csv, summary.csv, the three plot_*.csv curve files and published_reference.csv.
inline void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir)
{
    if (report.records.empty()) {
        throw InputError("emit: report has no records");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
    }
    using detail::fmt_acc;

    {
        auto os = detail::open_out(out_dir / "records.csv");
        os << "method,n_labeled,n_unlabeled,redraw,init,redraw_seed,init_seed,val_accuracy,test_accuracy,"
              "severity1,severity2,severity3,severity4\n";
        for (const auto& r : report.records) {
            os << method_name(r.method) << ',' << r.n_labeled << ',' << r.n_unlabeled << ',' << r.redraw << ','
               << r.init << ',' << r.redraw_seed << ',' << r.init_seed << ',' << fmt_acc(r.val_accuracy) << ','
               << fmt_acc(r.test_accuracy);
            for (double s : r.severity_accuracy) {
                os << ',' << fmt_acc(s);
            }
            os << '\n';
        }
    }
    {
        auto os = detail::open_out(out_dir / "summary.csv");
        os << "method,n_labeled,n_unlabeled,n_redraws,selection,mean,std,mean_best_of_inits,mean_over_inits,"
              "severity1,severity2,severity3,severity4\n";
        for (const auto& c : report.cells) {
            os << method_name(c.method) << ',' << c.n_labeled << ',' << c.n_unlabeled << ',' << c.n_redraws << ','
               << (report.paper_selection ? "test" : "validation") << ',' << fmt_acc(c.mean) << ','
               << fmt_acc(c.std) << ',' << fmt_acc(c.mean_best_of_inits) << ',' << fmt_acc(c.mean_over_inits);
            for (double s : c.severity_mean) {
                os << ',' << fmt_acc(s);
            }
            os << '\n';
        }
    }

    std::vector<Method> methods;
    std::vector<std::size_t> labeled, unlabeled;
    for (const auto& c : report.cells) {
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
        if (std::find(labeled.begin(), labeled.end(), c.n_labeled) == labeled.end()) labeled.push_back(c.n_labeled);
        if (std::find(unlabeled.begin(), unlabeled.end(), c.n_unlabeled) == unlabeled.end()) {
            unlabeled.push_back(c.n_unlabeled);
        }
    }
    std::sort(labeled.begin(), labeled.end());
    std::sort(unlabeled.begin(), unlabeled.end());

    // Accuracy against unlabeled size, one series per (method, labeled size).
    {
        auto os = detail::open_out(out_dir / "plot_unlabeled_size.csv");
        os << "series,x,y\n";
        for (const auto& c : report.cells) {
            os << method_name(c.method) << "_L" << c.n_labeled << ',' << c.n_unlabeled << ',' << fmt_acc(c.mean)
               << '\n';
        }
    }
    // Minimal labeled size against target accuracy, at the largest unlabeled size.
    const std::size_t nu = unlabeled.back();
    const auto targets = target_grid();
    {
        auto os = detail::open_out(out_dir / "plot_minimal_labeled.csv");
        os << "series,x,y\n";
        for (auto m : methods) {
            for (double t : targets) {
                if (auto n = minimal_labeled_size(report, m, t, nu)) {
                    os << method_name(m) << "_U" << nu << ',' << detail::fmt_target(t) << ',' << *n << '\n';
                }
            }
        }
    }
    // Percent reduction of the minimal labeled size, semi-GAN against the best supervised baseline.
    {
        auto os = detail::open_out(out_dir / "plot_reduction.csv");
        os << "series,x,y\n";
        if (std::find(methods.begin(), methods.end(), Method::SemiGan) != methods.end()) {
            for (double t : targets) {
                const auto s = minimal_labeled_size(report, Method::SemiGan, t, nu);
                std::optional<std::size_t> sup;
                for (auto m : methods) {
                    if (m == Method::SemiGan) {
                        continue;
                    }
                    if (auto n = minimal_labeled_size(report, m, t, nu); n && (!sup || *n < *sup)) {
                        sup = n;
                    }
                }
                if (s && sup) {
                    const double pct = 100.0 * (1.0 - static_cast<double>(*s) / static_cast<double>(*sup));
                    os << "semigan_vs_supervised_U" << nu << ',' << detail::fmt_target(t) << ','
                       << detail::format_double(pct) << '\n';
                }
            }
        }
    }
    {
        auto os = detail::open_out(out_dir / "published_reference.csv");
        os << "method,n_labeled,n_unlabeled,mean,std,source\n";
        for (const auto& r : kPublishedAccuracy) {
            os << r.method << ',' << r.n_labeled << ",16000," << detail::format_double(r.mean) << ','
               << detail::format_double(r.std) << ",published\n";
        }
    }
}

} // namespace fdd
