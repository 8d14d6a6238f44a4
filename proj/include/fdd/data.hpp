#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fdd/batch.hpp"
#include "fdd/error.hpp"
#include "fdd/rng.hpp"

namespace fdd {

inline constexpr int kUnlabeled = -1;
inline constexpr int kNoSeverity = 0;
inline constexpr int kChillerClasses = 8;
inline constexpr int kMaxSeverity = 4;

/// Chiller fault labels: 0 normal, then the seven faults in label order.
inline constexpr std::array<std::string_view, kChillerClasses> kFaultNames = {
    "normal", "cf", "eo", "fwc", "fwe", "nc", "rl", "ro"};

/// Feature matrix with per-row label and optional fault severity.
struct Dataset {
    Batch features;
    std::vector<int> labels;   // class index, or kUnlabeled
    std::vector<int> severity; // 1..4, or kNoSeverity
    std::vector<std::string> feature_names;

    std::size_t rows() const noexcept { return features.rows(); }
    std::size_t width() const noexcept { return features.cols(); }

    bool fully_labeled() const noexcept
    {
        return std::none_of(labels.begin(), labels.end(), [](int l) { return l == kUnlabeled; });
    }

    bool has_severity() const noexcept
    {
        return std::any_of(severity.begin(), severity.end(), [](int s) { return s != kNoSeverity; });
    }

    void validate() const
    {
        if (labels.size() != rows() || severity.size() != rows()) {
            throw DimensionError("dataset: " + std::to_string(rows()) + " rows but " +
                                 std::to_string(labels.size()) + " labels and " + std::to_string(severity.size()) +
                                 " severities");
        }
        if (!feature_names.empty() && feature_names.size() != width()) {
            throw DimensionError("dataset: feature name count does not match width");
        }
    }

    Dataset select_rows(std::span<const std::size_t> idx) const
    {
        Dataset out;
        out.features = features.select_rows(idx);
        out.labels.reserve(idx.size());
        out.severity.reserve(idx.size());
        for (auto i : idx) {
            out.labels.push_back(labels[i]);
            out.severity.push_back(severity[i]);
        }
        out.feature_names = feature_names;
        return out;
    }

    Dataset select_features(std::span<const std::size_t> cols) const
    {
        Dataset out;
        out.features = Batch(rows(), cols.size());
        for (std::size_t r = 0; r < rows(); ++r) {
            for (std::size_t c = 0; c < cols.size(); ++c) {
                out.features(r, c) = features(r, cols[c]);
            }
        }
        out.labels = labels;
        out.severity = severity;
        if (!feature_names.empty()) {
            for (auto c : cols) {
                out.feature_names.push_back(feature_names[c]);
            }
        }
        return out;
    }
};

/// Training rows whose labels were stripped. There is no label field to read.
struct UnlabeledSet {
    Batch features;

    std::size_t rows() const noexcept { return features.rows(); }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out)
{
    s = trim(s);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Parses a CSV stream. A `severity` column is read whenever present; `has_severity` makes it
/// mandatory. `source` names the input in error messages.
inline Dataset read_csv(std::istream& in, bool has_severity, const std::string& source = "<csv>")
{
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError(source + ": empty file");
    }
    const auto header = detail::split_fields(line);
    std::ptrdiff_t label_col = -1;
    std::ptrdiff_t severity_col = -1;
    std::vector<std::size_t> feature_cols;
    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = detail::trim(header[c]);
        if (name == "label") {
            label_col = static_cast<std::ptrdiff_t>(c);
        } else if (name == "severity") {
            severity_col = static_cast<std::ptrdiff_t>(c);
        } else {
            feature_cols.push_back(c);
            ds.feature_names.emplace_back(name);
        }
    }
    if (label_col < 0) {
        throw InputError(source + ": header has no 'label' column");
    }
    if (has_severity && severity_col < 0) {
        throw InputError(source + ": severity requested but header has no 'severity' column");
    }
    if (feature_cols.empty()) {
        throw InputError(source + ": no feature columns");
    }

    std::vector<double> values;
    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw InputError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        }
        for (auto c : feature_cols) {
            double v = 0.0;
            if (!detail::parse_double(fields[c], v)) {
                throw InputError(source + ":" + std::to_string(line_no) + ": bad numeric value '" +
                                 std::string(fields[c]) + "'");
            }
            values.push_back(v);
        }
        const auto label_field = detail::trim(fields[static_cast<std::size_t>(label_col)]);
        int label = kUnlabeled;
        if (!label_field.empty()) {
            if (!detail::parse_int(label_field, label) || label < 0 || label >= kChillerClasses) {
                throw InputError(source + ":" + std::to_string(line_no) + ": label '" + std::string(label_field) +
                                 "' is not an integer in 0..7");
            }
        }
        ds.labels.push_back(label);
        int sev = kNoSeverity;
        if (severity_col >= 0) {
            const auto sev_field = detail::trim(fields[static_cast<std::size_t>(severity_col)]);
            if (!sev_field.empty() &&
                (!detail::parse_int(sev_field, sev) || sev < 1 || sev > kMaxSeverity)) {
                throw InputError(source + ":" + std::to_string(line_no) + ": severity '" + std::string(sev_field) +
                                 "' is not an integer in 1..4");
            }
        }
        ds.severity.push_back(sev);
        ++rows;
    }
    ds.features = Batch(rows, feature_cols.size(), std::move(values));
    return ds;
}

inline Dataset load_csv(const std::string& path, bool has_severity)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return read_csv(in, has_severity, path);
}

/// Writes `label` first, then `severity` if any row carries one, then the features.
inline void write_csv(std::ostream& out, const Dataset& ds)
{
    const bool sev = ds.has_severity();
    out << "label";
    if (sev) {
        out << ",severity";
    }
    for (std::size_t c = 0; c < ds.width(); ++c) {
        out << ',' << (ds.feature_names.empty() ? "f" + std::to_string(c) : ds.feature_names[c]);
    }
    out << '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (ds.labels[r] != kUnlabeled) {
            out << ds.labels[r];
        }
        if (sev) {
            out << ',';
            if (ds.severity[r] != kNoSeverity) {
                out << ds.severity[r];
            }
        }
        for (double v : ds.features.row(r)) {
            out << ',' << detail::format_double(v);
        }
        out << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& ds)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    write_csv(out, ds);
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
    std::size_t n_labeled = 0;
    std::size_t n_unlabeled = 0;
    std::size_t n_validation = 2000;
    std::size_t n_test = 16000;
    std::uint64_t seed = 0;
    int n_classes = kChillerClasses;
    bool stratified = true; // false: labeled rows drawn uniformly
};

struct Split {
    Dataset labeled;
    UnlabeledSet unlabeled;
    Dataset validation;
    Dataset test;
    /// True classes of the unlabeled rows. For diagnostics only; training never sees it.
    std::vector<int> unlabeled_truth;
};

/// Number of labeled rows drawn from each class under stratification.
inline std::vector<std::size_t> stratified_quota(std::size_t n_labeled, int n_classes)
{
    const auto k = static_cast<std::size_t>(n_classes);
    std::vector<std::size_t> quota(k, n_labeled / k);
    for (std::size_t c = 0; c < n_labeled % k; ++c) {
        ++quota[c];
    }
    return quota;
}

/// Draws disjoint test, validation, labeled and unlabeled partitions (in that order) from
/// one seeded permutation, so test and validation rows depend only on the seed and sizes
/// of the partitions drawn before them.
inline Split split(const Dataset& data, const SplitSpec& spec)
{
    data.validate();
    const std::size_t need = spec.n_labeled + spec.n_unlabeled + spec.n_validation + spec.n_test;
    if (need > data.rows()) {
        throw InputError("split: partitions need " + std::to_string(need) + " rows, source has " +
                         std::to_string(data.rows()) + " (short by " + std::to_string(need - data.rows()) + ")");
    }
    for (int l : data.labels) {
        if (l == kUnlabeled || l < 0 || l >= spec.n_classes) {
            throw InputError("split: source rows must all carry a label in 0.." + std::to_string(spec.n_classes - 1));
        }
    }

    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(std::span(order));

    auto take = [&](std::size_t from, std::size_t n) {
        return std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(from),
                                        order.begin() + static_cast<std::ptrdiff_t>(from + n));
    };
    const auto test_idx = take(0, spec.n_test);
    const auto val_idx = take(spec.n_test, spec.n_validation);
    std::vector<std::size_t> pool(order.begin() + static_cast<std::ptrdiff_t>(spec.n_test + spec.n_validation),
                                  order.end());

    std::vector<std::size_t> labeled_idx;
    std::vector<std::size_t> rest;
    if (spec.stratified) {
        auto quota = stratified_quota(spec.n_labeled, spec.n_classes);
        for (auto i : pool) {
            auto& q = quota[static_cast<std::size_t>(data.labels[i])];
            if (q > 0) {
                --q;
                labeled_idx.push_back(i);
            } else {
                rest.push_back(i);
            }
        }
        std::size_t short_by = 0;
        std::string which;
        for (std::size_t c = 0; c < quota.size(); ++c) {
            if (quota[c] > 0) {
                short_by += quota[c];
                which += " class " + std::to_string(c) + " short by " + std::to_string(quota[c]) + ";";
            }
        }
        if (short_by > 0) {
            throw InputError("split: not enough rows for stratified labeled set:" + which);
        }
    } else {
        labeled_idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.n_labeled));
        rest.assign(pool.begin() + static_cast<std::ptrdiff_t>(spec.n_labeled), pool.end());
    }
    if (rest.size() < spec.n_unlabeled) {
        throw InputError("split: unlabeled partition short by " + std::to_string(spec.n_unlabeled - rest.size()) +
                         " rows");
    }
    rest.resize(spec.n_unlabeled);

    Split out;
    out.test = data.select_rows(test_idx);
    out.validation = data.select_rows(val_idx);
    out.labeled = data.select_rows(labeled_idx);
    out.unlabeled.features = data.features.select_rows(rest);
    out.unlabeled_truth.reserve(rest.size());
    for (auto i : rest) {
        out.unlabeled_truth.push_back(data.labels[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Two concentric rings: class 0 at radius 1, class 1 at radius 2, with Gaussian radial noise.
inline Dataset gen_two_rings(std::size_t n_per_ring, double noise_sigma, std::uint64_t seed)
{
    if (n_per_ring == 0) {
        throw InputError("two rings: n_per_ring must be >= 1");
    }
    Rng rng(seed);
    Dataset ds;
    ds.features = Batch(2 * n_per_ring, 2);
    ds.feature_names = {"x", "y"};
    for (int ring = 0; ring < 2; ++ring) {
        for (std::size_t i = 0; i < n_per_ring; ++i) {
            const double angle = 2.0 * std::numbers::pi * rng.uniform();
            const double radius = (ring == 0 ? 1.0 : 2.0) + noise_sigma * rng.normal();
            const std::size_t r = static_cast<std::size_t>(ring) * n_per_ring + i;
            ds.features(r, 0) = radius * std::cos(angle);
            ds.features(r, 1) = radius * std::sin(angle);
            ds.labels.push_back(ring);
            ds.severity.push_back(kNoSeverity);
        }
    }
    return ds;
}

struct SyntheticChillerOptions {
    double fault_magnitude = 1.0;    // scales every fault signature
    double noise = 0.25;             // per-feature sensor noise, in feature units
    double condition_jitter = 0.08;  // spread of the control variables around their levels
    double condition_coupling = 0.6; // how strongly fault signatures depend on the operating point
};

/// Chiller-shaped stand-in data: 61 features, 8 classes, 4 severities, 27 operating points.
///
/// The operating point is three control variables, each at level -1, 0 or +1. A feature's
/// nominal value is an affine-plus-pairwise function of the control variables. A fault of
/// class f at severity s shifts the features by (s/4) * magnitude * d_f(u), where the
/// signature d_f depends on the operating point u. Features carry heterogeneous units
/// (a per-feature scale in [0.1, 100]) so standardization matters.
///
/// Model constants are drawn from Rng(kConstantsSeed) in a fixed order, so the generator is
/// reproducible from this description plus the Rng definition.
///
/// Rows: for every fault class 1..7 and severity 1..4, n_per_class_severity rows; the
/// normal class gets 4 * n_per_class_severity rows. Row k of each group uses operating
/// point k mod 27.
inline Dataset gen_synthetic_chiller(std::size_t n_per_class_severity, std::uint64_t seed,
                                     const SyntheticChillerOptions& opt = {})
{
    constexpr std::size_t F = 61;
    constexpr std::size_t kControls = 3;
    constexpr std::uint64_t kConstantsSeed = 1043;
    if (n_per_class_severity == 0) {
        throw InputError("synthetic chiller: n_per_class_severity must be >= 1");
    }

    // Fixed model constants.
    Rng cr(kConstantsSeed);
    std::array<double, F> offset{}, scale{};
    std::array<std::array<double, kControls>, F> linear{};
    std::array<std::array<double, kControls>, F> pairwise{};
    for (std::size_t j = 0; j < F; ++j) {
        offset[j] = cr.uniform(-1.0, 1.0);
        scale[j] = std::pow(10.0, cr.uniform(-1.0, 2.0));
        for (std::size_t k = 0; k < kControls; ++k) {
            linear[j][k] = cr.normal();
        }
        for (std::size_t k = 0; k < kControls; ++k) {
            pairwise[j][k] = 0.5 * cr.normal();
        }
    }
    // signature[f][j] and its operating-point dependence coupling[f][j][k]
    std::array<std::array<double, F>, kChillerClasses> signature{};
    std::array<std::array<std::array<double, kControls>, F>, kChillerClasses> coupling{};
    for (std::size_t f = 1; f < kChillerClasses; ++f) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < F; ++j) {
            signature[f][j] = cr.normal();
            norm2 += signature[f][j] * signature[f][j];
        }
        const double rescale = std::sqrt(static_cast<double>(F) / norm2);
        for (std::size_t j = 0; j < F; ++j) {
            signature[f][j] *= rescale;
            for (std::size_t k = 0; k < kControls; ++k) {
                coupling[f][j][k] = cr.normal();
            }
        }
    }

    Rng rng(seed);
    Dataset ds;
    const std::size_t n_normal = kMaxSeverity * n_per_class_severity;
    const std::size_t total = n_normal + (kChillerClasses - 1) * kMaxSeverity * n_per_class_severity;
    ds.features = Batch(total, F);
    for (std::size_t j = 0; j < F; ++j) {
        ds.feature_names.push_back("f" + std::to_string(j));
    }

    std::size_t row = 0;
    auto emit = [&](int label, int severity, std::size_t k) {
        const std::size_t op = k % 27;
        std::array<double, kControls> u{};
        u[0] = static_cast<double>(op % 3) - 1.0;
        u[1] = static_cast<double>((op / 3) % 3) - 1.0;
        u[2] = static_cast<double>(op / 9) - 1.0;
        for (auto& x : u) {
            x += opt.condition_jitter * rng.normal();
        }
        const std::array<double, kControls> uu = {u[0] * u[1], u[1] * u[2], u[0] * u[2]};
        const double s = severity == kNoSeverity ? 0.0 : static_cast<double>(severity) / kMaxSeverity;
        for (std::size_t j = 0; j < F; ++j) {
            double v = offset[j];
            for (std::size_t c = 0; c < kControls; ++c) {
                v += linear[j][c] * u[c] + pairwise[j][c] * uu[c];
            }
            if (label > 0) {
                const auto f = static_cast<std::size_t>(label);
                double sig = signature[f][j];
                for (std::size_t c = 0; c < kControls; ++c) {
                    sig += opt.condition_coupling * coupling[f][j][c] * u[c];
                }
                v += opt.fault_magnitude * s * sig;
            }
            v += opt.noise * rng.normal();
            ds.features(row, j) = scale[j] * v;
        }
        ds.labels.push_back(label);
        ds.severity.push_back(severity);
        ++row;
    };

    for (std::size_t k = 0; k < n_normal; ++k) {
        emit(0, kNoSeverity, k);
    }
    for (int f = 1; f < kChillerClasses; ++f) {
        for (int s = 1; s <= kMaxSeverity; ++s) {
            for (std::size_t k = 0; k < n_per_class_severity; ++k) {
                emit(f, s, k);
            }
        }
    }
    return ds;
}

} // namespace fdd
