#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fdd/data.hpp"
#include "fdd/error.hpp"

namespace fdd {

/// Per-feature statistics of a training partition.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> std; // population standard deviation
    std::vector<double> min;
    std::vector<double> max;
    std::vector<double> rate_mean; // of |x(t+1) - x(t)| over consecutive rows
    std::vector<double> rate_std;

    std::size_t width() const noexcept { return min.size(); }
};

struct OutlierResult {
    Dataset data;
    std::vector<std::size_t> removed; // row indices into the input
};

struct ConstantDropResult {
    Dataset data;
    std::vector<std::size_t> dropped; // feature indices into the input
};

namespace detail {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs)
{
    MeanStd out;
    if (xs.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    out.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - out.mean) * (x - out.mean);
    }
    out.std = std::sqrt(ss / static_cast<double>(xs.size()));
    return out;
}

inline std::vector<double> column(const Batch& b, std::size_t c)
{
    std::vector<double> out(b.rows());
    for (std::size_t r = 0; r < b.rows(); ++r) {
        out[r] = b(r, c);
    }
    return out;
}

inline std::vector<double> abs_rates(const std::vector<double>& xs)
{
    std::vector<double> out;
    for (std::size_t t = 0; t + 1 < xs.size(); ++t) {
        out.push_back(std::abs(xs[t + 1] - xs[t]));
    }
    return out;
}

inline Dataset keep_rows(const Dataset& data, const std::vector<bool>& drop)
{
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < drop.size(); ++r) {
        if (!drop[r]) {
            keep.push_back(r);
        }
    }
    return data.select_rows(keep);
}

} // namespace detail

/// Removes every row with some feature farther than seven standard deviations from that
/// feature's mean. Features with zero spread never trigger removal.
inline OutlierResult remove_value_outliers(const Dataset& data)
{
    if (data.rows() < 2) {
        throw InputError("value outliers: need at least 2 rows");
    }
    std::vector<bool> drop(data.rows(), false);
    for (std::size_t c = 0; c < data.width(); ++c) {
        const auto col = detail::column(data.features, c);
        const auto ms = detail::mean_std(col);
        if (ms.std == 0.0) {
            continue;
        }
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (std::abs(col[r] - ms.mean) > 7.0 * ms.std) {
                drop[r] = true;
            }
        }
    }
    OutlierResult out;
    for (std::size_t r = 0; r < drop.size(); ++r) {
        if (drop[r]) {
            out.removed.push_back(r);
        }
    }
    out.data = detail::keep_rows(data, drop);
    return out;
}

/// Removes isolated spikes in a time-ordered series.
///
/// With rate(t) = |x(t+1) - x(t)| per feature, a row t is removed when, for some feature,
/// both the rate into it, rate(t-1), and the rate out of it, rate(t), exceed
/// mean + 7 std of that feature's rates. A level shift produces one large rate and is kept.
/// The first and last rows lack one of the two rates and are never removed.
inline OutlierResult remove_rate_outliers(const Dataset& data)
{
    if (data.rows() < 3) {
        throw InputError("rate outliers: need at least 3 time-ordered rows");
    }
    std::vector<bool> drop(data.rows(), false);
    for (std::size_t c = 0; c < data.width(); ++c) {
        const auto rates = detail::abs_rates(detail::column(data.features, c));
        const auto ms = detail::mean_std(rates);
        const double limit = ms.mean + 7.0 * ms.std;
        for (std::size_t t = 1; t + 1 < data.rows(); ++t) {
            if (rates[t - 1] > limit && rates[t] > limit) {
                drop[t] = true;
            }
        }
    }
    OutlierResult out;
    for (std::size_t r = 0; r < drop.size(); ++r) {
        if (drop[r]) {
            out.removed.push_back(r);
        }
    }
    out.data = detail::keep_rows(data, drop);
    return out;
}

/// Drops features whose values are all identical.
inline ConstantDropResult drop_constant_features(const Dataset& data)
{
    if (data.rows() == 0) {
        throw InputError("constant features: empty dataset");
    }
    ConstantDropResult out;
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < data.width(); ++c) {
        const double first = data.features(0, c);
        bool constant = true;
        for (std::size_t r = 1; r < data.rows() && constant; ++r) {
            constant = data.features(r, c) == first;
        }
        (constant ? out.dropped : keep).push_back(c);
    }
    out.data = data.select_features(keep);
    return out;
}

inline FeatureStats fit_standardizer(const Batch& train)
{
    if (train.rows() == 0) {
        throw InputError("standardizer: empty training partition");
    }
    FeatureStats s;
    for (std::size_t c = 0; c < train.cols(); ++c) {
        const auto col = detail::column(train, c);
        const auto ms = detail::mean_std(col);
        const auto rs = detail::mean_std(detail::abs_rates(col));
        s.mean.push_back(ms.mean);
        s.std.push_back(ms.std);
        s.min.push_back(*std::min_element(col.begin(), col.end()));
        s.max.push_back(*std::max_element(col.begin(), col.end()));
        s.rate_mean.push_back(rs.mean);
        s.rate_std.push_back(rs.std);
    }
    return s;
}

inline FeatureStats fit_standardizer(const Dataset& train) { return fit_standardizer(train.features); }

/// Maps each feature affinely so the training min/max land on -1/+1. Constant features map to 0.
/// Values outside the training range pass through the same affine map.
inline Batch apply_standardizer(const FeatureStats& stats, const Batch& x)
{
    if (x.cols() != stats.width()) {
        throw DimensionError("standardizer fitted on " + std::to_string(stats.width()) + " features, got " +
                             std::to_string(x.cols()));
    }
    Batch out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double span = stats.max[c] - stats.min[c];
            out(r, c) = span == 0.0 ? 0.0 : 2.0 * (x(r, c) - stats.min[c]) / span - 1.0;
        }
    }
    return out;
}

inline Dataset apply_standardizer(const FeatureStats& stats, const Dataset& data)
{
    Dataset out = data;
    out.features = apply_standardizer(stats, data.features);
    return out;
}

inline void save_stats(std::ostream& os, const FeatureStats& s)
{
    os << "fdd-stats 1\nfeatures " << s.width() << '\n';
    for (std::size_t c = 0; c < s.width(); ++c) {
        os << detail::format_double(s.min[c]) << ' ' << detail::format_double(s.max[c]) << ' '
           << detail::format_double(s.mean[c]) << ' ' << detail::format_double(s.std[c]) << ' '
           << detail::format_double(s.rate_mean[c]) << ' ' << detail::format_double(s.rate_std[c]) << '\n';
    }
}

inline FeatureStats load_stats(std::istream& is)
{
    std::string tag;
    int version = 0;
    std::size_t n = 0;
    if (!(is >> tag >> version) || tag != "fdd-stats" || version != 1 || !(is >> tag >> n) || tag != "features") {
        throw InputError("stats: bad header");
    }
    FeatureStats s;
    for (std::size_t c = 0; c < n; ++c) {
        std::string v[6];
        if (!(is >> v[0] >> v[1] >> v[2] >> v[3] >> v[4] >> v[5])) {
            throw InputError("stats: truncated at feature " + std::to_string(c));
        }
        s.min.push_back(std::stod(v[0]));
        s.max.push_back(std::stod(v[1]));
        s.mean.push_back(std::stod(v[2]));
        s.std.push_back(std::stod(v[3]));
        s.rate_mean.push_back(std::stod(v[4]));
        s.rate_std.push_back(std::stod(v[5]));
    }
    return s;
}

/// Row/feature filtering applied to a raw source before any split.
struct PreprocessReport {
    std::size_t rows_in = 0;
    std::vector<std::size_t> value_outliers; // indices into the raw source
    std::vector<std::size_t> rate_outliers;  // indices into the raw source
    std::vector<std::size_t> dropped_features;
    std::vector<std::string> steps; // provenance, in execution order
};

struct PreprocessResult {
    Dataset data;
    PreprocessReport report;
};

/// Value outliers, then rate outliers, then constant-feature drop. Standardization is
/// fitted later, on the training partition only.
inline PreprocessResult filter_source(const Dataset& raw)
{
    PreprocessResult out;
    out.report.rows_in = raw.rows();

    auto v = remove_value_outliers(raw);
    out.report.value_outliers = v.removed;
    out.report.steps.emplace_back("value_outliers");

    std::vector<std::size_t> surviving;
    for (std::size_t r = 0, k = 0; r < raw.rows(); ++r) {
        if (k < v.removed.size() && v.removed[k] == r) {
            ++k;
        } else {
            surviving.push_back(r);
        }
    }
    auto rr = remove_rate_outliers(v.data);
    for (auto i : rr.removed) {
        out.report.rate_outliers.push_back(surviving[i]);
    }
    out.report.steps.emplace_back("rate_outliers");

    auto c = drop_constant_features(rr.data);
    out.report.dropped_features = c.dropped;
    out.report.steps.emplace_back("drop_constant_features");
    out.data = std::move(c.data);
    return out;
}

inline void write_report(std::ostream& os, const PreprocessReport& r)
{
    os << "rows_in " << r.rows_in << '\n';
    os << "value_outliers_removed " << r.value_outliers.size() << '\n';
    os << "rate_outliers_removed " << r.rate_outliers.size() << '\n';
    os << "dropped_features";
    for (auto f : r.dropped_features) {
        os << ' ' << f;
    }
    os << '\n';
    os << "steps";
    for (const auto& s : r.steps) {
        os << ' ' << s;
    }
    os << '\n';
}

} // namespace fdd
