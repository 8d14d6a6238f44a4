#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fdd/data.hpp"
#include "fdd/error.hpp"
#include "fdd/nn.hpp"
#include "fdd/preprocess.hpp"
#include "fdd/semigan.hpp"

namespace fdd {

/// Everything needed to classify raw rows: which input columns to keep (by name), the
/// standardizer fitted on the training rows, and the classifier network.
struct Classifier {
    std::vector<std::string> feature_names;
    FeatureStats stats;
    DenseNet net;

    /// Picks the model's features out of `raw` by name, in the model's order.
    Batch prepare(const Dataset& raw) const
    {
        std::vector<std::size_t> cols;
        for (const auto& name : feature_names) {
            const auto it = std::find(raw.feature_names.begin(), raw.feature_names.end(), name);
            if (it == raw.feature_names.end()) {
                throw InputError("classify: input lacks feature column '" + name + "'");
            }
            cols.push_back(static_cast<std::size_t>(it - raw.feature_names.begin()));
        }
        return apply_standardizer(stats, raw.select_features(cols).features);
    }

    std::vector<int> predict(const Dataset& raw) { return classify(net, prepare(raw)); }
};

inline void save_classifier(std::ostream& os, const Classifier& c)
{
    os << "fdd-classifier 1\nfeatures " << c.feature_names.size() << '\n';
    for (const auto& n : c.feature_names) {
        os << n << '\n';
    }
    save_stats(os, c.stats);
    c.net.save(os);
}

inline Classifier load_classifier(std::istream& is)
{
    std::string tag;
    int version = 0;
    std::size_t n = 0;
    if (!(is >> tag >> version) || tag != "fdd-classifier" || version != 1 || !(is >> tag >> n) ||
        tag != "features") {
        throw InputError("classifier: bad header");
    }
    Classifier c;
    std::string line;
    std::getline(is, line);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) {
            throw InputError("classifier: truncated feature list");
        }
        c.feature_names.push_back(line);
    }
    c.stats = load_stats(is);
    c.net = DenseNet::load(is);
    if (c.stats.width() != n || c.net.input_width() != n) {
        throw InputError("classifier: feature count disagrees between sections");
    }
    return c;
}

inline void save_classifier(const std::string& path, const Classifier& c)
{
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write '" + path + "'");
    }
    save_classifier(os, c);
}

inline Classifier load_classifier(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open '" + path + "'");
    }
    return load_classifier(is);
}

} // namespace fdd
