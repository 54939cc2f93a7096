#include "labcvar/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "labcvar/errors.hpp"

namespace labcvar {

namespace {

std::vector<std::size_t> histogram(const std::vector<int>& labels, std::size_t num_classes) {
    std::vector<std::size_t> h(num_classes, 0);
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw std::invalid_argument("label out of range");
        ++h[y];
    }
    return h;
}

LabeledDataset take_rows(const LabeledDataset& src, const std::vector<std::size_t>& rows,
                         std::string name) {
    LabeledDataset out;
    out.features = Matrix(rows.size(), src.dim());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto from = src.features.row(rows[i]);
        auto to = out.features.row(i);
        std::copy(from.begin(), from.end(), to.begin());
        out.labels[i] = src.labels[rows[i]];
    }
    out.class_counts = histogram(out.labels, src.num_classes());
    out.name = std::move(name);
    return out;
}

} // namespace

void LabeledDataset::validate() const {
    if (features.rows() != labels.size())
        throw std::invalid_argument("feature rows must match label count");
    if (class_counts.empty())
        throw std::invalid_argument("dataset must declare class counts");
    const std::vector<std::size_t> h = histogram(labels, class_counts.size());
    if (h != class_counts)
        throw std::invalid_argument("class counts disagree with label histogram");
    for (std::size_t j = 1; j < class_counts.size(); ++j)
        if (class_counts[j] < class_counts[j - 1])
            throw std::invalid_argument("classes must be ordered by nondecreasing count");
    if (!features.all_finite())
        throw std::invalid_argument("features must be finite");
}

ImbalanceProfile ImbalanceProfile::from_ratio(double ratio, std::size_t num_classes) {
    if (!(ratio >= 1.0) || !std::isfinite(ratio))
        throw std::invalid_argument("imbalance ratio must be >= 1");
    if (num_classes < 2)
        throw std::invalid_argument("imbalance profile needs at least two classes");
    ImbalanceProfile p;
    p.ratio = ratio;
    p.lambda = std::pow(ratio, -1.0 / static_cast<double>(num_classes - 1));
    return p;
}

LabeledDataset downsample_exponential(const LabeledDataset& balanced, double ratio, Rng& rng) {
    balanced.validate();
    const std::size_t L = balanced.num_classes();
    const ImbalanceProfile profile = ImbalanceProfile::from_ratio(ratio, L);
    const std::size_t n0 = balanced.class_counts[0];
    for (std::size_t c : balanced.class_counts)
        if (c != n0)
            throw std::invalid_argument("downsample_exponential expects a balanced input");

    std::vector<std::size_t> targets(L);
    for (std::size_t j = 0; j < L; ++j) {
        const double keep = std::pow(profile.lambda, static_cast<double>(L - 1 - j)) *
                            static_cast<double>(n0);
        targets[j] = static_cast<std::size_t>(std::llround(keep));
        if (targets[j] == 0)
            throw ConfigError("imbalance ratio too extreme: class " + std::to_string(j) +
                              " would be emptied");
    }

    // Uniform removal: shuffle each class's row indices, keep a prefix, then
    // restore the original sample order.
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < L; ++j) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < balanced.size(); ++i)
            if (balanced.labels[i] == static_cast<int>(j)) members.push_back(i);
        rng.shuffle(members);
        members.resize(targets[j]);
        kept.insert(kept.end(), members.begin(), members.end());
    }
    std::sort(kept.begin(), kept.end());

    std::ostringstream name;
    name << balanced.name << "-r" << ratio;
    LabeledDataset out = take_rows(balanced, kept, name.str());
    out.validate();
    return out;
}

std::pair<LabeledDataset, LabeledDataset> synth_gaussian_longtail(const SynthConfig& config,
                                                                  Rng& rng) {
    if (config.num_classes < 2)
        throw std::invalid_argument("need at least two classes");
    if (config.dim < 2)
        throw std::invalid_argument("need at least two feature dimensions");
    if (!(config.sigma > 0.0) || !(config.mean_radius > 0.0))
        throw std::invalid_argument("sigma and mean_radius must be positive");
    if (config.n_max == 0 || config.n_val_per_class == 0)
        throw std::invalid_argument("sample counts must be positive");

    const std::size_t L = config.num_classes;
    std::vector<std::vector<double>> means(L, std::vector<double>(config.dim, 0.0));
    for (std::size_t j = 0; j < L; ++j) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) /
                             static_cast<double>(L);
        means[j][0] = config.mean_radius * std::cos(angle);
        means[j][1] = config.mean_radius * std::sin(angle);
    }

    const auto sample_class = [&](LabeledDataset& ds, std::size_t row, std::size_t j) {
        auto r = ds.features.row(row);
        for (std::size_t d = 0; d < config.dim; ++d)
            r[d] = means[j][d] + config.sigma * rng.normal();
        ds.labels[row] = static_cast<int>(j);
    };

    LabeledDataset balanced;
    balanced.features = Matrix(L * config.n_max, config.dim);
    balanced.labels.resize(L * config.n_max);
    balanced.class_counts.assign(L, config.n_max);
    {
        std::ostringstream name;
        name << "synth-L" << L << "-d" << config.dim;
        balanced.name = name.str();
    }
    std::size_t row = 0;
    for (std::size_t j = 0; j < L; ++j)
        for (std::size_t i = 0; i < config.n_max; ++i) sample_class(balanced, row++, j);

    LabeledDataset train = config.ratio == 1.0
                               ? balanced
                               : downsample_exponential(balanced, config.ratio, rng);

    LabeledDataset val;
    val.features = Matrix(L * config.n_val_per_class, config.dim);
    val.labels.resize(L * config.n_val_per_class);
    val.class_counts.assign(L, config.n_val_per_class);
    val.name = balanced.name + "-val";
    row = 0;
    for (std::size_t j = 0; j < L; ++j)
        for (std::size_t i = 0; i < config.n_val_per_class; ++i) sample_class(val, row++, j);

    train.validate();
    val.validate();
    return {std::move(train), std::move(val)};
}

CsvLoadResult load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<long> raw_labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && has_header) continue;
        if (line.empty()) continue;

        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");

        if (cells.size() < 2)
            throw ParseError("expected at least one feature column and a label", line_no);
        if (width == 0)
            width = cells.size();
        else if (cells.size() != width)
            throw ParseError("row width differs from the first data row", line_no);

        std::vector<double> feats(width - 1);
        for (std::size_t c = 0; c + 1 < width; ++c) {
            const char* s = cells[c].c_str();
            char* end = nullptr;
            feats[c] = std::strtod(s, &end);
            if (end == s || *end != '\0' || !std::isfinite(feats[c]))
                throw ParseError("feature column " + std::to_string(c + 1) + " is not numeric",
                                 line_no);
        }
        const char* s = cells[width - 1].c_str();
        char* end = nullptr;
        const long label = std::strtol(s, &end, 10);
        if (end == s || *end != '\0')
            throw ParseError("label column is not an integer", line_no);
        rows.push_back(std::move(feats));
        raw_labels.push_back(label);
    }
    if (rows.empty())
        throw ParseError("no data rows", line_no == 0 ? 1 : line_no);

    // Re-index classes by ascending count, ties by ascending original label.
    std::map<long, std::size_t> counts;
    for (long l : raw_labels) ++counts[l];
    std::vector<std::pair<long, std::size_t>> ordered(counts.begin(), counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });

    CsvLoadResult result;
    for (std::size_t j = 0; j < ordered.size(); ++j)
        result.label_map[ordered[j].first] = static_cast<int>(j);

    LabeledDataset& ds = result.dataset;
    ds.features = Matrix(rows.size(), width - 1);
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto r = ds.features.row(i);
        std::copy(rows[i].begin(), rows[i].end(), r.begin());
        ds.labels[i] = result.label_map[raw_labels[i]];
    }
    ds.class_counts.assign(ordered.size(), 0);
    for (std::size_t j = 0; j < ordered.size(); ++j) ds.class_counts[j] = ordered[j].second;
    ds.name = path;
    ds.validate();
    return result;
}

std::pair<LabeledDataset, LabeledDataset> split_balanced_validation(const LabeledDataset& full,
                                                                    std::size_t n_val_per_class,
                                                                    Rng& rng) {
    full.validate();
    if (n_val_per_class == 0)
        throw std::invalid_argument("validation size must be positive");
    for (std::size_t j = 0; j < full.num_classes(); ++j)
        if (full.class_counts[j] <= n_val_per_class)
            throw ConfigError("class " + std::to_string(j) +
                              " has too few samples for the requested validation split");

    std::vector<std::size_t> val_rows;
    std::vector<std::size_t> train_rows;
    for (std::size_t j = 0; j < full.num_classes(); ++j) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < full.size(); ++i)
            if (full.labels[i] == static_cast<int>(j)) members.push_back(i);
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_val_per_class ? val_rows : train_rows).push_back(members[i]);
    }
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    LabeledDataset train = take_rows(full, train_rows, full.name + "-train");
    LabeledDataset val = take_rows(full, val_rows, full.name + "-val");
    train.validate();
    val.validate();
    return {std::move(train), std::move(val)};
}

} // namespace labcvar
