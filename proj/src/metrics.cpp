#include "labcvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace labcvar {

const char* group_name(Group g) {
    switch (g) {
    case Group::Many: return "many";
    case Group::Medium: return "medium";
    case Group::Few: return "few";
    }
    throw std::invalid_argument("unknown group");
}

std::vector<Group> group_partition(const std::vector<std::size_t>& train_counts) {
    if (train_counts.empty())
        throw std::invalid_argument("train counts must be non-empty");
    std::size_t n_max = 0;
    for (std::size_t c : train_counts) n_max = std::max(n_max, c);
    if (n_max == 0)
        throw std::invalid_argument("train counts must contain a positive entry");

    const double many_cut = 0.2 * static_cast<double>(n_max);
    const double few_cut = 0.04 * static_cast<double>(n_max);
    std::vector<Group> groups(train_counts.size());
    for (std::size_t j = 0; j < train_counts.size(); ++j) {
        const double c = static_cast<double>(train_counts[j]);
        if (c >= many_cut)
            groups[j] = Group::Many;
        else if (c >= few_cut)
            groups[j] = Group::Medium;
        else
            groups[j] = Group::Few;
    }
    return groups;
}

double worst_k(std::span<const double> per_class_error, int k) {
    if (per_class_error.empty())
        throw std::invalid_argument("per-class errors must be non-empty");
    if (k < 1 || static_cast<std::size_t>(k) > per_class_error.size())
        throw std::invalid_argument("worst_k: k out of range");
    std::vector<double> sorted(per_class_error.begin(), per_class_error.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += sorted[i];
    return s / static_cast<double>(k);
}

int argmax_index(std::span<const double> row) {
    if (row.empty())
        throw std::invalid_argument("argmax of empty row");
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return static_cast<int>(best);
}

EvalReport evaluate_predictions(std::span<const int> predicted, std::span<const int> actual,
                                std::size_t num_classes,
                                const std::vector<std::size_t>& train_counts, int k) {
    if (predicted.size() != actual.size() || actual.empty())
        throw std::invalid_argument("prediction and label vectors must match and be non-empty");
    if (train_counts.size() != num_classes)
        throw std::invalid_argument("train counts must cover every class");

    EvalReport report;
    report.n_eval.assign(num_classes, 0);
    std::vector<std::size_t> wrong(num_classes, 0);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const int y = actual[i];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
            throw std::invalid_argument("label out of range");
        ++report.n_eval[y];
        if (predicted[i] != y) ++wrong[y];
    }

    report.per_class_error.resize(num_classes);
    double sum = 0.0;
    double worst = 0.0;
    for (std::size_t j = 0; j < num_classes; ++j) {
        if (report.n_eval[j] == 0)
            throw std::invalid_argument("evaluation set is missing class " + std::to_string(j));
        report.per_class_error[j] =
            static_cast<double>(wrong[j]) / static_cast<double>(report.n_eval[j]);
        sum += report.per_class_error[j];
        worst = std::max(worst, report.per_class_error[j]);
    }
    report.ber = sum / static_cast<double>(num_classes);
    report.wer = worst;
    report.worst_k_k = k;
    report.worst_k_value = worst_k(report.per_class_error, k);

    const std::vector<Group> groups = group_partition(train_counts);
    for (int g = 0; g < 3; ++g) {
        double gsum = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < num_classes; ++j)
            if (static_cast<int>(groups[j]) == g) {
                gsum += report.per_class_error[j];
                ++count;
            }
        if (count == 0) continue;
        GroupStats stats;
        stats.classes = count;
        stats.mean = gsum / static_cast<double>(count);
        double var = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j)
            if (static_cast<int>(groups[j]) == g) {
                const double d = report.per_class_error[j] - stats.mean;
                var += d * d;
            }
        stats.stddev = std::sqrt(var / static_cast<double>(count));
        report.groups[g] = stats;
    }
    return report;
}

} // namespace labcvar
