#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace labcvar {

/// Frequency group of a class relative to the largest training class:
/// Many has n_j >= 0.2 * n_max, Few has n_j < 0.04 * n_max, Medium the rest.
enum class Group { Many = 0, Medium = 1, Few = 2 };

const char* group_name(Group g);

struct GroupStats {
    double mean = 0.0;
    double stddev = 0.0; // population deviation over the member classes
    std::size_t classes = 0;
};

struct EvalReport {
    std::vector<double> per_class_error;
    std::vector<std::size_t> n_eval; // evaluation samples per class
    double ber = 0.0;                // mean of per-class errors
    double wer = 0.0;                // max per-class error
    int worst_k_k = 1;
    double worst_k_value = 0.0;      // mean of the k largest per-class errors
    std::array<std::optional<GroupStats>, 3> groups; // indexed by Group
};

/// Assigns each class to a frequency group based on training counts.
std::vector<Group> group_partition(const std::vector<std::size_t>& train_counts);

/// Mean of the k largest entries; k in [1, size].
double worst_k(std::span<const double> per_class_error, int k);

/// Index of the row maximum; ties resolve to the lowest index so that
/// evaluation never depends on memory layout or compiler.
int argmax_index(std::span<const double> row);

/**
 * Per-class error rates and their summaries for a set of predictions.
 * Every class in [0, L) must appear at least once in `actual`; the group
 * split comes from the training counts, not the evaluation counts.
 */
EvalReport evaluate_predictions(std::span<const int> predicted, std::span<const int> actual,
                                std::size_t num_classes,
                                const std::vector<std::size_t>& train_counts, int k);

} // namespace labcvar
