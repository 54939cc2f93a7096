#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "labcvar/numerics.hpp"
#include "labcvar/rng.hpp"

namespace labcvar {

/**
 * A labeled dataset. Classes are contiguous 0-based indices ordered by
 * training frequency: class_counts is nondecreasing, so class 0 is the
 * rarest. Sample order within the matrix is arbitrary but fixed.
 */
struct LabeledDataset {
    Matrix features; // one row per sample
    std::vector<int> labels;
    std::vector<std::size_t> class_counts;
    std::string name;

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return class_counts.size(); }
    std::size_t dim() const { return features.cols(); }

    /// Checks counts against the label histogram and the ordering
    /// convention; throws std::invalid_argument on violation.
    void validate() const;
};

/// Exponential decay profile for a target imbalance: class j of L keeps
/// lambda^(L-1-j) of its samples with lambda = ratio^(-1/(L-1)).
struct ImbalanceProfile {
    double ratio = 1.0;
    double lambda = 1.0;

    static ImbalanceProfile from_ratio(double ratio, std::size_t num_classes);
};

/**
 * Downsamples a balanced dataset to the exponential profile: class j keeps
 * round(lambda^(L-1-j) * n0) samples chosen uniformly via rng, class L-1
 * keeps all n0. Kept samples stay in their original order. Errors when the
 * input is not balanced or when rounding would empty a class.
 */
LabeledDataset downsample_exponential(const LabeledDataset& balanced, double ratio, Rng& rng);

struct SynthConfig {
    std::size_t num_classes = 10;
    std::size_t dim = 16;
    double mean_radius = 6.0; // class means sit on a circle of this radius
    double sigma = 1.0;       // isotropic noise per dimension
    double ratio = 100.0;
    std::size_t n_max = 1200;        // largest class size before decay
    std::size_t n_val_per_class = 100;
};

/**
 * Synthetic Gaussian long-tail task: class means are placed deterministically
 * on a circle in the first two feature dimensions (evenly spaced angles,
 * remaining dimensions zero), samples are drawn with isotropic noise from
 * rng, and the training split is downsampled to the exponential profile.
 * The validation split stays balanced at n_val_per_class. Class 0 ends up
 * rarest, matching the dataset ordering convention.
 */
std::pair<LabeledDataset, LabeledDataset> synth_gaussian_longtail(const SynthConfig& config,
                                                                  Rng& rng);

struct CsvLoadResult {
    LabeledDataset dataset;
    std::map<long, int> label_map; // original label -> contiguous index
};

/**
 * Loads a CSV of `d` numeric feature columns followed by one integer label
 * column. Original labels may be any integers; classes are re-indexed by
 * ascending count (ties by ascending original label) to meet the dataset
 * convention. Malformed input raises ParseError with a 1-based line number.
 */
CsvLoadResult load_csv(const std::string& path, bool has_header);

/**
 * Splits off a balanced validation set: n_val_per_class samples of every
 * class, chosen uniformly via rng; the remainder (re-validated against the
 * ordering convention) becomes the training split.
 */
std::pair<LabeledDataset, LabeledDataset> split_balanced_validation(const LabeledDataset& full,
                                                                    std::size_t n_val_per_class,
                                                                    Rng& rng);

} // namespace labcvar
