#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labcvar/data.hpp"
#include "labcvar/losses.hpp"
#include "labcvar/metrics.hpp"
#include "labcvar/model.hpp"

namespace labcvar {

struct DatasetSpec {
    enum class Type { Synthetic, Csv };
    Type type = Type::Synthetic;

    SynthConfig synth;

    std::string csv_path;
    bool csv_has_header = false;
    std::string csv_val_path;          // optional explicit validation file
    std::size_t csv_val_per_class = 0; // otherwise: balanced split of this size
    double csv_ratio = 1.0;            // > 1 downsamples a balanced training split
};

struct ModelSpec {
    std::vector<std::size_t> hidden; // empty = linear classifier
};

struct NamedLoss {
    std::string name; // defaults to the LossSpec's canonical display name
    LossSpec spec;
};

/**
 * Full experiment description: dataset x model x losses x seeds. Parsed
 * from a JSON config file; every field that affects results lives here so
 * a config hash identifies the run.
 */
struct ExperimentConfig {
    DatasetSpec dataset;
    ModelSpec model;
    TrainConfig train;
    std::vector<NamedLoss> losses;
    std::vector<std::uint64_t> seeds;
    std::string output_dir; // empty: compute only, write nothing
    int worst_k_k = 0;      // 0 resolves to min(20, classes)

    /// Per-kind hyperparameter grids for run_grid, overriding the built-in
    /// search spaces.
    std::map<std::string, std::vector<LossSpec>> grid_overrides;

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);

    /// Canonical serialized form (sorted keys) and its FNV-1a 64 hash.
    std::string canonical_json() const;
    std::string config_hash() const;

    void validate() const;
};

struct RunRow {
    std::string loss;
    std::uint64_t seed = 0;
    double ratio = 1.0;
    EvalReport report;
    double final_train_loss = 0.0;
    int infeasible_batches = 0;
};

struct AggregateRow {
    std::string loss;
    double ratio = 1.0;
    std::size_t runs = 0;
    double ber_mean = 0.0, ber_std = 0.0;
    double wer_mean = 0.0, wer_std = 0.0;
    double worst_k_mean = 0.0, worst_k_std = 0.0;
    std::array<std::optional<double>, 3> group_mean; // by Group index
};

/// Resolved bound parameters echoed into the summary for transparency.
struct BoundNote {
    std::string loss;
    double tau1 = 0.0;
    double feasible_lo = 0.0;
    double feasible_hi = 0.0;
};

struct ExperimentResult {
    std::string config_hash;
    std::vector<RunRow> rows;
    std::vector<AggregateRow> aggregates;
    std::vector<BoundNote> bound_notes;
};

/**
 * Trains every (loss, seed) pair and aggregates per loss. Deterministic:
 * datasets, initialization and shuffling derive from each seed through
 * fixed sub-streams, rows are emitted loss-major in config order, and two
 * invocations with the same config produce byte-identical files.
 *
 * Bound feasibility for every CVaR loss is checked against the training
 * counts before any training starts; an infeasible config raises
 * ConfigError with the feasible tau1 interval.
 *
 * Writes results.csv and summary.json under output_dir unless it is empty.
 */
ExperimentResult run_experiment(const ExperimentConfig& config);

/// run_experiment once per imbalance ratio (synthetic datasets only),
/// collecting all rows into one long table.
ExperimentResult run_sweep(const ExperimentConfig& config, const std::vector<double>& ratios);

struct GridEntry {
    std::string loss_kind;
    std::string candidate; // canonical display name of the candidate spec
    std::string status;    // "ok" or "infeasible"
    std::size_t runs = 0;
    double ber_mean = 0.0;
    double ber_std = 0.0;
    bool best = false;
};

struct GridResult {
    std::string config_hash;
    std::vector<GridEntry> entries;
};

/**
 * Exhaustive hyperparameter search per configured loss kind, over
 * grid_overrides when given and the built-in default search spaces
 * otherwise. Best candidate per kind = lowest mean validation BER, ties to
 * the earlier grid position. Infeasible candidates are recorded and
 * skipped, not fatal. Writes grid.csv and grid_summary.json.
 */
GridResult run_grid(const ExperimentConfig& config);

/// Built-in search space for one loss kind (LdamDrw switch epochs resolve
/// against `epochs`). Kinds without hyperparameters return the single given
/// spec.
std::vector<LossSpec> default_grid_space(const LossSpec& base, int epochs);

} // namespace labcvar
