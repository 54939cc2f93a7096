#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labcvar/data.hpp"
#include "labcvar/losses.hpp"
#include "labcvar/metrics.hpp"
#include "labcvar/numerics.hpp"
#include "labcvar/rng.hpp"

namespace labcvar {

/**
 * Multilayer perceptron with ReLU hidden activations and an identity output
 * layer; no hidden layers gives a plain linear classifier. Forward and
 * backward passes are written out directly so every arithmetic step is
 * explicit and reproducible.
 */
struct MlpModel {
    struct Layer {
        Matrix w; // fan_in x fan_out
        std::vector<double> b;
    };

    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().w.rows(); }
    std::size_t output_dim() const { return layers.back().w.cols(); }

    /// Weights drawn from rng.normal() scaled by 1/sqrt(fan_in), biases
    /// zero. Consumption order is layer by layer, row-major.
    static MlpModel init(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t output_dim, Rng& rng);

    /// Batch logits for a feature matrix (one sample per row).
    Matrix forward(const Matrix& x) const;

    /// Activations entering each layer, kept for the backward pass;
    /// inputs[0] is the batch itself.
    struct ForwardTrace {
        std::vector<Matrix> inputs;
        Matrix logits;
    };

    Matrix forward_cached(const Matrix& x, ForwardTrace& trace) const;

    /// Parameter gradients of whatever scalar grad_logits differentiates.
    /// ReLU subgradient at 0 is taken as 0.
    std::vector<Layer> backward(const ForwardTrace& trace, const Matrix& grad_logits) const;

    /// Text checkpoint: header line, layer count, then per layer its shape,
    /// row-major weights and bias, all in round-trippable %.17g.
    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);
};

struct TrainConfig {
    int epochs = 40;
    std::size_t batch_size = 128;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    std::vector<int> lr_decay_epochs;    // at the start of each listed epoch...
    std::vector<double> lr_decay_factors; // ...multiply the rate by this factor
    int drw_epoch = -1; // default deferred re-weighting switch for LdamDrw
    std::uint64_t seed = 1; // batch shuffle stream

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double mean_train_loss = 0.0;
    double val_ber = 0.0;
    int infeasible_batches = 0; // cumulative
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochStats> trace;
    int infeasible_batches = 0;
};

/**
 * SGD with momentum and decoupled-from-loss weight decay (the decay term
 * lambda * theta is added to every parameter gradient before the momentum
 * update). Deterministic given the model initialization and config.seed:
 * batches are drawn by a seeded shuffle each epoch, the last short batch is
 * kept. CVaR bounds are resolved once from the training counts up front, so
 * an infeasible configuration fails before any training step.
 */
TrainResult train(MlpModel model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const LossSpec& loss, const TrainConfig& config);

/// Resolves the bounds a spec will train under (auto tau1 included) for the
/// given class counts. Only meaningful for the LabCvar kinds.
ClassBounds resolve_bounds(const LossSpec& spec, const std::vector<std::size_t>& counts);

/// Forward + argmax (ties to the lowest class) + per-class error summary.
EvalReport evaluate_model(const MlpModel& model, const LabeledDataset& eval_set,
                          const std::vector<std::size_t>& train_counts, int worst_k_k);

/**
 * Norm of the loss gradient with respect to the output-layer column of
 * class t (t != label) for a single sample under the logit-adjusted
 * weighted CE, computed from the closed form on the model's own features:
 * pi_y * w * softmax(f + log pi)_t * ||phi(x)||, where phi(x) is the input
 * to the output layer. Equals the realized backward-pass gradient norm.
 */
double classifier_gradient_norm(const MlpModel& model, std::span<const double> x, int label,
                                const LogitAdjustment& adjustment, double weight, int t);

} // namespace labcvar
