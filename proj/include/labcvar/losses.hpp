#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labcvar/bounds.hpp"
#include "labcvar/numerics.hpp"

namespace labcvar {

enum class LossKind {
    Erm,          // mean softmax cross entropy
    VanillaRw,    // CE weighted by 1/n_j, weights rescaled per minibatch
    CbRw,         // CE weighted by (1-gamma)/(1-gamma^n_j), rescaled per minibatch
    Focal,        // (1 - p)^gamma * (-log p), full derivative
    Ldam,         // margin C / n_j^(1/4) subtracted from the true-class logit
    LdamDrw,      // Ldam, switching to class-weighted Ldam at drw_epoch
    La,           // CE on logits shifted by tau * log n_j
    AlphaCvar,    // worst-case weights, uniform box [0, 1/(alpha*B)]
    LabCvar,      // worst-case weights under per-class boxes
    LabCvarLogit, // LabCvar weights combined with bound-derived logit offsets
};

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

/**
 * One loss configuration. Only the fields relevant to `kind` are read:
 *   gamma        - CbRw (0 < gamma < 1) and Focal (gamma > 0)
 *   margin_scale - Ldam / LdamDrw (C > 0)
 *   tau          - La (tau > 0)
 *   alpha        - AlphaCvar (0 < alpha <= 1)
 *   bound_params - LabCvar / LabCvarLogit
 *   drw_epoch    - LdamDrw switch epoch (>= 0); -1 defers to TrainConfig
 */
struct LossSpec {
    LossKind kind = LossKind::Erm;
    double gamma = 0.0;
    double margin_scale = 0.0;
    double tau = 1.0;
    double alpha = 0.5;
    BoundParams bound_params;
    int drw_epoch = -1;

    bool needs_bounds() const {
        return kind == LossKind::LabCvar || kind == LossKind::LabCvarLogit;
    }

    void validate() const;

    /// Canonical display name including the hyperparameters that matter,
    /// e.g. "lab_cvar(k=0.5,tau1=auto,eta=0.5)". Used for result rows.
    std::string display_name() const;
};

/**
 * Batch loss evaluation. `total` is the quantity training descends on and
 * `grad_logits` is exactly d(total)/d(logits). `per_sample` holds each
 * sample's own loss value; for the worst-case-weighted kinds the total is
 * the weighted sum of per_sample under `weights_used`, for every other kind
 * it is their mean.
 */
struct LossOutput {
    std::vector<double> per_sample;
    double total = 0.0;
    Matrix grad_logits;
    std::optional<std::vector<double>> weights_used;
};

/// Per-class multiplicative priors pi_j applied inside the logit-adjusted
/// loss. Bound-derived adjustments use pi_j = n * alpha_j.
struct LogitAdjustment {
    std::vector<double> pi;
    std::vector<double> log_pi;

    explicit LogitAdjustment(std::vector<double> pi_in);
    static LogitAdjustment from_bounds(const ClassBounds& bounds);
    static LogitAdjustment ones(std::size_t L);
};

/// Mean softmax cross entropy: per_sample_i = log sum_j exp(f_ij) - f_iy.
/// Computed against the row maximum; labels must lie in [0, cols).
LossOutput softmax_ce(const Matrix& logits, std::span<const int> labels);

/// Raw per-class weights for the re-weighting schemes, before minibatch
/// rescaling. kind must be VanillaRw (gamma ignored) or CbRw.
std::vector<double> class_weights(LossKind kind, const std::vector<std::size_t>& counts,
                                  double gamma);

/// Rescales positive per-sample weights to mean exactly 1 over the batch.
std::vector<double> rescale_weights_minibatch(std::span<const double> raw);

/// Focal loss (1 - p)^gamma * (-log p) with p the true-class softmax
/// probability. The gradient carries the modulating factor's dependence on
/// the logits; it is not treated as a detached weight.
LossOutput focal_loss(const Matrix& logits, std::span<const int> labels, double gamma);

/// Margin loss: the true-class logit is shifted down by
/// margin_scale / n_y^(1/4) before the cross entropy.
LossOutput ldam_loss(const Matrix& logits, std::span<const int> labels, double margin_scale,
                     const std::vector<std::size_t>& counts);

/**
 * Weighted cross entropy with per-class logit offsets:
 *
 *   total = sum_i pi_{y_i} * w_i * [ lse(f_i + log pi) - f_{i,y_i} - log pi_{y_i} ]
 *
 * Weights are treated as constants (detached); the gradient flows through
 * the logits only. Note the total is a sum, not a mean: the caller's
 * weights carry the normalization.
 */
LossOutput logit_adjusted_weighted_ce(const Matrix& logits, std::span<const int> labels,
                                      std::span<const double> weights,
                                      const LogitAdjustment& adjustment);

/// Cross entropy on logits shifted by +tau * log n_j per class (mean form).
LossOutput la_loss(const Matrix& logits, std::span<const int> labels, double tau,
                   const std::vector<std::size_t>& counts);

/**
 * Worst-case weighted batch loss: per-sample softmax CE, weights from
 * solve_lab_cvar over the per-class box with denominator = batch size.
 * total = sum_i w_i * ce_i; the weights are detached in the gradient,
 * which is exact at any point where the maximizing weights are unique.
 */
LossOutput lab_cvar_loss(const Matrix& logits, std::span<const int> labels,
                         const ClassBounds& bounds);

/**
 * Two-step variant: weights w from solve_lab_cvar on the plain CE losses,
 * then the logit-adjusted weighted CE with pi_j = n * alpha_j. Reduces the
 * gradient imbalance between rare and frequent classes that pure
 * re-weighting exhibits, at the same optimizer as the weighted CE.
 */
LossOutput lab_cvar_logit_loss(const Matrix& logits, std::span<const int> labels,
                               const ClassBounds& bounds);

/// Uniform worst-case weights: box [0, 1/(alpha * B)]. alpha in (0, 1].
LossOutput alpha_cvar_loss(const Matrix& logits, std::span<const int> labels, double alpha);

/**
 * Closed-form norm of the loss gradient with respect to the classifier row
 * of a non-label class t under a linear head:
 *
 *   pi_{y} * w * softmax(f + log pi)_t * ||features||
 *
 * Matches the realized backward-pass gradient of logit_adjusted_weighted_ce
 * through a linear layer; see classifier_gradient_norm for the model-side
 * counterpart.
 */
double gradient_norm_probe(std::span<const double> logit_row, int label,
                           const LogitAdjustment& adjustment, double weight, int t,
                           double feature_norm);

/**
 * Context the dispatcher needs beyond the batch itself. `bounds` is required
 * for the LabCvar kinds. With `feasibility_fallback` set, a batch whose box
 * cannot hold a probability vector has the violated side rescaled
 * proportionally instead of raising, and `infeasible_counter` (if given) is
 * incremented; training uses this, direct evaluation should not.
 */
struct BatchLossContext {
    const std::vector<std::size_t>* class_counts = nullptr;
    const ClassBounds* bounds = nullptr;
    bool drw_active = false;
    bool feasibility_fallback = false;
    int* infeasible_counter = nullptr;
};

/**
 * Evaluates `spec` on one batch. This is the training entry point: totals
 * are kept at per-sample magnitude across kinds so a single learning rate
 * is meaningful (for LabCvarLogit the raw sum grows with the dataset size,
 * so it is scaled by 1/bounds.n here; a constant factor, so the minimizer
 * is untouched).
 */
LossOutput evaluate_loss(const LossSpec& spec, const Matrix& logits, std::span<const int> labels,
                         const BatchLossContext& ctx);

} // namespace labcvar
