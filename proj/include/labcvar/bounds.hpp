#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace labcvar {

/**
 * Shape parameters for the per-class weight bounds.
 *
 * A class with n_j training samples receives
 *
 *     alpha_j = tau1 * n_j^k / sum_m n_m^(1/2 - k)
 *     beta_j  = (tau1 / eta) * n_j^k / sum_m n_m^(1/2 - k)
 *
 * and each of its samples may carry a weight in [1/(beta_j n), 1/(alpha_j n)].
 * For k > 0 the per-sample weight cap shrinks as n_j grows, so rare classes
 * are allowed proportionally heavier weights. This family minimizes the
 * estimation-gap objective sum_j sqrt(n_j)/alpha_j subject to a fixed budget
 * sum_j n_j^(1/2 - 2k) * alpha_j, which is what makes it preferable to an
 * arbitrary monotone schedule.
 *
 * eta = alpha_j / beta_j in (0, 1) fixes the box width: lower bounds are
 * exactly eta times the upper bounds.
 *
 * tau1 sets the overall weight scale. tau1 <= 0 (the default `auto`) resolves
 * it to the geometric midpoint of feasible_tau_range for the dataset at hand.
 */
struct BoundParams {
    double k = 0.5;
    double tau1 = 0.0; // <= 0 means auto-calibrate from feasible_tau_range
    double eta = 0.5;

    bool tau1_auto() const { return tau1 <= 0.0; }

    /// Raw numerator exponent: alpha_j is proportional to n_j^(1/4 - k1/2),
    /// so k1 = 1/2 - 2k. The budget-weight exponent equals k1 as well.
    double k1() const { return 0.5 - 2.0 * k; }

    /// Throws std::invalid_argument unless k > 0, eta in (0,1) and tau1 is
    /// positive or auto.
    void validate() const;
};

/// Feasible interval for tau1: values where the per-sample boxes can contain
/// a probability vector over the full dataset. `empty` is set instead of
/// throwing when an extreme exponent pushes the interval out of range.
struct TauRange {
    double lo = 0.0;
    double hi = 0.0;
    bool empty = true;

    bool contains(double t, double tol = 1e-12) const {
        return !empty && t >= lo - tol && t <= hi + tol;
    }
};

/**
 * Per-class weight bounds, fully evaluated for one training set.
 * Invariants checked at construction:
 *   - alpha_j <= beta_j (strict when built through optimal_bounds),
 *   - sum_j n_j * lower_weight_j <= 1 <= sum_j n_j * upper_weight_j
 *     within 1e-9, i.e. the full-dataset box admits a probability vector.
 */
struct ClassBounds {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> lower_weight; // 1 / (beta_j * n)
    std::vector<double> upper_weight; // 1 / (alpha_j * n)
    std::vector<std::size_t> counts;  // per-class sample counts, n_j
    std::size_t n = 0;                // total sample count

    std::size_t num_classes() const { return counts.size(); }

    /// Builds bounds from explicit alpha/beta vectors. alpha_j == beta_j is
    /// accepted here (degenerate boxes pin every weight), which tests use to
    /// realize plain re-weighting schemes as a special case.
    static ClassBounds from_alpha_beta(std::vector<double> alpha, std::vector<double> beta,
                                       std::vector<std::size_t> counts);
};

/**
 * Evaluates the optimal bound family above for the given class counts.
 * Counts must be positive; class order does not matter.
 *
 * Throws ConfigError (with the feasible tau1 interval attached) when the
 * requested tau1 makes the full-dataset box infeasible.
 */
ClassBounds optimal_bounds(const std::vector<std::size_t>& counts, const BoundParams& params);

/**
 * Interval of tau1 values for which optimal_bounds is feasible:
 * [eta * T, T] with T = (sum_m n_m^(1/2-k)) * (sum_j n_j^(1-k)) / n.
 * Both endpoints themselves satisfy the feasibility predicate (one side
 * becomes an equality there).
 */
TauRange feasible_tau_range(const std::vector<std::size_t>& counts, double k, double eta);

/// Estimation-gap objective sum_j sqrt(n_j) / v_j, for v = alpha or beta.
/// All v_j must be positive.
double bound_objective(std::span<const double> v, const std::vector<std::size_t>& counts);

} // namespace labcvar
