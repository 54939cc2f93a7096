#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "labcvar/bounds.hpp"

namespace labcvar {

/**
 * Per-sample weight box. A weight vector w is admissible when
 *   sum_i w_i = 1  and  lower_i <= w_i <= upper_i.
 * lower_i == upper_i is allowed (the component is pinned); the box must
 * admit at least one probability vector: sum lower <= 1 <= sum upper,
 * checked with 1e-9 slack so boxes constructed to meet the constraint with
 * equality survive rounding.
 */
struct WeightBox {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return lower.size(); }

    /// Throws std::invalid_argument on malformed boxes and ConfigError when
    /// no probability vector fits.
    void validate() const;

    /**
     * Box for one batch of labeled samples: sample i of class y_i gets
     * [1/(beta_{y_i} * denom), 1/(alpha_{y_i} * denom)]. `denom` is the
     * number of samples the weights will be spread over; pass the batch size
     * for minibatch training or bounds.n for a full-dataset solve.
     */
    static WeightBox from_class_bounds(const ClassBounds& bounds, std::span<const int> labels,
                                       std::size_t denom);
};

struct WeightSolution {
    std::vector<double> weights;
    double objective = 0.0;
    /// Index strictly between its bounds, if any. Any optimal vertex of the
    /// box-constrained simplex has at most one such component.
    std::optional<std::size_t> fractional_index;
};

/**
 * Maximizes sum_i w_i * losses_i over the box-constrained probability
 * simplex. O(n log n): start every weight at its lower bound and hand the
 * remaining mass 1 - sum lower to samples in order of decreasing loss (ties
 * broken toward the lower sample index), capping each at its upper bound.
 * Exactly one weight can end up strictly inside its box.
 *
 * Losses must be finite; the box is validated. The returned weights sum to
 * 1 within 1e-10.
 */
WeightSolution solve_lab_cvar(std::span<const double> losses, const WeightBox& box);

/**
 * Exhaustive reference for solve_lab_cvar: enumerates every vertex of the
 * feasible polytope (each choice of at-upper components plus at most one
 * fractional component) and returns the best. Deliberately shares no code
 * with the greedy path. Refuses more than 12 samples.
 */
WeightSolution brute_force_lp(std::span<const double> losses, const WeightBox& box);

/**
 * Closed-form worst-case-weighted zero-one risk given per-class error rates
 * R_j. Equals the solver's objective on the corresponding 0/1 loss vector
 * with the full-dataset box:
 *
 *   min( 1 - sum_j n_j*lower_j*(1 - R_j),  sum_j n_j*upper_j*R_j )
 *
 * Requires R_j in [0, 1].
 */
double closed_form_zero_one(std::span<const double> per_class_errors, const ClassBounds& bounds);

} // namespace labcvar
