#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "labcvar/bounds.hpp"
#include "labcvar/errors.hpp"
#include "labcvar/rng.hpp"
#include "test_util.hpp"

using labcvar::BoundParams;
using labcvar::ClassBounds;
using labcvar::ConfigError;

namespace {

// Feasibility spelled out from first principles: the per-sample boxes over
// the whole dataset must be able to hold a probability vector.
bool box_admits_probability_vector(const std::vector<std::size_t>& counts, double k, double eta,
                                   double tau1, double tol = 1e-12) {
    double shape_sum = 0.0;
    for (std::size_t c : counts) shape_sum += std::pow(static_cast<double>(c), 0.5 - k);
    std::size_t n = 0;
    for (std::size_t c : counts) n += c;
    double sum_lower = 0.0, sum_upper = 0.0;
    for (std::size_t c : counts) {
        const double nc = static_cast<double>(c);
        const double alpha = tau1 * std::pow(nc, k) / shape_sum;
        const double beta = alpha / eta;
        sum_lower += nc / (beta * static_cast<double>(n));
        sum_upper += nc / (alpha * static_cast<double>(n));
    }
    return sum_lower <= 1.0 + tol && sum_upper >= 1.0 - tol;
}

} // namespace

TEST_CASE("two-class bounds match the hand-evaluated formula") {
    const std::vector<std::size_t> counts{10, 1000};
    const BoundParams params{0.25, 1.0, 0.5};
    const ClassBounds b = labcvar::optimal_bounds(counts, params);

    const double s = std::pow(10.0, 0.25) + std::pow(1000.0, 0.25);
    const double a0 = std::pow(10.0, 0.25) / s;
    const double a1 = std::pow(1000.0, 0.25) / s;
    CHECK(b.alpha[0] == doctest::Approx(a0).epsilon(1e-14));
    CHECK(b.alpha[1] == doctest::Approx(a1).epsilon(1e-14));
    CHECK(b.beta[0] == doctest::Approx(2.0 * a0).epsilon(1e-14));
    CHECK(b.beta[1] == doctest::Approx(2.0 * a1).epsilon(1e-14));
    CHECK(b.n == 1010);
    CHECK(b.upper_weight[0] == doctest::Approx(1.0 / (a0 * 1010.0)).epsilon(1e-14));
    CHECK(b.lower_weight[0] == doctest::Approx(0.5 / (a0 * 1010.0)).epsilon(1e-14));
    CHECK(b.upper_weight[1] == doctest::Approx(1.0 / (a1 * 1010.0)).epsilon(1e-14));
}

TEST_CASE("lower weights are exactly eta times the upper weights") {
    labcvar::Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto counts = testutil::random_sorted_counts(rng, 2 + rng.bounded(8));
        const double eta = rng.uniform(0.05, 0.95);
        const double k = rng.uniform(0.05, 2.0);
        const ClassBounds b = labcvar::optimal_bounds(counts, {k, 0.0, eta});
        for (std::size_t j = 0; j < counts.size(); ++j) {
            CHECK(b.lower_weight[j] == doctest::Approx(eta * b.upper_weight[j]).epsilon(1e-12));
            CHECK(b.beta[j] == doctest::Approx(b.alpha[j] / eta).epsilon(1e-12));
        }
    }
}

TEST_CASE("rarer classes get the heavier per-sample weight cap") {
    labcvar::Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto counts = testutil::random_sorted_counts(rng, 3 + rng.bounded(7));
        const ClassBounds b = labcvar::optimal_bounds(counts, {rng.uniform(0.1, 3.0), 0.0, 0.5});
        for (std::size_t j = 0; j + 1 < counts.size(); ++j) {
            CHECK(b.alpha[j] <= b.alpha[j + 1] * (1.0 + 1e-12));
            CHECK(b.upper_weight[j] >= b.upper_weight[j + 1] * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("feasible_tau_range matches the first-principles predicate on a grid") {
    labcvar::Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto counts = testutil::random_sorted_counts(rng, 2 + rng.bounded(6));
        const double k = rng.uniform(0.1, 2.0);
        const double eta = rng.uniform(0.1, 0.9);
        const labcvar::TauRange range = labcvar::feasible_tau_range(counts, k, eta);
        REQUIRE_FALSE(range.empty);
        CHECK(range.lo == doctest::Approx(eta * range.hi).epsilon(1e-12));

        for (int step = 0; step <= 40; ++step) {
            const double t = range.lo * 0.5 + (range.hi * 1.5 - range.lo * 0.5) * step / 40.0;
            // Stay away from the boundary itself: both sides agree there only
            // up to rounding.
            if (std::fabs(t - range.lo) < 1e-9 * range.lo) continue;
            if (std::fabs(t - range.hi) < 1e-9 * range.hi) continue;
            CHECK(range.contains(t) == box_admits_probability_vector(counts, k, eta, t));
        }

        // The endpoints themselves are feasible (equality on one side).
        CHECK_NOTHROW(labcvar::optimal_bounds(counts, {k, range.lo, eta}));
        CHECK_NOTHROW(labcvar::optimal_bounds(counts, {k, range.hi, eta}));
    }
}

TEST_CASE("auto tau1 resolves to the geometric midpoint of the feasible interval") {
    const std::vector<std::size_t> counts{12, 20, 33, 56, 93, 155, 258, 431, 719, 1200};
    const double k = 0.5, eta = 1.0 / 6.0;
    const labcvar::TauRange range = labcvar::feasible_tau_range(counts, k, eta);
    const double expected_tau = std::sqrt(range.lo * range.hi);

    const ClassBounds autob = labcvar::optimal_bounds(counts, {k, 0.0, eta});
    const ClassBounds exact = labcvar::optimal_bounds(counts, {k, expected_tau, eta});
    for (std::size_t j = 0; j < counts.size(); ++j)
        CHECK(autob.alpha[j] == doctest::Approx(exact.alpha[j]).epsilon(1e-12));
}

TEST_CASE("infeasible tau1 raises ConfigError carrying the feasible interval") {
    const std::vector<std::size_t> counts{10, 100, 1000};
    const double k = 0.5, eta = 0.5;
    const labcvar::TauRange range = labcvar::feasible_tau_range(counts, k, eta);
    bool threw = false;
    try {
        labcvar::optimal_bounds(counts, {k, range.hi * 4.0, eta});
    } catch (const ConfigError& e) {
        threw = true;
        REQUIRE(e.has_feasible_range());
        CHECK(e.feasible_lo() == doctest::Approx(range.lo));
        CHECK(e.feasible_hi() == doctest::Approx(range.hi));
    }
    CHECK(threw);
    CHECK_THROWS_AS(labcvar::optimal_bounds(counts, {k, range.lo * 0.25, eta}), ConfigError);
}

TEST_CASE("power-law shape minimizes the estimation-gap objective at fixed budget") {
    labcvar::Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto counts = testutil::random_sorted_counts(rng, 2 + rng.bounded(8));
        const double k = rng.uniform(0.1, 1.5);
        const double eta = rng.uniform(0.2, 0.8);
        const BoundParams params{k, 0.0, eta};
        const ClassBounds b = labcvar::optimal_bounds(counts, params);
        const double k1 = params.k1();

        const auto budget_of = [&](const std::vector<double>& v) {
            double s = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j)
                s += std::pow(static_cast<double>(counts[j]), k1) * v[j];
            return s;
        };
        const double budget0 = budget_of(b.alpha);
        const double obj0 = labcvar::bound_objective(b.alpha, counts);

        for (int p = 0; p < 30; ++p) {
            std::vector<double> v = b.alpha;
            for (double& x : v) x *= std::exp(0.3 * rng.normal());
            const double scale = budget0 / budget_of(v);
            for (double& x : v) x *= scale;
            CHECK(labcvar::bound_objective(v, counts) >= obj0 * (1.0 - 1e-12));
        }
    }
}

TEST_CASE("degenerate equal bounds pin every weight to inverse class frequency") {
    // alpha_j = beta_j = L * n_j / n makes each sample's weight exactly
    // 1 / (L * n_j); the full-dataset box sums to exactly 1 on both sides.
    const std::vector<std::size_t> counts{5, 15, 30};
    const std::size_t L = counts.size();
    const double n = 50.0;
    std::vector<double> ab(L);
    for (std::size_t j = 0; j < L; ++j) ab[j] = static_cast<double>(L) * counts[j] / n;

    const ClassBounds b = ClassBounds::from_alpha_beta(ab, ab, counts);
    for (std::size_t j = 0; j < L; ++j) {
        const double w = 1.0 / (static_cast<double>(L) * counts[j]);
        CHECK(b.lower_weight[j] == doctest::Approx(w).epsilon(1e-14));
        CHECK(b.upper_weight[j] == doctest::Approx(w).epsilon(1e-14));
    }
}

TEST_CASE("parameter validation rejects nonsense") {
    CHECK_THROWS_AS((BoundParams{-0.5, 1.0, 0.5}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((BoundParams{0.0, 1.0, 0.5}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((BoundParams{0.5, 1.0, 0.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((BoundParams{0.5, 1.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((BoundParams{0.5, std::nan(""), 0.5}.validate()), std::invalid_argument);
    CHECK_NOTHROW((BoundParams{0.5, 0.0, 0.5}.validate())); // auto tau1
    CHECK_NOTHROW((BoundParams{2.0, 1.5, 0.25}.validate()));

    // alpha above beta is not a box.
    CHECK_THROWS_AS((ClassBounds::from_alpha_beta({2.0, 2.0}, {1.0, 1.0}, {10, 10})),
                    std::invalid_argument);
}

TEST_CASE("extreme exponent underflows to an empty feasible interval") {
    const std::vector<std::size_t> counts{100, 10000};
    const labcvar::TauRange range = labcvar::feasible_tau_range(counts, 300.0, 0.5);
    CHECK(range.empty);
    CHECK_FALSE(range.contains(1.0));
    CHECK_THROWS_AS(labcvar::optimal_bounds(counts, {300.0, 0.0, 0.5}), ConfigError);
}

TEST_CASE("estimation-gap objective has the expected closed value") {
    const std::vector<std::size_t> counts{4, 9};
    const std::vector<double> v{2.0, 3.0};
    CHECK(labcvar::bound_objective(v, counts) == doctest::Approx(2.0)); // 2/2 + 3/3
    const std::vector<double> zero{0.0, 1.0};
    CHECK_THROWS_AS(labcvar::bound_objective(zero, counts), std::invalid_argument);
}
