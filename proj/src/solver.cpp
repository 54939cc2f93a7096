#include "labcvar/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "labcvar/errors.hpp"

namespace labcvar {

namespace {

constexpr double kFeasEps = 1e-9;
constexpr double kVertexEps = 1e-12;

void check_losses(std::span<const double> losses, std::size_t box_size) {
    if (losses.size() != box_size)
        throw std::invalid_argument("losses and box sizes disagree");
    for (double l : losses)
        if (!std::isfinite(l))
            throw std::invalid_argument("losses must be finite");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

void WeightBox::validate() const {
    if (lower.empty() || lower.size() != upper.size())
        throw std::invalid_argument("weight box must be non-empty with matching sides");
    double sum_lower = 0.0;
    double sum_upper = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("weight box entries must be finite");
        if (lower[i] < 0.0)
            throw std::invalid_argument("weight lower bounds must be non-negative");
        if (upper[i] < lower[i])
            throw std::invalid_argument("weight upper bound below lower bound");
        sum_lower += lower[i];
        sum_upper += upper[i];
    }
    if (sum_lower > 1.0 + kFeasEps || sum_upper < 1.0 - kFeasEps) {
        std::ostringstream msg;
        msg << "weight box admits no probability vector: bounds sum to ["
            << sum_lower << ", " << sum_upper << "]";
        throw ConfigError(msg.str());
    }
}

WeightBox WeightBox::from_class_bounds(const ClassBounds& bounds, std::span<const int> labels,
                                       std::size_t denom) {
    if (denom == 0)
        throw std::invalid_argument("weight box denominator must be positive");
    WeightBox box;
    box.lower.resize(labels.size());
    box.upper.resize(labels.size());
    const double d = static_cast<double>(denom);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= bounds.num_classes())
            throw std::invalid_argument("label out of range for class bounds");
        box.lower[i] = 1.0 / (bounds.beta[y] * d);
        box.upper[i] = 1.0 / (bounds.alpha[y] * d);
    }
    return box;
}

WeightSolution solve_lab_cvar(std::span<const double> losses, const WeightBox& box) {
    box.validate();
    check_losses(losses, box.size());
    const std::size_t n = losses.size();

    WeightSolution sol;
    sol.weights = box.lower;
    double mass = 1.0;
    for (double l : box.lower) mass -= l;
    if (mass < 0.0) mass = 0.0; // box validated; only rounding can go below

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (losses[a] != losses[b]) return losses[a] > losses[b];
        return a < b;
    });

    for (std::size_t idx : order) {
        if (mass <= 0.0) break;
        const double room = box.upper[idx] - box.lower[idx];
        const double take = std::min(room, mass);
        sol.weights[idx] += take;
        mass -= take;
        if (take > 0.0 && take < room) sol.fractional_index = idx;
    }
    if (mass > kFeasEps)
        throw ConfigError("weight box admits no probability vector");

    sol.objective = dot(std::span<const double>(sol.weights), losses);
    return sol;
}

WeightSolution brute_force_lp(std::span<const double> losses, const WeightBox& box) {
    const std::size_t n = losses.size();
    if (n > 12)
        throw std::invalid_argument("brute_force_lp is a test oracle; refuses more than 12 samples");
    box.validate();
    check_losses(losses, n);

    WeightSolution best;
    best.objective = -std::numeric_limits<double>::infinity();

    std::vector<double> w(n);
    const auto consider = [&](std::optional<std::size_t> frac) {
        const double obj = dot(std::span<const double>(w), losses);
        if (obj > best.objective) {
            best.objective = obj;
            best.weights = w;
            best.fractional_index = frac;
        }
    };

    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double base = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            base += (mask >> i & 1u) ? box.upper[i] : box.lower[i];

        if (std::abs(base - 1.0) <= kVertexEps) {
            for (std::size_t i = 0; i < n; ++i)
                w[i] = (mask >> i & 1u) ? box.upper[i] : box.lower[i];
            consider(std::nullopt);
        }
        for (std::size_t f = 0; f < n; ++f) {
            if (mask >> f & 1u) continue;
            const double extra = 1.0 - base; // mass added to component f above its lower bound
            const double room = box.upper[f] - box.lower[f];
            if (extra < -kVertexEps || extra > room + kVertexEps) continue;
            for (std::size_t i = 0; i < n; ++i)
                w[i] = (mask >> i & 1u) ? box.upper[i] : box.lower[i];
            w[f] = std::clamp(box.lower[f] + extra, box.lower[f], box.upper[f]);
            const bool interior = w[f] > box.lower[f] + kVertexEps && w[f] < box.upper[f] - kVertexEps;
            consider(interior ? std::optional<std::size_t>(f) : std::nullopt);
        }
    }
    return best;
}

double closed_form_zero_one(std::span<const double> per_class_errors, const ClassBounds& bounds) {
    const std::size_t L = bounds.num_classes();
    if (per_class_errors.size() != L)
        throw std::invalid_argument("per-class error vector size must match class count");
    double lower_mass = 0.0;   // sum_j n_j * lower_j
    double lower_risk = 0.0;   // sum_j n_j * lower_j * R_j
    double upper_risk = 0.0;   // sum_j n_j * upper_j * R_j
    for (std::size_t j = 0; j < L; ++j) {
        const double r = per_class_errors[j];
        if (!(r >= 0.0 && r <= 1.0))
            throw std::invalid_argument("per-class errors must lie in [0, 1]");
        const double nj = static_cast<double>(bounds.counts[j]);
        lower_mass += nj * bounds.lower_weight[j];
        lower_risk += nj * bounds.lower_weight[j] * r;
        upper_risk += nj * bounds.upper_weight[j] * r;
    }
    return std::min(1.0 - lower_mass + lower_risk, upper_risk);
}

} // namespace labcvar
