#include "labcvar/bounds.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "labcvar/errors.hpp"

namespace labcvar {

namespace {

constexpr double kFeasEps = 1e-9;

void check_counts(const std::vector<std::size_t>& counts) {
    if (counts.empty())
        throw std::invalid_argument("class counts must be non-empty");
    for (std::size_t c : counts)
        if (c == 0)
            throw std::invalid_argument("class counts must be positive");
}

std::size_t total(const std::vector<std::size_t>& counts) {
    std::size_t n = 0;
    for (std::size_t c : counts) n += c;
    return n;
}

} // namespace

void BoundParams::validate() const {
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("bound exponent k must be positive");
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("eta must lie strictly between 0 and 1");
    if (!tau1_auto() && !std::isfinite(tau1))
        throw std::invalid_argument("tau1 must be finite or auto");
}

ClassBounds ClassBounds::from_alpha_beta(std::vector<double> alpha, std::vector<double> beta,
                                         std::vector<std::size_t> counts) {
    check_counts(counts);
    const std::size_t L = counts.size();
    if (alpha.size() != L || beta.size() != L)
        throw std::invalid_argument("alpha/beta size must match class count");

    ClassBounds b;
    b.alpha = std::move(alpha);
    b.beta = std::move(beta);
    b.counts = std::move(counts);
    b.n = total(b.counts);
    b.lower_weight.resize(L);
    b.upper_weight.resize(L);

    const double n = static_cast<double>(b.n);
    double sum_lower = 0.0;
    double sum_upper = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        if (!(b.alpha[j] > 0.0) || !(b.beta[j] > 0.0))
            throw std::invalid_argument("alpha and beta must be positive");
        if (b.alpha[j] > b.beta[j] * (1.0 + 1e-12))
            throw std::invalid_argument("alpha_j must not exceed beta_j");
        b.lower_weight[j] = 1.0 / (b.beta[j] * n);
        b.upper_weight[j] = 1.0 / (b.alpha[j] * n);
        sum_lower += static_cast<double>(b.counts[j]) * b.lower_weight[j];
        sum_upper += static_cast<double>(b.counts[j]) * b.upper_weight[j];
    }

    if (sum_lower > 1.0 + kFeasEps || sum_upper < 1.0 - kFeasEps) {
        std::ostringstream msg;
        msg << "class bounds are infeasible: per-sample boxes sum to ["
            << sum_lower << ", " << sum_upper << "], which excludes 1";
        throw ConfigError(msg.str());
    }
    return b;
}

ClassBounds optimal_bounds(const std::vector<std::size_t>& counts, const BoundParams& params) {
    params.validate();
    check_counts(counts);

    const TauRange range = feasible_tau_range(counts, params.k, params.eta);
    double tau1 = params.tau1;
    if (params.tau1_auto()) {
        if (range.empty)
            throw ConfigError("cannot auto-calibrate tau1: feasible interval is empty");
        tau1 = range.hi * std::sqrt(params.eta); // geometric midpoint of [lo, hi]
    }
    if (!(tau1 > 0.0))
        throw std::invalid_argument("tau1 must be positive");

    const std::size_t L = counts.size();
    double denom = 0.0;
    for (std::size_t j = 0; j < L; ++j)
        denom += std::pow(static_cast<double>(counts[j]), 0.5 - params.k);

    std::vector<double> alpha(L), beta(L);
    const double tau2 = tau1 / params.eta;
    for (std::size_t j = 0; j < L; ++j) {
        const double shape = std::pow(static_cast<double>(counts[j]), params.k) / denom;
        alpha[j] = tau1 * shape;
        beta[j] = tau2 * shape;
    }

    try {
        return ClassBounds::from_alpha_beta(std::move(alpha), std::move(beta), counts);
    } catch (const ConfigError&) {
        std::ostringstream msg;
        msg << "tau1 = " << tau1 << " is infeasible for these class counts";
        if (!range.empty) {
            msg << "; feasible tau1 interval is [" << range.lo << ", " << range.hi << "]";
            throw ConfigError(msg.str(), range.lo, range.hi);
        }
        throw ConfigError(msg.str());
    }
}

TauRange feasible_tau_range(const std::vector<std::size_t>& counts, double k, double eta) {
    check_counts(counts);
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("eta must lie strictly between 0 and 1");
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("bound exponent k must be positive");

    double shape_sum = 0.0; // sum_m n_m^(1/2 - k)
    double mass_sum = 0.0;  // sum_j n_j^(1 - k)
    for (std::size_t c : counts) {
        shape_sum += std::pow(static_cast<double>(c), 0.5 - k);
        mass_sum += std::pow(static_cast<double>(c), 1.0 - k);
    }
    const double n = static_cast<double>(total(counts));
    const double hi = shape_sum * mass_sum / n;

    TauRange range;
    if (!std::isfinite(hi) || hi <= 0.0)
        return range; // extreme exponents: report empty rather than error
    range.lo = eta * hi;
    range.hi = hi;
    range.empty = false;
    return range;
}

double bound_objective(std::span<const double> v, const std::vector<std::size_t>& counts) {
    check_counts(counts);
    if (v.size() != counts.size())
        throw std::invalid_argument("bound_objective: size mismatch");
    double obj = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (!(v[j] > 0.0))
            throw std::invalid_argument("bound_objective: entries must be positive");
        obj += std::sqrt(static_cast<double>(counts[j])) / v[j];
    }
    return obj;
}

} // namespace labcvar
