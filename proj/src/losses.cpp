#include "labcvar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "labcvar/errors.hpp"
#include "labcvar/solver.hpp"

namespace labcvar {

namespace {

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
    if (labels.size() != batch)
        throw std::invalid_argument("label count must match logit rows");
    if (batch == 0)
        throw std::invalid_argument("batch must be non-empty");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw std::invalid_argument("label out of range");
}

void check_logits(const Matrix& logits) {
    if (logits.rows() == 0 || logits.cols() == 0)
        throw std::invalid_argument("logits must be non-empty");
    if (!logits.all_finite())
        throw std::invalid_argument("logits must be finite");
}

/// Per-sample CE pieces on (optionally offset) logits: fills probs with
/// softmax rows and returns the per-sample losses lse(row) - row[y].
std::vector<double> ce_rows(const Matrix& logits, std::span<const int> labels, Matrix& probs) {
    const std::size_t B = logits.rows();
    std::vector<double> per_sample(B);
    probs = Matrix(B, logits.cols());
    for (std::size_t i = 0; i < B; ++i) {
        const auto row = logits.row(i);
        const double lse = log_sum_exp(row);
        per_sample[i] = lse - row[labels[i]];
        auto prow = probs.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) prow[j] = std::exp(row[j] - lse);
    }
    return per_sample;
}

/// Gradient rows scale_i * (probs_i - onehot(y_i)).
Matrix weighted_softmax_grad(const Matrix& probs, std::span<const int> labels,
                             std::span<const double> scale) {
    Matrix grad = probs;
    for (std::size_t i = 0; i < grad.rows(); ++i) {
        auto row = grad.row(i);
        row[labels[i]] -= 1.0;
        for (double& g : row) g *= scale[i];
    }
    return grad;
}

double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

Matrix with_class_offsets(const Matrix& logits, std::span<const double> offsets) {
    Matrix out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += offsets[j];
    }
    return out;
}

WeightBox batch_box(const ClassBounds& bounds, std::span<const int> labels,
                    const BatchLossContext& ctx) {
    WeightBox box = WeightBox::from_class_bounds(bounds, labels, labels.size());
    if (!ctx.feasibility_fallback) return box;

    double sum_lower = 0.0;
    double sum_upper = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i) {
        sum_lower += box.lower[i];
        sum_upper += box.upper[i];
    }
    // An unlucky batch composition can push one side past 1 even though the
    // full dataset is feasible. Rescale the violated side just enough; at
    // most one side can be out since lower <= upper.
    bool repaired = false;
    if (sum_lower > 1.0) {
        for (double& l : box.lower) l /= sum_lower;
        repaired = true;
    } else if (sum_upper < 1.0) {
        for (double& u : box.upper) u /= sum_upper;
        repaired = true;
    }
    if (repaired && ctx.infeasible_counter) ++*ctx.infeasible_counter;
    return box;
}

LossOutput worst_case_weighted(const Matrix& logits, std::span<const int> labels,
                               const WeightBox& box) {
    LossOutput out;
    Matrix probs;
    out.per_sample = ce_rows(logits, labels, probs);
    WeightSolution sol = solve_lab_cvar(out.per_sample, box);
    out.total = sol.objective;
    out.grad_logits = weighted_softmax_grad(probs, labels, sol.weights);
    out.weights_used = std::move(sol.weights);
    return out;
}

const std::vector<std::size_t>& require_counts(const BatchLossContext& ctx) {
    if (!ctx.class_counts)
        throw std::invalid_argument("loss requires class counts in the batch context");
    return *ctx.class_counts;
}

const ClassBounds& require_bounds(const BatchLossContext& ctx) {
    if (!ctx.bounds)
        throw std::invalid_argument("loss requires class bounds in the batch context");
    return *ctx.bounds;
}

} // namespace

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
    case LossKind::Erm: return "erm";
    case LossKind::VanillaRw: return "vanilla_rw";
    case LossKind::CbRw: return "cb_rw";
    case LossKind::Focal: return "focal";
    case LossKind::Ldam: return "ldam";
    case LossKind::LdamDrw: return "ldam_drw";
    case LossKind::La: return "la";
    case LossKind::AlphaCvar: return "alpha_cvar";
    case LossKind::LabCvar: return "lab_cvar";
    case LossKind::LabCvarLogit: return "lab_cvar_logit";
    }
    throw std::invalid_argument("unknown loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
    for (LossKind kind : {LossKind::Erm, LossKind::VanillaRw, LossKind::CbRw, LossKind::Focal,
                          LossKind::Ldam, LossKind::LdamDrw, LossKind::La, LossKind::AlphaCvar,
                          LossKind::LabCvar, LossKind::LabCvarLogit})
        if (name == loss_kind_name(kind)) return kind;
    throw std::invalid_argument("unknown loss kind: " + name);
}

void LossSpec::validate() const {
    switch (kind) {
    case LossKind::Erm:
    case LossKind::VanillaRw:
        break;
    case LossKind::CbRw:
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("cb_rw requires gamma in (0, 1)");
        break;
    case LossKind::Focal:
        if (!(gamma > 0.0))
            throw std::invalid_argument("focal requires gamma > 0");
        break;
    case LossKind::Ldam:
    case LossKind::LdamDrw:
        if (!(margin_scale > 0.0))
            throw std::invalid_argument("ldam requires margin_scale > 0");
        break;
    case LossKind::La:
        if (!(tau > 0.0))
            throw std::invalid_argument("la requires tau > 0");
        break;
    case LossKind::AlphaCvar:
        if (!(alpha > 0.0))
            throw std::invalid_argument("alpha_cvar requires alpha > 0");
        break;
    case LossKind::LabCvar:
    case LossKind::LabCvarLogit:
        bound_params.validate();
        break;
    }
}

std::string LossSpec::display_name() const {
    std::ostringstream s;
    s << loss_kind_name(kind);
    switch (kind) {
    case LossKind::CbRw:
    case LossKind::Focal:
        s << "(gamma=" << gamma << ")";
        break;
    case LossKind::Ldam:
        s << "(c=" << margin_scale << ")";
        break;
    case LossKind::LdamDrw:
        s << "(c=" << margin_scale << ",drw=" << drw_epoch << ")";
        break;
    case LossKind::La:
        s << "(tau=" << tau << ")";
        break;
    case LossKind::AlphaCvar:
        s << "(alpha=" << alpha << ")";
        break;
    case LossKind::LabCvar:
    case LossKind::LabCvarLogit:
        s << "(k=" << bound_params.k << ",tau1=";
        if (bound_params.tau1_auto())
            s << "auto";
        else
            s << bound_params.tau1;
        s << ",eta=" << bound_params.eta << ")";
        break;
    default:
        break;
    }
    return s.str();
}

LogitAdjustment::LogitAdjustment(std::vector<double> pi_in) : pi(std::move(pi_in)) {
    if (pi.empty())
        throw std::invalid_argument("adjustment priors must be non-empty");
    log_pi.resize(pi.size());
    for (std::size_t j = 0; j < pi.size(); ++j) {
        if (!(pi[j] > 0.0) || !std::isfinite(pi[j]))
            throw std::invalid_argument("adjustment priors must be positive and finite");
        log_pi[j] = std::log(pi[j]);
    }
}

LogitAdjustment LogitAdjustment::from_bounds(const ClassBounds& bounds) {
    std::vector<double> pi(bounds.num_classes());
    for (std::size_t j = 0; j < pi.size(); ++j)
        pi[j] = static_cast<double>(bounds.n) * bounds.alpha[j];
    return LogitAdjustment(std::move(pi));
}

LogitAdjustment LogitAdjustment::ones(std::size_t L) {
    return LogitAdjustment(std::vector<double>(L, 1.0));
}

LossOutput softmax_ce(const Matrix& logits, std::span<const int> labels) {
    check_logits(logits);
    check_labels(labels, logits.rows(), logits.cols());
    LossOutput out;
    Matrix probs;
    out.per_sample = ce_rows(logits, labels, probs);
    out.total = mean(out.per_sample);
    const std::vector<double> scale(logits.rows(), 1.0 / static_cast<double>(logits.rows()));
    out.grad_logits = weighted_softmax_grad(probs, labels, scale);
    return out;
}

std::vector<double> class_weights(LossKind kind, const std::vector<std::size_t>& counts,
                                  double gamma) {
    if (counts.empty())
        throw std::invalid_argument("class counts must be non-empty");
    std::vector<double> w(counts.size());
    if (kind == LossKind::VanillaRw) {
        for (std::size_t j = 0; j < counts.size(); ++j) {
            if (counts[j] == 0)
                throw std::invalid_argument("class counts must be positive");
            w[j] = 1.0 / static_cast<double>(counts[j]);
        }
    } else if (kind == LossKind::CbRw) {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("cb_rw requires gamma in (0, 1)");
        for (std::size_t j = 0; j < counts.size(); ++j) {
            if (counts[j] == 0)
                throw std::invalid_argument("class counts must be positive");
            w[j] = (1.0 - gamma) / (1.0 - std::pow(gamma, static_cast<double>(counts[j])));
        }
    } else {
        throw std::invalid_argument("class_weights applies to the re-weighting kinds only");
    }
    return w;
}

std::vector<double> rescale_weights_minibatch(std::span<const double> raw) {
    if (raw.empty())
        throw std::invalid_argument("cannot rescale an empty weight vector");
    double m = 0.0;
    for (double w : raw) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("weights must be non-negative and finite");
        m += w;
    }
    m /= static_cast<double>(raw.size());
    if (!(m > 0.0))
        throw std::invalid_argument("cannot rescale all-zero weights");
    std::vector<double> out(raw.begin(), raw.end());
    for (double& w : out) w /= m;
    return out;
}

LossOutput focal_loss(const Matrix& logits, std::span<const int> labels, double gamma) {
    check_logits(logits);
    check_labels(labels, logits.rows(), logits.cols());
    if (!(gamma > 0.0))
        throw std::invalid_argument("focal requires gamma > 0");

    const std::size_t B = logits.rows();
    LossOutput out;
    Matrix probs;
    std::vector<double> ce = ce_rows(logits, labels, probs);
    out.per_sample.resize(B);
    std::vector<double> bracket(B);
    for (std::size_t i = 0; i < B; ++i) {
        const auto prow = probs.row(i);
        const double p = prow[labels[i]];
        // q = 1 - p by direct summation; accurate when p is close to 1.
        double q = 0.0;
        for (std::size_t j = 0; j < prow.size(); ++j)
            if (j != static_cast<std::size_t>(labels[i])) q += prow[j];
        if (q <= 0.0) {
            out.per_sample[i] = 0.0;
            bracket[i] = 0.0;
            continue;
        }
        const double mod = std::pow(q, gamma);
        out.per_sample[i] = mod * ce[i];
        bracket[i] = (gamma * std::pow(q, gamma - 1.0) * p * ce[i] + mod) /
                     static_cast<double>(B);
    }
    out.total = mean(out.per_sample);
    out.grad_logits = weighted_softmax_grad(probs, labels, bracket);
    return out;
}

LossOutput ldam_loss(const Matrix& logits, std::span<const int> labels, double margin_scale,
                     const std::vector<std::size_t>& counts) {
    check_logits(logits);
    check_labels(labels, logits.rows(), counts.size());
    if (logits.cols() != counts.size())
        throw std::invalid_argument("logit columns must match class count");
    if (!(margin_scale > 0.0))
        throw std::invalid_argument("ldam requires margin_scale > 0");

    std::vector<double> margin(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0)
            throw std::invalid_argument("class counts must be positive");
        margin[j] = margin_scale / std::pow(static_cast<double>(counts[j]), 0.25);
    }
    // Only the true-class logit is shifted; the shift is constant in the
    // logits, so the CE gradient on the shifted matrix is the gradient.
    Matrix shifted = logits;
    for (std::size_t i = 0; i < shifted.rows(); ++i)
        shifted(i, labels[i]) -= margin[labels[i]];
    return softmax_ce(shifted, labels);
}

LossOutput logit_adjusted_weighted_ce(const Matrix& logits, std::span<const int> labels,
                                      std::span<const double> weights,
                                      const LogitAdjustment& adjustment) {
    check_logits(logits);
    check_labels(labels, logits.rows(), logits.cols());
    if (weights.size() != logits.rows())
        throw std::invalid_argument("weight count must match logit rows");
    if (adjustment.pi.size() != logits.cols())
        throw std::invalid_argument("adjustment size must match class count");
    for (double w : weights)
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("weights must be non-negative and finite");

    const Matrix shifted = with_class_offsets(logits, adjustment.log_pi);
    Matrix probs;
    std::vector<double> adjusted_ce = ce_rows(shifted, labels, probs);

    LossOutput out;
    const std::size_t B = logits.rows();
    out.per_sample.resize(B);
    std::vector<double> scale(B);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        scale[i] = adjustment.pi[labels[i]] * weights[i];
        out.per_sample[i] = scale[i] * adjusted_ce[i];
        total += out.per_sample[i];
    }
    out.total = total;
    out.grad_logits = weighted_softmax_grad(probs, labels, scale);
    return out;
}

LossOutput la_loss(const Matrix& logits, std::span<const int> labels, double tau,
                   const std::vector<std::size_t>& counts) {
    check_logits(logits);
    check_labels(labels, logits.rows(), counts.size());
    if (logits.cols() != counts.size())
        throw std::invalid_argument("logit columns must match class count");
    if (!(tau > 0.0))
        throw std::invalid_argument("la requires tau > 0");
    std::vector<double> offsets(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] == 0)
            throw std::invalid_argument("class counts must be positive");
        offsets[j] = tau * std::log(static_cast<double>(counts[j]));
    }
    return softmax_ce(with_class_offsets(logits, offsets), labels);
}

LossOutput lab_cvar_loss(const Matrix& logits, std::span<const int> labels,
                         const ClassBounds& bounds) {
    check_logits(logits);
    check_labels(labels, logits.rows(), bounds.num_classes());
    const WeightBox box = WeightBox::from_class_bounds(bounds, labels, labels.size());
    return worst_case_weighted(logits, labels, box);
}

LossOutput lab_cvar_logit_loss(const Matrix& logits, std::span<const int> labels,
                               const ClassBounds& bounds) {
    check_logits(logits);
    check_labels(labels, logits.rows(), bounds.num_classes());
    const WeightBox box = WeightBox::from_class_bounds(bounds, labels, labels.size());

    Matrix probs;
    const std::vector<double> plain_ce = ce_rows(logits, labels, probs);
    WeightSolution sol = solve_lab_cvar(plain_ce, box);

    LossOutput out = logit_adjusted_weighted_ce(logits, labels, sol.weights,
                                                LogitAdjustment::from_bounds(bounds));
    out.weights_used = std::move(sol.weights);
    return out;
}

LossOutput alpha_cvar_loss(const Matrix& logits, std::span<const int> labels, double alpha) {
    check_logits(logits);
    check_labels(labels, logits.rows(), logits.cols());
    if (!(alpha > 0.0))
        throw std::invalid_argument("alpha_cvar requires alpha > 0");
    const std::size_t B = logits.rows();
    WeightBox box;
    box.lower.assign(B, 0.0);
    box.upper.assign(B, 1.0 / (alpha * static_cast<double>(B)));
    return worst_case_weighted(logits, labels, box);
}

double gradient_norm_probe(std::span<const double> logit_row, int label,
                           const LogitAdjustment& adjustment, double weight, int t,
                           double feature_norm) {
    const std::size_t L = logit_row.size();
    if (adjustment.pi.size() != L)
        throw std::invalid_argument("adjustment size must match class count");
    if (label < 0 || static_cast<std::size_t>(label) >= L || t < 0 ||
        static_cast<std::size_t>(t) >= L)
        throw std::invalid_argument("class index out of range");
    if (t == label)
        throw std::invalid_argument("probe class must differ from the label");
    std::vector<double> adj(L);
    for (std::size_t j = 0; j < L; ++j) adj[j] = logit_row[j] + adjustment.log_pi[j];
    const double p_t = std::exp(adj[t] - log_sum_exp(adj));
    return adjustment.pi[label] * weight * p_t * feature_norm;
}

LossOutput evaluate_loss(const LossSpec& spec, const Matrix& logits, std::span<const int> labels,
                         const BatchLossContext& ctx) {
    spec.validate();
    const std::size_t B = logits.rows();

    switch (spec.kind) {
    case LossKind::Erm:
        return softmax_ce(logits, labels);

    case LossKind::VanillaRw:
    case LossKind::CbRw: {
        const auto& counts = require_counts(ctx);
        const std::vector<double> cw = class_weights(spec.kind, counts, spec.gamma);
        std::vector<double> raw(B);
        for (std::size_t i = 0; i < B; ++i) raw[i] = cw[labels[i]];
        std::vector<double> v = rescale_weights_minibatch(raw);
        for (double& w : v) w /= static_cast<double>(B); // weighted mean
        return logit_adjusted_weighted_ce(logits, labels, v, LogitAdjustment::ones(logits.cols()));
    }

    case LossKind::Focal:
        return focal_loss(logits, labels, spec.gamma);

    case LossKind::Ldam:
        return ldam_loss(logits, labels, spec.margin_scale, require_counts(ctx));

    case LossKind::LdamDrw: {
        const auto& counts = require_counts(ctx);
        if (!ctx.drw_active)
            return ldam_loss(logits, labels, spec.margin_scale, counts);
        // Deferred re-weighting phase: margin loss times smoothed class
        // weights (effective-number gamma pinned at 0.9999), rescaled per
        // batch and detached from the gradient.
        LossOutput base = ldam_loss(logits, labels, spec.margin_scale, counts);
        const std::vector<double> cw = class_weights(LossKind::CbRw, counts, 0.9999);
        std::vector<double> raw(B);
        for (std::size_t i = 0; i < B; ++i) raw[i] = cw[labels[i]];
        const std::vector<double> v = rescale_weights_minibatch(raw);
        LossOutput out;
        out.per_sample.resize(B);
        out.grad_logits = base.grad_logits; // already scaled by 1/B per row
        double total = 0.0;
        for (std::size_t i = 0; i < B; ++i) {
            out.per_sample[i] = v[i] * base.per_sample[i];
            total += out.per_sample[i];
            auto row = out.grad_logits.row(i);
            for (double& g : row) g *= v[i];
        }
        out.total = total / static_cast<double>(B);
        return out;
    }

    case LossKind::La:
        return la_loss(logits, labels, spec.tau, require_counts(ctx));

    case LossKind::AlphaCvar:
        // alpha > 1 gives sum upper = 1/alpha < 1; the box validation below
        // rejects it with the ConfigError callers expect.
        return alpha_cvar_loss(logits, labels, spec.alpha);

    case LossKind::LabCvar: {
        const ClassBounds& bounds = require_bounds(ctx);
        const WeightBox box = batch_box(bounds, labels, ctx);
        return worst_case_weighted(logits, labels, box);
    }

    case LossKind::LabCvarLogit: {
        const ClassBounds& bounds = require_bounds(ctx);
        const WeightBox box = batch_box(bounds, labels, ctx);
        Matrix probs;
        const std::vector<double> plain_ce = ce_rows(logits, labels, probs);
        WeightSolution sol = solve_lab_cvar(plain_ce, box);
        LossOutput out = logit_adjusted_weighted_ce(logits, labels, sol.weights,
                                                    LogitAdjustment::from_bounds(bounds));
        // The raw sum carries a factor of about n/B per sample; divide by n
        // so the objective sits at per-sample magnitude like every other
        // kind. Constant positive factor: same minimizer, same direction.
        const double inv_n = 1.0 / static_cast<double>(bounds.n);
        out.total *= inv_n;
        for (double& g : out.grad_logits.data()) g *= inv_n;
        for (double& p : out.per_sample) p *= inv_n;
        out.weights_used = std::move(sol.weights);
        return out;
    }
    }
    throw std::invalid_argument("unknown loss kind");
}

} // namespace labcvar
