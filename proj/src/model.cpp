#include "labcvar/model.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "labcvar/errors.hpp"

namespace labcvar {

namespace {

Matrix affine(const Matrix& x, const MlpModel::Layer& layer) {
    Matrix z = matmul(x, layer.w);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.b[j];
    }
    return z;
}

void relu_inplace(Matrix& m) {
    for (double& v : m.data())
        if (v < 0.0) v = 0.0;
}

std::vector<int> predict(const Matrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = argmax_index(logits.row(i));
    return out;
}

} // namespace

MlpModel MlpModel::init(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                        std::size_t output_dim, Rng& rng) {
    if (input_dim == 0 || output_dim == 0)
        throw std::invalid_argument("model dimensions must be positive");
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    for (std::size_t h : hidden) {
        if (h == 0)
            throw std::invalid_argument("hidden widths must be positive");
        dims.push_back(h);
    }
    dims.push_back(output_dim);

    MlpModel model;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.w = Matrix(dims[l], dims[l + 1]);
        const double s = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (double& v : layer.w.data()) v = rng.normal() * s;
        layer.b.assign(dims[l + 1], 0.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

Matrix MlpModel::forward(const Matrix& x) const {
    ForwardTrace trace;
    return forward_cached(x, trace);
}

Matrix MlpModel::forward_cached(const Matrix& x, ForwardTrace& trace) const {
    if (layers.empty())
        throw std::invalid_argument("model has no layers");
    if (x.cols() != input_dim())
        throw std::invalid_argument("input width does not match the model");
    trace.inputs.clear();
    Matrix h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        trace.inputs.push_back(h);
        h = affine(h, layers[l]);
        if (l + 1 < layers.size()) relu_inplace(h);
    }
    if (!h.all_finite())
        throw std::runtime_error("forward pass produced non-finite logits");
    trace.logits = h;
    return trace.logits;
}

std::vector<MlpModel::Layer> MlpModel::backward(const ForwardTrace& trace,
                                                const Matrix& grad_logits) const {
    if (trace.inputs.size() != layers.size())
        throw std::invalid_argument("forward trace does not match the model");
    std::vector<Layer> grads(layers.size());
    Matrix g = grad_logits;
    for (std::size_t l = layers.size(); l-- > 0;) {
        const Matrix& input = trace.inputs[l];
        grads[l].w = matmul(transpose(input), g);
        grads[l].b.assign(layers[l].b.size(), 0.0);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const auto row = g.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) grads[l].b[j] += row[j];
        }
        if (l > 0) {
            g = matmul(g, transpose(layers[l].w));
            // ReLU mask: the stored input of layer l is the activation that
            // left layer l-1, zero exactly where the unit was clamped.
            for (std::size_t i = 0; i < g.rows(); ++i) {
                const auto act = input.row(i);
                auto row = g.row(i);
                for (std::size_t j = 0; j < row.size(); ++j)
                    if (act[j] <= 0.0) row[j] = 0.0;
            }
        }
    }
    return grads;
}

void MlpModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    char buf[40];
    out << "labcvar-model 1\n" << layers.size() << "\n";
    for (const Layer& layer : layers) {
        out << layer.w.rows() << " " << layer.w.cols() << "\n";
        for (std::size_t i = 0; i < layer.w.rows(); ++i) {
            const auto row = layer.w.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", row[j]);
                out << buf << (j + 1 < row.size() ? " " : "\n");
            }
        }
        for (std::size_t j = 0; j < layer.b.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", layer.b[j]);
            out << buf << (j + 1 < layer.b.size() ? " " : "\n");
        }
    }
    if (!out)
        throw std::runtime_error("failed writing " + path);
}

MlpModel MlpModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "labcvar-model" || version != 1)
        throw std::runtime_error(path + " is not a model checkpoint");
    std::size_t num_layers = 0;
    in >> num_layers;
    MlpModel model;
    for (std::size_t l = 0; l < num_layers; ++l) {
        std::size_t rows = 0, cols = 0;
        in >> rows >> cols;
        Layer layer;
        layer.w = Matrix(rows, cols);
        for (double& v : layer.w.data()) in >> v;
        layer.b.resize(cols);
        for (double& v : layer.b) in >> v;
        if (!in)
            throw std::runtime_error(path + " is truncated");
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty())
        throw std::runtime_error(path + " contains no layers");
    return model;
}

void TrainConfig::validate() const {
    if (epochs < 1)
        throw std::invalid_argument("epochs must be positive");
    if (batch_size == 0)
        throw std::invalid_argument("batch size must be positive");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("momentum must lie in [0, 1)");
    if (weight_decay < 0.0)
        throw std::invalid_argument("weight decay must be non-negative");
    if (lr_decay_epochs.size() != lr_decay_factors.size())
        throw std::invalid_argument("decay epochs and factors must pair up");
    for (double f : lr_decay_factors)
        if (!(f > 0.0))
            throw std::invalid_argument("decay factors must be positive");
}

ClassBounds resolve_bounds(const LossSpec& spec, const std::vector<std::size_t>& counts) {
    if (!spec.needs_bounds())
        throw std::invalid_argument("loss kind carries no class bounds");
    return optimal_bounds(counts, spec.bound_params);
}

TrainResult train(MlpModel model, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const LossSpec& loss, const TrainConfig& config) {
    config.validate();
    loss.validate();
    train_set.validate();
    val_set.validate();
    if (train_set.num_classes() != val_set.num_classes())
        throw std::invalid_argument("train and validation class counts disagree");
    if (model.output_dim() != train_set.num_classes())
        throw std::invalid_argument("model output width must match the class count");
    if (model.input_dim() != train_set.dim())
        throw std::invalid_argument("model input width must match the features");

    // Feasibility resolves before any step so misconfigured bounds cannot
    // waste a training run.
    ClassBounds bounds;
    if (loss.needs_bounds()) bounds = resolve_bounds(loss, train_set.class_counts);

    const int drw_epoch = loss.drw_epoch >= 0 ? loss.drw_epoch : config.drw_epoch;

    TrainResult result;
    Rng shuffle_rng(config.seed);
    std::vector<MlpModel::Layer> velocity;
    for (const auto& layer : model.layers) {
        MlpModel::Layer v;
        v.w = Matrix(layer.w.rows(), layer.w.cols());
        v.b.assign(layer.b.size(), 0.0);
        velocity.push_back(std::move(v));
    }

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    double lr = config.learning_rate;
    int infeasible = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t d = 0; d < config.lr_decay_epochs.size(); ++d)
            if (config.lr_decay_epochs[d] == epoch) lr *= config.lr_decay_factors[d];

        BatchLossContext ctx;
        ctx.class_counts = &train_set.class_counts;
        ctx.bounds = loss.needs_bounds() ? &bounds : nullptr;
        ctx.drw_active = loss.kind == LossKind::LdamDrw && drw_epoch >= 0 && epoch >= drw_epoch;
        ctx.feasibility_fallback = true;
        ctx.infeasible_counter = &infeasible;

        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t b = std::min(config.batch_size, order.size() - start);
            Matrix x(b, train_set.dim());
            std::vector<int> y(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t src = order[start + i];
                const auto from = train_set.features.row(src);
                auto to = x.row(i);
                std::copy(from.begin(), from.end(), to.begin());
                y[i] = train_set.labels[src];
            }

            MlpModel::ForwardTrace trace;
            model.forward_cached(x, trace);
            const LossOutput out = evaluate_loss(loss, trace.logits, y, ctx);
            const std::vector<MlpModel::Layer> grads = model.backward(trace, out.grad_logits);

            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                auto& vel = velocity[l];
                for (std::size_t i = 0; i < layer.w.size(); ++i) {
                    const double g = grads[l].w.data()[i] + config.weight_decay * layer.w.data()[i];
                    vel.w.data()[i] = config.momentum * vel.w.data()[i] + g;
                    layer.w.data()[i] -= lr * vel.w.data()[i];
                }
                for (std::size_t j = 0; j < layer.b.size(); ++j) {
                    const double g = grads[l].b[j] + config.weight_decay * layer.b[j];
                    vel.b[j] = config.momentum * vel.b[j] + g;
                    layer.b[j] -= lr * vel.b[j];
                }
            }
            loss_sum += out.total;
            ++batches;
        }

        const Matrix val_logits = model.forward(val_set.features);
        const std::vector<int> preds = predict(val_logits);
        const EvalReport report =
            evaluate_predictions(preds, val_set.labels, val_set.num_classes(),
                                 train_set.class_counts, 1);

        EpochStats stats;
        stats.epoch = epoch;
        stats.learning_rate = lr;
        stats.mean_train_loss = loss_sum / static_cast<double>(batches);
        stats.val_ber = report.ber;
        stats.infeasible_batches = infeasible;
        result.trace.push_back(stats);
    }

    result.model = std::move(model);
    result.infeasible_batches = infeasible;
    return result;
}

EvalReport evaluate_model(const MlpModel& model, const LabeledDataset& eval_set,
                          const std::vector<std::size_t>& train_counts, int worst_k_k) {
    eval_set.validate();
    const Matrix logits = model.forward(eval_set.features);
    return evaluate_predictions(predict(logits), eval_set.labels, eval_set.num_classes(),
                                train_counts, worst_k_k);
}

double classifier_gradient_norm(const MlpModel& model, std::span<const double> x, int label,
                                const LogitAdjustment& adjustment, double weight, int t) {
    Matrix input(1, x.size());
    std::copy(x.begin(), x.end(), input.row(0).begin());
    MlpModel::ForwardTrace trace;
    model.forward_cached(input, trace);
    const auto phi = trace.inputs.back().row(0); // features entering the output layer
    double norm_sq = 0.0;
    for (double v : phi) norm_sq += v * v;
    return gradient_norm_probe(trace.logits.row(0), label, adjustment, weight, t,
                               std::sqrt(norm_sq));
}

} // namespace labcvar
