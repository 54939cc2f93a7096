#include "labcvar/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "labcvar/errors.hpp"

namespace labcvar {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out)
            throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

double parse_tau1(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "auto") return 0.0;
        throw ConfigError("tau1 must be a positive number or \"auto\"");
    }
    return j.get<double>();
}

LossSpec parse_loss(const json& j, std::string& name_out) {
    if (!j.contains("kind"))
        throw ConfigError("every loss entry needs a \"kind\"");
    LossSpec spec;
    spec.kind = loss_kind_from_name(j.at("kind").get<std::string>());
    switch (spec.kind) {
    case LossKind::CbRw:
    case LossKind::Focal:
        if (!j.contains("gamma"))
            throw ConfigError(std::string(loss_kind_name(spec.kind)) + " requires \"gamma\"");
        spec.gamma = j.at("gamma").get<double>();
        break;
    case LossKind::Ldam:
    case LossKind::LdamDrw:
        if (!j.contains("c"))
            throw ConfigError(std::string(loss_kind_name(spec.kind)) + " requires \"c\"");
        spec.margin_scale = j.at("c").get<double>();
        spec.drw_epoch = j.value("drw_epoch", -1);
        break;
    case LossKind::La:
        spec.tau = j.value("tau", 1.0);
        break;
    case LossKind::AlphaCvar:
        spec.alpha = j.value("alpha", 0.5);
        break;
    case LossKind::LabCvar:
    case LossKind::LabCvarLogit:
        spec.bound_params.k = j.value("k", 0.5);
        spec.bound_params.eta = j.value("eta", 0.5);
        spec.bound_params.tau1 = j.contains("tau1") ? parse_tau1(j.at("tau1")) : 0.0;
        break;
    default:
        break;
    }
    spec.validate();
    name_out = j.value("name", spec.display_name());
    return spec;
}

json loss_to_json(const NamedLoss& loss) {
    json j;
    j["kind"] = loss_kind_name(loss.spec.kind);
    j["name"] = loss.name;
    switch (loss.spec.kind) {
    case LossKind::CbRw:
    case LossKind::Focal:
        j["gamma"] = loss.spec.gamma;
        break;
    case LossKind::Ldam:
    case LossKind::LdamDrw:
        j["c"] = loss.spec.margin_scale;
        j["drw_epoch"] = loss.spec.drw_epoch;
        break;
    case LossKind::La:
        j["tau"] = loss.spec.tau;
        break;
    case LossKind::AlphaCvar:
        j["alpha"] = loss.spec.alpha;
        break;
    case LossKind::LabCvar:
    case LossKind::LabCvarLogit:
        j["k"] = loss.spec.bound_params.k;
        j["eta"] = loss.spec.bound_params.eta;
        if (loss.spec.bound_params.tau1_auto())
            j["tau1"] = "auto";
        else
            j["tau1"] = loss.spec.bound_params.tau1;
        break;
    default:
        break;
    }
    return j;
}

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig config;

    const json& d = j.at("dataset");
    const std::string type = d.value("type", "synthetic");
    if (type == "synthetic") {
        config.dataset.type = DatasetSpec::Type::Synthetic;
        SynthConfig& s = config.dataset.synth;
        s.num_classes = d.value("classes", s.num_classes);
        s.dim = d.value("dim", s.dim);
        s.mean_radius = d.value("mean_radius", s.mean_radius);
        s.sigma = d.value("sigma", s.sigma);
        s.ratio = d.value("ratio", s.ratio);
        s.n_max = d.value("n_max", s.n_max);
        s.n_val_per_class = d.value("n_val_per_class", s.n_val_per_class);
    } else if (type == "csv") {
        config.dataset.type = DatasetSpec::Type::Csv;
        if (!d.contains("path"))
            throw ConfigError("csv dataset requires \"path\"");
        config.dataset.csv_path = d.at("path").get<std::string>();
        config.dataset.csv_has_header = d.value("has_header", false);
        config.dataset.csv_val_path = d.value("val_path", std::string());
        config.dataset.csv_val_per_class = d.value("val_per_class", std::size_t{0});
        config.dataset.csv_ratio = d.value("ratio", 1.0);
        if (config.dataset.csv_val_path.empty() && config.dataset.csv_val_per_class == 0)
            throw ConfigError("csv dataset needs \"val_path\" or \"val_per_class\"");
    } else {
        throw ConfigError("unknown dataset type: " + type);
    }

    if (j.contains("model"))
        config.model.hidden = j.at("model").value("hidden", std::vector<std::size_t>());

    if (j.contains("train")) {
        const json& t = j.at("train");
        TrainConfig& tc = config.train;
        tc.epochs = t.value("epochs", tc.epochs);
        tc.batch_size = t.value("batch_size", tc.batch_size);
        tc.learning_rate = t.value("learning_rate", tc.learning_rate);
        tc.momentum = t.value("momentum", tc.momentum);
        tc.weight_decay = t.value("weight_decay", tc.weight_decay);
        tc.lr_decay_epochs = t.value("lr_decay_epochs", tc.lr_decay_epochs);
        tc.lr_decay_factors = t.value("lr_decay_factors", tc.lr_decay_factors);
        tc.drw_epoch = t.value("drw_epoch", tc.drw_epoch);
    }

    if (!j.contains("losses") || !j.at("losses").is_array() || j.at("losses").empty())
        throw ConfigError("config requires a non-empty \"losses\" array");
    for (const json& lj : j.at("losses")) {
        NamedLoss named;
        named.spec = parse_loss(lj, named.name);
        config.losses.push_back(std::move(named));
    }

    config.seeds = j.value("seeds", std::vector<std::uint64_t>{1});
    config.output_dir = j.value("output_dir", std::string());
    config.worst_k_k = j.value("worst_k", 0);

    if (j.contains("grid")) {
        for (const auto& [kind_name, space] : j.at("grid").items()) {
            const LossKind kind = loss_kind_from_name(kind_name);
            LossSpec base;
            for (const NamedLoss& named : config.losses)
                if (named.spec.kind == kind) base = named.spec;
            std::vector<LossSpec> specs;
            // Cross product over the listed parameter arrays, last axis fastest.
            specs.push_back(base);
            for (const auto& [param, values] : space.items()) {
                std::vector<LossSpec> next;
                for (const LossSpec& s : specs)
                    for (const json& v : values) {
                        LossSpec c = s;
                        if (param == "gamma") c.gamma = v.get<double>();
                        else if (param == "c") c.margin_scale = v.get<double>();
                        else if (param == "tau") c.tau = v.get<double>();
                        else if (param == "alpha") c.alpha = v.get<double>();
                        else if (param == "k") c.bound_params.k = v.get<double>();
                        else if (param == "eta") c.bound_params.eta = v.get<double>();
                        else if (param == "tau1") c.bound_params.tau1 = parse_tau1(v);
                        else if (param == "drw_epoch") c.drw_epoch = v.get<int>();
                        else throw ConfigError("unknown grid parameter: " + param);
                        next.push_back(c);
                    }
                specs = std::move(next);
            }
            for (LossSpec& s : specs) s.validate();
            config.grid_overrides[kind_name] = std::move(specs);
        }
    }

    config.validate();
    return config;
}

double run_ratio(const DatasetSpec& spec, const LabeledDataset& train_set) {
    if (spec.type == DatasetSpec::Type::Synthetic) return spec.synth.ratio;
    const auto& c = train_set.class_counts;
    return static_cast<double>(c.back()) / static_cast<double>(c.front());
}

struct BuiltData {
    LabeledDataset train;
    LabeledDataset val;
};

/// Re-maps a separately loaded validation file onto the training file's
/// class indexing. The file must cover the same labels and be balanced so
/// it satisfies the dataset ordering convention under any permutation.
LabeledDataset align_validation(const CsvLoadResult& train_loaded, const CsvLoadResult& val_loaded) {
    if (val_loaded.label_map.size() != train_loaded.label_map.size())
        throw ConfigError("validation file does not cover the training classes");
    const std::size_t L = train_loaded.label_map.size();
    std::vector<int> remap(L, -1); // val index -> train index
    for (const auto& [orig, v_idx] : val_loaded.label_map) {
        const auto it = train_loaded.label_map.find(orig);
        if (it == train_loaded.label_map.end())
            throw ConfigError("validation file contains unseen label " + std::to_string(orig));
        remap[v_idx] = it->second;
    }
    const std::size_t per_class = val_loaded.dataset.class_counts[0];
    for (std::size_t c : val_loaded.dataset.class_counts)
        if (c != per_class)
            throw ConfigError("explicit validation files must be balanced across classes");

    LabeledDataset val = val_loaded.dataset;
    for (int& y : val.labels) y = remap[y];
    val.class_counts.assign(L, per_class);
    val.validate();
    return val;
}

BuiltData build_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0));
    if (spec.type == DatasetSpec::Type::Synthetic) {
        auto [train, val] = synth_gaussian_longtail(spec.synth, rng);
        return {std::move(train), std::move(val)};
    }

    const CsvLoadResult loaded = load_csv(spec.csv_path, spec.csv_has_header);
    BuiltData data;
    if (!spec.csv_val_path.empty()) {
        data.train = loaded.dataset;
        data.val = align_validation(loaded, load_csv(spec.csv_val_path, spec.csv_has_header));
    } else {
        auto [train, val] = split_balanced_validation(loaded.dataset, spec.csv_val_per_class, rng);
        data.train = std::move(train);
        data.val = std::move(val);
    }
    if (spec.csv_ratio > 1.0) {
        const auto& c = data.train.class_counts;
        if (c.front() != c.back())
            throw ConfigError("csv ratio downsampling requires a balanced training split");
        data.train = downsample_exponential(data.train, spec.csv_ratio, rng);
    }
    return data;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size()));
}

std::vector<AggregateRow> aggregate_rows(const std::vector<RunRow>& rows) {
    // Preserve first-appearance order of (loss, ratio) pairs.
    std::vector<AggregateRow> aggs;
    for (const RunRow& row : rows) {
        const bool seen = std::any_of(aggs.begin(), aggs.end(), [&](const AggregateRow& a) {
            return a.loss == row.loss && a.ratio == row.ratio;
        });
        if (seen) continue;

        std::vector<double> ber, wer, wk;
        std::array<std::vector<double>, 3> group;
        for (const RunRow& r : rows) {
            if (r.loss != row.loss || r.ratio != row.ratio) continue;
            ber.push_back(r.report.ber);
            wer.push_back(r.report.wer);
            wk.push_back(r.report.worst_k_value);
            for (int g = 0; g < 3; ++g)
                if (r.report.groups[g]) group[g].push_back(r.report.groups[g]->mean);
        }
        AggregateRow a;
        a.loss = row.loss;
        a.ratio = row.ratio;
        a.runs = ber.size();
        a.ber_mean = mean_of(ber);
        a.ber_std = stddev_of(ber, a.ber_mean);
        a.wer_mean = mean_of(wer);
        a.wer_std = stddev_of(wer, a.wer_mean);
        a.worst_k_mean = mean_of(wk);
        a.worst_k_std = stddev_of(wk, a.worst_k_mean);
        for (int g = 0; g < 3; ++g)
            if (!group[g].empty()) a.group_mean[g] = mean_of(group[g]);
        aggs.push_back(std::move(a));
    }
    return aggs;
}

std::string results_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "row_type,config,loss,ratio,seed,ber,wer,worst_k,err_many,err_medium,err_few,"
           "train_loss,infeasible_batches,ber_std,wer_std,worst_k_std,runs\n";
    const auto group_cell = [](const std::optional<GroupStats>& g) {
        return g ? fmt(g->mean) : std::string();
    };
    for (const RunRow& r : result.rows) {
        out << "run," << result.config_hash << ',' << csv_field(r.loss) << ',' << fmt(r.ratio) << ','
            << r.seed << ',' << fmt(r.report.ber) << ',' << fmt(r.report.wer) << ','
            << fmt(r.report.worst_k_value) << ',' << group_cell(r.report.groups[0]) << ','
            << group_cell(r.report.groups[1]) << ',' << group_cell(r.report.groups[2]) << ','
            << fmt(r.final_train_loss) << ',' << r.infeasible_batches << ",,,,\n";
    }
    const auto opt_cell = [](const std::optional<double>& v) {
        return v ? fmt(*v) : std::string();
    };
    for (const AggregateRow& a : result.aggregates) {
        out << "aggregate," << result.config_hash << ',' << csv_field(a.loss) << ',' << fmt(a.ratio) << ",,"
            << fmt(a.ber_mean) << ',' << fmt(a.wer_mean) << ',' << fmt(a.worst_k_mean) << ','
            << opt_cell(a.group_mean[0]) << ',' << opt_cell(a.group_mean[1]) << ','
            << opt_cell(a.group_mean[2]) << ",,," << fmt(a.ber_std) << ',' << fmt(a.wer_std)
            << ',' << fmt(a.worst_k_std) << ',' << a.runs << "\n";
    }
    return out.str();
}

json summary_json(const ExperimentConfig& config, const ExperimentResult& result) {
    json s;
    s["config_hash"] = result.config_hash;
    s["config"] = json::parse(config.canonical_json());
    s["aggregates"] = json::array();
    for (const AggregateRow& a : result.aggregates) {
        json ja;
        ja["loss"] = a.loss;
        ja["ratio"] = a.ratio;
        ja["runs"] = a.runs;
        ja["ber_mean"] = a.ber_mean;
        ja["ber_std"] = a.ber_std;
        ja["wer_mean"] = a.wer_mean;
        ja["wer_std"] = a.wer_std;
        ja["worst_k_mean"] = a.worst_k_mean;
        ja["worst_k_std"] = a.worst_k_std;
        for (int g = 0; g < 3; ++g)
            if (a.group_mean[g])
                ja[std::string("err_") + group_name(static_cast<Group>(g))] = *a.group_mean[g];
        s["aggregates"].push_back(std::move(ja));
    }
    s["bounds"] = json::array();
    for (const BoundNote& n : result.bound_notes) {
        json jn;
        jn["loss"] = n.loss;
        jn["tau1"] = n.tau1;
        jn["feasible_tau1"] = {n.feasible_lo, n.feasible_hi};
        s["bounds"].push_back(std::move(jn));
    }
    return s;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    if (config.output_dir.empty()) return;
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);
    atomic_write(dir / "results.csv", results_csv(result));
    atomic_write(dir / "summary.json", summary_json(config, result).dump(2) + "\n");
}

ExperimentResult run_single(const ExperimentConfig& config) {
    config.validate();

    std::vector<BuiltData> data;
    data.reserve(config.seeds.size());
    for (std::uint64_t seed : config.seeds) data.push_back(build_dataset(config.dataset, seed));

    const LabeledDataset& first_train = data.front().train;
    const std::size_t L = first_train.num_classes();
    const int wk = config.worst_k_k > 0 ? config.worst_k_k
                                        : static_cast<int>(std::min<std::size_t>(20, L));
    const double ratio = run_ratio(config.dataset, first_train);

    ExperimentResult result;
    result.config_hash = config.config_hash();

    // All feasibility surfaces before any training run.
    for (const NamedLoss& named : config.losses) {
        if (named.spec.needs_bounds()) {
            resolve_bounds(named.spec, first_train.class_counts);
            const BoundParams& p = named.spec.bound_params;
            const TauRange range = feasible_tau_range(first_train.class_counts, p.k, p.eta);
            BoundNote note;
            note.loss = named.name;
            note.tau1 = p.tau1_auto() ? range.hi * std::sqrt(p.eta) : p.tau1;
            note.feasible_lo = range.lo;
            note.feasible_hi = range.hi;
            result.bound_notes.push_back(note);
        }
        if (named.spec.kind == LossKind::AlphaCvar && named.spec.alpha > 1.0)
            throw ConfigError("alpha_cvar with alpha > 1 admits no weight vector");
    }

    for (const NamedLoss& named : config.losses) {
        for (std::size_t si = 0; si < config.seeds.size(); ++si) {
            const std::uint64_t seed = config.seeds[si];
            Rng init_rng(mix_seed(seed, 1));
            MlpModel model = MlpModel::init(data[si].train.dim(), config.model.hidden, L, init_rng);
            TrainConfig tc = config.train;
            tc.seed = mix_seed(seed, 2);
            TrainResult trained = train(std::move(model), data[si].train, data[si].val,
                                        named.spec, tc);
            RunRow row;
            row.loss = named.name;
            row.seed = seed;
            row.ratio = ratio;
            row.report = evaluate_model(trained.model, data[si].val, data[si].train.class_counts, wk);
            row.final_train_loss = trained.trace.back().mean_train_loss;
            row.infeasible_batches = trained.infeasible_batches;
            result.rows.push_back(std::move(row));
        }
    }
    result.aggregates = aggregate_rows(result.rows);
    return result;
}

} // namespace

void ExperimentConfig::validate() const {
    if (losses.empty())
        throw ConfigError("at least one loss is required");
    if (seeds.empty())
        throw ConfigError("at least one seed is required");
    for (std::size_t a = 0; a < losses.size(); ++a) {
        losses[a].spec.validate();
        if (losses[a].name.empty())
            throw ConfigError("loss names must be non-empty");
        for (std::size_t b = a + 1; b < losses.size(); ++b)
            if (losses[a].name == losses[b].name)
                throw ConfigError("duplicate loss name: " + losses[a].name +
                                  " (set \"name\" to disambiguate)");
    }
    train.validate();
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read config " + path);
    json j = json::parse(in);
    return parse_config(j);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    return parse_config(json::parse(text));
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    if (dataset.type == DatasetSpec::Type::Synthetic) {
        j["dataset"] = {{"type", "synthetic"},
                        {"classes", dataset.synth.num_classes},
                        {"dim", dataset.synth.dim},
                        {"mean_radius", dataset.synth.mean_radius},
                        {"sigma", dataset.synth.sigma},
                        {"ratio", dataset.synth.ratio},
                        {"n_max", dataset.synth.n_max},
                        {"n_val_per_class", dataset.synth.n_val_per_class}};
    } else {
        j["dataset"] = {{"type", "csv"},
                        {"path", dataset.csv_path},
                        {"has_header", dataset.csv_has_header},
                        {"val_path", dataset.csv_val_path},
                        {"val_per_class", dataset.csv_val_per_class},
                        {"ratio", dataset.csv_ratio}};
    }
    j["model"] = {{"hidden", model.hidden}};
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"momentum", train.momentum},
                  {"weight_decay", train.weight_decay},
                  {"lr_decay_epochs", train.lr_decay_epochs},
                  {"lr_decay_factors", train.lr_decay_factors},
                  {"drw_epoch", train.drw_epoch}};
    j["losses"] = json::array();
    for (const NamedLoss& loss : losses) j["losses"].push_back(loss_to_json(loss));
    j["seeds"] = seeds;
    j["worst_k"] = worst_k_k;
    return j.dump();
}

std::string ExperimentConfig::config_hash() const {
    const std::string s = canonical_json();
    std::uint64_t h = 1469598103934665603ull; // FNV-1a 64
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result = run_single(config);
    write_outputs(config, result);
    return result;
}

ExperimentResult run_sweep(const ExperimentConfig& config, const std::vector<double>& ratios) {
    if (ratios.empty())
        throw ConfigError("sweep requires at least one ratio");
    if (config.dataset.type != DatasetSpec::Type::Synthetic)
        throw ConfigError("sweep varies the synthetic imbalance ratio; csv datasets are fixed");

    ExperimentResult merged;
    merged.config_hash = config.config_hash();
    for (double ratio : ratios) {
        ExperimentConfig sub = config;
        sub.dataset.synth.ratio = ratio;
        sub.output_dir.clear();
        ExperimentResult part = run_single(sub);
        for (RunRow& r : part.rows) merged.rows.push_back(std::move(r));
        for (BoundNote& n : part.bound_notes) {
            n.loss += "@ratio=" + fmt(ratio);
            merged.bound_notes.push_back(std::move(n));
        }
    }
    merged.aggregates = aggregate_rows(merged.rows);
    write_outputs(config, merged);
    return merged;
}

std::vector<LossSpec> default_grid_space(const LossSpec& base, int epochs) {
    std::vector<LossSpec> out;
    const auto push_gamma = [&](std::initializer_list<double> values) {
        for (double g : values) {
            LossSpec s = base;
            s.gamma = g;
            out.push_back(s);
        }
    };
    switch (base.kind) {
    case LossKind::CbRw:
        push_gamma({0.5, 0.7, 0.8, 0.9, 0.99, 0.999, 0.9999});
        break;
    case LossKind::Focal:
        push_gamma({0.2, 0.5, 0.8, 1.0, 2.0, 5.0, 10.0, 15.0});
        break;
    case LossKind::Ldam:
        for (double c : {0.2, 0.5, 0.8, 1.0, 2.0, 5.0, 10.0, 15.0}) {
            LossSpec s = base;
            s.margin_scale = c;
            out.push_back(s);
        }
        break;
    case LossKind::LdamDrw:
        for (double c : {0.2, 0.5, 0.8, 1.0, 2.0, 5.0, 10.0, 15.0})
            for (double frac : {0.6, 0.8}) {
                LossSpec s = base;
                s.margin_scale = c;
                s.drw_epoch = static_cast<int>(std::llround(frac * epochs));
                out.push_back(s);
            }
        break;
    case LossKind::AlphaCvar:
        for (double a : {0.2, 0.5, 0.8, 1.0, 2.0, 5.0, 10.0, 15.0}) {
            LossSpec s = base;
            s.alpha = a;
            out.push_back(s);
        }
        break;
    case LossKind::LabCvar:
    case LossKind::LabCvarLogit:
        for (double tau1 : {1.0, 2.0, 5.0})
            for (double eta : {1.0 / 2, 1.0 / 3, 1.0 / 6, 1.0 / 11, 1.0 / 16})
                for (double k : {0.2, 0.5, 0.8, 1.0, 2.0, 5.0}) {
                    LossSpec s = base;
                    s.bound_params = {k, tau1, eta};
                    out.push_back(s);
                }
        break;
    default:
        out.push_back(base);
        break;
    }
    return out;
}

GridResult run_grid(const ExperimentConfig& config) {
    config.validate();
    GridResult grid;
    grid.config_hash = config.config_hash();

    for (const NamedLoss& named : config.losses) {
        const std::string kind_name = loss_kind_name(named.spec.kind);
        const auto it = config.grid_overrides.find(kind_name);
        const std::vector<LossSpec> space =
            it != config.grid_overrides.end() ? it->second
                                              : default_grid_space(named.spec, config.train.epochs);
        if (space.empty())
            throw ConfigError("empty grid for " + kind_name);

        std::size_t best_idx = space.size();
        double best_ber = 0.0;
        std::vector<GridEntry> entries;
        for (const LossSpec& candidate : space) {
            GridEntry entry;
            entry.loss_kind = kind_name;
            entry.candidate = candidate.display_name();
            ExperimentConfig sub = config;
            sub.losses = {{candidate.display_name(), candidate}};
            sub.output_dir.clear();
            sub.grid_overrides.clear();
            try {
                const ExperimentResult res = run_single(sub);
                entry.status = "ok";
                entry.runs = res.aggregates.front().runs;
                entry.ber_mean = res.aggregates.front().ber_mean;
                entry.ber_std = res.aggregates.front().ber_std;
                if (best_idx == space.size() || entry.ber_mean < best_ber) {
                    best_idx = entries.size();
                    best_ber = entry.ber_mean;
                }
            } catch (const ConfigError&) {
                entry.status = "infeasible";
            }
            entries.push_back(std::move(entry));
        }
        if (best_idx < entries.size()) entries[best_idx].best = true;
        for (GridEntry& e : entries) grid.entries.push_back(std::move(e));
    }

    if (!config.output_dir.empty()) {
        const std::filesystem::path dir(config.output_dir);
        std::filesystem::create_directories(dir);
        std::ostringstream csv;
        csv << "config,loss,candidate,status,runs,ber_mean,ber_std,best\n";
        for (const GridEntry& e : grid.entries) {
            csv << grid.config_hash << ',' << e.loss_kind << ',' << csv_field(e.candidate) << ','
                << e.status << ',' << e.runs << ','
                << (e.status == "ok" ? fmt(e.ber_mean) : std::string()) << ','
                << (e.status == "ok" ? fmt(e.ber_std) : std::string()) << ','
                << (e.best ? 1 : 0) << "\n";
        }
        atomic_write(dir / "grid.csv", csv.str());

        json s;
        s["config_hash"] = grid.config_hash;
        s["best"] = json::object();
        for (const GridEntry& e : grid.entries)
            if (e.best) s["best"][e.loss_kind] = e.candidate;
        atomic_write(dir / "grid_summary.json", s.dump(2) + "\n");
    }
    return grid;
}

} // namespace labcvar
