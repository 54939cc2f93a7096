// Benchmark driver: trains the configured losses on a long-tailed dataset
// and writes deterministic CSV/JSON result tables.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "labcvar/errors.hpp"
#include "labcvar/experiment.hpp"

namespace {

void print_error(const char* category, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"category", category}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void print_summary(const labcvar::ExperimentResult& result) {
    std::cout << "config " << result.config_hash << "\n";
    std::cout << "loss,ratio,runs,ber_mean,ber_std,wer_mean,worst_k_mean\n";
    for (const labcvar::AggregateRow& a : result.aggregates) {
        std::cout << a.loss << ',' << a.ratio << ',' << a.runs << ',' << fmt4(a.ber_mean) << ','
                  << fmt4(a.ber_std) << ',' << fmt4(a.wer_mean) << ',' << fmt4(a.worst_k_mean)
                  << "\n";
    }
    for (const labcvar::BoundNote& n : result.bound_notes) {
        std::cout << "# " << n.loss << ": tau1=" << n.tau1 << " feasible=[" << n.feasible_lo
                  << ", " << n.feasible_hi << "]\n";
    }
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool no_out = false;
    std::vector<std::uint64_t> seeds;
    std::vector<double> ratios;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool ratios_required) {
    cmd->add_option("-c,--config", args.config_path, "JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("-o,--out", args.out_dir, "output directory (overrides config)");
    cmd->add_flag("--no-out", args.no_out, "compute only, write no files");
    cmd->add_option("--seed", args.seeds, "seed list (overrides config)");
    auto* ratio = cmd->add_option("-r,--ratio", args.ratios,
                                  ratios_required ? "imbalance ratios to sweep"
                                                  : "imbalance ratio (overrides config)");
    if (ratios_required) ratio->required();
}

labcvar::ExperimentConfig load_config(const CommonArgs& args, bool single_ratio_override) {
    labcvar::ExperimentConfig config = labcvar::ExperimentConfig::from_json_file(args.config_path);
    if (!args.out_dir.empty()) config.output_dir = args.out_dir;
    if (args.no_out) config.output_dir.clear();
    if (!args.seeds.empty()) config.seeds = args.seeds;
    if (single_ratio_override && !args.ratios.empty()) {
        if (args.ratios.size() != 1)
            throw std::invalid_argument("this command takes a single --ratio");
        if (config.dataset.type == labcvar::DatasetSpec::Type::Synthetic)
            config.dataset.synth.ratio = args.ratios.front();
        else
            config.dataset.csv_ratio = args.ratios.front();
    }
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"long-tailed classification benchmark (bounded per-sample reweighting)"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, grid_args;
    CLI::App* cmd_run = app.add_subcommand("run", "train every configured loss and report metrics");
    add_common(cmd_run, run_args, false);
    CLI::App* cmd_sweep =
        app.add_subcommand("sweep", "repeat the run across several imbalance ratios");
    add_common(cmd_sweep, sweep_args, true);
    CLI::App* cmd_grid =
        app.add_subcommand("grid", "search each loss's hyperparameter space for the best mean BER");
    add_common(cmd_grid, grid_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("argument", e.what());
        return 2;
    }

    try {
        if (cmd_run->parsed()) {
            print_summary(labcvar::run_experiment(load_config(run_args, true)));
        } else if (cmd_sweep->parsed()) {
            print_summary(labcvar::run_sweep(load_config(sweep_args, false), sweep_args.ratios));
        } else if (cmd_grid->parsed()) {
            const labcvar::GridResult grid = labcvar::run_grid(load_config(grid_args, true));
            std::cout << "config " << grid.config_hash << "\n";
            std::cout << "loss,candidate,status,ber_mean,best\n";
            for (const labcvar::GridEntry& e : grid.entries) {
                std::cout << e.loss_kind << ",\"" << e.candidate << "\"," << e.status << ','
                          << (e.status == "ok" ? fmt4(e.ber_mean) : std::string()) << ','
                          << (e.best ? 1 : 0) << "\n";
            }
        }
        return 0;
    } catch (const labcvar::ParseError& e) {
        print_error("parse", e.what());
        return 2;
    } catch (const labcvar::ConfigError& e) {
        std::string msg = e.what();
        // Surface the repair hint unless the message already spells it out.
        if (e.has_feasible_range() && msg.find("feasible") == std::string::npos)
            msg += " (feasible tau1: [" + std::to_string(e.feasible_lo()) + ", " +
                   std::to_string(e.feasible_hi()) + "])";
        print_error("config", msg);
        return 3;
    } catch (const nlohmann::json::parse_error& e) {
        print_error("parse", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        print_error("argument", e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("io", e.what());
        return 4;
    }
}
