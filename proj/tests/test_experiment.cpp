#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "labcvar/errors.hpp"
#include "labcvar/experiment.hpp"
#include "labcvar/rng.hpp"

using labcvar::ExperimentConfig;
using labcvar::ExperimentResult;
using labcvar::LossKind;

namespace {

std::string small_config_text(const std::string& extra_losses = "") {
    return std::string(R"({
      "dataset": {"type": "synthetic", "classes": 4, "dim": 4, "mean_radius": 3.5,
                  "sigma": 1.0, "ratio": 12, "n_max": 120, "n_val_per_class": 40},
      "model": {"hidden": []},
      "train": {"epochs": 4, "batch_size": 64, "learning_rate": 0.1,
                "momentum": 0.9, "weight_decay": 0.0002,
                "lr_decay_epochs": [3], "lr_decay_factors": [0.1]},
      "losses": [
        {"kind": "erm", "name": "erm"},
        {"kind": "lab_cvar", "name": "labcvar", "k": 0.5, "eta": 0.25, "tau1": "auto"})") +
           extra_losses + R"(
      ],
      "seeds": [1, 2],
      "worst_k": 2
    })";
}

std::filesystem::path fresh_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("labcvar_exp_" + tag);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

} // namespace

TEST_CASE("config parsing covers kinds, auto tau1 and defaults") {
    const ExperimentConfig config = ExperimentConfig::from_json_text(small_config_text());
    REQUIRE(config.losses.size() == 2);
    CHECK(config.losses[0].name == "erm");
    CHECK(config.losses[1].spec.kind == LossKind::LabCvar);
    CHECK(config.losses[1].spec.bound_params.tau1_auto());
    CHECK(config.losses[1].spec.bound_params.eta == doctest::Approx(0.25));
    CHECK(config.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(config.train.epochs == 4);
    CHECK(config.dataset.synth.num_classes == 4);
    CHECK(config.output_dir.empty());

    const std::string hash = config.config_hash();
    CHECK(hash.size() == 16);
    CHECK(hash == ExperimentConfig::from_json_text(small_config_text()).config_hash());

    ExperimentConfig other = config;
    other.train.learning_rate = 0.2;
    CHECK(other.config_hash() != hash);
}

TEST_CASE("config parsing rejects malformed descriptions") {
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"dataset\":{\"type\":\"synthetic\"}}"),
                    labcvar::ConfigError); // no losses
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                        R"({"dataset":{"type":"magic"},"losses":[{"kind":"erm"}]})"),
                    labcvar::ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                        R"({"dataset":{"type":"synthetic"},"losses":[{"kind":"nope"}]})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text(
            R"({"dataset":{"type":"synthetic"},"losses":[{"kind":"erm"},{"kind":"erm"}]})"),
        labcvar::ConfigError); // duplicate default names
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                        R"({"dataset":{"type":"synthetic"},"losses":[{"kind":"focal"}]})"),
                    labcvar::ConfigError); // focal without gamma
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{nope"), nlohmann::json::parse_error);
    CHECK_THROWS_AS(ExperimentConfig::from_json_file("/nonexistent/config.json"),
                    std::runtime_error);
}

TEST_CASE("grid section of the config expands cross products") {
    const std::string text = R"({
      "dataset": {"type": "synthetic"},
      "losses": [{"kind": "lab_cvar"}],
      "grid": {"lab_cvar": {"k": [0.5, 1.0], "eta": [0.25]}}
    })";
    const ExperimentConfig config = ExperimentConfig::from_json_text(text);
    const auto& space = config.grid_overrides.at("lab_cvar");
    REQUIRE(space.size() == 2);
    CHECK(space[0].bound_params.k == doctest::Approx(0.5));
    CHECK(space[1].bound_params.k == doctest::Approx(1.0));
    CHECK(space[0].bound_params.eta == doctest::Approx(0.25));
    CHECK(space[1].bound_params.eta == doctest::Approx(0.25));
}

TEST_CASE("experiment produces loss-major rows, aggregates, and byte-identical reruns") {
    ExperimentConfig config = ExperimentConfig::from_json_text(small_config_text());
    const auto dir_a = fresh_dir("a");
    const auto dir_b = fresh_dir("b");

    config.output_dir = dir_a.string();
    const ExperimentResult first = labcvar::run_experiment(config);
    config.output_dir = dir_b.string();
    const ExperimentResult second = labcvar::run_experiment(config);

    REQUIRE(first.rows.size() == 4); // 2 losses x 2 seeds
    CHECK(first.rows[0].loss == "erm");
    CHECK(first.rows[0].seed == 1);
    CHECK(first.rows[1].loss == "erm");
    CHECK(first.rows[1].seed == 2);
    CHECK(first.rows[2].loss == "labcvar");
    CHECK(first.rows[3].loss == "labcvar");
    REQUIRE(first.aggregates.size() == 2);
    CHECK(first.aggregates[0].runs == 2);
    CHECK(first.rows[0].ratio == doctest::Approx(12.0));
    CHECK(first.rows[0].report.worst_k_k == 2);

    REQUIRE(first.bound_notes.size() == 1);
    CHECK(first.bound_notes[0].loss == "labcvar");
    CHECK(first.bound_notes[0].tau1 > first.bound_notes[0].feasible_lo);
    CHECK(first.bound_notes[0].tau1 < first.bound_notes[0].feasible_hi);

    CHECK(slurp(dir_a / "results.csv") == slurp(dir_b / "results.csv"));
    CHECK(slurp(dir_a / "summary.json") == slurp(dir_b / "summary.json"));
    CHECK(first.config_hash == second.config_hash);

    // Same seeds mean both losses saw identical datasets and initial models:
    // paired comparisons, not independent draws.
    CHECK(first.rows[0].report.per_class_error.size() == 4);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("written aggregate rows recompute exactly from the written run rows") {
    ExperimentConfig config = ExperimentConfig::from_json_text(small_config_text());
    const auto dir = fresh_dir("agg");
    config.output_dir = dir.string();
    labcvar::run_experiment(config);

    std::ifstream in(dir / "results.csv");
    REQUIRE(in);
    std::string line;
    std::getline(in, line); // header
    const std::vector<std::string> header = split_csv_line(line);
    REQUIRE(header.size() == 17);

    struct Run {
        double ber, wer, wk;
    };
    std::map<std::string, std::vector<Run>> runs;
    std::map<std::string, std::vector<std::string>> agg;
    while (std::getline(in, line)) {
        const auto cells = split_csv_line(line);
        REQUIRE(cells.size() == 17);
        if (cells[0] == "run")
            runs[cells[2]].push_back(
                {std::stod(cells[5]), std::stod(cells[6]), std::stod(cells[7])});
        else
            agg[cells[2]] = cells;
    }
    REQUIRE(runs.size() == 2);
    REQUIRE(agg.size() == 2);

    for (const auto& [loss, rs] : runs) {
        const auto& cells = agg.at(loss);
        double bm = 0.0, wm = 0.0, km = 0.0;
        for (const Run& r : rs) {
            bm += r.ber;
            wm += r.wer;
            km += r.wk;
        }
        bm /= rs.size();
        wm /= rs.size();
        km /= rs.size();
        double bv = 0.0;
        for (const Run& r : rs) bv += (r.ber - bm) * (r.ber - bm);
        const double bs = std::sqrt(bv / rs.size());

        CHECK(std::stod(cells[5]) == doctest::Approx(bm).epsilon(1e-14));
        CHECK(std::stod(cells[6]) == doctest::Approx(wm).epsilon(1e-14));
        CHECK(std::stod(cells[7]) == doctest::Approx(km).epsilon(1e-14));
        CHECK(std::stod(cells[13]) == doctest::Approx(bs).epsilon(1e-12));
        CHECK(cells[16] == "2");
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("infeasible bound configurations abort before any training") {
    ExperimentConfig config = ExperimentConfig::from_json_text(small_config_text());
    config.losses[1].spec.bound_params.tau1 = 1e9;
    CHECK_THROWS_AS(labcvar::run_experiment(config), labcvar::ConfigError);

    ExperimentConfig bad_alpha = ExperimentConfig::from_json_text(small_config_text());
    bad_alpha.losses[1].spec = {};
    bad_alpha.losses[1].spec.kind = LossKind::AlphaCvar;
    bad_alpha.losses[1].spec.alpha = 2.0;
    CHECK_THROWS_AS(labcvar::run_experiment(bad_alpha), labcvar::ConfigError);
}

TEST_CASE("csv-backed experiments run end to end") {
    const auto csv = std::filesystem::temp_directory_path() / "labcvar_exp_data.csv";
    {
        std::ofstream out(csv);
        labcvar::Rng rng(33);
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 40; ++i)
                out << (j + rng.normal() * 0.5) << "," << (j * 2 + rng.normal() * 0.5) << ","
                    << j << "\n";
    }
    const std::string text = std::string(R"({
      "dataset": {"type": "csv", "path": ")") + csv.string() + R"(",
                  "val_per_class": 10, "ratio": 3.0},
      "train": {"epochs": 3, "batch_size": 32},
      "losses": [{"kind": "erm"}],
      "seeds": [5]
    })";
    const ExperimentConfig config = ExperimentConfig::from_json_text(text);
    const ExperimentResult result = labcvar::run_experiment(config);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].ratio == doctest::Approx(3.0));
    CHECK(result.rows[0].report.per_class_error.size() == 3);
    std::filesystem::remove(csv);
}

TEST_CASE("imbalance sweeps keep one row per loss-ratio pair with worse tails at higher ratio") {
    const std::string text = R"({
      "dataset": {"type": "synthetic", "classes": 4, "dim": 4, "mean_radius": 2.5,
                  "sigma": 1.5, "n_max": 240, "n_val_per_class": 60},
      "train": {"epochs": 6, "batch_size": 64, "learning_rate": 0.1},
      "losses": [{"kind": "erm"}],
      "seeds": [1, 2, 3]
    })";
    const ExperimentConfig config = ExperimentConfig::from_json_text(text);
    const ExperimentResult result = labcvar::run_sweep(config, {1.0, 40.0});
    REQUIRE(result.aggregates.size() == 2);
    CHECK(result.aggregates[0].ratio == doctest::Approx(1.0));
    CHECK(result.aggregates[1].ratio == doctest::Approx(40.0));
    REQUIRE(result.rows.size() == 6);

    // Long-tailed training hurts the balanced error; drastic imbalance must
    // not come out better than the balanced baseline.
    CHECK(result.aggregates[0].ber_mean <= result.aggregates[1].ber_mean + 0.01);

    // Csv datasets cannot sweep the ratio.
    ExperimentConfig csv_cfg = config;
    csv_cfg.dataset.type = labcvar::DatasetSpec::Type::Csv;
    CHECK_THROWS_AS(labcvar::run_sweep(csv_cfg, {1.0, 2.0}), labcvar::ConfigError);
    CHECK_THROWS_AS(labcvar::run_sweep(config, {}), labcvar::ConfigError);
}

TEST_CASE("balanced data is a null case: worst-case weighting tracks the mean loss") {
    const std::string text = R"({
      "dataset": {"type": "synthetic", "classes": 4, "dim": 4, "mean_radius": 3.5,
                  "sigma": 1.0, "ratio": 1, "n_max": 150, "n_val_per_class": 50},
      "train": {"epochs": 6, "batch_size": 64, "learning_rate": 0.1},
      "losses": [{"kind": "erm", "name": "erm"},
                 {"kind": "lab_cvar", "name": "labcvar", "k": 0.5, "eta": 0.25}],
      "seeds": [1, 2]
    })";
    const ExperimentResult result =
        labcvar::run_experiment(ExperimentConfig::from_json_text(text));
    REQUIRE(result.aggregates.size() == 2);
    CHECK(std::fabs(result.aggregates[0].ber_mean - result.aggregates[1].ber_mean) < 0.05);
}

TEST_CASE("grid search ranks candidates by mean BER and skips infeasible ones") {
    ExperimentConfig config = ExperimentConfig::from_json_text(small_config_text());
    config.losses.erase(config.losses.begin()); // keep only the lab_cvar entry

    labcvar::LossSpec good = config.losses[0].spec;
    labcvar::LossSpec bad = good;
    bad.bound_params.tau1 = 1e9; // infeasible for this dataset
    labcvar::LossSpec sharp = good;
    sharp.bound_params.k = 2.0;
    config.grid_overrides["lab_cvar"] = {bad, good, sharp};

    const labcvar::GridResult grid = labcvar::run_grid(config);
    REQUIRE(grid.entries.size() == 3);
    CHECK(grid.entries[0].status == "infeasible");
    CHECK_FALSE(grid.entries[0].best);
    CHECK(grid.entries[1].status == "ok");
    CHECK(grid.entries[2].status == "ok");
    CHECK((grid.entries[1].best || grid.entries[2].best));
    const auto& winner = grid.entries[1].best ? grid.entries[1] : grid.entries[2];
    const auto& loser = grid.entries[1].best ? grid.entries[2] : grid.entries[1];
    CHECK(winner.ber_mean <= loser.ber_mean);
}

TEST_CASE("built-in grid spaces have the expected shape") {
    labcvar::LossSpec base;
    base.kind = LossKind::Erm;
    CHECK(labcvar::default_grid_space(base, 40).size() == 1);

    base.kind = LossKind::CbRw;
    base.gamma = 0.9;
    CHECK(labcvar::default_grid_space(base, 40).size() == 7);

    base.kind = LossKind::Focal;
    CHECK(labcvar::default_grid_space(base, 40).size() == 8);

    base.kind = LossKind::LdamDrw;
    base.margin_scale = 0.5;
    const auto drw = labcvar::default_grid_space(base, 40);
    CHECK(drw.size() == 16);
    CHECK(drw[0].drw_epoch == 24); // 0.6 * 40
    CHECK(drw[1].drw_epoch == 32); // 0.8 * 40

    base.kind = LossKind::LabCvar;
    base.bound_params = {0.5, 0.0, 0.5};
    const auto lc = labcvar::default_grid_space(base, 40);
    CHECK(lc.size() == 90); // 3 tau1 x 5 eta x 6 k
    CHECK(lc[0].bound_params.tau1 == doctest::Approx(1.0));
    CHECK(lc[0].bound_params.eta == doctest::Approx(0.5));
    CHECK(lc[0].bound_params.k == doctest::Approx(0.2));
}
