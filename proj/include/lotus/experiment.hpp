#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lotus/lottery.hpp"
#include "lotus/plot.hpp"
#include "lotus/pruning.hpp"

namespace lotus {

// Exit codes: the complete error surface of every command.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | cifar10
    std::string dir;
    int64_t limit = 0;  // 0 = all
    int n_train = 512;
    int n_eval = 256;
    double noise_sigma = 0.1;
};

struct LotteryConfig {
    double drop_fraction = 0.10;
    std::string score_policy = "last";  // last | mean_all
    std::string init = "fresh";         // fresh | pruned
    int viz_samples = 2;
};

struct SweepConfig {
    std::vector<double> levels;  // defaults to the 1%..50% grid
    double tolerance = 0.01;
    std::string scope = "global";  // global | per_layer
};

struct ExperimentConfig {
    uint64_t seed = 42;
    std::string output_dir = "out";
    int epochs = 8;
    bool deterministic_timing = true;
    DatasetConfig dataset;
    ViTConfig model;
    OptimizerConfig optimizer;
    SweepConfig sweep;
    ISPConfig isp;
    LotteryConfig lottery;

    static ExperimentConfig defaults(const std::string& dataset_kind = "synthetic");
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;

    PruneScope prune_scope() const;
    LotterySpec lottery_spec() const;
};

// the 1%-to-50% sweep grid
std::vector<double> default_sweep_levels();

// Commands. Each writes its artifacts plus run.json into output_dir and maps
// every failure onto an exit code (0 ok, 1 config, 2 io, 3 numeric).
int cmd_baseline(const ExperimentConfig& cfg);
int cmd_sweep(const ExperimentConfig& cfg, const std::string& checkpoint_path);
int cmd_lottery(const ExperimentConfig& cfg, const std::string& checkpoint_path);
int cmd_issp(const ExperimentConfig& cfg, const std::string& checkpoint_path);
int cmd_plot(const std::string& csv_path, const std::string& kind, const std::string& out_path);

// Resolved-config fields whose values are project choices rather than
// published numbers; echoed in run.json.
const std::vector<std::string>& non_paper_default_fields();

}  // namespace lotus
