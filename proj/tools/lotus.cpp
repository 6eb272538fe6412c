// Experiment driver: baseline training, sparsity sweep, data lottery
// fine-tuning, the two-round ISSP pipeline, and CSV-to-SVG plotting.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "lotus/experiment.hpp"

namespace fs = std::filesystem;
using lotus::ExperimentConfig;

namespace {

// Every config field is also a flag; flag names mirror the JSON field paths.
struct Overrides {
    std::optional<std::string> config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> epochs;
    std::optional<bool> deterministic_timing;

    std::optional<std::string> dataset_kind, dataset_dir;
    std::optional<int64_t> dataset_limit;
    std::optional<int> n_train, n_eval;
    std::optional<double> noise_sigma;

    std::optional<int> image_size, patch_size, channels, dim, depth, heads, num_classes;
    std::optional<double> mlp_ratio, dropout;

    std::optional<double> lr, beta1, beta2, eps;
    std::optional<int> batch_size;

    std::optional<std::vector<double>> sweep_levels;
    std::optional<double> sweep_tolerance;
    std::optional<std::string> sweep_scope;

    std::optional<double> isp_data_fraction;
    std::optional<int> isp_snapshot_epochs;
    std::optional<std::vector<double>> isp_soup_levels;
    std::optional<double> isp_target_sparsity;

    std::optional<double> lottery_drop_fraction;
    std::optional<std::string> lottery_score_policy, lottery_init;
    std::optional<int> lottery_viz_samples;
};

void add_common_options(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config_path, "JSON config file");
    sub->add_option("--seed", o.seed, "run seed (u64)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--epochs", o.epochs, "training epochs");
    sub->add_option("--deterministic-timing", o.deterministic_timing,
                    "write 0 wall_ms so reruns are byte-identical (default true)");

    sub->add_option("--dataset.kind", o.dataset_kind, "synthetic | cifar10");
    sub->add_option("--dataset.dir", o.dataset_dir, "CIFAR-10 binary directory");
    sub->add_option("--dataset.limit", o.dataset_limit, "max records per split (0 = all)");
    sub->add_option("--dataset.n_train", o.n_train, "synthetic train size");
    sub->add_option("--dataset.n_eval", o.n_eval, "synthetic eval size");
    sub->add_option("--dataset.noise_sigma", o.noise_sigma, "synthetic noise sigma");

    sub->add_option("--model.image_size", o.image_size);
    sub->add_option("--model.patch_size", o.patch_size);
    sub->add_option("--model.channels", o.channels);
    sub->add_option("--model.dim", o.dim);
    sub->add_option("--model.depth", o.depth);
    sub->add_option("--model.heads", o.heads);
    sub->add_option("--model.mlp_ratio", o.mlp_ratio);
    sub->add_option("--model.num_classes", o.num_classes);
    sub->add_option("--model.dropout", o.dropout);

    sub->add_option("--optimizer.lr", o.lr);
    sub->add_option("--optimizer.beta1", o.beta1);
    sub->add_option("--optimizer.beta2", o.beta2);
    sub->add_option("--optimizer.eps", o.eps);
    sub->add_option("--optimizer.batch_size", o.batch_size);

    sub->add_option("--sweep.levels", o.sweep_levels, "sparsity grid")->delimiter(',');
    sub->add_option("--sweep.tolerance", o.sweep_tolerance);
    sub->add_option("--sweep.scope", o.sweep_scope, "global | per_layer");

    sub->add_option("--isp.data_fraction", o.isp_data_fraction);
    sub->add_option("--isp.snapshot_epochs", o.isp_snapshot_epochs);
    sub->add_option("--isp.soup_levels", o.isp_soup_levels)->delimiter(',');
    sub->add_option("--isp.target_sparsity", o.isp_target_sparsity);

    sub->add_option("--lottery.drop_fraction", o.lottery_drop_fraction);
    sub->add_option("--lottery.score_policy", o.lottery_score_policy, "last | mean_all");
    sub->add_option("--lottery.init", o.lottery_init, "fresh | pruned");
    sub->add_option("--lottery.viz_samples", o.lottery_viz_samples);
}

int build_config(const Overrides& o, ExperimentConfig& cfg) {
    std::optional<nlohmann::json> file_json;
    if (o.config_path) {
        std::ifstream in(*o.config_path);
        if (!in) {
            std::cerr << "error: cannot open config file: " << *o.config_path << "\n";
            return lotus::kExitIo;
        }
        try {
            file_json = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            std::cerr << "error: bad config JSON: " << e.what() << "\n";
            return lotus::kExitConfig;
        }
    }

    std::string kind = "synthetic";
    if (file_json && file_json->contains("dataset") && (*file_json)["dataset"].contains("kind"))
        kind = (*file_json)["dataset"]["kind"].get<std::string>();
    if (o.dataset_kind) kind = *o.dataset_kind;

    try {
        cfg = file_json ? ExperimentConfig::from_json(*file_json) : ExperimentConfig::defaults(kind);
        if (!file_json && kind != "synthetic") cfg = ExperimentConfig::defaults(kind);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: bad config JSON: " << e.what() << "\n";
        return lotus::kExitConfig;
    }

    auto set = [](auto& field, const auto& opt) {
        if (opt) field = *opt;
    };
    set(cfg.dataset.kind, o.dataset_kind);
    set(cfg.seed, o.seed);
    set(cfg.output_dir, o.out);
    set(cfg.epochs, o.epochs);
    set(cfg.deterministic_timing, o.deterministic_timing);
    set(cfg.dataset.dir, o.dataset_dir);
    set(cfg.dataset.limit, o.dataset_limit);
    set(cfg.dataset.n_train, o.n_train);
    set(cfg.dataset.n_eval, o.n_eval);
    set(cfg.dataset.noise_sigma, o.noise_sigma);
    set(cfg.model.image_size, o.image_size);
    set(cfg.model.patch_size, o.patch_size);
    set(cfg.model.channels, o.channels);
    set(cfg.model.dim, o.dim);
    set(cfg.model.depth, o.depth);
    set(cfg.model.heads, o.heads);
    set(cfg.model.mlp_ratio, o.mlp_ratio);
    set(cfg.model.num_classes, o.num_classes);
    set(cfg.model.dropout, o.dropout);
    set(cfg.optimizer.lr, o.lr);
    set(cfg.optimizer.beta1, o.beta1);
    set(cfg.optimizer.beta2, o.beta2);
    set(cfg.optimizer.eps, o.eps);
    set(cfg.optimizer.batch_size, o.batch_size);
    set(cfg.sweep.levels, o.sweep_levels);
    set(cfg.sweep.tolerance, o.sweep_tolerance);
    set(cfg.sweep.scope, o.sweep_scope);
    set(cfg.isp.data_fraction, o.isp_data_fraction);
    set(cfg.isp.snapshot_epochs, o.isp_snapshot_epochs);
    set(cfg.isp.soup_levels, o.isp_soup_levels);
    set(cfg.isp.target_sparsity, o.isp_target_sparsity);
    set(cfg.lottery.drop_fraction, o.lottery_drop_fraction);
    set(cfg.lottery.score_policy, o.lottery_score_policy);
    set(cfg.lottery.init, o.lottery_init);
    set(cfg.lottery.viz_samples, o.lottery_viz_samples);
    return lotus::kExitOk;
}

std::string default_checkpoint(const ExperimentConfig& cfg, const std::optional<std::string>& flag) {
    if (flag) return *flag;
    return (fs::path(cfg.output_dir) / "baseline.lots").string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale vision-transformer sparsity and data-lottery lab"};
    app.require_subcommand(1);

    Overrides o;
    std::optional<std::string> checkpoint;

    CLI::App* baseline = app.add_subcommand("baseline", "train the dense scoring model");
    add_common_options(baseline, o);

    CLI::App* sweep = app.add_subcommand("sweep", "one-shot magnitude sparsity sweep");
    add_common_options(sweep, o);
    sweep->add_option("--checkpoint", checkpoint, "trained checkpoint (default <out>/baseline.lots)");

    CLI::App* lottery = app.add_subcommand("lottery", "build patch lottery and fine-tune");
    add_common_options(lottery, o);
    lottery->add_option("--checkpoint", checkpoint, "scoring checkpoint (default <out>/baseline.lots)");

    CLI::App* issp = app.add_subcommand("issp", "two-round prune then lottery fine-tune");
    add_common_options(issp, o);
    issp->add_option("--checkpoint", checkpoint, "trained checkpoint (default <out>/baseline.lots)");

    CLI::App* plot = app.add_subcommand("plot", "render a metrics CSV as SVG");
    std::string plot_csv, plot_kind = "line_by_epoch", plot_svg;
    plot->add_option("--csv", plot_csv, "metrics CSV path")->required();
    plot->add_option("--kind", plot_kind, "line_by_epoch | line_by_sparsity");
    plot->add_option("--svg", plot_svg, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lotus::kExitConfig;
    }

    if (plot->parsed()) return lotus::cmd_plot(plot_csv, plot_kind, plot_svg);

    ExperimentConfig cfg;
    const int rc = build_config(o, cfg);
    if (rc != lotus::kExitOk) return rc;

    if (baseline->parsed()) return lotus::cmd_baseline(cfg);
    if (sweep->parsed()) return lotus::cmd_sweep(cfg, default_checkpoint(cfg, checkpoint));
    if (lottery->parsed()) return lotus::cmd_lottery(cfg, default_checkpoint(cfg, checkpoint));
    if (issp->parsed()) return lotus::cmd_issp(cfg, default_checkpoint(cfg, checkpoint));
    return lotus::kExitConfig;
}
