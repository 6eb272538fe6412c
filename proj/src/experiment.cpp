#include "lotus/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lotus {

std::vector<double> default_sweep_levels() {
    std::vector<double> levels{0.01};
    for (int i = 1; i <= 10; ++i) levels.push_back(0.05 * i);
    return levels;
}

ExperimentConfig ExperimentConfig::defaults(const std::string& dataset_kind) {
    ExperimentConfig c;
    c.dataset.kind = dataset_kind;
    c.sweep.levels = default_sweep_levels();
    if (dataset_kind == "cifar10") {
        c.model.image_size = 32;
        c.model.patch_size = 4;
        c.model.channels = 3;
        c.model.dim = 64;
        c.model.depth = 4;
        c.model.heads = 4;
        c.model.mlp_ratio = 2.0;
        c.model.num_classes = 10;
    }
    return c;
}

namespace {

template <class T>
void get_to_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    std::string kind = "synthetic";
    if (j.contains("dataset") && j["dataset"].contains("kind"))
        kind = j["dataset"]["kind"].get<std::string>();
    ExperimentConfig c = defaults(kind);

    get_to_if(j, "seed", c.seed);
    get_to_if(j, "output_dir", c.output_dir);
    get_to_if(j, "epochs", c.epochs);
    get_to_if(j, "deterministic_timing", c.deterministic_timing);
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        get_to_if(d, "kind", c.dataset.kind);
        get_to_if(d, "dir", c.dataset.dir);
        get_to_if(d, "limit", c.dataset.limit);
        get_to_if(d, "n_train", c.dataset.n_train);
        get_to_if(d, "n_eval", c.dataset.n_eval);
        get_to_if(d, "noise_sigma", c.dataset.noise_sigma);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        get_to_if(m, "image_size", c.model.image_size);
        get_to_if(m, "patch_size", c.model.patch_size);
        get_to_if(m, "channels", c.model.channels);
        get_to_if(m, "dim", c.model.dim);
        get_to_if(m, "depth", c.model.depth);
        get_to_if(m, "heads", c.model.heads);
        get_to_if(m, "mlp_ratio", c.model.mlp_ratio);
        get_to_if(m, "num_classes", c.model.num_classes);
        get_to_if(m, "dropout", c.model.dropout);
    }
    if (j.contains("optimizer")) {
        const json& o = j["optimizer"];
        get_to_if(o, "lr", c.optimizer.lr);
        get_to_if(o, "beta1", c.optimizer.beta1);
        get_to_if(o, "beta2", c.optimizer.beta2);
        get_to_if(o, "eps", c.optimizer.eps);
        get_to_if(o, "batch_size", c.optimizer.batch_size);
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        get_to_if(s, "levels", c.sweep.levels);
        get_to_if(s, "tolerance", c.sweep.tolerance);
        get_to_if(s, "scope", c.sweep.scope);
    }
    if (j.contains("isp")) {
        const json& i = j["isp"];
        get_to_if(i, "data_fraction", c.isp.data_fraction);
        get_to_if(i, "snapshot_epochs", c.isp.snapshot_epochs);
        get_to_if(i, "soup_levels", c.isp.soup_levels);
        get_to_if(i, "target_sparsity", c.isp.target_sparsity);
    }
    if (j.contains("lottery")) {
        const json& l = j["lottery"];
        get_to_if(l, "drop_fraction", c.lottery.drop_fraction);
        get_to_if(l, "score_policy", c.lottery.score_policy);
        get_to_if(l, "init", c.lottery.init);
        get_to_if(l, "viz_samples", c.lottery.viz_samples);
    }
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["epochs"] = epochs;
    j["deterministic_timing"] = deterministic_timing;
    j["dataset"] = {{"kind", dataset.kind},       {"dir", dataset.dir},
                    {"limit", dataset.limit},     {"n_train", dataset.n_train},
                    {"n_eval", dataset.n_eval},   {"noise_sigma", dataset.noise_sigma}};
    j["model"] = {{"image_size", model.image_size}, {"patch_size", model.patch_size},
                  {"channels", model.channels},     {"dim", model.dim},
                  {"depth", model.depth},           {"heads", model.heads},
                  {"mlp_ratio", model.mlp_ratio},   {"num_classes", model.num_classes},
                  {"dropout", model.dropout}};
    j["optimizer"] = {{"lr", optimizer.lr},
                      {"beta1", optimizer.beta1},
                      {"beta2", optimizer.beta2},
                      {"eps", optimizer.eps},
                      {"batch_size", optimizer.batch_size}};
    j["sweep"] = {{"levels", sweep.levels}, {"tolerance", sweep.tolerance}, {"scope", sweep.scope}};
    j["isp"] = {{"data_fraction", isp.data_fraction},
                {"snapshot_epochs", isp.snapshot_epochs},
                {"soup_levels", isp.soup_levels},
                {"target_sparsity", isp.target_sparsity}};
    j["lottery"] = {{"drop_fraction", lottery.drop_fraction},
                    {"score_policy", lottery.score_policy},
                    {"init", lottery.init},
                    {"viz_samples", lottery.viz_samples}};
    return j;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (epochs < 1) throw InputError("config: epochs must be >= 1");
    if (dataset.kind != "synthetic" && dataset.kind != "cifar10")
        throw InputError("config: dataset.kind must be synthetic or cifar10");
    if (dataset.kind == "synthetic" && (dataset.n_train < 1 || dataset.n_eval < 1))
        throw InputError("config: synthetic dataset sizes must be >= 1");
    if (optimizer.batch_size < 1) throw InputError("config: optimizer.batch_size must be >= 1");
    if (optimizer.lr < 0.0) throw InputError("config: optimizer.lr must be >= 0");
    if (sweep.scope != "global" && sweep.scope != "per_layer")
        throw InputError("config: sweep.scope must be global or per_layer");
    if (lottery.score_policy != "last" && lottery.score_policy != "mean_all")
        throw InputError("config: lottery.score_policy must be last or mean_all");
    if (lottery.init != "fresh" && lottery.init != "pruned")
        throw InputError("config: lottery.init must be fresh or pruned");
    if (lottery.drop_fraction < 0.0 || lottery.drop_fraction >= 1.0)
        throw InputError("config: lottery.drop_fraction must be in [0,1)");
    isp.validate();
}

PruneScope ExperimentConfig::prune_scope() const {
    return sweep.scope == "per_layer" ? PruneScope::PerLayer : PruneScope::Global;
}

LotterySpec ExperimentConfig::lottery_spec() const {
    LotterySpec spec;
    spec.drop_fraction = lottery.drop_fraction;
    spec.policy = lottery.score_policy == "mean_all" ? ScorePolicy::MeanAll : ScorePolicy::Last;
    return spec;
}

const std::vector<std::string>& non_paper_default_fields() {
    static const std::vector<std::string> fields{
        "seed",
        "epochs",
        "dataset.n_train",
        "dataset.n_eval",
        "dataset.noise_sigma",
        "model.image_size",
        "model.patch_size",
        "model.channels",
        "model.dim",
        "model.depth",
        "model.heads",
        "model.mlp_ratio",
        "model.num_classes",
        "model.dropout",
        "optimizer.lr",
        "optimizer.beta1",
        "optimizer.beta2",
        "optimizer.eps",
        "optimizer.batch_size",
        "sweep.tolerance",
        "sweep.scope",
        "isp.snapshot_epochs",
        "isp.soup_levels",
        "isp.target_sparsity",
        "lottery.score_policy",
        "lottery.init",
    };
    return fields;
}

namespace {

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {  // InputError, UsageError, DimensionError, rest
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

struct Datasets {
    ImageDataset train;
    ImageDataset eval;
};

Datasets load_datasets(const ExperimentConfig& cfg) {
    Datasets out;
    if (cfg.dataset.kind == "synthetic") {
        out.train = gen_synthetic(cfg.dataset.n_train, cfg.model.image_size, cfg.model.patch_size,
                                  cfg.model.channels, cfg.model.num_classes, cfg.dataset.noise_sigma,
                                  derive_stream(cfg.seed, streams::kDataTrain));
        out.eval = gen_synthetic(cfg.dataset.n_eval, cfg.model.image_size, cfg.model.patch_size,
                                 cfg.model.channels, cfg.model.num_classes, cfg.dataset.noise_sigma,
                                 derive_stream(cfg.seed, streams::kDataEval));
        out.eval.split = Split::Eval;
    } else {
        out.train = load_cifar10(cfg.dataset.dir, cfg.dataset.limit, Split::Train);
        out.eval = load_cifar10(cfg.dataset.dir, cfg.dataset.limit, Split::Eval);
    }
    return out;
}

void write_run_json(const ExperimentConfig& cfg, const std::string& command, const json& report) {
    json j;
    j["command"] = command;
    j["config"] = cfg.to_json();
    j["non_paper_defaults"] = non_paper_default_fields();
    if (!report.is_null()) j["report"] = report;
    const fs::path path = fs::path(cfg.output_dir) / "run.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot write run.json");
    out << j.dump(2) << "\n";
}

class WallClock {
public:
    explicit WallClock(bool deterministic) : deterministic_(deterministic) { reset(); }
    void reset() { start_ = std::chrono::steady_clock::now(); }
    // 0 under deterministic timing so same-seed reruns are byte-identical
    double lap_ms() {
        if (deterministic_) return 0.0;
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    bool deterministic_;
    std::chrono::steady_clock::time_point start_;
};

std::string resolved_config_json(const ExperimentConfig& cfg) { return cfg.to_json().dump(); }

ViTParams<float> load_scorer(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    return params_from_checkpoint<float>(ck, cfg.model);
}

// Fig. 3 analogue: the sample image with dropped patches grayed out.
void write_patch_drop_svg(const std::string& path, const ImageDataset& ds, int image_index,
                          const ViTConfig& cfg, const std::vector<uint16_t>& kept) {
    const int side = cfg.image_size, ps = cfg.patch_size, grid = cfg.grid();
    const int cell = 12;
    std::vector<uint8_t> is_kept(static_cast<size_t>(cfg.num_patches()), 0);
    for (uint16_t k : kept) is_kept[k] = 1;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path, "cannot write patch visualization");
    const int w = side * cell, h = side * cell;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    const float* img = ds.image(image_index);
    const int plane = side * side;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            auto chan = [&](int c) {
                const float v = ds.channels > c ? img[c * plane + y * side + x] : img[y * side + x];
                return static_cast<int>(v * 255.0f + 0.5f);
            };
            out << "  <rect x=\"" << x * cell << "\" y=\"" << y * cell << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"rgb(" << chan(0) << "," << chan(1) << ","
                << chan(2) << ")\"/>\n";
        }
    for (int p = 0; p < cfg.num_patches(); ++p) {
        if (is_kept[p]) continue;
        const int pr = p / grid, pc = p % grid;
        out << "  <rect x=\"" << pc * ps * cell << "\" y=\"" << pr * ps * cell << "\" width=\""
            << ps * cell << "\" height=\"" << ps * cell
            << "\" fill=\"#808080\" fill-opacity=\"0.85\"/>\n";
    }
    out << "</svg>\n";
}

std::vector<MetricsRow> metrics_from_epochs(const std::string& experiment, const TrainResult& result,
                                            double sparsity, double drop_fraction,
                                            const std::vector<double>& wall_ms) {
    std::vector<MetricsRow> rows;
    for (size_t i = 0; i < result.epochs.size(); ++i) {
        const auto& em = result.epochs[i];
        const double wall = i < wall_ms.size() ? wall_ms[i] : 0.0;
        rows.push_back({experiment, em.epoch, "train", sparsity, drop_fraction, em.train_loss,
                        em.train_acc, wall});
        if (em.eval_acc)
            rows.push_back({experiment, em.epoch, "eval", sparsity, drop_fraction, 0.0, *em.eval_acc,
                            wall});
    }
    return rows;
}

}  // namespace

int cmd_baseline(const ExperimentConfig& cfg) {
    return run_guarded([&] {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        const Datasets data = load_datasets(cfg);

        Rng init_rng(derive_stream(cfg.seed, streams::kInit));
        ViTParams<float> params = ViTParams<float>::init(cfg.model, init_rng);

        Rng train_rng(derive_stream(cfg.seed, streams::kTrain));
        WallClock clock(cfg.deterministic_timing);
        std::vector<double> wall;
        const TrainResult result =
            train_model(params, cfg.model, data.train, nullptr, &data.eval, nullptr, cfg.epochs,
                        cfg.optimizer, train_rng,
                        [&](int, ViTParams<float>&) { wall.push_back(clock.lap_ms()); });

        write_metrics((fs::path(cfg.output_dir) / "metrics.csv").string(),
                      metrics_from_epochs("baseline", result, 0.0, 0.0, wall));

        Checkpoint ck;
        checkpoint_add_params(ck, params);
        checkpoint_set_config(ck, resolved_config_json(cfg));
        save_checkpoint((fs::path(cfg.output_dir) / "baseline.lots").string(), ck);

        const double final_acc =
            result.epochs.empty() ? 0.0 : result.epochs.back().eval_acc.value_or(0.0);
        write_run_json(cfg, "baseline", json{{"final_eval_accuracy", final_acc}});
        std::cout << "baseline: " << cfg.epochs << " epochs, final eval accuracy "
                  << format_g6(final_acc) << "\n";
    });
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    return run_guarded([&] {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        const ViTParams<float> params = load_scorer(cfg, checkpoint_path);
        const Datasets data = load_datasets(cfg);

        const SweepReport report = essential_sparsity_sweep(
            params, cfg.model, data.eval, cfg.sweep.levels, cfg.sweep.tolerance, cfg.prune_scope());

        std::vector<MetricsRow> rows;
        rows.push_back({"sweep", 0, "eval", 0.0, 0.0, 0.0, report.baseline_accuracy, 0.0});
        for (const auto& e : report.entries)
            rows.push_back({"sweep", 0, "eval", e.level, 0.0, 0.0, e.accuracy, 0.0});
        const std::string csv = (fs::path(cfg.output_dir) / "sweep.csv").string();
        write_metrics(csv, rows);
        emit_plot(csv, PlotKind::LineBySparsity, (fs::path(cfg.output_dir) / "sweep.svg").string());

        json rep{{"baseline_accuracy", report.baseline_accuracy},
                 {"s_star", report.selected},
                 {"none_qualified", report.none_qualified}};
        write_run_json(cfg, "sweep", rep);
        std::cout << "s_star=" << format_g6(report.selected) << "\n";
        if (report.none_qualified)
            std::cout << "note: no level met the tolerance; fell back to the smallest level\n";
    });
}

int cmd_lottery(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    return run_guarded([&] {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        const Datasets data = load_datasets(cfg);

        const Checkpoint scorer_ck = load_checkpoint(checkpoint_path);
        const ViTParams<float> scorer = params_from_checkpoint<float>(scorer_ck, cfg.model);

        const LotteryDataset lds = build_lottery_dataset(scorer, cfg.model, data.train, cfg.lottery_spec());
        save_lottery((fs::path(cfg.output_dir) / "lottery.lotd").string(), lds);

        for (int i = 0; i < std::min(cfg.lottery.viz_samples, lds.size()); ++i)
            write_patch_drop_svg(
                (fs::path(cfg.output_dir) / ("lottery_sample_" + std::to_string(i) + ".svg")).string(),
                data.train, i, cfg.model, lds.kept[static_cast<size_t>(i)]);

        ViTParams<float> params = [&] {
            if (cfg.lottery.init == "pruned") return params_from_checkpoint<float>(scorer_ck, cfg.model);
            Rng init_rng(derive_stream(cfg.seed, streams::kInit));
            return ViTParams<float>::init(cfg.model, init_rng);
        }();
        Mask mask;
        const Mask* mask_ptr = nullptr;
        if (cfg.lottery.init == "pruned") {
            mask = mask_from_checkpoint(scorer_ck);
            if (!mask.keep.empty()) {
                apply_mask(params, mask);
                mask_ptr = &mask;
            }
        }

        Rng train_rng(derive_stream(cfg.seed, streams::kTrain));
        WallClock clock(cfg.deterministic_timing);
        std::vector<double> wall;
        TrainResult result;
        {
            // per-epoch wall time comes from the shared train loop callback
            std::vector<std::vector<int>> kept(static_cast<size_t>(lds.size()));
            for (int i = 0; i < lds.size(); ++i)
                kept[static_cast<size_t>(i)].assign(lds.kept[static_cast<size_t>(i)].begin(),
                                                    lds.kept[static_cast<size_t>(i)].end());
            result = train_model(params, cfg.model, data.train, &kept, &data.eval, mask_ptr,
                                 cfg.epochs, cfg.optimizer, train_rng,
                                 [&](int, ViTParams<float>&) { wall.push_back(clock.lap_ms()); });
        }

        const double sparsity = mask_ptr ? mask.sparsity() : 0.0;
        const std::string csv = (fs::path(cfg.output_dir) / "lottery_metrics.csv").string();
        write_metrics(csv, metrics_from_epochs("lottery", result, sparsity, cfg.lottery.drop_fraction,
                                               wall));
        emit_plot(csv, PlotKind::LineByEpoch, (fs::path(cfg.output_dir) / "lottery.svg").string());

        const double final_acc =
            result.epochs.empty() ? 0.0 : result.epochs.back().eval_acc.value_or(0.0);
        write_run_json(cfg, "lottery",
                       json{{"init", cfg.lottery.init},
                            {"num_kept", lds.num_kept},
                            {"final_eval_accuracy", final_acc}});
        std::cout << "lottery: kept " << lds.num_kept << "/" << cfg.model.num_patches()
                  << " patches per image, final eval accuracy " << format_g6(final_acc) << "\n";
    });
}

int cmd_issp(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    return run_guarded([&] {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        const Datasets data = load_datasets(cfg);
        const Checkpoint baseline_ck = load_checkpoint(checkpoint_path);
        const ViTParams<float> baseline = params_from_checkpoint<float>(baseline_ck, cfg.model);

        IsspResult issp = issp_pipeline(baseline, cfg.model, data.train, data.eval, cfg.sweep.levels,
                                        cfg.sweep.tolerance, cfg.isp, cfg.optimizer, cfg.seed,
                                        cfg.prune_scope());

        Checkpoint out_ck;
        checkpoint_add_params(out_ck, issp.params);
        checkpoint_add_mask(out_ck, issp.mask);
        checkpoint_set_config(out_ck, resolved_config_json(cfg));
        save_checkpoint((fs::path(cfg.output_dir) / "issp.lots").string(), out_ck);

        std::cout << "s_star=" << format_g6(issp.report.sweep.selected) << "\n";
        std::cout << "sparsity_round1=" << format_g6(issp.report.sparsity_round1) << "\n";
        std::cout << "sparsity_round2=" << format_g6(issp.report.sparsity_round2) << "\n";

        // fine-tune on the lottery data: ISSP-pruned model vs lottery-only
        const LotteryDataset lds = build_lottery_dataset(baseline, cfg.model, data.train, cfg.lottery_spec());
        save_lottery((fs::path(cfg.output_dir) / "lottery.lotd").string(), lds);

        WallClock clock_a(cfg.deterministic_timing);
        std::vector<double> wall_a;
        ViTParams<float> issp_ft = issp.params.clone();
        Rng rng_a(derive_stream(cfg.seed, streams::kTrain));
        const TrainResult res_issp = [&] {
            std::vector<std::vector<int>> kept(static_cast<size_t>(lds.size()));
            for (int i = 0; i < lds.size(); ++i)
                kept[static_cast<size_t>(i)].assign(lds.kept[static_cast<size_t>(i)].begin(),
                                                    lds.kept[static_cast<size_t>(i)].end());
            return train_model(issp_ft, cfg.model, data.train, &kept, &data.eval, &issp.mask,
                               cfg.epochs, cfg.optimizer, rng_a,
                               [&](int, ViTParams<float>&) { wall_a.push_back(clock_a.lap_ms()); });
        }();

        WallClock clock_b(cfg.deterministic_timing);
        std::vector<double> wall_b;
        ViTParams<float> lottery_ft = [&] {
            if (cfg.lottery.init == "pruned") return params_from_checkpoint<float>(baseline_ck, cfg.model);
            Rng init_rng(derive_stream(cfg.seed, streams::kInit));
            return ViTParams<float>::init(cfg.model, init_rng);
        }();
        Rng rng_b(derive_stream(cfg.seed, streams::kTrain));
        const TrainResult res_lottery = [&] {
            std::vector<std::vector<int>> kept(static_cast<size_t>(lds.size()));
            for (int i = 0; i < lds.size(); ++i)
                kept[static_cast<size_t>(i)].assign(lds.kept[static_cast<size_t>(i)].begin(),
                                                    lds.kept[static_cast<size_t>(i)].end());
            return train_model(lottery_ft, cfg.model, data.train, &kept, &data.eval, nullptr,
                               cfg.epochs, cfg.optimizer, rng_b,
                               [&](int, ViTParams<float>&) { wall_b.push_back(clock_b.lap_ms()); });
        }();

        std::vector<MetricsRow> rows = metrics_from_epochs(
            "issp", res_issp, issp.report.sparsity_round2, cfg.lottery.drop_fraction, wall_a);
        const auto lottery_rows = metrics_from_epochs("lottery", res_lottery, 0.0,
                                                      cfg.lottery.drop_fraction, wall_b);
        rows.insert(rows.end(), lottery_rows.begin(), lottery_rows.end());
        const std::string csv = (fs::path(cfg.output_dir) / "issp_metrics.csv").string();
        write_metrics(csv, rows);
        emit_plot(csv, PlotKind::LineByEpoch, (fs::path(cfg.output_dir) / "issp.svg").string());

        const double acc_issp =
            res_issp.epochs.empty() ? 0.0 : res_issp.epochs.back().eval_acc.value_or(0.0);
        const double acc_lottery =
            res_lottery.epochs.empty() ? 0.0 : res_lottery.epochs.back().eval_acc.value_or(0.0);
        write_run_json(cfg, "issp",
                       json{{"s_star", issp.report.sweep.selected},
                            {"sparsity_round1", issp.report.sparsity_round1},
                            {"sparsity_round2", issp.report.sparsity_round2},
                            {"pruned_accuracy_before_finetune", issp.report.final_accuracy},
                            {"issp_final_eval_accuracy", acc_issp},
                            {"lottery_final_eval_accuracy", acc_lottery},
                            {"lottery_init", cfg.lottery.init}});
        std::cout << "issp final eval accuracy " << format_g6(acc_issp)
                  << " vs lottery-only " << format_g6(acc_lottery) << "\n";
    });
}

int cmd_plot(const std::string& csv_path, const std::string& kind, const std::string& out_path) {
    return run_guarded([&] { emit_plot(csv_path, plot_kind_from_string(kind), out_path); });
}

}  // namespace lotus
