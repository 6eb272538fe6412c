#include "lotus/pruning.hpp"

namespace lotus {

std::pair<double, bool> select_essential_sparsity(const std::vector<SweepEntry>& entries,
                                                  double baseline_accuracy, double tolerance) {
    if (entries.empty()) throw UsageError("select_essential_sparsity: no sweep entries");
    double best = 0.0;
    bool found = false;
    for (const auto& e : entries) {
        if (baseline_accuracy - e.accuracy <= tolerance && (!found || e.level > best)) {
            best = e.level;
            found = true;
        }
    }
    if (!found) return {entries.front().level, true};
    return {best, false};
}

SweepReport essential_sparsity_sweep(const ViTParams<float>& params, const ViTConfig& cfg,
                                     const ImageDataset& eval_ds, const std::vector<double>& levels,
                                     double tolerance, PruneScope scope) {
    if (levels.empty()) throw UsageError("sweep: empty level list");
    if (tolerance < 0.0) throw InputError("sweep: tolerance must be >= 0");
    for (size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] <= 0.0 || levels[i] >= 1.0) throw InputError("sweep: levels must be in (0,1)");
        if (i > 0 && levels[i] <= levels[i - 1]) throw InputError("sweep: levels must strictly increase");
    }

    const PatchCache<float> eval_pc = PatchCache<float>::build(eval_ds, cfg);
    SweepReport report;
    report.baseline_accuracy = evaluate_cached(params, cfg, eval_pc);
    for (double level : levels) {
        ViTParams<float> copy = params.clone();
        apply_mask(copy, magnitude_mask(copy, level, scope));
        report.entries.push_back({level, evaluate_cached(copy, cfg, eval_pc)});
    }
    auto [selected, none] = select_essential_sparsity(report.entries, report.baseline_accuracy, tolerance);
    report.selected = selected;
    report.none_qualified = none;
    return report;
}

Mask isp_denoised_mask(const ViTParams<float>& base_params, const ViTConfig& cfg,
                       const ImageDataset& train_subset, const Mask& base_mask, const ISPConfig& icfg,
                       const OptimizerConfig& opt, uint64_t seed, PruneScope scope) {
    icfg.validate();
    if (train_subset.size() == 0) throw UsageError("isp: empty training subset");
    validate_mask_coverage(base_params, base_mask);
    if (icfg.target_sparsity < base_mask.sparsity() - 1e-9)
        throw UsageError("isp: target_sparsity below the base mask sparsity");
    // pre: base_mask is already applied to base_params
    for (const auto& [name, bits] : base_mask.keep) {
        const auto& t = base_params.at(name);
        for (size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == 0 && t->data[i] != 0.0f)
                throw UsageError("isp: base mask not applied to params (" + name + ")");
    }

    ViTParams<float> soup = base_params.clone();
    std::vector<Mask> candidates;
    if (icfg.snapshot_epochs > 0) {
        Rng rng(derive_stream(seed, streams::kIspTrain));
        train_model(soup, cfg, train_subset, nullptr, nullptr, &base_mask, icfg.snapshot_epochs, opt,
                    rng, [&](int, ViTParams<float>& p) {
                        for (double level : icfg.soup_levels)
                            candidates.push_back(
                                intersect_masks(magnitude_mask(p, level, scope), base_mask));
                    });
    }

    Mask denoised = candidates.empty() ? base_mask : union_masks(candidates);
    const int64_t want = floor_count(icfg.target_sparsity, denoised.total());
    if (denoised.zeros() < want) denoised = reprune_to_target(denoised, soup, icfg.target_sparsity);
    return denoised;
}

IsspResult issp_pipeline(const ViTParams<float>& trained, const ViTConfig& cfg,
                         const ImageDataset& train_ds, const ImageDataset& eval_ds,
                         const std::vector<double>& sweep_levels, double tolerance,
                         const ISPConfig& icfg, const OptimizerConfig& opt, uint64_t seed,
                         PruneScope scope) {
    IsspResult out;
    out.report.sweep = essential_sparsity_sweep(trained, cfg, eval_ds, sweep_levels, tolerance, scope);

    // round 1: one-shot prune at the selected essential sparsity
    Mask round1 = magnitude_mask(trained, out.report.sweep.selected, scope);
    ViTParams<float> pruned = trained.clone();
    apply_mask(pruned, round1);
    out.report.sparsity_round1 = round1.sparsity();

    // round 2: ISP denoised mask restricted to round-1 survivors
    const ImageDataset subset =
        dataset_fraction(train_ds, icfg.data_fraction, derive_stream(seed, streams::kIspSubset));
    Mask round2 = isp_denoised_mask(pruned, cfg, subset, round1, icfg, opt, seed, scope);
    apply_mask(pruned, round2);
    out.report.sparsity_round2 = round2.sparsity();

    out.report.final_accuracy = evaluate(pruned, cfg, eval_ds);
    out.params = std::move(pruned);
    out.mask = std::move(round2);
    return out;
}

}  // namespace lotus
