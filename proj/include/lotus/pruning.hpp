#pragma once

#include "lotus/mask.hpp"
#include "lotus/train.hpp"

namespace lotus {

struct SweepEntry {
    double level = 0.0;
    double accuracy = 0.0;
};

struct SweepReport {
    std::vector<SweepEntry> entries;  // level-ascending
    double baseline_accuracy = 0.0;
    double selected = 0.0;  // essential sparsity s*
    bool none_qualified = false;
};

// s* = max level whose accuracy drop stays within tolerance; falls back to
// the smallest level (flagged) when none qualifies.
std::pair<double, bool> select_essential_sparsity(const std::vector<SweepEntry>& entries,
                                                  double baseline_accuracy, double tolerance);

// One-shot magnitude prune + evaluate per level, each on a fresh copy of the
// trained params; no retraining.
SweepReport essential_sparsity_sweep(const ViTParams<float>& params, const ViTConfig& cfg,
                                     const ImageDataset& eval_ds, const std::vector<double>& levels,
                                     double tolerance, PruneScope scope = PruneScope::Global);

struct ISPConfig {
    double data_fraction = 0.10;
    int snapshot_epochs = 3;  // one mask snapshot per epoch
    std::vector<double> soup_levels{0.40, 0.45, 0.50};
    double target_sparsity = 0.50;

    void validate() const {
        if (data_fraction <= 0.0 || data_fraction > 1.0)
            throw InputError("isp config: data_fraction must be in (0,1]");
        if (snapshot_epochs < 0) throw InputError("isp config: snapshot_epochs must be >= 0");
        for (double s : soup_levels)
            if (s <= 0.0 || s >= 1.0) throw InputError("isp config: soup levels must be in (0,1)");
        if (target_sparsity <= 0.0 || target_sparsity >= 1.0)
            throw InputError("isp config: target_sparsity must be in (0,1)");
    }
};

// ISP-style denoised mask: fine-tune the base-masked model on the data
// fraction for snapshot_epochs; after each epoch build magnitude masks at
// every soup level restricted to base-kept weights; union them all, then
// re-prune to the target sparsity by final-snapshot magnitude. The result
// never resurrects a weight pruned by base_mask. The fine-tuned soup weights
// are mask-discovery scaffolding and are discarded.
Mask isp_denoised_mask(const ViTParams<float>& base_params, const ViTConfig& cfg,
                       const ImageDataset& train_subset, const Mask& base_mask, const ISPConfig& icfg,
                       const OptimizerConfig& opt, uint64_t seed, PruneScope scope = PruneScope::Global);

struct IsspReport {
    SweepReport sweep;
    double sparsity_round1 = 0.0;
    double sparsity_round2 = 0.0;
    double final_accuracy = 0.0;
};

struct IsspResult {
    ViTParams<float> params;
    Mask mask;
    IsspReport report;
};

// Two-round pipeline: essential-sparsity one-shot prune at s*, then the ISP
// denoised mask on top. Combined sparsity is always >= s*.
IsspResult issp_pipeline(const ViTParams<float>& trained, const ViTConfig& cfg,
                         const ImageDataset& train_ds, const ImageDataset& eval_ds,
                         const std::vector<double>& sweep_levels, double tolerance,
                         const ISPConfig& icfg, const OptimizerConfig& opt, uint64_t seed,
                         PruneScope scope = PruneScope::Global);

}  // namespace lotus
