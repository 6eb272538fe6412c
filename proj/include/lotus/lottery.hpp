#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lotus/train.hpp"
#include "lotus/vit.hpp"

namespace lotus {

enum class ScorePolicy { Last, MeanAll };

struct LotterySpec {
    double drop_fraction = 0.10;  // the fraction X of patches to drop
    ScorePolicy policy = ScorePolicy::Last;
    // head aggregation is always the mean
};

using PatchScores = std::vector<double>;

// Replaces the CLS self-attention entry with the mean of the remaining
// entries; nothing is renormalized, so patch ranking is untouched.
std::vector<double> sink_normalize(std::vector<double> row);

// CLS attention row of the selected layer(s), averaged over heads, sink
// normalized, CLS entry dropped: one non-negative score per patch.
PatchScores patch_scores(const AttentionCapture<float>& capture, const LotterySpec& spec);

// Drops exactly floor(drop_fraction * num_patches) lowest-scoring patches
// (ties drop the lower index first); kept indices returned ascending.
std::vector<int> select_patches(const PatchScores& scores, double drop_fraction);

// Per-image retained patch indices plus labels; kept counts are uniform.
struct LotteryDataset {
    int num_patches = 0;
    int num_kept = 0;
    std::vector<uint8_t> labels;
    std::vector<std::vector<uint16_t>> kept;

    int size() const { return static_cast<int>(labels.size()); }
};

// One forward-with-capture per image through the scoring model.
LotteryDataset build_lottery_dataset(const ViTParams<float>& scorer, const ViTConfig& cfg,
                                     const ImageDataset& ds, const LotterySpec& spec);

// "LOTD" format: magic, u32 version=1, u32 num_images, u16 num_kept, then per
// image u8 label + num_kept ascending u16 indices, little-endian.
void save_lottery(const std::string& path, const LotteryDataset& lds);
LotteryDataset load_lottery(const std::string& path);

// Fine-tunes on the reduced sequences (CLS + kept patches at their original
// positional indices). Evaluation always runs on full sequences: model
// quality is what is being measured, not reduced-input quality.
TrainResult finetune_on_lottery(ViTParams<float>& params, const ViTConfig& cfg,
                                const LotteryDataset& lds, const ImageDataset& source,
                                const ImageDataset* eval_ds, int epochs, const OptimizerConfig& opt,
                                Rng& rng, const Mask* mask = nullptr);

}  // namespace lotus
