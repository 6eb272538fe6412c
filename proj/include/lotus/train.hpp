#pragma once

#include <functional>
#include <optional>

#include "lotus/adam.hpp"
#include "lotus/mask.hpp"
#include "lotus/vit.hpp"

namespace lotus {

struct OptimizerConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 32;

    AdamHyper hyper() const { return {lr, beta1, beta2, eps}; }
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> eval_acc;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
};

using EpochCallback = std::function<void(int epoch, ViTParams<float>& params)>;

// Seeded minibatch Adam training. `kept` selects per-image patch subsets
// (nullptr = full sequences); `mask` pins pruned weights at exactly zero.
// Train accuracy is measured on the pre-update logits of each batch; eval
// accuracy always uses full sequences. Throws NumericError on a non-finite
// loss.
TrainResult train_model(ViTParams<float>& params, const ViTConfig& cfg, const ImageDataset& train_ds,
                        const std::vector<std::vector<int>>* kept, const ImageDataset* eval_ds,
                        const Mask* mask, int epochs, const OptimizerConfig& opt, Rng& rng,
                        const EpochCallback& on_epoch = {});

}  // namespace lotus
