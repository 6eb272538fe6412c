#include "lotus/train.hpp"

#include <cmath>
#include <numeric>

namespace lotus {

TrainResult train_model(ViTParams<float>& params, const ViTConfig& cfg, const ImageDataset& train_ds,
                        const std::vector<std::vector<int>>* kept, const ImageDataset* eval_ds,
                        const Mask* mask, int epochs, const OptimizerConfig& opt, Rng& rng,
                        const EpochCallback& on_epoch) {
    if (train_ds.size() == 0) throw UsageError("train: empty dataset");
    if (epochs < 0) throw UsageError("train: negative epoch count");
    if (opt.batch_size < 1) throw InputError("train: batch_size must be >= 1");
    if (kept && static_cast<int>(kept->size()) != train_ds.size())
        throw UsageError("train: kept list count does not match dataset");
    if (mask) validate_mask_coverage(params, *mask);

    const PatchCache<float> train_pc = PatchCache<float>::build(train_ds, cfg);
    std::optional<PatchCache<float>> eval_pc;
    if (eval_ds) eval_pc = PatchCache<float>::build(*eval_ds, cfg);

    // kept == nullptr still goes through the same code path with full index
    // lists, so drop_fraction 0 reproduces plain training bit-for-bit.
    std::vector<std::vector<int>> full_lists;
    const std::vector<std::vector<int>>* kept_lists = kept;
    if (!kept_lists) {
        std::vector<int> all(static_cast<size_t>(cfg.num_patches()));
        std::iota(all.begin(), all.end(), 0);
        full_lists.assign(static_cast<size_t>(train_ds.size()), all);
        kept_lists = &full_lists;
    }

    AdamState<float> state;
    const AdamHyper hyper = opt.hyper();
    std::map<std::string, const uint8_t*> keep_view;
    if (mask) keep_view = mask_keep_view(*mask);

    TrainResult result;
    const int n = train_ds.size();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int correct = 0;
        for (int start = 0; start < n; start += opt.batch_size) {
            const int stop = std::min(n, start + opt.batch_size);
            std::vector<int> batch(order.begin() + start, order.begin() + stop);
            std::vector<std::vector<int>> batch_kept;
            std::vector<int> batch_labels;
            batch_kept.reserve(batch.size());
            batch_labels.reserve(batch.size());
            for (int i : batch) {
                batch_kept.push_back((*kept_lists)[static_cast<size_t>(i)]);
                batch_labels.push_back(train_ds.labels[static_cast<size_t>(i)]);
            }

            Tape<float> tape;
            ForwardOptions opts;
            opts.dropout = cfg.dropout;
            opts.rng = cfg.dropout > 0.0 ? &rng : nullptr;
            auto fwd = forward_batch(tape, params, cfg, train_pc, batch, &batch_kept, opts);
            auto loss = tape.cross_entropy(fwd.logits, batch_labels);
            const double batch_loss = static_cast<double>(loss->data[0]);
            if (!std::isfinite(batch_loss)) throw NumericError("train: non-finite loss");
            loss_sum += batch_loss * static_cast<double>(batch.size());
            for (size_t i = 0; i < batch.size(); ++i) {
                const float* row = fwd.logits->data.data() + i * cfg.num_classes;
                if (argmax_row(row, cfg.num_classes) == batch_labels[i]) ++correct;
            }

            tape.backward(loss);
            adam_step(params.tensors, state, hyper, mask ? &keep_view : nullptr);
            params.zero_grads();
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / n;
        em.train_acc = static_cast<double>(correct) / n;
        if (eval_pc) em.eval_acc = evaluate_cached(params, cfg, *eval_pc);
        result.epochs.push_back(em);
        if (on_epoch) on_epoch(epoch, params);
    }
    return result;
}

}  // namespace lotus
