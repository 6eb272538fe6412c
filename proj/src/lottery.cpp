#include "lotus/lottery.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace lotus {

std::vector<double> sink_normalize(std::vector<double> row) {
    if (row.size() < 2) throw InputError("sink_normalize: need at least 2 entries");
    double sum = 0.0;
    for (size_t i = 1; i < row.size(); ++i) sum += row[i];
    row[0] = sum / static_cast<double>(row.size() - 1);
    return row;
}

PatchScores patch_scores(const AttentionCapture<float>& capture, const LotterySpec& spec) {
    if (capture.maps.empty()) throw UsageError("patch_scores: capture has no layers");
    const int t = capture.seq_len;
    if (t < 2) throw UsageError("patch_scores: sequence too short");

    auto cls_row_of_layer = [&](size_t layer) {
        const auto& heads = capture.maps[layer];
        if (heads.empty()) throw UsageError("patch_scores: capture layer has no heads");
        std::vector<double> row(static_cast<size_t>(t), 0.0);
        for (const auto& head : heads) {
            if (static_cast<int>(head.size()) != t * t)
                throw UsageError("patch_scores: capture map shape mismatch");
            for (int j = 0; j < t; ++j) row[static_cast<size_t>(j)] += head[static_cast<size_t>(j)];
        }
        for (auto& v : row) v /= static_cast<double>(heads.size());
        return row;
    };

    std::vector<double> row;
    if (spec.policy == ScorePolicy::Last) {
        row = cls_row_of_layer(capture.maps.size() - 1);
    } else {
        row.assign(static_cast<size_t>(t), 0.0);
        for (size_t l = 0; l < capture.maps.size(); ++l) {
            const auto lr = cls_row_of_layer(l);
            for (int j = 0; j < t; ++j) row[static_cast<size_t>(j)] += lr[static_cast<size_t>(j)];
        }
        for (auto& v : row) v /= static_cast<double>(capture.maps.size());
    }

    row = sink_normalize(std::move(row));
    return PatchScores(row.begin() + 1, row.end());
}

std::vector<int> select_patches(const PatchScores& scores, double drop_fraction) {
    if (drop_fraction < 0.0 || drop_fraction >= 1.0)
        throw InputError("select_patches: drop_fraction must be in [0,1)");
    const int n = static_cast<int>(scores.size());
    const int64_t k = floor_count(drop_fraction, n);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
            return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
        return a < b;  // ties: drop the lower index first
    });
    std::vector<int> keep(order.begin() + k, order.end());
    std::sort(keep.begin(), keep.end());
    return keep;
}

LotteryDataset build_lottery_dataset(const ViTParams<float>& scorer, const ViTConfig& cfg,
                                     const ImageDataset& ds, const LotterySpec& spec) {
    if (ds.size() == 0) throw UsageError("build_lottery_dataset: empty dataset");
    const PatchCache<float> pc = PatchCache<float>::build(ds, cfg);

    LotteryDataset out;
    out.num_patches = cfg.num_patches();
    out.num_kept = cfg.num_patches() - static_cast<int>(floor_count(spec.drop_fraction, cfg.num_patches()));
    for (int i = 0; i < ds.size(); ++i) {
        Tape<float> tape;
        tape.set_grad_enabled(false);
        ForwardOptions opts;
        opts.capture = true;
        auto fwd = forward_batch(tape, scorer, cfg, pc, {i}, nullptr, opts);
        const auto kept = select_patches(patch_scores(fwd.captures[0], spec), spec.drop_fraction);
        if (static_cast<int>(kept.size()) != out.num_kept)
            throw UsageError("build_lottery_dataset: non-uniform kept count");
        if (ds.labels[static_cast<size_t>(i)] < 0 || ds.labels[static_cast<size_t>(i)] > 255)
            throw InputError("build_lottery_dataset: label does not fit u8");
        out.labels.push_back(static_cast<uint8_t>(ds.labels[static_cast<size_t>(i)]));
        std::vector<uint16_t> ks(kept.size());
        for (size_t j = 0; j < kept.size(); ++j) ks[j] = static_cast<uint16_t>(kept[j]);
        out.kept.push_back(std::move(ks));
    }
    return out;
}

namespace {

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xFF));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void save_lottery(const std::string& path, const LotteryDataset& lds) {
    std::vector<uint8_t> buf;
    buf.push_back('L');
    buf.push_back('O');
    buf.push_back('T');
    buf.push_back('D');
    put_u32le(buf, 1);  // version
    put_u32le(buf, static_cast<uint32_t>(lds.size()));
    put_u16le(buf, static_cast<uint16_t>(lds.num_kept));
    for (int i = 0; i < lds.size(); ++i) {
        buf.push_back(lds.labels[static_cast<size_t>(i)]);
        if (static_cast<int>(lds.kept[static_cast<size_t>(i)].size()) != lds.num_kept)
            throw UsageError("save_lottery: non-uniform kept count");
        for (uint16_t k : lds.kept[static_cast<size_t>(i)]) put_u16le(buf, k);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open lottery file for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(path, "lottery write failed");
}

LotteryDataset load_lottery(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open lottery file");
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 14) throw FormatError(path, buf.size(), "file too small for lottery header");
    if (std::memcmp(buf.data(), "LOTD", 4) != 0) throw FormatError(path, 0, "bad magic");
    const uint32_t version = static_cast<uint32_t>(buf[4]) | (static_cast<uint32_t>(buf[5]) << 8) |
                             (static_cast<uint32_t>(buf[6]) << 16) | (static_cast<uint32_t>(buf[7]) << 24);
    if (version != 1) throw FormatError(path, 4, "unsupported lottery version");
    const uint32_t num_images = static_cast<uint32_t>(buf[8]) | (static_cast<uint32_t>(buf[9]) << 8) |
                                (static_cast<uint32_t>(buf[10]) << 16) |
                                (static_cast<uint32_t>(buf[11]) << 24);
    const uint16_t num_kept = static_cast<uint16_t>(buf[12] | (buf[13] << 8));

    LotteryDataset out;
    out.num_kept = num_kept;
    size_t off = 14;
    const size_t record = 1 + static_cast<size_t>(num_kept) * 2;
    for (uint32_t i = 0; i < num_images; ++i) {
        if (off + record > buf.size()) throw FormatError(path, off, "truncated lottery record");
        out.labels.push_back(buf[off]);
        std::vector<uint16_t> ks(num_kept);
        for (int j = 0; j < num_kept; ++j) {
            ks[static_cast<size_t>(j)] =
                static_cast<uint16_t>(buf[off + 1 + 2 * j] | (buf[off + 2 + 2 * j] << 8));
            if (j > 0 && ks[static_cast<size_t>(j)] <= ks[static_cast<size_t>(j - 1)])
                throw FormatError(path, off + 1 + 2 * static_cast<size_t>(j),
                                  "kept indices not strictly ascending");
        }
        out.kept.push_back(std::move(ks));
        off += record;
    }
    if (off != buf.size()) throw FormatError(path, off, "trailing bytes after lottery records");
    // num_patches is not part of the format; the consumer checks against its config
    out.num_patches = 0;
    return out;
}

TrainResult finetune_on_lottery(ViTParams<float>& params, const ViTConfig& cfg,
                                const LotteryDataset& lds, const ImageDataset& source,
                                const ImageDataset* eval_ds, int epochs, const OptimizerConfig& opt,
                                Rng& rng, const Mask* mask) {
    if (epochs < 1) throw UsageError("finetune_on_lottery: epochs must be >= 1");
    if (lds.size() != source.size())
        throw UsageError("finetune_on_lottery: lottery and source dataset sizes differ");
    if (lds.num_patches != 0 && lds.num_patches != cfg.num_patches())
        throw UsageError("finetune_on_lottery: patch count does not match config");

    std::vector<std::vector<int>> kept(static_cast<size_t>(lds.size()));
    for (int i = 0; i < lds.size(); ++i) {
        const auto& ks = lds.kept[static_cast<size_t>(i)];
        if (static_cast<int>(ks.size()) != lds.num_kept)
            throw UsageError("finetune_on_lottery: non-uniform kept counts");
        if (static_cast<int>(lds.labels[static_cast<size_t>(i)]) != source.labels[static_cast<size_t>(i)])
            throw UsageError("finetune_on_lottery: labels disagree with source dataset");
        kept[static_cast<size_t>(i)].assign(ks.begin(), ks.end());
    }
    return train_model(params, cfg, source, &kept, eval_ds, mask, epochs, opt, rng);
}

}  // namespace lotus
