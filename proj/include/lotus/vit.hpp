#pragma once

#include <bit>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "lotus/dataio.hpp"
#include "lotus/tape.hpp"

namespace lotus {

struct ViTConfig {
    int image_size = 16;
    int channels = 3;
    int patch_size = 4;
    int dim = 32;
    int depth = 2;
    int heads = 4;
    double mlp_ratio = 2.0;
    int num_classes = 4;
    double dropout = 0.0;

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }
    int seq_len() const { return num_patches() + 1; }  // CLS prepended
    int head_dim() const { return dim / heads; }
    int mlp_hidden() const { return static_cast<int>(dim * mlp_ratio + 0.5); }
    int patch_dim() const { return channels * patch_size * patch_size; }

    void validate() const {
        if (image_size <= 0 || patch_size <= 0 || channels <= 0)
            throw InputError("vit config: sizes must be positive");
        if (image_size % patch_size != 0) throw InputError("vit config: image_size % patch_size != 0");
        if (dim <= 0 || depth <= 0 || heads <= 0) throw InputError("vit config: dim/depth/heads must be positive");
        if (dim % heads != 0) throw InputError("vit config: dim % heads != 0");
        if (mlp_ratio <= 0.0) throw InputError("vit config: mlp_ratio must be positive");
        if (num_classes < 2) throw InputError("vit config: need at least 2 classes");
        if (dropout < 0.0 || dropout >= 1.0) throw InputError("vit config: dropout must be in [0,1)");
    }
};

constexpr double kLayerNormEps = 1e-5;

// Post-softmax attention maps per layer/head for one image, each [T', T'].
template <class T>
struct AttentionCapture {
    int seq_len = 0;
    std::vector<std::vector<std::vector<T>>> maps;  // [layer][head][T' * T']
};

// Shape table shared by init and checkpoint loading; names sort ascending.
inline std::vector<std::pair<std::string, std::vector<int>>> param_shapes(const ViTConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    out.emplace_back("patch_proj.w", std::vector<int>{cfg.patch_dim(), cfg.dim});
    out.emplace_back("patch_proj.b", std::vector<int>{cfg.dim});
    out.emplace_back("cls_embed", std::vector<int>{1, cfg.dim});
    out.emplace_back("pos_embed", std::vector<int>{cfg.seq_len(), cfg.dim});
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        out.emplace_back(p + "ln1.g", std::vector<int>{cfg.dim});
        out.emplace_back(p + "ln1.b", std::vector<int>{cfg.dim});
        out.emplace_back(p + "attn.wq", std::vector<int>{cfg.dim, cfg.dim});
        out.emplace_back(p + "attn.wk", std::vector<int>{cfg.dim, cfg.dim});
        out.emplace_back(p + "attn.wv", std::vector<int>{cfg.dim, cfg.dim});
        out.emplace_back(p + "attn.wo", std::vector<int>{cfg.dim, cfg.dim});
        out.emplace_back(p + "ln2.g", std::vector<int>{cfg.dim});
        out.emplace_back(p + "ln2.b", std::vector<int>{cfg.dim});
        out.emplace_back(p + "mlp.w1", std::vector<int>{cfg.dim, cfg.mlp_hidden()});
        out.emplace_back(p + "mlp.b1", std::vector<int>{cfg.mlp_hidden()});
        out.emplace_back(p + "mlp.w2", std::vector<int>{cfg.mlp_hidden(), cfg.dim});
        out.emplace_back(p + "mlp.b2", std::vector<int>{cfg.dim});
    }
    out.emplace_back("final_ln.g", std::vector<int>{cfg.dim});
    out.emplace_back("final_ln.b", std::vector<int>{cfg.dim});
    out.emplace_back("head.w", std::vector<int>{cfg.dim, cfg.num_classes});
    out.emplace_back("head.b", std::vector<int>{cfg.num_classes});
    return out;
}

// The prunable set: 2-D projection/MLP weight matrices. Embeddings, biases,
// norms and the classifier head stay dense.
inline std::vector<std::string> prunable_names(const ViTConfig& cfg) {
    std::vector<std::string> out{"patch_proj.w"};
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        out.push_back(p + "attn.wq");
        out.push_back(p + "attn.wk");
        out.push_back(p + "attn.wv");
        out.push_back(p + "attn.wo");
        out.push_back(p + "mlp.w1");
        out.push_back(p + "mlp.w2");
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <class T>
struct ViTParams {
    ViTConfig cfg;
    std::map<std::string, TensorPtr<T>> tensors;
    std::vector<std::string> prunable;

    // Truncated normal (sigma 0.02, clipped at 2 sigma) for projection and
    // embedding weights, zeros for biases, gamma 1 / beta 0 for norms.
    static ViTParams init(const ViTConfig& cfg, Rng& rng) {
        cfg.validate();
        ViTParams p;
        p.cfg = cfg;
        p.prunable = prunable_names(cfg);
        for (const auto& [name, shape] : param_shapes(cfg)) {
            int64_t n = 1;
            for (int d : shape) n *= d;
            std::vector<T> data(static_cast<size_t>(n), T(0));
            const bool is_gamma = name.size() >= 2 && name.compare(name.size() - 2, 2, ".g") == 0;
            const bool is_bias = name.find(".b") != std::string::npos;  // .b, .b1, .b2
            if (is_gamma) {
                std::fill(data.begin(), data.end(), T(1));
            } else if (!is_bias) {
                for (auto& v : data) v = T(rng.truncated_normal(0.02, 2.0));
            }
            p.tensors[name] = make_tensor<T>(shape, std::move(data), true);
        }
        return p;
    }

    ViTParams clone() const {
        ViTParams out;
        out.cfg = cfg;
        out.prunable = prunable;
        for (const auto& [name, t] : tensors)
            out.tensors[name] = make_tensor<T>(t->shape, t->data, t->requires_grad);
        return out;
    }

    const TensorPtr<T>& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw UsageError("unknown parameter: " + name);
        return it->second;
    }

    int64_t prunable_count() const {
        int64_t n = 0;
        for (const auto& name : prunable) n += at(name)->numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, t] : tensors) t->zero_grad();
    }
};

// ---- patch extraction ----

// Patches ordered row-major over the patch grid; within a patch the layout is
// channel-major, then row-major pixels.
template <class T>
std::vector<T> patchify(const T* image, int channels, int height, int width, int patch_size) {
    if (patch_size <= 0 || height % patch_size != 0 || width % patch_size != 0)
        throw InputError("patchify: image dims not divisible by patch size");
    const int gy = height / patch_size, gx = width / patch_size;
    const int pdim = channels * patch_size * patch_size;
    std::vector<T> out(static_cast<size_t>(gy) * gx * pdim);
    size_t w = 0;
    for (int pr = 0; pr < gy; ++pr)
        for (int pc = 0; pc < gx; ++pc)
            for (int c = 0; c < channels; ++c)
                for (int y = 0; y < patch_size; ++y)
                    for (int x = 0; x < patch_size; ++x)
                        out[w++] = image[(static_cast<size_t>(c) * height + pr * patch_size + y) * width +
                                         pc * patch_size + x];
    return out;
}

template <class T>
TensorPtr<T> patchify(const Tensor<T>& image, int patch_size) {
    if (image.ndim() != 3) throw InputError("patchify: image must be [channels, H, W]");
    const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
    auto data = patchify(image.data.data(), c, h, w, patch_size);
    return make_tensor<T>({(h / patch_size) * (w / patch_size), c * patch_size * patch_size},
                          std::move(data));
}

// Pre-patchified dataset, cast to the compute dtype.
template <class T>
struct PatchCache {
    int num_patches = 0;
    int patch_dim = 0;
    std::vector<std::vector<T>> patches;
    std::vector<int> labels;

    static PatchCache build(const ImageDataset& ds, const ViTConfig& cfg) {
        if (ds.channels != cfg.channels || ds.height != cfg.image_size || ds.width != cfg.image_size)
            throw InputError("patch cache: dataset does not match model config");
        PatchCache pc;
        pc.num_patches = cfg.num_patches();
        pc.patch_dim = cfg.patch_dim();
        pc.labels = ds.labels;
        pc.patches.reserve(ds.size());
        for (int i = 0; i < ds.size(); ++i) {
            const float* img = ds.image(i);
            std::vector<T> px(ds.image_numel());
            for (int p = 0; p < ds.image_numel(); ++p) px[p] = T(img[p]);
            pc.patches.push_back(patchify(px.data(), ds.channels, ds.height, ds.width, cfg.patch_size));
        }
        return pc;
    }
};

// Positional rows looked up by ORIGINAL patch index: CLS at 0, patch k at k+1.
inline std::vector<int> position_indices(const std::vector<int>& kept) {
    std::vector<int> idx(kept.size() + 1);
    idx[0] = 0;
    for (size_t i = 0; i < kept.size(); ++i) idx[i + 1] = kept[i] + 1;
    return idx;
}

struct ForwardOptions {
    bool capture = false;
    double dropout = 0.0;
    Rng* rng = nullptr;
};

template <class T>
struct ForwardResult {
    TensorPtr<T> logits;  // [batch, num_classes]
    std::vector<AttentionCapture<T>> captures;
};

// Pre-norm transformer stack over CLS + the given patch subset. Each patch
// keeps its original positional embedding row, so reduced sequences remain
// position-faithful. kept == nullptr means the full patch sequence.
template <class T>
ForwardResult<T> forward_batch(Tape<T>& tape, const ViTParams<T>& params, const ViTConfig& cfg,
                               const PatchCache<T>& pc, const std::vector<int>& image_indices,
                               const std::vector<std::vector<int>>* kept,
                               const ForwardOptions& opts = {}) {
    if (image_indices.empty()) throw UsageError("forward: empty batch");
    if (kept && kept->size() != image_indices.size())
        throw UsageError("forward: kept list count does not match batch");
    if (pc.num_patches != cfg.num_patches() || pc.patch_dim != cfg.patch_dim())
        throw InputError("forward: patch cache does not match config");

    std::vector<int> all_patches(static_cast<size_t>(cfg.num_patches()));
    for (int i = 0; i < cfg.num_patches(); ++i) all_patches[i] = i;

    const int heads = cfg.heads, dh = cfg.head_dim();
    const T att_scale = T(1) / std::sqrt(T(dh));
    const auto& wproj = params.at("patch_proj.w");
    const auto& bproj = params.at("patch_proj.b");
    const auto& cls = params.at("cls_embed");
    const auto& pos = params.at("pos_embed");

    ForwardResult<T> result;
    std::vector<TensorPtr<T>> per_image_logits;
    per_image_logits.reserve(image_indices.size());

    for (size_t bi = 0; bi < image_indices.size(); ++bi) {
        const int img = image_indices[bi];
        if (img < 0 || img >= static_cast<int>(pc.patches.size()))
            throw InputError("forward: image index out of range");
        const std::vector<int>& keep = kept ? (*kept)[bi] : all_patches;
        for (int k : keep)
            if (k < 0 || k >= cfg.num_patches()) throw InputError("forward: unknown positional index");

        // host-side gather of the kept patch rows (constant input)
        const int t = static_cast<int>(keep.size());
        std::vector<T> rows(static_cast<size_t>(t) * pc.patch_dim);
        for (int r = 0; r < t; ++r)
            std::copy(pc.patches[img].begin() + static_cast<size_t>(keep[r]) * pc.patch_dim,
                      pc.patches[img].begin() + static_cast<size_t>(keep[r] + 1) * pc.patch_dim,
                      rows.begin() + static_cast<size_t>(r) * pc.patch_dim);
        TensorPtr<T> patch_rows = make_tensor<T>({t, pc.patch_dim}, std::move(rows));

        TensorPtr<T> tok = tape.add_row_bias(tape.matmul(patch_rows, wproj), bproj);
        TensorPtr<T> x = tape.concat_rows({cls, tok});
        x = tape.add(x, tape.gather_rows(pos, position_indices(keep)));

        AttentionCapture<T> cap;
        cap.seq_len = t + 1;

        for (int l = 0; l < cfg.depth; ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            TensorPtr<T> h = tape.layer_norm(x, params.at(p + "ln1.g"), params.at(p + "ln1.b"),
                                             T(kLayerNormEps));
            TensorPtr<T> q = tape.matmul(h, params.at(p + "attn.wq"));
            TensorPtr<T> k = tape.matmul(h, params.at(p + "attn.wk"));
            TensorPtr<T> v = tape.matmul(h, params.at(p + "attn.wv"));
            std::vector<TensorPtr<T>> head_outs;
            head_outs.reserve(heads);
            std::vector<std::vector<T>> cap_heads;
            for (int hh = 0; hh < heads; ++hh) {
                TensorPtr<T> qh = tape.slice_cols(q, hh * dh, (hh + 1) * dh);
                TensorPtr<T> kh = tape.slice_cols(k, hh * dh, (hh + 1) * dh);
                TensorPtr<T> vh = tape.slice_cols(v, hh * dh, (hh + 1) * dh);
                TensorPtr<T> att =
                    tape.softmax(tape.scale(tape.matmul(qh, tape.transpose(kh)), att_scale), 1);
                if (opts.capture) cap_heads.push_back(att->data);
                head_outs.push_back(tape.matmul(att, vh));
            }
            if (opts.capture) cap.maps.push_back(std::move(cap_heads));
            TensorPtr<T> attn_out = tape.matmul(tape.concat_cols(head_outs), params.at(p + "attn.wo"));
            if (opts.dropout > 0.0 && opts.rng) attn_out = tape.dropout(attn_out, opts.dropout, *opts.rng);
            x = tape.add(x, attn_out);

            TensorPtr<T> h2 = tape.layer_norm(x, params.at(p + "ln2.g"), params.at(p + "ln2.b"),
                                              T(kLayerNormEps));
            TensorPtr<T> hidden = tape.activation(
                Activation::Gelu, tape.add_row_bias(tape.matmul(h2, params.at(p + "mlp.w1")),
                                                    params.at(p + "mlp.b1")));
            if (opts.dropout > 0.0 && opts.rng) hidden = tape.dropout(hidden, opts.dropout, *opts.rng);
            TensorPtr<T> mlp_out =
                tape.add_row_bias(tape.matmul(hidden, params.at(p + "mlp.w2")), params.at(p + "mlp.b2"));
            x = tape.add(x, mlp_out);
        }

        TensorPtr<T> f = tape.layer_norm(x, params.at("final_ln.g"), params.at("final_ln.b"),
                                         T(kLayerNormEps));
        TensorPtr<T> cls_rep = tape.slice_rows(f, 0, 1);
        per_image_logits.push_back(
            tape.add_row_bias(tape.matmul(cls_rep, params.at("head.w")), params.at("head.b")));
        if (opts.capture) result.captures.push_back(std::move(cap));
    }

    result.logits = tape.concat_rows(per_image_logits);
    return result;
}

// Argmax with ties broken toward the lowest class index.
template <class T>
int argmax_row(const T* row, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

template <class T>
double evaluate_cached(const ViTParams<T>& params, const ViTConfig& cfg, const PatchCache<T>& pc) {
    if (pc.patches.empty()) throw UsageError("evaluate: empty dataset");
    const int n = static_cast<int>(pc.patches.size());
    int correct = 0;
    constexpr int kChunk = 64;
    for (int start = 0; start < n; start += kChunk) {
        const int stop = std::min(n, start + kChunk);
        std::vector<int> idx(static_cast<size_t>(stop - start));
        for (int i = start; i < stop; ++i) idx[i - start] = i;
        Tape<T> tape;
        tape.set_grad_enabled(false);
        auto res = forward_batch(tape, params, cfg, pc, idx, nullptr);
        const int classes = cfg.num_classes;
        for (int i = 0; i < stop - start; ++i) {
            const T* row = res.logits->data.data() + static_cast<size_t>(i) * classes;
            if (argmax_row(row, classes) == pc.labels[idx[i]]) ++correct;
        }
    }
    return static_cast<double>(correct) / n;
}

// Fraction of argmax(logits) == label over the dataset; deterministic.
template <class T>
double evaluate(const ViTParams<T>& params, const ViTConfig& cfg, const ImageDataset& ds) {
    if (ds.size() == 0) throw UsageError("evaluate: empty dataset");
    return evaluate_cached(params, cfg, PatchCache<T>::build(ds, cfg));
}

// ---- checkpoint bridge ----

template <class T>
void checkpoint_add_params(Checkpoint& ck, const ViTParams<T>& params) {
    for (const auto& [name, t] : params.tensors) {
        TensorBlob blob;
        blob.dtype = dtype_tag<T>::value == Dtype::F32 ? BlobDtype::F32 : BlobDtype::F64;
        for (int d : t->shape) blob.dims.push_back(static_cast<uint32_t>(d));
        blob.bytes.resize(t->data.size() * sizeof(T));
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(blob.bytes.data(), t->data.data(), blob.bytes.size());
        } else {
            for (size_t i = 0; i < t->data.size(); ++i) {
                T v = t->data[i];
                uint8_t tmp[sizeof(T)];
                std::memcpy(tmp, &v, sizeof(T));
                for (size_t b = 0; b < sizeof(T); ++b)
                    blob.bytes[i * sizeof(T) + b] = tmp[sizeof(T) - 1 - b];
            }
        }
        ck.add(name, std::move(blob));
    }
}

template <class T>
ViTParams<T> params_from_checkpoint(const Checkpoint& ck, const ViTConfig& cfg) {
    cfg.validate();
    ViTParams<T> p;
    p.cfg = cfg;
    p.prunable = prunable_names(cfg);
    const BlobDtype want = dtype_tag<T>::value == Dtype::F32 ? BlobDtype::F32 : BlobDtype::F64;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        const TensorBlob* blob = ck.find(name);
        if (!blob) throw InputError("checkpoint missing tensor: " + name);
        if (blob->dtype != want) throw InputError("checkpoint dtype mismatch for " + name);
        std::vector<int> dims(blob->dims.begin(), blob->dims.end());
        if (dims != shape) throw InputError("checkpoint shape mismatch for " + name);
        std::vector<T> data(blob->elem_count());
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(data.data(), blob->bytes.data(), blob->bytes.size());
        } else {
            for (size_t i = 0; i < data.size(); ++i) {
                uint8_t tmp[sizeof(T)];
                for (size_t b = 0; b < sizeof(T); ++b)
                    tmp[b] = blob->bytes[i * sizeof(T) + sizeof(T) - 1 - b];
                std::memcpy(&data[i], tmp, sizeof(T));
            }
        }
        p.tensors[name] = make_tensor<T>(shape, std::move(data), true);
    }
    return p;
}

}  // namespace lotus
