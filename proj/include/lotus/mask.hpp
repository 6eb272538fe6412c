#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lotus/vit.hpp"

namespace lotus {

// Per-prunable-tensor keep bytes: 1 = weight survives, 0 = pruned.
struct Mask {
    std::map<std::string, std::vector<uint8_t>> keep;

    int64_t total() const {
        int64_t n = 0;
        for (const auto& [name, bits] : keep) n += static_cast<int64_t>(bits.size());
        return n;
    }

    int64_t zeros() const {
        int64_t z = 0;
        for (const auto& [name, bits] : keep)
            for (uint8_t b : bits) z += (b == 0);
        return z;
    }

    double sparsity() const {
        const int64_t n = total();
        return n == 0 ? 0.0 : static_cast<double>(zeros()) / static_cast<double>(n);
    }
};

enum class PruneScope { Global, PerLayer };

template <class T>
void validate_mask_coverage(const ViTParams<T>& params, const Mask& mask) {
    if (mask.keep.size() != params.prunable.size())
        throw UsageError("mask does not cover the prunable set");
    for (const auto& name : params.prunable) {
        auto it = mask.keep.find(name);
        if (it == mask.keep.end()) throw UsageError("mask missing tensor: " + name);
        if (static_cast<int64_t>(it->second.size()) != params.at(name)->numel())
            throw UsageError("mask shape mismatch for " + name);
    }
}

template <class T>
Mask all_ones_mask(const ViTParams<T>& params) {
    Mask m;
    for (const auto& name : params.prunable)
        m.keep[name].assign(static_cast<size_t>(params.at(name)->numel()), 1);
    return m;
}

namespace detail {

struct WeightRef {
    double absw;
    int name_idx;
    int64_t flat;
    bool operator<(const WeightRef& o) const {
        if (absw != o.absw) return absw < o.absw;
        if (name_idx != o.name_idx) return name_idx < o.name_idx;
        return flat < o.flat;
    }
};

}  // namespace detail

// One-shot magnitude mask: exactly floor(sparsity * n) zeros, pruning the
// smallest |w| first; ties broken by (tensor name ascending, flat index
// ascending). Global ranks the whole prunable set at once; PerLayer applies
// the floor per tensor.
template <class T>
Mask magnitude_mask(const ViTParams<T>& params, double sparsity, PruneScope scope) {
    if (sparsity < 0.0 || sparsity >= 1.0) throw InputError("magnitude_mask: sparsity must be in [0,1)");
    Mask m = all_ones_mask(params);
    if (scope == PruneScope::Global) {
        std::vector<detail::WeightRef> refs;
        refs.reserve(static_cast<size_t>(params.prunable_count()));
        for (size_t ni = 0; ni < params.prunable.size(); ++ni) {
            const auto& t = params.at(params.prunable[ni]);
            for (int64_t i = 0; i < t->numel(); ++i)
                refs.push_back({std::abs(static_cast<double>(t->data[static_cast<size_t>(i)])),
                                static_cast<int>(ni), i});
        }
        std::sort(refs.begin(), refs.end());
        const int64_t k = floor_count(sparsity, static_cast<int64_t>(refs.size()));
        for (int64_t i = 0; i < k; ++i)
            m.keep[params.prunable[static_cast<size_t>(refs[static_cast<size_t>(i)].name_idx)]]
                  [static_cast<size_t>(refs[static_cast<size_t>(i)].flat)] = 0;
    } else {
        for (const auto& name : params.prunable) {
            const auto& t = params.at(name);
            std::vector<detail::WeightRef> refs;
            refs.reserve(static_cast<size_t>(t->numel()));
            for (int64_t i = 0; i < t->numel(); ++i)
                refs.push_back({std::abs(static_cast<double>(t->data[static_cast<size_t>(i)])), 0, i});
            std::sort(refs.begin(), refs.end());
            const int64_t k = floor_count(sparsity, t->numel());
            for (int64_t i = 0; i < k; ++i)
                m.keep[name][static_cast<size_t>(refs[static_cast<size_t>(i)].flat)] = 0;
        }
    }
    return m;
}

// Masked weights become exactly 0; idempotent.
template <class T>
void apply_mask(ViTParams<T>& params, const Mask& mask) {
    validate_mask_coverage(params, mask);
    for (const auto& [name, bits] : mask.keep) {
        auto& t = params.tensors.at(name);
        for (size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == 0) t->data[i] = T(0);
    }
}

// Keep-bit OR: a weight survives if any input mask kept it.
inline Mask union_masks(const std::vector<Mask>& masks) {
    if (masks.empty()) throw UsageError("union_masks: empty mask list");
    Mask out = masks.front();
    for (size_t mi = 1; mi < masks.size(); ++mi) {
        const Mask& m = masks[mi];
        if (m.keep.size() != out.keep.size()) throw UsageError("union_masks: coverage mismatch");
        for (auto& [name, bits] : out.keep) {
            auto it = m.keep.find(name);
            if (it == m.keep.end() || it->second.size() != bits.size())
                throw UsageError("union_masks: coverage mismatch for " + name);
            for (size_t i = 0; i < bits.size(); ++i) bits[i] = bits[i] | it->second[i];
        }
    }
    return out;
}

inline Mask intersect_masks(const Mask& a, const Mask& b) {
    if (a.keep.size() != b.keep.size()) throw UsageError("intersect_masks: coverage mismatch");
    Mask out = a;
    for (auto& [name, bits] : out.keep) {
        auto it = b.keep.find(name);
        if (it == b.keep.end() || it->second.size() != bits.size())
            throw UsageError("intersect_masks: coverage mismatch for " + name);
        for (size_t i = 0; i < bits.size(); ++i) bits[i] = bits[i] & it->second[i];
    }
    return out;
}

// keep-set(inner) subset of keep-set(outer)?
inline bool mask_subset(const Mask& inner, const Mask& outer) {
    if (inner.keep.size() != outer.keep.size()) return false;
    for (const auto& [name, bits] : inner.keep) {
        auto it = outer.keep.find(name);
        if (it == outer.keep.end() || it->second.size() != bits.size()) return false;
        for (size_t i = 0; i < bits.size(); ++i)
            if (bits[i] == 1 && it->second[i] == 0) return false;
    }
    return true;
}

// Adds zeros until the mask holds exactly floor(target * n), pruning the
// smallest-|w| kept weights first (same tie rule as magnitude_mask). Never
// un-prunes. Magnitudes come from `weights` (the final soup snapshot).
template <class T>
Mask reprune_to_target(const Mask& mask, const ViTParams<T>& weights, double target_sparsity) {
    if (target_sparsity < 0.0 || target_sparsity >= 1.0)
        throw InputError("reprune_to_target: target must be in [0,1)");
    validate_mask_coverage(weights, mask);
    Mask out = mask;
    const int64_t n = out.total();
    const int64_t want = floor_count(target_sparsity, n);
    int64_t have = out.zeros();
    if (have >= want) return out;
    std::vector<detail::WeightRef> refs;
    for (size_t ni = 0; ni < weights.prunable.size(); ++ni) {
        const auto& name = weights.prunable[ni];
        const auto& t = weights.at(name);
        const auto& bits = out.keep.at(name);
        for (int64_t i = 0; i < t->numel(); ++i)
            if (bits[static_cast<size_t>(i)] == 1)
                refs.push_back({std::abs(static_cast<double>(t->data[static_cast<size_t>(i)])),
                                static_cast<int>(ni), i});
    }
    std::sort(refs.begin(), refs.end());
    for (size_t i = 0; have < want && i < refs.size(); ++i, ++have)
        out.keep[weights.prunable[static_cast<size_t>(refs[i].name_idx)]]
                [static_cast<size_t>(refs[i].flat)] = 0;
    return out;
}

// Raw keep pointers for the optimizer (see adam_step).
inline std::map<std::string, const uint8_t*> mask_keep_view(const Mask& mask) {
    std::map<std::string, const uint8_t*> view;
    for (const auto& [name, bits] : mask.keep) view[name] = bits.data();
    return view;
}

// Masks ride inside checkpoints as byte-per-weight buffers "<tensor>.mask".
inline void checkpoint_add_mask(Checkpoint& ck, const Mask& mask) {
    for (const auto& [name, bits] : mask.keep) {
        TensorBlob blob;
        blob.dtype = BlobDtype::U8;
        blob.dims = {static_cast<uint32_t>(bits.size())};
        blob.bytes = bits;
        ck.add(name + ".mask", std::move(blob));
    }
}

inline Mask mask_from_checkpoint(const Checkpoint& ck) {
    Mask m;
    constexpr const char* kSuffix = ".mask";
    for (const auto& [name, blob] : ck.tensors) {
        if (name.size() <= 5 || name.compare(name.size() - 5, 5, kSuffix) != 0) continue;
        if (blob.dtype != BlobDtype::U8) throw InputError("mask blob must be U8: " + name);
        m.keep[name.substr(0, name.size() - 5)] = blob.bytes;
    }
    return m;
}

}  // namespace lotus
