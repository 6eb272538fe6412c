#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "lotus/tensor.hpp"

namespace lotus {

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    struct Moments {
        std::vector<T> m, v;
    };
    std::map<std::string, Moments> moments;
    int64_t t = 0;
};

// One bias-corrected Adam step over a named parameter set. `keep`, when
// provided, pins pruned coordinates: their gradient counts as zero and the
// weight is forced back to exactly 0 after the update.
template <class T>
void adam_step(std::map<std::string, TensorPtr<T>>& params, AdamState<T>& state, const AdamHyper& h,
               const std::map<std::string, const uint8_t*>* keep = nullptr) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));
    for (auto& [name, p] : params) {
        if (!p->requires_grad) continue;
        if (p->grad.size() != p->data.size())
            throw UsageError("adam_step: missing gradient for " + name);
        auto& mom = state.moments[name];
        if (mom.m.empty()) {
            mom.m.assign(p->data.size(), T(0));
            mom.v.assign(p->data.size(), T(0));
        } else if (mom.m.size() != p->data.size()) {
            throw UsageError("adam_step: moment shape mismatch for " + name);
        }
        const uint8_t* km = nullptr;
        if (keep) {
            auto it = keep->find(name);
            if (it != keep->end()) km = it->second;
        }
        const T b1 = T(h.beta1), b2 = T(h.beta2);
        const T ob1 = T(1.0 - h.beta1), ob2 = T(1.0 - h.beta2);
        for (size_t i = 0; i < p->data.size(); ++i) {
            T g = p->grad[i];
            if (km && km[i] == 0) g = T(0);
            mom.m[i] = b1 * mom.m[i] + ob1 * g;
            mom.v[i] = b2 * mom.v[i] + ob2 * g * g;
            const T mhat = mom.m[i] / T(bc1);
            const T vhat = mom.v[i] / T(bc2);
            p->data[i] -= T(h.lr) * mhat / (std::sqrt(vhat) + T(h.eps));
            if (km && km[i] == 0) p->data[i] = T(0);
        }
    }
}

}  // namespace lotus
