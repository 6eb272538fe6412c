#pragma once

#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "lotus/tensor.hpp"

namespace lotus {

enum class Activation { Gelu, Identity };

// Reverse-mode tape. Ops append nodes in execution order; backward() replays
// them in exact reverse order, accumulating (+=) into input grads. A node is
// only recorded when grads are enabled and at least one input requires them,
// so evaluation-only passes cost nothing extra.
template <class T>
class Tape {
public:
    using Ptr = TensorPtr<T>;

    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }
    size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // ---- binary / elementwise ----

    Ptr matmul(const Ptr& a, const Ptr& b) {
        if (a->ndim() != 2 || b->ndim() != 2) throw DimensionError("matmul: inputs must be 2-D");
        const int m = a->shape[0], k = a->shape[1];
        const int k2 = b->shape[0], n = b->shape[1];
        if (k != k2) throw DimensionError("matmul: inner dims differ");
        std::vector<T> out(static_cast<size_t>(m) * n, T(0));
        const T* ad = a->data.data();
        const T* bd = b->data.data();
        for (int i = 0; i < m; ++i) {
            T* orow = out.data() + static_cast<size_t>(i) * n;
            const T* arow = ad + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const T av = arow[kk];
                const T* brow = bd + static_cast<size_t>(kk) * n;
                for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
        Ptr y = output({m, n}, std::move(out), {a, b});
        if (y->requires_grad) {
            record([a, b, y, m, k, n] {
                const T* gy = y->grad.data();
                if (a->requires_grad) {
                    T* ga = a->grad.data();
                    const T* bd2 = b->data.data();
                    for (int i = 0; i < m; ++i)
                        for (int kk = 0; kk < k; ++kk) {
                            T s = 0;
                            const T* gyrow = gy + static_cast<size_t>(i) * n;
                            const T* brow = bd2 + static_cast<size_t>(kk) * n;
                            for (int j = 0; j < n; ++j) s += gyrow[j] * brow[j];
                            ga[static_cast<size_t>(i) * k + kk] += s;
                        }
                }
                if (b->requires_grad) {
                    T* gb = b->grad.data();
                    const T* ad2 = a->data.data();
                    for (int kk = 0; kk < k; ++kk)
                        for (int j = 0; j < n; ++j) {
                            T s = 0;
                            for (int i = 0; i < m; ++i)
                                s += ad2[static_cast<size_t>(i) * k + kk] * gy[static_cast<size_t>(i) * n + j];
                            gb[static_cast<size_t>(kk) * n + j] += s;
                        }
                }
            });
        }
        return y;
    }

    Ptr transpose(const Ptr& x) {
        if (x->ndim() != 2) throw DimensionError("transpose: input must be 2-D");
        const int m = x->shape[0], n = x->shape[1];
        std::vector<T> out(x->data.size());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = x->data[static_cast<size_t>(i) * n + j];
        Ptr y = output({n, m}, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, m, n] {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        x->grad[static_cast<size_t>(i) * n + j] += y->grad[static_cast<size_t>(j) * m + i];
            });
        }
        return y;
    }

    Ptr add(const Ptr& a, const Ptr& b) {
        if (a->shape != b->shape) throw DimensionError("add: shape mismatch");
        std::vector<T> out(a->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
        Ptr y = output(a->shape, std::move(out), {a, b});
        if (y->requires_grad) {
            record([a, b, y] {
                if (a->requires_grad)
                    for (size_t i = 0; i < y->grad.size(); ++i) a->grad[i] += y->grad[i];
                if (b->requires_grad)
                    for (size_t i = 0; i < y->grad.size(); ++i) b->grad[i] += y->grad[i];
            });
        }
        return y;
    }

    Ptr mul(const Ptr& a, const Ptr& b) {
        if (a->shape != b->shape) throw DimensionError("mul: shape mismatch");
        std::vector<T> out(a->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
        Ptr y = output(a->shape, std::move(out), {a, b});
        if (y->requires_grad) {
            record([a, b, y] {
                if (a->requires_grad)
                    for (size_t i = 0; i < y->grad.size(); ++i) a->grad[i] += y->grad[i] * b->data[i];
                if (b->requires_grad)
                    for (size_t i = 0; i < y->grad.size(); ++i) b->grad[i] += y->grad[i] * a->data[i];
            });
        }
        return y;
    }

    Ptr scale(const Ptr& x, T c) {
        std::vector<T> out(x->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = x->data[i] * c;
        Ptr y = output(x->shape, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, c] {
                for (size_t i = 0; i < y->grad.size(); ++i) x->grad[i] += y->grad[i] * c;
            });
        }
        return y;
    }

    // y[i,j] = x[i,j] + b[j]; the only broadcast in the op set.
    Ptr add_row_bias(const Ptr& x, const Ptr& b) {
        if (x->ndim() != 2 || b->ndim() != 1) throw DimensionError("add_row_bias: need 2-D x, 1-D bias");
        const int m = x->shape[0], n = x->shape[1];
        if (b->shape[0] != n) throw DimensionError("add_row_bias: bias length mismatch");
        std::vector<T> out(x->data.size());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                out[static_cast<size_t>(i) * n + j] = x->data[static_cast<size_t>(i) * n + j] + b->data[j];
        Ptr y = output({m, n}, std::move(out), {x, b});
        if (y->requires_grad) {
            record([x, b, y, m, n] {
                if (x->requires_grad)
                    for (size_t i = 0; i < y->grad.size(); ++i) x->grad[i] += y->grad[i];
                if (b->requires_grad)
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) b->grad[j] += y->grad[static_cast<size_t>(i) * n + j];
            });
        }
        return y;
    }

    // ---- nonlinearities ----

    // Max-subtracted softmax along `axis` (1-D: axis 0; 2-D: 0 = columns, 1 or -1 = rows).
    Ptr softmax(const Ptr& x, int axis) {
        if (x->ndim() == 1) {
            if (axis != 0 && axis != -1) throw InputError("softmax: bad axis for 1-D input");
            std::vector<T> out = softmax_slice(x->data.data(), static_cast<int>(x->data.size()), 1);
            Ptr y = output(x->shape, std::move(out), {x});
            if (y->requires_grad) {
                record([x, y] { softmax_backward_slice(x->grad.data(), y->data.data(), y->grad.data(),
                                                       static_cast<int>(y->data.size()), 1); });
            }
            return y;
        }
        if (x->ndim() != 2) throw DimensionError("softmax: input must be 1-D or 2-D");
        const int m = x->shape[0], n = x->shape[1];
        const bool rowwise = (axis == 1 || axis == -1);
        if (!rowwise && axis != 0) throw InputError("softmax: bad axis for 2-D input");
        std::vector<T> out(x->data.size());
        if (rowwise) {
            for (int i = 0; i < m; ++i) {
                auto s = softmax_slice(x->data.data() + static_cast<size_t>(i) * n, n, 1);
                std::copy(s.begin(), s.end(), out.begin() + static_cast<size_t>(i) * n);
            }
        } else {
            for (int j = 0; j < n; ++j) {
                std::vector<T> col(m);
                for (int i = 0; i < m; ++i) col[i] = x->data[static_cast<size_t>(i) * n + j];
                auto s = softmax_slice(col.data(), m, 1);
                for (int i = 0; i < m; ++i) out[static_cast<size_t>(i) * n + j] = s[i];
            }
        }
        Ptr y = output({m, n}, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, m, n, rowwise] {
                if (rowwise) {
                    for (int i = 0; i < m; ++i)
                        softmax_backward_slice(x->grad.data() + static_cast<size_t>(i) * n,
                                               y->data.data() + static_cast<size_t>(i) * n,
                                               y->grad.data() + static_cast<size_t>(i) * n, n, 1);
                } else {
                    for (int j = 0; j < n; ++j)
                        softmax_backward_slice(x->grad.data() + j, y->data.data() + j, y->grad.data() + j, m, n);
                }
            });
        }
        return y;
    }

    Ptr activation(Activation kind, const Ptr& x) {
        if (kind == Activation::Identity) return x;
        std::vector<T> out(x->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = gelu_forward(x->data[i]);
        Ptr y = output(x->shape, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y] {
                for (size_t i = 0; i < y->grad.size(); ++i)
                    x->grad[i] += y->grad[i] * gelu_derivative(x->data[i]);
            });
        }
        return y;
    }

    // Per-row normalization to mean 0 / variance 1 (biased), then gamma * xhat + beta.
    Ptr layer_norm(const Ptr& x, const Ptr& gamma, const Ptr& beta, T eps) {
        if (x->ndim() != 2) throw DimensionError("layer_norm: input must be 2-D");
        const int m = x->shape[0], d = x->shape[1];
        if (gamma->numel() != d || beta->numel() != d)
            throw DimensionError("layer_norm: gamma/beta length mismatch");
        std::vector<T> out(x->data.size());
        auto xhat = std::make_shared<std::vector<T>>(x->data.size());
        auto inv = std::make_shared<std::vector<T>>(m);
        for (int i = 0; i < m; ++i) {
            const T* row = x->data.data() + static_cast<size_t>(i) * d;
            T mean = 0;
            for (int j = 0; j < d; ++j) mean += row[j];
            mean /= T(d);
            T var = 0;
            for (int j = 0; j < d; ++j) {
                const T c = row[j] - mean;
                var += c * c;
            }
            var /= T(d);
            const T istd = T(1) / std::sqrt(var + eps);
            (*inv)[i] = istd;
            for (int j = 0; j < d; ++j) {
                const T xh = (row[j] - mean) * istd;
                (*xhat)[static_cast<size_t>(i) * d + j] = xh;
                out[static_cast<size_t>(i) * d + j] = gamma->data[j] * xh + beta->data[j];
            }
        }
        Ptr y = output({m, d}, std::move(out), {x, gamma, beta});
        if (y->requires_grad) {
            record([x, gamma, beta, y, xhat, inv, m, d] {
                for (int i = 0; i < m; ++i) {
                    const T* gy = y->grad.data() + static_cast<size_t>(i) * d;
                    const T* xh = xhat->data() + static_cast<size_t>(i) * d;
                    if (x->requires_grad) {
                        T mean_g = 0, mean_gx = 0;
                        for (int j = 0; j < d; ++j) {
                            const T g = gy[j] * gamma->data[j];
                            mean_g += g;
                            mean_gx += g * xh[j];
                        }
                        mean_g /= T(d);
                        mean_gx /= T(d);
                        T* gx = x->grad.data() + static_cast<size_t>(i) * d;
                        for (int j = 0; j < d; ++j) {
                            const T g = gy[j] * gamma->data[j];
                            gx[j] += (*inv)[i] * (g - mean_g - xh[j] * mean_gx);
                        }
                    }
                    if (gamma->requires_grad)
                        for (int j = 0; j < d; ++j) gamma->grad[j] += gy[j] * xh[j];
                    if (beta->requires_grad)
                        for (int j = 0; j < d; ++j) beta->grad[j] += gy[j];
                }
            });
        }
        return y;
    }

    // Mean over the batch of -log softmax(logits)[label], log-sum-exp form.
    Ptr cross_entropy(const Ptr& logits, const std::vector<int>& labels) {
        if (logits->ndim() != 2) throw DimensionError("cross_entropy: logits must be 2-D");
        const int b = logits->shape[0], c = logits->shape[1];
        if (static_cast<int>(labels.size()) != b)
            throw DimensionError("cross_entropy: label count mismatch");
        for (int lab : labels)
            if (lab < 0 || lab >= c) throw InputError("cross_entropy: label out of range");
        auto probs = std::make_shared<std::vector<T>>(logits->data.size());
        T total = 0;
        for (int i = 0; i < b; ++i) {
            const T* row = logits->data.data() + static_cast<size_t>(i) * c;
            T mx = row[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            T se = 0;
            for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
            const T lse = mx + std::log(se);
            for (int j = 0; j < c; ++j)
                (*probs)[static_cast<size_t>(i) * c + j] = std::exp(row[j] - mx) / se;
            total += lse - row[labels[i]];
        }
        Ptr y = output({1}, {total / T(b)}, {logits});
        if (y->requires_grad) {
            auto labs = labels;
            record([logits, y, probs, labs, b, c] {
                const T g = y->grad[0] / T(b);
                for (int i = 0; i < b; ++i)
                    for (int j = 0; j < c; ++j) {
                        T p = (*probs)[static_cast<size_t>(i) * c + j];
                        if (j == labs[i]) p -= T(1);
                        logits->grad[static_cast<size_t>(i) * c + j] += g * p;
                    }
            });
        }
        return y;
    }

    // ---- shape plumbing ----

    Ptr slice_rows(const Ptr& x, int r0, int r1) {
        if (x->ndim() != 2) throw DimensionError("slice_rows: input must be 2-D");
        const int m = x->shape[0], n = x->shape[1];
        if (r0 < 0 || r1 > m || r0 >= r1) throw InputError("slice_rows: bad range");
        std::vector<T> out(x->data.begin() + static_cast<size_t>(r0) * n,
                           x->data.begin() + static_cast<size_t>(r1) * n);
        Ptr y = output({r1 - r0, n}, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, r0, n] {
                for (size_t i = 0; i < y->grad.size(); ++i)
                    x->grad[static_cast<size_t>(r0) * n + i] += y->grad[i];
            });
        }
        return y;
    }

    Ptr slice_cols(const Ptr& x, int c0, int c1) {
        if (x->ndim() != 2) throw DimensionError("slice_cols: input must be 2-D");
        const int m = x->shape[0], n = x->shape[1];
        if (c0 < 0 || c1 > n || c0 >= c1) throw InputError("slice_cols: bad range");
        const int w = c1 - c0;
        std::vector<T> out(static_cast<size_t>(m) * w);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                out[static_cast<size_t>(i) * w + j] = x->data[static_cast<size_t>(i) * n + c0 + j];
        Ptr y = output({m, w}, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, m, n, c0, w] {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < w; ++j)
                        x->grad[static_cast<size_t>(i) * n + c0 + j] += y->grad[static_cast<size_t>(i) * w + j];
            });
        }
        return y;
    }

    Ptr concat_rows(const std::vector<Ptr>& xs) {
        if (xs.empty()) throw UsageError("concat_rows: empty input list");
        const int n = xs[0]->cols();
        int m = 0;
        for (const auto& x : xs) {
            if (x->ndim() != 2 || x->shape[1] != n) throw DimensionError("concat_rows: column mismatch");
            m += x->shape[0];
        }
        std::vector<T> out;
        out.reserve(static_cast<size_t>(m) * n);
        for (const auto& x : xs) out.insert(out.end(), x->data.begin(), x->data.end());
        bool rec = grad_enabled_;
        bool any = false;
        for (const auto& x : xs) any = any || x->requires_grad;
        rec = rec && any;
        Ptr y = make_tensor<T>({m, n}, std::move(out), rec);
        if (rec) {
            auto inputs = xs;
            record([inputs, y] {
                size_t off = 0;
                for (const auto& x : inputs) {
                    if (x->requires_grad)
                        for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += y->grad[off + i];
                    off += x->data.size();
                }
            });
        }
        return y;
    }

    Ptr concat_cols(const std::vector<Ptr>& xs) {
        if (xs.empty()) throw UsageError("concat_cols: empty input list");
        const int m = xs[0]->rows();
        int n = 0;
        for (const auto& x : xs) {
            if (x->ndim() != 2 || x->shape[0] != m) throw DimensionError("concat_cols: row mismatch");
            n += x->shape[1];
        }
        std::vector<T> out(static_cast<size_t>(m) * n);
        int c0 = 0;
        for (const auto& x : xs) {
            const int w = x->shape[1];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    out[static_cast<size_t>(i) * n + c0 + j] = x->data[static_cast<size_t>(i) * w + j];
            c0 += w;
        }
        bool any = false;
        for (const auto& x : xs) any = any || x->requires_grad;
        const bool rec = grad_enabled_ && any;
        Ptr y = make_tensor<T>({m, n}, std::move(out), rec);
        if (rec) {
            auto inputs = xs;
            record([inputs, y, m, n] {
                int c0b = 0;
                for (const auto& x : inputs) {
                    const int w = x->shape[1];
                    if (x->requires_grad)
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < w; ++j)
                                x->grad[static_cast<size_t>(i) * w + j] +=
                                    y->grad[static_cast<size_t>(i) * n + c0b + j];
                    c0b += w;
                }
            });
        }
        return y;
    }

    // Row lookup by index; backward scatter-adds, so repeated indices accumulate.
    Ptr gather_rows(const Ptr& x, const std::vector<int>& idx) {
        if (x->ndim() != 2) throw DimensionError("gather_rows: input must be 2-D");
        const int m = x->shape[0], n = x->shape[1];
        for (int i : idx)
            if (i < 0 || i >= m) throw InputError("gather_rows: index out of range");
        std::vector<T> out(idx.size() * static_cast<size_t>(n));
        for (size_t p = 0; p < idx.size(); ++p)
            std::copy(x->data.begin() + static_cast<size_t>(idx[p]) * n,
                      x->data.begin() + static_cast<size_t>(idx[p] + 1) * n,
                      out.begin() + p * n);
        Ptr y = output({static_cast<int>(idx.size()), n}, std::move(out), {x});
        if (y->requires_grad) {
            auto ids = idx;
            record([x, y, ids, n] {
                for (size_t p = 0; p < ids.size(); ++p)
                    for (int j = 0; j < n; ++j)
                        x->grad[static_cast<size_t>(ids[p]) * n + j] += y->grad[p * n + j];
            });
        }
        return y;
    }

    Ptr sum(const Ptr& x) {
        T s = 0;
        for (T v : x->data) s += v;
        Ptr y = output({1}, {s}, {x});
        if (y->requires_grad) {
            record([x, y] {
                for (size_t i = 0; i < x->data.size(); ++i) x->grad[i] += y->grad[0];
            });
        }
        return y;
    }

    // Inverted dropout; p == 0 is a true no-op (no node, no rng draws).
    Ptr dropout(const Ptr& x, double p, Rng& rng) {
        if (p < 0.0 || p >= 1.0) throw InputError("dropout: p must be in [0,1)");
        if (p == 0.0) return x;
        auto mask = std::make_shared<std::vector<T>>(x->data.size());
        const T keep_scale = T(1.0 / (1.0 - p));
        std::vector<T> out(x->data.size());
        for (size_t i = 0; i < out.size(); ++i) {
            (*mask)[i] = rng.uniform() >= p ? keep_scale : T(0);
            out[i] = x->data[i] * (*mask)[i];
        }
        Ptr y = output(x->shape, std::move(out), {x});
        if (y->requires_grad) {
            record([x, y, mask] {
                for (size_t i = 0; i < y->grad.size(); ++i) x->grad[i] += y->grad[i] * (*mask)[i];
            });
        }
        return y;
    }

    // ---- reverse pass ----

    void backward(const Ptr& loss) {
        if (loss->numel() != 1) throw UsageError("backward: loss must be a scalar");
        if (!loss->requires_grad) throw UsageError("backward: loss is not attached to a recorded graph");
        loss->grad[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> nodes_;
    bool grad_enabled_ = true;

    Ptr output(std::vector<int> shape, std::vector<T> data, std::initializer_list<Ptr> inputs) {
        bool any = false;
        for (const auto& x : inputs) any = any || x->requires_grad;
        return make_tensor<T>(std::move(shape), std::move(data), grad_enabled_ && any);
    }

    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    static std::vector<T> softmax_slice(const T* x, int len, int stride) {
        std::vector<T> out(len);
        T mx = x[0];
        for (int i = 1; i < len; ++i) mx = std::max(mx, x[static_cast<size_t>(i) * stride]);
        T se = 0;
        for (int i = 0; i < len; ++i) {
            out[i] = std::exp(x[static_cast<size_t>(i) * stride] - mx);
            se += out[i];
        }
        for (int i = 0; i < len; ++i) out[i] /= se;
        return out;
    }

    static void softmax_backward_slice(T* gx, const T* y, const T* gy, int len, int stride) {
        T dot = 0;
        for (int i = 0; i < len; ++i)
            dot += gy[static_cast<size_t>(i) * stride] * y[static_cast<size_t>(i) * stride];
        for (int i = 0; i < len; ++i) {
            const size_t k = static_cast<size_t>(i) * stride;
            gx[k] += y[k] * (gy[k] - dot);
        }
    }

    static T gelu_forward(T x) {
        const T k = T(0.7978845608028654);  // sqrt(2/pi)
        const T u = k * (x + T(0.044715) * x * x * x);
        return T(0.5) * x * (T(1) + std::tanh(u));
    }

    static T gelu_derivative(T x) {
        const T k = T(0.7978845608028654);
        const T u = k * (x + T(0.044715) * x * x * x);
        const T t = std::tanh(u);
        return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * k * (T(1) + T(0.134145) * x * x);
    }
};

}  // namespace lotus
