#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcsim/rng.hpp"

namespace rcsim::nn {

struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(size_t i) { return a.data() + i * cols; }
    const double* row(size_t i) const { return a.data() + i * cols; }
    double& at(size_t i, size_t j) { return a[i * cols + j]; }
    double at(size_t i, size_t j) const { return a[i * cols + j]; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
    size_t size() const { return a.size(); }
};

namespace detail {

// C[i][j] (+)= dot(A.row(i), B.row(j)); rows of B are blocked by four for
// independent accumulator chains, which is what makes the hot path vectorize.
template <bool Accumulate>
inline void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
    const size_t m = A.rows, n = B.rows, K = A.cols;
    for (size_t i = 0; i < m; ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = B.row(j);
            const double* b1 = B.row(j + 1);
            const double* b2 = B.row(j + 2);
            const double* b3 = B.row(j + 3);
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (size_t k = 0; k < K; ++k) {
                const double av = arow[k];
                s0 += av * b0[k];
                s1 += av * b1[k];
                s2 += av * b2[k];
                s3 += av * b3[k];
            }
            if constexpr (Accumulate) {
                crow[j] += s0; crow[j + 1] += s1; crow[j + 2] += s2; crow[j + 3] += s3;
            } else {
                crow[j] = s0; crow[j + 1] = s1; crow[j + 2] = s2; crow[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const double* b = B.row(j);
            double s = 0;
            for (size_t k = 0; k < K; ++k) s += arow[k] * b[k];
            if constexpr (Accumulate) crow[j] += s;
            else crow[j] = s;
        }
    }
}

// C (m x n) += A^T (A is k x m) . B (k x n)
inline void matmul_tn_acc(const Matrix& A, const Matrix& B, Matrix& C) {
    for (size_t k = 0; k < A.rows; ++k) {
        const double* arow = A.row(k);
        const double* brow = B.row(k);
        for (size_t i = 0; i < A.cols; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = C.row(i);
            for (size_t j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// C (m x n) (+)= A (m x k) . B (k x n)
template <bool Accumulate>
inline void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C) {
    for (size_t i = 0; i < A.rows; ++i) {
        double* crow = C.row(i);
        if constexpr (!Accumulate) std::fill(crow, crow + C.cols, 0.0);
        const double* arow = A.row(i);
        for (size_t k = 0; k < A.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = B.row(k);
            for (size_t j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Gate rows are packed [input | forget | output | candidate].
struct LstmLayer {
    size_t input_dim = 0;
    size_t hidden_dim = 0;
    Matrix wx;    // 4H x D
    Matrix wh;    // 4H x H
    Matrix bias;  // 1 x 4H
};

struct RnnModel {
    std::vector<LstmLayer> layers;
    std::vector<Matrix> heads;    // classes x H of the top layer
    std::vector<Matrix> opt_acc;  // RMSProp accumulators, parallel to param_list()

    size_t input_dim() const { return layers.front().input_dim; }
    size_t top_hidden_dim() const { return layers.back().hidden_dim; }
    size_t num_heads() const { return heads.size(); }
    size_t num_classes(size_t head = 0) const { return heads[head].rows; }
};

inline std::vector<Matrix*> param_list(RnnModel& m) {
    std::vector<Matrix*> ps;
    for (auto& l : m.layers) {
        ps.push_back(&l.wx);
        ps.push_back(&l.wh);
        ps.push_back(&l.bias);
    }
    for (auto& h : m.heads) ps.push_back(&h);
    return ps;
}

inline std::vector<const Matrix*> param_list(const RnnModel& m) {
    std::vector<const Matrix*> ps;
    for (const auto& l : m.layers) {
        ps.push_back(&l.wx);
        ps.push_back(&l.wh);
        ps.push_back(&l.bias);
    }
    for (const auto& h : m.heads) ps.push_back(&h);
    return ps;
}

inline std::vector<Matrix> zero_like_params(const RnnModel& m) {
    std::vector<Matrix> out;
    for (const Matrix* p : param_list(m)) out.emplace_back(p->rows, p->cols);
    return out;
}

// Weights uniform in +-1/sqrt(fan_in); forget-gate bias starts at 1.
inline RnnModel make_model(size_t input_dim, std::span<const size_t> hidden_dims,
                           std::span<const size_t> head_classes, uint64_t seed) {
    if (hidden_dims.empty() || head_classes.empty())
        throw std::invalid_argument("model needs at least one layer and one head");
    Rng rng(seed);
    auto init = [&](Matrix& m, size_t fan_in) {
        const double bound = 1.0 / std::sqrt(double(fan_in));
        for (auto& v : m.a) v = rng.uniform(-bound, bound);
    };

    RnnModel model;
    size_t dim = input_dim;
    for (size_t h : hidden_dims) {
        LstmLayer layer;
        layer.input_dim = dim;
        layer.hidden_dim = h;
        layer.wx = Matrix(4 * h, dim);
        layer.wh = Matrix(4 * h, h);
        layer.bias = Matrix(1, 4 * h);
        init(layer.wx, dim);
        init(layer.wh, h);
        for (size_t j = h; j < 2 * h; ++j) layer.bias.at(0, j) = 1.0;
        model.layers.push_back(std::move(layer));
        dim = h;
    }
    for (size_t c : head_classes) {
        if (c < 2) throw std::invalid_argument("head needs >= 2 classes");
        Matrix w(c, dim);
        init(w, dim);
        model.heads.push_back(std::move(w));
    }
    model.opt_acc = zero_like_params(model);
    return model;
}

inline RnnModel make_model(size_t input_dim, std::initializer_list<size_t> hidden_dims,
                           std::initializer_list<size_t> head_classes, uint64_t seed) {
    return make_model(input_dim, std::span<const size_t>(hidden_dims.begin(), hidden_dims.size()),
                      std::span<const size_t>(head_classes.begin(), head_classes.size()), seed);
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline size_t argmax(std::span<const double> v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;  // ties keep the lowest index
    return best;
}

// Supervision at one timestep: cross-entropy of head `head` against class
// `cls`, scaled by weight.
struct StepTarget {
    size_t t = 0;
    size_t head = 0;
    size_t cls = 0;
    double weight = 1.0;
};

struct Sample {
    Matrix features;  // T x D
    std::vector<StepTarget> targets;
};

inline Sample make_classified(Matrix features, size_t label, size_t head = 0) {
    Sample s;
    s.targets.push_back({features.rows - 1, head, label, 1.0});
    s.features = std::move(features);
    return s;
}

namespace detail {

struct LayerCache {
    // per timestep: gates, cell, tanh(cell), hidden; all batch x H
    std::vector<Matrix> gi, gf, go, gg, c, tanh_c, h;
};

struct ForwardCache {
    std::vector<Matrix> x0;            // per timestep batch x D
    std::vector<LayerCache> layers;
    size_t batch = 0, steps = 0;
};

// Lockstep batched forward; every sample in the batch must share T.
inline void forward_batch(const RnnModel& model, std::span<const Sample* const> batch,
                          ForwardCache& cache) {
    const size_t B = batch.size();
    const size_t T = batch[0]->features.rows;
    const size_t D = model.input_dim();
    for (const Sample* s : batch) {
        if (s->features.rows != T) throw std::invalid_argument("batch windows must share length");
        if (s->features.cols != D) throw std::invalid_argument("feature dim mismatch");
    }
    cache.batch = B;
    cache.steps = T;
    cache.x0.assign(T, Matrix(B, D));
    for (size_t t = 0; t < T; ++t)
        for (size_t b = 0; b < B; ++b)
            std::memcpy(cache.x0[t].row(b), batch[b]->features.row(t), D * sizeof(double));

    cache.layers.assign(model.layers.size(), {});
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LstmLayer& L = model.layers[li];
        const size_t H = L.hidden_dim;
        LayerCache& lc = cache.layers[li];
        lc.gi.assign(T, Matrix(B, H));
        lc.gf.assign(T, Matrix(B, H));
        lc.go.assign(T, Matrix(B, H));
        lc.gg.assign(T, Matrix(B, H));
        lc.c.assign(T, Matrix(B, H));
        lc.tanh_c.assign(T, Matrix(B, H));
        lc.h.assign(T, Matrix(B, H));

        Matrix z(B, 4 * H);
        for (size_t t = 0; t < T; ++t) {
            const Matrix& x = li == 0 ? cache.x0[t] : cache.layers[li - 1].h[t];
            matmul_nt<false>(x, L.wx, z);
            if (t > 0) matmul_nt<true>(lc.h[t - 1], L.wh, z);
            const Matrix* c_prev = t > 0 ? &lc.c[t - 1] : nullptr;
            for (size_t b = 0; b < B; ++b) {
                const double* zb = z.row(b);
                const double* bias = L.bias.row(0);
                double* gi = lc.gi[t].row(b);
                double* gf = lc.gf[t].row(b);
                double* go = lc.go[t].row(b);
                double* gg = lc.gg[t].row(b);
                double* c = lc.c[t].row(b);
                double* tc = lc.tanh_c[t].row(b);
                double* h = lc.h[t].row(b);
                const double* cp = c_prev ? c_prev->row(b) : nullptr;
                for (size_t j = 0; j < H; ++j) {
                    gi[j] = sigmoid(zb[j] + bias[j]);
                    gf[j] = sigmoid(zb[H + j] + bias[H + j]);
                    go[j] = sigmoid(zb[2 * H + j] + bias[2 * H + j]);
                    gg[j] = std::tanh(zb[3 * H + j] + bias[3 * H + j]);
                    c[j] = gf[j] * (cp ? cp[j] : 0.0) + gi[j] * gg[j];
                    tc[j] = std::tanh(c[j]);
                    h[j] = go[j] * tc[j];
                }
            }
        }
    }
}

}  // namespace detail

// Head-0 class distribution after the final timestep.
inline std::vector<double> forward(const RnnModel& model, const Matrix& window) {
    if (window.rows == 0) throw std::invalid_argument("empty window");
    const Sample s{window, {}};
    const Sample* ptr = &s;
    detail::ForwardCache cache;
    detail::forward_batch(model, std::span<const Sample* const>(&ptr, 1), cache);
    const Matrix& h = cache.layers.back().h.back();
    const Matrix& head = model.heads[0];
    std::vector<double> logits(head.rows);
    for (size_t cls = 0; cls < head.rows; ++cls) {
        const double* w = head.row(cls);
        double s2 = 0;
        for (size_t j = 0; j < head.cols; ++j) s2 += w[j] * h.at(0, j);
        logits[cls] = s2;
    }
    return softmax(logits);
}

struct LossGrads {
    double loss = 0.0;
    std::vector<Matrix> grads;
    size_t targets = 0;
    size_t correct = 0;
};

// Mean (over the batch) of the per-sample summed target losses, plus BPTT
// gradients of the same quantity.
inline LossGrads loss_and_gradients(const RnnModel& model, std::span<const Sample> batch) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<const Sample*> ptrs;
    for (const Sample& s : batch) ptrs.push_back(&s);

    detail::ForwardCache cache;
    detail::forward_batch(model, ptrs, cache);
    const size_t B = cache.batch, T = cache.steps;
    const size_t n_layers = model.layers.size();
    const size_t n_heads = model.heads.size();
    const size_t Htop = model.top_hidden_dim();

    LossGrads out;
    out.grads = zero_like_params(model);
    const size_t head_grad_base = 3 * n_layers;

    // targets grouped per timestep; the t field is reused for the sample index
    std::vector<std::vector<StepTarget>> by_t(T);
    for (size_t b = 0; b < B; ++b)
        for (const StepTarget& tg : batch[b].targets) {
            if (tg.t >= T || tg.head >= n_heads || tg.cls >= model.num_classes(tg.head))
                throw std::invalid_argument("target out of range");
            by_t[tg.t].push_back({b, tg.head, tg.cls, tg.weight});
        }

    // dh on the top layer per timestep, fed by the heads
    std::vector<Matrix> dh_top(T, Matrix(B, Htop));
    double loss_sum = 0.0;
    for (size_t t = 0; t < T; ++t) {
        const Matrix& h = cache.layers.back().h[t];
        for (const StepTarget& tg : by_t[t]) {
            const size_t b = tg.t;  // sample index stored in t slot above
            const Matrix& W = model.heads[tg.head];
            const size_t C = W.rows;
            std::vector<double> logits(C);
            for (size_t cls = 0; cls < C; ++cls) {
                const double* w = W.row(cls);
                const double* hb = h.row(b);
                double s = 0;
                for (size_t j = 0; j < Htop; ++j) s += w[j] * hb[j];
                logits[cls] = s;
            }
            std::vector<double> p = softmax(logits);
            loss_sum += tg.weight * -std::log(std::max(p[tg.cls], 1e-300));
            out.targets += 1;
            if (argmax(p) == tg.cls) out.correct += 1;

            Matrix& dW = out.grads[head_grad_base + tg.head];
            double* dh = dh_top[t].row(b);
            const double* hb = h.row(b);
            const double scale = tg.weight / double(B);
            for (size_t cls = 0; cls < C; ++cls) {
                const double dl = scale * (p[cls] - (cls == tg.cls ? 1.0 : 0.0));
                if (dl == 0.0) continue;
                double* dwrow = dW.row(cls);
                const double* wrow = W.row(cls);
                for (size_t j = 0; j < Htop; ++j) {
                    dwrow[j] += dl * hb[j];
                    dh[j] += dl * wrow[j];
                }
            }
        }
    }
    out.loss = loss_sum / double(B);

    // BPTT, top layer down, t backwards
    std::vector<Matrix> dh_carry, dc_carry;
    for (const auto& L : model.layers) {
        dh_carry.emplace_back(B, L.hidden_dim);
        dc_carry.emplace_back(B, L.hidden_dim);
    }
    std::vector<Matrix> dx(n_layers);  // dX of each layer at the current t
    for (size_t li = 0; li < n_layers; ++li)
        dx[li] = Matrix(B, model.layers[li].input_dim);

    Matrix dz;
    for (size_t t = T; t-- > 0;) {
        for (size_t li = n_layers; li-- > 0;) {
            const LstmLayer& L = model.layers[li];
            const size_t H = L.hidden_dim;
            const detail::LayerCache& lc = cache.layers[li];
            dz = Matrix(B, 4 * H);

            const Matrix* dh_above = li + 1 < n_layers ? &dx[li + 1] : nullptr;
            const Matrix* from_heads = li + 1 == n_layers ? &dh_top[t] : nullptr;
            const Matrix* c_prev = t > 0 ? &lc.c[t - 1] : nullptr;

            for (size_t b = 0; b < B; ++b) {
                const double* gi = lc.gi[t].row(b);
                const double* gf = lc.gf[t].row(b);
                const double* go = lc.go[t].row(b);
                const double* gg = lc.gg[t].row(b);
                const double* tc = lc.tanh_c[t].row(b);
                const double* cp = c_prev ? c_prev->row(b) : nullptr;
                double* dh = dh_carry[li].row(b);
                double* dc = dc_carry[li].row(b);
                double* dzb = dz.row(b);
                const double* up = dh_above ? dh_above->row(b) : nullptr;
                const double* hd = from_heads ? from_heads->row(b) : nullptr;
                for (size_t j = 0; j < H; ++j) {
                    double dhj = dh[j] + (up ? up[j] : 0.0) + (hd ? hd[j] : 0.0);
                    const double doj = dhj * tc[j];
                    double dcj = dc[j] + dhj * go[j] * (1.0 - tc[j] * tc[j]);
                    const double dij = dcj * gg[j];
                    const double dgj = dcj * gi[j];
                    const double dfj = dcj * (cp ? cp[j] : 0.0);
                    dzb[j] = dij * gi[j] * (1.0 - gi[j]);
                    dzb[H + j] = dfj * gf[j] * (1.0 - gf[j]);
                    dzb[2 * H + j] = doj * go[j] * (1.0 - go[j]);
                    dzb[3 * H + j] = dgj * (1.0 - gg[j] * gg[j]);
                    dc[j] = dcj * gf[j];  // carried to t-1
                    dh[j] = 0.0;          // refilled below via wh
                }
            }

            Matrix& dwx = out.grads[3 * li];
            Matrix& dwh = out.grads[3 * li + 1];
            Matrix& dbias = out.grads[3 * li + 2];
            const Matrix& x = li == 0 ? cache.x0[t] : cache.layers[li - 1].h[t];
            detail::matmul_tn_acc(dz, x, dwx);
            if (t > 0) {
                detail::matmul_tn_acc(dz, lc.h[t - 1], dwh);
                detail::matmul_nn<false>(dz, L.wh, dh_carry[li]);
            }
            for (size_t b = 0; b < B; ++b) {
                const double* dzb = dz.row(b);
                double* db = dbias.row(0);
                for (size_t j = 0; j < 4 * H; ++j) db[j] += dzb[j];
            }
            detail::matmul_nn<false>(dz, L.wx, dx[li]);
        }
    }
    return out;
}

inline double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.a) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& g : grads)
            for (double& v : g.a) v *= scale;
    }
    return norm;
}

struct TrainConfig {
    double learning_rate = 0.001;
    double rho = 0.9;
    double epsilon = 1e-7;
    size_t batch_size = 32;
    size_t epochs = 10;
    uint64_t seed = 1;
    double clip_norm = 5.0;

    void validate() const {
        if (learning_rate <= 0 || epsilon <= 0) throw std::invalid_argument("bad optimizer config");
        if (rho <= 0 || rho >= 1) throw std::invalid_argument("rho must be in (0,1)");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    }
};

// acc <- rho*acc + (1-rho)*g^2 ; param <- param - lr*g/(sqrt(acc)+eps)
inline void rmsprop_step(RnnModel& model, const std::vector<Matrix>& grads,
                         const TrainConfig& cfg) {
    auto params = param_list(model);
    if (grads.size() != params.size()) throw std::invalid_argument("gradient shape mismatch");
    for (size_t p = 0; p < params.size(); ++p) {
        Matrix& acc = model.opt_acc[p];
        Matrix& w = *params[p];
        const Matrix& g = grads[p];
        if (g.size() != w.size()) throw std::invalid_argument("gradient shape mismatch");
        for (size_t i = 0; i < w.size(); ++i) {
            acc.a[i] = cfg.rho * acc.a[i] + (1.0 - cfg.rho) * g.a[i] * g.a[i];
            w.a[i] -= cfg.learning_rate * g.a[i] / (std::sqrt(acc.a[i]) + cfg.epsilon);
        }
    }
}

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

inline std::vector<EpochStats> train(RnnModel& model, std::span<const Sample> dataset,
                                     const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    std::vector<EpochStats> history;
    Rng rng(cfg.seed);
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        size_t targets = 0, correct = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Sample> batch;  // shallow copies are fine: features are small
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            LossGrads lg = loss_and_gradients(model, batch);
            clip_global_norm(lg.grads, cfg.clip_norm);
            rmsprop_step(model, lg.grads, cfg);
            loss_sum += lg.loss * double(end - start);
            targets += lg.targets;
            correct += lg.correct;
        }
        EpochStats st;
        st.loss = loss_sum / double(dataset.size());
        st.accuracy = targets ? double(correct) / double(targets) : 0.0;
        history.push_back(st);
    }
    return history;
}

struct HeadStats {
    size_t targets = 0;
    size_t correct = 0;

    double accuracy() const { return targets ? double(correct) / double(targets) : 0.0; }
};

// Per-head argmax accuracy over all targets, no parameter updates.
inline std::vector<HeadStats> evaluate(const RnnModel& model, std::span<const Sample> data,
                                       size_t batch_size = 32) {
    std::vector<HeadStats> stats(model.num_heads());
    detail::ForwardCache cache;
    for (size_t start = 0; start < data.size(); start += batch_size) {
        const size_t end = std::min(data.size(), start + batch_size);
        std::vector<const Sample*> ptrs;
        for (size_t i = start; i < end; ++i) ptrs.push_back(&data[i]);
        detail::forward_batch(model, ptrs, cache);
        const size_t Htop = model.top_hidden_dim();
        for (size_t b = 0; b < ptrs.size(); ++b) {
            for (const StepTarget& tg : ptrs[b]->targets) {
                const Matrix& W = model.heads[tg.head];
                const double* h = cache.layers.back().h[tg.t].row(b);
                std::vector<double> logits(W.rows);
                for (size_t cls = 0; cls < W.rows; ++cls) {
                    const double* w = W.row(cls);
                    double s = 0;
                    for (size_t j = 0; j < Htop; ++j) s += w[j] * h[j];
                    logits[cls] = s;
                }
                stats[tg.head].targets += 1;
                if (argmax(logits) == tg.cls) stats[tg.head].correct += 1;
            }
        }
    }
    return stats;
}

// Streaming single-timestep inference with persistent hidden/cell state.
class StreamState {
public:
    explicit StreamState(const RnnModel& model) {
        for (const auto& L : model.layers) {
            h_.emplace_back(L.hidden_dim, 0.0);
            c_.emplace_back(L.hidden_dim, 0.0);
        }
    }

    void reset() {
        for (auto& v : h_) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : c_) std::fill(v.begin(), v.end(), 0.0);
    }

    // consumes one feature row, returns each head's distribution
    std::vector<std::vector<double>> step(const RnnModel& model, std::span<const double> x) {
        const double* in = x.data();
        size_t in_dim = x.size();
        for (size_t li = 0; li < model.layers.size(); ++li) {
            const LstmLayer& L = model.layers[li];
            const size_t H = L.hidden_dim;
            if (in_dim != L.input_dim) throw std::invalid_argument("feature dim mismatch");
            z_.assign(4 * H, 0.0);
            matvec_acc(L.wx, in, in_dim, z_.data());
            matvec_acc(L.wh, h_[li].data(), H, z_.data());
            const double* bias = L.bias.row(0);
            double* h = h_[li].data();  // z_ already consumed the old h
            double* c = c_[li].data();
            for (size_t j = 0; j < H; ++j) {
                const double gi = detail::sigmoid(z_[j] + bias[j]);
                const double gf = detail::sigmoid(z_[H + j] + bias[H + j]);
                const double go = detail::sigmoid(z_[2 * H + j] + bias[2 * H + j]);
                const double gg = std::tanh(z_[3 * H + j] + bias[3 * H + j]);
                c[j] = gf * c[j] + gi * gg;
                h[j] = go * std::tanh(c[j]);
            }
            in = h;
            in_dim = H;
        }
        std::vector<std::vector<double>> out;
        out.reserve(model.heads.size());
        for (const Matrix& W : model.heads) {
            std::vector<double> logits(W.rows, 0.0);
            matvec_acc(W, in, in_dim, logits.data());
            out.push_back(softmax(logits));
        }
        return out;
    }

private:
    // y += W . x, rows blocked by four
    static void matvec_acc(const Matrix& W, const double* x, size_t dim, double* y) {
        size_t i = 0;
        for (; i + 4 <= W.rows; i += 4) {
            const double* r0 = W.row(i);
            const double* r1 = W.row(i + 1);
            const double* r2 = W.row(i + 2);
            const double* r3 = W.row(i + 3);
            double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
            for (size_t k = 0; k < dim; ++k) {
                const double xv = x[k];
                s0 += r0[k] * xv;
                s1 += r1[k] * xv;
                s2 += r2[k] * xv;
                s3 += r3[k] * xv;
            }
            y[i] += s0; y[i + 1] += s1; y[i + 2] += s2; y[i + 3] += s3;
        }
        for (; i < W.rows; ++i) {
            const double* r = W.row(i);
            double s = 0;
            for (size_t k = 0; k < dim; ++k) s += r[k] * x[k];
            y[i] += s;
        }
    }

    std::vector<std::vector<double>> h_, c_;
    std::vector<double> z_;
};

// ---- serialization ----------------------------------------------------
//
// Little-endian binary layout:
//   magic "RNN1", u32 version, u32 input_dim, u32 n_layers, u32 hidden[...],
//   u32 n_heads, u32 classes[...], then f64 parameter arrays in param_list
//   order (per layer wx, wh, bias row-major; then each head row-major).
// Optimizer accumulators are not stored; loading resets them.

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                 char((v >> 24) & 0xff)};
    os.write(b, 4);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

inline void put_f64(std::ostream& os, double d) {
    const uint64_t v = std::bit_cast<uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace detail

inline void save_model(const RnnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("RNN1", 4);
    detail::put_u32(out, 1);
    detail::put_u32(out, uint32_t(model.input_dim()));
    detail::put_u32(out, uint32_t(model.layers.size()));
    for (const auto& l : model.layers) detail::put_u32(out, uint32_t(l.hidden_dim));
    detail::put_u32(out, uint32_t(model.heads.size()));
    for (const auto& h : model.heads) detail::put_u32(out, uint32_t(h.rows));
    for (const Matrix* p : param_list(model))
        for (double v : p->a) detail::put_f64(out, v);
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline RnnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RNN1", 4) != 0)
        throw std::runtime_error("not a model file: " + path);
    if (detail::get_u32(in) != 1) throw std::runtime_error("unsupported model version: " + path);
    const uint32_t input_dim = detail::get_u32(in);
    const uint32_t n_layers = detail::get_u32(in);
    std::vector<size_t> hidden(n_layers);
    for (auto& h : hidden) h = detail::get_u32(in);
    const uint32_t n_heads = detail::get_u32(in);
    std::vector<size_t> classes(n_heads);
    for (auto& c : classes) c = detail::get_u32(in);
    if (!in) throw std::runtime_error("truncated model file: " + path);

    RnnModel model = make_model(input_dim, hidden, classes, /*seed=*/0);
    for (Matrix* p : param_list(model))
        for (double& v : p->a) v = detail::get_f64(in);
    if (!in) throw std::runtime_error("truncated model file: " + path);
    for (auto& acc : model.opt_acc) acc.zero();
    return model;
}

}  // namespace rcsim::nn
