#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rcsim/nn.hpp"
#include "rcsim/oracle.hpp"
#include "rcsim/policies.hpp"
#include "rcsim/trace.hpp"

namespace rcsim {

constexpr size_t kCharacterizerWindow = 100;
constexpr size_t kCharacterizerFeatureDim = 4;
constexpr size_t kCacheFeatureDim = 6;

inline nn::RnnModel make_characterizer_model(uint64_t seed, size_t hidden = 50) {
    return nn::make_model(kCharacterizerFeatureDim, {hidden}, {size_t(kNumCategories)}, seed);
}

inline nn::RnnModel make_cache_model(uint64_t seed, std::span<const size_t> hidden) {
    static constexpr size_t heads[] = {2, 3};  // admit, duration
    return nn::make_model(kCacheFeatureDim, hidden, heads, seed);
}

inline nn::RnnModel make_cache_model(uint64_t seed) {
    const size_t dims[] = {256, 256, 256};
    return make_cache_model(seed, dims);
}

// Rows: [ln(1+interarrival_us), page/max page in window, ln(size_pages), read flag]
inline nn::Matrix extract_characterizer_features(std::span<const IoRequest> window) {
    if (window.empty()) throw std::invalid_argument("empty window");
    nn::Matrix rows(window.size(), kCharacterizerFeatureDim);
    int64_t max_pid = 0;
    for (const auto& r : window) max_pid = std::max(max_pid, r.page_id);
    for (size_t t = 0; t < window.size(); ++t) {
        const IoRequest& r = window[t];
        const double gap = t == 0 ? 0.0 : double(r.timestamp_us - window[t - 1].timestamp_us);
        rows.at(t, 0) = t == 0 ? 0.0 : std::log1p(gap);
        rows.at(t, 1) = max_pid > 0 ? double(r.page_id) / double(max_pid) : 0.0;
        rows.at(t, 2) = std::log(double(r.size_pages));
        rows.at(t, 3) = r.op == Op::Read ? 1.0 : 0.0;
    }
    return rows;
}

inline std::pair<WorkloadCategory, std::vector<double>> classify_workload(
    const nn::RnnModel& model, std::span<const IoRequest> window) {
    auto probs = nn::forward(model, extract_characterizer_features(window));
    return {WorkloadCategory(int(nn::argmax(probs))), std::move(probs)};
}

// windows labeled with the trace's ground-truth category
inline std::vector<nn::Sample> build_characterizer_samples(const Trace& trace,
                                                           size_t window_len = kCharacterizerWindow) {
    if (!trace.category) throw std::invalid_argument("trace has no category label");
    std::vector<nn::Sample> samples;
    for (auto window : split_windows(trace, window_len))
        samples.push_back(
            nn::make_classified(extract_characterizer_features(window), size_t(*trace.category)));
    return samples;
}

// ---- cache-decision model features ------------------------------------

// Decision tags of the previous request, as fed back into the model. A
// request that was not admitted (hit or bypass) carries no label; the absent
// flag keeps that distinguishable from label soon. The start of a stream has
// no previous request at all and uses the otherwise impossible encoding
// cached=0/absent=0.
struct PrevDecision {
    bool cached = false;
    std::optional<DurationLabel> label;
};

inline double duration_label_scale(DurationLabel l) {
    switch (l) {
        case DurationLabel::Soon: return 0.0;
        case DurationLabel::Mean: return 0.5;
        case DurationLabel::Late: return 1.0;
    }
    return 0.0;
}

// Row: [page/running max page, ln(size_pages), read flag, prev cached,
//       prev label scale, prev label absent]
inline void extract_cache_features(const IoRequest& req, const std::optional<PrevDecision>& prev,
                                   int64_t running_max_pid, double* out) {
    out[0] = running_max_pid > 0 ? double(req.page_id) / double(running_max_pid) : 0.0;
    out[1] = std::log(double(req.size_pages));
    out[2] = req.op == Op::Read ? 1.0 : 0.0;
    out[3] = prev && prev->cached ? 1.0 : 0.0;
    out[4] = prev && prev->label ? duration_label_scale(*prev->label) : 0.0;
    out[5] = prev && !prev->label ? 1.0 : 0.0;
}

// Optional upweighting of the cached class, for workloads where residency
// tags are rare enough that the admit head would collapse to all-ignore.
constexpr double kDefaultAdmitWeight = 1.0;

// Teacher-forced training windows: row t carries the oracle's tags for
// request t-1 and is supervised with request t's own tags. The admit head is
// trained on every row (cached rows upweighted), the duration head only on
// cached rows.
inline std::vector<nn::Sample> build_cache_samples(std::span<const LabeledRequest> labeled,
                                                   size_t window_len = kCharacterizerWindow,
                                                   double admit_weight = kDefaultAdmitWeight) {
    const size_t n_windows = labeled.size() / window_len;
    std::vector<nn::Sample> samples;
    samples.reserve(n_windows);
    int64_t running_max = 0;
    std::optional<PrevDecision> prev;
    for (size_t w = 0; w < n_windows; ++w) {
        nn::Sample s;
        s.features = nn::Matrix(window_len, kCacheFeatureDim);
        for (size_t t = 0; t < window_len; ++t) {
            const LabeledRequest& lr = labeled[w * window_len + t];
            running_max = std::max(running_max, lr.request.page_id);
            extract_cache_features(lr.request, prev, running_max, s.features.row(t));
            s.targets.push_back({t, 0, lr.cached ? size_t(1) : size_t(0),
                                 lr.cached ? admit_weight : 1.0});
            if (lr.cached) s.targets.push_back({t, 1, size_t(*lr.duration_label), 1.0});
            prev = PrevDecision{lr.cached, lr.duration_label};
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

// At inference the decision feedback comes from the model itself, so one
// early deviation from the oracle would otherwise put every later row off
// the teacher-forced feature distribution. Appending copies with randomly
// corrupted feedback features (targets untouched) makes the learned rule
// hold up under its own mistakes.
inline std::vector<nn::Sample> augment_feedback_noise(std::span<const nn::Sample> samples,
                                                      double noise, uint64_t seed) {
    Rng rng(seed);
    std::vector<nn::Sample> noisy(samples.begin(), samples.end());
    for (auto& s : noisy) {
        for (size_t t = 0; t < s.features.rows; ++t) {
            double* row = s.features.row(t);
            if (row[3] == 0.0 && row[5] == 0.0) continue;  // keep the stream-start marker
            if (!rng.bernoulli(noise)) continue;
            if (rng.bernoulli(0.5)) {
                row[3] = 1.0;
                row[4] = 0.5 * double(rng.index(3));
                row[5] = 0.0;
            } else {
                row[3] = 0.0;
                row[4] = 0.0;
                row[5] = 1.0;
            }
        }
    }
    return noisy;
}

constexpr double kDefaultFeedbackNoise = 0.3;

inline nn::RnnModel train_cache_model(std::span<const LabeledRequest> labeled,
                                      const nn::TrainConfig& cfg, std::span<const size_t> hidden,
                                      size_t window_len = kCharacterizerWindow,
                                      double admit_weight = kDefaultAdmitWeight,
                                      double feedback_noise = kDefaultFeedbackNoise) {
    auto samples = build_cache_samples(labeled, window_len, admit_weight);
    if (samples.empty()) throw std::invalid_argument("not enough labeled requests for a window");
    if (feedback_noise > 0.0) {
        auto noisy = augment_feedback_noise(samples, feedback_noise, cfg.seed ^ 0x9e3779b97f4a7c15ull);
        samples.insert(samples.end(), std::make_move_iterator(noisy.begin()),
                       std::make_move_iterator(noisy.end()));
    }
    nn::RnnModel model = make_cache_model(cfg.seed, hidden);
    nn::train(model, samples, cfg);
    return model;
}

inline nn::RnnModel train_cache_model(std::span<const LabeledRequest> labeled,
                                      const nn::TrainConfig& cfg) {
    const size_t dims[] = {256, 256, 256};
    return train_cache_model(labeled, cfg, dims);
}

// Closed-loop decision stream: the model consumes one feature row per
// request, built from the manager's own previous decision rather than oracle
// tags. Training processes fixed-length windows from a fresh recurrent
// state, so inference re-zeroes the state on the same cadence (the decision
// feedback stays continuous across the boundary); anything else puts the
// LSTM state off the distribution it was trained on.
class CacheDecisionStream {
public:
    explicit CacheDecisionStream(const nn::RnnModel* model,
                                 size_t window_len = kCharacterizerWindow)
        : model_(model), state_(*model), features_(kCacheFeatureDim), window_len_(window_len) {}

    // advances the RNN one step and decodes both heads
    ModelDecision decide(const IoRequest& req) {
        if (step_ > 0 && step_ % window_len_ == 0) state_.reset();
        ++step_;
        running_max_ = std::max(running_max_, req.page_id);
        extract_cache_features(req, prev_, running_max_, features_.data());
        auto heads = state_.step(*model_, features_);
        ModelDecision d;
        d.admit = nn::argmax(heads[0]) == 1;
        d.label = DurationLabel(int(nn::argmax(heads[1])));
        return d;
    }

    // What the cache manager actually did with the request: resident after
    // the access (hit or admission) feeds back cached=1 with the residency
    // label, mirroring how the training rows were tagged.
    void record_outcome(Decision outcome, DurationLabel label) {
        if (outcome == Decision::MissBypass) prev_ = PrevDecision{false, std::nullopt};
        else prev_ = PrevDecision{true, label};
    }

    // model swap keeps the feedback features but clears recurrent state
    void swap_model(const nn::RnnModel* model) {
        model_ = model;
        state_ = nn::StreamState(*model);
        step_ = 0;
    }

    const nn::RnnModel* model() const { return model_; }
    const std::vector<double>& last_features() const { return features_; }

private:
    const nn::RnnModel* model_;
    nn::StreamState state_;
    std::vector<double> features_;
    std::optional<PrevDecision> prev_;
    int64_t running_max_ = 0;
    size_t window_len_;
    size_t step_ = 0;
};

// duration-head argmax for one feature row from a fresh zero state
inline DurationLabel relabel_duration(const nn::RnnModel& model, std::span<const double> row) {
    nn::StreamState state(model);
    auto heads = state.step(model, row);
    return DurationLabel(int(nn::argmax(heads[1])));
}

// ---- baseline characterizers -------------------------------------------

enum class AccessType : int { Strided = 0, Sequential = 1, Random = 2, Overlapped = 3 };

struct TwsdParams {
    uint32_t seq_size_threshold_pages = 16;  // 64 KB
    int64_t stride_gap_pages = 8;
    size_t history = 16;
};

// Precedence: sequential > overlapped > strided > random.
inline AccessType twsd_classify(const IoRequest& req, std::span<const IoRequest> recent,
                                const TwsdParams& params = {}) {
    if (req.size_pages >= params.seq_size_threshold_pages) return AccessType::Sequential;
    const size_t start = recent.size() > params.history ? recent.size() - params.history : 0;
    bool overlapped = false;
    int64_t min_gap = std::numeric_limits<int64_t>::max();
    for (size_t i = start; i < recent.size(); ++i) {
        const IoRequest& prev = recent[i];
        if (req.page_id == prev.end_page() || req.end_page() == prev.page_id)
            return AccessType::Sequential;
        if (req.page_id < prev.end_page() && prev.page_id < req.end_page()) {
            overlapped = true;
            continue;
        }
        const int64_t gap = req.page_id >= prev.end_page() ? req.page_id - prev.end_page()
                                                           : prev.page_id - req.end_page();
        min_gap = std::min(min_gap, gap);
    }
    if (overlapped) return AccessType::Overlapped;
    if (min_gap <= params.stride_gap_pages) return AccessType::Strided;
    return AccessType::Random;
}

enum class BaselineMethod { TWSD, Frequency, IOSize };

inline std::optional<BaselineMethod> baseline_method_from_name(std::string_view s) {
    if (s == "twsd") return BaselineMethod::TWSD;
    if (s == "frequency") return BaselineMethod::Frequency;
    if (s == "iosize") return BaselineMethod::IOSize;
    return std::nullopt;
}

// Window summary for a shallow classifier. TWSD: four type fractions;
// Frequency: mean per-page access count, read fraction, mean size; IOSize:
// eight log-spaced size bins.
inline std::vector<double> baseline_characterize(BaselineMethod method,
                                                 std::span<const IoRequest> window) {
    if (window.empty()) throw std::invalid_argument("empty window");
    const double n = double(window.size());
    switch (method) {
        case BaselineMethod::TWSD: {
            std::vector<double> hist(4, 0.0);
            for (size_t i = 0; i < window.size(); ++i)
                hist[size_t(twsd_classify(window[i], window.subspan(0, i)))] += 1.0;
            for (auto& v : hist) v /= n;
            return hist;
        }
        case BaselineMethod::Frequency: {
            std::unordered_map<int64_t, uint64_t> freq;
            double reads = 0, size_sum = 0;
            for (const auto& r : window) {
                ++freq[r.page_id];
                reads += r.op == Op::Read;
                size_sum += double(r.size_pages);
            }
            return {n / double(freq.size()), reads / n, size_sum / n};
        }
        case BaselineMethod::IOSize: {
            std::vector<double> hist(8, 0.0);
            for (const auto& r : window) {
                size_t bin = 0;
                for (uint32_t s = r.size_pages; s > 1 && bin < 7; s >>= 1) ++bin;
                hist[bin] += 1.0;
            }
            for (auto& v : hist) v /= n;
            return hist;
        }
    }
    throw std::logic_error("unknown method");
}

// Single softmax layer over window summaries; full-batch gradient descent.
class SoftmaxClassifier {
public:
    SoftmaxClassifier(size_t dim, size_t classes) : w_(classes, dim) {}

    void fit(std::span<const std::vector<double>> xs, std::span<const size_t> ys, size_t epochs,
             double lr) {
        if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("bad training data");
        nn::Matrix grad(w_.rows, w_.cols);
        for (size_t e = 0; e < epochs; ++e) {
            grad.zero();
            for (size_t i = 0; i < xs.size(); ++i) {
                auto p = probabilities(xs[i]);
                for (size_t c = 0; c < w_.rows; ++c) {
                    const double d = (p[c] - (c == ys[i] ? 1.0 : 0.0)) / double(xs.size());
                    for (size_t j = 0; j < w_.cols; ++j) grad.at(c, j) += d * xs[i][j];
                }
            }
            for (size_t k = 0; k < w_.size(); ++k) w_.a[k] -= lr * grad.a[k];
        }
    }

    std::vector<double> probabilities(std::span<const double> x) const {
        std::vector<double> logits(w_.rows, 0.0);
        for (size_t c = 0; c < w_.rows; ++c)
            for (size_t j = 0; j < w_.cols; ++j) logits[c] += w_.at(c, j) * x[j];
        return nn::softmax(logits);
    }

    size_t predict(std::span<const double> x) const { return nn::argmax(probabilities(x)); }

private:
    nn::Matrix w_;
};

}  // namespace rcsim
