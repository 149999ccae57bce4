#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcsim/characterize.hpp"
#include "rcsim/device.hpp"
#include "rcsim/oracle.hpp"
#include "rcsim/policies.hpp"
#include "rcsim/trace.hpp"

namespace rcsim {

struct Metrics {
    uint64_t requests = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t admissions = 0;
    uint64_t bypasses = 0;
    uint64_t replacements = 0;
    uint64_t ssd_writes = 0;
    uint64_t write_hits = 0;
    double modeled_latency_ms_total = 0.0;
    std::vector<double> window_hit_ratio;                       // per metrics window
    std::vector<std::pair<size_t, WorkloadCategory>> switches;  // reconfiguration events

    double hit_ratio() const { return requests ? double(hits) / double(requests) : 0.0; }
    double mean_latency_ms() const {
        return requests ? modeled_latency_ms_total / double(requests) : 0.0;
    }

    // hits+misses=N, admissions+bypasses=misses, replacements<=admissions,
    // ssd_writes=admissions+write_hits
    bool conservation_holds() const {
        return hits + misses == requests && admissions + bypasses == misses &&
               replacements <= admissions && ssd_writes == admissions + write_hits;
    }
};

struct SimConfig {
    uint64_t capacity_pages = 1024;
    DeviceModel device;
    uint64_t seed = 0;
    size_t metrics_window = 1000;   // granularity of the hit-ratio series
    double rcrnn_overhead_ms = 0.0; // constant per-request model cost, off by default
    size_t monitor_buffer = 1000;
    size_t monitor_window = 100;
};

// trained models driving the rcrnn policy
struct RcrnnModels {
    const nn::RnnModel* characterizer = nullptr;
    std::array<const nn::RnnModel*, kNumCategories> per_category{};
    const nn::RnnModel* single = nullptr;  // used when monitoring is off
    WorkloadCategory initial = WorkloadCategory::MailServer;
    bool monitor_enabled = false;

    const nn::RnnModel* initial_model() const {
        if (monitor_enabled) return per_category[size_t(initial)];
        return single ? single : per_category[size_t(initial)];
    }
};

using WindowClassifier = std::function<WorkloadCategory(std::span<const IoRequest>)>;

// Captures a fixed number of requests, classifies them in characterizer
// windows, and majority-votes the workload category. Ties keep the current
// category.
class WorkloadMonitor {
public:
    WorkloadMonitor(WindowClassifier classifier, WorkloadCategory initial, size_t buffer_len = 1000,
                    size_t window_len = 100)
        : classifier_(std::move(classifier)), current_(initial), buffer_len_(buffer_len),
          window_len_(window_len) {
        buffer_.reserve(buffer_len);
    }

    std::optional<WorkloadCategory> push(const IoRequest& req) {
        buffer_.push_back(req);
        if (buffer_.size() < buffer_len_) return std::nullopt;
        std::array<size_t, kNumCategories> votes{};
        for (auto window : split_windows(std::span<const IoRequest>(buffer_), window_len_))
            votes[size_t(classifier_(window))] += 1;
        buffer_.clear();

        size_t best = size_t(current_);
        for (size_t c = 0; c < votes.size(); ++c)
            if (votes[c] > votes[best]) best = c;
        if (best == size_t(current_)) return std::nullopt;
        current_ = WorkloadCategory(int(best));
        return current_;
    }

    WorkloadCategory current() const { return current_; }

private:
    WindowClassifier classifier_;
    WorkloadCategory current_;
    size_t buffer_len_;
    size_t window_len_;
    std::vector<IoRequest> buffer_;
};

inline const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> names = {"lru",   "access", "larc",
                                                   "rcrnn", "belady", "oracle-benefit"};
    return names;
}

inline Metrics simulate(const Trace& trace, std::string_view policy_name, const SimConfig& cfg,
                        const RcrnnModels* models = nullptr) {
    if (cfg.capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    cfg.device.validate();

    // rcrnn plumbing: the decision stream feeds the policy through its
    // provider; everything else ignores it
    std::unique_ptr<CacheDecisionStream> stream;
    std::unique_ptr<WorkloadMonitor> monitor;
    std::unordered_map<int64_t, std::vector<double>> last_row;  // page -> feature row
    ModelDecision last_decision;
    RcrnnPolicy* rcrnn = nullptr;

    std::unique_ptr<CachePolicy> policy;
    if (policy_name == "lru") {
        policy = std::make_unique<LruPolicy>(cfg.capacity_pages);
    } else if (policy_name == "access") {
        policy = std::make_unique<AccessFreqPolicy>(cfg.capacity_pages);
    } else if (policy_name == "larc") {
        policy = std::make_unique<LarcPolicy>(cfg.capacity_pages);
    } else if (policy_name == "belady") {
        policy = std::make_unique<BeladyPolicy>(trace, cfg.capacity_pages);
    } else if (policy_name == "oracle-benefit") {
        policy = std::make_unique<OracleBenefitPolicy>(aggregate_page_stats(trace, cfg.device),
                                                       cfg.capacity_pages);
    } else if (policy_name == "rcrnn") {
        if (!models || !models->initial_model())
            throw std::invalid_argument("models.cache: rcrnn policy needs a cache model");
        stream = std::make_unique<CacheDecisionStream>(models->initial_model());
        auto provider = [&stream, &last_decision](const IoRequest& r, size_t) {
            last_decision = stream->decide(r);
            return last_decision;
        };
        auto p = std::make_unique<RcrnnPolicy>(cfg.capacity_pages, provider);
        rcrnn = p.get();
        policy = std::move(p);
        if (models->monitor_enabled) {
            if (!models->characterizer)
                throw std::invalid_argument("models.characterizer: monitoring needs a characterizer");
            const nn::RnnModel* ch = models->characterizer;
            monitor = std::make_unique<WorkloadMonitor>(
                [ch](std::span<const IoRequest> w) { return classify_workload(*ch, w).first; },
                models->initial, cfg.monitor_buffer, cfg.monitor_window);
        }
    } else {
        throw std::invalid_argument("unknown policy '" + std::string(policy_name) + "'");
    }

    Metrics m;
    m.requests = trace.requests.size();
    std::optional<IoRequest> prev;
    uint64_t window_hits = 0;
    size_t window_fill = 0;

    for (size_t i = 0; i < trace.requests.size(); ++i) {
        const IoRequest& req = trace.requests[i];
        const bool seq = is_sequential(prev, req);
        const AccessOutcome out = policy->on_access(req, i);

        switch (out.decision) {
            case Decision::Hit:
                ++m.hits;
                ++window_hits;
                m.modeled_latency_ms_total += response_time_ms(cfg.device, req, Device::SSD, seq);
                if (req.op == Op::Write) {
                    ++m.write_hits;
                    ++m.ssd_writes;
                }
                break;
            case Decision::MissBypass:
                ++m.misses;
                ++m.bypasses;
                m.modeled_latency_ms_total += response_time_ms(cfg.device, req, Device::HDD, seq);
                break;
            case Decision::MissAdmit: {
                ++m.misses;
                ++m.admissions;
                ++m.ssd_writes;
                if (out.evicted_pages > 0) ++m.replacements;
                IoRequest copy = req;
                copy.op = Op::Write;  // admission copies the data into the cache
                m.modeled_latency_ms_total +=
                    response_time_ms(cfg.device, req, Device::HDD, seq) +
                    response_time_ms(cfg.device, copy, Device::SSD, seq);
                break;
            }
        }

        if (stream) {
            m.modeled_latency_ms_total += cfg.rcrnn_overhead_ms;
            DurationLabel feedback = last_decision.label;
            if (out.decision == Decision::Hit)
                feedback = rcrnn->label_of(req.page_id).value_or(feedback);
            stream->record_outcome(out.decision, feedback);
            for (int64_t p = req.page_id; p < req.end_page(); ++p)
                last_row[p] = stream->last_features();
            if (monitor) {
                if (auto switched = monitor->push(req)) {
                    const nn::RnnModel* next = models->per_category[size_t(*switched)];
                    if (next) {
                        m.switches.emplace_back(i, *switched);
                        stream->swap_model(next);
                        rcrnn->relabel_residents([&](int64_t page) {
                            return relabel_duration(*next, last_row.at(page));
                        });
                    }
                }
            }
        }

        if (++window_fill == cfg.metrics_window) {
            m.window_hit_ratio.push_back(double(window_hits) / double(cfg.metrics_window));
            window_hits = 0;
            window_fill = 0;
        }
        prev = req;
    }
    return m;
}

// Eq. 4: percent improvement of the joint (cached x duration) accuracy over
// the majority-class baseline, rounded to the nearest integer.
inline int improvement_metric(double rcrnn_cached, double rcrnn_dur, double base_cached,
                              double base_dur) {
    for (double v : {rcrnn_cached, rcrnn_dur, base_cached, base_dur})
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("accuracies must be in (0,1]");
    const double ratio = (rcrnn_cached * rcrnn_dur) / (base_cached * base_dur);
    return int(std::llround(100.0 * (ratio - 1.0)));
}

struct PolicyReport {
    std::string policy;
    Metrics metrics;
};

struct SimulationReport {
    std::vector<PolicyReport> rows;
    uint64_t capacity_pages = 0;
    uint64_t requests = 0;
    uint64_t seed = 0;
    std::optional<double> belady_hit_ratio;

    const Metrics* find(std::string_view policy) const {
        for (const auto& r : rows)
            if (r.policy == policy) return &r.metrics;
        return nullptr;
    }
};

// one simulation per policy over the identical trace
inline SimulationReport compare_report(const Trace& trace, std::span<const std::string> policies,
                                       const SimConfig& cfg, const RcrnnModels* models = nullptr) {
    SimulationReport report;
    report.capacity_pages = cfg.capacity_pages;
    report.requests = trace.requests.size();
    report.seed = cfg.seed;
    for (const std::string& p : policies) {
        PolicyReport row;
        row.policy = p;
        row.metrics = simulate(trace, p, cfg, models);
        report.rows.push_back(std::move(row));
    }
    if (const Metrics* belady = report.find("belady")) report.belady_hit_ratio = belady->hit_ratio();
    return report;
}

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(6) << v;
    return ss.str();
}

}  // namespace detail

inline constexpr const char* kReportHeader =
    "policy,requests,hits,misses,hit_ratio,admissions,bypasses,replacements,ssd_writes,"
    "replacements_per_100,ssd_writes_per_100,mean_latency_ms,hit_ratio_vs_belady";

inline void write_report_csv(const SimulationReport& report, std::ostream& out) {
    out << kReportHeader << "\n";
    for (const auto& row : report.rows) {
        const Metrics& m = row.metrics;
        const double per100 = m.requests ? 100.0 / double(m.requests) : 0.0;
        out << row.policy << ',' << m.requests << ',' << m.hits << ',' << m.misses << ','
            << detail::fmt(m.hit_ratio()) << ',' << m.admissions << ',' << m.bypasses << ','
            << m.replacements << ',' << m.ssd_writes << ','
            << detail::fmt(double(m.replacements) * per100) << ','
            << detail::fmt(double(m.ssd_writes) * per100) << ','
            << detail::fmt(m.mean_latency_ms()) << ',';
        if (report.belady_hit_ratio && *report.belady_hit_ratio > 0.0)
            out << detail::fmt(m.hit_ratio() / *report.belady_hit_ratio);
        out << "\n";
    }
}

inline void write_report_csv(const SimulationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_report_csv(report, out);
    if (!out) throw std::runtime_error("write failed: " + path);
}

// one `policy.metric = value` line per metric
inline void write_report_text(const SimulationReport& report, std::ostream& out) {
    out << "capacity_pages = " << report.capacity_pages << "\n";
    out << "requests = " << report.requests << "\n";
    out << "seed = " << report.seed << "\n";
    for (const auto& row : report.rows) {
        const Metrics& m = row.metrics;
        const std::string& p = row.policy;
        out << p << ".hits = " << m.hits << "\n";
        out << p << ".misses = " << m.misses << "\n";
        out << p << ".hit_ratio = " << detail::fmt(m.hit_ratio()) << "\n";
        out << p << ".admissions = " << m.admissions << "\n";
        out << p << ".bypasses = " << m.bypasses << "\n";
        out << p << ".replacements = " << m.replacements << "\n";
        out << p << ".ssd_writes = " << m.ssd_writes << "\n";
        out << p << ".mean_latency_ms = " << detail::fmt(m.mean_latency_ms()) << "\n";
        if (report.belady_hit_ratio && *report.belady_hit_ratio > 0.0)
            out << p << ".hit_ratio_vs_belady = "
                << detail::fmt(m.hit_ratio() / *report.belady_hit_ratio) << "\n";
        if (!m.switches.empty()) {
            out << p << ".reconfigurations =";
            for (const auto& [idx, cat] : m.switches) out << ' ' << idx << ':' << category_name(cat);
            out << "\n";
        }
    }
}

inline void write_report_text(const SimulationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_report_text(report, out);
}

// per-window hit-ratio series for plotting reconfiguration behaviour
inline void write_series_csv(const SimulationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "policy,window,hit_ratio\n";
    for (const auto& row : report.rows)
        for (size_t w = 0; w < row.metrics.window_hit_ratio.size(); ++w)
            out << row.policy << ',' << w << ',' << detail::fmt(row.metrics.window_hit_ratio[w])
                << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace rcsim
