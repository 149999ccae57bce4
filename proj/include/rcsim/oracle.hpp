#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "rcsim/device.hpp"
#include "rcsim/trace.hpp"

namespace rcsim {

// Per-page aggregates feeding the benefit function. Sizes and times are
// means over all accesses touching the page.
struct PageStats {
    uint64_t n_acc = 0;
    uint64_t n_reads = 0;
    double mean_size_pages = 0.0;
    double t_hdd_ms = 0.0;
    double t_ssd_ms = 0.0;
};

using PageStatsMap = std::unordered_map<int64_t, PageStats>;

inline PageStatsMap aggregate_page_stats(const Trace& trace, const DeviceModel& model) {
    PageStatsMap stats;
    std::optional<IoRequest> prev;
    for (const auto& req : trace.requests) {
        const bool seq = is_sequential(prev, req);
        const double t_hdd = response_time_ms(model, req, Device::HDD, seq);
        const double t_ssd = response_time_ms(model, req, Device::SSD, seq);
        for (int64_t p = req.page_id; p < req.end_page(); ++p) {
            auto& s = stats[p];
            s.n_acc += 1;
            if (req.op == Op::Read) s.n_reads += 1;
            const double n = double(s.n_acc);
            s.mean_size_pages += (double(req.size_pages) - s.mean_size_pages) / n;
            s.t_hdd_ms += (t_hdd - s.t_hdd_ms) / n;
            s.t_ssd_ms += (t_ssd - s.t_ssd_ms) / n;
        }
        prev = req;
    }
    return stats;
}

// Benefit of caching a page: device speedup, re-reference count, size
// penalty, and read-intensity bonus.
inline double benefit(const PageStats& s) {
    if (s.n_acc < 1) return 0.0;
    return (s.t_hdd_ms / s.t_ssd_ms) * double(s.n_acc - 1) * (1.0 / s.mean_size_pages) *
           (1.0 + double(s.n_reads) / double(s.n_acc));
}

enum class DurationLabel : int { Soon = 0, Mean = 1, Late = 2 };

inline const char* duration_label_name(DurationLabel l) {
    switch (l) {
        case DurationLabel::Soon: return "soon";
        case DurationLabel::Mean: return "mean";
        case DurationLabel::Late: return "late";
    }
    return "?";
}

inline std::optional<DurationLabel> duration_label_from_name(std::string_view s) {
    if (s == "soon") return DurationLabel::Soon;
    if (s == "mean") return DurationLabel::Mean;
    if (s == "late") return DurationLabel::Late;
    return std::nullopt;
}

// Cache-size-relative residency classes: soon <= C < mean <= 5C < late.
inline DurationLabel label_duration(uint64_t duration, uint64_t cache_size_pages) {
    if (duration <= cache_size_pages) return DurationLabel::Soon;
    if (duration <= 5 * cache_size_pages) return DurationLabel::Mean;
    return DurationLabel::Late;
}

struct LabeledRequest {
    IoRequest request;
    bool cached = false;
    std::optional<DurationLabel> duration_label;  // present iff cached
};

// Replays the trace against a benefit-ordered cache. A miss admits when the
// unit's benefit strictly exceeds the benefit of every page it would evict
// (or is positive, when there is free space). Requests are decided as one
// unit: all absent pages are admitted or bypassed together using the leading
// page's stats. An access is tagged cached=true when its pages are resident
// after it (a hit, or an admission), and carries the duration class of the
// residency period it belongs to; bypassed accesses are tagged not-cached.
inline std::vector<LabeledRequest> oracle_replay(const Trace& trace, uint64_t capacity_pages,
                                                 const PageStatsMap& stats) {
    if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");

    struct AdmitEvent {
        size_t request_index;
        int64_t representative_page;
        std::optional<uint64_t> duration;
    };
    struct Resident {
        double benefit_value;
        uint64_t admit_seq;
        size_t event_id;
    };

    const size_t n = trace.requests.size();
    std::vector<LabeledRequest> out;
    out.reserve(n);
    std::vector<size_t> row_event(n, SIZE_MAX);  // residency event governing each cached row
    std::vector<AdmitEvent> events;
    std::unordered_map<int64_t, Resident> residents;
    std::set<std::tuple<double, uint64_t, int64_t>> by_benefit;  // (benefit, admit_seq, page)
    uint64_t admit_seq = 0;

    auto unit_benefit = [&](int64_t page) {
        auto it = stats.find(page);
        if (it == stats.end())
            throw std::runtime_error("page stats missing for page " + std::to_string(page));
        return benefit(it->second);
    };

    for (size_t i = 0; i < n; ++i) {
        const IoRequest& req = trace.requests[i];
        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p)
            if (!residents.count(p)) absent.push_back(p);

        if (absent.empty()) {
            row_event[i] = residents.at(req.page_id).event_id;  // hit
            out.push_back({req, true, std::nullopt});
            continue;
        }

        const uint64_t k = absent.size();
        bool admit = false;
        std::vector<int64_t> victims;
        if (req.size_pages <= capacity_pages) {
            const double b = unit_benefit(req.page_id);
            const uint64_t free = capacity_pages - residents.size();
            const uint64_t need = k > free ? k - free : 0;
            if (b > 0.0) {
                if (need == 0) {
                    admit = true;
                } else {
                    // b must beat every page it would evict; victims are the
                    // cheapest residents outside the request itself
                    double worst = 0.0;
                    for (auto it = by_benefit.begin();
                         it != by_benefit.end() && victims.size() < need; ++it) {
                        const int64_t page = std::get<2>(*it);
                        if (page >= req.page_id && page < req.end_page()) continue;
                        victims.push_back(page);
                        worst = std::get<0>(*it);
                    }
                    admit = victims.size() == need && b > worst;
                }
            }
        }

        if (!admit) {
            out.push_back({req, false, std::nullopt});
            continue;
        }

        for (int64_t vpage : victims) {
            auto& res = residents.at(vpage);
            by_benefit.erase({res.benefit_value, res.admit_seq, vpage});
            auto& ev = events[res.event_id];
            if (ev.representative_page == vpage && !ev.duration)
                ev.duration = uint64_t(i - ev.request_index);
            residents.erase(vpage);
        }

        const size_t event_id = events.size();
        events.push_back({i, absent.front(), std::nullopt});
        ++admit_seq;
        for (int64_t p : absent) {
            const double pb = unit_benefit(p);
            residents.emplace(p, Resident{pb, admit_seq, event_id});
            by_benefit.emplace(pb, admit_seq, p);
        }
        row_event[i] = event_id;
        out.push_back({req, true, std::nullopt});
    }

    // pages still resident at the end run to the end of the trace
    for (auto& ev : events)
        if (!ev.duration) ev.duration = uint64_t(n - ev.request_index);
    for (size_t i = 0; i < n; ++i)
        if (row_event[i] != SIZE_MAX)
            out[i].duration_label =
                label_duration(*events[row_event[i]].duration, capacity_pages);
    return out;
}

struct ReplayCounts {
    uint64_t requests = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t replacements = 0;

    double hit_ratio() const { return requests ? double(hits) / double(requests) : 0.0; }
};

namespace detail {

constexpr int64_t kNever = std::numeric_limits<int64_t>::max();

// next_use[j] = index of the next request touching the page behind the j-th
// page-touch of the trace, kNever if none.
struct NextUseIndex {
    std::vector<size_t> request_offset;  // request -> first touch slot
    std::vector<int64_t> next_use;

    explicit NextUseIndex(const Trace& trace) {
        const size_t n = trace.requests.size();
        request_offset.resize(n + 1, 0);
        for (size_t i = 0; i < n; ++i)
            request_offset[i + 1] = request_offset[i] + trace.requests[i].size_pages;
        next_use.assign(request_offset[n], kNever);
        std::unordered_map<int64_t, int64_t> seen;  // page -> next request index
        for (size_t i = n; i-- > 0;) {
            const IoRequest& req = trace.requests[i];
            size_t slot = request_offset[i];
            for (int64_t p = req.page_id; p < req.end_page(); ++p, ++slot) {
                auto it = seen.find(p);
                next_use[slot] = it == seen.end() ? kNever : it->second;
                seen[p] = int64_t(i);
            }
        }
    }

    int64_t at(size_t request_index, size_t page_offset) const {
        return next_use[request_offset[request_index] + page_offset];
    }
};

}  // namespace detail

namespace detail {

// Farthest-future-use replacement with bypass, page by page: a missing page
// is cached only if its next use comes before that of the furthest-future
// resident it would displace. Forced-admission MIN is not optimal once
// competing policies may bypass, this variant is. Hits still require the
// whole request to be resident.
class BeladyCore {
public:
    BeladyCore(const Trace& trace, uint64_t capacity_pages)
        : capacity_(capacity_pages), index_(trace) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    struct Step {
        bool hit = false;
        uint32_t admitted = 0;
        uint32_t evicted = 0;
    };

    Step access(const IoRequest& req, size_t request_index) {
        Step step;
        std::vector<std::pair<int64_t, int64_t>> missing;  // page, next use
        for (size_t off = 0; off < req.size_pages; ++off) {
            const int64_t p = req.page_id + int64_t(off);
            const int64_t next = index_.at(request_index, off);
            if (resident_.count(p)) touch(p, next);
            else missing.emplace_back(p, next);
        }
        if (missing.empty()) {
            step.hit = true;
            return step;
        }
        for (const auto& [p, next] : missing) {
            if (resident_.size() >= capacity_) {
                auto victim = by_next_.rend();
                for (auto it = by_next_.rbegin(); it != by_next_.rend(); ++it) {
                    if (it->second >= req.page_id && it->second < req.end_page()) continue;
                    victim = it;
                    break;
                }
                if (victim == by_next_.rend() || next >= victim->first) continue;
                resident_.erase(victim->second);
                by_next_.erase(*victim);
                ++step.evicted;
            }
            resident_.emplace(p, next);
            by_next_.emplace(next, p);
            ++step.admitted;
        }
        return step;
    }

    size_t resident_pages() const { return resident_.size(); }

private:
    void touch(int64_t page, int64_t next) {
        auto it = resident_.find(page);
        by_next_.erase({it->second, page});
        it->second = next;
        by_next_.emplace(next, page);
    }

    uint64_t capacity_;
    NextUseIndex index_;
    std::unordered_map<int64_t, int64_t> resident_;  // page -> next use
    std::set<std::pair<int64_t, int64_t>> by_next_;  // (next use, page)
};

}  // namespace detail

inline ReplayCounts belady_replay(const Trace& trace, uint64_t capacity_pages) {
    detail::BeladyCore core(trace, capacity_pages);
    ReplayCounts counts;
    counts.requests = trace.requests.size();
    for (size_t i = 0; i < trace.requests.size(); ++i) {
        const auto step = core.access(trace.requests[i], i);
        if (step.hit) ++counts.hits;
        else ++counts.misses;
        if (step.evicted > 0) ++counts.replacements;
    }
    return counts;
}

inline constexpr const char* kLabeledHeader = "timestamp_us,page_id,size_pages,op,cached,duration_label";

inline void write_labeled_trace(std::span<const LabeledRequest> labeled,
                                std::optional<WorkloadCategory> category, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (category) out << "# category=" << category_name(*category) << "\n";
    out << kLabeledHeader << "\n";
    for (const auto& lr : labeled) {
        const auto& r = lr.request;
        out << r.timestamp_us << ',' << r.page_id << ',' << r.size_pages << ','
            << (r.op == Op::Read ? 'R' : 'W') << ',' << (lr.cached ? 1 : 0) << ','
            << (lr.duration_label ? duration_label_name(*lr.duration_label) : "-") << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct LabeledTrace {
    std::vector<LabeledRequest> requests;
    std::optional<WorkloadCategory> category;
};

inline LabeledTrace parse_labeled_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labeled trace: " + path);
    LabeledTrace result;
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;

    auto fail = [&](const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            constexpr std::string_view key = "# category=";
            if (line.rfind(key, 0) == 0) {
                auto cat = category_from_name(std::string_view(line).substr(key.size()));
                if (!cat) fail("unknown category");
                result.category = *cat;
            }
            continue;
        }
        if (!header_seen) {
            if (line != kLabeledHeader) fail("bad header");
            header_seen = true;
            continue;
        }
        std::istringstream ss(line);
        std::string f[6];
        for (int j = 0; j < 6; ++j)
            if (!std::getline(ss, f[j], j == 5 ? '\n' : ',')) fail("malformed row");
        LabeledRequest lr;
        try {
            lr.request.timestamp_us = std::stoll(f[0]);
            lr.request.page_id = std::stoll(f[1]);
            lr.request.size_pages = static_cast<uint32_t>(std::stoul(f[2]));
        } catch (const std::exception&) {
            fail("malformed row");
        }
        if (f[3] == "R") lr.request.op = Op::Read;
        else if (f[3] == "W") lr.request.op = Op::Write;
        else fail("unknown op code");
        if (f[4] == "1") lr.cached = true;
        else if (f[4] == "0") lr.cached = false;
        else fail("bad cached flag");
        if (f[5] != "-") {
            auto dl = duration_label_from_name(f[5]);
            if (!dl) fail("bad duration label");
            lr.duration_label = *dl;
        }
        if (lr.cached != lr.duration_label.has_value()) fail("cached/label mismatch");
        if (lr.request.size_pages < 1) fail("size_pages must be >= 1");
        result.requests.push_back(lr);
    }
    if (result.requests.empty()) throw std::runtime_error(path + ": empty trace");
    return result;
}

}  // namespace rcsim
