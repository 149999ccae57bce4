#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcsim/rng.hpp"

namespace rcsim {

// Addresses are page-granular, 4096-byte pages.
constexpr uint64_t kPageSizeBytes = 4096;

enum class Op : uint8_t { Read, Write };

enum class WorkloadCategory : int { MailServer = 0, WebServer = 1, Database = 2, FileServer = 3 };
constexpr int kNumCategories = 4;

inline const char* category_name(WorkloadCategory c) {
    switch (c) {
        case WorkloadCategory::MailServer: return "MailServer";
        case WorkloadCategory::WebServer: return "WebServer";
        case WorkloadCategory::Database: return "Database";
        case WorkloadCategory::FileServer: return "FileServer";
    }
    return "?";
}

inline std::optional<WorkloadCategory> category_from_name(std::string_view s) {
    if (s == "MailServer" || s == "mail") return WorkloadCategory::MailServer;
    if (s == "WebServer" || s == "web") return WorkloadCategory::WebServer;
    if (s == "Database" || s == "database") return WorkloadCategory::Database;
    if (s == "FileServer" || s == "fileserver") return WorkloadCategory::FileServer;
    return std::nullopt;
}

struct IoRequest {
    int64_t timestamp_us = 0;
    int64_t page_id = 0;
    uint32_t size_pages = 1;
    Op op = Op::Read;

    uint64_t size_bytes() const { return uint64_t(size_pages) * kPageSizeBytes; }
    // one past the last page touched
    int64_t end_page() const { return page_id + int64_t(size_pages); }

    bool operator==(const IoRequest&) const = default;
};

struct Trace {
    std::vector<IoRequest> requests;
    std::optional<WorkloadCategory> category;
};

struct GeneratorProfile {
    double read_ratio = 0.5;            // fraction of reads
    double mean_size_kb = 4.0;          // mean request size
    double zipf_s = 1.0;                // popularity skew over the hot set
    int64_t hot_set_pages = 4096;       // distinct pages the random draws cover
    double seq_run_prob = 0.2;          // chance a request continues the previous one
    double mean_interarrival_us = 1000.0;
    uint64_t seed = 1;
};

// Built-in per-category profiles. read_ratio converts a reads-per-write
// ratio r into the fraction r/(r+1).
inline GeneratorProfile default_profile(WorkloadCategory c, uint64_t seed = 1) {
    GeneratorProfile p;
    p.seed = seed;
    switch (c) {
        case WorkloadCategory::MailServer:
            p.read_ratio = 2.56 / 3.56;
            p.mean_size_kb = 42.0;
            p.seq_run_prob = 0.3;
            break;
        case WorkloadCategory::WebServer:
            p.read_ratio = 12.7 / 13.7;
            p.mean_size_kb = 4.0;
            p.seq_run_prob = 0.1;
            break;
        case WorkloadCategory::Database:
            p.read_ratio = 2.05 / 3.05;
            p.mean_size_kb = 8.24;
            p.seq_run_prob = 0.2;
            break;
        case WorkloadCategory::FileServer:
            p.read_ratio = 0.84 / 1.84;
            p.mean_size_kb = 4.0;
            p.seq_run_prob = 0.4;
            break;
    }
    return p;
}

namespace detail {

inline void validate_trace(const Trace& t) {
    if (t.requests.empty()) throw std::runtime_error("empty trace");
    int64_t prev = t.requests.front().timestamp_us;
    for (const auto& r : t.requests) {
        if (r.size_pages < 1) throw std::runtime_error("size_pages must be >= 1");
        if (r.page_id < 0) throw std::runtime_error("page_id must be >= 0");
        if (r.timestamp_us < prev) throw std::runtime_error("timestamps must be non-decreasing");
        prev = r.timestamp_us;
    }
}

}  // namespace detail

inline constexpr const char* kTraceHeader = "timestamp_us,page_id,size_pages,op";

inline Trace parse_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);

    Trace trace;
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    int64_t prev_ts = 0;

    auto fail = [&](const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header_seen) fail("comment after header");
            constexpr std::string_view key = "# category=";
            if (line.rfind(key, 0) == 0) {
                auto cat = category_from_name(std::string_view(line).substr(key.size()));
                if (!cat) fail("unknown category '" + line.substr(key.size()) + "'");
                trace.category = *cat;
            }
            continue;
        }
        if (!header_seen) {
            if (line != kTraceHeader) fail("bad header, expected '" + std::string(kTraceHeader) + "'");
            header_seen = true;
            continue;
        }

        IoRequest req;
        std::istringstream ss(line);
        std::string f0, f1, f2, f3;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') ||
            !std::getline(ss, f2, ',') || !std::getline(ss, f3)) {
            fail("malformed row '" + line + "'");
        }
        try {
            req.timestamp_us = std::stoll(f0);
            req.page_id = std::stoll(f1);
            req.size_pages = static_cast<uint32_t>(std::stoul(f2));
        } catch (const std::exception&) {
            fail("malformed row '" + line + "'");
        }
        if (f3 == "R") req.op = Op::Read;
        else if (f3 == "W") req.op = Op::Write;
        else fail("unknown op code '" + f3 + "'");

        if (req.size_pages < 1) fail("size_pages must be >= 1");
        if (req.page_id < 0) fail("page_id must be >= 0");
        if (!trace.requests.empty() && req.timestamp_us < prev_ts) fail("non-monotonic timestamp");
        prev_ts = req.timestamp_us;
        trace.requests.push_back(req);
    }
    if (!header_seen) throw std::runtime_error(path + ": empty trace");
    if (trace.requests.empty()) throw std::runtime_error(path + ": empty trace");
    return trace;
}

inline void write_trace(const Trace& trace, const std::string& path) {
    detail::validate_trace(trace);
    std::ofstream out(path, std::ios::binary);  // binary for LF line endings everywhere
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (trace.category) out << "# category=" << category_name(*trace.category) << "\n";
    out << kTraceHeader << "\n";
    for (const auto& r : trace.requests) {
        out << r.timestamp_us << ',' << r.page_id << ',' << r.size_pages << ','
            << (r.op == Op::Read ? 'R' : 'W') << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace detail {

// Truncated Zipf over ranks 0..n-1, p(k) proportional to 1/(k+1)^s.
class ZipfSampler {
public:
    ZipfSampler(int64_t n, double s) : cdf_(static_cast<size_t>(n)) {
        double sum = 0.0;
        for (int64_t k = 0; k < n; ++k) {
            sum += 1.0 / std::pow(double(k + 1), s);
            cdf_[static_cast<size_t>(k)] = sum;
        }
        for (auto& v : cdf_) v /= sum;
    }

    int64_t sample(Rng& rng) const {
        double u = rng.uniform();
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        return int64_t(it - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

inline Trace generate_synthetic(const GeneratorProfile& profile, size_t n) {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (profile.read_ratio < 0 || profile.read_ratio > 1)
        throw std::invalid_argument("read_ratio must be in [0,1]");
    if (profile.seq_run_prob < 0 || profile.seq_run_prob > 1)
        throw std::invalid_argument("seq_run_prob must be in [0,1]");
    if (profile.mean_size_kb <= 0 || profile.zipf_s <= 0 || profile.hot_set_pages <= 0 ||
        profile.mean_interarrival_us <= 0)
        throw std::invalid_argument("profile parameters must be positive");

    Rng rng(profile.seed);
    detail::ZipfSampler zipf(profile.hot_set_pages, profile.zipf_s);
    const double mean_pages = std::max(1.0, profile.mean_size_kb * 1024.0 / double(kPageSizeBytes));

    Trace trace;
    trace.requests.reserve(n);
    int64_t clock_us = 0;
    for (size_t i = 0; i < n; ++i) {
        IoRequest req;
        clock_us += int64_t(std::llround(rng.exponential(profile.mean_interarrival_us)));
        req.timestamp_us = clock_us;
        req.size_pages = 1 + static_cast<uint32_t>(rng.poisson(mean_pages - 1.0));
        req.op = rng.bernoulli(profile.read_ratio) ? Op::Read : Op::Write;
        if (!trace.requests.empty() && rng.bernoulli(profile.seq_run_prob)) {
            req.page_id = trace.requests.back().end_page();  // continue the run
        } else {
            req.page_id = zipf.sample(rng);
        }
        trace.requests.push_back(req);
    }
    return trace;
}

// Non-overlapping windows of window_len consecutive requests; the trailing
// partial window is discarded.
inline std::vector<std::span<const IoRequest>> split_windows(std::span<const IoRequest> requests,
                                                             size_t window_len) {
    if (window_len < 1) throw std::invalid_argument("window_len must be >= 1");
    std::vector<std::span<const IoRequest>> windows;
    const size_t count = requests.size() / window_len;
    windows.reserve(count);
    for (size_t w = 0; w < count; ++w)
        windows.push_back(requests.subspan(w * window_len, window_len));
    return windows;
}

inline std::vector<std::span<const IoRequest>> split_windows(const Trace& trace, size_t window_len) {
    return split_windows(std::span<const IoRequest>(trace.requests), window_len);
}

enum class Scenario { Single, Virt, Storage };

inline std::optional<Scenario> scenario_from_name(std::string_view s) {
    if (s == "single") return Scenario::Single;
    if (s == "virt") return Scenario::Virt;
    if (s == "storage") return Scenario::Storage;
    return std::nullopt;
}

inline std::vector<WorkloadCategory> scenario_categories(Scenario s) {
    using W = WorkloadCategory;
    switch (s) {
        case Scenario::Single: return {W::WebServer, W::MailServer};
        case Scenario::Virt: return {W::FileServer, W::WebServer, W::MailServer};
        case Scenario::Storage: return {W::Database, W::FileServer, W::WebServer, W::MailServer};
    }
    return {};
}

// Interleaves one generated stream per category, round-robin in fixed-size
// chunks. Timestamps are rebuilt from each request's original gap so the
// result stays monotone.
inline Trace make_scenario_trace(std::span<const WorkloadCategory> categories, size_t n_per_stream,
                                 uint64_t seed, size_t chunk = 1000) {
    if (categories.empty() || n_per_stream < 1) throw std::invalid_argument("empty scenario");
    struct Stream {
        Trace trace;
        size_t pos = 0;
    };
    std::vector<Stream> streams;
    for (size_t i = 0; i < categories.size(); ++i) {
        Stream s;
        s.trace = generate_synthetic(default_profile(categories[i], seed + i), n_per_stream);
        streams.push_back(std::move(s));
    }

    Trace out;
    out.requests.reserve(categories.size() * n_per_stream);
    int64_t clock_us = 0;
    bool any_left = true;
    while (any_left) {
        any_left = false;
        for (auto& s : streams) {
            const auto& reqs = s.trace.requests;
            for (size_t k = 0; k < chunk && s.pos < reqs.size(); ++k, ++s.pos) {
                int64_t gap = s.pos == 0 ? reqs[0].timestamp_us
                                         : reqs[s.pos].timestamp_us - reqs[s.pos - 1].timestamp_us;
                IoRequest r = reqs[s.pos];
                clock_us += gap;
                r.timestamp_us = clock_us;
                out.requests.push_back(r);
            }
            if (s.pos < reqs.size()) any_left = true;
        }
    }
    return out;
}

}  // namespace rcsim
