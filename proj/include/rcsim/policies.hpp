#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <unordered_map>

#include "rcsim/oracle.hpp"
#include "rcsim/trace.hpp"

namespace rcsim {

enum class Decision : uint8_t { Hit, MissAdmit, MissBypass };

struct AccessOutcome {
    Decision decision = Decision::MissBypass;
    uint32_t evicted_pages = 0;
};

// A request is decided as one unit: Hit iff every page is resident, and on a
// miss all absent pages are admitted together or bypassed together. Requests
// wider than the cache are always bypassed.
class CachePolicy {
public:
    virtual ~CachePolicy() = default;
    virtual AccessOutcome on_access(const IoRequest& req, size_t request_index) = 0;
    virtual uint64_t resident_pages() const = 0;
    virtual const char* name() const = 0;
};

class LruPolicy : public CachePolicy {
public:
    explicit LruPolicy(uint64_t capacity_pages) : capacity_(capacity_pages) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    AccessOutcome on_access(const IoRequest& req, size_t) override {
        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p) {
            auto it = index_.find(p);
            if (it == index_.end()) absent.push_back(p);
            else order_.splice(order_.begin(), order_, it->second);  // touch to MRU
        }
        if (absent.empty()) return {Decision::Hit, 0};
        if (req.size_pages > capacity_) return {Decision::MissBypass, 0};

        uint32_t evicted = 0;
        while (index_.size() + absent.size() > capacity_) {
            index_.erase(order_.back());
            order_.pop_back();
            ++evicted;
        }
        for (int64_t p : absent) {
            order_.push_front(p);
            index_[p] = order_.begin();
        }
        return {Decision::MissAdmit, evicted};
    }

    uint64_t resident_pages() const override { return index_.size(); }
    const char* name() const override { return "lru"; }

private:
    uint64_t capacity_;
    std::list<int64_t> order_;  // front = MRU
    std::unordered_map<int64_t, std::list<int64_t>::iterator> index_;
};

// Frequency-priority cache: lifetime access counts decide admission and
// eviction; a miss displaces the coldest resident only when the incoming
// unit has a strictly higher count. Ties evict the least recently touched.
class AccessFreqPolicy : public CachePolicy {
public:
    explicit AccessFreqPolicy(uint64_t capacity_pages) : capacity_(capacity_pages) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    AccessOutcome on_access(const IoRequest& req, size_t) override {
        ++clock_;
        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p) {
            ++counts_[p];
            auto it = residents_.find(p);
            if (it == residents_.end()) {
                absent.push_back(p);
            } else {
                by_priority_.erase({it->second.count, it->second.last_touch, p});
                it->second = {counts_[p], clock_};
                by_priority_.emplace(counts_[p], clock_, p);
            }
        }
        if (absent.empty()) return {Decision::Hit, 0};
        if (req.size_pages > capacity_) return {Decision::MissBypass, 0};

        const uint64_t need = residents_.size() + absent.size() > capacity_
                                  ? residents_.size() + absent.size() - capacity_
                                  : 0;
        std::vector<std::tuple<uint64_t, uint64_t, int64_t>> victims;
        if (need > 0) {
            const uint64_t unit_count = counts_[req.page_id];
            for (auto it = by_priority_.begin();
                 it != by_priority_.end() && victims.size() < need; ++it) {
                const int64_t page = std::get<2>(*it);
                if (page >= req.page_id && page < req.end_page()) continue;
                if (std::get<0>(*it) >= unit_count) return {Decision::MissBypass, 0};
                victims.push_back(*it);
            }
            if (victims.size() < need) return {Decision::MissBypass, 0};
        }
        for (const auto& v : victims) {
            by_priority_.erase(v);
            residents_.erase(std::get<2>(v));
        }
        for (int64_t p : absent) {
            residents_[p] = {counts_[p], clock_};
            by_priority_.emplace(counts_[p], clock_, p);
        }
        return {Decision::MissAdmit, static_cast<uint32_t>(victims.size())};
    }

    uint64_t resident_pages() const override { return residents_.size(); }
    const char* name() const override { return "access"; }

private:
    struct Entry {
        uint64_t count;
        uint64_t last_touch;
    };
    uint64_t capacity_;
    uint64_t clock_ = 0;
    std::unordered_map<int64_t, uint64_t> counts_;  // lifetime counts
    std::unordered_map<int64_t, Entry> residents_;
    std::set<std::tuple<uint64_t, uint64_t, int64_t>> by_priority_;  // (count, touch, page)
};

// LARC: a metadata-only ghost queue filters one-shot accesses; pages are
// admitted to the main LRU only on a re-reference while still in the ghost.
class LarcPolicy : public CachePolicy {
public:
    explicit LarcPolicy(uint64_t capacity_pages, uint64_t ghost_capacity = 0)
        : capacity_(capacity_pages),
          ghost_capacity_(ghost_capacity ? ghost_capacity : capacity_pages) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    AccessOutcome on_access(const IoRequest& req, size_t) override {
        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p) {
            auto it = main_index_.find(p);
            if (it == main_index_.end()) absent.push_back(p);
            else main_.splice(main_.begin(), main_, it->second);
        }
        if (absent.empty()) return {Decision::Hit, 0};

        const bool promote = ghost_index_.count(req.page_id) && req.size_pages <= capacity_;
        if (!promote) {
            for (int64_t p : absent) ghost_insert(p);
            return {Decision::MissBypass, 0};
        }

        for (int64_t p : absent) ghost_erase(p);
        uint32_t evicted = 0;
        while (main_index_.size() + absent.size() > capacity_) {
            main_index_.erase(main_.back());
            main_.pop_back();
            ++evicted;
        }
        for (int64_t p : absent) {
            main_.push_front(p);
            main_index_[p] = main_.begin();
        }
        return {Decision::MissAdmit, evicted};
    }

    uint64_t resident_pages() const override { return main_index_.size(); }
    uint64_t ghost_pages() const { return ghost_index_.size(); }
    const char* name() const override { return "larc"; }

private:
    void ghost_insert(int64_t page) {
        auto it = ghost_index_.find(page);
        if (it != ghost_index_.end()) {
            ghost_.splice(ghost_.begin(), ghost_, it->second);  // refresh recency
            return;
        }
        if (ghost_index_.size() >= ghost_capacity_) {
            ghost_index_.erase(ghost_.back());
            ghost_.pop_back();
        }
        ghost_.push_front(page);
        ghost_index_[page] = ghost_.begin();
    }

    void ghost_erase(int64_t page) {
        auto it = ghost_index_.find(page);
        if (it == ghost_index_.end()) return;
        ghost_.erase(it->second);
        ghost_index_.erase(it);
    }

    uint64_t capacity_;
    uint64_t ghost_capacity_;
    std::list<int64_t> main_;  // front = MRU
    std::unordered_map<int64_t, std::list<int64_t>::iterator> main_index_;
    std::list<int64_t> ghost_;
    std::unordered_map<int64_t, std::list<int64_t>::iterator> ghost_index_;
};

struct ModelDecision {
    bool admit = true;
    DurationLabel label = DurationLabel::Soon;
};

using DecisionProvider = std::function<ModelDecision(const IoRequest&, size_t)>;

// Three LRU queues keyed by the model's duration label. Eviction drains the
// soon queue first, then mean, then late. Aged pages below the top 20% of
// their queue are demoted one level and re-timestamped.
class RcrnnPolicy : public CachePolicy {
public:
    RcrnnPolicy(uint64_t capacity_pages, DecisionProvider provider)
        : capacity_(capacity_pages), provider_(std::move(provider)) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    AccessOutcome on_access(const IoRequest& req, size_t request_index) override {
        demote_stale(request_index);
        const ModelDecision decision = provider_(req, request_index);

        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p) {
            auto it = entries_.find(p);
            if (it == entries_.end()) {
                absent.push_back(p);
            } else {
                auto& q = queues_[it->second.queue];
                q.splice(q.begin(), q, it->second.it);  // head of its current queue
            }
        }
        if (absent.empty()) return {Decision::Hit, 0};
        if (!decision.admit || req.size_pages > capacity_) return {Decision::MissBypass, 0};

        uint32_t evicted = 0;
        while (entries_.size() + absent.size() > capacity_) {
            evict_one(req);
            ++evicted;
        }
        const int qi = static_cast<int>(decision.label);
        for (int64_t p : absent) {
            queues_[qi].push_front(p);
            entries_[p] = {qi, queues_[qi].begin(), request_index};
        }
        return {Decision::MissAdmit, evicted};
    }

    uint64_t resident_pages() const override { return entries_.size(); }
    const char* name() const override { return "rcrnn"; }

    // victim = tail of soon, then mean, then late
    int64_t victim_page() const {
        for (const auto& q : queues_)
            if (!q.empty()) return q.back();
        throw std::logic_error("victim_page on empty cache");
    }

    // Pages older than 5x capacity move one queue down unless they sit in the
    // head-side ceil(20%) of their queue. Mean is processed before late so a
    // page moves at most one level per pass.
    void demote_stale(size_t request_index) {
        if (entries_.empty()) return;
        const uint64_t age_limit = 5 * capacity_;
        if (request_index - min_admitted_ < age_limit) return;

        for (int qi : {1, 2}) {  // mean, then late
            auto& q = queues_[qi];
            const size_t exempt = (q.size() + 4) / 5;  // ceil(0.2 * len)
            std::vector<int64_t> moving;
            size_t pos = 0;
            for (int64_t page : q) {
                if (pos++ < exempt) continue;
                if (request_index - entries_[page].admitted_at >= age_limit)
                    moving.push_back(page);
            }
            auto& dst = queues_[qi - 1];
            for (int64_t page : moving) {
                auto& e = entries_[page];
                dst.splice(dst.end(), q, e.it);  // colder than everything there
                e.queue = qi - 1;
                e.admitted_at = request_index;  // demotion re-arms
            }
        }
        min_admitted_ = std::numeric_limits<size_t>::max();
        for (const auto& [page, e] : entries_) min_admitted_ = std::min(min_admitted_, e.admitted_at);
    }

    // Moves every resident to the queue named by relabel, keeping relative
    // recency order inside each destination queue. Resident set is unchanged.
    void relabel_residents(const std::function<DurationLabel(int64_t)>& relabel) {
        std::array<std::list<int64_t>, 3> next;
        for (auto& q : queues_) {
            for (int64_t page : q) {
                const int qi = static_cast<int>(relabel(page));
                next[qi].push_back(page);
                entries_[page].queue = qi;
            }
        }
        queues_ = std::move(next);
        for (int qi = 0; qi < 3; ++qi)
            for (auto it = queues_[qi].begin(); it != queues_[qi].end(); ++it)
                entries_[*it].it = it;
    }

    std::vector<int64_t> queue_contents(DurationLabel label) const {
        const auto& q = queues_[static_cast<int>(label)];
        return {q.begin(), q.end()};
    }

    std::optional<DurationLabel> label_of(int64_t page) const {
        auto it = entries_.find(page);
        if (it == entries_.end()) return std::nullopt;
        return DurationLabel(it->second.queue);
    }

private:
    void evict_one(const IoRequest& req) {
        for (auto& q : queues_) {
            for (auto it = q.rbegin(); it != q.rend(); ++it) {
                if (*it >= req.page_id && *it < req.end_page()) continue;  // own page
                entries_.erase(*it);
                q.erase(std::next(it).base());
                return;
            }
        }
        throw std::logic_error("eviction with no candidate");
    }

    struct Entry {
        int queue;
        std::list<int64_t>::iterator it;
        size_t admitted_at;
    };

    uint64_t capacity_;
    DecisionProvider provider_;
    std::array<std::list<int64_t>, 3> queues_;  // soon, mean, late; front = head
    std::unordered_map<int64_t, Entry> entries_;
    size_t min_admitted_ = 0;
};

// Policy-shaped view of the farthest-future-use replay; needs the whole
// trace up front. Decision for decision this matches belady_replay.
class BeladyPolicy : public CachePolicy {
public:
    BeladyPolicy(const Trace& trace, uint64_t capacity_pages) : core_(trace, capacity_pages) {}

    AccessOutcome on_access(const IoRequest& req, size_t request_index) override {
        const auto step = core_.access(req, request_index);
        if (step.hit) return {Decision::Hit, 0};
        if (step.admitted == 0) return {Decision::MissBypass, 0};
        return {Decision::MissAdmit, step.evicted};
    }

    uint64_t resident_pages() const override { return core_.resident_pages(); }
    const char* name() const override { return "belady"; }

private:
    detail::BeladyCore core_;
};

// Policy-shaped view of the offline benefit-ordered cache; decisions match
// oracle_replay access for access.
class OracleBenefitPolicy : public CachePolicy {
public:
    OracleBenefitPolicy(PageStatsMap stats, uint64_t capacity_pages)
        : capacity_(capacity_pages), stats_(std::move(stats)) {
        if (capacity_pages < 1) throw std::invalid_argument("capacity must be >= 1");
    }

    AccessOutcome on_access(const IoRequest& req, size_t) override {
        std::vector<int64_t> absent;
        for (int64_t p = req.page_id; p < req.end_page(); ++p)
            if (!residents_.count(p)) absent.push_back(p);
        if (absent.empty()) return {Decision::Hit, 0};
        if (req.size_pages > capacity_) return {Decision::MissBypass, 0};

        const double b = benefit_of(req.page_id);
        if (b <= 0.0) return {Decision::MissBypass, 0};
        const uint64_t free = capacity_ - residents_.size();
        const uint64_t need = absent.size() > free ? absent.size() - free : 0;

        std::vector<std::tuple<double, uint64_t, int64_t>> victims;
        if (need > 0) {
            double worst = 0.0;
            for (auto it = by_benefit_.begin();
                 it != by_benefit_.end() && victims.size() < need; ++it) {
                const int64_t page = std::get<2>(*it);
                if (page >= req.page_id && page < req.end_page()) continue;
                victims.push_back(*it);
                worst = std::get<0>(*it);
            }
            if (victims.size() < need || b <= worst) return {Decision::MissBypass, 0};
        }
        for (const auto& v : victims) {
            by_benefit_.erase(v);
            residents_.erase(std::get<2>(v));
        }
        ++admit_seq_;
        for (int64_t p : absent) {
            const double pb = benefit_of(p);
            residents_.emplace(p, std::pair<double, uint64_t>{pb, admit_seq_});
            by_benefit_.emplace(pb, admit_seq_, p);
        }
        return {Decision::MissAdmit, static_cast<uint32_t>(victims.size())};
    }

    uint64_t resident_pages() const override { return residents_.size(); }
    const char* name() const override { return "oracle-benefit"; }

private:
    double benefit_of(int64_t page) const {
        auto it = stats_.find(page);
        if (it == stats_.end())
            throw std::runtime_error("page stats missing for page " + std::to_string(page));
        return benefit(it->second);
    }

    uint64_t capacity_;
    PageStatsMap stats_;
    std::unordered_map<int64_t, std::pair<double, uint64_t>> residents_;  // benefit, seq
    std::set<std::tuple<double, uint64_t, int64_t>> by_benefit_;
    uint64_t admit_seq_ = 0;
};

}  // namespace rcsim
