#include <doctest.h>

#include "brute_force.hpp"
#include "rcsim/oracle.hpp"
#include "test_util.hpp"

using namespace rcsim;

namespace {

using testutil::brute_force_max_hits;

PageStats stats_with_benefit_inputs(double speed_ratio, uint64_t n_acc, uint64_t n_reads,
                                    double size_pages) {
    PageStats s;
    s.n_acc = n_acc;
    s.n_reads = n_reads;
    s.mean_size_pages = size_pages;
    s.t_ssd_ms = 0.1;
    s.t_hdd_ms = 0.1 * speed_ratio;
    return s;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("page stats count accesses and reads") {
    Trace t;
    t.requests = {{0, 1, 1, Op::Read}, {1, 1, 1, Op::Write}, {2, 1, 1, Op::Read}};
    auto stats = aggregate_page_stats(t, DeviceModel{});
    REQUIRE(stats.count(1));
    CHECK(stats[1].n_acc == 3);
    CHECK(stats[1].n_reads == 2);
    CHECK(stats[1].mean_size_pages == doctest::Approx(1.0));
}

TEST_CASE("page stats are independent across pages and cover multi-page extents") {
    Trace t;
    t.requests = {{0, 10, 2, Op::Read}, {1, 50, 1, Op::Write}};
    auto stats = aggregate_page_stats(t, DeviceModel{});
    CHECK(stats.size() == 3);  // pages 10, 11, 50
    CHECK(stats[10].n_acc == 1);
    CHECK(stats[11].n_acc == 1);
    CHECK(stats[11].mean_size_pages == doctest::Approx(2.0));
    CHECK(stats[50].n_reads == 0);
}

TEST_CASE("benefit formula") {
    CHECK(benefit(stats_with_benefit_inputs(80, 5, 4, 1)) == doctest::Approx(576.0));
    CHECK(benefit(stats_with_benefit_inputs(80, 1, 1, 1)) == doctest::Approx(0.0));
    CHECK(benefit(stats_with_benefit_inputs(80, 3, 0, 2)) == doctest::Approx(80.0));
}

TEST_CASE("benefit monotonicity") {
    Rng rng(17);
    for (int i = 0; i < 300; ++i) {
        PageStats s;
        s.n_acc = 2 + rng.index(50);
        s.n_reads = rng.index(s.n_acc + 1);
        s.mean_size_pages = 1.0 + rng.uniform() * 16.0;
        s.t_ssd_ms = 0.05 + rng.uniform();
        s.t_hdd_ms = s.t_ssd_ms * (2.0 + rng.uniform() * 100.0);
        const double base = benefit(s);

        // double accesses, reads scaled proportionally
        PageStats more = s;
        more.n_acc = 2 * s.n_acc;
        more.n_reads = 2 * s.n_reads;
        CHECK(benefit(more) >= base);

        PageStats bigger = s;
        bigger.mean_size_pages = s.mean_size_pages * 2;
        CHECK(benefit(bigger) <= base);

        PageStats faster_hdd = s;
        faster_hdd.t_hdd_ms = s.t_hdd_ms * 2;
        CHECK(benefit(faster_hdd) > base);

        if (s.n_reads < s.n_acc) {
            PageStats readier = s;
            readier.n_reads = s.n_reads + 1;
            CHECK(benefit(readier) > base);
        }
    }
}

TEST_CASE("duration labels partition durations") {
    CHECK(label_duration(50, 100) == DurationLabel::Soon);
    CHECK(label_duration(300, 100) == DurationLabel::Mean);
    CHECK(label_duration(600, 100) == DurationLabel::Late);
    // boundary inclusivity: soon includes C, mean includes 5C
    CHECK(label_duration(100, 100) == DurationLabel::Soon);
    CHECK(label_duration(101, 100) == DurationLabel::Mean);
    CHECK(label_duration(500, 100) == DurationLabel::Mean);
    CHECK(label_duration(501, 100) == DurationLabel::Late);
    CHECK(label_duration(0, 1) == DurationLabel::Soon);
}

TEST_CASE("oracle replay admits by benefit and evicts the cheapest resident") {
    // page Y benefit 80, page X benefit 576; capacity one page
    Trace t;
    t.requests = {{0, 2, 1, Op::Read}, {1, 1, 1, Op::Read}};  // Y=page2, X=page1
    PageStatsMap stats;
    stats[1] = stats_with_benefit_inputs(80, 5, 4, 1);  // 576
    stats[2] = stats_with_benefit_inputs(80, 3, 0, 2);  // 80
    auto labeled = oracle_replay(t, 1, stats);
    REQUIRE(labeled.size() == 2);
    CHECK(labeled[0].cached);  // Y admitted into free space
    CHECK(labeled[1].cached);  // X displaces Y
    // Y evicted one request after admission; X resident to the end
    CHECK(labeled[0].duration_label == DurationLabel::Soon);
    CHECK(labeled[1].duration_label == DurationLabel::Soon);
}

TEST_CASE("zero-benefit pages are never admitted") {
    Trace t;
    t.requests = {{0, 1, 1, Op::Read}, {1, 2, 1, Op::Read}};
    PageStatsMap stats;
    stats[1] = stats_with_benefit_inputs(80, 1, 1, 1);  // n_acc 1 -> benefit 0
    stats[2] = stats_with_benefit_inputs(80, 1, 0, 1);
    auto labeled = oracle_replay(t, 4, stats);
    CHECK(!labeled[0].cached);
    CHECK(!labeled[1].cached);
    CHECK(!labeled[0].duration_label.has_value());
}

TEST_CASE("with free space every positive-benefit first access admits") {
    Trace t = testutil::trace_of_pages({1, 2, 3, 1, 2, 3});
    auto stats = aggregate_page_stats(t, DeviceModel{});
    auto labeled = oracle_replay(t, 10, stats);
    // first touches admit; the re-touches are hits on resident pages, which
    // also carry the cached tag and the same residency duration class
    for (size_t i = 0; i < 6; ++i) CHECK(labeled[i].cached);
    // resident to the end: duration 6 - admit index, within one cache size
    CHECK(labeled[0].duration_label == DurationLabel::Soon);
    CHECK(labeled[3].duration_label == labeled[0].duration_label);
}

TEST_CASE("oracle replay missing stats is an error") {
    Trace t = testutil::trace_of_pages({1});
    CHECK_THROWS_AS(oracle_replay(t, 1, PageStatsMap{}), std::runtime_error);
}

TEST_CASE("labels present exactly when cached, and residency is bounded") {
    for (uint64_t seed : {21u, 22u, 23u}) {
        Trace t = testutil::random_trace(seed, 800, 60);
        auto stats = aggregate_page_stats(t, DeviceModel{});
        auto labeled = oracle_replay(t, 16, stats);
        REQUIRE(labeled.size() == t.requests.size());
        for (const auto& lr : labeled) CHECK(lr.cached == lr.duration_label.has_value());
    }
}

TEST_CASE("belady on small hand cases") {
    CHECK(belady_replay(testutil::trace_of_pages({1, 2, 3, 1, 2, 3}), 2).hits == 2);
    CHECK(belady_replay(testutil::trace_of_pages({1, 1, 1}), 1).hits == 2);
    // capacity >= distinct pages: only cold misses
    auto counts = belady_replay(testutil::trace_of_pages({1, 2, 3, 1, 2, 3, 2, 1}), 8);
    CHECK(counts.misses == 3);
    CHECK(counts.hits == 5);
    CHECK(counts.replacements == 0);
}

TEST_CASE("belady matches exhaustive search on random tiny instances") {
    Rng rng(99);
    for (int i = 0; i < 60; ++i) {
        const size_t n = 5 + rng.index(26);
        const int64_t distinct = 2 + int64_t(rng.index(9));
        std::vector<int64_t> pages;
        for (size_t j = 0; j < n; ++j) pages.push_back(int64_t(rng.index(uint64_t(distinct))));
        const uint64_t capacity = 2 + rng.index(2);
        Trace t = testutil::trace_of_pages(pages);
        CHECK(belady_replay(t, capacity).hits == brute_force_max_hits(pages, capacity));
    }
}

TEST_CASE("labeled trace round trip") {
    Trace t = testutil::random_trace(31, 300, 40);
    auto stats = aggregate_page_stats(t, DeviceModel{});
    auto labeled = oracle_replay(t, 12, stats);
    testutil::TempFile f("labeled");
    write_labeled_trace(labeled, WorkloadCategory::Database, f.path());
    LabeledTrace back = parse_labeled_trace(f.path());
    REQUIRE(back.requests.size() == labeled.size());
    CHECK(back.category == WorkloadCategory::Database);
    for (size_t i = 0; i < labeled.size(); ++i) {
        CHECK(back.requests[i].request == labeled[i].request);
        CHECK(back.requests[i].cached == labeled[i].cached);
        CHECK(back.requests[i].duration_label == labeled[i].duration_label);
    }
}

}  // TEST_SUITE
