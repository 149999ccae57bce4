// Acceptance suite: one self-contained check per criterion, one PASS/FAIL
// line each. Run with no arguments for the full suite, or pass criterion
// numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "rcsim/characterize.hpp"
#include "rcsim/engine.hpp"
#include "rcsim/nn.hpp"
#include "rcsim/oracle.hpp"
#include "rcsim/trace.hpp"
#include "test_util.hpp"

using namespace rcsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

// shared across criteria 2/7/8
std::vector<Metrics> g_collected_metrics;

// ---- 1. belady equals the exhaustive-search optimum --------------------

Outcome criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(4242);
    size_t checked = 0, matched = 0;
    for (size_t i = 0; i < 1000; ++i) {
        const size_t n = 5 + rng.index(26);                     // <= 30 requests
        const int64_t distinct = 2 + int64_t(rng.index(9));     // <= 10 pages
        const uint64_t capacity = 2 + rng.index(2);             // {2, 3}
        std::vector<int64_t> pages;
        for (size_t j = 0; j < n; ++j) pages.push_back(int64_t(rng.index(uint64_t(distinct))));
        Trace t = testutil::trace_of_pages(pages);
        ++checked;
        matched += belady_replay(t, capacity).hits == testutil::brute_force_max_hits(pages, capacity);
    }
    const double secs = seconds_since(t0);
    return {matched == checked && secs < 60.0,
            fmt("%zu/%zu instances match the exhaustive optimum, %.1fs (limit 60s)", matched,
                checked, secs)};
}

// ---- 2. belady dominates every policy ----------------------------------

Outcome criterion_2() {
    // one small shared cache model, trained on an unrelated workload
    Trace warmup = generate_synthetic(default_profile(WorkloadCategory::MailServer, 777), 4000);
    auto warm_stats = aggregate_page_stats(warmup, DeviceModel{});
    auto warm_labeled = oracle_replay(warmup, 256, warm_stats);
    nn::TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 8;
    tc.seed = 21;
    const size_t dims[] = {16};
    nn::RnnModel shared_model = train_cache_model(warm_labeled, tc, dims);
    RcrnnModels models;
    models.single = &shared_model;

    size_t violations = 0, runs = 0;
    double min_margin = 1.0;
    for (uint64_t seed = 1; seed <= 200; ++seed) {
        const auto category = WorkloadCategory(int(seed % 4));
        const size_t n = seed == 199 ? 20000 : seed == 200 ? 50000 : 1500 + (seed * 37) % 2501;
        // mail requests average ~11 pages; keep its cache big enough to hold
        // a few dozen requests, like the other categories
        const uint64_t floor = category == WorkloadCategory::MailServer ? 512 : 256;
        const uint64_t capacity =
            std::max(floor, std::array<uint64_t, 5>{256, 384, 512, 768, 1024}[seed % 5]);
        Trace t = generate_synthetic(default_profile(category, seed), n);
        SimConfig cfg;
        cfg.capacity_pages = capacity;
        Metrics belady = simulate(t, "belady", cfg);
        g_collected_metrics.push_back(belady);
        for (const char* p : {"lru", "access", "larc", "rcrnn"}) {
            Metrics m = simulate(t, p, cfg, &models);
            g_collected_metrics.push_back(m);
            ++runs;
            min_margin = std::min(min_margin, belady.hit_ratio() - m.hit_ratio());
            if (m.hit_ratio() > belady.hit_ratio()) ++violations;
        }
    }
    return {violations == 0,
            fmt("%zu policy runs over 200 traces, %zu violations, min margin %+.5f", runs,
                violations, min_margin)};
}

// ---- 3. Eq. 4 over the reference accuracy table ------------------------

Outcome criterion_3() {
    struct Row {
        double cached, dur, base_cached, base_dur;
        int expected;
    };
    static const Row rows[16] = {
        {91.23, 93.65, 62.69, 47.74, 185}, {97.93, 95.17, 72.63, 60.34, 112},
        {92.34, 100.00, 73.42, 54.76, 129}, {97.59, 94.90, 78.23, 65.52, 80},
        {98.35, 92.43, 71.61, 58.13, 118}, {89.31, 91.42, 58.40, 42.92, 225},
        {95.45, 72.54, 66.62, 43.49, 138}, {88.31, 100.00, 83.31, 74.18, 43},
        {94.32, 99.53, 76.98, 90.71, 34},  {97.59, 99.90, 77.60, 72.83, 73},
        {93.74, 100.00, 82.75, 98.63, 15}, {97.17, 91.55, 78.14, 61.54, 85},
        {94.99, 97.07, 75.40, 68.99, 77},  {96.74, 98.44, 63.47, 55.17, 172},
        {93.51, 99.67, 71.20, 52.87, 147}, {95.23, 98.50, 78.36, 68.55, 75},
    };
    int worst = 0;
    size_t ok = 0;
    for (const Row& r : rows) {
        const int got = improvement_metric(r.cached / 100.0, r.dur / 100.0, r.base_cached / 100.0,
                                           r.base_dur / 100.0);
        const int err = std::abs(got - r.expected);
        worst = std::max(worst, err);
        ok += err <= 1;
    }
    return {ok == 16, fmt("16/%zu rows within +-1 point, worst deviation %d", ok, worst)};
}

// ---- 4. analytic gradients vs central finite differences ---------------

Outcome criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(909);
    nn::RnnModel model = nn::make_model(4, {8, 8}, {3}, 31);
    std::vector<nn::Sample> batch;
    for (int i = 0; i < 3; ++i) {
        nn::Matrix w(10, 4);
        for (auto& v : w.a) v = rng.uniform(-1.0, 1.0);
        batch.push_back(nn::make_classified(std::move(w), size_t(i % 3)));
    }
    const nn::LossGrads lg = nn::loss_and_gradients(model, batch);
    auto params = nn::param_list(model);
    const double h = 1e-5;
    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        for (size_t i = 0; i < params[p]->size(); ++i) {
            double& v = params[p]->a[i];
            const double saved = v;
            v = saved + h;
            const double lp = nn::loss_and_gradients(model, batch).loss;
            v = saved - h;
            const double lm = nn::loss_and_gradients(model, batch).loss;
            v = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = lg.grads[p].a[i];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && secs < 30.0,
            fmt("max relative error %.3g (limit 1e-4), %.1fs (limit 30s)", worst, secs)};
}

// ---- 5. workload characterizer accuracy --------------------------------

Outcome criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<nn::Sample> train, held;
    for (int c = 0; c < kNumCategories; ++c) {
        Trace t = generate_synthetic(default_profile(WorkloadCategory(c), 900 + c), 20000);
        t.category = WorkloadCategory(c);
        auto samples = build_characterizer_samples(t);
        for (size_t i = 0; i < samples.size(); ++i)
            (i % 5 == 4 ? held : train).push_back(std::move(samples[i]));
    }
    nn::RnnModel model = make_characterizer_model(42);  // 1 layer x 50 units
    nn::TrainConfig cfg;
    cfg.epochs = 1;
    double best = 0.0;
    size_t epochs_used = 0;
    for (size_t e = 0; e < 20 && best < 0.90; ++e) {
        cfg.seed = 17 + e;
        nn::train(model, train, cfg);
        best = std::max(best, nn::evaluate(model, held)[0].accuracy());
        epochs_used = e + 1;
    }
    const double secs = seconds_since(t0);
    return {best >= 0.90 && secs < 600.0,
            fmt("held-out accuracy %.4f after %zu epochs (need >= 0.90 in <= 20), %.0fs "
                "(limit 600s)",
                best, epochs_used, secs)};
}

// ---- 6. cache model mimics the oracle tags -----------------------------

Outcome criterion_6() {
    const auto t0 = std::chrono::steady_clock::now();
    GeneratorProfile profile = default_profile(WorkloadCategory::WebServer, 101);
    profile.hot_set_pages = 4096;
    Trace t = generate_synthetic(profile, 9600);
    auto stats = aggregate_page_stats(t, DeviceModel{});
    auto labeled = oracle_replay(t, 256, stats);

    auto samples = build_cache_samples(labeled);
    auto noisy = augment_feedback_noise(samples, kDefaultFeedbackNoise, 99);
    std::vector<nn::Sample> train, held;
    for (size_t i = 0; i < samples.size(); ++i)
        (i % 5 == 4 ? held : train).push_back(std::move(samples[i]));
    for (size_t i = 0; i < noisy.size(); ++i)
        if (i % 5 != 4) train.push_back(std::move(noisy[i]));

    nn::RnnModel model = make_cache_model(7);  // 3 layers x 256 units
    nn::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 32;
    cfg.learning_rate = 0.003;
    double admit = 0.0, duration = 0.0;
    size_t epochs_used = 0;
    for (size_t e = 0; e < 30; ++e) {
        cfg.seed = 3 + e;
        nn::train(model, train, cfg);
        auto hs = nn::evaluate(model, held);
        admit = hs[0].accuracy();
        duration = hs[1].accuracy();
        epochs_used = e + 1;
        if (admit >= 0.87 && duration >= 0.72 && e >= 9) break;  // small safety margin
    }
    const double secs = seconds_since(t0);
    return {admit >= 0.85 && duration >= 0.70 && secs < 1200.0,
            fmt("held-out admit accuracy %.4f (need >= 0.85), duration accuracy %.4f "
                "(need >= 0.70), %zu epochs, %.0fs (limit 1200s)",
                admit, duration, epochs_used, secs)};
}

// ---- 7. learned admission resists cyclic thrash -------------------------

Trace thrash_trace(uint64_t capacity, double factor, size_t cycles) {
    const int64_t distinct = int64_t(double(capacity) * factor);
    const int64_t read_pages = int64_t(capacity);
    Trace t;
    int64_t ts = 0;
    for (size_t c = 0; c < cycles; ++c)
        for (int64_t p = 1; p <= distinct; ++p) {
            t.requests.push_back({ts, p, 1, p <= read_pages ? Op::Read : Op::Write});
            ts += 1000;
        }
    return t;
}

Outcome criterion_7() {
    const uint64_t capacity = 128;
    Trace t = thrash_trace(capacity, 1.5, 12);  // 192 distinct pages, 12 cycles
    SimConfig cfg;
    cfg.capacity_pages = capacity;

    Metrics lru = simulate(t, "lru", cfg);
    Metrics oracle = simulate(t, "oracle-benefit", cfg);
    g_collected_metrics.push_back(lru);
    g_collected_metrics.push_back(oracle);

    auto stats = aggregate_page_stats(t, DeviceModel{});
    auto labeled = oracle_replay(t, capacity, stats);
    nn::TrainConfig tc;
    tc.epochs = 150;
    tc.batch_size = 8;
    tc.seed = 3;
    const size_t dims[] = {32};
    nn::RnnModel model = train_cache_model(labeled, tc, dims);
    RcrnnModels models;
    models.single = &model;
    Metrics rcrnn = simulate(t, "rcrnn", cfg, &models);
    g_collected_metrics.push_back(rcrnn);

    const bool pass =
        lru.hits == 0 && oracle.hit_ratio() >= 0.3 && rcrnn.hit_ratio() > lru.hit_ratio();
    return {pass, fmt("lru %.4f (need exactly 0), oracle-benefit %.4f (need >= 0.3), rcrnn %.4f "
                      "(need > lru)",
                      lru.hit_ratio(), oracle.hit_ratio(), rcrnn.hit_ratio())};
}

// ---- 8. metric conservation ---------------------------------------------

Outcome criterion_8() {
    if (g_collected_metrics.empty())
        return {false, "no metrics collected (criteria 2 and 7 must run first)"};
    size_t violations = 0;
    for (const Metrics& m : g_collected_metrics)
        if (!m.conservation_holds()) ++violations;
    return {violations == 0, fmt("%zu simulations checked, %zu conservation violations",
                                 g_collected_metrics.size(), violations)};
}

// ---- 9. reconfiguration recovers after a workload switch ----------------

Outcome criterion_9() {
    const uint64_t capacity = 512;
    Trace web = generate_synthetic(default_profile(WorkloadCategory::WebServer, 301), 25000);
    Trace mail = generate_synthetic(default_profile(WorkloadCategory::MailServer, 302), 25000);

    Trace both = web;
    const int64_t base = web.requests.back().timestamp_us + 1000;
    const int64_t mail0 = mail.requests.front().timestamp_us;
    for (IoRequest r : mail.requests) {
        r.timestamp_us = base + (r.timestamp_us - mail0);
        both.requests.push_back(r);
    }
    both.category.reset();

    auto train_category_model = [&](const Trace& tr, uint64_t seed) {
        auto stats = aggregate_page_stats(tr, DeviceModel{});
        auto labeled = oracle_replay(tr, capacity, stats);
        nn::TrainConfig tc;
        tc.epochs = 12;
        tc.batch_size = 16;
        tc.seed = seed;
        const size_t dims[] = {64};
        return train_cache_model(labeled, tc, dims);
    };
    nn::RnnModel web_model = train_category_model(web, 11);
    nn::RnnModel mail_model = train_category_model(mail, 12);

    std::vector<nn::Sample> char_samples;
    {
        Trace a = web;
        a.category = WorkloadCategory::WebServer;
        Trace b = mail;
        b.category = WorkloadCategory::MailServer;
        for (auto& s : build_characterizer_samples(a)) char_samples.push_back(std::move(s));
        for (auto& s : build_characterizer_samples(b)) char_samples.push_back(std::move(s));
    }
    nn::RnnModel characterizer = make_characterizer_model(9);
    nn::TrainConfig cc;
    cc.epochs = 4;
    cc.seed = 2;
    nn::train(characterizer, char_samples, cc);

    SimConfig cfg;
    cfg.capacity_pages = capacity;

    // steady state: the matching model over the second workload alone
    RcrnnModels steady_models;
    steady_models.single = &mail_model;
    Metrics steady = simulate(mail, "rcrnn", cfg, &steady_models);
    double steady_hr = 0.0;
    for (size_t w = steady.window_hit_ratio.size() - 10; w < steady.window_hit_ratio.size(); ++w)
        steady_hr += steady.window_hit_ratio[w];
    steady_hr /= 10.0;

    RcrnnModels registry;
    registry.characterizer = &characterizer;
    registry.per_category[size_t(WorkloadCategory::WebServer)] = &web_model;
    registry.per_category[size_t(WorkloadCategory::MailServer)] = &mail_model;
    registry.initial = WorkloadCategory::WebServer;
    registry.monitor_enabled = true;
    Metrics reconfigured = simulate(both, "rcrnn", cfg, &registry);

    RcrnnModels fixed_models;
    fixed_models.single = &web_model;
    Metrics fixed = simulate(both, "rcrnn", cfg, &fixed_models);

    if (reconfigured.switches.empty())
        return {false, "no reconfiguration event detected after the workload change"};
    const size_t switch_window = reconfigured.switches.front().first / 1000;

    double best_recovery = 0.0;
    for (size_t w = switch_window + 1;
         w < std::min(switch_window + 21, reconfigured.window_hit_ratio.size()); ++w)
        best_recovery = std::max(best_recovery, reconfigured.window_hit_ratio[w]);

    auto post_switch_mean = [&](const Metrics& m) {
        double sum = 0.0;
        size_t count = 0;
        for (size_t w = 25; w < m.window_hit_ratio.size(); ++w) {
            sum += m.window_hit_ratio[w];
            ++count;
        }
        return sum / double(count);
    };
    const double post_reconf = post_switch_mean(reconfigured);
    const double post_fixed = post_switch_mean(fixed);

    const bool pass = best_recovery >= 0.9 * steady_hr && post_reconf > post_fixed;
    return {pass,
            fmt("switch at window %zu; recovery %.4f (need >= 0.9x steady %.4f); post-switch "
                "hit ratio %.4f vs fixed single-model %.4f (need strictly higher)",
                switch_window, best_recovery, steady_hr, post_reconf, post_fixed)};
}

// ---- 10. closed-loop decision latency -----------------------------------

Outcome criterion_10() {
    nn::RnnModel model = make_cache_model(33);  // 3 layers x 256 units
    Trace t = generate_synthetic(default_profile(WorkloadCategory::WebServer, 5), 10000);
    CacheDecisionStream stream(&model);
    for (size_t i = 0; i < 100; ++i) {  // warm up caches
        ModelDecision d = stream.decide(t.requests[i]);
        stream.record_outcome(d.admit ? Decision::MissAdmit : Decision::MissBypass, d.label);
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (const IoRequest& r : t.requests) {
        ModelDecision d = stream.decide(r);
        stream.record_outcome(d.admit ? Decision::MissAdmit : Decision::MissBypass, d.label);
    }
    const double ms = seconds_since(t0) / double(t.requests.size()) * 1e3;
    return {ms < 1.0, fmt("mean decision latency %.4f ms over 10000 requests (limit 1 ms)", ms)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    struct Entry {
        int id;
        const char* name;
        Outcome (*run)();
    };
    const Entry entries[] = {
        {1, "belady optimality vs exhaustive search", criterion_1},
        {2, "belady dominates lru/access/larc/rcrnn", criterion_2},
        {3, "improvement metric reproduces the reference table", criterion_3},
        {4, "bptt gradients match finite differences", criterion_4},
        {5, "characterizer reaches 90% held-out accuracy", criterion_5},
        {6, "cache model mimics oracle admit/duration tags", criterion_6},
        {7, "learned admission resists cyclic thrash", criterion_7},
        {8, "metric conservation laws hold exactly", criterion_8},
        {9, "reconfiguration recovers after a workload switch", criterion_9},
        {10, "closed-loop rcrnn decision latency under 1 ms", criterion_10},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        if (!selected.empty() && !selected.count(e.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = e.run();
        } catch (const std::exception& ex) {
            outcome = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("[%s] %2d. %s: %s (%.1fs)\n", outcome.pass ? "PASS" : "FAIL", e.id, e.name,
                    outcome.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
        failures += !outcome.pass;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
