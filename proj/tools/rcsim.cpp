// Trace-driven SSD cache simulator: synthetic workload generation, offline
// benefit labeling, recurrent-model training, and policy comparison.

#include <CLI11.hpp>
#include <iomanip>
#include <iostream>
#include <memory>

#include "rcsim/characterize.hpp"
#include "rcsim/config.hpp"
#include "rcsim/engine.hpp"
#include "rcsim/nn.hpp"
#include "rcsim/oracle.hpp"
#include "rcsim/trace.hpp"

namespace {

using namespace rcsim;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GenArgs {
    std::string category;
    std::string scenario;
    std::string out;
    size_t n = 20000;
    uint64_t seed = 1;
    // profile overrides
    double read_ratio = -1, mean_size_kb = -1, zipf_s = -1, seq_run_prob = -1,
           interarrival_us = -1;
    int64_t hot_set_pages = -1;
};

int cmd_gen(const GenArgs& a) {
    Trace trace;
    if (!a.scenario.empty()) {
        auto sc = scenario_from_name(a.scenario);
        if (!sc) throw ConfigError("unknown scenario '" + a.scenario + "'");
        auto cats = scenario_categories(*sc);
        trace = make_scenario_trace(cats, a.n, a.seed);
    } else {
        auto cat = category_from_name(a.category);
        if (!cat) throw ConfigError("unknown category '" + a.category + "'");
        GeneratorProfile p = default_profile(*cat, a.seed);
        if (a.read_ratio >= 0) p.read_ratio = a.read_ratio;
        if (a.mean_size_kb >= 0) p.mean_size_kb = a.mean_size_kb;
        if (a.zipf_s >= 0) p.zipf_s = a.zipf_s;
        if (a.seq_run_prob >= 0) p.seq_run_prob = a.seq_run_prob;
        if (a.interarrival_us >= 0) p.mean_interarrival_us = a.interarrival_us;
        if (a.hot_set_pages >= 0) p.hot_set_pages = a.hot_set_pages;
        trace = generate_synthetic(p, a.n);
        trace.category = *cat;
    }
    write_trace(trace, a.out);
    std::cout << "wrote " << trace.requests.size() << " requests to " << a.out << "\n";
    return kExitOk;
}

struct LabelArgs {
    std::string trace;
    std::string out;
    std::string config;
    uint64_t capacity = 1024;
};

int cmd_label(const LabelArgs& a) {
    DeviceModel dev;
    if (!a.config.empty()) dev = device_from_config(KeyValueConfig::parse_file(a.config));
    Trace trace = parse_trace(a.trace);
    auto stats = aggregate_page_stats(trace, dev);
    auto labeled = oracle_replay(trace, a.capacity, stats);
    write_labeled_trace(labeled, trace.category, a.out);

    uint64_t cached = 0;
    for (const auto& lr : labeled) cached += lr.cached;
    std::cout << "labeled " << labeled.size() << " requests (" << cached << " cached) to "
              << a.out << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string kind;
    std::vector<std::string> inputs;
    std::string out;
    std::string history;
    size_t epochs = 0;  // 0 = kind default
    bool epochs_set = false;
    size_t batch = 32;
    double lr = 0.001;
    size_t hidden = 0;  // 0 = kind default
    size_t layers = 0;
    size_t window = 100;
    uint64_t seed = 1;
};

void write_history(const std::string& path, std::span<const nn::EpochStats> history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,loss,accuracy\n";
    for (size_t e = 0; e < history.size(); ++e)
        out << e << ',' << history[e].loss << ',' << history[e].accuracy << "\n";
}

// window index % 5 == 4 goes to the held-out set
template <typename T>
void split_80_20(std::vector<T>&& all, std::vector<T>& train, std::vector<T>& held) {
    for (size_t i = 0; i < all.size(); ++i)
        (i % 5 == 4 ? held : train).push_back(std::move(all[i]));
}

int cmd_train(const TrainArgs& a) {
    nn::TrainConfig cfg;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.seed = a.seed;

    std::vector<nn::Sample> train_set, held_set;
    nn::RnnModel model;

    if (a.kind == "characterizer") {
        cfg.epochs = a.epochs_set ? a.epochs : 20;
        for (const auto& path : a.inputs) {
            Trace t = parse_trace(path);
            if (!t.category)
                throw ConfigError(path + ": trace needs a '# category=' line for training");
            split_80_20(build_characterizer_samples(t, a.window), train_set, held_set);
        }
        model = make_characterizer_model(a.seed, a.hidden ? a.hidden : 50);
    } else if (a.kind == "cache-model") {
        cfg.epochs = a.epochs_set ? a.epochs : 10;
        for (const auto& path : a.inputs) {
            LabeledTrace lt = parse_labeled_trace(path);
            split_80_20(build_cache_samples(lt.requests, a.window), train_set, held_set);
        }
        // corrupted-feedback copies keep the model stable when it runs on
        // its own decisions instead of oracle tags
        auto noisy = augment_feedback_noise(train_set, kDefaultFeedbackNoise, a.seed ^ 0x9e37);
        train_set.insert(train_set.end(), std::make_move_iterator(noisy.begin()),
                         std::make_move_iterator(noisy.end()));
        const size_t width = a.hidden ? a.hidden : 256;
        std::vector<size_t> dims(a.layers ? a.layers : 3, width);
        model = make_cache_model(a.seed, dims);
    } else {
        throw ConfigError("unknown train kind '" + a.kind + "' (characterizer|cache-model)");
    }
    if (train_set.empty()) throw ConfigError("inputs: no full training windows found");

    auto history = nn::train(model, train_set, cfg);
    nn::save_model(model, a.out);
    if (!a.history.empty()) write_history(a.history, history);

    auto train_stats = nn::evaluate(model, train_set);
    std::cout << "saved " << a.out << " after " << history.size() << " epochs\n";
    auto print_stats = [&](const char* tag, std::span<const nn::HeadStats> stats) {
        std::cout << tag;
        if (a.kind == "characterizer") {
            std::cout << " category accuracy " << stats[0].accuracy();
        } else {
            std::cout << " admit accuracy " << stats[0].accuracy() << ", duration accuracy "
                      << stats[1].accuracy();
        }
        std::cout << "\n";
    };
    print_stats("train:", train_stats);
    if (!held_set.empty()) {
        auto held_stats = nn::evaluate(model, held_set);
        print_stats("held-out:", held_stats);
    }
    return kExitOk;
}

struct SimArgs {
    std::string config;
    std::string trace;
    std::string policy;
    std::vector<std::string> policies;
    int64_t capacity = -1;
    int64_t seed = -1;
};

struct LoadedModels {
    std::vector<std::unique_ptr<nn::RnnModel>> storage;
    RcrnnModels registry;
};

LoadedModels load_models(const KeyValueConfig& cfg, bool rcrnn_needed) {
    LoadedModels out;
    auto load = [&](const std::string& key) -> const nn::RnnModel* {
        auto path = cfg.get(key);
        if (!path) return nullptr;
        out.storage.push_back(std::make_unique<nn::RnnModel>(nn::load_model(*path)));
        return out.storage.back().get();
    };
    out.registry.characterizer = load("models.characterizer");
    out.registry.single = load("models.cache");
    const std::pair<const char*, WorkloadCategory> cats[] = {
        {"models.cache.mail", WorkloadCategory::MailServer},
        {"models.cache.web", WorkloadCategory::WebServer},
        {"models.cache.database", WorkloadCategory::Database},
        {"models.cache.fileserver", WorkloadCategory::FileServer},
    };
    for (const auto& [key, cat] : cats)
        out.registry.per_category[size_t(cat)] = load(key);

    if (auto initial = cfg.get("rcrnn.initial_category")) {
        auto cat = category_from_name(*initial);
        if (!cat) throw ConfigError("rcrnn.initial_category: unknown category '" + *initial + "'");
        out.registry.initial = *cat;
    }
    out.registry.monitor_enabled = cfg.get_bool("monitor.enabled", false);
    if (rcrnn_needed && !out.registry.initial_model())
        throw ConfigError("models.cache: rcrnn policy needs a cache model");
    if (rcrnn_needed && out.registry.monitor_enabled && !out.registry.characterizer)
        throw ConfigError("models.characterizer: monitoring needs a characterizer model");
    return out;
}

SimConfig sim_config_from(const KeyValueConfig& cfg, const SimArgs& a) {
    SimConfig sim;
    sim.capacity_pages = cfg.get_u64("capacity_pages", 1024);
    if (a.capacity >= 0) sim.capacity_pages = uint64_t(a.capacity);
    sim.seed = cfg.get_u64("seed", 0);
    if (a.seed >= 0) sim.seed = uint64_t(a.seed);
    sim.device = device_from_config(cfg);
    sim.metrics_window = cfg.get_u64("metrics.window", 1000);
    sim.rcrnn_overhead_ms = cfg.get_double("rcrnn.overhead_ms", 0.0);
    sim.monitor_buffer = cfg.get_u64("monitor.buffer", 1000);
    sim.monitor_window = cfg.get_u64("monitor.window", 100);
    if (sim.capacity_pages < 1) throw ConfigError("capacity_pages: must be >= 1");
    if (sim.metrics_window < 1) throw ConfigError("metrics.window: must be >= 1");
    if (sim.monitor_window < 1 || sim.monitor_buffer < sim.monitor_window)
        throw ConfigError("monitor.window: needs 1 <= monitor.window <= monitor.buffer");
    return sim;
}

struct ReportPaths {
    std::optional<std::string> csv, text, series;
};

void emit_report(const SimulationReport& report, const ReportPaths& paths) {
    if (paths.csv) {
        write_report_csv(report, *paths.csv);
        std::cout << "report: " << *paths.csv << "\n";
    }
    if (paths.text) {
        write_report_text(report, *paths.text);
        std::cout << "report: " << *paths.text << "\n";
    }
    if (paths.series) {
        write_series_csv(report, *paths.series);
        std::cout << "series: " << *paths.series << "\n";
    }
    write_report_text(report, std::cout);
}

int cmd_simulate(const SimArgs& a, bool compare) {
    KeyValueConfig cfg;
    if (!a.config.empty()) cfg = KeyValueConfig::parse_file(a.config);

    std::string trace_path = a.trace;
    if (trace_path.empty()) trace_path = cfg.require("trace");

    std::vector<std::string> policies;
    if (!a.policies.empty()) {
        policies = a.policies;
    } else if (!a.policy.empty()) {
        policies = {a.policy};
    } else if (auto listed = cfg.get("policies")) {
        policies = split_list(*listed);
    } else if (auto single = cfg.get("policy")) {
        policies = {*single};
    } else {
        throw ConfigError("policy: no policy selected");
    }
    cfg.get("policy");  // either spelling is fine when flags chose the policies
    cfg.get("policies");
    for (const auto& p : policies) {
        const auto& known = known_policies();
        if (std::find(known.begin(), known.end(), p) == known.end())
            throw ConfigError("policy: unknown policy '" + p + "'");
    }
    if (!compare && policies.size() != 1)
        throw ConfigError("policy: simulate takes exactly one policy (use compare for several)");

    const bool wants_rcrnn =
        std::find(policies.begin(), policies.end(), "rcrnn") != policies.end();
    LoadedModels models = load_models(cfg, wants_rcrnn);
    SimConfig sim = sim_config_from(cfg, a);
    ReportPaths paths{cfg.get("report.csv"), cfg.get("report.text"), cfg.get("report.series")};

    // every supported key has been read by now; anything left is a typo
    const auto unknown = cfg.unknown_keys();
    if (!unknown.empty()) throw ConfigError(unknown.front() + ": unknown config field");

    Trace trace = parse_trace(trace_path);
    SimulationReport report = compare_report(trace, policies, sim, &models.registry);
    emit_report(report, paths);
    return kExitOk;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_list(line));
    }
    if (rows.empty()) throw std::runtime_error(path + ": empty report");
    std::vector<size_t> widths;
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c) {
            if (c >= widths.size()) widths.push_back(0);
            widths[c] = std::max(widths[c], row[c].size());
        }
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c)
            std::cout << std::left << std::setw(int(widths[c]) + 2) << row[c];
        std::cout << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-driven SSD cache simulator"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic trace");
    gen_cmd->add_option("--category", gen.category, "mail|web|database|fileserver");
    gen_cmd->add_option("--scenario", gen.scenario, "single|virt|storage (interleaved streams)");
    gen_cmd->add_option("-n,--requests", gen.n, "request count (per stream for scenarios)");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--out", gen.out, "output trace CSV")->required();
    gen_cmd->add_option("--read-ratio", gen.read_ratio, "override read fraction");
    gen_cmd->add_option("--mean-size-kb", gen.mean_size_kb, "override mean request size");
    gen_cmd->add_option("--zipf-s", gen.zipf_s, "override popularity skew");
    gen_cmd->add_option("--hot-set-pages", gen.hot_set_pages, "override hot-set size");
    gen_cmd->add_option("--seq-run-prob", gen.seq_run_prob, "override sequential-run probability");
    gen_cmd->add_option("--interarrival-us", gen.interarrival_us, "override mean inter-arrival");

    LabelArgs label;
    auto* label_cmd = app.add_subcommand("label", "tag a trace with oracle cache decisions");
    label_cmd->add_option("--trace", label.trace, "input trace CSV")->required();
    label_cmd->add_option("--capacity", label.capacity, "cache capacity in pages");
    label_cmd->add_option("--out", label.out, "output labeled CSV")->required();
    label_cmd->add_option("--config", label.config, "config file for device parameters");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train a characterizer or cache model");
    train_cmd->add_option("--kind", train.kind, "characterizer|cache-model")->required();
    train_cmd->add_option("--inputs", train.inputs, "input trace/labeled CSVs")->required();
    train_cmd->add_option("--out", train.out, "output model file")->required();
    train_cmd->add_option("--history", train.history, "per-epoch history CSV");
    train_cmd->add_option("--epochs", train.epochs, "training epochs")
        ->each([&](const std::string&) { train.epochs_set = true; });
    train_cmd->add_option("--batch", train.batch, "batch size");
    train_cmd->add_option("--lr", train.lr, "learning rate");
    train_cmd->add_option("--hidden", train.hidden, "hidden units per layer");
    train_cmd->add_option("--layers", train.layers, "LSTM layers (cache-model)");
    train_cmd->add_option("--window", train.window, "requests per window");
    train_cmd->add_option("--seed", train.seed, "training seed");

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "run one policy over a trace");
    sim_cmd->add_option("--config", sim.config, "simulation config file");
    sim_cmd->add_option("--trace", sim.trace, "trace CSV (overrides config)");
    sim_cmd->add_option("--policy", sim.policy, "lru|access|larc|rcrnn|belady|oracle-benefit");
    sim_cmd->add_option("--capacity", sim.capacity, "capacity in pages (overrides config)");
    sim_cmd->add_option("--seed", sim.seed, "seed (overrides config)");

    SimArgs cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "run several policies over one trace");
    cmp_cmd->add_option("--config", cmp.config, "simulation config file");
    cmp_cmd->add_option("--trace", cmp.trace, "trace CSV (overrides config)");
    cmp_cmd->add_option("--policies", cmp.policies, "policy list (overrides config)");
    cmp_cmd->add_option("--capacity", cmp.capacity, "capacity in pages (overrides config)");
    cmp_cmd->add_option("--seed", cmp.seed, "seed (overrides config)");

    std::string report_path;
    auto* report_cmd = app.add_subcommand("report", "pretty-print a report CSV");
    report_cmd->add_option("file", report_path, "report CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            if (gen.category.empty() == gen.scenario.empty())
                throw ConfigError("gen needs exactly one of --category or --scenario");
            return cmd_gen(gen);
        }
        if (label_cmd->parsed()) return cmd_label(label);
        if (train_cmd->parsed()) return cmd_train(train);
        if (sim_cmd->parsed()) return cmd_simulate(sim, false);
        if (cmp_cmd->parsed()) return cmd_simulate(cmp, true);
        if (report_cmd->parsed()) return cmd_report(report_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
