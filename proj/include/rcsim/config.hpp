#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rcsim/device.hpp"
#include "rcsim/engine.hpp"

namespace rcsim {

// thrown for malformed or missing config fields; the CLI maps it to exit 2
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat `key = value` file with dotted sections and '#' comments.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        KeyValueConfig cfg;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        touched_.insert(it->first);
        return it->second;
    }

    std::string require(const std::string& key) const {
        auto v = get(key);
        if (!v) throw ConfigError(key + ": required config field is missing");
        return *v;
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        try {
            size_t pos = 0;
            const double d = std::stod(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            return d;
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a number, got '" + *v + "'");
        }
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        try {
            size_t pos = 0;
            const long long d = std::stoll(*v, &pos);
            if (pos != v->size() || d < 0) throw std::invalid_argument("");
            return uint64_t(d);
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected a non-negative integer, got '" + *v + "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw ConfigError(key + ": expected true/false, got '" + *v + "'");
    }

    // unread keys are almost always typos
    std::vector<std::string> unknown_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!touched_.count(k)) out.push_back(k);
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> touched_;
};

inline DeviceModel device_from_config(const KeyValueConfig& cfg) {
    DeviceModel dev;
    dev.ssd_read_base_ms = cfg.get_double("device.ssd_read_base_ms", dev.ssd_read_base_ms);
    dev.ssd_write_base_ms = cfg.get_double("device.ssd_write_base_ms", dev.ssd_write_base_ms);
    dev.hdd_random_base_ms = cfg.get_double("device.hdd_random_base_ms", dev.hdd_random_base_ms);
    dev.hdd_seq_mb_per_s = cfg.get_double("device.hdd_seq_mb_per_s", dev.hdd_seq_mb_per_s);
    dev.ssd_mb_per_s = cfg.get_double("device.ssd_mb_per_s", dev.ssd_mb_per_s);
    try {
        dev.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("device: ") + e.what());
    }
    return dev;
}

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = item.find_last_not_of(" \t");
        out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

}  // namespace rcsim
