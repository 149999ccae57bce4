#pragma once

#include <optional>
#include <stdexcept>

#include "rcsim/trace.hpp"

namespace rcsim {

enum class Device : uint8_t { HDD, SSD };

// Analytic latency model. Defaults are representative 7200rpm HDD / SATA SSD
// figures; all of them are configurable.
struct DeviceModel {
    double ssd_read_base_ms = 0.10;
    double ssd_write_base_ms = 0.25;
    double hdd_random_base_ms = 8.0;
    double hdd_seq_mb_per_s = 150.0;
    double ssd_mb_per_s = 500.0;

    void validate() const {
        if (ssd_read_base_ms <= 0 || ssd_write_base_ms <= 0 || hdd_random_base_ms <= 0 ||
            hdd_seq_mb_per_s <= 0 || ssd_mb_per_s <= 0)
            throw std::invalid_argument("device parameters must be positive");
        if (hdd_random_base_ms <= ssd_read_base_ms)
            throw std::invalid_argument("hdd_random_base_ms must exceed ssd_read_base_ms");
    }
};

// true iff cur starts exactly where prev ended
inline bool is_sequential(const std::optional<IoRequest>& prev, const IoRequest& cur) {
    return prev && cur.page_id == prev->end_page();
}

inline double response_time_ms(const DeviceModel& m, const IoRequest& req, Device device,
                               bool sequential) {
    const double transfer_ms = [&](double mb_per_s) {
        return double(req.size_bytes()) / (mb_per_s * 1e6) * 1e3;
    }(device == Device::SSD ? m.ssd_mb_per_s : m.hdd_seq_mb_per_s);

    if (device == Device::SSD)
        return (req.op == Op::Read ? m.ssd_read_base_ms : m.ssd_write_base_ms) + transfer_ms;
    return sequential ? transfer_ms : m.hdd_random_base_ms + transfer_ms;
}

}  // namespace rcsim
