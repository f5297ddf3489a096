#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace grif {

// One training-log record. Serialized as one JSON object per line so the
// curves are directly plottable; formatting is deterministic.
struct MetricRow {
    int64_t step = 0;
    double loss = 0;
    double lr = 0;
    double top1 = 0;
    bool has_top1 = false;
};

inline std::string format_metric_row(const MetricRow& r) {
    char buf[160];
    if (r.has_top1)
        std::snprintf(buf, sizeof(buf), "{\"step\":%lld,\"loss\":%.6g,\"lr\":%.6g,\"top1\":%.6g}",
                      static_cast<long long>(r.step), r.loss, r.lr, r.top1);
    else
        std::snprintf(buf, sizeof(buf), "{\"step\":%lld,\"loss\":%.6g,\"lr\":%.6g}",
                      static_cast<long long>(r.step), r.loss, r.lr);
    return buf;
}

inline void write_metrics(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("metrics: cannot write '" + path + "'");
    for (const auto& r : rows) f << format_metric_row(r) << '\n';
}

}  // namespace grif
