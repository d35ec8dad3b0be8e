#ifndef APNEA_METRICS_HPP
#define APNEA_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>

namespace apnea {

// SA is the positive class throughout.
struct ConfusionCounts {
    uint64_t tp = 0;
    uint64_t tn = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;

    uint64_t total() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
    double accuracy = 0.0;
    double sensitivity = 0.0;  // TP / (TP + FN)
    double specificity = 0.0;  // TN / (TN + FP)
    double f1_sa = 0.0;        // 2TP / (2TP + FP + FN)
    double f1_non_sa = 0.0;    // class roles swapped
    ConfusionCounts counts;

    // Zero-denominator metrics report 0 with the matching flag set.
    bool degenerate_sensitivity = false;
    bool degenerate_specificity = false;
    bool degenerate_f1_sa = false;
    bool degenerate_f1_non_sa = false;
};

ConfusionCounts confusion(std::span<const uint8_t> predicted, std::span<const uint8_t> truth);

// Throws std::invalid_argument when counts total zero.
MetricsReport compute_metrics(const ConfusionCounts& counts);

struct AblationDelta {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1_sa = 0.0;
    double f1_non_sa = 0.0;
};

struct AblationTable {
    MetricsReport r_only;
    MetricsReport r_and_s;
    AblationDelta delta;  // r_and_s - r_only
};

// Both reports must come from the same test segments (equal count totals).
AblationTable compare_feature_sets(const MetricsReport& report_r, const MetricsReport& report_rs);

std::string render_metrics_text(const MetricsReport& report);
std::string render_metrics_json(const MetricsReport& report);
std::string render_ablation_text(const AblationTable& table);
std::string render_ablation_json(const AblationTable& table);

}  // namespace apnea

#endif
