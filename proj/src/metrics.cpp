#include "apnea/metrics.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace apnea {

ConfusionCounts confusion(std::span<const uint8_t> predicted, std::span<const uint8_t> truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("prediction/truth length mismatch");
    ConfusionCounts c;
    for (size_t i = 0; i < truth.size(); ++i) {
        bool p = predicted[i] != 0;
        bool t = truth[i] != 0;
        if (p && t)
            ++c.tp;
        else if (!p && !t)
            ++c.tn;
        else if (p && !t)
            ++c.fp;
        else
            ++c.fn;
    }
    return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw std::invalid_argument("empty confusion counts");
    MetricsReport r;
    r.counts = c;

    auto tp = static_cast<double>(c.tp);
    auto tn = static_cast<double>(c.tn);
    auto fp = static_cast<double>(c.fp);
    auto fn = static_cast<double>(c.fn);

    r.accuracy = (tp + tn) / (tp + fn + tn + fp);

    if (c.tp + c.fn > 0)
        r.sensitivity = tp / (tp + fn);
    else
        r.degenerate_sensitivity = true;

    if (c.tn + c.fp > 0)
        r.specificity = tn / (tn + fp);
    else
        r.degenerate_specificity = true;

    if (2 * c.tp + c.fp + c.fn > 0)
        r.f1_sa = 2.0 * tp / (2.0 * tp + fp + fn);
    else
        r.degenerate_f1_sa = true;

    if (2 * c.tn + c.fn + c.fp > 0)
        r.f1_non_sa = 2.0 * tn / (2.0 * tn + fn + fp);
    else
        r.degenerate_f1_non_sa = true;

    return r;
}

AblationTable compare_feature_sets(const MetricsReport& report_r, const MetricsReport& report_rs) {
    if (report_r.counts.total() != report_rs.counts.total())
        throw std::invalid_argument("reports cover different segment sets");
    AblationTable t;
    t.r_only = report_r;
    t.r_and_s = report_rs;
    t.delta.accuracy = report_rs.accuracy - report_r.accuracy;
    t.delta.sensitivity = report_rs.sensitivity - report_r.sensitivity;
    t.delta.specificity = report_rs.specificity - report_r.specificity;
    t.delta.f1_sa = report_rs.f1_sa - report_r.f1_sa;
    t.delta.f1_non_sa = report_rs.f1_non_sa - report_r.f1_non_sa;
    return t;
}

std::string render_metrics_text(const MetricsReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "  accuracy     %7.4f\n"
                  "  sensitivity  %7.4f%s\n"
                  "  specificity  %7.4f%s\n"
                  "  f1 (SA)      %7.4f%s\n"
                  "  f1 (non-SA)  %7.4f%s\n"
                  "  counts       tp=%llu tn=%llu fp=%llu fn=%llu\n",
                  r.accuracy, r.sensitivity, r.degenerate_sensitivity ? "  [degenerate]" : "",
                  r.specificity, r.degenerate_specificity ? "  [degenerate]" : "", r.f1_sa,
                  r.degenerate_f1_sa ? "  [degenerate]" : "", r.f1_non_sa,
                  r.degenerate_f1_non_sa ? "  [degenerate]" : "",
                  static_cast<unsigned long long>(r.counts.tp),
                  static_cast<unsigned long long>(r.counts.tn),
                  static_cast<unsigned long long>(r.counts.fp),
                  static_cast<unsigned long long>(r.counts.fn));
    return buf;
}

std::string render_metrics_json(const MetricsReport& r) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["sensitivity"] = r.sensitivity;
    j["specificity"] = r.specificity;
    j["f1_sa"] = r.f1_sa;
    j["f1_non_sa"] = r.f1_non_sa;
    j["counts"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp},
                   {"fn", r.counts.fn}};
    nlohmann::json deg = nlohmann::json::array();
    if (r.degenerate_sensitivity) deg.push_back("sensitivity");
    if (r.degenerate_specificity) deg.push_back("specificity");
    if (r.degenerate_f1_sa) deg.push_back("f1_sa");
    if (r.degenerate_f1_non_sa) deg.push_back("f1_non_sa");
    j["degenerate"] = deg;
    return j.dump(2);
}

std::string render_ablation_text(const AblationTable& t) {
    auto pct = [](double v) { return 100.0 * v; };
    char buf[1024];
    std::snprintf(
        buf, sizeof buf,
        "%-34s %8s %8s %8s %8s %10s\n"
        "%-34s %8.2f %8.2f %8.2f %8.2f %10.2f\n"
        "%-34s %8.2f %8.2f %8.2f %8.2f %10.2f\n"
        "%-34s %+8.2f %+8.2f %+8.2f %+8.2f %+10.2f\n",
        "Feature combination", "Acc(%)", "Spe(%)", "Sen(%)", "F1-SA(%)", "F1-NonSA(%)",
        "RR intervals + R amplitude", pct(t.r_only.accuracy), pct(t.r_only.specificity),
        pct(t.r_only.sensitivity), pct(t.r_only.f1_sa), pct(t.r_only.f1_non_sa),
        "+ SS intervals + S amplitude", pct(t.r_and_s.accuracy), pct(t.r_and_s.specificity),
        pct(t.r_and_s.sensitivity), pct(t.r_and_s.f1_sa), pct(t.r_and_s.f1_non_sa),
        "delta (RS - R)", pct(t.delta.accuracy), pct(t.delta.specificity),
        pct(t.delta.sensitivity), pct(t.delta.f1_sa), pct(t.delta.f1_non_sa));
    return buf;
}

std::string render_ablation_json(const AblationTable& t) {
    nlohmann::json j;
    j["r_only"] = nlohmann::json::parse(render_metrics_json(t.r_only));
    j["r_and_s"] = nlohmann::json::parse(render_metrics_json(t.r_and_s));
    j["delta"] = {{"accuracy", t.delta.accuracy},
                  {"sensitivity", t.delta.sensitivity},
                  {"specificity", t.delta.specificity},
                  {"f1_sa", t.delta.f1_sa},
                  {"f1_non_sa", t.delta.f1_non_sa}};
    return j.dump(2);
}

}  // namespace apnea
