#include "apnea/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace apnea {

std::optional<SampleRange> assemble_window(const EcgRecord& record, int minute_index) {
    if (minute_index < 0 || static_cast<size_t>(minute_index) >= record.labels.size())
        throw std::invalid_argument("minute index has no label");
    if (minute_index < 2) return std::nullopt;  // no left context
    auto spm = static_cast<size_t>(record.fs) * 60;
    size_t begin = static_cast<size_t>(minute_index - 2) * spm;
    size_t end = static_cast<size_t>(minute_index + 3) * spm;
    if (end > record.samples.size()) return std::nullopt;  // no right context
    return SampleRange{begin, end};
}

BeatSeries beats_in_window(const BeatSeries& beats, const SampleRange& range) {
    BeatSeries out;
    out.fs = beats.fs;
    for (size_t k = 0; k < beats.n_pairs(); ++k) {
        if (beats.r_idx[k] < range.begin || beats.r_idx[k] >= range.end) continue;
        if (beats.s_idx[k] < range.begin || beats.s_idx[k] >= range.end) continue;
        out.r_idx.push_back(beats.r_idx[k]);
        out.r_amp.push_back(beats.r_amp[k]);
        out.s_idx.push_back(beats.s_idx[k]);
        out.s_amp.push_back(beats.s_amp[k]);
    }
    return out;
}

ChannelSeries extract_channels(const BeatSeries& wb, size_t window_begin, int fs) {
    if (fs <= 0) throw std::invalid_argument("fs must be positive");
    ChannelSeries cs;
    auto rebase = [&](size_t idx) {
        return (static_cast<double>(idx) - static_cast<double>(window_begin)) / fs;
    };
    for (size_t k = 0; k < wb.n_pairs(); ++k) {
        cs.t_ramp.push_back(rebase(wb.r_idx[k]));
        cs.v_ramp.push_back(wb.r_amp[k]);
        cs.t_samp.push_back(rebase(wb.s_idx[k]));
        cs.v_samp.push_back(wb.s_amp[k]);
        if (k > 0) {
            cs.t_rr.push_back(rebase(wb.r_idx[k]));
            cs.v_rr.push_back(static_cast<double>(wb.r_idx[k] - wb.r_idx[k - 1]) / fs);
            cs.t_ss.push_back(rebase(wb.s_idx[k]));
            cs.v_ss.push_back(static_cast<double>(wb.s_idx[k] - wb.s_idx[k - 1]) / fs);
        }
    }
    return cs;
}

Moments normalize(std::vector<double>& values) {
    Moments m;
    if (values.empty()) return m;
    double n = static_cast<double>(values.size());
    for (double v : values) m.mean += v;
    m.mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - m.mean) * (v - m.mean);
    var /= n;
    m.stddev = std::sqrt(var);
    // rounding noise on a constant vector is not variance
    if (m.stddev <= 1e-12 * std::max(1.0, std::abs(m.mean))) {
        m.stddev = 0.0;
        std::fill(values.begin(), values.end(), 0.0);
    } else {
        for (double& v : values) v = (v - m.mean) / m.stddev;
    }
    return m;
}

SegmentOutcome build_segment(const EcgRecord& record, const BeatSeries& beats, int minute_index,
                             FeatureSet feature_set) {
    SegmentOutcome out;
    auto range = assemble_window(record, minute_index);
    if (!range) {
        out.reject = RejectReason::InsufficientContext;
        return out;
    }

    BeatSeries wb = beats_in_window(beats, *range);
    ChannelSeries cs = extract_channels(wb, range->begin, record.fs);
    // Every channel needs >= 4 spline knots; intervals have one knot
    // fewer than the paired beats, so 5 pairs is the floor.
    if (cs.t_rr.size() < 4 || cs.t_ss.size() < 4) {
        out.reject = RejectReason::TooFewBeats;
        return out;
    }

    FeatureSegment seg;
    seg.record_id = record.record_id;
    seg.minute_index = minute_index;
    seg.label = record.labels[static_cast<size_t>(minute_index)];
    seg.beat_count = static_cast<uint32_t>(wb.n_pairs());
    seg.n_channels = channel_count(feature_set);
    seg.channels.reserve(static_cast<size_t>(seg.n_channels) * kFeaturePoints);

    const std::array<std::pair<const std::vector<double>*, const std::vector<double>*>, 4> chans =
        {{{&cs.t_rr, &cs.v_rr},
          {&cs.t_ramp, &cs.v_ramp},
          {&cs.t_ss, &cs.v_ss},
          {&cs.t_samp, &cs.v_samp}}};

    for (int ch = 0; ch < seg.n_channels; ++ch) {
        std::vector<double> v = interpolate_to_900(*chans[ch].first, *chans[ch].second);
        Moments m = normalize(v);
        seg.mu[ch] = static_cast<float>(m.mean);
        seg.sigma[ch] = static_cast<float>(m.stddev);
        for (double x : v) seg.channels.push_back(static_cast<float>(x));
    }

    out.segment = std::move(seg);
    return out;
}

BuildResult build_dataset(std::span<const EcgRecord> records,
                          std::span<const BeatSeries> beats_per_record,
                          const BuildParams& params) {
    if (records.size() != beats_per_record.size())
        throw std::invalid_argument("records / beat series count mismatch");

    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return records[a].record_id < records[b].record_id;
    });

    BuildResult out;
    for (size_t oi : order) {
        const EcgRecord& rec = records[oi];
        const BeatSeries& beats = beats_per_record[oi];
        RecordBuildStats stats;
        stats.record_id = rec.record_id;
        stats.n_labeled = rec.labels.size();

        for (size_t minute = 0; minute < rec.labels.size(); ++minute) {
            SegmentOutcome so =
                build_segment(rec, beats, static_cast<int>(minute), params.feature_set);
            switch (so.reject) {
                case RejectReason::None:
                    out.segments.push_back(std::move(*so.segment));
                    ++stats.n_built;
                    break;
                case RejectReason::InsufficientContext:
                    ++stats.n_rejected_context;
                    break;
                case RejectReason::TooFewBeats:
                    ++stats.n_rejected_sparse;
                    break;
            }
        }

        out.report.n_labeled += stats.n_labeled;
        out.report.n_built += stats.n_built;
        out.report.n_rejected_context += stats.n_rejected_context;
        out.report.n_rejected_sparse += stats.n_rejected_sparse;
        out.report.per_record.push_back(std::move(stats));
    }
    return out;
}

}  // namespace apnea
