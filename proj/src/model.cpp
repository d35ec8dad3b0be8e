#include "apnea/model.hpp"

#include <algorithm>
#include <cmath>

#include "apnea/binio.hpp"
#include "apnea/synth.hpp"  // Rng

namespace apnea::nn {

namespace {
constexpr char kMagic[4] = {'A', 'P', 'N', 'C'};
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

Model<float> init_model(const ModelConfig& cfg, uint64_t seed) {
    Model<float> m = Model<float>::make(cfg);
    Rng rng(seed);

    auto he_fill = [&](std::vector<float>& w, size_t fan_in, double scale) {
        double std_dev = std::sqrt(scale / static_cast<double>(fan_in));
        for (float& v : w) v = static_cast<float>(rng.normal() * std_dev);
    };

    he_fill(m.stem.w, static_cast<size_t>(m.stem.in_ch / m.stem.groups) * m.stem.k, 2.0);
    for (auto& blk : m.blocks) {
        he_fill(blk.conv.w, static_cast<size_t>(blk.conv.in_ch / blk.conv.groups) * blk.conv.k,
                2.0);
        he_fill(blk.se_reduce.w, static_cast<size_t>(blk.se_reduce.in), 2.0);
        he_fill(blk.se_expand.w, static_cast<size_t>(blk.se_expand.in), 1.0);
    }
    he_fill(m.head.w, static_cast<size_t>(m.head.in), 1.0);
    return m;
}

size_t best_epoch_index(std::span<const double> f1_per_epoch) {
    if (f1_per_epoch.empty()) throw std::invalid_argument("empty f1 sequence");
    size_t best = 0;
    for (size_t i = 1; i < f1_per_epoch.size(); ++i)
        if (f1_per_epoch[i] > f1_per_epoch[best]) best = i;
    return best;
}

std::vector<double> predict_proba(const Model<float>& model,
                                  std::span<const FeatureSegment> segments, int batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    std::vector<double> proba;
    proba.reserve(segments.size());
    for (size_t off = 0; off < segments.size(); off += static_cast<size_t>(batch_size)) {
        size_t hi = std::min(segments.size(), off + static_cast<size_t>(batch_size));
        std::vector<size_t> idx(hi - off);
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = off + i;
        Tensor3<float> x = make_batch<float>(segments, idx);
        Mat<float> p = model.forward(x, /*train=*/false, nullptr);
        for (int i = 0; i < p.n; ++i) proba.push_back(static_cast<double>(p.at(i, 1)));
    }
    return proba;
}

std::vector<uint8_t> predict(const Model<float>& model, std::span<const FeatureSegment> segments,
                             double threshold, int batch_size) {
    std::vector<double> proba = predict_proba(model, segments, batch_size);
    std::vector<uint8_t> labels(proba.size());
    for (size_t i = 0; i < proba.size(); ++i) labels[i] = proba[i] >= threshold ? 1 : 0;
    return labels;
}

MetricsReport evaluate(const Model<float>& model, std::span<const FeatureSegment> segments,
                       double threshold) {
    std::vector<uint8_t> pred = predict(model, segments, threshold);
    std::vector<uint8_t> truth(segments.size());
    for (size_t i = 0; i < segments.size(); ++i) truth[i] = segments[i].label;
    return compute_metrics(confusion(pred, truth));
}

TrainResult train(const ModelConfig& cfg, const TrainConfig& tc,
                  std::span<const FeatureSegment> train_segments,
                  std::span<const FeatureSegment> val_segments) {
    cfg.validate();
    if (tc.batch_size < 1 || tc.epochs < 1)
        throw std::invalid_argument("batch_size and epochs must be >= 1");
    if (train_segments.empty() || val_segments.empty())
        throw std::invalid_argument("train and validation sets must be non-empty");
    for (const auto& s : train_segments)
        if (s.n_channels != cfg.in_channels)
            throw std::invalid_argument("segment channels do not match model config");

    // Canonical sample order; the seeded sampler owns all randomness, so
    // permuting the caller's segment order changes nothing.
    std::vector<size_t> order(train_segments.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const FeatureSegment &sa = train_segments[a], &sb = train_segments[b];
        return std::tie(sa.record_id, sa.minute_index) < std::tie(sb.record_id, sb.minute_index);
    });

    Model<float> model = init_model(cfg, tc.seed);
    Model<float> grads = Model<float>::zeros(cfg);
    Model<float> velocity = Model<float>::zeros(cfg);
    Rng rng(tc.seed ^ 0xA5A5A5A5DEADBEEFull);

    // Parallel tensor lists; traversal order is identical across instances.
    std::vector<std::vector<float>*> wp, gp, vp;
    model.for_each_param([&](const std::string&, std::vector<float>& w) { wp.push_back(&w); });
    grads.for_each_param([&](const std::string&, std::vector<float>& w) { gp.push_back(&w); });
    velocity.for_each_param([&](const std::string&, std::vector<float>& w) { vp.push_back(&w); });

    TrainResult result;
    result.best = model;

    auto lr = static_cast<float>(tc.learning_rate);
    auto mom = static_cast<float>(tc.momentum);

    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        // Fisher-Yates with the deterministic generator
        std::vector<size_t> shuffled = order;
        for (size_t i = shuffled.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(rng.uniform() * static_cast<double>(i));
            if (j >= i) j = i - 1;
            std::swap(shuffled[i - 1], shuffled[j]);
        }

        double epoch_loss = 0.0;
        size_t seen = 0;
        bool bad = false;
        for (size_t off = 0; off < shuffled.size() && !bad;
             off += static_cast<size_t>(tc.batch_size)) {
            size_t hi = std::min(shuffled.size(), off + static_cast<size_t>(tc.batch_size));
            std::span<const size_t> idx(shuffled.data() + off, hi - off);
            Tensor3<float> x = make_batch<float>(train_segments, idx);
            std::vector<uint8_t> y(idx.size());
            for (size_t i = 0; i < idx.size(); ++i) y[i] = train_segments[idx[i]].label;

            ForwardCache<float> cache;
            model.forward(x, /*train=*/true, &cache);
            grads.zero_params();
            double loss = model.backward(cache, y, grads);
            if (!std::isfinite(loss)) {
                bad = true;
                break;
            }
            model.update_running_stats(cache);

            // SGD with momentum
            for (size_t t = 0; t < wp.size(); ++t) {
                std::vector<float>& w = *wp[t];
                std::vector<float>& g = *gp[t];
                std::vector<float>& v = *vp[t];
                for (size_t i = 0; i < w.size(); ++i) {
                    v[i] = mom * v[i] - lr * g[i];
                    w[i] += v[i];
                }
            }

            epoch_loss += loss * static_cast<double>(idx.size());
            seen += idx.size();
        }
        if (bad) {
            result.diverged = true;
            break;
        }

        MetricsReport val = evaluate(model, val_segments);
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = seen ? epoch_loss / static_cast<double>(seen) : 0.0;
        stats.val_f1_sa = val.f1_sa;
        stats.val_accuracy = val.accuracy;
        result.history.push_back(stats);

        if (result.best_epoch == 0 || val.f1_sa > result.best_f1) {
            result.best = model;
            result.best_f1 = val.f1_sa;
            result.best_epoch = epoch;
        }
    }

    return result;
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const CheckpointMeta& meta) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.i32(model.cfg.in_channels);
    w.i32(model.cfg.n_blocks);
    w.i32(model.cfg.width);
    w.i32(model.cfg.cardinality);
    w.i32(model.cfg.se_reduction);
    w.i32(model.cfg.n_classes);

    auto& m = const_cast<Model<float>&>(model);  // for_each_param is non-const traversal
    uint32_t n_tensors = 0;
    m.for_each_param([&](const std::string&, std::vector<float>&) { ++n_tensors; });
    m.for_each_state([&](const std::string&, std::vector<float>&) { ++n_tensors; });
    w.u32(n_tensors);
    auto dump = [&](const std::string& name, std::vector<float>& t) {
        w.str(name);
        w.u64(t.size());
        for (float v : t) w.f32(v);
    };
    m.for_each_param(dump);
    m.for_each_state(dump);

    w.u64(meta.seed);
    w.i32(meta.best_epoch);
    w.f64(meta.best_f1);

    uint32_t crc = crc32(w.data().data() + 4, w.size() - 4);
    w.u32(crc);
    write_file_atomic(path, w.take());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file(path);
    if (bytes.size() < 16) throw std::runtime_error("checkpoint too short");
    if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
        throw std::runtime_error("not a checkpoint file (bad magic)");
    uint32_t stored = ByteReader(bytes.data() + bytes.size() - 4, 4).u32();
    if (stored != crc32(bytes.data() + 4, bytes.size() - 8))
        throw std::runtime_error("checkpoint checksum failure");

    ByteReader r(bytes.data() + 4, bytes.size() - 8);
    uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch: " + std::to_string(version));

    ModelConfig cfg;
    cfg.in_channels = r.i32();
    cfg.n_blocks = r.i32();
    cfg.width = r.i32();
    cfg.cardinality = r.i32();
    cfg.se_reduction = r.i32();
    cfg.n_classes = r.i32();

    Checkpoint ck;
    ck.model = Model<float>::make(cfg);
    uint32_t n_tensors = r.u32();
    uint32_t loaded = 0;
    auto load = [&](const std::string& name, std::vector<float>& t) {
        std::string got = r.str();
        if (got != name)
            throw std::runtime_error("checkpoint tensor order mismatch: expected " + name +
                                     ", got " + got);
        uint64_t len = r.u64();
        if (len != t.size()) throw std::runtime_error("checkpoint tensor size mismatch: " + name);
        for (float& v : t) v = r.f32();
        ++loaded;
    };
    ck.model.for_each_param(load);
    ck.model.for_each_state(load);
    if (loaded != n_tensors) throw std::runtime_error("checkpoint tensor count mismatch");

    ck.meta.seed = r.u64();
    ck.meta.best_epoch = r.i32();
    ck.meta.best_f1 = r.f64();
    if (!r.at_end()) throw std::runtime_error("checkpoint has trailing bytes");
    return ck;
}

}  // namespace apnea::nn
