#ifndef APNEA_MODEL_HPP
#define APNEA_MODEL_HPP

// Desk-scale 1D CNN with squeeze-and-excitation residual blocks and
// hand-written reverse-mode gradients. Block structure: grouped conv ->
// batch norm -> ReLU -> SE gate -> residual add. Layers are templated on
// the scalar so training runs in float while gradient checks run in
// double.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "apnea/features.hpp"
#include "apnea/metrics.hpp"

namespace apnea::nn {

struct ModelConfig {
    int in_channels = 4;  // 2 for the R-only feature set
    int n_blocks = 3;
    int width = 32;
    int cardinality = 4;   // grouped-conv groups
    int se_reduction = 8;  // bottleneck ratio of the SE gate
    int n_classes = 2;

    void validate() const {
        if (in_channels != 2 && in_channels != 4)
            throw std::invalid_argument("in_channels must be 2 or 4");
        if (n_blocks < 1) throw std::invalid_argument("n_blocks must be >= 1");
        if (width < 1 || cardinality < 1 || width % cardinality != 0)
            throw std::invalid_argument("width must be divisible by cardinality");
        if (se_reduction < 1 || se_reduction > width)
            throw std::invalid_argument("se_reduction must be in [1, width]");
        if (n_classes != 2) throw std::invalid_argument("n_classes must be 2");
    }
};

template <class T>
struct Tensor3 {
    int n = 0, c = 0, l = 0;
    std::vector<T> v;

    Tensor3() = default;
    Tensor3(int n_, int c_, int l_)
        : n(n_), c(c_), l(l_), v(static_cast<size_t>(n_) * c_ * l_, T(0)) {}

    T* row(int b, int ch) { return v.data() + (static_cast<size_t>(b) * c + ch) * l; }
    const T* row(int b, int ch) const {
        return v.data() + (static_cast<size_t>(b) * c + ch) * l;
    }
};

template <class T>
struct Mat {
    int n = 0, c = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int n_, int c_) : n(n_), c(c_), v(static_cast<size_t>(n_) * c_, T(0)) {}

    T& at(int i, int j) { return v[static_cast<size_t>(i) * c + j]; }
    T at(int i, int j) const { return v[static_cast<size_t>(i) * c + j]; }
};

// ---- layers ----

template <class T>
struct Conv1dLayer {
    int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0, groups = 1;
    std::vector<T> w;  // [out_ch][in_ch/groups][k]
    std::vector<T> b;  // [out_ch]

    void allocate() {
        w.assign(static_cast<size_t>(out_ch) * (in_ch / groups) * k, T(0));
        b.assign(static_cast<size_t>(out_ch), T(0));
    }
    int out_len(int l) const { return (l + 2 * pad - k) / stride + 1; }

    Tensor3<T> forward(const Tensor3<T>& x) const {
        const int icpg = in_ch / groups, ocpg = out_ch / groups;
        Tensor3<T> y(x.n, out_ch, out_len(x.l));
        for (int batch = 0; batch < x.n; ++batch)
            for (int oc = 0; oc < out_ch; ++oc) {
                T* yrow = y.row(batch, oc);
                for (int i = 0; i < y.l; ++i) yrow[i] = b[oc];
                int g = oc / ocpg;
                for (int ic = 0; ic < icpg; ++ic) {
                    const T* xrow = x.row(batch, g * icpg + ic);
                    const T* wrow = &w[(static_cast<size_t>(oc) * icpg + ic) * k];
                    for (int kk = 0; kk < k; ++kk) {
                        T wv = wrow[kk];
                        int lo = 0, hi = y.l;
                        while (lo < hi && lo * stride + kk - pad < 0) ++lo;
                        while (hi > lo && (hi - 1) * stride + kk - pad >= x.l) --hi;
                        const T* src = xrow + (static_cast<std::ptrdiff_t>(lo) * stride + kk - pad);
                        for (int i = lo; i < hi; ++i, src += stride) yrow[i] += wv * *src;
                    }
                }
            }
        return y;
    }

    // Accumulates weight/bias gradients into `g` and returns the input gradient.
    Tensor3<T> backward(const Tensor3<T>& x, const Tensor3<T>& gy, Conv1dLayer<T>& g) const {
        const int icpg = in_ch / groups, ocpg = out_ch / groups;
        Tensor3<T> gx(x.n, x.c, x.l);
        for (int batch = 0; batch < x.n; ++batch)
            for (int oc = 0; oc < out_ch; ++oc) {
                const T* gyrow = gy.row(batch, oc);
                for (int i = 0; i < gy.l; ++i) g.b[oc] += gyrow[i];
                int grp = oc / ocpg;
                for (int ic = 0; ic < icpg; ++ic) {
                    const T* xrow = x.row(batch, grp * icpg + ic);
                    T* gxrow = gx.row(batch, grp * icpg + ic);
                    T* gwrow = &g.w[(static_cast<size_t>(oc) * icpg + ic) * k];
                    const T* wrow = &w[(static_cast<size_t>(oc) * icpg + ic) * k];
                    for (int kk = 0; kk < k; ++kk) {
                        int lo = 0, hi = gy.l;
                        while (lo < hi && lo * stride + kk - pad < 0) ++lo;
                        while (hi > lo && (hi - 1) * stride + kk - pad >= x.l) --hi;
                        T wv = wrow[kk];
                        T acc = T(0);
                        const T* src = xrow + (static_cast<std::ptrdiff_t>(lo) * stride + kk - pad);
                        T* dst = gxrow + (static_cast<std::ptrdiff_t>(lo) * stride + kk - pad);
                        for (int i = lo; i < hi; ++i, src += stride, dst += stride) {
                            acc += *src * gyrow[i];
                            *dst += wv * gyrow[i];
                        }
                        gwrow[kk] += acc;
                    }
                }
            }
        return gx;
    }
};

template <class T>
struct BatchNormLayer {
    int ch = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    std::vector<T> gamma, beta;        // trainable
    std::vector<T> run_mean, run_var;  // inference state

    void allocate() {
        gamma.assign(ch, T(1));
        beta.assign(ch, T(0));
        run_mean.assign(ch, T(0));
        run_var.assign(ch, T(1));
    }

    struct Cache {
        std::vector<T> mean, var, invstd;
        Tensor3<T> xhat;
    };

    // Training mode uses batch statistics over (n, l) per channel; the
    // running averages are only touched by update_running().
    Tensor3<T> forward_train(const Tensor3<T>& x, Cache& cache) const {
        cache.mean.assign(ch, T(0));
        cache.var.assign(ch, T(0));
        cache.invstd.assign(ch, T(0));
        cache.xhat = Tensor3<T>(x.n, x.c, x.l);
        Tensor3<T> y(x.n, x.c, x.l);
        const T m = static_cast<T>(static_cast<double>(x.n) * x.l);
        for (int c = 0; c < ch; ++c) {
            T mean = T(0);
            for (int batch = 0; batch < x.n; ++batch) {
                const T* row = x.row(batch, c);
                for (int i = 0; i < x.l; ++i) mean += row[i];
            }
            mean /= m;
            T var = T(0);
            for (int batch = 0; batch < x.n; ++batch) {
                const T* row = x.row(batch, c);
                for (int i = 0; i < x.l; ++i) var += (row[i] - mean) * (row[i] - mean);
            }
            var /= m;
            T invstd = T(1) / std::sqrt(var + eps);
            cache.mean[c] = mean;
            cache.var[c] = var;
            cache.invstd[c] = invstd;
            for (int batch = 0; batch < x.n; ++batch) {
                const T* row = x.row(batch, c);
                T* xh = cache.xhat.row(batch, c);
                T* yr = y.row(batch, c);
                for (int i = 0; i < x.l; ++i) {
                    xh[i] = (row[i] - mean) * invstd;
                    yr[i] = gamma[c] * xh[i] + beta[c];
                }
            }
        }
        return y;
    }

    Tensor3<T> forward_eval(const Tensor3<T>& x) const {
        Tensor3<T> y(x.n, x.c, x.l);
        for (int c = 0; c < ch; ++c) {
            T invstd = T(1) / std::sqrt(run_var[c] + eps);
            for (int batch = 0; batch < x.n; ++batch) {
                const T* row = x.row(batch, c);
                T* yr = y.row(batch, c);
                for (int i = 0; i < x.l; ++i)
                    yr[i] = gamma[c] * (row[i] - run_mean[c]) * invstd + beta[c];
            }
        }
        return y;
    }

    void update_running(const Cache& cache) {
        for (int c = 0; c < ch; ++c) {
            run_mean[c] = (T(1) - momentum) * run_mean[c] + momentum * cache.mean[c];
            run_var[c] = (T(1) - momentum) * run_var[c] + momentum * cache.var[c];
        }
    }

    Tensor3<T> backward(const Tensor3<T>& gy, const Cache& cache, BatchNormLayer<T>& g) const {
        Tensor3<T> gx(gy.n, gy.c, gy.l);
        const T m = static_cast<T>(static_cast<double>(gy.n) * gy.l);
        for (int c = 0; c < ch; ++c) {
            T sum_gy = T(0), sum_gy_xhat = T(0);
            for (int batch = 0; batch < gy.n; ++batch) {
                const T* gr = gy.row(batch, c);
                const T* xh = cache.xhat.row(batch, c);
                for (int i = 0; i < gy.l; ++i) {
                    sum_gy += gr[i];
                    sum_gy_xhat += gr[i] * xh[i];
                }
            }
            g.beta[c] += sum_gy;
            g.gamma[c] += sum_gy_xhat;
            T k1 = gamma[c] * cache.invstd[c];
            for (int batch = 0; batch < gy.n; ++batch) {
                const T* gr = gy.row(batch, c);
                const T* xh = cache.xhat.row(batch, c);
                T* gxr = gx.row(batch, c);
                for (int i = 0; i < gy.l; ++i)
                    gxr[i] = k1 * (gr[i] - sum_gy / m - xh[i] * sum_gy_xhat / m);
            }
        }
        return gx;
    }
};

template <class T>
struct LinearLayer {
    int in = 0, out = 0;
    std::vector<T> w;  // [out][in]
    std::vector<T> b;  // [out]

    void allocate() {
        w.assign(static_cast<size_t>(out) * in, T(0));
        b.assign(out, T(0));
    }

    Mat<T> forward(const Mat<T>& x) const {
        Mat<T> y(x.n, out);
        for (int i = 0; i < x.n; ++i)
            for (int o = 0; o < out; ++o) {
                T acc = b[o];
                const T* wr = &w[static_cast<size_t>(o) * in];
                for (int j = 0; j < in; ++j) acc += wr[j] * x.at(i, j);
                y.at(i, o) = acc;
            }
        return y;
    }

    Mat<T> backward(const Mat<T>& x, const Mat<T>& gy, LinearLayer<T>& g) const {
        Mat<T> gx(x.n, in);
        for (int i = 0; i < x.n; ++i)
            for (int o = 0; o < out; ++o) {
                T gv = gy.at(i, o);
                g.b[o] += gv;
                T* gwr = &g.w[static_cast<size_t>(o) * in];
                const T* wr = &w[static_cast<size_t>(o) * in];
                for (int j = 0; j < in; ++j) {
                    gwr[j] += gv * x.at(i, j);
                    gx.at(i, j) += gv * wr[j];
                }
            }
        return gx;
    }
};

// ---- model ----

template <class T>
struct BlockCache {
    Tensor3<T> x;                             // block input
    Tensor3<T> conv_out;
    typename BatchNormLayer<T>::Cache bn;
    Tensor3<T> act;                           // relu(bn out)
    Mat<T> pooled, z_pre, z, g_pre, gate;     // SE internals
    bool se_bypassed = false;
};

template <class T>
struct ForwardCache {
    Tensor3<T> input;
    Tensor3<T> stem_conv;
    typename BatchNormLayer<T>::Cache stem_bn;
    Tensor3<T> stem_act;
    std::vector<BlockCache<T>> blocks;
    Mat<T> gap;
    Mat<T> logits;
    Mat<T> probs;
    bool train_mode = false;
};

template <class T>
struct Model {
    ModelConfig cfg;
    Conv1dLayer<T> stem;
    BatchNormLayer<T> stem_bn;
    struct Block {
        Conv1dLayer<T> conv;
        BatchNormLayer<T> bn;
        LinearLayer<T> se_reduce, se_expand;
    };
    std::vector<Block> blocks;
    LinearLayer<T> head;

    static Model make(const ModelConfig& cfg) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        m.stem = Conv1dLayer<T>{cfg.in_channels, cfg.width, 7, 2, 3, 1, {}, {}};
        m.stem.allocate();
        m.stem_bn.ch = cfg.width;
        m.stem_bn.allocate();
        m.blocks.resize(cfg.n_blocks);
        int se_mid = std::max(1, cfg.width / cfg.se_reduction);
        for (auto& blk : m.blocks) {
            blk.conv = Conv1dLayer<T>{cfg.width, cfg.width, 3, 1, 1, cfg.cardinality, {}, {}};
            blk.conv.allocate();
            blk.bn.ch = cfg.width;
            blk.bn.allocate();
            blk.se_reduce = LinearLayer<T>{cfg.width, se_mid, {}, {}};
            blk.se_reduce.allocate();
            blk.se_expand = LinearLayer<T>{se_mid, cfg.width, {}, {}};
            blk.se_expand.allocate();
        }
        m.head = LinearLayer<T>{cfg.width, cfg.n_classes, {}, {}};
        m.head.allocate();
        return m;
    }

    // All-zero parameter bundle of the same shapes; use for gradient and
    // momentum accumulators (make() seeds BN gamma at 1).
    static Model zeros(const ModelConfig& cfg) {
        Model m = make(cfg);
        m.zero_params();
        return m;
    }

    template <class F>
    void for_each_param(F&& f) {
        f("stem.conv.w", stem.w);
        f("stem.conv.b", stem.b);
        f("stem.bn.gamma", stem_bn.gamma);
        f("stem.bn.beta", stem_bn.beta);
        for (size_t i = 0; i < blocks.size(); ++i) {
            std::string p = "block" + std::to_string(i) + ".";
            f(p + "conv.w", blocks[i].conv.w);
            f(p + "conv.b", blocks[i].conv.b);
            f(p + "bn.gamma", blocks[i].bn.gamma);
            f(p + "bn.beta", blocks[i].bn.beta);
            f(p + "se.reduce.w", blocks[i].se_reduce.w);
            f(p + "se.reduce.b", blocks[i].se_reduce.b);
            f(p + "se.expand.w", blocks[i].se_expand.w);
            f(p + "se.expand.b", blocks[i].se_expand.b);
        }
        f("head.w", head.w);
        f("head.b", head.b);
    }

    template <class F>
    void for_each_state(F&& f) {
        f("stem.bn.run_mean", stem_bn.run_mean);
        f("stem.bn.run_var", stem_bn.run_var);
        for (size_t i = 0; i < blocks.size(); ++i) {
            std::string p = "block" + std::to_string(i) + ".";
            f(p + "bn.run_mean", blocks[i].bn.run_mean);
            f(p + "bn.run_var", blocks[i].bn.run_var);
        }
    }

    size_t param_count() {
        size_t n = 0;
        for_each_param([&](const std::string&, std::vector<T>& w) { n += w.size(); });
        return n;
    }

    void zero_params() {
        for_each_param([](const std::string&, std::vector<T>& w) {
            std::fill(w.begin(), w.end(), T(0));
        });
    }

    Mat<T> forward(const Tensor3<T>& x, bool train, ForwardCache<T>* cache,
                   bool bypass_se = false) const {
        if (x.c != cfg.in_channels) throw std::invalid_argument("input channel mismatch");
        ForwardCache<T> local;
        ForwardCache<T>& cc = cache ? *cache : local;
        cc.train_mode = train;
        cc.input = x;

        cc.stem_conv = stem.forward(x);
        Tensor3<T> h = train ? stem_bn.forward_train(cc.stem_conv, cc.stem_bn)
                             : stem_bn.forward_eval(cc.stem_conv);
        relu_inplace(h);
        cc.stem_act = h;

        cc.blocks.assign(blocks.size(), {});
        for (size_t bi = 0; bi < blocks.size(); ++bi) {
            const Block& blk = blocks[bi];
            BlockCache<T>& bc = cc.blocks[bi];
            bc.x = h;
            bc.conv_out = blk.conv.forward(h);
            Tensor3<T> a = train ? blk.bn.forward_train(bc.conv_out, bc.bn)
                                 : blk.bn.forward_eval(bc.conv_out);
            relu_inplace(a);
            bc.act = a;
            bc.se_bypassed = bypass_se;

            Tensor3<T> scaled;
            if (bypass_se) {
                scaled = a;  // gate forced to all-ones
            } else {
                bc.pooled = global_avg_pool(a);
                bc.z_pre = blk.se_reduce.forward(bc.pooled);
                bc.z = bc.z_pre;
                relu_inplace(bc.z);
                bc.g_pre = blk.se_expand.forward(bc.z);
                bc.gate = bc.g_pre;
                sigmoid_inplace(bc.gate);
                scaled = Tensor3<T>(a.n, a.c, a.l);
                for (int batch = 0; batch < a.n; ++batch)
                    for (int c = 0; c < a.c; ++c) {
                        T gv = bc.gate.at(batch, c);
                        const T* ar = a.row(batch, c);
                        T* sr = scaled.row(batch, c);
                        for (int i = 0; i < a.l; ++i) sr[i] = gv * ar[i];
                    }
            }
            // residual add
            for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += scaled.v[i];
        }

        cc.gap = global_avg_pool(h);
        cc.logits = head.forward(cc.gap);
        cc.probs = softmax_rows(cc.logits);
        return cc.probs;
    }

    // Mean cross-entropy over the batch; parameter gradients accumulate
    // into `grads` (same shapes, typically zeroed by the caller).
    double backward(const ForwardCache<T>& cc, std::span<const uint8_t> labels,
                    Model<T>& grads) const {
        const int n = cc.input.n;
        if (static_cast<int>(labels.size()) != n)
            throw std::invalid_argument("label count != batch size");
        if (!cc.train_mode)
            throw std::logic_error("backward requires a train-mode forward cache");

        double loss = 0.0;
        Mat<T> glogits(n, cfg.n_classes);
        for (int i = 0; i < n; ++i) {
            int y = labels[i] ? 1 : 0;
            double p = static_cast<double>(cc.probs.at(i, y));
            loss -= std::log(std::max(p, 1e-300));
            for (int k = 0; k < cfg.n_classes; ++k)
                glogits.at(i, k) =
                    (cc.probs.at(i, k) - (k == y ? T(1) : T(0))) / static_cast<T>(n);
        }
        loss /= n;

        Mat<T> ggap = head.backward(cc.gap, glogits, grads.head);
        // every block preserves the stem output length
        Tensor3<T> gh = global_avg_pool_backward(ggap, cc.stem_act.l);

        for (size_t bi = blocks.size(); bi-- > 0;) {
            const Block& blk = blocks[bi];
            const BlockCache<T>& bc = cc.blocks[bi];
            Tensor3<T> ga(bc.act.n, bc.act.c, bc.act.l);

            if (bc.se_bypassed) {
                ga = gh;
            } else {
                // y = act * gate: direct path plus the gate path
                Mat<T> ggate(bc.gate.n, bc.gate.c);
                for (int batch = 0; batch < bc.act.n; ++batch)
                    for (int c = 0; c < bc.act.c; ++c) {
                        T gv = bc.gate.at(batch, c);
                        const T* ar = bc.act.row(batch, c);
                        const T* ghr = gh.row(batch, c);
                        T* gar = ga.row(batch, c);
                        T acc = T(0);
                        for (int i = 0; i < bc.act.l; ++i) {
                            gar[i] = ghr[i] * gv;
                            acc += ghr[i] * ar[i];
                        }
                        ggate.at(batch, c) = acc;
                    }
                // through sigmoid
                Mat<T> gg_pre(bc.gate.n, bc.gate.c);
                for (size_t i = 0; i < gg_pre.v.size(); ++i)
                    gg_pre.v[i] = ggate.v[i] * bc.gate.v[i] * (T(1) - bc.gate.v[i]);
                Mat<T> gz = blk.se_expand.backward(bc.z, gg_pre, grads.blocks[bi].se_expand);
                for (size_t i = 0; i < gz.v.size(); ++i)
                    if (bc.z.v[i] <= T(0)) gz.v[i] = T(0);
                Mat<T> gpooled =
                    blk.se_reduce.backward(bc.pooled, gz, grads.blocks[bi].se_reduce);
                // spread the pooled gradient back over the length axis
                T inv_l = T(1) / static_cast<T>(bc.act.l);
                for (int batch = 0; batch < bc.act.n; ++batch)
                    for (int c = 0; c < bc.act.c; ++c) {
                        T add = gpooled.at(batch, c) * inv_l;
                        T* gar = ga.row(batch, c);
                        for (int i = 0; i < bc.act.l; ++i) gar[i] += add;
                    }
            }

            // relu mask (act > 0), then bn, then conv; residual adds gh
            for (size_t i = 0; i < ga.v.size(); ++i)
                if (bc.act.v[i] <= T(0)) ga.v[i] = T(0);
            Tensor3<T> gconv = blk.bn.backward(ga, bc.bn, grads.blocks[bi].bn);
            Tensor3<T> gx = blk.conv.backward(bc.x, gconv, grads.blocks[bi].conv);
            for (size_t i = 0; i < gh.v.size(); ++i) gh.v[i] += gx.v[i];
        }

        for (size_t i = 0; i < gh.v.size(); ++i)
            if (cc.stem_act.v[i] <= T(0)) gh.v[i] = T(0);
        Tensor3<T> gsc = stem_bn.backward(gh, cc.stem_bn, grads.stem_bn);
        stem.backward(cc.input, gsc, grads.stem);
        return loss;
    }

    void update_running_stats(const ForwardCache<T>& cc) {
        stem_bn.update_running(cc.stem_bn);
        for (size_t i = 0; i < blocks.size(); ++i) blocks[i].bn.update_running(cc.blocks[i].bn);
    }

private:
    static void relu_inplace(Tensor3<T>& t) {
        for (T& v : t.v) v = v > T(0) ? v : T(0);
    }
    static void relu_inplace(Mat<T>& m) {
        for (T& v : m.v) v = v > T(0) ? v : T(0);
    }
    static void sigmoid_inplace(Mat<T>& m) {
        for (T& v : m.v) v = T(1) / (T(1) + std::exp(-v));
    }
    static Mat<T> global_avg_pool(const Tensor3<T>& x) {
        Mat<T> y(x.n, x.c);
        for (int batch = 0; batch < x.n; ++batch)
            for (int c = 0; c < x.c; ++c) {
                const T* row = x.row(batch, c);
                T acc = T(0);
                for (int i = 0; i < x.l; ++i) acc += row[i];
                y.at(batch, c) = acc / static_cast<T>(x.l);
            }
        return y;
    }
    static Tensor3<T> global_avg_pool_backward(const Mat<T>& gy, int l) {
        Tensor3<T> gx(gy.n, gy.c, l);
        for (int batch = 0; batch < gy.n; ++batch)
            for (int c = 0; c < gy.c; ++c) {
                T v = gy.at(batch, c) / static_cast<T>(l);
                T* row = gx.row(batch, c);
                for (int i = 0; i < l; ++i) row[i] = v;
            }
        return gx;
    }
    static Mat<T> softmax_rows(const Mat<T>& z) {
        Mat<T> p(z.n, z.c);
        for (int i = 0; i < z.n; ++i) {
            T mx = z.at(i, 0);
            for (int j = 1; j < z.c; ++j) mx = std::max(mx, z.at(i, j));
            T sum = T(0);
            for (int j = 0; j < z.c; ++j) {
                T e = std::exp(z.at(i, j) - mx);
                p.at(i, j) = e;
                sum += e;
            }
            for (int j = 0; j < z.c; ++j) p.at(i, j) /= sum;
        }
        return p;
    }
};

// Batch tensor from feature segments (channel-major, float -> T).
template <class T>
Tensor3<T> make_batch(std::span<const FeatureSegment> segments, std::span<const size_t> idx) {
    if (idx.empty()) throw std::invalid_argument("empty batch");
    int n_ch = segments[idx[0]].n_channels;
    Tensor3<T> x(static_cast<int>(idx.size()), n_ch, kFeaturePoints);
    for (size_t b = 0; b < idx.size(); ++b) {
        const FeatureSegment& s = segments[idx[b]];
        if (s.n_channels != n_ch) throw std::invalid_argument("segments mix channel layouts");
        for (int ch = 0; ch < n_ch; ++ch) {
            T* row = x.row(static_cast<int>(b), ch);
            for (int i = 0; i < kFeaturePoints; ++i) row[i] = static_cast<T>(s.at(ch, i));
        }
    }
    return x;
}

// ---- training (float instantiation) ----

struct TrainConfig {
    int batch_size = 256;
    int epochs = 100;
    double learning_rate = 0.01;
    double momentum = 0.9;
    uint64_t seed = 1;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_f1_sa = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Model<float> best;
    int best_epoch = 0;  // 1-based; 0 when no epoch completed
    double best_f1 = 0.0;
    std::vector<EpochStats> history;
    bool diverged = false;
};

// He-style seeded initialization; deterministic across runs.
Model<float> init_model(const ModelConfig& cfg, uint64_t seed);

// Index of the best epoch under the strict-argmax rule (first maximum wins).
size_t best_epoch_index(std::span<const double> f1_per_epoch);

// Trains with SGD + momentum, evaluates SA-class F1 on the validation
// set after every epoch and returns the checkpoint of the best epoch.
// A non-finite loss aborts training and returns the best model so far.
TrainResult train(const ModelConfig& cfg, const TrainConfig& tc,
                  std::span<const FeatureSegment> train_segments,
                  std::span<const FeatureSegment> val_segments);

std::vector<double> predict_proba(const Model<float>& model,
                                  std::span<const FeatureSegment> segments,
                                  int batch_size = 256);
std::vector<uint8_t> predict(const Model<float>& model,
                             std::span<const FeatureSegment> segments, double threshold = 0.5,
                             int batch_size = 256);

MetricsReport evaluate(const Model<float>& model, std::span<const FeatureSegment> segments,
                       double threshold = 0.5);

// ---- checkpoints ----

struct CheckpointMeta {
    uint64_t seed = 0;
    int best_epoch = 0;
    double best_f1 = 0.0;
};

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const CheckpointMeta& meta);

struct Checkpoint {
    Model<float> model;
    CheckpointMeta meta;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace apnea::nn

#endif
