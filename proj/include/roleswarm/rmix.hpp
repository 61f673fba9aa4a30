#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roleswarm/features.hpp"
#include "roleswarm/rng.hpp"
#include "roleswarm/roles.hpp"

namespace rsw {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Plain fully-connected net: ReLU hidden layers, linear output. Parameters
// are stored flat (per layer: row-major W, then b) so SGD, soft updates and
// finite-difference checks can treat every net uniformly.
struct Mlp {
    std::vector<int> dims;
    std::vector<double> params;

    static int param_count(const std::vector<int>& dims) {
        int n = 0;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l)
            n += dims[l + 1] * dims[l] + dims[l + 1];
        return n;
    }

    static Mlp zeros(std::vector<int> dims) {
        Mlp m;
        m.params.assign(param_count(dims), 0.0);
        m.dims = std::move(dims);
        return m;
    }

    // Uniform Xavier-style init.
    static Mlp random(std::vector<int> dims, Rng& rng) {
        Mlp m = zeros(std::move(dims));
        int off = 0;
        for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
            int in = m.dims[l], out = m.dims[l + 1];
            double bound = std::sqrt(6.0 / (in + out));
            for (int k = 0; k < out * in; ++k) m.params[off + k] = rng.uniform(-bound, bound);
            off += out * in + out; // biases stay zero
        }
        return m;
    }

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }

    struct Cache {
        std::vector<std::vector<double>> act; // act[0] = input, act[l+1] = layer l output
        std::vector<std::vector<double>> pre; // pre-activation per layer
    };

    std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const {
        if (static_cast<int>(x.size()) != input_dim())
            throw std::invalid_argument("Mlp::forward: input dim mismatch (got " +
                                        std::to_string(x.size()) + ", want " +
                                        std::to_string(input_dim()) + ")");
        std::vector<double> cur(x.begin(), x.end());
        if (cache) {
            cache->act.assign(1, cur);
            cache->pre.clear();
        }
        int off = 0;
        const std::size_t layers = dims.size() - 1;
        for (std::size_t l = 0; l < layers; ++l) {
            int in = dims[l], out = dims[l + 1];
            std::vector<double> z(out);
            for (int r = 0; r < out; ++r) {
                const double* w = params.data() + off + r * in;
                double acc = params[off + out * in + r];
                for (int c = 0; c < in; ++c) acc += w[c] * cur[c];
                z[r] = acc;
            }
            off += out * in + out;
            if (cache) cache->pre.push_back(z);
            if (l + 1 < layers)
                for (double& v : z) v = v > 0.0 ? v : 0.0;
            cur = std::move(z);
            if (cache) cache->act.push_back(cur);
        }
        return cur;
    }

    // Accumulates parameter gradients into grad (same size as params) and
    // optionally the gradient w.r.t. the input.
    void backward(const Cache& cache, std::span<const double> grad_out,
                  std::vector<double>& grad, std::vector<double>* grad_input = nullptr) const {
        const std::size_t layers = dims.size() - 1;
        std::vector<int> offsets(layers);
        int off = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            offsets[l] = off;
            off += dims[l + 1] * dims[l] + dims[l + 1];
        }
        std::vector<double> dz(grad_out.begin(), grad_out.end()); // output layer is linear
        for (std::size_t li = layers; li-- > 0;) {
            int in = dims[li], out = dims[li + 1];
            const auto& input = cache.act[li];
            int base = offsets[li];
            for (int r = 0; r < out; ++r) {
                double g = dz[r];
                double* gw = grad.data() + base + r * in;
                for (int c = 0; c < in; ++c) gw[c] += g * input[c];
                grad[base + out * in + r] += g;
            }
            if (li == 0 && grad_input == nullptr) break;
            std::vector<double> dprev(in, 0.0);
            for (int r = 0; r < out; ++r) {
                double g = dz[r];
                const double* w = params.data() + base + r * in;
                for (int c = 0; c < in; ++c) dprev[c] += g * w[c];
            }
            if (li == 0) {
                *grad_input = std::move(dprev);
                break;
            }
            const auto& pre_prev = cache.pre[li - 1];
            for (int c = 0; c < in; ++c)
                if (pre_prev[c] <= 0.0) dprev[c] = 0.0;
            dz = std::move(dprev);
        }
    }
};

// ---------------------------------------------------------------------------
// Role-value network: observation features -> one value per role.

inline std::vector<double> role_values(const Mlp& qnet, std::span<const double> obs_feats,
                                       Mlp::Cache* cache = nullptr) {
    if (qnet.output_dim() != 3)
        throw std::invalid_argument("role net must output exactly 3 values");
    return qnet.forward(obs_feats, cache);
}

// Epsilon-greedy over the three roles; greedy ties break to the lowest index.
inline Role select_role(std::span<const double> q, double epsilon, Rng& rng) {
    if (q.size() != 3) throw std::invalid_argument("select_role expects 3 values");
    if (epsilon > 0.0 && rng.uniform() < epsilon)
        return static_cast<Role>(rng.uniform_int(0, 2));
    int best = 0;
    for (int k = 1; k < 3; ++k)
        if (q[k] > q[best]) best = k;
    return static_cast<Role>(best);
}

// ---------------------------------------------------------------------------
// Monotonic mixing network. A hypernetwork conditioned on the global-state
// features emits the mixing weights; absolute-value transforms keep W1 and W2
// nonnegative for every input, which is what guarantees dQ_tot/dQ_i >= 0.

enum class MixAct : int { Relu = 0, Identity = 1 };
enum class MixerKind : int { Rmix = 0, Vdn = 1 };

struct Mixer {
    int n_agents = 0;
    int hidden = 0;    // E
    int input_dim = 0; // state features + appended intents
    MixAct out_act = MixAct::Relu;
    Mlp w1_gen; // input_dim -> hidden * n_agents (linear)
    Mlp b1_gen; // input_dim -> hidden (linear)
    Mlp w2_gen; // input_dim -> hidden (linear)
    Mlp b2_gen; // input_dim -> hidden -> 1 (two-layer)

    static Mixer make(int n_agents, int hidden, int input_dim, MixAct act, Rng& rng) {
        Mixer m;
        m.n_agents = n_agents;
        m.hidden = hidden;
        m.input_dim = input_dim;
        m.out_act = act;
        m.w1_gen = Mlp::random({input_dim, hidden * n_agents}, rng);
        m.b1_gen = Mlp::random({input_dim, hidden}, rng);
        m.w2_gen = Mlp::random({input_dim, hidden}, rng);
        m.b2_gen = Mlp::random({input_dim, hidden, 1}, rng);
        return m;
    }
};

struct MixerCache {
    Mlp::Cache w1c, b1c, w2c, b2c;
    std::vector<double> w1_raw, w2_raw; // hypernet outputs before abs
    std::vector<double> b1, h_pre, h;
    std::vector<double> q;
    double b2 = 0.0;
    double z = 0.0; // pre-activation of the output
};

// Q_tot = act( W2^T relu(W1 q + b1) + b2 ), W1/W2 nonnegative by construction.
inline double mix(const Mixer& m, std::span<const double> q,
                  std::span<const double> state_feats, MixerCache* cache = nullptr) {
    if (static_cast<int>(q.size()) != m.n_agents)
        throw std::invalid_argument("mix: q length " + std::to_string(q.size()) +
                                    " does not match mixer width " +
                                    std::to_string(m.n_agents));
    MixerCache local;
    MixerCache& c = cache ? *cache : local;
    c.w1_raw = m.w1_gen.forward(state_feats, cache ? &c.w1c : nullptr);
    c.b1 = m.b1_gen.forward(state_feats, cache ? &c.b1c : nullptr);
    c.w2_raw = m.w2_gen.forward(state_feats, cache ? &c.w2c : nullptr);
    c.b2 = m.b2_gen.forward(state_feats, cache ? &c.b2c : nullptr)[0];
    c.q.assign(q.begin(), q.end());

    const int E = m.hidden, N = m.n_agents;
    c.h_pre.assign(E, 0.0);
    for (int e = 0; e < E; ++e) {
        double acc = c.b1[e];
        for (int i = 0; i < N; ++i) acc += std::abs(c.w1_raw[e * N + i]) * q[i];
        c.h_pre[e] = acc;
    }
    c.h = c.h_pre;
    for (double& v : c.h) v = v > 0.0 ? v : 0.0;
    double z = c.b2;
    for (int e = 0; e < E; ++e) z += std::abs(c.w2_raw[e]) * c.h[e];
    c.z = z;
    if (m.out_act == MixAct::Relu) return z > 0.0 ? z : 0.0;
    return z;
}

struct MixerGrads {
    std::vector<double> w1_gen, b1_gen, w2_gen, b2_gen;

    static MixerGrads zeros(const Mixer& m) {
        return {std::vector<double>(m.w1_gen.params.size(), 0.0),
                std::vector<double>(m.b1_gen.params.size(), 0.0),
                std::vector<double>(m.w2_gen.params.size(), 0.0),
                std::vector<double>(m.b2_gen.params.size(), 0.0)};
    }
};

namespace detail {
inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}

// Backpropagates d(loss)/d(Q_tot) through the mixer, accumulating hypernet
// gradients and the gradient w.r.t. the per-agent values.
inline void mix_backward(const Mixer& m, const MixerCache& c, double d_qtot,
                         MixerGrads& grads, std::span<double> dq) {
    const int E = m.hidden, N = m.n_agents;
    double dz = d_qtot;
    if (m.out_act == MixAct::Relu && c.z <= 0.0) dz = 0.0;

    std::vector<double> one{dz};
    m.b2_gen.backward(c.b2c, one, grads.b2_gen);

    std::vector<double> dw2_raw(E);
    std::vector<double> dh(E);
    for (int e = 0; e < E; ++e) {
        double w2 = std::abs(c.w2_raw[e]);
        dw2_raw[e] = dz * c.h[e] * detail::sign(c.w2_raw[e]);
        dh[e] = dz * w2;
    }
    m.w2_gen.backward(c.w2c, dw2_raw, grads.w2_gen);

    std::vector<double> dh_pre(E);
    for (int e = 0; e < E; ++e) dh_pre[e] = c.h_pre[e] > 0.0 ? dh[e] : 0.0;
    m.b1_gen.backward(c.b1c, dh_pre, grads.b1_gen);

    std::vector<double> dw1_raw(E * N);
    for (int e = 0; e < E; ++e)
        for (int i = 0; i < N; ++i) {
            dw1_raw[e * N + i] = dh_pre[e] * c.q[i] * detail::sign(c.w1_raw[e * N + i]);
            dq[i] += dh_pre[e] * std::abs(c.w1_raw[e * N + i]);
        }
    m.w1_gen.backward(c.w1c, dw1_raw, grads.w1_gen);
}

// Weighted-sum baseline mixer.
inline double vdn_mix(std::span<const double> q, std::span<const double> weights) {
    if (q.size() != weights.size())
        throw std::invalid_argument("vdn_mix: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += weights[i] * q[i];
    return acc;
}

// ---------------------------------------------------------------------------
// Replay storage

struct Transition {
    std::vector<double> state_feats;
    std::vector<double> next_state_feats;
    std::vector<std::vector<double>> obs_feats; // per agent, at decision time
    std::vector<int> roles;                     // chosen role per agent
    std::vector<int> intents;                   // stage-1 goals per agent
    double reward = 0.0;                        // window-summed
    bool terminal = false;

    enum class Origin : int { OfflineOracle = 0, Online = 1 };
    Origin origin = Origin::Online;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t) {
        if (data_.size() == capacity_) data_.pop_front();
        data_.push_back(std::move(t));
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return data_[i]; }

    // Uniform without replacement within a batch (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        if (batch > data_.size())
            throw std::invalid_argument("sample: batch larger than buffer");
        std::vector<std::size_t> idx(data_.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < batch; ++i) {
            std::size_t j = i + static_cast<std::size_t>(
                                    rng.next_u64() % (idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(batch);
        return idx;
    }

private:
    std::size_t capacity_;
    std::deque<Transition> data_;
};

// ---------------------------------------------------------------------------
// Training configuration and parameter bundle

struct TrainConfig {
    double gamma = 0.95;
    double alpha = 1e-5;
    int batch = 256;
    double tau = 0.01;
    int mixing_hidden = 128; // E
    int n_pre = 50;
    int n_epoch = 200;
    std::vector<int> qnet_hidden = {64, 64};
    int buffer_capacity = 10000;
    double eps_start = 0.5;
    double eps_end = 0.05; // linear anneal over the first half of online frames
    MixAct mixer_activation = MixAct::Relu;
    MixerKind mixer_kind = MixerKind::Rmix;
    int max_agents = 11;
    double divergence_threshold = 1e12;
    // Unit scale applied to window returns inside the TD pipeline. Raw window
    // sums run in the thousands; rescaling keeps value magnitudes compatible
    // with the fixed learning rate. Stored transitions keep raw rewards.
    double reward_scale = 1e-3;

    void validate() const {
        if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0,1]");
        if (alpha <= 0.0) throw ConfigError("alpha must be positive");
        if (tau <= 0.0 || tau > 1.0) throw ConfigError("tau must be in (0,1]");
        if (batch <= 0 || mixing_hidden <= 0) throw ConfigError("batch and E must be positive");
        if (buffer_capacity < batch) throw ConfigError("buffer capacity below batch size");
    }
};

struct RmixParams {
    Mlp qnet;   // shared across agents
    Mixer mixer;

    static RmixParams make(const FeatureSpec& spec, const TrainConfig& cfg, Rng& rng) {
        std::vector<int> dims{spec.obs_dim()};
        for (int h : cfg.qnet_hidden) dims.push_back(h);
        dims.push_back(3);
        RmixParams p;
        p.qnet = Mlp::random(dims, rng);
        p.mixer = Mixer::make(spec.n_agents, cfg.mixing_hidden, spec.mixer_input_dim(),
                              cfg.mixer_activation, rng);
        return p;
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(qnet.params);
        fn(mixer.w1_gen.params);
        fn(mixer.b1_gen.params);
        fn(mixer.w2_gen.params);
        fn(mixer.b2_gen.params);
    }
};

struct RmixGrads {
    std::vector<double> qnet;
    MixerGrads mixer;

    static RmixGrads zeros(const RmixParams& p) {
        return {std::vector<double>(p.qnet.params.size(), 0.0), MixerGrads::zeros(p.mixer)};
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(qnet);
        fn(mixer.w1_gen);
        fn(mixer.b1_gen);
        fn(mixer.w2_gen);
        fn(mixer.b2_gen);
    }
};

// ---------------------------------------------------------------------------
// TD pieces

inline std::vector<double> default_vdn_weights(int n) { return std::vector<double>(n, 1.0); }

// Greedy joint value at the next state: each agent argmaxes its own target-net
// role values, then the target mixer aggregates. Per-agent greedy equals the
// exhaustive joint max because the mixer is monotone in every coordinate.
inline double greedy_next_value(const Transition& t, const RmixParams& target,
                                MixerKind kind, const FeatureSpec& spec,
                                std::span<const double> vdn_weights) {
    std::vector<double> q(spec.n_agents);
    for (int i = 0; i < spec.n_agents; ++i) {
        auto feats = obs_features_from_state(t.next_state_feats, i, spec);
        auto vals = target.qnet.forward(feats);
        q[i] = *std::max_element(vals.begin(), vals.end());
    }
    if (kind == MixerKind::Vdn) return vdn_mix(q, vdn_weights);
    auto mixer_in = mixer_input(t.next_state_feats, t.intents, spec);
    return mix(target.mixer, q, mixer_in);
}

// y = R + gamma * Q̄_tot(s', greedy k'), or exactly R on terminal windows.
// reward_scale converts the stored raw window return into training units.
inline double td_target(const Transition& t, const RmixParams& target, double gamma,
                        MixerKind kind, const FeatureSpec& spec,
                        std::span<const double> vdn_weights, double reward_scale = 1.0) {
    double r = t.reward * reward_scale;
    if (t.terminal) return r;
    return r + gamma * greedy_next_value(t, target, kind, spec, vdn_weights);
}

struct BatchEval {
    double loss = 0.0;
    RmixGrads grads;
};

// Sum of squared TD errors over the batch plus the full analytic gradient.
inline BatchEval td_loss_and_grads(std::span<const Transition* const> batch,
                                   const RmixParams& params, const RmixParams& target,
                                   const TrainConfig& cfg, const FeatureSpec& spec) {
    if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
    auto vdn_w = default_vdn_weights(spec.n_agents);
    BatchEval out;
    out.grads = RmixGrads::zeros(params);

    std::vector<Mlp::Cache> caches(spec.n_agents);
    for (const Transition* t : batch) {
        std::vector<double> q(spec.n_agents);
        for (int i = 0; i < spec.n_agents; ++i) {
            auto vals = role_values(params.qnet, t->obs_feats[i], &caches[i]);
            q[i] = vals[t->roles[i]];
        }
        double y = td_target(*t, target, cfg.gamma, cfg.mixer_kind, spec, vdn_w,
                             cfg.reward_scale);

        double qtot;
        MixerCache mc;
        std::vector<double> mixer_in;
        if (cfg.mixer_kind == MixerKind::Rmix) {
            mixer_in = mixer_input(t->state_feats, t->intents, spec);
            qtot = mix(params.mixer, q, mixer_in, &mc);
        } else {
            qtot = vdn_mix(q, vdn_w);
        }

        double delta = qtot - y;
        out.loss += delta * delta;
        double d_qtot = 2.0 * delta;

        std::vector<double> dq(spec.n_agents, 0.0);
        if (cfg.mixer_kind == MixerKind::Rmix) {
            mix_backward(params.mixer, mc, d_qtot, out.grads.mixer, dq);
        } else {
            for (int i = 0; i < spec.n_agents; ++i) dq[i] = d_qtot * vdn_w[i];
        }
        for (int i = 0; i < spec.n_agents; ++i) {
            std::vector<double> dout(3, 0.0);
            dout[t->roles[i]] = dq[i];
            params.qnet.backward(caches[i], dout, out.grads.qnet);
        }
    }
    return out;
}

inline double td_loss(std::span<const Transition* const> batch, const RmixParams& params,
                      const RmixParams& target, const TrainConfig& cfg,
                      const FeatureSpec& spec) {
    return td_loss_and_grads(batch, params, target, cfg, spec).loss;
}

// Plain SGD, no momentum. Non-finite gradients abort with diagnostics.
inline void sgd_step(RmixParams& params, RmixGrads& grads, double alpha) {
    double max_abs = 0.0;
    bool finite = true;
    grads.for_each_tensor([&](const std::vector<double>& g) {
        for (double v : g) {
            if (!std::isfinite(v)) finite = false;
            max_abs = std::max(max_abs, std::abs(v));
        }
    });
    if (!finite)
        throw TrainingError("non-finite gradient (max finite magnitude " +
                            std::to_string(max_abs) + ")");
    auto* gs = &grads;
    int slot = 0;
    params.for_each_tensor([&](std::vector<double>& p) {
        std::vector<double>* g = nullptr;
        switch (slot++) {
            case 0: g = &gs->qnet; break;
            case 1: g = &gs->mixer.w1_gen; break;
            case 2: g = &gs->mixer.b1_gen; break;
            case 3: g = &gs->mixer.w2_gen; break;
            case 4: g = &gs->mixer.b2_gen; break;
        }
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= alpha * (*g)[k];
    });
}

// theta_bar <- tau * theta + (1 - tau) * theta_bar, elementwise.
inline void soft_update(RmixParams& target, const RmixParams& online, double tau) {
    std::vector<const std::vector<double>*> src;
    const_cast<RmixParams&>(online).for_each_tensor(
        [&](std::vector<double>& p) { src.push_back(&p); });
    int slot = 0;
    target.for_each_tensor([&](std::vector<double>& t) {
        const std::vector<double>& o = *src[slot++];
        if (t.size() != o.size()) throw TrainingError("soft_update: shape mismatch");
        for (std::size_t k = 0; k < t.size(); ++k) t[k] = tau * o[k] + (1.0 - tau) * t[k];
    });
}

} // namespace rsw
