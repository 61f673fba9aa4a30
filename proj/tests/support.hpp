#pragma once

// Shared fixtures for the numeric test suites: a small synthetic RMIX setup
// plus a finite-difference gradient checker. Central differences are only
// meaningful away from the ReLU/abs kinks, so batch generation rejects
// samples that land within a safety margin of any nondifferentiable point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "roleswarm/features.hpp"
#include "roleswarm/rmix.hpp"
#include "roleswarm/rng.hpp"

namespace rsw::testsupport {

struct TinySetup {
    FeatureSpec spec;
    TrainConfig cfg;
    RmixParams params;
    RmixParams target;
    std::vector<Transition> batch;
};

inline std::vector<const Transition*> batch_ptrs(const std::vector<Transition>& b) {
    std::vector<const Transition*> p;
    p.reserve(b.size());
    for (const auto& t : b) p.push_back(&t);
    return p;
}

// Smallest absolute distance of any online-path activation to a kink: hidden
// pre-activations of the role net, the mixer's raw hypernet weights (abs
// transform), its hidden pre-activations, the b2 generator's hidden layer,
// and the output pre-activation when the outer ReLU is active.
inline double kink_margin(const TinySetup& t, const Transition& tr) {
    double margin = std::numeric_limits<double>::infinity();
    auto feed = [&margin](const Mlp::Cache& c) {
        for (std::size_t l = 0; l + 1 < c.pre.size(); ++l)
            for (double v : c.pre[l]) margin = std::min(margin, std::abs(v));
    };
    std::vector<double> q(t.spec.n_agents);
    for (int i = 0; i < t.spec.n_agents; ++i) {
        Mlp::Cache c;
        auto vals = role_values(t.params.qnet, tr.obs_feats[i], &c);
        feed(c);
        q[i] = vals[tr.roles[i]];
    }
    if (t.cfg.mixer_kind == MixerKind::Rmix) {
        MixerCache mc;
        auto mixer_in = mixer_input(tr.state_feats, tr.intents, t.spec);
        mix(t.params.mixer, q, mixer_in, &mc);
        for (double v : mc.w1_raw) margin = std::min(margin, std::abs(v));
        for (double v : mc.w2_raw) margin = std::min(margin, std::abs(v));
        for (double v : mc.h_pre) margin = std::min(margin, std::abs(v));
        feed(mc.b2c);
        if (t.params.mixer.out_act == MixAct::Relu)
            margin = std::min(margin, std::abs(mc.z));
    }
    return margin;
}

// N=3 agents, 2 targets, E=4 mixer, one 8-unit hidden layer in the role net.
// Transitions are re-drawn (deterministically) until they clear the kink
// margin, so the finite-difference comparison is valid for every parameter.
inline TinySetup make_tiny(std::uint64_t seed, MixAct act, MixerKind kind = MixerKind::Rmix,
                           int batch_size = 6, double margin = 1e-2) {
    TinySetup t;
    t.spec = FeatureSpec{3, 2, 3};
    t.cfg.mixing_hidden = 4;
    t.cfg.qnet_hidden = {8};
    t.cfg.mixer_activation = act;
    t.cfg.mixer_kind = kind;
    t.cfg.max_agents = 3;
    t.cfg.batch = 4;
    t.cfg.buffer_capacity = 64;
    t.cfg.reward_scale = 1.0; // hand arithmetic in these fixtures stays literal
    Rng rng(seed);
    t.params = RmixParams::make(t.spec, t.cfg, rng);
    t.target = RmixParams::make(t.spec, t.cfg, rng);
    for (int k = 0; k < batch_size; ++k) {
        for (int attempt = 0;; ++attempt) {
            Rng draw = rng.fork(1000 + 100 * k + attempt);
            Transition tr;
            tr.state_feats.resize(t.spec.state_dim());
            tr.next_state_feats.resize(t.spec.state_dim());
            for (auto& v : tr.state_feats) v = draw.uniform(-2, 2);
            for (auto& v : tr.next_state_feats) v = draw.uniform(-2, 2);
            tr.obs_feats.resize(3);
            for (auto& of : tr.obs_feats) {
                of.resize(t.spec.obs_dim());
                for (auto& v : of) v = draw.uniform(-2, 2);
            }
            tr.roles = {draw.uniform_int(0, 2), draw.uniform_int(0, 2),
                        draw.uniform_int(0, 2)};
            tr.intents = {draw.uniform_int(0, 1), draw.uniform_int(0, 1),
                          draw.uniform_int(0, 1)};
            tr.reward = draw.uniform(-10, 10);
            tr.terminal = k + 1 == batch_size;
            if (kink_margin(t, tr) > margin) {
                t.batch.push_back(std::move(tr));
                break;
            }
        }
    }
    return t;
}

struct GradCheckResult {
    double worst_rel = 0.0;
    int params_checked = 0;
};

// Central differences over every parameter of every tensor; relative error
// uses an absolute floor of 1 so near-zero gradients compare on absolute
// terms at the same tolerance.
inline GradCheckResult gradcheck(TinySetup& t, double h = 1e-4) {
    auto ptrs = batch_ptrs(t.batch);
    BatchEval eval = td_loss_and_grads(ptrs, t.params, t.target, t.cfg, t.spec);

    std::vector<std::vector<double>*> tensors;
    t.params.for_each_tensor([&](std::vector<double>& v) { tensors.push_back(&v); });
    std::vector<std::vector<double>*> grads;
    eval.grads.for_each_tensor([&](std::vector<double>& v) { grads.push_back(&v); });

    GradCheckResult out;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::size_t k = 0; k < tensors[ti]->size(); ++k) {
            double saved = (*tensors[ti])[k];
            (*tensors[ti])[k] = saved + h;
            double up = td_loss(ptrs, t.params, t.target, t.cfg, t.spec);
            (*tensors[ti])[k] = saved - h;
            double down = td_loss(ptrs, t.params, t.target, t.cfg, t.spec);
            (*tensors[ti])[k] = saved;
            double numeric = (up - down) / (2.0 * h);
            double analytic = (*grads[ti])[k];
            double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
            out.worst_rel = std::max(out.worst_rel, rel);
            ++out.params_checked;
        }
    }
    return out;
}

} // namespace rsw::testsupport
