#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "roleswarm/episode.hpp"
#include "roleswarm/rmix.hpp"

namespace rsw {

// Role selector that runs the role network greedily (or epsilon-greedily).
// Used both for evaluation with a frozen checkpoint and inside training.
inline RoleSelectorFn rmix_role_selector(const RmixParams& params, FeatureSpec spec,
                                         double epsilon, Rng rng) {
    auto state = std::make_shared<Rng>(rng);
    return [&params, spec, epsilon, state](int agent_id, const Observation& o) {
        auto feats = obs_features(o, agent_id, spec);
        auto q = role_values(params.qnet, feats);
        return select_role(q, epsilon, *state);
    };
}

namespace detail {

// Turns frame/window hook pairs into complete transitions:
// s at decision time, window-summed reward, s' at the next decision time.
struct TransitionRecorder {
    FeatureSpec spec;
    Transition::Origin origin = Transition::Origin::Online;
    std::function<void(Transition&&)> sink;
    Transition pending;
    bool armed = false;

    void attach(EpisodeHooks& hooks) {
        hooks.on_frame = [this](const FrameEvent& ev) {
            pending = Transition{};
            pending.state_feats = state_features(ev.state_before, spec);
            pending.obs_feats.resize(spec.n_agents);
            for (int i = 0; i < spec.n_agents; ++i)
                pending.obs_feats[i] = obs_features(observe(ev.state_before, i), i, spec);
            pending.roles.resize(spec.n_agents);
            for (int i = 0; i < spec.n_agents; ++i)
                pending.roles[i] = static_cast<int>(ev.frame.roles[i]);
            pending.intents = ev.frame.intents;
            pending.origin = origin;
            armed = true;
        };
        hooks.on_window = [this](const WindowEvent& ev) {
            if (!armed) return;
            pending.reward = ev.window_return;
            pending.next_state_feats = state_features(ev.state_after, spec);
            pending.terminal = ev.terminal;
            armed = false;
            sink(std::move(pending));
        };
    }
};

} // namespace detail

// Step 1: fill the buffer with transitions generated under the scripted role
// policy (the remote-model stand-in); one transition per decision frame,
// tagged offline.
inline void seed_offline(const WorldConfig& world, const TrainConfig& cfg,
                         const OracleParams& oracle, const NavParams& nav,
                         std::uint64_t seed, ReplayBuffer& buffer) {
    FeatureSpec spec{world.n_agents, world.n_targets, cfg.max_agents};
    Rng master(seed);
    for (int ep = 0; ep < cfg.n_pre; ++ep) {
        FramePolicies policies = oracle_policies(world, master.fork(ep * 2 + 1), oracle);
        detail::TransitionRecorder rec;
        rec.spec = spec;
        rec.origin = Transition::Origin::OfflineOracle;
        rec.sink = [&](Transition&& t) { buffer.push(std::move(t)); };
        EpisodeHooks hooks;
        rec.attach(hooks);
        run_episode(world, master.fork(ep * 2).next_u64(), policies, nav, hooks);
    }
}

struct TrainResult {
    RmixParams params;
    RmixParams target;
    std::vector<double> loss_curve;   // one entry per gradient update
    std::vector<double> return_curve; // one entry per episode
    int updates = 0;
};

// Step 2: online cooperative training. Every decision frame stores one
// transition; once the buffer can fill a batch, each frame also applies one
// TD update with a soft target refresh. Epsilon anneals linearly over the
// first half of all online frames.
inline TrainResult train(const WorldConfig& world, const TrainConfig& cfg,
                         const OracleParams& oracle, const NavParams& nav,
                         std::uint64_t seed, ReplayBuffer& buffer,
                         const std::function<void(int episode, double ep_return)>&
                             on_episode = {}) {
    cfg.validate();
    FeatureSpec spec{world.n_agents, world.n_targets, cfg.max_agents};
    Rng master(seed);
    Rng init_rng = master.fork(0xA11);
    Rng batch_rng = master.fork(0xB22);
    Rng role_rng = master.fork(0xC33);

    TrainResult result;
    result.params = RmixParams::make(spec, cfg, init_rng);
    result.target = result.params;

    const int frames_per_episode = world.episode_length / world.decision_period;
    const int total_frames = cfg.n_epoch * frames_per_episode;
    const int anneal_frames = std::max(1, total_frames / 2);
    int frame_count = 0;

    auto epsilon_now = [&]() {
        double f = std::min(1.0, static_cast<double>(frame_count) / anneal_frames);
        return cfg.eps_start + f * (cfg.eps_end - cfg.eps_start);
    };

    for (int ep = 0; ep < cfg.n_epoch; ++ep) {
        FramePolicies policies = oracle_policies(world, master.fork(5000 + ep), oracle);
        policies.role = [&](int agent_id, const Observation& o) {
            auto feats = obs_features(o, agent_id, spec);
            auto q = role_values(result.params.qnet, feats);
            return select_role(q, epsilon_now(), role_rng);
        };

        detail::TransitionRecorder rec;
        rec.spec = spec;
        rec.origin = Transition::Origin::Online;
        rec.sink = [&](Transition&& t) {
            buffer.push(std::move(t));
            ++frame_count;
            if (buffer.size() < static_cast<std::size_t>(cfg.batch)) return;
            auto idx = buffer.sample_indices(cfg.batch, batch_rng);
            std::vector<const Transition*> batch;
            batch.reserve(idx.size());
            for (auto i : idx) batch.push_back(&buffer[i]);
            BatchEval eval = td_loss_and_grads(batch, result.params, result.target, cfg, spec);
            if (!std::isfinite(eval.loss) || eval.loss > cfg.divergence_threshold)
                throw TrainingError("training diverged at update " +
                                    std::to_string(result.updates) + ": loss " +
                                    std::to_string(eval.loss));
            sgd_step(result.params, eval.grads, cfg.alpha);
            soft_update(result.target, result.params, cfg.tau);
            result.loss_curve.push_back(eval.loss);
            ++result.updates;
        };
        EpisodeHooks hooks;
        rec.attach(hooks);
        EpisodeResult res =
            run_episode(world, master.fork(9000 + ep).next_u64(), policies, nav, hooks);
        result.return_curve.push_back(res.total_return);
        if (on_episode) on_episode(ep, res.total_return);
    }
    return result;
}

} // namespace rsw
