#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "roleswarm/world.hpp"

namespace rsw {

// Fixed-order flattenings shared by the role network and the mixing network.
//
// Observation features: [self pos/vel (4) | enemy pos/vel (4) | per target
// pos/urgency (3T) | identity one-hot]. The one-hot is sized max_agents (not
// the runtime agent count) so a network trained at one swarm size executes
// unchanged at another.
//
// State features: [per agent pos/vel (4N) | enemy pos/vel (4) | per target
// pos/urgency (3T)]. An agent's observation features are a slice of the state
// features plus its one-hot, which is what lets TD targets be computed from
// stored next-state features alone.
//
// Positions are scaled by kPositionScale so every feature lives in roughly
// [-1, 1]; velocities and urgencies already do.
inline constexpr double kPositionScale = 0.1; // 1 / arena half-width

struct FeatureSpec {
    int n_agents = 8;
    int n_targets = 9;
    int max_agents = 11;

    int obs_dim() const { return 8 + 3 * n_targets + max_agents; }
    int state_dim() const { return 4 * n_agents + 4 + 3 * n_targets; }
    int mixer_input_dim() const { return state_dim() + n_agents; }
};

inline std::vector<double> obs_features(const Observation& o, int agent_id,
                                        const FeatureSpec& spec) {
    if (static_cast<int>(o.targets.size()) != spec.n_targets)
        throw std::invalid_argument("obs_features: target count mismatch");
    const double ps = kPositionScale;
    std::vector<double> f;
    f.reserve(spec.obs_dim());
    f.insert(f.end(), {o.self_pos.x * ps, o.self_pos.y * ps, o.self_vel.x, o.self_vel.y});
    f.insert(f.end(),
             {o.enemy_pos.x * ps, o.enemy_pos.y * ps, o.enemy_vel.x, o.enemy_vel.y});
    for (const auto& t : o.targets)
        f.insert(f.end(), {t.pos.x * ps, t.pos.y * ps, t.urgency});
    for (int i = 0; i < spec.max_agents; ++i) f.push_back(i == agent_id ? 1.0 : 0.0);
    return f;
}

inline std::vector<double> state_features(const GlobalState& s, const FeatureSpec& spec) {
    if (static_cast<int>(s.agents.size()) != spec.n_agents ||
        static_cast<int>(s.targets.size()) != spec.n_targets)
        throw std::invalid_argument("state_features: shape mismatch");
    const double ps = kPositionScale;
    std::vector<double> f;
    f.reserve(spec.state_dim());
    for (const auto& a : s.agents)
        f.insert(f.end(), {a.pos.x * ps, a.pos.y * ps, a.vel.x, a.vel.y});
    f.insert(f.end(),
             {s.enemy.pos.x * ps, s.enemy.pos.y * ps, s.enemy.vel.x, s.enemy.vel.y});
    for (const auto& t : s.targets)
        f.insert(f.end(), {t.pos.x * ps, t.pos.y * ps, t.urgency});
    return f;
}

// Rebuild one agent's observation features by slicing stored state features.
inline std::vector<double> obs_features_from_state(std::span<const double> state_feats,
                                                   int agent_id, const FeatureSpec& spec) {
    if (static_cast<int>(state_feats.size()) != spec.state_dim())
        throw std::invalid_argument("obs_features_from_state: state dim mismatch");
    std::vector<double> f;
    f.reserve(spec.obs_dim());
    const int agent_off = 4 * agent_id;
    const int tail_off = 4 * spec.n_agents; // enemy block followed by targets
    f.insert(f.end(), state_feats.begin() + agent_off, state_feats.begin() + agent_off + 4);
    f.insert(f.end(), state_feats.begin() + tail_off, state_feats.end());
    for (int i = 0; i < spec.max_agents; ++i) f.push_back(i == agent_id ? 1.0 : 0.0);
    return f;
}

// Mixer hypernetwork input: state features with the frame's goal intents
// appended (goal ids scaled into [0,1]).
inline std::vector<double> mixer_input(std::span<const double> state_feats,
                                       std::span<const int> intents, const FeatureSpec& spec) {
    std::vector<double> f(state_feats.begin(), state_feats.end());
    f.reserve(spec.mixer_input_dim());
    for (int g : intents) f.push_back(static_cast<double>(g) / spec.n_targets);
    return f;
}

} // namespace rsw
