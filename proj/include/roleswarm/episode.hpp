#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "roleswarm/consensus.hpp"
#include "roleswarm/nav.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

// Hook points along one episode. All spans are valid only for the call.
struct FrameEvent {
    int frame_index = 0;
    const GlobalState& state_before;
    const FrameResult& frame;
};

struct StepEvent {
    int step = 0; // index of the step just taken (0-based)
    const GlobalState& state; // after physics and urgency update
    const RewardBreakdown& reward;
    std::span<const int> goals;
    std::span<const Role> roles;
};

struct WindowEvent {
    int frame_index = 0;
    double window_return = 0.0;
    const GlobalState& state_after;
    bool terminal = false;
};

struct EpisodeHooks {
    std::function<void(const FrameEvent&)> on_frame;
    std::function<void(const StepEvent&)> on_step;
    std::function<void(const WindowEvent&)> on_window;
};

struct EpisodeResult {
    double total_return = 0.0;
    double completion_total = 0.0; // summed R_tc component
    std::vector<double> window_returns;
    int frames = 0;
    GlobalState final_state;
};

// One full episode: a decision frame every decision_period steps, navigation
// toward formation slots in between, rewards accumulated per step and per
// window. Deterministic in (config, seed, policy outputs).
inline EpisodeResult run_episode(const WorldConfig& cfg, std::uint64_t seed,
                                 const FramePolicies& policies, const NavParams& nav,
                                 const EpisodeHooks& hooks = {}) {
    GlobalState state = init_world(cfg, seed);
    const int n = cfg.n_agents;
    std::vector<int> goals(n, 0);
    std::vector<Role> roles(n, Role::Executor);
    std::vector<Vec2> accels(n);

    EpisodeResult result;
    double window = 0.0;
    int frame_index = -1;

    for (int step = 0; step < cfg.episode_length; ++step) {
        if (step % cfg.decision_period == 0) {
            ++frame_index;
            FrameResult frame = run_decision_frame(state, cfg, policies);
            goals = frame.goals;
            roles = frame.roles;
            window = 0.0;
            ++result.frames;
            if (hooks.on_frame) hooks.on_frame({frame_index, state, frame});
        }

        auto slots = plan_slot_targets(state, goals, cfg);
        for (int i = 0; i < n; ++i)
            accels[i] = accel_command(state.agents[i], slots[i], state.obstacles,
                                      &state.enemy, nav);
        Vec2 enemy_accel = enemy_policy(state, cfg);
        state = step_physics(state, accels, enemy_accel, cfg);

        CoverageReport report = detect_coverage(state, goals, cfg);
        RewardBreakdown reward = compute_reward(state, report, cfg.weights, cfg);
        state = update_urgency(state, report, cfg);

        result.total_return += reward.total;
        result.completion_total += reward.completion;
        window += reward.total;
        if (hooks.on_step) hooks.on_step({step, state, reward, goals, roles});

        if ((step + 1) % cfg.decision_period == 0) {
            result.window_returns.push_back(window);
            bool terminal = (step + 1) == cfg.episode_length;
            if (hooks.on_window) hooks.on_window({frame_index, window, state, terminal});
        }
    }
    result.final_state = std::move(state);
    return result;
}

} // namespace rsw
