#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roleswarm/geometry.hpp"
#include "roleswarm/rng.hpp"

namespace rsw {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TargetRegion {
    int id = 0;
    Vec2 pos;
    double urgency = 1.0; // in [0,1], decays while covered
    double radius = 1.5;
    // Decay bookkeeping: urgency == max(decay_base - omega_d * decay_units, 0).
    // Accumulating covering members as an exact integer keeps the linear decay
    // law free of per-step rounding drift.
    double decay_base = 1.0;
    int decay_units = 0;
};

struct ObstacleDisc {
    Vec2 center;
    double radius = 1.0;
};

struct AgentState {
    int id = 0;
    Vec2 pos;
    Vec2 vel;
};

struct EnemyState {
    Vec2 pos;
    Vec2 vel;
};

struct GlobalState {
    std::vector<AgentState> agents;
    EnemyState enemy;
    std::vector<TargetRegion> targets; // dense ids 0..T-1, ascending
    std::vector<ObstacleDisc> obstacles;
    int step = 0;
    std::uint64_t rng_state = 0; // stream used for target re-sampling
};

// Per-target entry in Observation, listed for every region in ascending id
// order (index == id).
struct TargetObs {
    Vec2 pos;
    double urgency = 1.0;
};

struct Observation {
    Vec2 self_pos;
    Vec2 self_vel;
    Vec2 enemy_pos;
    Vec2 enemy_vel;
    std::vector<TargetObs> targets;
};

struct RewardWeights {
    double w_f = 15.0;
    double w_n = 4.0;
    double w_tc = 10.0;
    double w_e = 100.0;
    double w_c = 100.0;
};

struct RewardBreakdown {
    double total = 0.0;
    double formation = 0.0;   // R_f
    double navigation = 0.0;  // R_n
    double completion = 0.0;  // R_tc
    double interference = 0.0;// R_e
    double collision = 0.0;   // R_c
};

// One detachment per target: the agents assigned to it that sit inside the
// target radius. formation_error is infinity when no template exists for the
// detachment size.
struct DetachmentReport {
    int target_id = 0;
    std::vector<int> member_ids;
    int size = 0;
    double formation_error = std::numeric_limits<double>::infinity();
    bool formation_ok = false;
};

struct CoverageReport {
    std::vector<DetachmentReport> detachments; // one per target, ascending id
};

struct WorldConfig {
    int n_agents = 8;           // {8..11} when strict
    int n_targets = 9;          // at most the 9 grid cells
    int episode_length = 1000;
    int decision_period = 50;
    double dt = 0.1;
    double delta_obs = 3.0;     // observation / comm range
    double omega_d = 0.003;     // urgency decay per covering member per step
    double target_radius = 1.5; // coverage membership radius
    double formation_tolerance = 0.5;
    double formation_radius = 0.75; // circumradius of the slot polygon
    int c_min = 3;
    int c_max = 8;
    double safe_distance = 1.5;   // interference radius around the enemy
    double collision_radius = 0.3;
    double agent_vmax = 1.0;      // componentwise
    double enemy_vmax = 0.75;     // componentwise
    double enemy_accel = 3.0;
    double enemy_cluster_radius = 3.0; // link distance when the enemy clusters agents
    double arena_half = 10.0;
    double spawn_half = 3.0;
    double formation_reward_range = 2.0;              // D_f
    double navigation_reward_range = 16.0 * 1.4142135623730951; // D_n, grid diagonal
    RewardWeights weights;
    std::vector<ObstacleDisc> obstacles = {
        {{4.0, -4.0}, 1.0},
        {{-4.0, 4.0}, 1.0},
        {{0.0, 5.0}, 0.8},
    };
    bool strict = true;

    void validate() const {
        if (strict && (n_agents < 8 || n_agents > 11))
            throw ConfigError("n_agents must be in {8..11} (strict mode), got " +
                              std::to_string(n_agents));
        if (n_agents < 1) throw ConfigError("n_agents must be positive");
        if (n_targets < 1 || n_targets > 9)
            throw ConfigError("n_targets must be in [1,9]");
        if (episode_length <= 0 || decision_period <= 0 ||
            episode_length % decision_period != 0)
            throw ConfigError("episode_length must be a positive multiple of decision_period");
        if (delta_obs <= 0.0) throw ConfigError("delta_obs must be positive");
        for (const auto& o : obstacles)
            if (o.radius <= 0.0) throw ConfigError("obstacle radius must be positive");
        if (weights.w_f < 0 || weights.w_n < 0 || weights.w_tc < 0 ||
            weights.w_e < 0 || weights.w_c < 0)
            throw ConfigError("reward weights must be nonnegative");
    }
};

// Candidate cells targets live on and re-sample from.
inline std::array<Vec2, 9> target_grid() {
    std::array<Vec2, 9> g{};
    static const double coords[3] = {-8.0, 0.0, 8.0};
    int k = 0;
    for (double x : coords)
        for (double y : coords) g[k++] = {x, y};
    return g;
}

inline bool on_target_grid(Vec2 p) {
    for (const Vec2& g : target_grid())
        if (g.x == p.x && g.y == p.y) return true;
    return false;
}

inline GlobalState init_world(const WorldConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    GlobalState s;
    s.obstacles = cfg.obstacles;

    // Targets occupy distinct grid cells, urgency starts at 1.
    auto grid = target_grid();
    std::array<int, 9> order;
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < cfg.n_targets; ++i) {
        int j = rng.uniform_int(i, 8);
        std::swap(order[i], order[j]);
    }
    s.targets.reserve(cfg.n_targets);
    for (int t = 0; t < cfg.n_targets; ++t)
        s.targets.push_back({t, grid[order[t]], 1.0, cfg.target_radius});

    s.agents.reserve(cfg.n_agents);
    for (int i = 0; i < cfg.n_agents; ++i) {
        Vec2 p{rng.uniform(-cfg.spawn_half, cfg.spawn_half),
               rng.uniform(-cfg.spawn_half, cfg.spawn_half)};
        s.agents.push_back({i, p, {0.0, 0.0}});
    }

    double edge = cfg.arena_half - 1.0;
    s.enemy.pos = {rng.uniform(-edge, edge), rng.uniform(-edge, edge)};
    s.enemy.vel = {0.0, 0.0};

    s.step = 0;
    s.rng_state = rng.state();
    return s;
}

// Pure projection of the state into one agent's view. Target list covers all
// regions in ascending id order regardless of their order in the state.
inline Observation observe(const GlobalState& s, int agent_id) {
    if (agent_id < 0 || agent_id >= static_cast<int>(s.agents.size()))
        throw std::out_of_range("observe: unknown agent id " + std::to_string(agent_id));
    const AgentState& a = s.agents[agent_id];
    Observation o;
    o.self_pos = a.pos;
    o.self_vel = a.vel;
    o.enemy_pos = s.enemy.pos;
    o.enemy_vel = s.enemy.vel;
    std::vector<const TargetRegion*> ordered;
    ordered.reserve(s.targets.size());
    for (const auto& t : s.targets) ordered.push_back(&t);
    std::sort(ordered.begin(), ordered.end(),
              [](const TargetRegion* x, const TargetRegion* y) { return x->id < y->id; });
    o.targets.reserve(ordered.size());
    for (const auto* t : ordered) o.targets.push_back({t->pos, t->urgency});
    return o;
}

// Agents strictly closer than delta_obs, self excluded, ascending id.
inline std::vector<int> neighbor_set(const GlobalState& s, int agent_id, double delta_obs) {
    const AgentState& a = s.agents.at(agent_id);
    std::vector<int> out;
    for (const auto& b : s.agents) {
        if (b.id == agent_id) continue;
        if (dist(a.pos, b.pos) < delta_obs) out.push_back(b.id);
    }
    return out;
}

namespace detail {

inline void integrate(Vec2& pos, Vec2& vel, Vec2 accel, double dt, double vmax,
                      double arena_half) {
    vel.x = clamp(vel.x + accel.x * dt, -vmax, vmax);
    vel.y = clamp(vel.y + accel.y * dt, -vmax, vmax);
    pos.x += vel.x * dt;
    pos.y += vel.y * dt;
    // Soft arena boundary: stop at the wall.
    if (pos.x < -arena_half) { pos.x = -arena_half; vel.x = 0.0; }
    if (pos.x >  arena_half) { pos.x =  arena_half; vel.x = 0.0; }
    if (pos.y < -arena_half) { pos.y = -arena_half; vel.y = 0.0; }
    if (pos.y >  arena_half) { pos.y =  arena_half; vel.y = 0.0; }
}

} // namespace detail

// Semi-implicit Euler with componentwise velocity clamping. Never rejects:
// out-of-range commands are absorbed by the clamps.
inline GlobalState step_physics(const GlobalState& s, std::span<const Vec2> accelerations,
                                Vec2 enemy_accel, const WorldConfig& cfg) {
    if (accelerations.size() != s.agents.size())
        throw std::invalid_argument("step_physics: one acceleration per agent required");
    GlobalState out = s;
    for (std::size_t i = 0; i < out.agents.size(); ++i)
        detail::integrate(out.agents[i].pos, out.agents[i].vel, accelerations[i],
                          cfg.dt, cfg.agent_vmax, cfg.arena_half);
    detail::integrate(out.enemy.pos, out.enemy.vel, enemy_accel, cfg.dt,
                      cfg.enemy_vmax, cfg.arena_half);
    out.step = s.step + 1;
    return out;
}

// Regular c-gon slot offsets, circumradius r, first vertex on +x. The numeric
// centroid is subtracted so the offsets sum to zero exactly.
inline std::vector<Vec2> polygon_offsets(int c, double r) {
    std::vector<Vec2> pts(c);
    for (int k = 0; k < c; ++k) {
        double ang = 2.0 * M_PI * k / c;
        pts[k] = {r * std::cos(ang), r * std::sin(ang)};
    }
    Vec2 mean{0, 0};
    for (const Vec2& p : pts) mean += p;
    mean = mean * (1.0 / c);
    for (Vec2& p : pts) p = p - mean;
    return pts;
}

// Groups agents by assigned target, keeps the ones inside the target radius,
// and grades each detachment against the matching formation template.
inline CoverageReport detect_coverage(const GlobalState& s, std::span<const int> goal_assignment,
                                      const WorldConfig& cfg) {
    CoverageReport report;
    report.detachments.reserve(s.targets.size());
    for (const auto& target : s.targets) {
        DetachmentReport d;
        d.target_id = target.id;
        for (const auto& a : s.agents) {
            if (static_cast<std::size_t>(a.id) >= goal_assignment.size()) continue;
            if (goal_assignment[a.id] != target.id) continue;
            if (dist(a.pos, target.pos) <= target.radius) d.member_ids.push_back(a.id);
        }
        d.size = static_cast<int>(d.member_ids.size());
        if (d.size >= cfg.c_min && d.size <= cfg.c_max) {
            std::vector<Vec2> rel(d.size);
            Vec2 centroid{0, 0};
            for (int id : d.member_ids) centroid += s.agents[id].pos;
            centroid = centroid * (1.0 / d.size);
            for (int k = 0; k < d.size; ++k)
                rel[k] = s.agents[d.member_ids[k]].pos - centroid;
            auto tmpl = polygon_offsets(d.size, cfg.formation_radius);
            d.formation_error = hausdorff(rel, tmpl);
            d.formation_ok = d.formation_error <= cfg.formation_tolerance;
        }
        report.detachments.push_back(std::move(d));
    }
    return report;
}

// kappa <- max(kappa - omega_d * n_k, 0) for every target covered by a
// formation-ok detachment; a target hitting zero re-samples to a grid cell
// not occupied by another active target, urgency reset to 1.
inline GlobalState update_urgency(const GlobalState& s, const CoverageReport& report,
                                  const WorldConfig& cfg) {
    GlobalState out = s;
    Rng rng(out.rng_state);
    for (const auto& d : report.detachments) {
        if (!d.formation_ok) continue;
        TargetRegion& t = out.targets[d.target_id];
        // Re-base after any external write to the urgency field.
        double expected = std::max(t.decay_base - cfg.omega_d * t.decay_units, 0.0);
        if (t.urgency != expected) {
            t.decay_base = t.urgency;
            t.decay_units = 0;
        }
        t.decay_units += d.size;
        t.urgency = std::max(t.decay_base - cfg.omega_d * t.decay_units, 0.0);
        if (t.urgency == 0.0) {
            auto grid = target_grid();
            std::vector<Vec2> free;
            for (const Vec2& cell : grid) {
                bool taken = false;
                for (const auto& other : out.targets)
                    if (other.id != t.id && other.pos.x == cell.x && other.pos.y == cell.y)
                        taken = true;
                if (!taken) free.push_back(cell);
            }
            t.pos = free[rng.uniform_int(0, static_cast<int>(free.size()) - 1)];
            t.urgency = 1.0;
            t.decay_base = 1.0;
            t.decay_units = 0;
        }
    }
    out.rng_state = rng.state();
    return out;
}

inline double combine_reward(double formation, double navigation, double completion,
                             double interference, double collision, const RewardWeights& w) {
    return w.w_f * formation + w.w_n * navigation + w.w_tc * completion -
           w.w_e * interference - w.w_c * collision;
}

// Weighted composite of five nonnegative components:
//   R_f  formation quality of covering detachments
//   R_n  urgency-weighted proximity shaping
//   R_tc per-step completion reward (urgency * detachment size)
//   R_e  agents inside the enemy interference radius
//   R_c  agent/agent and agent/obstacle near-collisions
inline RewardBreakdown compute_reward(const GlobalState& s, const CoverageReport& report,
                                      const RewardWeights& w, const WorldConfig& cfg) {
    RewardBreakdown r;
    for (const auto& d : report.detachments) {
        if (d.size >= cfg.c_min && d.size <= cfg.c_max)
            r.formation += std::max(0.0, 1.0 - d.formation_error / cfg.formation_reward_range);
        if (d.formation_ok)
            r.completion += s.targets[d.target_id].urgency * d.size;
    }
    for (const auto& a : s.agents)
        for (const auto& t : s.targets)
            r.navigation += t.urgency *
                std::max(0.0, 1.0 - dist(a.pos, t.pos) / cfg.navigation_reward_range);
    for (const auto& a : s.agents)
        if (dist(a.pos, s.enemy.pos) < cfg.safe_distance) r.interference += 1.0;
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        for (std::size_t j = i + 1; j < s.agents.size(); ++j)
            if (dist(s.agents[i].pos, s.agents[j].pos) < cfg.collision_radius)
                r.collision += 1.0;
        for (const auto& o : s.obstacles)
            if (dist(s.agents[i].pos, o.center) - o.radius < cfg.collision_radius)
                r.collision += 1.0;
    }
    r.total = combine_reward(r.formation, r.navigation, r.completion, r.interference,
                             r.collision, w);
    return r;
}

namespace detail {

// Connected components under a link radius; returns component id per agent.
inline std::vector<int> proximity_components(const GlobalState& s, double link_radius) {
    int n = static_cast<int>(s.agents.size());
    std::vector<int> comp(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (comp[i] != -1) continue;
        std::vector<int> stack{i};
        comp[i] = next;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < n; ++v) {
                if (comp[v] != -1) continue;
                if (dist(s.agents[u].pos, s.agents[v].pos) <= link_radius) {
                    comp[v] = next;
                    stack.push_back(v);
                }
            }
        }
        ++next;
    }
    return comp;
}

inline Vec2 obstacle_repulsion(Vec2 pos, std::span<const ObstacleDisc> obstacles, double gain) {
    Vec2 rep{0, 0};
    for (const auto& o : obstacles) {
        double d = dist(pos, o.center);
        if (d >= 2.0 * o.radius) continue;
        double clearance = std::max(d - o.radius, 1e-3);
        rep += unit_or_zero(pos - o.center) * (gain / (clearance * clearance));
    }
    return rep;
}

} // namespace detail

// Scripted pursuer: accelerate toward the centroid of the nearest cluster of
// at least three agents, bending around obstacles; zero command when no such
// cluster exists.
inline Vec2 enemy_policy(const GlobalState& s, const WorldConfig& cfg) {
    auto comp = detail::proximity_components(s, cfg.enemy_cluster_radius);
    int n = static_cast<int>(s.agents.size());
    int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<int> count(ncomp, 0);
    std::vector<Vec2> centroid(ncomp, {0, 0});
    for (int i = 0; i < n; ++i) {
        count[comp[i]]++;
        centroid[comp[i]] += s.agents[i].pos;
    }
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < ncomp; ++c) {
        if (count[c] < 3) continue;
        Vec2 ctr = centroid[c] * (1.0 / count[c]);
        double d = dist(ctr, s.enemy.pos);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best < 0) return {0.0, 0.0};
    Vec2 ctr = centroid[best] * (1.0 / count[best]);
    Vec2 accel = unit_or_zero(ctr - s.enemy.pos) * cfg.enemy_accel;
    accel += detail::obstacle_repulsion(s.enemy.pos, s.obstacles, 1.0);
    return clamp_norm(accel, cfg.enemy_accel);
}

} // namespace rsw
