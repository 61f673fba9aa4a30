#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "roleswarm/geometry.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

struct NavParams {
    double k_attract = 2.0;
    double k_damp = 1.5;
    double k_repulse = 1.0;
    double a_max = 3.0;
    double safe_distance = 1.5; // enemy repulsion activates inside 2x this
};

// Regular c-gon with circumradius r, offsets centered on (0,0).
struct FormationTemplate {
    int size = 0;
    std::vector<Vec2> offsets;

    static FormationTemplate regular(int c, double circumradius, int c_min = 3, int c_max = 8) {
        if (c < c_min || c > c_max)
            throw std::invalid_argument("formation size outside [" + std::to_string(c_min) +
                                        "," + std::to_string(c_max) + "]");
        return {c, polygon_offsets(c, circumradius)};
    }
};

inline std::vector<Vec2> formation_slots(const FormationTemplate& tmpl, Vec2 center) {
    std::vector<Vec2> out;
    out.reserve(tmpl.offsets.size());
    for (const Vec2& o : tmpl.offsets) out.push_back(center + o);
    return out;
}

// Minimum total squared distance assignment of agents to slots, Hungarian
// method, O(n^3). Returns the slot index per agent. Sizes here never exceed
// the formation cap so the dense version is plenty.
inline std::vector<int> assign_slots(std::span<const Vec2> agents, std::span<const Vec2> slots) {
    const int n = static_cast<int>(agents.size());
    if (n != static_cast<int>(slots.size()))
        throw std::invalid_argument("assign_slots: agent and slot counts differ");
    if (n == 0) return {};

    const double inf = std::numeric_limits<double>::infinity();
    // cost[i][j]: agent i -> slot j
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[i][j] = (agents[i] - slots[j]).norm_sq();

    // Row/column potentials with augmenting rows (1-indexed internals).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0); // match[j] = row assigned to column j
    std::vector<int> way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> out(n, -1);
    for (int j = 1; j <= n; ++j)
        if (match[j] > 0) out[match[j] - 1] = j - 1;
    return out;
}

// Potential-field command: spring toward the slot, velocity damping,
// inverse-square repulsion from obstacles (inside 2x radius) and the enemy
// (inside 2x safe distance). Magnitude capped at a_max.
inline Vec2 accel_command(const AgentState& agent, Vec2 slot_target,
                          std::span<const ObstacleDisc> obstacles,
                          const EnemyState* enemy, const NavParams& p) {
    Vec2 cmd = (slot_target - agent.pos) * p.k_attract - agent.vel * p.k_damp;
    for (const auto& o : obstacles) {
        double d = dist(agent.pos, o.center);
        if (d >= 2.0 * o.radius) continue;
        double clearance = std::max(d - o.radius, 1e-3);
        cmd += unit_or_zero(agent.pos - o.center) * (p.k_repulse / (clearance * clearance));
    }
    if (enemy != nullptr) {
        double d = dist(agent.pos, enemy->pos);
        if (d < 2.0 * p.safe_distance) {
            double c = std::max(d, 1e-3);
            cmd += unit_or_zero(agent.pos - enemy->pos) * (p.k_repulse / (c * c));
        }
    }
    return clamp_norm(cmd, p.a_max);
}

// Goal groups mapped to formation slots. Groups larger than the cap are split
// in agent-id order into chunks of at most c_max; chunks below c_min still get
// placeholder slots (center, or a two-point bar) so stragglers keep moving.
inline std::vector<Vec2> plan_slot_targets(const GlobalState& s, std::span<const int> goals,
                                           const WorldConfig& cfg) {
    std::vector<Vec2> slot_of(s.agents.size(), {0, 0});
    for (const auto& target : s.targets) {
        std::vector<int> group;
        for (const auto& a : s.agents)
            if (goals[a.id] == target.id) group.push_back(a.id);
        for (std::size_t start = 0; start < group.size(); start += cfg.c_max) {
            std::size_t end = std::min(start + cfg.c_max, group.size());
            int c = static_cast<int>(end - start);
            std::vector<Vec2> slots;
            if (c == 1) {
                slots = {target.pos};
            } else if (c == 2) {
                slots = {target.pos + Vec2{cfg.formation_radius, 0.0},
                         target.pos - Vec2{cfg.formation_radius, 0.0}};
            } else {
                slots = formation_slots(
                    FormationTemplate::regular(c, cfg.formation_radius, cfg.c_min, cfg.c_max),
                    target.pos);
            }
            std::vector<Vec2> member_pos(c);
            for (int k = 0; k < c; ++k) member_pos[k] = s.agents[group[start + k]].pos;
            auto assignment = assign_slots(member_pos, slots);
            for (int k = 0; k < c; ++k)
                slot_of[group[start + k]] = slots[assignment[k]];
        }
    }
    return slot_of;
}

} // namespace rsw
