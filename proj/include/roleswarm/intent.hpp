#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roleswarm/geometry.hpp"
#include "roleswarm/rng.hpp"
#include "roleswarm/roles.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

// ---------------------------------------------------------------------------
// Prompt assets

struct PromptBundle {
    std::string task_instruction; // system message
    std::string cot_guidance;     // reasoning scaffold, embedded verbatim once
    std::string init_template;    // placeholders: {observation} {few_shot}
    std::string cons_template;    // placeholders: {observation} {intent} {role} {neighbors} {cot} {few_shot}
    std::vector<std::string> few_shot; // optional worked examples, rendered in order
};

inline PromptBundle default_prompt_bundle() {
    PromptBundle b;
    b.task_instruction =
        "You control one drone in a swarm that must keep scoring regions covered.\n"
        "Each region has an urgency between 0 and 1; covering it with a stable\n"
        "formation drains its urgency and earns reward. A hostile pursuer chases\n"
        "groups of three or more drones, and static obstacles must be avoided.\n"
        "A formation only counts if it has between 3 and 8 members; never pile\n"
        "more than 8 drones onto one region. Valid region centers have\n"
        "coordinates from {-8, 0, 8} on both axes.\n"
        "Always end your answer with one line of the exact form:\n"
        "I recommend going to target [x, y]";
    b.cot_guidance =
        "Reason step by step before answering:\n"
        "1. Score each region by urgency and travel distance.\n"
        "2. Decide whether to cluster with teammates or disperse, judging by the\n"
        "   pursuer's position.\n"
        "3. A region needs at least 3 drones to count and tolerates at most 8,\n"
        "   so join a group that still has room.\n"
        "4. Respect your role when weighing your own preference against others'.";
    b.init_template =
        "{few_shot}Current situation:\n"
        "{observation}\n"
        "Pick the region you intend to cover next.\n"
        "End with: I recommend going to target [x, y]";
    b.cons_template =
        "{few_shot}Current situation:\n"
        "{observation}\n"
        "Your role: {role}\n"
        "Your initial intent: {intent}\n"
        "Neighbor proposals:\n"
        "{neighbors}\n"
        "{cot}\n"
        "Refine your choice into a final decision.\n"
        "End with: I recommend going to target [x, y]";
    return b;
}

namespace detail {

inline std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string fmt_pair(Vec2 v) { return "[" + fmt3(v.x) + ", " + fmt3(v.y) + "]"; }

inline std::string replace_all(std::string text, const std::string& key,
                               const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

inline std::string few_shot_block(const PromptBundle& b) {
    if (b.few_shot.empty()) return "";
    std::string block = "Worked examples:\n";
    for (const auto& ex : b.few_shot) block += ex + "\n";
    return block + "\n";
}

inline std::string observation_block(const Observation& o) {
    std::string s;
    s += "Own position " + fmt_pair(o.self_pos) + ", velocity " + fmt_pair(o.self_vel) + "\n";
    s += "Pursuer position " + fmt_pair(o.enemy_pos) + ", velocity " + fmt_pair(o.enemy_vel) +
         ", distance " + fmt3(dist(o.self_pos, o.enemy_pos)) + " m\n";
    s += "Regions (id: center, urgency):\n";
    for (std::size_t i = 0; i < o.targets.size(); ++i)
        s += "  " + std::to_string(i) + ": " + fmt_pair(o.targets[i].pos) + ", urgency " +
             fmt3(o.targets[i].urgency) + "\n";
    return s;
}

} // namespace detail

inline std::string render_init_prompt(const PromptBundle& b, const Observation& obs) {
    std::string out = detail::replace_all(b.init_template, "{few_shot}",
                                          detail::few_shot_block(b));
    out = detail::replace_all(out, "{observation}", detail::observation_block(obs));
    return out;
}

// Neighbor view carried into stage two.
struct NeighborSummary {
    int agent_id = -1;
    Vec2 pos;
    Vec2 vel;
    int goal = kIllegalGoal; // stage-1 intent ĝ_j
    Role role = Role::Executor;
};

inline std::string render_cons_prompt(const PromptBundle& b, const Observation& obs,
                                      Role own_role, const Intent& own_intent,
                                      std::span<const NeighborSummary> neighbors) {
    std::string nb;
    if (neighbors.empty()) {
        nb = "  (no neighbors within communication range)\n";
    } else {
        for (const auto& n : neighbors) {
            nb += "  agent " + std::to_string(n.agent_id) + " (" + role_name(n.role) +
                  ") at " + detail::fmt_pair(n.pos);
            if (n.goal >= 0 && n.goal < static_cast<int>(obs.targets.size()))
                nb += " intends " + detail::fmt_pair(obs.targets[n.goal].pos);
            else
                nb += " intends (unknown)";
            nb += "\n";
        }
    }
    std::string intent_txt =
        (own_intent.goal >= 0 && own_intent.goal < static_cast<int>(obs.targets.size()))
            ? detail::fmt_pair(obs.targets[own_intent.goal].pos)
            : "(none)";
    std::string out = detail::replace_all(b.cons_template, "{few_shot}",
                                          detail::few_shot_block(b));
    out = detail::replace_all(out, "{observation}", detail::observation_block(obs));
    out = detail::replace_all(out, "{role}", role_name(own_role));
    out = detail::replace_all(out, "{intent}", intent_txt);
    out = detail::replace_all(out, "{neighbors}", nb);
    out = detail::replace_all(out, "{cot}", b.cot_guidance);
    return out;
}

// ---------------------------------------------------------------------------
// Output parsing

enum class IllegalReason { None, NoCoordinates, NotATarget, Malformed };

inline const char* illegal_reason_name(IllegalReason r) {
    switch (r) {
        case IllegalReason::None:          return "none";
        case IllegalReason::NoCoordinates: return "no-coordinates";
        case IllegalReason::NotATarget:    return "not-a-target";
        case IllegalReason::Malformed:     return "malformed";
    }
    return "?";
}

struct ParsedDecision {
    bool is_goal = false;
    int target_id = kIllegalGoal;
    Vec2 coords;
    IllegalReason reason = IllegalReason::None;

    static ParsedDecision goal(int id, Vec2 c) { return {true, id, c, IllegalReason::None}; }
    static ParsedDecision illegal(IllegalReason r) { return {false, kIllegalGoal, {}, r}; }
};

// Extracts the last "[x, y]" or "(x, y)" pair in the text; legal only when the
// pair, rounded to one decimal, lands exactly on an active target. Reasoning
// output often mentions several candidates, hence last-match-wins. Illegal is
// a value, never an error.
inline ParsedDecision parse_decision(const std::string& text,
                                     std::span<const Vec2> active_targets) {
    static const std::regex pair_re(
        R"(([\[\(])\s*(-?[0-9]+(?:\.[0-9]+)?)\s*,\s*(-?[0-9]+(?:\.[0-9]+)?)\s*([\]\)]))");
    std::smatch last;
    bool found = false;
    auto begin = std::sregex_iterator(text.begin(), text.end(), pair_re);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        last = *it;
        found = true;
    }
    if (!found) return ParsedDecision::illegal(IllegalReason::NoCoordinates);

    char open = last[1].str()[0];
    char close = last[4].str()[0];
    if ((open == '[' && close != ']') || (open == '(' && close != ')'))
        return ParsedDecision::illegal(IllegalReason::Malformed);

    double x = std::strtod(last[2].str().c_str(), nullptr);
    double y = std::strtod(last[3].str().c_str(), nullptr);
    if (!std::isfinite(x) || !std::isfinite(y) || std::abs(x) > 1e15 || std::abs(y) > 1e15)
        return ParsedDecision::illegal(IllegalReason::Malformed);

    auto deci = [](double v) { return std::llround(v * 10.0); };
    for (std::size_t i = 0; i < active_targets.size(); ++i) {
        if (deci(x) == deci(active_targets[i].x) && deci(y) == deci(active_targets[i].y))
            return ParsedDecision::goal(static_cast<int>(i), {x, y});
    }
    return ParsedDecision::illegal(IllegalReason::NotATarget);
}

// ---------------------------------------------------------------------------
// Scripted oracle (LLM stand-in)

struct OracleParams {
    double lambda_enemy = 0.5; // threat discount weight
    double delta_threat = 4.0; // threat radius around a target
    double lambda_team = 0.1;  // bonus per teammate already heading to a region
    double lambda_cap = 1.0;   // penalty for joining a full region
    double explore_role_prob = 0.2; // random-role rate of the role heuristic
};

// kappa / (1 + dist) minus a penalty when the enemy sits near the target.
inline double oracle_target_score(const Observation& obs, int target_index,
                                  const OracleParams& p) {
    const TargetObs& t = obs.targets[target_index];
    double d = dist(obs.self_pos, t.pos);
    double threat = std::max(0.0, 1.0 - dist(t.pos, obs.enemy_pos) / p.delta_threat);
    return t.urgency / (1.0 + d) - p.lambda_enemy * threat;
}

namespace detail {

inline int argmax_score(const Observation& obs, const OracleParams& p,
                        std::span<const double> bonus) {
    if (obs.targets.empty()) throw std::domain_error("oracle: no active targets");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(obs.targets.size()); ++i) {
        double s = oracle_target_score(obs, i, p);
        if (!bonus.empty()) s += bonus[i];
        if (s > best_score) { // strict: ties keep the lowest target id
            best_score = s;
            best = i;
        }
    }
    return best;
}

} // namespace detail

// Shared chooser behind both stages. With no neighbor information every role
// reduces to the plain score argmax; with neighbors, Coordinators weigh
// teammate plans and Executors adopt a superior's goal when one still has
// room in its formation (the prompt-encoded size cap, mirrored here).
inline int oracle_decide(const Observation& obs, Role role,
                         std::span<const NeighborSummary> neighbors, int c_max,
                         const OracleParams& p) {
    const int n_targets = static_cast<int>(obs.targets.size());
    if (n_targets == 0) throw std::domain_error("oracle: no active targets");

    std::vector<double> heading(n_targets, 0.0); // neighbors per target
    for (const auto& nb : neighbors)
        if (nb.goal >= 0 && nb.goal < n_targets) heading[nb.goal] += 1.0;

    auto group_has_room = [&](int goal) { return heading[goal] + 1.0 <= c_max; };

    if (role != Role::Commander) {
        // Superiors in authority order, lowest id first within a rank.
        for (Role want : {Role::Commander, Role::Coordinator}) {
            if (role == Role::Coordinator && want == Role::Coordinator) break;
            const NeighborSummary* pick = nullptr;
            for (const auto& nb : neighbors) {
                if (nb.role != want || nb.goal < 0 || nb.goal >= n_targets) continue;
                if (!group_has_room(nb.goal)) continue;
                if (pick == nullptr || nb.agent_id < pick->agent_id) pick = &nb;
            }
            if (pick != nullptr) return pick->goal;
        }
    }

    std::vector<double> bonus(n_targets, 0.0);
    if (role != Role::Commander) {
        for (int g = 0; g < n_targets; ++g) {
            bonus[g] = p.lambda_team * std::min(heading[g], static_cast<double>(c_max - 1)) -
                       p.lambda_cap * std::max(0.0, heading[g] + 1.0 - c_max);
        }
    }
    return detail::argmax_score(obs, p, role == Role::Commander ? std::span<const double>{}
                                                                : std::span<const double>(bonus));
}

// Stage-1 intent: no neighborhood information exists yet.
inline int oracle_intent(const Observation& obs, Role role, Rng& rng,
                         const OracleParams& p = {}) {
    (void)rng; // reserved for stochastic oracle variants
    return oracle_decide(obs, role, {}, 8, p);
}

// Role heuristic standing in for the remote role-assignment policy during
// offline seeding: threatened agents execute, confident scorers command.
// A seeded random slice keeps the replay buffer's role mix diverse.
inline Role oracle_role(const Observation& obs, Rng& rng, const OracleParams& p = {}) {
    if (rng.uniform() < p.explore_role_prob)
        return static_cast<Role>(rng.uniform_int(0, 2));
    double d_e = dist(obs.self_pos, obs.enemy_pos);
    if (d_e < p.delta_threat) return Role::Executor;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(obs.targets.size()); ++i)
        best = std::max(best, oracle_target_score(obs, i, p));
    return best >= 0.15 ? Role::Commander : Role::Coordinator;
}

// Deterministic reasoning text for transcripts and labeling; the
// recommendation sits last so the parser picks it up.
inline std::string oracle_reasoning_text(const Observation& obs, Role role, int goal,
                                         const OracleParams& p) {
    std::string s = "Threat check: pursuer at distance " +
                    detail::fmt3(dist(obs.self_pos, obs.enemy_pos)) + " m.\n";
    s += "Scores per region:\n";
    for (int i = 0; i < static_cast<int>(obs.targets.size()); ++i)
        s += "  region " + std::to_string(i) + " at " + detail::fmt_pair(obs.targets[i].pos) +
             ": " + detail::fmt3(oracle_target_score(obs, i, p)) + "\n";
    s += std::string("Acting as ") + role_name(role) + ".\n";
    s += "I recommend going to target [" + detail::fmt3(obs.targets[goal].pos.x) + ", " +
         detail::fmt3(obs.targets[goal].pos.y) + "]";
    return s;
}

} // namespace rsw
