#pragma once

#include <compare>
#include <string>
#include <vector>

namespace rsw {

// The three functional roles. Enum order doubles as the tie-break order for
// greedy role selection (lowest index wins ties).
enum class Role : int { Commander = 0, Coordinator = 1, Executor = 2 };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::Commander:   return "commander";
        case Role::Coordinator: return "coordinator";
        case Role::Executor:    return "executor";
    }
    return "?";
}

// Higher rank = more authority in the fallback ladder.
inline int authority_rank(Role r) {
    switch (r) {
        case Role::Commander:   return 2;
        case Role::Coordinator: return 1;
        case Role::Executor:    return 0;
    }
    return -1;
}

// Commander > Coordinator > Executor; reflexive equality.
inline std::strong_ordering role_authority(Role a, Role b) {
    return authority_rank(a) <=> authority_rank(b);
}

// Stage-1 proposal: target goal plus the role the agent operates under.
struct Intent {
    int goal = -1; // target id
    Role role = Role::Executor;
};

constexpr int kIllegalGoal = -1;

// Where a final goal came from.
enum class DecisionSource : int { LLMOutput = 0, FallbackSelf = 1, FallbackSuperior = 2 };

inline const char* decision_source_name(DecisionSource s) {
    switch (s) {
        case DecisionSource::LLMOutput:        return "llm_output";
        case DecisionSource::FallbackSelf:     return "fallback_self";
        case DecisionSource::FallbackSuperior: return "fallback_superior";
    }
    return "?";
}

struct ConsensusDecision {
    int goal = kIllegalGoal; // target id, or kIllegalGoal
    DecisionSource source = DecisionSource::LLMOutput;

    bool legal() const { return goal != kIllegalGoal; }

    static ConsensusDecision illegal() { return {kIllegalGoal, DecisionSource::LLMOutput}; }
    static ConsensusDecision from_output(int goal) { return {goal, DecisionSource::LLMOutput}; }
};

struct NeighborDecision {
    int agent_id = -1;
    Role role = Role::Executor;
    ConsensusDecision decision;
};

// Hierarchical contingency resolution for illegal consensus outputs.
//   Commander:   reverts to its own initial intent.
//   Coordinator: adopts a legal Commander neighbor's goal, else self-reverts.
//   Executor:    adopts a legal Commander, else a legal Coordinator, else
//                self-reverts.
// Among several valid superiors the lowest agent id wins; neighbor lists are
// expected in ascending id order, and we enforce the tie-break explicitly so
// unsorted input still resolves deterministically. Total by construction:
// never returns an illegal decision when own_initial is valid.
inline ConsensusDecision fallback_resolve(Role own_role,
                                          const Intent& own_initial,
                                          const ConsensusDecision& own_output,
                                          const std::vector<NeighborDecision>& neighbors) {
    if (own_output.legal()) return own_output;

    auto lowest_id_with_role = [&](Role wanted) -> const NeighborDecision* {
        const NeighborDecision* best = nullptr;
        for (const auto& n : neighbors) {
            if (n.role != wanted || !n.decision.legal()) continue;
            if (best == nullptr || n.agent_id < best->agent_id) best = &n;
        }
        return best;
    };

    if (own_role == Role::Coordinator || own_role == Role::Executor) {
        if (const auto* c = lowest_id_with_role(Role::Commander))
            return {c->decision.goal, DecisionSource::FallbackSuperior};
    }
    if (own_role == Role::Executor) {
        if (const auto* c = lowest_id_with_role(Role::Coordinator))
            return {c->decision.goal, DecisionSource::FallbackSuperior};
    }
    return {own_initial.goal, DecisionSource::FallbackSelf};
}

} // namespace rsw
