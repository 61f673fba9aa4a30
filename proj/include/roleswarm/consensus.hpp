#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "roleswarm/intent.hpp"
#include "roleswarm/rng.hpp"
#include "roleswarm/roles.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

// One broadcast per agent per frame: stage-1 proposal plus a pose summary.
struct MessageFrame {
    int sender = -1;
    Intent intent;
    Vec2 pos;
    Vec2 vel;
};

// Everything agent i knows when refining: its own observation and the one-hop
// neighbors' frames, ascending sender id.
struct LocalInfo {
    Observation own_obs;
    std::vector<NeighborSummary> neighbors;
};

struct CommGraph {
    int n = 0;
    std::vector<std::vector<int>> adj; // ascending, symmetric

    bool has_edge(int i, int j) const {
        for (int k : adj[i])
            if (k == j) return true;
        return false;
    }
    int edge_count() const {
        int total = 0;
        for (const auto& a : adj) total += static_cast<int>(a.size());
        return total / 2;
    }
};

// Undirected edges exactly where agents sit strictly inside delta_obs.
inline CommGraph build_comm_graph(const GlobalState& s, double delta_obs) {
    CommGraph g;
    g.n = static_cast<int>(s.agents.size());
    g.adj.resize(g.n);
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (dist(s.agents[i].pos, s.agents[j].pos) < delta_obs) {
                g.adj[i].push_back(j);
                g.adj[j].push_back(i);
            }
    return g;
}

// One-hop delivery: agent i receives exactly its neighbors' frames.
inline std::vector<LocalInfo> exchange(const GlobalState& s,
                                       std::span<const MessageFrame> frames,
                                       const CommGraph& graph) {
    if (frames.size() != s.agents.size())
        throw std::invalid_argument("exchange: one frame per agent required");
    std::vector<LocalInfo> infos(s.agents.size());
    for (int i = 0; i < graph.n; ++i) {
        infos[i].own_obs = observe(s, i);
        for (int j : graph.adj[i]) {
            const MessageFrame& f = frames[j];
            infos[i].neighbors.push_back(
                {f.sender, f.pos, f.vel, f.intent.goal, f.intent.role});
        }
    }
    return infos;
}

// Stage-2 backend output: the raw text (for transcripts and data collection)
// plus the parsed decision. Backend failures surface as illegal decisions.
struct ConsensusOutput {
    std::string raw_text;
    ConsensusDecision decision;
};

// Pluggable backends. Stage-1 may return kIllegalGoal on failure; the frame
// substitutes the scripted scorer's pick so initial intents are always valid.
using IntentPolicyFn = std::function<int(int agent_id, const Observation&)>;
using RoleSelectorFn = std::function<Role(int agent_id, const Observation&)>;
using ConsensusPolicyFn = std::function<ConsensusOutput(
    int agent_id, const LocalInfo&, Role own_role, const Intent& own_intent)>;

struct ConsensusInput {
    int agent_id = -1;
    const LocalInfo* info = nullptr;
    Role role = Role::Executor;
    Intent own_intent;
};

// Batch variants let a backend dispatch all per-agent calls of a stage at
// once (remote backends run them concurrently under an in-flight cap);
// results are always applied in agent-id order.
using IntentBatchFn = std::function<std::vector<int>(std::span<const Observation>)>;
using ConsensusBatchFn =
    std::function<std::vector<ConsensusOutput>(std::span<const ConsensusInput>)>;

struct FramePolicies {
    IntentPolicyFn intent;
    RoleSelectorFn role;
    ConsensusPolicyFn consensus;
    IntentBatchFn intent_batch;       // optional, overrides intent when set
    ConsensusBatchFn consensus_batch; // optional, overrides consensus when set
    OracleParams oracle; // scorer used for stage-1 failure substitution
};

// Per-agent transcript entry, the raw feed for data collection.
struct FrameRecord {
    int agent_id = -1;
    std::uint64_t obs_digest = 0;
    int intent_goal = kIllegalGoal;
    Role role = Role::Executor;
    std::string stage2_text;
    int final_goal = kIllegalGoal;
    DecisionSource source = DecisionSource::LLMOutput;
};

struct FrameResult {
    std::vector<int> goals;          // legal target id per agent
    std::vector<Role> roles;
    std::vector<int> intents;        // stage-1 goals (post substitution)
    std::vector<FrameRecord> records;
    std::vector<LocalInfo> infos;    // kept for labeling pipelines
};

inline std::uint64_t observation_digest(const Observation& o) {
    std::vector<double> flat{o.self_pos.x, o.self_pos.y, o.self_vel.x, o.self_vel.y,
                             o.enemy_pos.x, o.enemy_pos.y, o.enemy_vel.x, o.enemy_vel.y};
    for (const auto& t : o.targets) {
        flat.push_back(t.pos.x);
        flat.push_back(t.pos.y);
        flat.push_back(t.urgency);
    }
    return fnv1a64(flat.data(), flat.size() * sizeof(double));
}

// One complete decision frame:
//   stage 1  per-agent intents (backend or substituted scorer pick)
//   roles    per-agent role selection
//   exchange one-hop frames over the comm graph
//   stage 2  per-agent refinement (backend; failures become illegal outputs)
//   fallback hierarchical resolution, higher authority resolved first so
//            subordinates adopt already-settled superior goals
// Always returns a legal goal per agent.
inline FrameResult run_decision_frame(const GlobalState& s, const WorldConfig& cfg,
                                      const FramePolicies& policies) {
    const int n = static_cast<int>(s.agents.size());
    FrameResult out;
    out.goals.assign(n, kIllegalGoal);
    out.roles.assign(n, Role::Executor);
    out.intents.assign(n, kIllegalGoal);
    out.records.resize(n);

    std::vector<Observation> obs(n);
    for (int i = 0; i < n; ++i) obs[i] = observe(s, i);

    std::vector<int> proposed(n, kIllegalGoal);
    if (policies.intent_batch) {
        proposed = policies.intent_batch(obs);
        proposed.resize(n, kIllegalGoal);
    } else if (policies.intent) {
        for (int i = 0; i < n; ++i) proposed[i] = policies.intent(i, obs[i]);
    }

    std::vector<MessageFrame> frames(n);
    for (int i = 0; i < n; ++i) {
        int g = proposed[i];
        if (g < 0 || g >= static_cast<int>(s.targets.size()))
            g = oracle_decide(obs[i], Role::Commander, {}, cfg.c_max, policies.oracle);
        out.intents[i] = g;
        out.roles[i] = policies.role(i, obs[i]);
        frames[i] = {i, {g, out.roles[i]}, obs[i].self_pos, obs[i].self_vel};
    }

    CommGraph graph = build_comm_graph(s, cfg.delta_obs);
    out.infos = exchange(s, frames, graph);

    std::vector<ConsensusOutput> raw(n);
    if (policies.consensus_batch) {
        std::vector<ConsensusInput> inputs(n);
        for (int i = 0; i < n; ++i)
            inputs[i] = {i, &out.infos[i], out.roles[i], {out.intents[i], out.roles[i]}};
        raw = policies.consensus_batch(inputs);
        raw.resize(n);
    } else {
        for (int i = 0; i < n; ++i) {
            Intent own{out.intents[i], out.roles[i]};
            raw[i] = policies.consensus(i, out.infos[i], out.roles[i], own);
        }
    }
    for (int i = 0; i < n; ++i) {
        if (raw[i].decision.legal() &&
            (raw[i].decision.goal < 0 ||
             raw[i].decision.goal >= static_cast<int>(s.targets.size())))
            raw[i].decision = ConsensusDecision::illegal();
    }

    // Resolve by authority rank: Commanders first, then Coordinators, then
    // Executors. A subordinate consults superiors' resolved decisions and
    // peers' raw ones (the latter never matter to the ladder).
    std::vector<ConsensusDecision> resolved(n);
    for (int i = 0; i < n; ++i) resolved[i] = raw[i].decision;
    for (Role wave : {Role::Commander, Role::Coordinator, Role::Executor}) {
        for (int i = 0; i < n; ++i) {
            if (out.roles[i] != wave) continue;
            std::vector<NeighborDecision> nd;
            for (int j : graph.adj[i]) {
                bool settled = role_authority(out.roles[j], wave) > 0;
                nd.push_back({j, out.roles[j], settled ? resolved[j] : raw[j].decision});
            }
            Intent own{out.intents[i], out.roles[i]};
            resolved[i] = fallback_resolve(wave, own, raw[i].decision, nd);
        }
    }

    for (int i = 0; i < n; ++i) {
        out.goals[i] = resolved[i].goal;
        out.records[i] = {i,
                          observation_digest(obs[i]),
                          out.intents[i],
                          out.roles[i],
                          raw[i].raw_text,
                          resolved[i].goal,
                          resolved[i].source};
    }
    return out;
}

// Canned backends ---------------------------------------------------------

inline FramePolicies oracle_policies(const WorldConfig& cfg, Rng role_rng,
                                     const OracleParams& params = {}) {
    FramePolicies p;
    p.oracle = params;
    p.intent = [params](int, const Observation& o) {
        Rng unused(0);
        return oracle_intent(o, Role::Commander, unused, params);
    };
    // The role draw is a pure function of (base stream, agent, observation),
    // so a policy bundle can be reused across runs without hidden state.
    p.role = [params, role_rng](int agent_id, const Observation& o) {
        Rng r = role_rng.fork(observation_digest(o) ^
                              (static_cast<std::uint64_t>(agent_id) * 1000003ULL));
        return oracle_role(o, r, params);
    };
    p.consensus = [params, cfg](int, const LocalInfo& info, Role role,
                                const Intent&) {
        int goal = oracle_decide(info.own_obs, role, info.neighbors, cfg.c_max, params);
        ConsensusOutput out;
        out.raw_text = oracle_reasoning_text(info.own_obs, role, goal, params);
        out.decision = ConsensusDecision::from_output(goal);
        return out;
    };
    return p;
}

} // namespace rsw
