#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "roleswarm/consensus.hpp"
#include "roleswarm/rng.hpp"
#include "roleswarm/world.hpp"

using namespace rsw;

namespace {
GlobalState chain_state() {
    GlobalState s;
    s.agents = {{0, {0, 0}, {}}, {1, {2, 0}, {}}, {2, {4, 0}, {}}};
    s.enemy = {{9, 9}, {}};
    for (const Vec2& g : target_grid()) {
        int id = static_cast<int>(s.targets.size());
        s.targets.push_back({id, g, 1.0, 1.5});
    }
    return s;
}
} // namespace

TEST_CASE("comm graph edges are exactly the sub-range pairs") {
    auto s = chain_state();
    auto g = build_comm_graph(s, 3.0);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 2));
    CHECK_FALSE(g.has_edge(0, 2));
    CHECK(g.edge_count() == 2);

    // Co-located swarm: complete graph.
    GlobalState co;
    for (int i = 0; i < 5; ++i) co.agents.push_back({i, {1, 1}, {}});
    auto gc = build_comm_graph(co, 3.0);
    CHECK(gc.edge_count() == 10);
}

TEST_CASE("comm graph matches pairwise oracle on random layouts") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        GlobalState s;
        int n = 6 + trial % 5;
        for (int i = 0; i < n; ++i)
            s.agents.push_back({i, {rng.uniform(-8, 8), rng.uniform(-8, 8)}, {}});
        auto g = build_comm_graph(s, 3.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                bool want = dist(s.agents[i].pos, s.agents[j].pos) < 3.0;
                CHECK(g.has_edge(i, j) == want);
            }
    }
}

TEST_CASE("exchange delivers exactly one-hop frames in id order") {
    auto s = chain_state();
    auto g = build_comm_graph(s, 3.0);
    std::vector<MessageFrame> frames(3);
    for (int i = 0; i < 3; ++i)
        frames[i] = {i, {i, Role::Executor}, s.agents[i].pos, s.agents[i].vel};

    auto infos = exchange(s, frames, g);
    REQUIRE(infos.size() == 3);
    REQUIRE(infos[0].neighbors.size() == 1);
    CHECK(infos[0].neighbors[0].agent_id == 1);
    REQUIRE(infos[1].neighbors.size() == 2);
    CHECK(infos[1].neighbors[0].agent_id == 0);
    CHECK(infos[1].neighbors[1].agent_id == 2);

    int deliveries = 0;
    for (const auto& info : infos) deliveries += static_cast<int>(info.neighbors.size());
    CHECK(deliveries == 2 * g.edge_count());

    // Isolated agent.
    GlobalState iso = s;
    iso.agents[2].pos = {9, -9};
    auto infos2 = exchange(iso, frames, build_comm_graph(iso, 3.0));
    CHECK(infos2[2].neighbors.empty());
}

TEST_CASE("decision frame always returns legal goals") {
    WorldConfig cfg;
    auto s = init_world(cfg, 7);
    auto policies = oracle_policies(cfg, Rng(7).fork(1));
    auto frame = run_decision_frame(s, cfg, policies);
    REQUIRE(frame.goals.size() == 8);
    for (int g : frame.goals) {
        CHECK(g >= 0);
        CHECK(g < static_cast<int>(s.targets.size()));
    }
    for (const auto& rec : frame.records) CHECK(rec.final_goal >= 0);
}

TEST_CASE("garbage stage-2 output resolves through the fallback ladder") {
    WorldConfig cfg;
    auto s = init_world(cfg, 11);
    auto policies = oracle_policies(cfg, Rng(11).fork(1));
    policies.consensus = [](int, const LocalInfo&, Role, const Intent&) {
        return ConsensusOutput{"region 8", ConsensusDecision::illegal()};
    };
    auto frame = run_decision_frame(s, cfg, policies);
    auto graph = build_comm_graph(s, cfg.delta_obs);

    for (int i = 0; i < 8; ++i) {
        REQUIRE(frame.goals[i] >= 0);
        if (frame.roles[i] == Role::Commander) {
            // Commanders keep their stage-1 intent.
            CHECK(frame.goals[i] == frame.intents[i]);
            CHECK(frame.records[i].source == DecisionSource::FallbackSelf);
        } else if (frame.records[i].source == DecisionSource::FallbackSuperior) {
            // Adopted goal must equal the resolved goal of the lowest-id
            // superior neighbor (commanders first, then coordinators for
            // executors). Superiors all self-reverted to their intents.
            int expect = -1;
            for (Role want : {Role::Commander, Role::Coordinator}) {
                if (frame.roles[i] == Role::Coordinator && want == Role::Coordinator)
                    break;
                for (int j : graph.adj[i]) {
                    if (frame.roles[j] != want) continue;
                    expect = frame.goals[j];
                    break;
                }
                if (expect >= 0) break;
            }
            REQUIRE(expect >= 0);
            CHECK(frame.goals[i] == expect);
        } else {
            // No superior in range: self-revert.
            CHECK(frame.goals[i] == frame.intents[i]);
        }
    }
}

TEST_CASE("decisions are local to the connected component") {
    WorldConfig cfg;
    cfg.n_agents = 8;
    cfg.strict = false;

    // Two tight clusters far apart; the second run displaces the far cluster.
    auto make_state = [&](Vec2 far_shift) {
        GlobalState s;
        for (int i = 0; i < 4; ++i)
            s.agents.push_back({i, Vec2{-6.0 + 0.4 * i, -6.0}, {}});
        for (int i = 4; i < 8; ++i)
            s.agents.push_back(
                {i, Vec2{5.0 + 0.4 * (i - 4) + far_shift.x, 6.0 + far_shift.y}, {}});
        s.enemy = {{0, 0}, {}};
        for (const Vec2& g : target_grid()) {
            int id = static_cast<int>(s.targets.size());
            s.targets.push_back({id, g, 1.0, 1.5});
        }
        return s;
    };

    auto policies = oracle_policies(cfg, Rng(5).fork(2));
    // Roles must not depend on the call counter for this comparison.
    policies.role = [](int id, const Observation&) {
        return id % 4 == 0 ? Role::Commander : (id % 4 == 1 ? Role::Coordinator
                                                            : Role::Executor);
    };
    auto a = run_decision_frame(make_state({0, 0}), cfg, policies);
    auto b = run_decision_frame(make_state({1.5, -1.0}), cfg, policies);
    for (int i = 0; i < 4; ++i) {
        CHECK(a.goals[i] == b.goals[i]); // near cluster unaffected
        CHECK(a.intents[i] == b.intents[i]);
    }
}

TEST_CASE("frame transcript carries digests and stage-2 text") {
    WorldConfig cfg;
    auto s = init_world(cfg, 3);
    auto policies = oracle_policies(cfg, Rng(3).fork(1));
    auto frame = run_decision_frame(s, cfg, policies);
    for (int i = 0; i < 8; ++i) {
        CHECK(frame.records[i].agent_id == i);
        CHECK(frame.records[i].obs_digest == observation_digest(observe(s, i)));
        CHECK_FALSE(frame.records[i].stage2_text.empty());
        CHECK(frame.records[i].final_goal == frame.goals[i]);
    }
}
