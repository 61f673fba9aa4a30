#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "roleswarm/intent.hpp"
#include "roleswarm/rng.hpp"
#include "roleswarm/world.hpp"

using namespace rsw;

namespace {
Observation grid_observation() {
    Observation o;
    o.self_pos = {1.0, -2.0};
    o.self_vel = {0.2, 0.0};
    o.enemy_pos = {-3.0, 4.0};
    o.enemy_vel = {0.1, -0.1};
    for (const Vec2& g : target_grid()) o.targets.push_back({g, 1.0});
    return o;
}

std::vector<Vec2> active_positions(const Observation& o) {
    std::vector<Vec2> v;
    for (const auto& t : o.targets) v.push_back(t.pos);
    return v;
}

int count_occurrences(const std::string& hay, const std::string& needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}
} // namespace

TEST_CASE("init prompt renders deterministically with all targets") {
    auto bundle = default_prompt_bundle();
    auto obs = grid_observation();
    std::string a = render_init_prompt(bundle, obs);
    std::string b = render_init_prompt(bundle, obs);
    CHECK(a == b);

    CHECK(count_occurrences(a, "urgency 1.000") == 9); // one line per region
    // Enemy distance figure recomputed independently.
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", dist(obs.self_pos, obs.enemy_pos));
    CHECK(a.find(std::string("distance ") + buf) != std::string::npos);
    CHECK(a.find("{observation}") == std::string::npos); // no unresolved holes
    CHECK(a.find("{few_shot}") == std::string::npos);
}

TEST_CASE("consensus prompt includes role, intent, neighbors and guidance") {
    auto bundle = default_prompt_bundle();
    auto obs = grid_observation();

    std::vector<NeighborSummary> none;
    std::string empty_nb =
        render_cons_prompt(bundle, obs, Role::Coordinator, {3, Role::Coordinator}, none);
    CHECK(empty_nb.find("no neighbors within communication range") != std::string::npos);
    CHECK(count_occurrences(empty_nb, bundle.cot_guidance) == 1);
    CHECK(empty_nb.find("coordinator") != std::string::npos);

    std::vector<NeighborSummary> nbs{
        {2, {0, 1}, {0, 0}, 5, Role::Commander},
        {4, {1, 0}, {0, 0}, 7, Role::Executor},
    };
    std::string with_nb =
        render_cons_prompt(bundle, obs, Role::Executor, {0, Role::Executor}, nbs);
    CHECK(with_nb.find("agent 2 (commander)") != std::string::npos);
    CHECK(with_nb.find("agent 4 (executor)") != std::string::npos);
    CHECK(with_nb ==
          render_cons_prompt(bundle, obs, Role::Executor, {0, Role::Executor}, nbs));
}

TEST_CASE("parse_decision accepts grid recommendations and rejects the rest") {
    auto obs = grid_observation();
    auto targets = active_positions(obs);

    auto d = parse_decision("I recommend going to target [-8,8]", targets);
    REQUIRE(d.is_goal);
    CHECK(obs.targets[d.target_id].pos == Vec2{-8, 8});

    // Last pair wins when reasoning mentions several candidates.
    auto last = parse_decision(
        "Candidates considered: [0, 0] and (8, 8). I recommend going to target [8, -8]",
        targets);
    REQUIRE(last.is_goal);
    CHECK(obs.targets[last.target_id].pos == Vec2{8, -8});

    CHECK_FALSE(parse_decision("region 8", targets).is_goal);
    CHECK(parse_decision("region 8", targets).reason == IllegalReason::NoCoordinates);
    CHECK(parse_decision("", targets).reason == IllegalReason::NoCoordinates);
    CHECK(parse_decision("target point #8, #8", targets).reason ==
          IllegalReason::NoCoordinates);
    CHECK(parse_decision("go to [7.3, 8]", targets).reason == IllegalReason::NotATarget);
    CHECK(parse_decision("go to [8, 8)", targets).reason == IllegalReason::Malformed);

    // One-decimal rounding: near-grid noise inside 0.05 rounds onto the grid.
    CHECK(parse_decision("target (8.04, -8.0)", targets).is_goal);
    CHECK_FALSE(parse_decision("target (8.06, -8.0)", targets).is_goal);
}

TEST_CASE("parse_decision never accepts an off-target coordinate") {
    auto obs = grid_observation();
    auto targets = active_positions(obs);
    Rng rng(404);
    const char* shells[] = {"go to [%0, %1]", "maybe (%0,%1)?", "%0 %1", "point [ %0 , %1 ]"};
    for (int t = 0; t < 4000; ++t) {
        double x = rng.uniform(-12, 12);
        double y = rng.uniform(-12, 12);
        char sx[32], sy[32];
        std::snprintf(sx, sizeof(sx), "%.2f", x);
        std::snprintf(sy, sizeof(sy), "%.2f", y);
        std::string text = shells[t % 4];
        auto sub = [&](const std::string& key, const std::string& val) {
            auto pos = text.find(key);
            while (pos != std::string::npos) {
                text.replace(pos, key.size(), val);
                pos = text.find(key);
            }
        };
        sub("%0", sx);
        sub("%1", sy);
        auto d = parse_decision(text, targets);
        if (d.is_goal) {
            // Accepted only when the rounded pair sits exactly on an active target.
            auto deci = [](double v) { return std::llround(v * 10.0); };
            double px = std::strtod(sx, nullptr), py = std::strtod(sy, nullptr);
            CHECK(deci(px) == deci(targets[d.target_id].x));
            CHECK(deci(py) == deci(targets[d.target_id].y));
        }
    }
}

TEST_CASE("oracle stage-1 equals brute-force score argmax") {
    OracleParams p;
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Observation o;
        o.self_pos = {rng.uniform(-9, 9), rng.uniform(-9, 9)};
        o.enemy_pos = {rng.uniform(-9, 9), rng.uniform(-9, 9)};
        for (const Vec2& g : target_grid()) o.targets.push_back({g, rng.uniform(0, 1)});

        Rng unused(0);
        int got = oracle_intent(o, Role::Commander, unused, p);
        // Exhaustive scoring oracle, lowest id on ties.
        int best = 0;
        double best_score = -1e300;
        for (int i = 0; i < 9; ++i) {
            double kappa = o.targets[i].urgency;
            double d = dist(o.self_pos, o.targets[i].pos);
            double threat =
                std::max(0.0, 1.0 - dist(o.targets[i].pos, o.enemy_pos) / p.delta_threat);
            double s = kappa / (1.0 + d) - p.lambda_enemy * threat;
            if (s > best_score) {
                best_score = s;
                best = i;
            }
        }
        CHECK(got == best);
        // All roles reduce to the argmax without neighborhood information.
        CHECK(oracle_intent(o, Role::Coordinator, unused, p) == best);
        CHECK(oracle_intent(o, Role::Executor, unused, p) == best);
    }
}

TEST_CASE("oracle score dominance and edge cases") {
    OracleParams p;
    Observation o;
    o.self_pos = {0, 0};
    o.enemy_pos = {100, 100}; // far: no threat discount
    o.targets.push_back({{1, 0}, 1.0});
    o.targets.push_back({{15, 0}, 1.0});
    Rng rng(0);
    CHECK(oracle_intent(o, Role::Commander, rng, p) == 0);

    Observation single;
    single.self_pos = {0, 0};
    single.enemy_pos = {5, 5};
    single.targets.push_back({{8, 8}, 1.0});
    CHECK(oracle_intent(single, Role::Commander, rng, p) == 0);
    CHECK(oracle_intent(single, Role::Coordinator, rng, p) == 0);
    CHECK(oracle_intent(single, Role::Executor, rng, p) == 0);

    Observation none;
    none.self_pos = {0, 0};
    CHECK_THROWS_AS(oracle_intent(none, Role::Commander, rng, p), std::domain_error);
}

TEST_CASE("oracle consensus follows superiors and respects the size cap") {
    OracleParams p;
    auto obs = grid_observation();

    // Executor adopts the lowest-id commander with room.
    std::vector<NeighborSummary> nbs{
        {1, {0, 0}, {0, 0}, 3, Role::Commander},
        {0, {1, 1}, {0, 0}, 5, Role::Commander},
    };
    CHECK(oracle_decide(obs, Role::Executor, nbs, 8, p) == 5);

    // A full group is skipped: 8 neighbors already heading to goal 5.
    std::vector<NeighborSummary> full;
    for (int k = 0; k < 8; ++k) full.push_back({k + 2, {0, 0}, {0, 0}, 5, Role::Executor});
    full.push_back({1, {0, 0}, {0, 0}, 5, Role::Commander});
    int pick = oracle_decide(obs, Role::Executor, full, 8, p);
    CHECK(pick != 5);

    // Coordinator defers to a commander but not to coordinators.
    std::vector<NeighborSummary> coord_nbs{
        {2, {0, 0}, {0, 0}, 4, Role::Coordinator},
        {6, {0, 0}, {0, 0}, 7, Role::Commander},
    };
    CHECK(oracle_decide(obs, Role::Coordinator, coord_nbs, 8, p) == 7);
}

TEST_CASE("oracle reasoning text parses back to the recommended goal") {
    OracleParams p;
    auto obs = grid_observation();
    Rng rng(1);
    int goal = oracle_intent(obs, Role::Commander, rng, p);
    std::string text = oracle_reasoning_text(obs, Role::Commander, goal, p);
    auto parsed = parse_decision(text, active_positions(obs));
    REQUIRE(parsed.is_goal);
    CHECK(parsed.target_id == goal);
}
