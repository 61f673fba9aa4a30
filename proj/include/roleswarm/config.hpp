#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"

#include "roleswarm/datagen.hpp"
#include "roleswarm/intent.hpp"
#include "roleswarm/nav.hpp"
#include "roleswarm/remote.hpp"
#include "roleswarm/rmix.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Helper: read a key if present, leave the default otherwise.
template <typename T>
void get_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

// --- world ---

inline json to_json(const WorldConfig& c) {
    json obstacles = json::array();
    for (const auto& o : c.obstacles)
        obstacles.push_back({{"x", o.center.x}, {"y", o.center.y}, {"radius", o.radius}});
    return json{{"n_agents", c.n_agents},
                {"n_targets", c.n_targets},
                {"episode_length", c.episode_length},
                {"decision_period", c.decision_period},
                {"dt", c.dt},
                {"delta_obs", c.delta_obs},
                {"omega_d", c.omega_d},
                {"target_radius", c.target_radius},
                {"formation_tolerance", c.formation_tolerance},
                {"formation_radius", c.formation_radius},
                {"c_min", c.c_min},
                {"c_max", c.c_max},
                {"safe_distance", c.safe_distance},
                {"collision_radius", c.collision_radius},
                {"agent_vmax", c.agent_vmax},
                {"enemy_vmax", c.enemy_vmax},
                {"enemy_accel", c.enemy_accel},
                {"enemy_cluster_radius", c.enemy_cluster_radius},
                {"arena_half", c.arena_half},
                {"spawn_half", c.spawn_half},
                {"formation_reward_range", c.formation_reward_range},
                {"navigation_reward_range", c.navigation_reward_range},
                {"weights",
                 {{"w_f", c.weights.w_f},
                  {"w_n", c.weights.w_n},
                  {"w_tc", c.weights.w_tc},
                  {"w_e", c.weights.w_e},
                  {"w_c", c.weights.w_c}}},
                {"obstacles", obstacles},
                {"strict", c.strict}};
}

inline WorldConfig world_from_json(const json& j) {
    WorldConfig c;
    get_opt(j, "n_agents", c.n_agents);
    get_opt(j, "n_targets", c.n_targets);
    get_opt(j, "episode_length", c.episode_length);
    get_opt(j, "decision_period", c.decision_period);
    get_opt(j, "dt", c.dt);
    get_opt(j, "delta_obs", c.delta_obs);
    get_opt(j, "omega_d", c.omega_d);
    get_opt(j, "target_radius", c.target_radius);
    get_opt(j, "formation_tolerance", c.formation_tolerance);
    get_opt(j, "formation_radius", c.formation_radius);
    get_opt(j, "c_min", c.c_min);
    get_opt(j, "c_max", c.c_max);
    get_opt(j, "safe_distance", c.safe_distance);
    get_opt(j, "collision_radius", c.collision_radius);
    get_opt(j, "agent_vmax", c.agent_vmax);
    get_opt(j, "enemy_vmax", c.enemy_vmax);
    get_opt(j, "enemy_accel", c.enemy_accel);
    get_opt(j, "enemy_cluster_radius", c.enemy_cluster_radius);
    get_opt(j, "arena_half", c.arena_half);
    get_opt(j, "spawn_half", c.spawn_half);
    get_opt(j, "formation_reward_range", c.formation_reward_range);
    get_opt(j, "navigation_reward_range", c.navigation_reward_range);
    get_opt(j, "strict", c.strict);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        get_opt(w, "w_f", c.weights.w_f);
        get_opt(w, "w_n", c.weights.w_n);
        get_opt(w, "w_tc", c.weights.w_tc);
        get_opt(w, "w_e", c.weights.w_e);
        get_opt(w, "w_c", c.weights.w_c);
    }
    if (j.contains("obstacles")) {
        c.obstacles.clear();
        for (const auto& o : j.at("obstacles"))
            c.obstacles.push_back({{o.at("x").get<double>(), o.at("y").get<double>()},
                                   o.at("radius").get<double>()});
    }
    return c;
}

// --- training ---

inline json to_json(const TrainConfig& c) {
    return json{{"gamma", c.gamma},
                {"alpha", c.alpha},
                {"batch", c.batch},
                {"tau", c.tau},
                {"mixing_hidden", c.mixing_hidden},
                {"n_pre", c.n_pre},
                {"n_epoch", c.n_epoch},
                {"qnet_hidden", c.qnet_hidden},
                {"buffer_capacity", c.buffer_capacity},
                {"eps_start", c.eps_start},
                {"eps_end", c.eps_end},
                {"mixer_activation", c.mixer_activation == MixAct::Relu ? "relu" : "identity"},
                {"mixer_kind", c.mixer_kind == MixerKind::Rmix ? "rmix" : "vdn"},
                {"max_agents", c.max_agents},
                {"divergence_threshold", c.divergence_threshold},
                {"reward_scale", c.reward_scale}};
}

inline TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    get_opt(j, "gamma", c.gamma);
    get_opt(j, "alpha", c.alpha);
    get_opt(j, "batch", c.batch);
    get_opt(j, "tau", c.tau);
    get_opt(j, "mixing_hidden", c.mixing_hidden);
    get_opt(j, "n_pre", c.n_pre);
    get_opt(j, "n_epoch", c.n_epoch);
    get_opt(j, "qnet_hidden", c.qnet_hidden);
    get_opt(j, "buffer_capacity", c.buffer_capacity);
    get_opt(j, "eps_start", c.eps_start);
    get_opt(j, "eps_end", c.eps_end);
    get_opt(j, "max_agents", c.max_agents);
    get_opt(j, "divergence_threshold", c.divergence_threshold);
    get_opt(j, "reward_scale", c.reward_scale);
    if (j.contains("mixer_activation"))
        c.mixer_activation =
            j.at("mixer_activation").get<std::string>() == "identity" ? MixAct::Identity
                                                                      : MixAct::Relu;
    if (j.contains("mixer_kind"))
        c.mixer_kind =
            j.at("mixer_kind").get<std::string>() == "vdn" ? MixerKind::Vdn : MixerKind::Rmix;
    return c;
}

// --- oracle / nav / filter / endpoint ---

inline json to_json(const OracleParams& c) {
    return json{{"lambda_enemy", c.lambda_enemy},
                {"delta_threat", c.delta_threat},
                {"lambda_team", c.lambda_team},
                {"lambda_cap", c.lambda_cap},
                {"explore_role_prob", c.explore_role_prob}};
}

inline OracleParams oracle_from_json(const json& j) {
    OracleParams c;
    get_opt(j, "lambda_enemy", c.lambda_enemy);
    get_opt(j, "delta_threat", c.delta_threat);
    get_opt(j, "lambda_team", c.lambda_team);
    get_opt(j, "lambda_cap", c.lambda_cap);
    get_opt(j, "explore_role_prob", c.explore_role_prob);
    return c;
}

inline json to_json(const NavParams& c) {
    return json{{"k_attract", c.k_attract},
                {"k_damp", c.k_damp},
                {"k_repulse", c.k_repulse},
                {"a_max", c.a_max},
                {"safe_distance", c.safe_distance}};
}

inline NavParams nav_from_json(const json& j) {
    NavParams c;
    get_opt(j, "k_attract", c.k_attract);
    get_opt(j, "k_damp", c.k_damp);
    get_opt(j, "k_repulse", c.k_repulse);
    get_opt(j, "a_max", c.a_max);
    get_opt(j, "safe_distance", c.safe_distance);
    return c;
}

inline json to_json(const FilterConfig& c) {
    return json{{"tau_r", c.tau_r},
                {"l_min", c.l_min},
                {"l_max", c.l_max},
                {"anomalous_sequences", c.anomalous_sequences},
                {"check_control_chars", c.check_control_chars},
                {"check_unbalanced", c.check_unbalanced},
                {"w_goal", c.w_goal},
                {"w_clean", c.w_clean},
                {"w_length", c.w_length},
                {"w_reward", c.w_reward},
                {"pass_threshold", c.pass_threshold},
                {"min_samples", c.min_samples},
                {"reward_mode", c.reward_mode == RewardMode::Window ? "window" : "episode"}};
}

inline FilterConfig filter_from_json(const json& j) {
    FilterConfig c;
    get_opt(j, "tau_r", c.tau_r);
    get_opt(j, "l_min", c.l_min);
    get_opt(j, "l_max", c.l_max);
    get_opt(j, "anomalous_sequences", c.anomalous_sequences);
    get_opt(j, "check_control_chars", c.check_control_chars);
    get_opt(j, "check_unbalanced", c.check_unbalanced);
    get_opt(j, "w_goal", c.w_goal);
    get_opt(j, "w_clean", c.w_clean);
    get_opt(j, "w_length", c.w_length);
    get_opt(j, "w_reward", c.w_reward);
    get_opt(j, "pass_threshold", c.pass_threshold);
    get_opt(j, "min_samples", c.min_samples);
    if (j.contains("reward_mode"))
        c.reward_mode = j.at("reward_mode").get<std::string>() == "episode"
                            ? RewardMode::Episode
                            : RewardMode::Window;
    return c;
}

inline json to_json(const EndpointConfig& c) {
    return json{{"base_url", c.base_url},       {"model", c.model},
                {"temperature", c.temperature}, {"max_tokens", c.max_tokens},
                {"timeout_ms", c.timeout_ms},   {"max_retries", c.max_retries},
                {"backoff_base_ms", c.backoff_base_ms}, {"max_in_flight", c.max_in_flight}};
}

inline EndpointConfig endpoint_from_json(const json& j) {
    EndpointConfig c;
    get_opt(j, "base_url", c.base_url);
    get_opt(j, "model", c.model);
    get_opt(j, "api_key", c.api_key);
    get_opt(j, "temperature", c.temperature);
    get_opt(j, "max_tokens", c.max_tokens);
    get_opt(j, "timeout_ms", c.timeout_ms);
    get_opt(j, "max_retries", c.max_retries);
    get_opt(j, "backoff_base_ms", c.backoff_base_ms);
    get_opt(j, "max_in_flight", c.max_in_flight);
    return c;
}

// --- merged run configuration ---

struct RunConfig {
    WorldConfig world;
    TrainConfig train;
    OracleParams oracle;
    NavParams nav;
    FilterConfig filter;
    EndpointConfig endpoint;
    std::string backend = "oracle"; // intent/consensus backend: oracle | remote
    std::uint64_t seed = 7;
    std::string out_dir = "runs/out";
    std::string few_shot_path; // optional worked-example corpus for prompts

    void validate() const {
        world.validate();
        train.validate();
        if (backend != "oracle" && backend != "remote")
            throw ConfigError("backend must be 'oracle' or 'remote'");
    }
};

inline json to_json(const RunConfig& c) {
    return json{{"world", to_json(c.world)},   {"train", to_json(c.train)},
                {"oracle", to_json(c.oracle)}, {"nav", to_json(c.nav)},
                {"filter", to_json(c.filter)}, {"endpoint", to_json(c.endpoint)},
                {"backend", c.backend},        {"seed", c.seed},
                {"out_dir", c.out_dir},        {"few_shot_path", c.few_shot_path}};
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("world")) c.world = world_from_json(j.at("world"));
    if (j.contains("train")) c.train = train_from_json(j.at("train"));
    if (j.contains("oracle")) c.oracle = oracle_from_json(j.at("oracle"));
    if (j.contains("nav")) c.nav = nav_from_json(j.at("nav"));
    if (j.contains("filter")) c.filter = filter_from_json(j.at("filter"));
    if (j.contains("endpoint")) c.endpoint = endpoint_from_json(j.at("endpoint"));
    get_opt(j, "backend", c.backend);
    get_opt(j, "seed", c.seed);
    get_opt(j, "out_dir", c.out_dir);
    get_opt(j, "few_shot_path", c.few_shot_path);
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("invalid config JSON in " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

// --- checkpoint container ---

inline json mlp_to_json(const Mlp& m) { return json{{"dims", m.dims}, {"params", m.params}}; }

inline Mlp mlp_from_json(const json& j) {
    Mlp m;
    m.dims = j.at("dims").get<std::vector<int>>();
    m.params = j.at("params").get<std::vector<double>>();
    if (static_cast<int>(m.params.size()) != Mlp::param_count(m.dims))
        throw ConfigError("checkpoint: parameter count does not match dims");
    return m;
}

inline json mixer_to_json(const Mixer& m) {
    return json{{"n_agents", m.n_agents},
                {"hidden", m.hidden},
                {"input_dim", m.input_dim},
                {"out_act", m.out_act == MixAct::Relu ? "relu" : "identity"},
                {"w1_gen", mlp_to_json(m.w1_gen)},
                {"b1_gen", mlp_to_json(m.b1_gen)},
                {"w2_gen", mlp_to_json(m.w2_gen)},
                {"b2_gen", mlp_to_json(m.b2_gen)}};
}

inline Mixer mixer_from_json(const json& j) {
    Mixer m;
    m.n_agents = j.at("n_agents").get<int>();
    m.hidden = j.at("hidden").get<int>();
    m.input_dim = j.at("input_dim").get<int>();
    m.out_act = j.at("out_act").get<std::string>() == "identity" ? MixAct::Identity
                                                                 : MixAct::Relu;
    m.w1_gen = mlp_from_json(j.at("w1_gen"));
    m.b1_gen = mlp_from_json(j.at("b1_gen"));
    m.w2_gen = mlp_from_json(j.at("w2_gen"));
    m.b2_gen = mlp_from_json(j.at("b2_gen"));
    return m;
}

struct Checkpoint {
    int version = 1;
    RmixParams params;
    RmixParams target;
    TrainConfig train;
    int n_agents = 0;
    int n_targets = 0;
    int updates = 0;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json j{{"version", ck.version},
           {"train", to_json(ck.train)},
           {"n_agents", ck.n_agents},
           {"n_targets", ck.n_targets},
           {"updates", ck.updates},
           {"qnet", mlp_to_json(ck.params.qnet)},
           {"mixer", mixer_to_json(ck.params.mixer)},
           {"target_qnet", mlp_to_json(ck.target.qnet)},
           {"target_mixer", mixer_to_json(ck.target.mixer)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    in >> j;
    Checkpoint ck;
    ck.version = j.at("version").get<int>();
    if (ck.version != 1)
        throw ConfigError("unsupported checkpoint version " + std::to_string(ck.version));
    ck.train = train_from_json(j.at("train"));
    ck.n_agents = j.at("n_agents").get<int>();
    ck.n_targets = j.at("n_targets").get<int>();
    ck.updates = j.at("updates").get<int>();
    ck.params.qnet = mlp_from_json(j.at("qnet"));
    ck.params.mixer = mixer_from_json(j.at("mixer"));
    ck.target.qnet = mlp_from_json(j.at("target_qnet"));
    ck.target.mixer = mixer_from_json(j.at("target_mixer"));
    return ck;
}

// --- replay buffer serialization (one transition per line) ---

inline void save_buffer(const ReplayBuffer& buffer, const FeatureSpec& spec,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write buffer: " + path);
    json header{{"kind", "replay_buffer"},
                {"n_agents", spec.n_agents},
                {"n_targets", spec.n_targets},
                {"max_agents", spec.max_agents}};
    out << header.dump() << "\n";
    for (std::size_t k = 0; k < buffer.size(); ++k) {
        const Transition& t = buffer[k];
        json j{{"s", t.state_feats},
               {"s_next", t.next_state_feats},
               {"obs", t.obs_feats},
               {"roles", t.roles},
               {"intents", t.intents},
               {"reward", t.reward},
               {"terminal", t.terminal},
               {"origin", t.origin == Transition::Origin::OfflineOracle ? "offline-oracle"
                                                                        : "online"}};
        out << j.dump() << "\n";
    }
}

inline void load_buffer(ReplayBuffer& buffer, const FeatureSpec& spec,
                        const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open buffer: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty buffer file: " + path);
    json header = json::parse(line);
    if (header.value("kind", "") != "replay_buffer")
        throw ConfigError("not a replay buffer file: " + path);
    if (header.at("n_agents").get<int>() != spec.n_agents ||
        header.at("n_targets").get<int>() != spec.n_targets ||
        header.at("max_agents").get<int>() != spec.max_agents)
        throw ConfigError("buffer shape does not match the current configuration");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Transition t;
        t.state_feats = j.at("s").get<std::vector<double>>();
        t.next_state_feats = j.at("s_next").get<std::vector<double>>();
        t.obs_feats = j.at("obs").get<std::vector<std::vector<double>>>();
        t.roles = j.at("roles").get<std::vector<int>>();
        t.intents = j.at("intents").get<std::vector<int>>();
        t.reward = j.at("reward").get<double>();
        t.terminal = j.at("terminal").get<bool>();
        t.origin = j.at("origin").get<std::string>() == "offline-oracle"
                       ? Transition::Origin::OfflineOracle
                       : Transition::Origin::Online;
        buffer.push(std::move(t));
    }
}

// --- labeled sample serialization (one record per line) ---

inline void save_samples(const std::vector<SampleRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write samples: " + path);
    for (const auto& r : records) {
        json targets = json::array();
        for (const auto& t : r.obs.targets) targets.push_back({t.pos.x, t.pos.y, t.urgency});
        json j{{"episode", r.episode},
               {"frame", r.frame},
               {"agent", r.agent_id},
               {"obs",
                {{"self", {r.obs.self_pos.x, r.obs.self_pos.y, r.obs.self_vel.x,
                           r.obs.self_vel.y}},
                 {"enemy", {r.obs.enemy_pos.x, r.obs.enemy_pos.y, r.obs.enemy_vel.x,
                            r.obs.enemy_vel.y}},
                 {"targets", targets}}},
               {"obs_digest", r.obs_digest},
               {"role", role_name(r.role)},
               {"labeled_goal", r.labeled_goal},
               {"labeled_coords", {r.labeled_coords.x, r.labeled_coords.y}},
               {"reasoning", r.reasoning},
               {"instruction", r.instruction},
               {"reward", r.reward}};
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline Role role_from_name(const std::string& name) {
    if (name == "commander") return Role::Commander;
    if (name == "coordinator") return Role::Coordinator;
    if (name == "executor") return Role::Executor;
    throw ConfigError("unknown role name: " + name);
}

inline std::vector<SampleRecord> load_samples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open samples: " + path);
    std::vector<SampleRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        SampleRecord r;
        r.episode = j.at("episode").get<int>();
        r.frame = j.at("frame").get<int>();
        r.agent_id = j.at("agent").get<int>();
        const json& obs = j.at("obs");
        auto self = obs.at("self").get<std::vector<double>>();
        auto enemy = obs.at("enemy").get<std::vector<double>>();
        r.obs.self_pos = {self[0], self[1]};
        r.obs.self_vel = {self[2], self[3]};
        r.obs.enemy_pos = {enemy[0], enemy[1]};
        r.obs.enemy_vel = {enemy[2], enemy[3]};
        for (const auto& t : obs.at("targets"))
            r.obs.targets.push_back({{t[0].get<double>(), t[1].get<double>()},
                                     t[2].get<double>()});
        r.obs_digest = j.at("obs_digest").get<std::uint64_t>();
        r.role = role_from_name(j.at("role").get<std::string>());
        r.labeled_goal = j.at("labeled_goal").get<int>();
        auto lc = j.at("labeled_coords").get<std::vector<double>>();
        r.labeled_coords = {lc[0], lc[1]};
        r.reasoning = j.at("reasoning").get<std::string>();
        r.instruction = j.at("instruction").get<std::string>();
        r.reward = j.at("reward").get<double>();
        records.push_back(std::move(r));
    }
    return records;
}

// Few-shot worked examples: JSONL with "instruction" and "output" fields.
// rho entries are rendered into the prompt bundle in file order.
inline void load_few_shot(PromptBundle& bundle, const std::string& path, int rho = 1) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open few-shot corpus: " + path);
    std::string line;
    int taken = 0;
    while (taken < rho && std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        bundle.few_shot.push_back("Situation:\n" + j.at("instruction").get<std::string>() +
                                  "\nAnswer:\n" + j.at("output").get<std::string>());
        ++taken;
    }
}

} // namespace rsw
