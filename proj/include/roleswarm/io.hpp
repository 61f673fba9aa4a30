#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "roleswarm/episode.hpp"
#include "roleswarm/world.hpp"

namespace rsw {

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        path_ = path;
    }
    void write(const nlohmann::ordered_json& j) { out_ << j.dump() << "\n"; }
    void close() {
        out_.close();
        if (out_.fail()) throw std::runtime_error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path);
        out_ << header << "\n";
    }
    template <typename... Ts>
    void row(const Ts&... vals) {
        bool first = true;
        ((out_ << (first ? "" : ","), first = false, out_ << vals), ...);
        out_ << "\n";
    }
    void raw_line(const std::string& line) { out_ << line << "\n"; }

private:
    std::ofstream out_;
};

// Full-precision doubles so traces round-trip and byte-compare cleanly.
inline nlohmann::ordered_json vec2_json(Vec2 v) {
    return nlohmann::ordered_json::array({v.x, v.y});
}

inline nlohmann::ordered_json state_snapshot_json(const GlobalState& s) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    auto agents = nlohmann::ordered_json::array();
    for (const auto& a : s.agents)
        agents.push_back({a.pos.x, a.pos.y, a.vel.x, a.vel.y});
    j["agents"] = std::move(agents);
    j["enemy"] = {s.enemy.pos.x, s.enemy.pos.y, s.enemy.vel.x, s.enemy.vel.y};
    auto targets = nlohmann::ordered_json::array();
    for (const auto& t : s.targets) targets.push_back({t.pos.x, t.pos.y, t.urgency});
    j["targets"] = std::move(targets);
    return j;
}

inline nlohmann::ordered_json step_trace_json(const StepEvent& ev) {
    nlohmann::ordered_json j = state_snapshot_json(ev.state);
    j["reward"] = {{"total", ev.reward.total},
                   {"formation", ev.reward.formation},
                   {"navigation", ev.reward.navigation},
                   {"completion", ev.reward.completion},
                   {"interference", ev.reward.interference},
                   {"collision", ev.reward.collision}};
    j["goals"] = std::vector<int>(ev.goals.begin(), ev.goals.end());
    auto roles = nlohmann::ordered_json::array();
    for (Role r : ev.roles) roles.push_back(role_name(r));
    j["roles"] = std::move(roles);
    return j;
}

inline nlohmann::ordered_json frame_record_json(int episode, int frame_index,
                                                const FrameRecord& r) {
    nlohmann::ordered_json j;
    j["episode"] = episode;
    j["frame"] = frame_index;
    j["agent"] = r.agent_id;
    j["obs_digest"] = r.obs_digest;
    j["intent_goal"] = r.intent_goal;
    j["role"] = role_name(r.role);
    j["stage2_text"] = r.stage2_text;
    j["final_goal"] = r.final_goal;
    j["source"] = decision_source_name(r.source);
    return j;
}

// Every run directory gets the resolved config, the seed, and a manifest
// sufficient to reproduce the run bit for bit.
inline void write_manifest(const std::string& dir, const std::string& command,
                           const std::vector<std::string>& args,
                           const nlohmann::json& resolved_config, std::uint64_t seed,
                           const std::vector<std::string>& outputs) {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["args"] = args;
    m["seed"] = seed;
    m["outputs"] = outputs;
    m["config"] = resolved_config;
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
    out << m.dump(2) << "\n";
}

} // namespace rsw
