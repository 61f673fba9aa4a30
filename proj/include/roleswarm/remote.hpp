#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace rsw {

struct ChatMessage {
    std::string speaker_role; // "system" | "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages; // nonempty, first entry is the task instruction
    double temperature = 0.2;
    int max_tokens = 512;
};

struct ChatResponse {
    std::string content;
    std::string finish_reason;
};

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8080"; // scheme://host:port
    std::string model = "local-consensus";
    std::string api_key;       // optional bearer credential
    double temperature = 0.2;
    int max_tokens = 512;
    int timeout_ms = 10000;
    int max_retries = 2;       // retries after the first attempt
    int backoff_base_ms = 250; // doubles per retry
    int max_in_flight = 4;     // parallel completion cap

    // Environment overrides are restricted to endpoint and credential.
    void apply_env_overrides() {
        if (const char* url = std::getenv("ROLESWARM_ENDPOINT")) base_url = url;
        if (const char* key = std::getenv("ROLESWARM_API_KEY")) api_key = key;
    }
};

struct RemoteResult {
    bool ok = false;
    std::string text;  // response content when ok
    std::string error; // transport-failure description otherwise

    static RemoteResult success(std::string t) { return {true, std::move(t), {}}; }
    static RemoteResult failure(std::string e) { return {false, {}, std::move(e)}; }
};

// POST {base_url}/v1/chat/completions, reading choices[0].message.content.
// Transport failures (connect/timeout/non-2xx/malformed body) are retried
// with exponential backoff up to max_retries; the final failure is returned
// as a value for the caller to map to an illegal decision.
inline RemoteResult remote_complete(const ChatRequest& req, const EndpointConfig& cfg) {
    if (req.messages.empty()) return RemoteResult::failure("empty message list");

    nlohmann::json body;
    body["model"] = req.model.empty() ? cfg.model : req.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : req.messages)
        body["messages"].push_back({{"role", m.speaker_role}, {"content", m.content}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            int delay = cfg.backoff_base_ms * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(cfg.base_url);
        client.set_connection_timeout(0, cfg.timeout_ms * 1000);
        client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!cfg.api_key.empty())
            headers.emplace("Authorization", "Bearer " + cfg.api_key);

        auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        try {
            auto parsed = nlohmann::json::parse(res->body);
            const auto& choices = parsed.at("choices");
            if (!choices.is_array() || choices.empty()) {
                last_error = "response has no choices";
                continue;
            }
            return RemoteResult::success(
                choices.at(0).at("message").at("content").get<std::string>());
        } catch (const std::exception& e) {
            last_error = std::string("malformed response body: ") + e.what();
            continue;
        }
    }
    return RemoteResult::failure(last_error);
}

} // namespace rsw
