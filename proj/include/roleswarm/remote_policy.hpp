#pragma once

#include <future>
#include <memory>
#include <semaphore>
#include <vector>

#include "roleswarm/consensus.hpp"
#include "roleswarm/datagen.hpp"
#include "roleswarm/remote.hpp"

namespace rsw {

namespace detail {

// Bounded-concurrency fan-out: one async task per item, at most max_in_flight
// requests on the wire. Results land in input order.
template <typename In, typename Fn>
auto parallel_map(std::span<const In> items, int max_in_flight, Fn fn)
    -> std::vector<decltype(fn(items[0]))> {
    using Out = decltype(fn(items[0]));
    auto gate = std::make_shared<std::counting_semaphore<>>(
        std::max(1, max_in_flight));
    std::vector<std::future<Out>> futures;
    futures.reserve(items.size());
    for (const In& item : items) {
        futures.push_back(std::async(std::launch::async, [gate, &item, &fn] {
            gate->acquire();
            struct Release {
                std::counting_semaphore<>* g;
                ~Release() { g->release(); }
            } release{gate.get()};
            return fn(item);
        }));
    }
    std::vector<Out> out;
    out.reserve(items.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

inline ChatRequest make_request(const PromptBundle& bundle, const EndpointConfig& cfg,
                                std::string user_content) {
    ChatRequest req;
    req.model = cfg.model;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.messages = {{"system", bundle.task_instruction},
                    {"user", std::move(user_content)}};
    return req;
}

} // namespace detail

// Frame policies backed by a chat-completions endpoint for both stages.
// Transport failures and unparseable replies become illegal outputs, never
// frame aborts; the fallback ladder settles them. Role selection stays with
// whatever selector the caller installs afterwards.
inline FramePolicies remote_policies(const WorldConfig& world, const EndpointConfig& endpoint,
                                     const PromptBundle& bundle,
                                     const OracleParams& oracle = {}) {
    FramePolicies p;
    p.oracle = oracle;
    auto ep = std::make_shared<EndpointConfig>(endpoint);
    auto bd = std::make_shared<PromptBundle>(bundle);

    p.intent_batch = [ep, bd](std::span<const Observation> obs) {
        auto texts = detail::parallel_map(obs, ep->max_in_flight, [&](const Observation& o) {
            return remote_complete(detail::make_request(*bd, *ep, render_init_prompt(*bd, o)),
                                   *ep);
        });
        std::vector<int> goals(obs.size(), kIllegalGoal);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (!texts[i].ok) continue;
            std::vector<Vec2> active;
            for (const auto& t : obs[i].targets) active.push_back(t.pos);
            ParsedDecision d = parse_decision(texts[i].text, active);
            if (d.is_goal) goals[i] = d.target_id;
        }
        return goals;
    };

    p.consensus_batch = [ep, bd, cap = world.c_max](std::span<const ConsensusInput> inputs) {
        (void)cap;
        auto results =
            detail::parallel_map(inputs, ep->max_in_flight, [&](const ConsensusInput& in) {
                std::string prompt = render_cons_prompt(*bd, in.info->own_obs, in.role,
                                                        in.own_intent, in.info->neighbors);
                return remote_complete(detail::make_request(*bd, *ep, std::move(prompt)), *ep);
            });
        std::vector<ConsensusOutput> out(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (!results[i].ok) {
                out[i].raw_text = "<transport-failure: " + results[i].error + ">";
                out[i].decision = ConsensusDecision::illegal();
                continue;
            }
            out[i].raw_text = results[i].text;
            std::vector<Vec2> active;
            for (const auto& t : inputs[i].info->own_obs.targets) active.push_back(t.pos);
            ParsedDecision d = parse_decision(results[i].text, active);
            out[i].decision = d.is_goal ? ConsensusDecision::from_output(d.target_id)
                                        : ConsensusDecision::illegal();
        }
        return out;
    };
    return p;
}

// Labeler backed by the same endpoint: the reply text is stored verbatim as
// the reasoning; failures yield (-1, "") and are weeded out by the filter.
inline LabelerFn remote_labeler(const PromptBundle& bundle, const EndpointConfig& endpoint) {
    auto ep = std::make_shared<EndpointConfig>(endpoint);
    auto bd = std::make_shared<PromptBundle>(bundle);
    return [ep, bd](int, const LocalInfo& info, Role, const Intent&,
                    const std::string& instruction) {
        ChatRequest req;
        req.model = ep->model;
        req.temperature = ep->temperature;
        req.max_tokens = ep->max_tokens;
        req.messages = {{"system", bd->task_instruction}, {"user", instruction}};
        RemoteResult r = remote_complete(req, *ep);
        if (!r.ok) return std::make_pair(kIllegalGoal, std::string());
        std::vector<Vec2> active;
        for (const auto& t : info.own_obs.targets) active.push_back(t.pos);
        ParsedDecision d = parse_decision(r.text, active);
        return std::make_pair(d.is_goal ? d.target_id : kIllegalGoal, r.text);
    };
}

} // namespace rsw
