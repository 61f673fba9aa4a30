#pragma once

#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "roleswarm/config.hpp"
#include "roleswarm/datagen.hpp"
#include "roleswarm/episode.hpp"
#include "roleswarm/io.hpp"
#include "roleswarm/remote_policy.hpp"
#include "roleswarm/train.hpp"

namespace rsw::cli {

// Exit codes: 0 success, 1 run failure, 2 usage/config error.
constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kUsageError = 2;

namespace detail {

inline std::uint64_t episode_seed(std::uint64_t master, int episode) {
    return Rng(master).fork(episode).next_u64();
}

inline PromptBundle bundle_for(const RunConfig& cfg) {
    PromptBundle b = default_prompt_bundle();
    if (!cfg.few_shot_path.empty()) load_few_shot(b, cfg.few_shot_path);
    return b;
}

// Policies per the configured backend; role selection comes from the oracle
// heuristic unless a checkpoint is supplied.
inline FramePolicies make_policies(const RunConfig& cfg, std::uint64_t role_salt,
                                   const std::shared_ptr<Checkpoint>& ck) {
    FramePolicies p;
    if (cfg.backend == "remote") {
        EndpointConfig ep = cfg.endpoint;
        ep.apply_env_overrides();
        p = remote_policies(cfg.world, ep, bundle_for(cfg), cfg.oracle);
        FramePolicies oracle_p =
            oracle_policies(cfg.world, Rng(cfg.seed).fork(role_salt), cfg.oracle);
        p.role = oracle_p.role;
    } else {
        p = oracle_policies(cfg.world, Rng(cfg.seed).fork(role_salt), cfg.oracle);
    }
    if (ck) {
        FeatureSpec spec{cfg.world.n_agents, cfg.world.n_targets, ck->train.max_agents};
        p.role = [ck, spec](int agent_id, const Observation& o) {
            auto feats = obs_features(o, agent_id, spec);
            auto q = role_values(ck->params.qnet, feats);
            Rng dummy(0);
            return select_role(q, 0.0, dummy);
        };
    }
    return p;
}

struct EvalOutcome {
    std::vector<double> returns;
    std::vector<double> completions;
};

inline EvalOutcome run_eval_episodes(const RunConfig& cfg, int episodes,
                                     const std::shared_ptr<Checkpoint>& ck,
                                     JsonlWriter* trace, JsonlWriter* frames) {
    EvalOutcome out;
    for (int ep = 0; ep < episodes; ++ep) {
        FramePolicies policies = make_policies(cfg, 7700 + ep, ck);
        EpisodeHooks hooks;
        if (trace)
            hooks.on_step = [&, ep](const StepEvent& ev) {
                auto j = step_trace_json(ev);
                j["episode"] = ep;
                trace->write(j);
            };
        if (frames)
            hooks.on_frame = [&, ep](const FrameEvent& ev) {
                for (const auto& r : ev.frame.records)
                    frames->write(frame_record_json(ep, ev.frame_index, r));
            };
        EpisodeResult res = run_episode(cfg.world, episode_seed(cfg.seed, ep), policies,
                                        cfg.nav, hooks);
        out.returns.push_back(res.total_return);
        out.completions.push_back(res.completion_total);
    }
    return out;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace detail

// --- simulate ------------------------------------------------------------

inline int cmd_simulate(const RunConfig& cfg, int episodes,
                        const std::vector<std::string>& argv_echo,
                        const std::string& checkpoint_path = "") {
    cfg.validate();
    ensure_dir(cfg.out_dir);
    std::shared_ptr<Checkpoint> ck;
    if (!checkpoint_path.empty())
        ck = std::make_shared<Checkpoint>(load_checkpoint(checkpoint_path));

    JsonlWriter trace(cfg.out_dir + "/trace.jsonl");
    JsonlWriter frames(cfg.out_dir + "/frames.jsonl");
    auto outcome = detail::run_eval_episodes(cfg, episodes, ck, &trace, &frames);
    trace.close();
    frames.close();

    CsvWriter metrics(cfg.out_dir + "/metrics.csv", "episode,return,completion");
    for (int ep = 0; ep < episodes; ++ep)
        metrics.row(ep, outcome.returns[ep], outcome.completions[ep]);

    write_manifest(cfg.out_dir, "simulate", argv_echo, to_json(cfg), cfg.seed,
                   {"trace.jsonl", "frames.jsonl", "metrics.csv"});
    std::printf("simulate: %d episode(s), mean return %.3f\n", episodes,
                detail::mean(outcome.returns));
    return kOk;
}

// --- seed-offline ----------------------------------------------------------

inline int cmd_seed_offline(const RunConfig& cfg, const std::vector<std::string>& argv_echo) {
    cfg.validate();
    ensure_dir(cfg.out_dir);
    ReplayBuffer buffer(cfg.train.buffer_capacity);
    seed_offline(cfg.world, cfg.train, cfg.oracle, cfg.nav, Rng(cfg.seed).fork(1).next_u64(),
                 buffer);
    FeatureSpec spec{cfg.world.n_agents, cfg.world.n_targets, cfg.train.max_agents};
    save_buffer(buffer, spec, cfg.out_dir + "/buffer.jsonl");
    write_manifest(cfg.out_dir, "seed-offline", argv_echo, to_json(cfg), cfg.seed,
                   {"buffer.jsonl"});
    std::printf("seed-offline: %zu transitions stored\n", buffer.size());
    return kOk;
}

// --- train-rmix ------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg, const std::string& buffer_path,
                     const std::vector<std::string>& argv_echo) {
    cfg.validate();
    ensure_dir(cfg.out_dir);
    ReplayBuffer buffer(cfg.train.buffer_capacity);
    FeatureSpec spec{cfg.world.n_agents, cfg.world.n_targets, cfg.train.max_agents};
    if (!buffer_path.empty()) {
        load_buffer(buffer, spec, buffer_path);
    } else if (cfg.train.n_pre > 0) {
        seed_offline(cfg.world, cfg.train, cfg.oracle, cfg.nav,
                     Rng(cfg.seed).fork(1).next_u64(), buffer);
    }
    TrainResult result = train(cfg.world, cfg.train, cfg.oracle, cfg.nav,
                               Rng(cfg.seed).fork(2).next_u64(), buffer);

    CsvWriter loss(cfg.out_dir + "/loss.csv", "update,loss");
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
        loss.row(i, result.loss_curve[i]);
    CsvWriter returns(cfg.out_dir + "/returns.csv", "episode,return");
    for (std::size_t i = 0; i < result.return_curve.size(); ++i)
        returns.row(i, result.return_curve[i]);

    Checkpoint ck{1, result.params, result.target, cfg.train, cfg.world.n_agents,
                  cfg.world.n_targets, result.updates};
    save_checkpoint(ck, cfg.out_dir + "/checkpoint.json");
    write_manifest(cfg.out_dir, "train-rmix", argv_echo, to_json(cfg), cfg.seed,
                   {"loss.csv", "returns.csv", "checkpoint.json"});
    std::printf("train-rmix: %d updates, %zu episodes\n", result.updates,
                result.return_curve.size());
    return kOk;
}

// --- eval -------------------------------------------------------------------

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path, int episodes,
                    const std::vector<std::string>& argv_echo) {
    cfg.validate();
    if (checkpoint_path.empty()) throw ConfigError("eval requires --checkpoint");
    ensure_dir(cfg.out_dir);
    auto ck = std::make_shared<Checkpoint>(load_checkpoint(checkpoint_path));
    auto outcome = detail::run_eval_episodes(cfg, episodes, ck, nullptr, nullptr);
    CsvWriter metrics(cfg.out_dir + "/metrics.csv", "episode,return,completion");
    for (int ep = 0; ep < episodes; ++ep)
        metrics.row(ep, outcome.returns[ep], outcome.completions[ep]);
    write_manifest(cfg.out_dir, "eval", argv_echo, to_json(cfg), cfg.seed, {"metrics.csv"});
    std::printf("eval: n=%d episodes=%d mean return %.3f mean completion %.3f\n",
                cfg.world.n_agents, episodes, detail::mean(outcome.returns),
                detail::mean(outcome.completions));
    return kOk;
}

// --- collect-data ------------------------------------------------------------

inline int cmd_collect(const RunConfig& cfg, int samples,
                       const std::vector<std::string>& argv_echo) {
    cfg.validate();
    ensure_dir(cfg.out_dir);
    PromptBundle bundle = detail::bundle_for(cfg);
    FramePolicies policies = detail::make_policies(cfg, 4400, nullptr);
    LabelerFn labeler;
    if (cfg.backend == "remote") {
        EndpointConfig ep = cfg.endpoint;
        ep.apply_env_overrides();
        labeler = remote_labeler(bundle, ep);
    } else {
        labeler = oracle_labeler(bundle, cfg.oracle, cfg.world.c_max);
    }
    auto records = collect_samples(cfg.world, cfg.nav, policies, bundle, labeler, samples,
                                   Rng(cfg.seed).fork(3).next_u64(), cfg.filter.reward_mode);
    save_samples(records, cfg.out_dir + "/raw_samples.jsonl");
    write_manifest(cfg.out_dir, "collect-data", argv_echo, to_json(cfg), cfg.seed,
                   {"raw_samples.jsonl"});
    std::printf("collect-data: %zu raw samples\n", records.size());
    return kOk;
}

// --- filter-data ---------------------------------------------------------------

inline int cmd_filter(const RunConfig& cfg, const std::string& input,
                      const std::vector<std::string>& argv_echo) {
    cfg.validate();
    if (input.empty()) throw ConfigError("filter-data requires --input");
    ensure_dir(cfg.out_dir);
    auto raw = load_samples(input);
    auto kept = filter_samples(raw, cfg.filter);
    write_filter_report(raw, cfg.filter, cfg.out_dir + "/filter_report.csv");
    if (kept.empty()) {
        std::fprintf(stderr, "filter-data: no sample passed the filter\n");
        return kRunFailure;
    }
    export_corpus(kept, cfg.filter, cfg.out_dir + "/corpus.jsonl");
    write_manifest(cfg.out_dir, "filter-data", argv_echo, to_json(cfg), cfg.seed,
                   {"filter_report.csv", "corpus.jsonl"});
    std::printf("filter-data: kept %zu of %zu\n", kept.size(), raw.size());
    return kOk;
}

// --- ablate -----------------------------------------------------------------

namespace detail {

// Role-set restriction for the role-count study. The fourth configuration
// adds a decoy: each frame the agent nearest the enemy abandons scoring and
// baits the pursuer toward itself.
inline FramePolicies roles_variant_policies(const RunConfig& cfg, int n_roles, int ep_index) {
    FramePolicies p = oracle_policies(cfg.world, Rng(cfg.seed).fork(8800 + ep_index),
                                      cfg.oracle);
    RoleSelectorFn base_role = p.role;
    if (n_roles == 1) {
        p.role = [](int, const Observation&) { return Role::Executor; };
    } else if (n_roles == 2) {
        p.role = [base_role](int id, const Observation& o) {
            Role r = base_role(id, o);
            return r == Role::Coordinator ? Role::Executor : r;
        };
    } else {
        p.role = base_role;
    }
    if (n_roles == 4) {
        // Decoy overlay: consensus override toward the target nearest the
        // enemy for the agent currently closest to it.
        ConsensusPolicyFn base = p.consensus;
        p.consensus = [base](int id, const LocalInfo& info, Role role, const Intent& own) {
            bool nearest = true;
            double own_d = dist(info.own_obs.self_pos, info.own_obs.enemy_pos);
            for (const auto& nb : info.neighbors)
                if (dist(nb.pos, info.own_obs.enemy_pos) < own_d) nearest = false;
            if (nearest && own_d < 6.0) {
                int bait = 0;
                double best = std::numeric_limits<double>::infinity();
                for (int t = 0; t < static_cast<int>(info.own_obs.targets.size()); ++t) {
                    double d = dist(info.own_obs.targets[t].pos, info.own_obs.enemy_pos);
                    if (d < best) {
                        best = d;
                        bait = t;
                    }
                }
                ConsensusOutput out;
                out.raw_text = "Decoy maneuver: drawing the pursuer toward region " +
                               std::to_string(bait) + ".\nI recommend going to target [" +
                               rsw::detail::fmt3(info.own_obs.targets[bait].pos.x) + ", " +
                               rsw::detail::fmt3(info.own_obs.targets[bait].pos.y) + "]";
                out.decision = ConsensusDecision::from_output(bait);
                return out;
            }
            return base(id, info, role, own);
        };
    }
    return p;
}

} // namespace detail

inline int cmd_ablate(RunConfig cfg, const std::string& variant, int episodes,
                      const std::string& checkpoint_path,
                      const std::vector<std::string>& argv_echo) {
    cfg.validate();
    ensure_dir(cfg.out_dir);

    if (variant == "swarm") {
        if (checkpoint_path.empty())
            throw ConfigError("ablate swarm requires --checkpoint (trained role net)");
        auto ck = std::make_shared<Checkpoint>(load_checkpoint(checkpoint_path));
        CsvWriter detail_csv(cfg.out_dir + "/ablate_swarm_detail.csv",
                             "n_agents,episode,return,completion");
        CsvWriter summary(cfg.out_dir + "/ablate_swarm.csv",
                          "n_agents,episodes,mean_return,mean_completion");
        for (int n = 8; n <= 11; ++n) {
            RunConfig c = cfg;
            c.world.n_agents = n;
            auto outcome = detail::run_eval_episodes(c, episodes, ck, nullptr, nullptr);
            for (int ep = 0; ep < episodes; ++ep)
                detail_csv.row(n, ep, outcome.returns[ep], outcome.completions[ep]);
            summary.row(n, episodes, detail::mean(outcome.returns),
                        detail::mean(outcome.completions));
        }
        write_manifest(cfg.out_dir, "ablate", argv_echo, to_json(cfg), cfg.seed,
                       {"ablate_swarm.csv", "ablate_swarm_detail.csv"});
        return kOk;
    }

    if (variant == "roles") {
        CsvWriter detail_csv(cfg.out_dir + "/ablate_roles_detail.csv",
                             "n_roles,episode,return,completion");
        CsvWriter summary(cfg.out_dir + "/ablate_roles.csv",
                          "n_roles,episodes,mean_return,mean_completion");
        for (int n_roles = 1; n_roles <= 4; ++n_roles) {
            std::vector<double> returns, completions;
            for (int ep = 0; ep < episodes; ++ep) {
                FramePolicies policies = detail::roles_variant_policies(cfg, n_roles, ep);
                EpisodeResult res = run_episode(cfg.world, detail::episode_seed(cfg.seed, ep),
                                                policies, cfg.nav);
                returns.push_back(res.total_return);
                completions.push_back(res.completion_total);
                detail_csv.row(n_roles, ep, res.total_return, res.completion_total);
            }
            summary.row(n_roles, episodes, detail::mean(returns), detail::mean(completions));
        }
        write_manifest(cfg.out_dir, "ablate", argv_echo, to_json(cfg), cfg.seed,
                       {"ablate_roles.csv", "ablate_roles_detail.csv"});
        return kOk;
    }

    if (variant == "mixer") {
        auto run_one = [&](MixerKind kind) {
            RunConfig c = cfg;
            c.train.mixer_kind = kind;
            ReplayBuffer buffer(c.train.buffer_capacity);
            if (c.train.n_pre > 0)
                seed_offline(c.world, c.train, c.oracle, c.nav,
                             Rng(c.seed).fork(1).next_u64(), buffer);
            return train(c.world, c.train, c.oracle, c.nav, Rng(c.seed).fork(2).next_u64(),
                         buffer);
        };
        TrainResult rmix_run = run_one(MixerKind::Rmix);
        TrainResult vdn_run = run_one(MixerKind::Vdn);
        std::size_t rows = std::max(rmix_run.loss_curve.size(), vdn_run.loss_curve.size());
        CsvWriter curves(cfg.out_dir + "/ablate_mixer.csv", "update,rmix_loss,vdn_loss");
        for (std::size_t i = 0; i < rows; ++i) {
            std::string a = i < rmix_run.loss_curve.size()
                                ? std::to_string(rmix_run.loss_curve[i]) : "";
            std::string b = i < vdn_run.loss_curve.size()
                                ? std::to_string(vdn_run.loss_curve[i]) : "";
            curves.raw_line(std::to_string(i) + "," + a + "," + b);
        }
        write_manifest(cfg.out_dir, "ablate", argv_echo, to_json(cfg), cfg.seed,
                       {"ablate_mixer.csv"});
        return kOk;
    }

    throw ConfigError("unknown ablate variant '" + variant +
                      "' (expected roles|swarm|mixer)");
}

// --- argument wiring --------------------------------------------------------

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"decentralized swarm coordination simulator and role trainer"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, buffer_path, input, backend;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false, backend_set = false;
    int episodes = -1, epochs = -1, pre_episodes = -1, samples = -1, n_agents = -1;
    std::string mixer_kind, variant;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory")->each([&](std::string) {
            out_set = true;
        });
        sub->add_option("--seed", seed, "master seed")->each([&](std::string) {
            seed_set = true;
        });
        sub->add_option("--n-agents", n_agents, "swarm size");
    };

    CLI::App* sim = app.add_subcommand("simulate", "run episodes and export traces");
    add_common(sim);
    sim->add_option("--episodes", episodes, "episode count (default 1)");
    sim->add_option("--backend", backend, "oracle|remote")->each([&](std::string) {
        backend_set = true;
    });
    sim->add_option("--checkpoint", checkpoint, "role-net checkpoint for role selection");

    CLI::App* seedoff = app.add_subcommand("seed-offline", "collect offline transitions");
    add_common(seedoff);
    seedoff->add_option("--pre-episodes", pre_episodes, "offline episode count");

    CLI::App* tr = app.add_subcommand("train-rmix", "train the role-value stack");
    add_common(tr);
    tr->add_option("--mixer", mixer_kind, "rmix|vdn");
    tr->add_option("--epochs", epochs, "online episode count");
    tr->add_option("--pre-episodes", pre_episodes, "offline seeding episode count");
    tr->add_option("--buffer", buffer_path, "pre-collected buffer.jsonl");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a trained checkpoint");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
    ev->add_option("--episodes", episodes, "episode count (default 30)");

    CLI::App* col = app.add_subcommand("collect-data", "collect labeled samples");
    add_common(col);
    col->add_option("--samples", samples, "minimum sample count");
    col->add_option("--backend", backend, "oracle|remote labeler")->each([&](std::string) {
        backend_set = true;
    });

    CLI::App* fil = app.add_subcommand("filter-data", "filter samples into a corpus");
    add_common(fil);
    fil->add_option("--input", input, "raw_samples.jsonl path")->required();

    CLI::App* abl = app.add_subcommand("ablate", "run a comparison matrix");
    add_common(abl);
    abl->add_option("variant", variant, "roles|swarm|mixer")->required();
    abl->add_option("--episodes", episodes, "episodes per variant row (default 30)");
    abl->add_option("--checkpoint", checkpoint, "checkpoint for swarm variant");
    abl->add_option("--epochs", epochs, "training episodes for mixer variant");
    abl->add_option("--pre-episodes", pre_episodes, "offline seeding for mixer variant");

    std::vector<std::string> argv_echo = args;
    try {
        // CLI11 consumes the vector back-to-front.
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (seed_set) cfg.seed = seed;
        if (out_set) cfg.out_dir = out_dir;
        if (backend_set) cfg.backend = backend;
        if (n_agents > 0) cfg.world.n_agents = n_agents;
        if (epochs >= 0) cfg.train.n_epoch = epochs;
        if (pre_episodes >= 0) cfg.train.n_pre = pre_episodes;
        if (!mixer_kind.empty()) {
            if (mixer_kind != "rmix" && mixer_kind != "vdn")
                throw ConfigError("--mixer must be rmix or vdn");
            cfg.train.mixer_kind = mixer_kind == "vdn" ? MixerKind::Vdn : MixerKind::Rmix;
        }

        if (sim->parsed())
            return cmd_simulate(cfg, episodes > 0 ? episodes : 1, argv_echo, checkpoint);
        if (seedoff->parsed()) return cmd_seed_offline(cfg, argv_echo);
        if (tr->parsed()) return cmd_train(cfg, buffer_path, argv_echo);
        if (ev->parsed())
            return cmd_eval(cfg, checkpoint, episodes > 0 ? episodes : 30, argv_echo);
        if (col->parsed())
            return cmd_collect(cfg, samples > 0 ? samples : cfg.filter.min_samples,
                               argv_echo);
        if (fil->parsed()) return cmd_filter(cfg, input, argv_echo);
        if (abl->parsed())
            return cmd_ablate(cfg, variant, episodes > 0 ? episodes : 30, checkpoint,
                              argv_echo);
        return kUsageError;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kUsageError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRunFailure;
    }
}

} // namespace rsw::cli
