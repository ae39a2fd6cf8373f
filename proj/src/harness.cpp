#include "varibad/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "varibad/checkpoint.hpp"
#include "varibad/svg_plot.hpp"

namespace varibad {

namespace fs = std::filesystem;

namespace {

// Independent deterministic RNG streams derived from the master seed.
constexpr uint64_t kVaeSalt = 0x9e3779b97f4a7c15ULL;
constexpr uint64_t kPolicySalt = 0xc2b2ae3d27d4eb4fULL;
constexpr uint64_t kRolloutSalt = 0x165667b19e3779f9ULL;

constexpr int kPolicyHidden = 32;

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
    std::istringstream is(s);
    is >> rng;
    if (!is) throw std::runtime_error("harness: malformed RNG state in checkpoint");
}

std::vector<EpisodeRow> rows_from_trajs(const std::string& agent, const EnvConfig& env,
                                        const std::vector<std::vector<double>>& per_task_ep) {
    int n_ep = static_cast<int>(per_task_ep.front().size());
    int n = static_cast<int>(per_task_ep.size());
    std::vector<EpisodeRow> rows;
    for (int ep = 0; ep < n_ep; ++ep) {
        double sum = 0.0, sq = 0.0;
        for (const auto& v : per_task_ep) {
            sum += v[ep];
            sq += v[ep] * v[ep];
        }
        double mean = sum / n;
        double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
        rows.push_back({agent, ep + 1, mean, n > 1 ? std::sqrt(var / n) : 0.0, n});
    }
    (void)env;
    return rows;
}

}  // namespace

AgentKind agent_kind_from_string(const std::string& s) {
    if (s == "varibad") return AgentKind::Varibad;
    if (s == "rl2") return AgentKind::Rl2;
    if (s == "oracle") return AgentKind::Oracle;
    if (s == "bayes_optimal") return AgentKind::BayesOptimal;
    if (s == "posterior_sampling") return AgentKind::PosteriorSampling;
    throw std::invalid_argument("unknown agent kind: " + s);
}

std::string to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::Varibad: return "varibad";
        case AgentKind::Rl2: return "rl2";
        case AgentKind::Oracle: return "oracle";
        case AgentKind::BayesOptimal: return "bayes_optimal";
        case AgentKind::PosteriorSampling: return "posterior_sampling";
    }
    throw std::invalid_argument("unknown agent kind enum");
}

void ExperimentConfig::validate() const {
    env.validate();
    a2c.validate();
    if (vae.latent_dim <= 0 || vae.lr <= 0.0 || vae.minibatch <= 0 || vae.updates_per_iter <= 0 ||
        vae.buffer_capacity == 0)
        throw std::invalid_argument("ExperimentConfig: invalid VAE config");
    if (total_frames < 0 || eval_interval <= 0 || checkpoint_interval <= 0)
        throw std::invalid_argument("ExperimentConfig: invalid frame budgets");
    if (n_eval_episodes <= 0 || n_seeds <= 0)
        throw std::invalid_argument("ExperimentConfig: n_eval_episodes/n_seeds must be positive");
    if (output_dir.empty()) throw std::invalid_argument("ExperimentConfig: output_dir empty");
    if ((agent == AgentKind::Varibad || agent == AgentKind::Rl2) && a2c.n_steps != env.meta_horizon)
        throw std::invalid_argument("ExperimentConfig: a2c.n_steps must equal env.meta_horizon");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["env"] = env.to_json();
    j["agent"] = to_string(agent);
    j["vae"] = {{"latent_dim", vae.latent_dim},
                {"encoder_embed_dim", vae.encoder_embed_dim},
                {"encoder_hidden_dim", vae.encoder_hidden_dim},
                {"decoder_hidden_dim", vae.decoder_hidden_dim},
                {"lr", vae.lr},
                {"elbo_coef", vae.elbo_coef},
                {"subsample_k", vae.subsample_k},
                {"n_latent_samples", vae.n_latent_samples},
                {"fixed_prior", vae.fixed_prior},
                {"minibatch", vae.minibatch},
                {"updates_per_iter", vae.updates_per_iter},
                {"buffer_capacity", vae.buffer_capacity}};
    j["a2c"] = {{"gamma", a2c.gamma},
                {"gae_tau", a2c.gae_tau},
                {"value_coef", a2c.value_coef},
                {"entropy_coef", a2c.entropy_coef},
                {"lr", a2c.lr},
                {"epsilon", a2c.epsilon},
                {"max_grad_norm", a2c.max_grad_norm},
                {"n_envs", a2c.n_envs},
                {"n_steps", a2c.n_steps}};
    j["total_frames"] = total_frames;
    j["eval_interval"] = eval_interval;
    j["checkpoint_interval"] = checkpoint_interval;
    j["n_eval_episodes"] = n_eval_episodes;
    j["n_seeds"] = n_seeds;
    j["output_dir"] = output_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("env")) c.env = EnvConfig::from_json(j.at("env"));
    if (j.contains("agent")) c.agent = agent_kind_from_string(j.at("agent").get<std::string>());
    if (j.contains("vae")) {
        const auto& v = j.at("vae");
        if (v.contains("latent_dim")) v.at("latent_dim").get_to(c.vae.latent_dim);
        if (v.contains("encoder_embed_dim")) v.at("encoder_embed_dim").get_to(c.vae.encoder_embed_dim);
        if (v.contains("encoder_hidden_dim")) v.at("encoder_hidden_dim").get_to(c.vae.encoder_hidden_dim);
        if (v.contains("decoder_hidden_dim")) v.at("decoder_hidden_dim").get_to(c.vae.decoder_hidden_dim);
        if (v.contains("lr")) v.at("lr").get_to(c.vae.lr);
        if (v.contains("elbo_coef")) v.at("elbo_coef").get_to(c.vae.elbo_coef);
        if (v.contains("subsample_k")) v.at("subsample_k").get_to(c.vae.subsample_k);
        if (v.contains("n_latent_samples")) v.at("n_latent_samples").get_to(c.vae.n_latent_samples);
        if (v.contains("fixed_prior")) v.at("fixed_prior").get_to(c.vae.fixed_prior);
        if (v.contains("minibatch")) v.at("minibatch").get_to(c.vae.minibatch);
        if (v.contains("updates_per_iter")) v.at("updates_per_iter").get_to(c.vae.updates_per_iter);
        if (v.contains("buffer_capacity")) v.at("buffer_capacity").get_to(c.vae.buffer_capacity);
    }
    if (j.contains("a2c")) {
        const auto& a = j.at("a2c");
        if (a.contains("gamma")) a.at("gamma").get_to(c.a2c.gamma);
        if (a.contains("gae_tau")) a.at("gae_tau").get_to(c.a2c.gae_tau);
        if (a.contains("value_coef")) a.at("value_coef").get_to(c.a2c.value_coef);
        if (a.contains("entropy_coef")) a.at("entropy_coef").get_to(c.a2c.entropy_coef);
        if (a.contains("lr")) a.at("lr").get_to(c.a2c.lr);
        if (a.contains("epsilon")) a.at("epsilon").get_to(c.a2c.epsilon);
        if (a.contains("max_grad_norm")) a.at("max_grad_norm").get_to(c.a2c.max_grad_norm);
        if (a.contains("n_envs")) a.at("n_envs").get_to(c.a2c.n_envs);
        if (a.contains("n_steps")) a.at("n_steps").get_to(c.a2c.n_steps);
    }
    if (j.contains("total_frames")) j.at("total_frames").get_to(c.total_frames);
    if (j.contains("eval_interval")) j.at("eval_interval").get_to(c.eval_interval);
    if (j.contains("checkpoint_interval")) j.at("checkpoint_interval").get_to(c.checkpoint_interval);
    if (j.contains("n_eval_episodes")) j.at("n_eval_episodes").get_to(c.n_eval_episodes);
    if (j.contains("n_seeds")) j.at("n_seeds").get_to(c.n_seeds);
    if (j.contains("output_dir")) j.at("output_dir").get_to(c.output_dir);
    c.validate();
    return c;
}

uint64_t ExperimentConfig::config_hash() const {
    nlohmann::json j = to_json();
    j.erase("output_dir");
    std::string s = j.dump();  // nlohmann sorts object keys: canonical
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> episode_returns(const Trajectory& traj, int episode_len) {
    std::vector<double> out;
    for (size_t t = 0; t < traj.records.size(); ++t) {
        if (t % static_cast<size_t>(episode_len) == 0) out.push_back(0.0);
        out.back() += traj.records[t].reward;
    }
    return out;
}

Trajectory run_varibad_rollout(const EnvConfig& env, const BeliefVae& vae, const Policy& policy,
                               const Task& task, std::mt19937_64* rng) {
    Trajectory traj;
    traj.initial_state = env.start;
    BeliefVae::EncodeState enc = vae.initial_state(1);
    GridPos pos = env.start;
    for (int t = 0; t < env.meta_horizon; ++t) {
        std::vector<bool> ep_start(1, t % env.episode_len == 0);
        Tensor obs = policy.make_obs(env, {pos}, ep_start, enc.post);
        Tape tp;
        Policy::Out out = policy.forward(tp, tp.constant(obs));
        const Tensor& logits = tp.value(out.logits);
        int a = rng ? sample_categorical(logits.v.data(), kNumActions, *rng)
                    : argmax_categorical(logits.v.data(), kNumActions);
        StepResult res = step(pos, static_cast<Action>(a), task, t, env);
        StepRecord rec{pos, static_cast<Action>(a), res.reward, res.next_pos, res.episode_reset};
        traj.records.push_back(rec);
        enc = vae.encode_step(enc, {rec});
        pos = res.episode_reset ? env.start : res.next_pos;
    }
    return traj;
}

Trajectory run_rl2_rollout(const EnvConfig& env, const Rl2Policy& policy, const Task& task,
                           std::mt19937_64* rng) {
    Trajectory traj;
    traj.initial_state = env.start;
    GridPos pos = env.start;
    Tensor h = policy.initial_hidden(1);
    Tensor prev_action(1, kNumActions);
    Tensor prev_reward(1, 1);
    for (int t = 0; t < env.meta_horizon; ++t) {
        Tensor state_in(1, policy.state_in_dim());
        state_in.at(0, env.cell_index(pos)) = 1.0;
        state_in.at(0, env.num_cells()) = (t % env.episode_len == 0) ? 1.0 : 0.0;
        Tape tp;
        Rl2Policy::Out out = policy.step(tp, tp.constant(state_in), tp.constant(prev_action),
                                         tp.constant(prev_reward), tp.constant(h));
        const Tensor& logits = tp.value(out.logits);
        int a = rng ? sample_categorical(logits.v.data(), kNumActions, *rng)
                    : argmax_categorical(logits.v.data(), kNumActions);
        StepResult res = step(pos, static_cast<Action>(a), task, t, env);
        traj.records.push_back({pos, static_cast<Action>(a), res.reward, res.next_pos, res.episode_reset});
        h = tp.value(out.h);
        prev_action = Tensor(1, kNumActions);
        prev_action.at(0, a) = 1.0;
        prev_reward.v[0] = res.reward;
        pos = res.episode_reset ? env.start : res.next_pos;
    }
    return traj;
}

std::vector<EpisodeRow> evaluate_varibad(const EnvConfig& env, const BeliefVae& vae, const Policy& policy,
                                         int n_episodes) {
    EnvConfig eval_env = env;
    eval_env.meta_horizon = n_episodes * env.episode_len;
    std::vector<std::vector<double>> per_task;
    for (GridPos goal : candidate_goals(eval_env)) {
        Trajectory traj = run_varibad_rollout(eval_env, vae, policy, Task{goal});
        per_task.push_back(episode_returns(traj, eval_env.episode_len));
    }
    return rows_from_trajs("varibad", eval_env, per_task);
}

std::vector<EpisodeRow> evaluate_rl2(const EnvConfig& env, const Rl2Policy& policy, int n_episodes) {
    EnvConfig eval_env = env;
    eval_env.meta_horizon = n_episodes * env.episode_len;
    std::vector<std::vector<double>> per_task;
    for (GridPos goal : candidate_goals(eval_env)) {
        Trajectory traj = run_rl2_rollout(eval_env, policy, Task{goal});
        per_task.push_back(episode_returns(traj, eval_env.episode_len));
    }
    return rows_from_trajs("rl2", eval_env, per_task);
}

std::vector<EpisodeRow> evaluate_reference(const EnvConfig& env, AgentKind kind, int n_episodes,
                                           int n_seeds, uint64_t base_seed) {
    switch (kind) {
        case AgentKind::Oracle: return evaluate_oracle_exact(env, n_episodes);
        case AgentKind::BayesOptimal: return evaluate_bayes_optimal_exact(env, n_episodes);
        case AgentKind::PosteriorSampling:
            return evaluate_posterior_sampling(env, n_episodes, n_seeds, base_seed);
        default: throw std::invalid_argument("evaluate_reference: learned agent kind");
    }
}

namespace {

// Compact buffer snapshot for bit-identical resume: the deterministic env
// reconstructs states from actions; rewards collapse to a goal/penalty bit.
nlohmann::json buffer_to_json(const VaeBuffer& buffer) {
    auto out = nlohmann::json::array();
    for (size_t i = 0; i < buffer.size(); ++i) {
        const Trajectory& tr = buffer.get(i);
        std::vector<int> acts;
        std::vector<int> hits;
        for (const StepRecord& r : tr.records) {
            acts.push_back(static_cast<int>(r.action));
            hits.push_back(r.reward > 0.0 ? 1 : 0);
        }
        out.push_back({{"a", acts}, {"g", hits}});
    }
    return out;
}

void buffer_from_json(const nlohmann::json& j, const EnvConfig& env, VaeBuffer& buffer) {
    for (const auto& jt : j) {
        std::vector<int> acts = jt.at("a").get<std::vector<int>>();
        std::vector<int> hits = jt.at("g").get<std::vector<int>>();
        Trajectory tr;
        tr.initial_state = env.start;
        GridPos pos = env.start;
        for (size_t t = 0; t < acts.size(); ++t) {
            Action a = static_cast<Action>(acts[t]);
            GridPos next = move(pos, a, env);
            double reward = hits[t] ? env.goal_reward : env.step_penalty;
            bool reset = (static_cast<int>(t) + 1) % env.episode_len == 0;
            tr.records.push_back({pos, a, reward, next, reset});
            pos = reset ? env.start : next;
        }
        buffer.push(std::move(tr));
    }
}

void write_eval_rows(std::ofstream& out, long long frames, const std::vector<EpisodeRow>& rows) {
    for (const auto& r : rows)
        out << frames << ',' << r.agent << ',' << r.episode_index << ',' << r.mean_return << ','
            << r.stderr_ << ',' << r.n_samples << '\n';
    out.flush();
}

struct LearnedState {
    // Exactly one of these pairs is active depending on the agent kind.
    std::unique_ptr<BeliefVae> vae;
    std::unique_ptr<Policy> policy;
    std::unique_ptr<Rl2Policy> rl2;
    ParamStore policy_params;
    Adam policy_opt;
};

LearnedState build_learned(const ExperimentConfig& cfg, uint64_t seed) {
    LearnedState st;
    st.policy_opt = Adam{cfg.a2c.lr, 0.9, 0.999, cfg.a2c.epsilon, 0};
    std::mt19937_64 init_rng(seed ^ kPolicySalt);
    if (cfg.agent == AgentKind::Varibad) {
        st.vae = std::make_unique<BeliefVae>(cfg.env, cfg.vae, seed ^ kVaeSalt);
        st.policy = std::make_unique<Policy>(cfg.env, cfg.vae.latent_dim, kPolicyHidden, st.policy_params,
                                             init_rng);
    } else {
        st.rl2 = std::make_unique<Rl2Policy>(cfg.env, st.policy_params, init_rng);
    }
    return st;
}

}  // namespace

RunRecord train(const ExperimentConfig& cfg, uint64_t seed, const std::string& resume_checkpoint) {
    cfg.validate();
    auto t_start = std::chrono::steady_clock::now();

    RunRecord rec;
    rec.config = cfg;
    rec.config_hash = cfg.config_hash();
    rec.seed = seed;
    rec.run_dir = cfg.output_dir + "/seed" + std::to_string(seed);
    fs::create_directories(rec.run_dir);
    {
        nlohmann::json j = cfg.to_json();
        j["seed"] = seed;
        std::ostringstream hs;
        hs << std::hex << rec.config_hash;
        j["config_hash"] = hs.str();
        std::ofstream(rec.run_dir + "/config.json") << j.dump(2) << '\n';
    }
    rec.episodes_csv = rec.run_dir + "/episodes.csv";

    if (cfg.agent == AgentKind::Oracle || cfg.agent == AgentKind::BayesOptimal ||
        cfg.agent == AgentKind::PosteriorSampling) {
        auto rows = evaluate_reference(cfg.env, cfg.agent, cfg.n_eval_episodes, cfg.n_seeds, seed);
        write_episode_csv(rec.episodes_csv, rows);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return rec;
    }

    LearnedState st = build_learned(cfg, seed);
    VaeBuffer buffer(cfg.vae.buffer_capacity, cfg.env.meta_horizon);
    std::mt19937_64 rollout_rng(seed ^ kRolloutSalt);
    long long frames = 0;

    rec.metrics_csv = rec.run_dir + "/metrics.csv";
    rec.eval_csv = rec.run_dir + "/eval.csv";
    rec.checkpoint_path = rec.run_dir + "/checkpoint.bin";

    std::vector<std::pair<std::string, ParamStore*>> stores;
    stores.emplace_back("policy", &st.policy_params);
    if (st.vae) stores.emplace_back("vae", &st.vae->params());

    auto save_ckpt = [&](const std::string& path) {
        nlohmann::json meta;
        meta["config"] = cfg.to_json();
        meta["seed"] = seed;
        meta["frames"] = frames;
        meta["rng_rollout"] = rng_to_string(rollout_rng);
        meta["policy_adam_step"] = st.policy_opt.step_count;
        if (st.vae) {
            meta["rng_vae"] = rng_to_string(st.vae->rng());
            meta["vae_adam_step"] = st.vae->optimizer().step_count;
            meta["buffer"] = buffer_to_json(buffer);
        }
        std::vector<std::pair<std::string, const ParamStore*>> cstores(stores.begin(), stores.end());
        checkpoint::save(path, cstores, meta);
    };

    bool resumed = !resume_checkpoint.empty();
    if (resumed) {
        nlohmann::json meta = checkpoint::load(resume_checkpoint, stores);
        frames = meta.at("frames").get<long long>();
        rng_from_string(rollout_rng, meta.at("rng_rollout").get<std::string>());
        st.policy_opt.step_count = meta.at("policy_adam_step").get<long long>();
        if (st.vae) {
            rng_from_string(st.vae->rng(), meta.at("rng_vae").get<std::string>());
            st.vae->optimizer().step_count = meta.at("vae_adam_step").get<long long>();
            buffer_from_json(meta.at("buffer"), cfg.env, buffer);
        }
    }

    std::ofstream metrics(rec.metrics_csv, resumed ? std::ios::app : std::ios::out);
    std::ofstream evals(rec.eval_csv, resumed ? std::ios::app : std::ios::out);
    if (!resumed) {
        metrics << "frames,policy_loss,value_loss,entropy,elbo,kl,recon,mean_return\n";
        evals << "frames,agent,episode_index,mean_return,stderr,n_samples\n";
    }
    metrics.precision(17);
    evals.precision(17);

    auto run_eval = [&]() {
        auto rows = st.vae ? evaluate_varibad(cfg.env, *st.vae, *st.policy, cfg.n_eval_episodes)
                           : evaluate_rl2(cfg.env, *st.rl2, cfg.n_eval_episodes);
        write_eval_rows(evals, frames, rows);
        return rows;
    };

    const long long frames_per_update = static_cast<long long>(cfg.a2c.n_envs) * cfg.a2c.n_steps;
    long long last_eval = frames / cfg.eval_interval;
    long long last_ckpt = frames / cfg.checkpoint_interval;
    std::vector<double> bootstrap(cfg.a2c.n_envs, 0.0);

    while (frames < cfg.total_frames) {
        RolloutOutcome roll = st.vae
                                  ? collect_rollouts_varibad(cfg.env, *st.vae, *st.policy, cfg.a2c,
                                                             rollout_rng, &buffer)
                                  : collect_rollouts_rl2(cfg.env, *st.rl2, cfg.a2c, rollout_rng);
        GaeResult gae = compute_gae(roll.batch, bootstrap, cfg.a2c);
        A2CLosses losses =
            st.vae ? a2c_update(roll.batch, gae, *st.policy, st.policy_params, st.policy_opt, cfg.a2c)
                   : rl2_update(roll.batch, gae, *st.rl2, st.policy_params, st.policy_opt, cfg.a2c);
        BeliefVae::UpdateStats vstats;
        if (st.vae)
            for (int u = 0; u < cfg.vae.updates_per_iter; ++u) vstats = st.vae->update(buffer, st.vae->rng());
        frames += frames_per_update;

        if (!std::isfinite(losses.total) || !std::isfinite(vstats.elbo)) {
            nlohmann::json diag = {{"frames", frames},
                                   {"policy_loss", losses.policy_loss},
                                   {"value_loss", losses.value_loss},
                                   {"entropy", losses.entropy},
                                   {"elbo", vstats.elbo}};
            std::ofstream(rec.run_dir + "/diagnostic_abort.json") << diag.dump(2) << '\n';
            throw std::runtime_error("train: non-finite loss at frame " + std::to_string(frames) +
                                     " (see diagnostic_abort.json)");
        }

        metrics << frames << ',' << losses.policy_loss << ',' << losses.value_loss << ',' << losses.entropy
                << ',' << vstats.elbo << ',' << vstats.kl << ',' << vstats.recon << ',' << roll.mean_return
                << '\n';
        metrics.flush();

        if (frames / cfg.eval_interval > last_eval) {
            last_eval = frames / cfg.eval_interval;
            run_eval();
        }
        if (frames / cfg.checkpoint_interval > last_ckpt) {
            last_ckpt = frames / cfg.checkpoint_interval;
            save_ckpt(rec.checkpoint_path);
        }
    }

    save_ckpt(rec.checkpoint_path);
    write_episode_csv(rec.episodes_csv, run_eval());

    // Diagnostics for the latent-space plots: one greedy rollout on a fixed
    // far-corner task.
    if (st.vae) {
        EnvConfig eval_env = cfg.env;
        eval_env.meta_horizon = cfg.n_eval_episodes * cfg.env.episode_len;
        GridPos goal = candidate_goals(eval_env).back();
        Trajectory traj = run_varibad_rollout(eval_env, *st.vae, *st.policy, Task{goal});
        std::ofstream diag(rec.run_dir + "/rollout_diagnostics.jsonl");
        diag << nlohmann::json{{"goal", {goal.x, goal.y}}}.dump() << '\n';
        st.vae->dump_rollout_diagnostics(diag, traj);
    }

    rec.frames = frames;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    {
        nlohmann::json j = {{"frames", frames}, {"wall_seconds", rec.wall_seconds}};
        std::ofstream(rec.run_dir + "/run_record.json") << j.dump(2) << '\n';
    }
    return rec;
}

std::vector<EpisodeRow> evaluate_checkpoint(const std::string& checkpoint_path, int n_episodes) {
    nlohmann::json meta = checkpoint::read_meta(checkpoint_path);
    ExperimentConfig cfg = ExperimentConfig::from_json(meta.at("config"));
    uint64_t seed = meta.at("seed").get<uint64_t>();
    LearnedState st = build_learned(cfg, seed);
    std::vector<std::pair<std::string, ParamStore*>> stores;
    stores.emplace_back("policy", &st.policy_params);
    if (st.vae) stores.emplace_back("vae", &st.vae->params());
    checkpoint::load(checkpoint_path, stores);
    return st.vae ? evaluate_varibad(cfg.env, *st.vae, *st.policy, n_episodes)
                  : evaluate_rl2(cfg.env, *st.rl2, n_episodes);
}

// ---- plotting -------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

const char* agent_color(const std::string& agent) {
    if (agent == "varibad") return "#1f77b4";
    if (agent == "rl2") return "#ff7f0e";
    if (agent == "oracle") return "#2ca02c";
    if (agent == "bayes_optimal") return "#7f7f7f";
    if (agent == "posterior_sampling") return "#9467bd";
    return "#17becf";
}

struct RunInfo {
    std::string dir;
    std::string agent;
};

void mean_ci(const std::vector<double>& xs, double& mean, double& half) {
    double n = static_cast<double>(xs.size());
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    half = xs.size() > 1 ? 1.96 * std::sqrt(var / (n - 1) / n) : 0.0;
}

}  // namespace

void plot_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> missing;
    std::vector<RunInfo> runs;
    for (const std::string& dir : run_dirs) {
        std::string cfg_path = dir + "/config.json";
        if (!fs::exists(cfg_path)) {
            missing.push_back(cfg_path);
            continue;
        }
        nlohmann::json j;
        std::ifstream(cfg_path) >> j;
        runs.push_back({dir, j.at("agent").get<std::string>()});
    }

    std::map<std::string, std::vector<RunInfo>> by_agent;
    for (const auto& r : runs) by_agent[r.agent].push_back(r);

    // (a) learning curves with a 95% CI band across seeds.
    std::vector<plot::Series> curves;
    for (const auto& [agent, group] : by_agent) {
        if (agent != "varibad" && agent != "rl2") continue;
        std::vector<std::vector<double>> frames_per_run, returns_per_run;
        for (const auto& r : group) {
            std::string path = r.dir + "/metrics.csv";
            if (!fs::exists(path)) {
                missing.push_back(path);
                continue;
            }
            auto rows = read_csv(path);
            std::vector<double> fr, re;
            for (size_t i = 1; i < rows.size(); ++i) {
                fr.push_back(std::stod(rows[i][0]));
                re.push_back(std::stod(rows[i][7]));
            }
            frames_per_run.push_back(std::move(fr));
            returns_per_run.push_back(std::move(re));
        }
        if (frames_per_run.empty()) continue;
        size_t len = frames_per_run[0].size();
        for (const auto& f : frames_per_run) len = std::min(len, f.size());
        plot::Series s;
        s.label = agent;
        s.color = agent_color(agent);
        // Thin dense per-update traces to ~200 plotted points.
        size_t stride = std::max<size_t>(1, len / 200);
        for (size_t i = 0; i + 1 <= len; i += stride) {
            std::vector<double> ys;
            for (const auto& re : returns_per_run) ys.push_back(re[i]);
            double m, half;
            mean_ci(ys, m, half);
            s.x.push_back(frames_per_run[0][i]);
            s.y.push_back(m);
            if (returns_per_run.size() > 1) {
                s.band_lo.push_back(m - half);
                s.band_hi.push_back(m + half);
            }
        }
        curves.push_back(std::move(s));
    }
    if (!curves.empty())
        plot::write_line_chart(out_dir + "/learning_curves.svg", "Training return (95% CI across seeds)",
                               "frames", "mean return per meta-episode", curves);

    // (b) per-episode return bars; exact reference agents become dashed lines.
    std::vector<plot::BarSeries> bars;
    std::vector<plot::HLine> ref_lines;
    std::vector<std::string> categories;
    int n_ep = 0;
    for (const auto& [agent, group] : by_agent) {
        std::map<int, std::vector<double>> per_ep;  // episode -> per-seed means
        double single_err = 0.0;
        for (const auto& r : group) {
            std::string path = r.dir + "/episodes.csv";
            if (!fs::exists(path)) {
                missing.push_back(path);
                continue;
            }
            for (auto rows = read_csv(path); const auto& row : rows) {
                if (row[0] == "agent") continue;
                per_ep[std::stoi(row[1])].push_back(std::stod(row[2]));
                single_err = 1.96 * std::stod(row[3]);
            }
        }
        if (per_ep.empty()) continue;
        n_ep = std::max(n_ep, per_ep.rbegin()->first);
        if (agent == "oracle" || agent == "bayes_optimal") {
            double m, half;
            mean_ci(per_ep.rbegin()->second, m, half);  // final-episode exact value
            ref_lines.push_back({m, agent, agent_color(agent)});
            continue;
        }
        plot::BarSeries bs;
        bs.label = agent;
        bs.color = agent_color(agent);
        for (const auto& [ep, vals] : per_ep) {
            double m, half;
            mean_ci(vals, m, half);
            bs.values.push_back(m);
            bs.errs.push_back(vals.size() > 1 ? half : single_err);
        }
        bars.push_back(std::move(bs));
    }
    if (!bars.empty()) {
        for (int e = 1; e <= n_ep; ++e) categories.push_back("episode " + std::to_string(e));
        plot::write_bar_chart(out_dir + "/returns_by_episode.svg", "Per-episode return", categories, bars,
                              "mean return", ref_lines);
    }

    // (c)-(e) latent diagnostics from the first variBAD run providing them.
    for (const auto& r : runs) {
        if (r.agent != "varibad") continue;
        std::string path = r.dir + "/rollout_diagnostics.jsonl";
        if (!fs::exists(path)) continue;
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        auto head = nlohmann::json::parse(line);
        int gx = head.at("goal")[0].get<int>(), gy = head.at("goal")[1].get<int>();
        std::vector<nlohmann::json> steps;
        while (std::getline(in, line))
            if (!line.empty()) steps.push_back(nlohmann::json::parse(line));
        if (steps.empty()) break;

        int latent = static_cast<int>(steps[0].at("mu").size());
        int ncells = static_cast<int>(steps[0].at("probs").size());
        nlohmann::json run_cfg;
        std::ifstream(r.dir + "/config.json") >> run_cfg;
        EnvConfig env = EnvConfig::from_json(run_cfg.at("env"));
        int goal_cell = env.cell_index({gx, gy});

        std::vector<plot::Series> mu_series(latent), ls_series(latent);
        const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
        for (int d = 0; d < latent; ++d) {
            mu_series[d].label = "mu[" + std::to_string(d) + "]";
            ls_series[d].label = "log_sigma[" + std::to_string(d) + "]";
            mu_series[d].color = ls_series[d].color = palette[d % 10];
        }
        std::vector<plot::Series> prob_series(ncells);
        for (int c = 0; c < ncells; ++c) {
            prob_series[c].label = c == goal_cell ? "goal cell" : "";
            prob_series[c].color = c == goal_cell ? "#d62728" : "#bbbbbb";
        }
        for (const auto& s : steps) {
            double t = s.at("t").get<double>();
            for (int d = 0; d < latent; ++d) {
                mu_series[d].x.push_back(t);
                mu_series[d].y.push_back(s.at("mu")[d].get<double>());
                ls_series[d].x.push_back(t);
                ls_series[d].y.push_back(s.at("log_sigma")[d].get<double>());
            }
            for (int c = 0; c < ncells; ++c) {
                prob_series[c].x.push_back(t);
                prob_series[c].y.push_back(s.at("probs")[c].get<double>());
            }
        }
        // Goal-cell series last so it draws on top; drop unlabeled legends by
        // keeping a single grey exemplar.
        std::vector<plot::Series> prob_draw;
        for (int c = 0; c < ncells; ++c)
            if (c != goal_cell) prob_draw.push_back(prob_series[c]);
        prob_draw[0].label = "other cells";
        prob_draw.push_back(prob_series[goal_cell]);

        plot::write_line_chart(out_dir + "/latent_mu.svg", "Latent posterior mean over a rollout", "t",
                               "mu", mu_series);
        plot::write_line_chart(out_dir + "/latent_log_sigma.svg",
                               "Latent posterior log-stddev over a rollout", "t", "log sigma", ls_series);
        plot::write_line_chart(out_dir + "/decoder_probs.svg", "Decoder reward probability per cell", "t",
                               "p(goal at cell)", prob_draw);

        // (e) belief heatmap at the end of episode 1 with the episode-1 path.
        size_t ep1_end = std::min<size_t>(steps.size() - 1, env.episode_len);
        const auto& last_ep1 = steps[ep1_end];
        std::vector<double> heat;
        for (const auto& p : last_ep1.at("probs")) heat.push_back(p.get<double>());
        std::vector<int> path_cells;
        for (size_t t = 0; t <= ep1_end; ++t)
            if (steps[t].contains("cell")) path_cells.push_back(steps[t].at("cell").get<int>());
        plot::write_grid_heatmap(out_dir + "/belief_heatmap.svg",
                                 "Decoder belief after episode 1 (path overlaid)", env.width, env.height,
                                 heat, path_cells, env.cell_index(env.start), goal_cell);
        break;
    }

    if (!missing.empty()) {
        std::string msg = "plot: missing inputs:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
    }
}

}  // namespace varibad
