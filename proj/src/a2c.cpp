#include "varibad/a2c.hpp"

#include <cmath>
#include <stdexcept>

namespace varibad {

void A2CConfig::validate() const {
    if (gamma <= 0.0 || gamma > 1.0 || gae_tau < 0.0 || gae_tau > 1.0)
        throw std::invalid_argument("A2CConfig: gamma/gae_tau out of range");
    if (value_coef < 0.0 || entropy_coef < 0.0 || lr <= 0.0 || epsilon <= 0.0 || max_grad_norm <= 0.0)
        throw std::invalid_argument("A2CConfig: coefficients must be positive");
    if (n_envs <= 0 || n_steps <= 0) throw std::invalid_argument("A2CConfig: n_envs/n_steps must be positive");
}

GaeResult compute_gae(const RolloutBatch& batch, const std::vector<double>& bootstrap_values,
                      const A2CConfig& cfg) {
    int T = batch.n_steps;
    int N = batch.n_envs;
    if (static_cast<int>(bootstrap_values.size()) != N)
        throw std::invalid_argument("compute_gae: bootstrap size mismatch");
    GaeResult out;
    out.advantages.assign(T, std::vector<double>(N, 0.0));
    out.returns.assign(T, std::vector<double>(N, 0.0));
    for (int e = 0; e < N; ++e) {
        double adv = 0.0;
        for (int t = T - 1; t >= 0; --t) {
            double mask = batch.resets[t][e] ? 0.0 : 1.0;
            double vnext = (t == T - 1) ? bootstrap_values[e] : batch.values[t + 1][e];
            double delta = batch.rewards[t][e] + cfg.gamma * vnext * mask - batch.values[t][e];
            adv = delta + cfg.gamma * cfg.gae_tau * mask * adv;
            out.advantages[t][e] = adv;
            out.returns[t][e] = adv + batch.values[t][e];
        }
    }
    return out;
}

namespace {

struct LossParts {
    Var total;
    double policy_loss, value_loss, entropy;
};

LossParts assemble_loss(Tape& tp, Var logits, Var values, const std::vector<int>& actions,
                        const Tensor& advantages, const Tensor& returns, const A2CConfig& cfg) {
    Var logp = categorical_log_prob(tp, logits, actions);
    Var ent = categorical_entropy(tp, logits);
    Var adv = tp.constant(advantages);
    Var ret = tp.constant(returns);
    Var pg = tp.neg(tp.mean_all(tp.mul(logp, adv)));
    Var vl = tp.mean_all(tp.square(tp.sub(ret, values)));
    Var en = tp.mean_all(ent);
    Var total = tp.sub(tp.add(pg, tp.mul_scalar(vl, cfg.value_coef)), tp.mul_scalar(en, cfg.entropy_coef));
    return {total, tp.value(pg).v[0], tp.value(vl).v[0], tp.value(en).v[0]};
}

}  // namespace

A2CLosses a2c_update(const RolloutBatch& batch, const GaeResult& gae, const Policy& policy,
                     ParamStore& policy_params, Adam& opt, const A2CConfig& cfg) {
    int T = batch.n_steps;
    int N = batch.n_envs;
    int obs_dim = batch.obs[0].cols;
    Tensor obs(T * N, obs_dim);
    Tensor adv(T * N, 1);
    Tensor ret(T * N, 1);
    std::vector<int> actions(static_cast<size_t>(T) * N);
    for (int t = 0; t < T; ++t)
        for (int e = 0; e < N; ++e) {
            int row = t * N + e;
            std::copy_n(&batch.obs[t].v[static_cast<size_t>(e) * obs_dim], obs_dim,
                        &obs.v[static_cast<size_t>(row) * obs_dim]);
            adv.v[row] = gae.advantages[t][e];
            ret.v[row] = gae.returns[t][e];
            actions[row] = batch.actions[t][e];
        }

    Tape tp;
    Policy::Out out = policy.forward(tp, tp.constant(obs));
    LossParts parts = assemble_loss(tp, out.logits, out.value, actions, adv, ret, cfg);

    policy_params.zero_grads();
    tp.backward(parts.total);
    A2CLosses losses{parts.policy_loss, parts.value_loss, parts.entropy, tp.value(parts.total).v[0], 0.0};
    losses.grad_norm = global_norm_clip(policy_params, cfg.max_grad_norm);
    opt.step(policy_params);
    return losses;
}

A2CLosses rl2_update(const RolloutBatch& batch, const GaeResult& gae, const Rl2Policy& policy,
                     ParamStore& policy_params, Adam& opt, const A2CConfig& cfg) {
    int T = batch.n_steps;
    int N = batch.n_envs;

    Tape tp;
    tp.reserve(static_cast<size_t>(T) * 40);
    Var h = tp.constant(policy.initial_hidden(N));
    Var pg_sum{-1}, vl_sum{-1}, en_sum{-1};
    double pg_v = 0.0, vl_v = 0.0, en_v = 0.0;
    for (int t = 0; t < T; ++t) {
        Rl2Policy::Out out = policy.step(tp, tp.constant(batch.obs[t]), tp.constant(batch.prev_actions[t]),
                                         tp.constant(batch.prev_rewards[t]), h);
        h = out.h;
        Var logp = categorical_log_prob(tp, out.logits, batch.actions[t]);
        Var ent = categorical_entropy(tp, out.logits);
        Tensor adv(N, 1), ret(N, 1);
        for (int e = 0; e < N; ++e) {
            adv.v[e] = gae.advantages[t][e];
            ret.v[e] = gae.returns[t][e];
        }
        Var pg = tp.sum_all(tp.mul(logp, tp.constant(adv)));
        Var vl = tp.sum_all(tp.square(tp.sub(tp.constant(ret), out.value)));
        Var en = tp.sum_all(ent);
        pg_sum = (pg_sum.id < 0) ? pg : tp.add(pg_sum, pg);
        vl_sum = (vl_sum.id < 0) ? vl : tp.add(vl_sum, vl);
        en_sum = (en_sum.id < 0) ? en : tp.add(en_sum, en);
    }
    double inv = 1.0 / (static_cast<double>(T) * N);
    Var pg = tp.mul_scalar(pg_sum, -inv);
    Var vl = tp.mul_scalar(vl_sum, inv);
    Var en = tp.mul_scalar(en_sum, inv);
    Var total = tp.sub(tp.add(pg, tp.mul_scalar(vl, cfg.value_coef)), tp.mul_scalar(en, cfg.entropy_coef));
    pg_v = tp.value(pg).v[0];
    vl_v = tp.value(vl).v[0];
    en_v = tp.value(en).v[0];

    policy_params.zero_grads();
    tp.backward(total);
    A2CLosses losses{pg_v, vl_v, en_v, tp.value(total).v[0], 0.0};
    losses.grad_norm = global_norm_clip(policy_params, cfg.max_grad_norm);
    opt.step(policy_params);
    return losses;
}

RolloutOutcome collect_rollouts_varibad(const EnvConfig& env_cfg, BeliefVae& vae, const Policy& policy,
                                        const A2CConfig& cfg, std::mt19937_64& rng, VaeBuffer* buffer) {
    if (cfg.n_steps != env_cfg.meta_horizon)
        throw std::invalid_argument("collect_rollouts: n_steps must equal the meta-horizon");
    int N = cfg.n_envs;
    int T = cfg.n_steps;

    std::vector<Task> tasks(N);
    for (int e = 0; e < N; ++e) tasks[e] = sample_task(rng, env_cfg);
    std::vector<GridPos> pos(N, env_cfg.start);
    std::vector<Trajectory> trajs(N);
    for (int e = 0; e < N; ++e) trajs[e].initial_state = env_cfg.start;

    BeliefVae::EncodeState enc = vae.initial_state(N);

    RolloutOutcome out;
    RolloutBatch& batch = out.batch;
    batch.n_envs = N;
    batch.n_steps = T;

    double total_return = 0.0;
    for (int t = 0; t < T; ++t) {
        std::vector<bool> at_episode_start(N, t % env_cfg.episode_len == 0);
        Tensor obs = policy.make_obs(env_cfg, pos, at_episode_start, enc.post);

        Tape tp;
        Policy::Out pout = policy.forward(tp, tp.constant(obs));
        const Tensor& logits = tp.value(pout.logits);
        const Tensor& values = tp.value(pout.value);
        Tensor logp_all = tp.value(tp.log_softmax(pout.logits));

        std::vector<int> actions(N);
        std::vector<double> rewards(N), vals(N), logps(N), ents(N);
        std::vector<char> resets(N);
        std::vector<StepRecord> records(N);
        for (int e = 0; e < N; ++e) {
            int a = sample_categorical(&logits.v[static_cast<size_t>(e) * kNumActions], kNumActions, rng);
            StepResult res = step(pos[e], static_cast<Action>(a), tasks[e], t, env_cfg);
            records[e] = {pos[e], static_cast<Action>(a), res.reward, res.next_pos, res.episode_reset};
            trajs[e].records.push_back(records[e]);
            actions[e] = a;
            rewards[e] = res.reward;
            vals[e] = values.v[e];
            logps[e] = logp_all.at(e, a);
            double ent = 0.0;
            for (int k = 0; k < kNumActions; ++k) ent -= std::exp(logp_all.at(e, k)) * logp_all.at(e, k);
            ents[e] = ent;
            resets[e] = res.episode_reset ? 1 : 0;
            pos[e] = res.episode_reset ? env_cfg.start : res.next_pos;
            total_return += res.reward;
        }
        batch.obs.push_back(std::move(obs));
        batch.actions.push_back(std::move(actions));
        batch.rewards.push_back(std::move(rewards));
        batch.values.push_back(std::move(vals));
        batch.log_probs.push_back(std::move(logps));
        batch.entropies.push_back(std::move(ents));
        batch.resets.push_back(std::move(resets));

        enc = vae.encode_step(enc, records);
    }

    if (buffer)
        for (int e = 0; e < N; ++e) buffer->push(std::move(trajs[e]));
    out.mean_return = total_return / N;
    return out;
}

RolloutOutcome collect_rollouts_rl2(const EnvConfig& env_cfg, const Rl2Policy& policy, const A2CConfig& cfg,
                                    std::mt19937_64& rng) {
    if (cfg.n_steps != env_cfg.meta_horizon)
        throw std::invalid_argument("collect_rollouts: n_steps must equal the meta-horizon");
    int N = cfg.n_envs;
    int T = cfg.n_steps;

    std::vector<Task> tasks(N);
    for (int e = 0; e < N; ++e) tasks[e] = sample_task(rng, env_cfg);
    std::vector<GridPos> pos(N, env_cfg.start);

    Tensor h = policy.initial_hidden(N);
    Tensor prev_action(N, kNumActions);
    Tensor prev_reward(N, 1);

    RolloutOutcome out;
    RolloutBatch& batch = out.batch;
    batch.n_envs = N;
    batch.n_steps = T;

    double total_return = 0.0;
    for (int t = 0; t < T; ++t) {
        Tensor state_in(N, policy.state_in_dim());
        bool episode_start = (t % env_cfg.episode_len == 0);
        for (int e = 0; e < N; ++e) {
            state_in.at(e, env_cfg.cell_index(pos[e])) = 1.0;
            state_in.at(e, env_cfg.num_cells()) = episode_start ? 1.0 : 0.0;
        }

        Tape tp;
        Rl2Policy::Out pout = policy.step(tp, tp.constant(state_in), tp.constant(prev_action),
                                          tp.constant(prev_reward), tp.constant(h));
        const Tensor& logits = tp.value(pout.logits);
        const Tensor& values = tp.value(pout.value);
        Tensor logp_all = tp.value(tp.log_softmax(pout.logits));
        Tensor h_next = tp.value(pout.h);

        std::vector<int> actions(N);
        std::vector<double> rewards(N), vals(N), logps(N), ents(N);
        std::vector<char> resets(N);
        Tensor next_prev_action(N, kNumActions);
        Tensor next_prev_reward(N, 1);
        for (int e = 0; e < N; ++e) {
            int a = sample_categorical(&logits.v[static_cast<size_t>(e) * kNumActions], kNumActions, rng);
            StepResult res = step(pos[e], static_cast<Action>(a), tasks[e], t, env_cfg);
            actions[e] = a;
            rewards[e] = res.reward;
            vals[e] = values.v[e];
            logps[e] = logp_all.at(e, a);
            double ent = 0.0;
            for (int k = 0; k < kNumActions; ++k) ent -= std::exp(logp_all.at(e, k)) * logp_all.at(e, k);
            ents[e] = ent;
            resets[e] = res.episode_reset ? 1 : 0;
            next_prev_action.at(e, a) = 1.0;
            next_prev_reward.v[e] = res.reward;
            pos[e] = res.episode_reset ? env_cfg.start : res.next_pos;
            total_return += res.reward;
        }
        batch.obs.push_back(std::move(state_in));
        batch.prev_actions.push_back(prev_action);
        batch.prev_rewards.push_back(prev_reward);
        batch.actions.push_back(std::move(actions));
        batch.rewards.push_back(std::move(rewards));
        batch.values.push_back(std::move(vals));
        batch.log_probs.push_back(std::move(logps));
        batch.entropies.push_back(std::move(ents));
        batch.resets.push_back(std::move(resets));

        prev_action = std::move(next_prev_action);
        prev_reward = std::move(next_prev_reward);
        h = std::move(h_next);
    }
    out.mean_return = total_return / N;
    return out;
}

}  // namespace varibad
