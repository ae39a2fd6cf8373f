#pragma once

#include <random>

#include "varibad/nets.hpp"
#include "varibad/vae.hpp"

namespace varibad {

struct A2CConfig {
    double gamma = 0.95;
    double gae_tau = 0.95;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double lr = 0.001;
    double epsilon = 1e-5;  // optimiser epsilon
    double max_grad_norm = 0.5;
    int n_envs = 16;
    int n_steps = 60;

    void validate() const;
};

// One rollout window of n_envs parallel environments. Per-step matrices are
// row-batched over environments; posterior snapshots live inside obs and are
// detached from the encoder by construction.
struct RolloutBatch {
    int n_envs = 0;
    int n_steps = 0;
    std::vector<Tensor> obs;                    // [step] {n_envs, obs_dim}
    std::vector<std::vector<int>> actions;      // [step][env]
    std::vector<std::vector<double>> rewards;   // [step][env]
    std::vector<std::vector<double>> values;    // [step][env]
    std::vector<std::vector<double>> log_probs; // [step][env]
    std::vector<std::vector<double>> entropies; // [step][env]
    std::vector<std::vector<char>> resets;      // [step][env] episode_reset flags
    // RL^2 recurrent inputs
    std::vector<Tensor> prev_actions;  // [step] {n_envs, 5}
    std::vector<Tensor> prev_rewards;  // [step] {n_envs, 1}
};

struct GaeResult {
    std::vector<std::vector<double>> advantages;  // [step][env]
    std::vector<std::vector<double>> returns;     // [step][env]
};

// delta_t = r_t + gamma*v_{t+1}*(1-reset_t) - v_t
// A_t = delta_t + gamma*tau*(1-reset_t)*A_{t+1}; returns = A + v.
// Episode-reset flags cut bootstrapping.
GaeResult compute_gae(const RolloutBatch& batch, const std::vector<double>& bootstrap_values,
                      const A2CConfig& cfg);

struct A2CLosses {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total = 0.0;
    double grad_norm = 0.0;  // pre-clip
};

// loss = -mean(logp * A) + value_coef*mean((ret-v)^2) - entropy_coef*mean(ent)
A2CLosses a2c_update(const RolloutBatch& batch, const GaeResult& gae, const Policy& policy,
                     ParamStore& policy_params, Adam& opt, const A2CConfig& cfg);

// Same loss, but the forward pass replays the GRU so gradients flow through
// the recurrent core (the defining difference from the variBAD policy).
A2CLosses rl2_update(const RolloutBatch& batch, const GaeResult& gae, const Rl2Policy& policy,
                     ParamStore& policy_params, Adam& opt, const A2CConfig& cfg);

struct RolloutOutcome {
    RolloutBatch batch;
    double mean_return = 0.0;  // mean undiscounted return per env over the window
};

// Steps n_envs environments for one meta-horizon (n_steps must equal the
// config meta-horizon): fresh tasks, encoder state at prior. Completed
// trajectories are appended to the VAE buffer when one is supplied.
RolloutOutcome collect_rollouts_varibad(const EnvConfig& env_cfg, BeliefVae& vae, const Policy& policy,
                                        const A2CConfig& cfg, std::mt19937_64& rng, VaeBuffer* buffer);

RolloutOutcome collect_rollouts_rl2(const EnvConfig& env_cfg, const Rl2Policy& policy, const A2CConfig& cfg,
                                    std::mt19937_64& rng);

}  // namespace varibad
