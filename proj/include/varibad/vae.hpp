#pragma once

#include <deque>
#include <iosfwd>
#include <random>

#include "varibad/nets.hpp"

namespace varibad {

// Ring buffer of complete meta-horizon trajectories, FIFO eviction.
class VaeBuffer {
  public:
    VaeBuffer(size_t capacity, int expected_len) : capacity_(capacity), expected_len_(expected_len) {}

    void push(Trajectory traj);
    size_t size() const { return trajs_.size(); }
    bool empty() const { return trajs_.empty(); }
    const Trajectory& get(size_t i) const { return trajs_.at(i); }
    size_t capacity() const { return capacity_; }

  private:
    size_t capacity_;
    int expected_len_;
    std::deque<Trajectory> trajs_;
};

struct VaeConfig {
    int latent_dim = 5;
    int encoder_embed_dim = 40;
    int encoder_hidden_dim = 64;
    int decoder_hidden_dim = 32;
    double lr = 0.001;
    double elbo_coef = 1.0;     // lambda
    int subsample_k = 0;        // 0 = evaluate every ELBO term
    int n_latent_samples = 1;   // per ELBO term
    bool fixed_prior = false;   // true: KL always against N(0,I)
    int minibatch = 10;
    int updates_per_iter = 1;   // gradient steps per training iteration
    size_t buffer_capacity = 2000;
};

// Encoder + Bernoulli reward decoder + per-timestep ELBO + training update.
class BeliefVae {
  public:
    BeliefVae(const EnvConfig& env_cfg, const VaeConfig& vae_cfg, uint64_t seed);

    const Encoder& encoder() const { return encoder_; }
    const RewardDecoder& decoder() const { return decoder_; }
    ParamStore& params() { return params_; }
    Adam& optimizer() { return adam_; }
    const VaeConfig& config() const { return cfg_; }

    LatentPosterior prior_posterior() const { return encoder_.prior_posterior(1); }

    struct EncodeState {
        Tensor hidden;
        LatentPosterior post;
    };
    EncodeState initial_state(int batch = 1) const;
    // Feeds one (next_state, action, reward, reset) record; values only.
    EncodeState encode_step(const EncodeState& state, const std::vector<StepRecord>& records) const;

    // Posteriors q_0..q_T for a trajectory (q_0 is the N(0,I) prior).
    std::vector<LatentPosterior> encode_trajectory(const Trajectory& traj) const;

    // Sum over steps of log Bernoulli(reward was the goal reward | decoder(m)
    // logit at the landing cell). m is a single latent row vector.
    double reconstruction_term(const Tensor& m, const Trajectory& traj) const;

    // Monte-Carlo ELBO at context length t (reconstruction covers the whole
    // trajectory, past and future), value only.
    double elbo_at(int t, const Trajectory& traj, int n_samples, std::mt19937_64& rng) const;

    struct UpdateStats {
        double elbo = 0.0;   // mean per-trajectory sum of ELBO_t
        double kl = 0.0;     // mean per-term KL
        double recon = 0.0;  // mean per-term reconstruction
    };
    UpdateStats update(const VaeBuffer& buffer, std::mt19937_64& rng);

    // Per-cell reward probabilities sigmoid(decoder(m)), values only.
    std::vector<double> decoder_probs(const Tensor& m) const;

    // JSON-lines diagnostics: one line per t with mu, log_sigma and the
    // decoder probability map at the posterior mean.
    void dump_rollout_diagnostics(std::ostream& out, const Trajectory& traj) const;

    std::mt19937_64& rng() { return rng_; }

  private:
    // Per-cell (positive, negative) reward-target counts for a trajectory.
    void reward_counts(const Trajectory& traj, std::vector<double>& c1, std::vector<double>& c0) const;

    EnvConfig env_cfg_;
    VaeConfig cfg_;
    ParamStore params_;
    std::mt19937_64 rng_;
    Encoder encoder_;
    RewardDecoder decoder_;
    Adam adam_;
};

}  // namespace varibad
