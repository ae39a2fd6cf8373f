#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "varibad/a2c.hpp"
#include "varibad/reference_agents.hpp"
#include "varibad/vae.hpp"

namespace varibad {

enum class AgentKind { Varibad, Rl2, Oracle, BayesOptimal, PosteriorSampling };

AgentKind agent_kind_from_string(const std::string& s);  // throws std::invalid_argument
std::string to_string(AgentKind kind);

struct ExperimentConfig {
    EnvConfig env = EnvConfig::default_gridworld();
    AgentKind agent = AgentKind::Varibad;
    VaeConfig vae;
    A2CConfig a2c;
    long long total_frames = 4000000;
    long long eval_interval = 192000;        // frames between greedy evaluations
    long long checkpoint_interval = 960000;  // frames between checkpoints
    int n_eval_episodes = 6;
    int n_seeds = 20;  // Monte-Carlo seeds for stochastic reference agents
    std::string output_dir = "runs/default";

    void validate() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    // FNV-1a over the canonical JSON dump with output_dir removed: stable
    // under field reordering, changes iff a semantic field changes.
    uint64_t config_hash() const;
};

struct RunRecord {
    ExperimentConfig config;
    uint64_t config_hash = 0;
    uint64_t seed = 0;
    std::string run_dir;
    std::string metrics_csv;      // frames,policy_loss,value_loss,entropy,elbo,kl,recon,mean_return
    std::string eval_csv;         // frames,agent,episode_index,mean_return,stderr,n_samples
    std::string episodes_csv;     // final per-episode table
    std::string checkpoint_path;  // empty for reference agents
    long long frames = 0;
    double wall_seconds = 0.0;
};

// Per-episode sums of rewards, split at episode_len boundaries.
std::vector<double> episode_returns(const Trajectory& traj, int episode_len);

// Greedy (or sampling, when rng != nullptr) meta-rollout for a trained agent;
// the encoder/recurrent state persists across episode resets.
Trajectory run_varibad_rollout(const EnvConfig& env, const BeliefVae& vae, const Policy& policy,
                               const Task& task, std::mt19937_64* rng = nullptr);
Trajectory run_rl2_rollout(const EnvConfig& env, const Rl2Policy& policy, const Task& task,
                           std::mt19937_64* rng = nullptr);

// n_episodes consecutive episodes per task, averaged over all candidate
// goals; greedy action selection. Works on live networks.
std::vector<EpisodeRow> evaluate_varibad(const EnvConfig& env, const BeliefVae& vae, const Policy& policy,
                                         int n_episodes);
std::vector<EpisodeRow> evaluate_rl2(const EnvConfig& env, const Rl2Policy& policy, int n_episodes);

// Reference-agent evaluation dispatch (oracle / bayes_optimal / posterior_sampling).
std::vector<EpisodeRow> evaluate_reference(const EnvConfig& env, AgentKind kind, int n_episodes,
                                           int n_seeds, uint64_t base_seed);

// Trains (or, for reference kinds, just evaluates) per the config. Resume
// continues bit-identically from a checkpoint written by an earlier call.
RunRecord train(const ExperimentConfig& cfg, uint64_t seed, const std::string& resume_checkpoint = "");

// Rebuilds the agent recorded in a checkpoint and runs the evaluation protocol.
std::vector<EpisodeRow> evaluate_checkpoint(const std::string& checkpoint_path, int n_episodes);

// Reads metrics/eval artifacts from the run directories (grouped by agent)
// and writes the SVG report into out_dir. Missing inputs are reported by name.
void plot_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace varibad
