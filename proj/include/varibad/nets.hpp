#pragma once

#include <random>

#include "varibad/grid_env.hpp"
#include "varibad/optim.hpp"
#include "varibad/tape.hpp"

namespace varibad {

// Diagonal-Gaussian posterior over the task embedding; rows batch instances.
struct LatentPosterior {
    Tensor mu;
    Tensor log_sigma;
};

// Builds the one-hot step input consumed by the recurrent encoder:
// next_state one-hot | action one-hot | reward | reset flag.
Tensor encoder_step_input(const EnvConfig& cfg, const std::vector<StepRecord>& rows);

// Recurrent task-inference network: step embedder (affine+relu), GRU,
// affine head emitting (mu, log_sigma).
class Encoder {
  public:
    Encoder(const EnvConfig& cfg, int latent_dim, int embed_dim, int hidden_dim, ParamStore& store,
            std::mt19937_64& rng);

    struct StepOut {
        Var h;
        Var mu;
        Var log_sigma;
    };
    StepOut step(Tape& tp, Var x, Var h) const;

    Tensor initial_hidden(int batch) const { return Tensor(batch, hidden_dim_); }
    LatentPosterior prior_posterior(int batch) const;  // N(0, I): mu = 0, log_sigma = 0

    int input_dim() const { return input_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    int latent_dim() const { return latent_dim_; }

  private:
    int input_dim_, embed_dim_, hidden_dim_, latent_dim_;
    Param *embed_w_, *embed_b_;
    GruParams gru_;
    Param *head_w_, *head_b_;
};

// Bernoulli reward decoder: latent sample -> one logit per grid cell.
class RewardDecoder {
  public:
    RewardDecoder(const EnvConfig& cfg, int latent_dim, int hidden_dim, ParamStore& store,
                  std::mt19937_64& rng);

    Var logits(Tape& tp, Var m) const;  // {n,latent} -> {n,num_cells}
    int num_cells() const { return num_cells_; }

  private:
    int latent_dim_, hidden_dim_, num_cells_;
    Param *w1_, *b1_, *w2_, *b2_, *w3_, *b3_;
};

// Feedforward actor-critic conditioned on (state one-hot, reset flag, mu,
// sigma). Shared tanh trunk, categorical head over actions, scalar value head.
class Policy {
  public:
    Policy(const EnvConfig& cfg, int latent_dim, int hidden_dim, ParamStore& store, std::mt19937_64& rng);

    struct Out {
        Var logits;  // {n, 5}
        Var value;   // {n, 1}
    };
    Out forward(Tape& tp, Var obs) const;

    int obs_dim() const { return obs_dim_; }
    // state one-hot | reset flag | mu | sigma (standard deviation, not log)
    Tensor make_obs(const EnvConfig& cfg, const std::vector<GridPos>& states,
                    const std::vector<bool>& reset_flags, const LatentPosterior& post) const;

  private:
    int obs_dim_, latent_dim_, hidden_dim_;
    Param *w1_, *b1_, *w2_, *b2_, *wpi_, *bpi_, *wv_, *bv_;
};

// RL^2 baseline: embeds state and reward, concatenates the previous action
// one-hot, runs a GRU (gradients flow through it), then a tanh layer and
// actor-critic heads.
class Rl2Policy {
  public:
    Rl2Policy(const EnvConfig& cfg, ParamStore& store, std::mt19937_64& rng, int state_embed_dim = 32,
              int reward_embed_dim = 8, int hidden_dim = 128, int post_dim = 32);

    struct Out {
        Var h;
        Var logits;
        Var value;
    };
    // state_in: {n, num_cells+1} (one-hot + reset flag), prev_action one-hot {n,5},
    // prev_reward {n,1}, h {n,hidden}
    Out step(Tape& tp, Var state_in, Var prev_action, Var prev_reward, Var h) const;

    Tensor initial_hidden(int batch) const { return Tensor(batch, hidden_dim_); }
    int hidden_dim() const { return hidden_dim_; }
    int state_in_dim() const { return state_in_dim_; }

  private:
    int state_in_dim_, state_embed_dim_, reward_embed_dim_, hidden_dim_, post_dim_;
    Param *ws_, *bs_, *wr_, *br_;
    GruParams gru_;
    Param *wp_, *bp_, *wpi_, *bpi_, *wv_, *bv_;
};

// Samples from a categorical given logits (values, not tape nodes).
int sample_categorical(const double* logits, int n, std::mt19937_64& rng);
int argmax_categorical(const double* logits, int n);

Tensor one_hot(int index, int n);

}  // namespace varibad
