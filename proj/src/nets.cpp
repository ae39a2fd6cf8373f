#include "varibad/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace varibad {

namespace {

GruParams make_gru(const std::string& prefix, int in_dim, int hidden_dim, ParamStore& store,
                   std::mt19937_64& rng) {
    GruParams gp;
    gp.wz = &store.add(prefix + ".wz", hidden_dim, in_dim + hidden_dim);
    gp.bz = &store.add(prefix + ".bz", 1, hidden_dim);
    gp.wr = &store.add(prefix + ".wr", hidden_dim, in_dim + hidden_dim);
    gp.br = &store.add(prefix + ".br", 1, hidden_dim);
    gp.wh = &store.add(prefix + ".wh", hidden_dim, in_dim + hidden_dim);
    gp.bh = &store.add(prefix + ".bh", 1, hidden_dim);
    init_affine(*gp.wz, *gp.bz, rng);
    init_affine(*gp.wr, *gp.br, rng);
    init_affine(*gp.wh, *gp.bh, rng);
    return gp;
}

std::pair<Param*, Param*> make_affine(const std::string& prefix, int in_dim, int out_dim, ParamStore& store,
                                      std::mt19937_64& rng) {
    Param* w = &store.add(prefix + ".w", out_dim, in_dim);
    Param* b = &store.add(prefix + ".b", 1, out_dim);
    init_affine(*w, *b, rng);
    return {w, b};
}

}  // namespace

Tensor one_hot(int index, int n) {
    Tensor t(1, n);
    t.v[index] = 1.0;
    return t;
}

int sample_categorical(const double* logits, int n, std::mt19937_64& rng) {
    double mx = logits[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += std::exp(logits[i] - mx);
    std::uniform_real_distribution<double> dist(0.0, total);
    double u = dist(rng);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::exp(logits[i] - mx);
        if (u <= acc) return i;
    }
    return n - 1;
}

int argmax_categorical(const double* logits, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

Tensor encoder_step_input(const EnvConfig& cfg, const std::vector<StepRecord>& rows) {
    int dim = cfg.num_cells() + kNumActions + 2;
    Tensor x(static_cast<int>(rows.size()), dim);
    for (size_t i = 0; i < rows.size(); ++i) {
        const StepRecord& r = rows[i];
        x.at(static_cast<int>(i), cfg.cell_index(r.next_state)) = 1.0;
        x.at(static_cast<int>(i), cfg.num_cells() + static_cast<int>(r.action)) = 1.0;
        x.at(static_cast<int>(i), cfg.num_cells() + kNumActions) = r.reward;
        x.at(static_cast<int>(i), cfg.num_cells() + kNumActions + 1) = r.episode_reset ? 1.0 : 0.0;
    }
    return x;
}

// ---- Encoder --------------------------------------------------------------

Encoder::Encoder(const EnvConfig& cfg, int latent_dim, int embed_dim, int hidden_dim, ParamStore& store,
                 std::mt19937_64& rng)
    : input_dim_(cfg.num_cells() + kNumActions + 2),
      embed_dim_(embed_dim),
      hidden_dim_(hidden_dim),
      latent_dim_(latent_dim) {
    auto [ew, eb] = make_affine("enc.embed", input_dim_, embed_dim_, store, rng);
    embed_w_ = ew;
    embed_b_ = eb;
    gru_ = make_gru("enc.gru", embed_dim_, hidden_dim_, store, rng);
    auto [hw, hb] = make_affine("enc.head", hidden_dim_, 2 * latent_dim_, store, rng);
    head_w_ = hw;
    head_b_ = hb;
}

Encoder::StepOut Encoder::step(Tape& tp, Var x, Var h) const {
    Var e = tp.relu(tp.affine(x, tp.param(*embed_w_), tp.param(*embed_b_)));
    Var h2 = gru_cell(tp, e, h, gru_);
    Var head = tp.affine(h2, tp.param(*head_w_), tp.param(*head_b_));
    return {h2, tp.slice_cols(head, 0, latent_dim_), tp.slice_cols(head, latent_dim_, latent_dim_)};
}

LatentPosterior Encoder::prior_posterior(int batch) const {
    return {Tensor(batch, latent_dim_), Tensor(batch, latent_dim_)};
}

// ---- RewardDecoder --------------------------------------------------------

RewardDecoder::RewardDecoder(const EnvConfig& cfg, int latent_dim, int hidden_dim, ParamStore& store,
                             std::mt19937_64& rng)
    : latent_dim_(latent_dim), hidden_dim_(hidden_dim), num_cells_(cfg.num_cells()) {
    auto [w1, b1] = make_affine("dec.fc1", latent_dim_, hidden_dim_, store, rng);
    auto [w2, b2] = make_affine("dec.fc2", hidden_dim_, hidden_dim_, store, rng);
    auto [w3, b3] = make_affine("dec.out", hidden_dim_, num_cells_, store, rng);
    w1_ = w1; b1_ = b1; w2_ = w2; b2_ = b2; w3_ = w3; b3_ = b3;
}

Var RewardDecoder::logits(Tape& tp, Var m) const {
    Var h1 = tp.relu(tp.affine(m, tp.param(*w1_), tp.param(*b1_)));
    Var h2 = tp.relu(tp.affine(h1, tp.param(*w2_), tp.param(*b2_)));
    return tp.affine(h2, tp.param(*w3_), tp.param(*b3_));
}

// ---- Policy ---------------------------------------------------------------

Policy::Policy(const EnvConfig& cfg, int latent_dim, int hidden_dim, ParamStore& store, std::mt19937_64& rng)
    : obs_dim_(cfg.num_cells() + 1 + 2 * latent_dim), latent_dim_(latent_dim), hidden_dim_(hidden_dim) {
    auto [w1, b1] = make_affine("pi.fc1", obs_dim_, hidden_dim_, store, rng);
    auto [w2, b2] = make_affine("pi.fc2", hidden_dim_, hidden_dim_, store, rng);
    auto [wpi, bpi] = make_affine("pi.logits", hidden_dim_, kNumActions, store, rng);
    auto [wv, bv] = make_affine("pi.value", hidden_dim_, 1, store, rng);
    w1_ = w1; b1_ = b1; w2_ = w2; b2_ = b2; wpi_ = wpi; bpi_ = bpi; wv_ = wv; bv_ = bv;
}

Policy::Out Policy::forward(Tape& tp, Var obs) const {
    Var h1 = tp.tanh(tp.affine(obs, tp.param(*w1_), tp.param(*b1_)));
    Var h2 = tp.tanh(tp.affine(h1, tp.param(*w2_), tp.param(*b2_)));
    return {tp.affine(h2, tp.param(*wpi_), tp.param(*bpi_)),
            tp.affine(h2, tp.param(*wv_), tp.param(*bv_))};
}

Tensor Policy::make_obs(const EnvConfig& cfg, const std::vector<GridPos>& states,
                        const std::vector<bool>& reset_flags, const LatentPosterior& post) const {
    int n = static_cast<int>(states.size());
    if (post.mu.rows != n || post.log_sigma.rows != n)
        throw std::invalid_argument("make_obs: posterior batch mismatch");
    Tensor obs(n, obs_dim_);
    int nc = cfg.num_cells();
    for (int i = 0; i < n; ++i) {
        obs.at(i, cfg.cell_index(states[i])) = 1.0;
        obs.at(i, nc) = reset_flags[i] ? 1.0 : 0.0;
        for (int d = 0; d < latent_dim_; ++d) {
            obs.at(i, nc + 1 + d) = post.mu.at(i, d);
            obs.at(i, nc + 1 + latent_dim_ + d) = std::exp(post.log_sigma.at(i, d));
        }
    }
    return obs;
}

// ---- Rl2Policy ------------------------------------------------------------

Rl2Policy::Rl2Policy(const EnvConfig& cfg, ParamStore& store, std::mt19937_64& rng, int state_embed_dim,
                     int reward_embed_dim, int hidden_dim, int post_dim)
    : state_in_dim_(cfg.num_cells() + 1),
      state_embed_dim_(state_embed_dim),
      reward_embed_dim_(reward_embed_dim),
      hidden_dim_(hidden_dim),
      post_dim_(post_dim) {
    auto [ws, bs] = make_affine("rl2.state", state_in_dim_, state_embed_dim_, store, rng);
    auto [wr, br] = make_affine("rl2.reward", 1, reward_embed_dim_, store, rng);
    ws_ = ws; bs_ = bs; wr_ = wr; br_ = br;
    gru_ = make_gru("rl2.gru", state_embed_dim_ + reward_embed_dim_ + kNumActions, hidden_dim_, store, rng);
    auto [wp, bp] = make_affine("rl2.post", hidden_dim_, post_dim_, store, rng);
    auto [wpi, bpi] = make_affine("rl2.logits", post_dim_, kNumActions, store, rng);
    auto [wv, bv] = make_affine("rl2.value", post_dim_, 1, store, rng);
    wp_ = wp; bp_ = bp; wpi_ = wpi; bpi_ = bpi; wv_ = wv; bv_ = bv;
}

Rl2Policy::Out Rl2Policy::step(Tape& tp, Var state_in, Var prev_action, Var prev_reward, Var h) const {
    Var se = tp.tanh(tp.affine(state_in, tp.param(*ws_), tp.param(*bs_)));
    Var re = tp.tanh(tp.affine(prev_reward, tp.param(*wr_), tp.param(*br_)));
    Var x = tp.concat_cols(tp.concat_cols(se, re), prev_action);
    Var h2 = gru_cell(tp, x, h, gru_);
    Var p = tp.tanh(tp.affine(h2, tp.param(*wp_), tp.param(*bp_)));
    return {h2, tp.affine(p, tp.param(*wpi_), tp.param(*bpi_)), tp.affine(p, tp.param(*wv_), tp.param(*bv_))};
}

}  // namespace varibad
