#include "varibad/vae.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <ostream>
#include <stdexcept>

namespace varibad {

void VaeBuffer::push(Trajectory traj) {
    if (static_cast<int>(traj.records.size()) != expected_len_)
        throw std::invalid_argument("VaeBuffer: only complete meta-horizon trajectories are stored");
    trajs_.push_back(std::move(traj));
    while (trajs_.size() > capacity_) trajs_.pop_front();
}

BeliefVae::BeliefVae(const EnvConfig& env_cfg, const VaeConfig& vae_cfg, uint64_t seed)
    : env_cfg_(env_cfg),
      cfg_(vae_cfg),
      rng_(seed),
      encoder_(env_cfg, vae_cfg.latent_dim, vae_cfg.encoder_embed_dim, vae_cfg.encoder_hidden_dim, params_,
               rng_),
      decoder_(env_cfg, vae_cfg.latent_dim, vae_cfg.decoder_hidden_dim, params_, rng_) {
    adam_.lr = cfg_.lr;
}

BeliefVae::EncodeState BeliefVae::initial_state(int batch) const {
    return {encoder_.initial_hidden(batch), encoder_.prior_posterior(batch)};
}

BeliefVae::EncodeState BeliefVae::encode_step(const EncodeState& state,
                                              const std::vector<StepRecord>& records) const {
    Tape tp;
    Var h = tp.constant(state.hidden);
    Var x = tp.constant(encoder_step_input(env_cfg_, records));
    Encoder::StepOut out = encoder_.step(tp, x, h);
    return {tp.value(out.h), {tp.value(out.mu), tp.value(out.log_sigma)}};
}

std::vector<LatentPosterior> BeliefVae::encode_trajectory(const Trajectory& traj) const {
    std::vector<LatentPosterior> posts;
    posts.reserve(traj.records.size() + 1);
    EncodeState st = initial_state(1);
    posts.push_back(st.post);
    for (const StepRecord& r : traj.records) {
        st = encode_step(st, {r});
        posts.push_back(st.post);
    }
    return posts;
}

void BeliefVae::reward_counts(const Trajectory& traj, std::vector<double>& c1, std::vector<double>& c0) const {
    c1.assign(env_cfg_.num_cells(), 0.0);
    c0.assign(env_cfg_.num_cells(), 0.0);
    for (const StepRecord& r : traj.records) {
        int cell = env_cfg_.cell_index(r.next_state);
        if (r.reward == env_cfg_.goal_reward)
            c1[cell] += 1.0;
        else
            c0[cell] += 1.0;
    }
}

double BeliefVae::reconstruction_term(const Tensor& m, const Trajectory& traj) const {
    Tape tp;
    Var mv = tp.constant(m);
    Var logits = decoder_.logits(tp, mv);
    std::vector<double> c1, c0;
    reward_counts(traj, c1, c0);
    Var vc1 = tp.constant(Tensor::row(c1));
    Var vc0 = tp.constant(Tensor::row(c0));
    Var nll = tp.add(tp.mul(vc1, tp.softplus(tp.neg(logits))), tp.mul(vc0, tp.softplus(logits)));
    return -tp.value(tp.sum_all(nll)).v[0];
}

double BeliefVae::elbo_at(int t, const Trajectory& traj, int n_samples, std::mt19937_64& rng) const {
    int horizon = static_cast<int>(traj.records.size());
    if (t < 0 || t > horizon) throw std::invalid_argument("elbo_at: t out of range");
    if (n_samples <= 0) throw std::invalid_argument("elbo_at: n_samples must be positive");

    Tape tp;
    Var h = tp.constant(encoder_.initial_hidden(1));
    LatentPosterior prior0 = encoder_.prior_posterior(1);
    Var mu = tp.constant(prior0.mu);
    Var ls = tp.constant(prior0.log_sigma);
    Var prev_mu = mu, prev_ls = ls;
    for (int s = 0; s < t; ++s) {
        prev_mu = mu;
        prev_ls = ls;
        Var x = tp.constant(encoder_step_input(env_cfg_, {traj.records[s]}));
        Encoder::StepOut out = encoder_.step(tp, x, h);
        h = out.h;
        mu = out.mu;
        ls = out.log_sigma;
    }
    Var pmu = prev_mu, pls = prev_ls;
    if (t == 0 || cfg_.fixed_prior) {
        pmu = tp.constant(prior0.mu);
        pls = tp.constant(prior0.log_sigma);
    }
    double kl = tp.value(gaussian_kl(tp, mu, ls, pmu, pls)).v[0];

    std::normal_distribution<double> normal(0.0, 1.0);
    double recon_sum = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        Tensor eps(1, cfg_.latent_dim);
        for (double& e : eps.v) e = normal(rng);
        Var m = gaussian_reparam(tp, mu, ls, tp.constant(eps));
        Tensor mval = tp.value(m);
        recon_sum += reconstruction_term(mval, traj);
    }
    return recon_sum / n_samples - kl;
}

BeliefVae::UpdateStats BeliefVae::update(const VaeBuffer& buffer, std::mt19937_64& rng) {
    if (buffer.empty()) throw std::invalid_argument("vae update: empty buffer");
    int horizon = env_cfg_.meta_horizon;
    int batch = static_cast<int>(std::min<size_t>(cfg_.minibatch, buffer.size()));

    std::vector<size_t> idx(buffer.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int i = 0; i < batch; ++i) {
        std::uniform_int_distribution<size_t> d(i, idx.size() - 1);
        std::swap(idx[i], idx[d(rng)]);
    }

    Tensor c1t(batch, env_cfg_.num_cells());
    Tensor c0t(batch, env_cfg_.num_cells());
    std::vector<const Trajectory*> trajs(batch);
    for (int b = 0; b < batch; ++b) {
        trajs[b] = &buffer.get(idx[b]);
        std::vector<double> c1, c0;
        reward_counts(*trajs[b], c1, c0);
        for (int c = 0; c < env_cfg_.num_cells(); ++c) {
            c1t.at(b, c) = c1[c];
            c0t.at(b, c) = c0[c];
        }
    }

    Tape tp;
    tp.reserve(static_cast<size_t>(horizon) * 32 + static_cast<size_t>(horizon + 1) * 16);
    Var vc1 = tp.constant(c1t);
    Var vc0 = tp.constant(c0t);
    Var h = tp.constant(encoder_.initial_hidden(batch));
    LatentPosterior prior0 = encoder_.prior_posterior(batch);
    std::vector<Var> mus(horizon + 1), lss(horizon + 1);
    mus[0] = tp.constant(prior0.mu);
    lss[0] = tp.constant(prior0.log_sigma);
    std::vector<StepRecord> rows(batch);
    for (int s = 0; s < horizon; ++s) {
        for (int b = 0; b < batch; ++b) rows[b] = trajs[b]->records[s];
        Var x = tp.constant(encoder_step_input(env_cfg_, rows));
        Encoder::StepOut out = encoder_.step(tp, x, h);
        h = out.h;
        mus[s + 1] = out.mu;
        lss[s + 1] = out.log_sigma;
    }

    std::vector<int> ts;
    double scale = 1.0;
    if (cfg_.subsample_k > 0 && cfg_.subsample_k < horizon + 1) {
        std::uniform_int_distribution<int> d(0, horizon);
        for (int i = 0; i < cfg_.subsample_k; ++i) ts.push_back(d(rng));
        scale = static_cast<double>(horizon + 1) / cfg_.subsample_k;
    } else {
        for (int t = 0; t <= horizon; ++t) ts.push_back(t);
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    Var total{-1};
    double kl_acc = 0.0, recon_acc = 0.0;
    for (int t : ts) {
        Var recon{-1};
        for (int s = 0; s < cfg_.n_latent_samples; ++s) {
            Tensor eps(batch, cfg_.latent_dim);
            for (double& e : eps.v) e = normal(rng);
            Var m = gaussian_reparam(tp, mus[t], lss[t], tp.constant(eps));
            Var logits = decoder_.logits(tp, m);
            Var nll = tp.add(tp.mul(vc1, tp.softplus(tp.neg(logits))), tp.mul(vc0, tp.softplus(logits)));
            Var r = tp.neg(tp.row_sum(nll));
            recon = (recon.id < 0) ? r : tp.add(recon, r);
        }
        if (cfg_.n_latent_samples > 1) recon = tp.mul_scalar(recon, 1.0 / cfg_.n_latent_samples);
        Var pmu = mus[t == 0 ? 0 : t - 1];
        Var pls = lss[t == 0 ? 0 : t - 1];
        if (t == 0 || cfg_.fixed_prior) {
            pmu = mus[0];
            pls = lss[0];
        }
        Var kl = gaussian_kl(tp, mus[t], lss[t], pmu, pls);
        Var term = tp.sub(recon, kl);
        total = (total.id < 0) ? term : tp.add(total, term);
        kl_acc += tp.value(tp.mean_all(kl)).v[0];
        recon_acc += tp.value(tp.mean_all(recon)).v[0];
    }

    Var elbo_per_traj = tp.mul_scalar(total, scale);  // {batch,1}
    Var loss = tp.mul_scalar(tp.mean_all(elbo_per_traj), -cfg_.elbo_coef);

    UpdateStats stats;
    stats.elbo = tp.value(tp.mean_all(elbo_per_traj)).v[0];
    stats.kl = kl_acc / ts.size();
    stats.recon = recon_acc / ts.size();

    params_.zero_grads();
    tp.backward(loss);
    adam_.step(params_);
    return stats;
}

std::vector<double> BeliefVae::decoder_probs(const Tensor& m) const {
    Tape tp;
    Var logits = decoder_.logits(tp, tp.constant(m));
    Tensor p = tp.value(tp.sigmoid(logits));
    return p.v;
}

void BeliefVae::dump_rollout_diagnostics(std::ostream& out, const Trajectory& traj) const {
    std::vector<LatentPosterior> posts = encode_trajectory(traj);
    for (size_t t = 0; t < posts.size(); ++t) {
        nlohmann::json line;
        line["t"] = t;
        line["mu"] = posts[t].mu.v;
        line["log_sigma"] = posts[t].log_sigma.v;
        line["probs"] = decoder_probs(posts[t].mu);
        line["cell"] = env_cfg_.cell_index(t == 0 ? traj.initial_state : traj.records[t - 1].next_state);
        out << line.dump() << "\n";
    }
}

}  // namespace varibad
