#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/cells.hpp"
#include "thg/envs.hpp"
#include "thg/network.hpp"
#include "thg/params.hpp"
#include "thg/rng.hpp"
#include "thg/tape.hpp"
#include "thg/tensor.hpp"

namespace thg {

/// Training hyperparameters (defaults are the T-maze benchmark values).
struct PpoConfig {
    int pi_epochs = 20;
    int vf_epochs = 10;
    double pi_lr = 0.005;
    double vf_lr = 0.001;
    int lr_tmax = 250;  // cosine annealing period
    double grad_clip_norm = 1.0;
    double clip_eps = 0.2;
    double vf_coeff = 1.0;      // c1
    double entropy_coeff = 0.01;  // c2
    double gae_lambda = 0.98;
    double gamma = 0.998;
    int minibatch_count = 2;
    int minibatch_size = 25;  // episodes per minibatch
    double kl_max = 0.2;
    int sample_steps = 1400;
    int total_iterations = 250;

    void validate() const {
        auto pos = [](double v, const char* n) {
            if (!(v > 0)) throw std::invalid_argument(std::string("PpoConfig: ") + n + " must be positive");
        };
        pos(pi_epochs, "pi_epochs");
        pos(vf_epochs, "vf_epochs");
        pos(pi_lr, "pi_lr");
        pos(vf_lr, "vf_lr");
        pos(lr_tmax, "lr_tmax");
        pos(grad_clip_norm, "grad_clip_norm");
        pos(minibatch_count, "minibatch_count");
        pos(minibatch_size, "minibatch_size");
        pos(kl_max, "kl_max");
        pos(sample_steps, "sample_steps");
        if (!(clip_eps > 0 && clip_eps < 1)) throw std::invalid_argument("PpoConfig: clip_eps must be in (0,1)");
        if (!(gae_lambda > 0 && gae_lambda <= 1)) throw std::invalid_argument("PpoConfig: gae_lambda must be in (0,1]");
        if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("PpoConfig: gamma must be in (0,1]");
        if (total_iterations < 0) throw std::invalid_argument("PpoConfig: total_iterations must be >= 0");
    }
};

/// lr(0) = base, lr(T_max/2) = base/2, lr(>= T_max) = 0.
inline double cosine_lr(double base, int iteration, int tmax) {
    if (iteration >= tmax) return 0.0;
    return base * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(iteration) / tmax));
}

struct Episode {
    std::vector<Tensor2> observations;
    std::vector<int> actions;
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<double> advantages;
    std::vector<double> returns;
    double bootstrap_value = 0.0;  // critic value past the end; 0 at true terminals
    bool truncated = false;

    size_t length() const { return actions.size(); }
    double total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }
};

struct RolloutBuffer {
    std::vector<Episode> episodes;
    size_t total_steps = 0;
    double mean_episode_reward = 0.0;
};

/// Collect whole episodes until at least sample_steps environment steps.
/// Policy and critic each encode the observation stream with their own
/// hidden state, reset to zero at every episode start.
inline RolloutBuffer collect_rollouts(Env& env, const Model& policy, const Model& critic, int sample_steps,
                                      Rng& rng) {
    RolloutBuffer buf;
    while (buf.total_steps < static_cast<size_t>(sample_steps)) {
        Episode ep;
        Tensor2 obs = env.reset();
        HiddenState hp = initial_hidden(policy.spec);
        HiddenState hc = initial_hidden(critic.spec);
        while (true) {
            Tensor2 logits = model_step(policy, obs, hp);
            double value = model_step(critic, obs, hc)[0];
            int action = sample_categorical(rng, logits.data);
            double logp = logits[static_cast<size_t>(action)] - log_sum_exp(logits.data);
            StepResult sr = env.step(action);
            ep.observations.push_back(obs);
            ep.actions.push_back(action);
            ep.log_probs.push_back(logp);
            ep.values.push_back(value);
            ep.rewards.push_back(sr.reward);
            if (sr.done) {
                ep.truncated = sr.truncated;
                // Timeout is truncation, not failure: bootstrap with the
                // critic's value of the cut-off next state.
                ep.bootstrap_value = sr.truncated ? model_step(critic, sr.obs, hc)[0] : 0.0;
                break;
            }
            obs = std::move(sr.obs);
        }
        buf.total_steps += ep.length();
        buf.episodes.push_back(std::move(ep));
    }
    double sum = 0.0;
    for (const Episode& e : buf.episodes) sum += e.total_reward();
    buf.mean_episode_reward = sum / static_cast<double>(buf.episodes.size());
    return buf;
}

/// GAE: delta_t = r_t + gamma V_{t+1} - V_t, A_t = delta_t + gamma lambda A_{t+1}.
/// Advantages are then normalized over the whole batch (mean 0, std 1).
inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
    if (buf.episodes.empty()) throw std::invalid_argument("compute_gae: empty buffer");
    for (Episode& ep : buf.episodes) {
        const size_t n = ep.length();
        ep.advantages.assign(n, 0.0);
        ep.returns.assign(n, 0.0);
        double next_adv = 0.0;
        double next_value = ep.bootstrap_value;
        for (size_t i = n; i-- > 0;) {
            double delta = ep.rewards[i] + gamma * next_value - ep.values[i];
            next_adv = delta + gamma * lambda * next_adv;
            next_value = ep.values[i];
            ep.advantages[i] = next_adv;
            ep.returns[i] = next_adv + ep.values[i];
        }
    }
    double mean = 0.0;
    size_t n = 0;
    for (const Episode& ep : buf.episodes)
        for (double a : ep.advantages) mean += a, ++n;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const Episode& ep : buf.episodes)
        for (double a : ep.advantages) var += (a - mean) * (a - mean);
    double std = std::sqrt(var / static_cast<double>(n));
    for (Episode& ep : buf.episodes)
        for (double& a : ep.advantages) a = (a - mean) / (std + 1e-8);
}

// ---------------------------------------------------------------------------
// Adam with cosine-annealed learning rate.
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Tensor2> m, v;
    int t = 0;

    static AdamState like(const ParamSet& ps) {
        AdamState s;
        for (const auto& e : ps) {
            s.m.emplace_back(e.value.rows, e.value.cols);
            s.v.emplace_back(e.value.rows, e.value.cols);
        }
        return s;
    }
};

inline void adam_step(ParamSet& params, const std::vector<Tensor2>& grads, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (grads.size() != params.size()) throw std::invalid_argument("adam_step: gradient count mismatch");
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, st.t);
    const double bc2 = 1.0 - std::pow(beta2, st.t);
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor2& p = params[i].value;
        const Tensor2& g = grads[i];
        Tensor2& m = st.m[i];
        Tensor2& v = st.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            p[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
        }
    }
}

/// Keep the BMRU write levels strictly positive so the two attractors stay
/// separated.
inline void project_alpha(ParamSet& params, double floor = 1e-3) {
    for (auto& e : params)
        if (e.name.size() >= 5 && e.name.compare(e.name.size() - 5, 5, "alpha") == 0)
            for (double& v : e.value.data) v = std::max(v, floor);
}

/// Scale gradients so the global L2 norm is at most max_norm; returns the
/// pre-clip norm.
inline double clip_global_norm(std::vector<Tensor2>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor2& g : grads)
        for (double v : g.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm) {
        double f = max_norm / norm;
        for (Tensor2& g : grads)
            for (double& v : g.data) v *= f;
    }
    return norm;
}

struct UpdateStats {
    double pi_loss = 0.0;
    double vf_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double lr_pi = 0.0;
    double lr_vf = 0.0;
    bool kl_early_stop = false;
};

namespace detail {

/// Unroll one episode of the policy on a tape and return per-step logit vars.
inline std::vector<Var> unroll_policy(Tape& tape, TapeAlg& alg, const Model& policy, const Episode& ep,
                                      bool train_mode, Rng* dropout_rng) {
    HiddenState h0 = initial_hidden(policy.spec);
    std::vector<Var> slots;
    for (const Tensor2& s : h0.slots) slots.push_back(tape.constant(s));
    std::vector<Var> logits;
    logits.reserve(ep.length());
    for (const Tensor2& obs : ep.observations) {
        Var x = tape.constant(obs);
        logits.push_back(step_network(alg, policy.spec, x, slots, train_mode, dropout_rng));
    }
    return logits;
}

inline Var sum_vars(Tape& tape, const std::vector<Var>& vars) {
    if (vars.empty()) throw std::invalid_argument("sum_vars: empty");
    Var acc = vars[0];
    for (size_t i = 1; i < vars.size(); ++i) acc = tape.add(acc, vars[i]);
    return acc;
}

}  // namespace detail

/// One PPO update on a frozen rollout buffer. Minibatches are whole
/// episodes; gradients come from full-episode BPTT. The policy phase early
/// stops once the approximate KL (mean old - new log-prob) exceeds kl_max.
inline UpdateStats ppo_update(Model& policy, Model& critic, AdamState& policy_opt, AdamState& critic_opt,
                              const RolloutBuffer& buf, const PpoConfig& cfg, int iteration, Rng& shuffle_rng,
                              Rng* dropout_rng = nullptr, bool dropout = false) {
    for (const Episode& ep : buf.episodes)
        if (ep.advantages.size() != ep.length())
            throw std::invalid_argument("ppo_update: advantages not computed");
    UpdateStats stats;
    stats.lr_pi = cosine_lr(cfg.pi_lr, iteration, cfg.lr_tmax);
    stats.lr_vf = cosine_lr(cfg.vf_lr, iteration, cfg.lr_tmax);

    const size_t n_eps = buf.episodes.size();
    std::vector<size_t> order(n_eps);
    std::iota(order.begin(), order.end(), 0);

    auto minibatches = [&](std::vector<std::vector<size_t>>& out) {
        out.clear();
        for (size_t i = n_eps; i-- > 1;) std::swap(order[i], order[static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int>(i + 1)))]);
        size_t pos = 0;
        for (int b = 0; b < cfg.minibatch_count && pos < n_eps; ++b) {
            size_t take = std::min(static_cast<size_t>(cfg.minibatch_size), n_eps - pos);
            out.emplace_back(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + take));
            pos += take;
        }
    };

    // ----- policy phase -----
    double pi_loss_acc = 0.0, ent_acc = 0.0, kl_acc = 0.0, clip_acc = 0.0;
    size_t pi_batches = 0;
    bool stop = false;
    for (int epoch = 0; epoch < cfg.pi_epochs && !stop; ++epoch) {
        std::vector<std::vector<size_t>> batches;
        minibatches(batches);
        for (const auto& batch : batches) {
            Tape tape;
            TapeAlg alg{&tape, &policy.params, {}};
            std::vector<Var> surrogate_terms, entropy_terms;
            size_t step_count = 0;
            double kl_sum = 0.0, clip_count = 0.0;
            for (size_t ei : batch) {
                const Episode& ep = buf.episodes[ei];
                std::vector<Var> logits =
                    detail::unroll_policy(tape, alg, policy, ep, dropout, dropout ? dropout_rng : nullptr);
                for (size_t t = 0; t < ep.length(); ++t) {
                    Var logp = tape.log_prob(logits[t], ep.actions[t]);
                    Var ratio = tape.exp_(tape.add_scalar(logp, -ep.log_probs[t]));
                    double adv = ep.advantages[t];
                    Var unclipped = tape.scale(ratio, adv);
                    Var clipped = tape.scale(tape.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv);
                    surrogate_terms.push_back(tape.minimum(unclipped, clipped));
                    entropy_terms.push_back(tape.entropy(logits[t]));
                    double r = tape.value(ratio)[0];
                    kl_sum += ep.log_probs[t] - tape.value(logp)[0];
                    if (std::fabs(r - 1.0) > cfg.clip_eps) clip_count += 1.0;
                    ++step_count;
                }
            }
            double inv_n = 1.0 / static_cast<double>(step_count);
            Var loss = tape.add(tape.scale(detail::sum_vars(tape, surrogate_terms), -inv_n),
                                tape.scale(detail::sum_vars(tape, entropy_terms), -cfg.entropy_coeff * inv_n));
            double loss_val = tape.value(loss)[0];
            if (!std::isfinite(loss_val))
                throw std::runtime_error("ppo_update: non-finite policy loss at iteration " +
                                         std::to_string(iteration));
            tape.backward_scalar(loss);
            std::vector<Tensor2> grads;
            grads.reserve(policy.params.size());
            for (const auto& e : policy.params) grads.push_back(alg.grad(e.name));
            clip_global_norm(grads, cfg.grad_clip_norm);
            adam_step(policy.params, grads, policy_opt, stats.lr_pi);
            project_alpha(policy.params);

            pi_loss_acc += loss_val;
            ent_acc += tape.value(detail::sum_vars(tape, entropy_terms))[0] * inv_n;
            clip_acc += clip_count * inv_n;
            double approx_kl = kl_sum * inv_n;
            kl_acc += approx_kl;
            ++pi_batches;
            if (approx_kl > cfg.kl_max) {
                stats.kl_early_stop = true;
                stop = true;
                break;
            }
        }
    }
    if (pi_batches > 0) {
        stats.pi_loss = pi_loss_acc / static_cast<double>(pi_batches);
        stats.entropy = ent_acc / static_cast<double>(pi_batches);
        stats.approx_kl = kl_acc / static_cast<double>(pi_batches);
        stats.clip_fraction = clip_acc / static_cast<double>(pi_batches);
    }

    // ----- value-function phase -----
    double vf_loss_acc = 0.0;
    size_t vf_batches = 0;
    for (int epoch = 0; epoch < cfg.vf_epochs; ++epoch) {
        std::vector<std::vector<size_t>> batches;
        minibatches(batches);
        for (const auto& batch : batches) {
            Tape tape;
            TapeAlg alg{&tape, &critic.params, {}};
            std::vector<Var> sq_terms;
            size_t step_count = 0;
            for (size_t ei : batch) {
                const Episode& ep = buf.episodes[ei];
                HiddenState h0 = initial_hidden(critic.spec);
                std::vector<Var> slots;
                for (const Tensor2& s : h0.slots) slots.push_back(tape.constant(s));
                for (size_t t = 0; t < ep.length(); ++t) {
                    Var x = tape.constant(ep.observations[t]);
                    Var v = step_network(alg, critic.spec, x, slots, dropout, dropout ? dropout_rng : nullptr);
                    Var diff = tape.add_scalar(v, -ep.returns[t]);
                    sq_terms.push_back(tape.mul(diff, diff));
                    ++step_count;
                }
            }
            double inv_n = 1.0 / static_cast<double>(step_count);
            Var loss = tape.scale(detail::sum_vars(tape, sq_terms), cfg.vf_coeff * inv_n);
            double loss_val = tape.value(loss)[0];
            if (!std::isfinite(loss_val))
                throw std::runtime_error("ppo_update: non-finite value loss at iteration " +
                                         std::to_string(iteration));
            tape.backward_scalar(loss);
            std::vector<Tensor2> grads;
            grads.reserve(critic.params.size());
            for (const auto& e : critic.params) grads.push_back(alg.grad(e.name));
            clip_global_norm(grads, cfg.grad_clip_norm);
            adam_step(critic.params, grads, critic_opt, stats.lr_vf);
            project_alpha(critic.params);
            vf_loss_acc += loss_val;
            ++vf_batches;
        }
    }
    if (vf_batches > 0) stats.vf_loss = vf_loss_acc / static_cast<double>(vf_batches);
    return stats;
}

// ---------------------------------------------------------------------------
// Full training loop.
// ---------------------------------------------------------------------------

struct TrainSetup {
    std::function<std::unique_ptr<Env>(uint64_t seed)> make_env;
    ArchKind arch = ArchKind::TMazeSmall;
    CellFamily family = CellFamily::GRU;
    int obs_width = 0;
    PpoConfig ppo;
    uint64_t seed = 0;
    bool dropout = false;  // LookupTreeMaze architectures only
};

struct MetricsRow {
    int iteration = 0;
    double mean_reward = 0.0;
    double pi_loss = 0.0, vf_loss = 0.0, entropy = 0.0, approx_kl = 0.0, lr_pi = 0.0, lr_vf = 0.0;
};

struct TrainResult {
    Model policy, critic;
    AdamState policy_opt, critic_opt;
    std::vector<MetricsRow> history;
};

/// collect -> GAE -> update for total_iterations. The optional callback
/// runs after every iteration (checkpoint cadence, logging).
inline TrainResult train(const TrainSetup& setup,
                         const std::function<void(int, const TrainResult&)>& per_iteration = {}) {
    setup.ppo.validate();
    TrainResult res;
    Rng init_pi = Rng::substream(setup.seed, "policy-init");
    Rng init_vf = Rng::substream(setup.seed, "critic-init");
    res.policy = init_params(build_architecture(setup.arch, setup.family, setup.obs_width, 4), init_pi);
    res.critic = init_params(build_architecture(setup.arch, setup.family, setup.obs_width, 1), init_vf);
    res.policy_opt = AdamState::like(res.policy.params);
    res.critic_opt = AdamState::like(res.critic.params);

    Rng action_rng = Rng::substream(setup.seed, "rollout-actions");
    Rng shuffle_rng = Rng::substream(setup.seed, "minibatch-shuffle");
    Rng dropout_rng = Rng::substream(setup.seed, "dropout");
    std::unique_ptr<Env> env = setup.make_env(Rng::derive_seed(setup.seed, "env"));

    for (int it = 0; it < setup.ppo.total_iterations; ++it) {
        RolloutBuffer buf = collect_rollouts(*env, res.policy, res.critic, setup.ppo.sample_steps, action_rng);
        compute_gae(buf, setup.ppo.gamma, setup.ppo.gae_lambda);
        UpdateStats st = ppo_update(res.policy, res.critic, res.policy_opt, res.critic_opt, buf, setup.ppo, it,
                                    shuffle_rng, &dropout_rng, setup.dropout);
        MetricsRow row;
        row.iteration = it;
        row.mean_reward = buf.mean_episode_reward;
        row.pi_loss = st.pi_loss;
        row.vf_loss = st.vf_loss;
        row.entropy = st.entropy;
        row.approx_kl = st.approx_kl;
        row.lr_pi = st.lr_pi;
        row.lr_vf = st.lr_vf;
        res.history.push_back(row);
        if (per_iteration) per_iteration(it, res);
    }
    return res;
}

}  // namespace thg
