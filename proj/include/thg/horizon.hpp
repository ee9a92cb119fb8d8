#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/dynamics.hpp"
#include "thg/envs.hpp"
#include "thg/network.hpp"
#include "thg/rng.hpp"

namespace thg {

// Behavior thresholds (chosen to separate the analytic anchors 4.0 and 1.95
// with wide margins).
constexpr double kSolvedMeanReward = 3.5;
constexpr double kTimeoutReachFrac = 0.5;

struct GreedyEpisode {
    double reward = 0.0;
    bool reached = false;  // ever stood at a junction
    bool timeout = false;
    long long steps = 0;
    double reach_frac = 0.0;  // junctions reached / junction count (T-maze: 0 or 1)
    std::vector<int> decisions;  // junction choices, -1 up arm / +1 down arm
};

/// Greedy rollout on a T-maze of the given length. The corridor presents a
/// constant observation, so once the hidden state is bitwise-fixed under it
/// the policy's behavior is exactly periodic and the remaining corridor is
/// skipped in one jump; the arithmetic is identical to stepping through.
inline GreedyEpisode run_greedy_tmaze(const Model& policy, long long length, int goal) {
    if (length < 1) throw std::invalid_argument("run_greedy_tmaze: length must be >= 1");
    GreedyEpisode out;
    HiddenState h = initial_hidden(policy.spec);
    const long long timeout = 4 * length + 10;
    long long x = 0, t = 0;
    bool fed_idle = false;  // was the observation consumed this step the idle one?
    Tensor2 obs = TMaze::first_observation(goal, length == 1 ? 1 : 2);
    if (length == 1) out.reached = true;
    while (true) {
        Tensor2 flat_before = flatten_hidden(h);
        Tensor2 logits = model_step(policy, obs, h);
        int a = argmax(logits.data);
        bool at_end = (x == length - 1);
        if (at_end && (a == kTop || a == kDown)) {
            int picked = (a == kTop) ? -1 : 1;
            out.reward = (picked == goal) ? 4.0 : -0.1;
            out.reached = true;
            out.reach_frac = 1.0;
            out.steps = t + 1;
            out.decisions.push_back(picked);
            return out;
        }
        if (a == kRight && x + 1 <= length - 1) ++x;
        else if (a == kLeft && x > 0) --x;
        ++t;
        if (x == length - 1) out.reached = true;
        if (t >= timeout) {
            out.timeout = true;
            out.steps = t;
            out.reach_frac = out.reached ? 1.0 : 0.0;
            return out;
        }
        bool next_idle = (x != length - 1);
        Tensor2 flat_after = flatten_hidden(h);
        if (fed_idle && next_idle && max_dist(flat_before, flat_after) == 0.0) {
            // Frozen hidden + constant observation: the action repeats.
            if (a == kRight) {
                long long remaining = (length - 1) - x;
                long long avail = timeout - t;
                if (remaining <= avail) {
                    t += remaining;
                    x = length - 1;
                    out.reached = true;
                    if (t >= timeout) {
                        out.timeout = true;
                        out.steps = t;
                        out.reach_frac = 1.0;
                        return out;
                    }
                } else {
                    out.timeout = true;
                    out.steps = timeout;
                    out.reach_frac = out.reached ? 1.0 : 0.0;
                    return out;
                }
            } else {
                // Stuck or pacing left forever; junction is never reached.
                out.timeout = true;
                out.steps = timeout;
                out.reach_frac = out.reached ? 1.0 : 0.0;
                return out;
            }
        }
        obs = (x == length - 1) ? TMaze::junction_observation() : TMaze::idle_observation();
        fed_idle = (x != length - 1);
    }
}

/// Greedy rollout on an already-reset LookupTreeMaze. Detects exact
/// deterministic loops (identical hidden, observation, and env pose) and
/// jumps straight to the timeout outcome.
inline GreedyEpisode run_greedy_lookup(const Model& policy, LookupTreeMaze& env, Tensor2 obs,
                                       int hold_steps = 0) {
    GreedyEpisode out;
    HiddenState h = initial_hidden(policy.spec);
    int junctions_total = env.maze_count();
    int prev_p = -1, prev_k = -1;
    Tensor2 prev_obs, prev_flat;
    while (true) {
        bool at_junction = (env.position() == env.current_length() - 1);
        if (at_junction && hold_steps > 0) {
            // Hold the agent in place: the junction observation repeats.
            for (int i = 0; i < hold_steps; ++i) model_step(policy, obs, h);
        }
        Tensor2 logits = model_step(policy, obs, h);
        int a = argmax(logits.data);
        if (at_junction && (a == kTop || a == kDown)) out.decisions.push_back(a == kTop ? -1 : 1);
        StepResult sr = env.step(a);
        out.reward += sr.reward;
        ++out.steps;
        if (sr.done) {
            out.timeout = sr.truncated;
            break;
        }
        Tensor2 flat = flatten_hidden(h);
        if (prev_p == env.position() && prev_k == env.maze_index() && prev_obs.same_shape(sr.obs) &&
            max_dist(prev_obs, sr.obs) == 0.0 && prev_flat.same_shape(flat) &&
            max_dist(prev_flat, flat) == 0.0) {
            // Fully repeated configuration: the episode loops until timeout.
            out.timeout = true;
            break;
        }
        prev_p = env.position();
        prev_k = env.maze_index();
        prev_obs = sr.obs;
        prev_flat = std::move(flat);
        obs = std::move(sr.obs);
    }
    out.reach_frac = static_cast<double>(env.junctions_reached()) / junctions_total;
    out.reached = env.junctions_reached() > 0;
    return out;
}

struct SweepEntry {
    long long horizon = 0;  // T-maze length, or LookupTreeMaze maze count
    int episodes = 0;
    double mean_reward = 0.0;
    double success_frac = 0.0;  // episodes scoring >= kSolvedMeanReward
    double reach_frac = 0.0;    // mean junction-reach fraction
    std::string behavior;       // timeout | random | solved | unclassified
};

struct SweepResult {
    std::string model_id;
    std::string env_kind;
    std::vector<SweepEntry> entries;
};

inline std::string classify_behavior(const SweepEntry& e) {
    if (e.episodes < 100)
        throw std::invalid_argument("classify_behavior: need >= 100 episodes, got " +
                                    std::to_string(e.episodes));
    if (e.reach_frac < kTimeoutReachFrac) return "timeout";
    if (e.mean_reward >= kSolvedMeanReward) return "solved";
    return "random";
}

/// Greedy-policy evaluation over a list of horizons. T-maze: horizon is the
/// corridor length. LookupTreeMaze: horizon is the number of mazes, each of
/// length 3.
inline SweepResult horizon_sweep(const Model& policy, const std::string& env_kind,
                                 const std::vector<long long>& horizons, int episodes, Rng& rng,
                                 int tau = 4, const std::string& model_id = "") {
    if (episodes < 1) throw std::invalid_argument("horizon_sweep: episodes must be >= 1");
    for (size_t i = 1; i < horizons.size(); ++i)
        if (horizons[i] <= horizons[i - 1])
            throw std::invalid_argument("horizon_sweep: horizons must be strictly increasing");
    SweepResult res;
    res.model_id = model_id;
    res.env_kind = env_kind;
    for (long long T : horizons) {
        if (T < 1) throw std::invalid_argument("horizon_sweep: horizons must be >= 1");
        SweepEntry e;
        e.horizon = T;
        e.episodes = episodes;
        double reward_sum = 0.0, reach_sum = 0.0;
        int successes = 0;
        for (int ep = 0; ep < episodes; ++ep) {
            GreedyEpisode g;
            if (env_kind == "tmaze") {
                int goal = rng.uniform() < 0.5 ? -1 : 1;
                g = run_greedy_tmaze(policy, T, goal);
            } else if (env_kind == "lookup") {
                LookupTreeMaze env(static_cast<int>(T), static_cast<int>(T), 3, 3, tau, rng.next_u64());
                Tensor2 obs = env.reset();
                g = run_greedy_lookup(policy, env, std::move(obs));
            } else {
                throw std::invalid_argument("horizon_sweep: unknown env kind " + env_kind);
            }
            reward_sum += g.reward;
            reach_sum += g.reach_frac;
            if (g.reward >= kSolvedMeanReward) ++successes;
        }
        e.mean_reward = reward_sum / episodes;
        e.reach_frac = reach_sum / episodes;
        e.success_frac = static_cast<double>(successes) / episodes;
        e.behavior = episodes >= 100 ? classify_behavior(e) : "unclassified";
        res.entries.push_back(std::move(e));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Read-out invariance: roll the idle map, then read the decision argmax.
// ---------------------------------------------------------------------------

/// Idle-map rolling with a bitwise fixed-point early exit (exact: further
/// applications cannot change anything).
inline Tensor2 roll_idle(const IdleMap& map, Tensor2 h, long long steps) {
    for (long long k = 0; k < steps; ++k) {
        Tensor2 next = map.apply(h);
        bool fixed = max_dist(next, h) == 0.0;
        h = std::move(next);
        if (fixed) break;
    }
    return h;
}

struct ReadoutReport {
    std::vector<long long> horizons;
    std::vector<std::vector<int>> decisions;  // [sigma][horizon index], argmax action
    bool compatible = false;   // per sigma, decision constant across horizons
    bool separating = false;   // decisions differ across sigma values
    bool pass = false;
};

/// For each key observation sigma, advance the hidden state T idle steps and
/// record the greedy decision at the junction observation.
inline ReadoutReport readout_invariance_check(const Model& policy, const std::string& env_kind,
                                              const std::vector<long long>& horizons, int tau = 4) {
    TaskStates ts = task_initial_states(policy, env_kind, tau);
    IdleMap map(policy, ts.idle_obs);
    Tensor2 junction_obs;
    if (env_kind == "tmaze") {
        junction_obs = TMaze::junction_observation();
    } else {
        junction_obs = LookupTreeMaze::idle_observation(tau);
        junction_obs[junction_obs.size() - 1] = 1.0;
    }
    ReadoutReport rep;
    rep.horizons = horizons;
    for (const Tensor2& h0 : ts.initial_states) {
        std::vector<int> row;
        for (long long T : horizons) {
            Tensor2 rolled = roll_idle(map, h0, T);
            HiddenState h = unflatten_hidden(policy.spec, rolled);
            Tensor2 logits = model_step(policy, junction_obs, h);
            row.push_back(argmax(logits.data));
        }
        rep.decisions.push_back(std::move(row));
    }
    rep.compatible = true;
    for (const auto& row : rep.decisions)
        for (int d : row)
            if (d != row[0]) rep.compatible = false;
    rep.separating = false;
    for (const auto& row : rep.decisions)
        if (row[0] != rep.decisions[0][0]) rep.separating = true;
    rep.pass = rep.compatible && rep.separating;
    return rep;
}

// ---------------------------------------------------------------------------
// Robustness to inserted idle steps (LookupTreeMaze).
// ---------------------------------------------------------------------------

struct PerturbReport {
    std::vector<int> hold_steps;
    std::vector<double> mean_rewards;          // per hold value
    std::vector<double> decision_match_frac;   // junction decisions equal to the k=0 run
};

/// Re-plays identically seeded episodes while holding the agent at each
/// junction for k extra steps; reports how often the decisions survive.
inline PerturbReport perturbed_idle_check(const Model& policy, int maze_count, int episodes,
                                          const std::vector<int>& hold_steps, int tau, uint64_t seed) {
    if (maze_count < 1 || episodes < 1) throw std::invalid_argument("perturbed_idle_check: bad sizes");
    PerturbReport rep;
    rep.hold_steps = hold_steps;
    std::vector<std::vector<std::vector<int>>> decisions(hold_steps.size());
    rep.mean_rewards.assign(hold_steps.size(), 0.0);
    for (size_t ki = 0; ki < hold_steps.size(); ++ki) {
        for (int ep = 0; ep < episodes; ++ep) {
            // Same seed per episode across k: identical layouts and goals.
            LookupTreeMaze env(maze_count, maze_count, 3, 3, tau, 0);
            Tensor2 obs = env.reset(Rng::derive_seed(seed, "episode-" + std::to_string(ep)));
            GreedyEpisode g = run_greedy_lookup(policy, env, std::move(obs), hold_steps[ki]);
            rep.mean_rewards[ki] += g.reward;
            decisions[ki].push_back(g.decisions);
        }
        rep.mean_rewards[ki] /= episodes;
    }
    for (size_t ki = 0; ki < hold_steps.size(); ++ki) {
        int match = 0;
        for (int ep = 0; ep < episodes; ++ep)
            if (decisions[ki][static_cast<size_t>(ep)] == decisions[0][static_cast<size_t>(ep)]) ++match;
        rep.decision_match_frac.push_back(static_cast<double>(match) / episodes);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Population aggregation.
// ---------------------------------------------------------------------------

struct PopulationEntry {
    std::string model_id;
    std::string family;
    std::string regime;     // training description, e.g. "tmaze-1-3"
    double vaa = 0.0;
    int clusters = 0;
    SweepResult sweep;
};

struct PopulationReport {
    // (behavior class, stability class, regime) -> model count, at the
    // largest common horizon.
    std::map<std::string, int> crosstab;
    // model_id, vaa, horizon, mean_reward rows for scatter plots.
    std::vector<std::tuple<std::string, double, long long, double>> scatter;
};

inline PopulationReport population_report(const std::vector<PopulationEntry>& models) {
    if (models.size() < 2) throw std::invalid_argument("population_report: need at least 2 models");
    PopulationReport rep;
    for (const PopulationEntry& m : models) {
        if (m.model_id.empty()) throw std::invalid_argument("population_report: empty model id");
        std::string stability = m.clusters >= 2 ? "multistable" : "monostable";
        if (!m.sweep.entries.empty()) {
            const SweepEntry& last = m.sweep.entries.back();
            ++rep.crosstab[last.behavior + "," + stability + "," + m.regime];
        }
        for (const SweepEntry& e : m.sweep.entries)
            rep.scatter.emplace_back(m.model_id, m.vaa, e.horizon, e.mean_reward);
    }
    return rep;
}

}  // namespace thg
