#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include "thg/rng.hpp"
#include "thg/tensor.hpp"

namespace thg {

// Actions, shared by both mazes.
enum Action : int { kRight = 0, kTop = 1, kLeft = 2, kDown = 3 };

struct StepResult {
    Tensor2 obs;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;  // timeout: episode cut, task not failed
};

/// POMDP surface: fixed observation width, four actions, whole-episode
/// reset/step. Stepping a finished episode is an error.
class Env {
  public:
    virtual ~Env() = default;
    virtual int obs_width() const = 0;
    int action_count() const { return 4; }
    virtual Tensor2 reset() = 0;
    virtual Tensor2 reset(uint64_t seed) = 0;
    virtual StepResult step(int action) = 0;
    virtual bool done() const = 0;
};

// Goal-signal encoding: one-hot over {-1, 0, +1}.
inline void encode_ternary(Tensor2& obs, int offset, int value) {
    obs[static_cast<size_t>(offset + value + 1)] = 1.0;
}

/// T-maze of length L. Corridor cells (0,0)..(L-1,0) plus the two arms
/// (L-1,-1) and (L-1,+1). The goal side is shown only at t=0; afterwards
/// the agent sees just the corridor-end flag. Entering the goal arm pays
/// +4, the wrong arm -0.1. Timeout after 4L+10 steps.
///
/// Observation (width 4): [goal=-1, goal=0, goal=+1, end-flag].
class TMaze : public Env {
  public:
    static constexpr int kObsWidth = 4;

    TMaze(int length, uint64_t seed) : rng_(seed) {
        if (length < 1) throw std::invalid_argument("TMaze: length must be >= 1");
        length_ = length;
    }

    int obs_width() const override { return kObsWidth; }
    int length() const { return length_; }
    int goal() const { return goal_; }
    int x() const { return x_; }
    int y() const { return y_; }
    bool done() const override { return done_; }
    bool reached_junction() const { return reached_end_; }
    int timeout_steps() const { return 4 * length_ + 10; }

    Tensor2 reset() override {
        goal_ = rng_.uniform() < 0.5 ? -1 : 1;
        x_ = 0;
        y_ = 0;
        t_ = 0;
        done_ = false;
        reached_end_ = (length_ == 1);
        return observe(true);
    }

    Tensor2 reset(uint64_t seed) override {
        rng_.reseed(seed);
        return reset();
    }

    StepResult step(int action) override {
        if (done_) throw std::logic_error("TMaze: step after episode end");
        if (action < 0 || action > 3) throw std::invalid_argument("TMaze: action out of range");
        StepResult r;
        // Transition map: illegal moves leave the state unchanged.
        // Action 1 (top) decreases y; goal -1 denotes the up arm.
        int nx = x_, ny = y_;
        switch (action) {
            case kRight:
                if (y_ == 0 && x_ + 1 <= length_ - 1) nx = x_ + 1;
                break;
            case kLeft:
                if (y_ == 0 && x_ - 1 >= 0) nx = x_ - 1;
                break;
            case kTop:
                if (y_ == 0 && x_ == length_ - 1) ny = -1;
                break;
            case kDown:
                if (y_ == 0 && x_ == length_ - 1) ny = 1;
                break;
        }
        x_ = nx;
        y_ = ny;
        ++t_;
        if (x_ == length_ - 1) reached_end_ = true;
        if (y_ != 0) {
            done_ = true;
            r.reward = (y_ == goal_) ? 4.0 : -0.1;
        } else if (t_ >= timeout_steps()) {
            done_ = true;
            r.truncated = true;
        }
        r.done = done_;
        r.obs = observe(false);
        return r;
    }

    Tensor2 observe(bool initial) const {
        Tensor2 o(kObsWidth, 1);
        encode_ternary(o, 0, initial ? goal_ : 0);
        if (x_ == length_ - 1) o[3] = 1.0;
        return o;
    }

    /// The constant mid-corridor observation (zero goal, flag 0).
    static Tensor2 idle_observation() {
        Tensor2 o(kObsWidth, 1);
        encode_ternary(o, 0, 0);
        return o;
    }

    /// Junction observation (zero goal, flag 1).
    static Tensor2 junction_observation() {
        Tensor2 o = idle_observation();
        o[3] = 1.0;
        return o;
    }

    /// First observation of an episode with goal g, before any step.
    static Tensor2 first_observation(int g, int length) {
        Tensor2 o(kObsWidth, 1);
        encode_ternary(o, 0, g);
        if (length == 1) o[3] = 1.0;
        return o;
    }

  private:
    Rng rng_;
    int length_ = 1;
    int goal_ = 1;
    int x_ = 0, y_ = 0, t_ = 0;
    bool done_ = true;
    bool reached_end_ = false;
};

/// LookupTreeMaze: b T-mazes in series. The full lookup table d (length
/// tau, entries +-1, never constant) is shown once at t=0; at the first
/// step of each maze an index into d pointing at that maze's goal is
/// shown. Junction rewards are +4/b or -0.1/b, so an optimal episode
/// totals 4 regardless of b. Timeout after 4*sum(lengths) + 10*b steps.
///
/// Observation (width 3*tau + tau + 2): tau ternary one-hot triples for
/// the table, a (tau+1)-way one-hot for the index (last slot = absent),
/// and the corridor-end flag.
class LookupTreeMaze : public Env {
  public:
    LookupTreeMaze(int n_low, int n_high, int l_low, int l_high, int tau, uint64_t seed) : rng_(seed) {
        if (!(0 < n_low && n_low <= n_high)) throw std::invalid_argument("LookupTreeMaze: bad maze-count range");
        if (!(0 < l_low && l_low <= l_high)) throw std::invalid_argument("LookupTreeMaze: bad length range");
        if (tau < 2) throw std::invalid_argument("LookupTreeMaze: tau must be >= 2");
        n_low_ = n_low;
        n_high_ = n_high;
        l_low_ = l_low;
        l_high_ = l_high;
        tau_ = tau;
    }

    static int obs_width_for(int tau) { return 3 * tau + tau + 2; }
    int obs_width() const override { return obs_width_for(tau_); }
    int tau() const { return tau_; }
    bool done() const override { return done_; }
    int maze_count() const { return b_; }
    int maze_index() const { return k_; }
    int goal() const { return goal_; }
    int junctions_reached() const { return junctions_reached_; }
    const std::vector<int>& table() const { return d_; }
    int current_index() const { return index_; }
    int current_length() const { return len_; }
    int position() const { return p_; }

    Tensor2 reset() override {
        b_ = n_low_ + rng_.uniform_int(n_high_ - n_low_ + 1);
        // Table: uniform over the 2^tau - 2 non-constant tables.
        d_.assign(static_cast<size_t>(tau_), 0);
        do {
            for (int& v : d_) v = rng_.uniform() < 0.5 ? -1 : 1;
        } while (constant_table());
        lengths_.resize(static_cast<size_t>(b_));
        int total_len = 0;
        for (int& l : lengths_) {
            l = l_low_ + rng_.uniform_int(l_high_ - l_low_ + 1);
            total_len += l;
        }
        timeout_ = 4 * total_len + 10 * b_;
        k_ = 0;
        p_ = 0;
        t_ = 0;
        done_ = false;
        junctions_reached_ = 0;
        enter_maze(0);
        return observe(true, true);
    }

    Tensor2 reset(uint64_t seed) override {
        rng_.reseed(seed);
        return reset();
    }

    StepResult step(int action) override {
        if (done_) throw std::logic_error("LookupTreeMaze: step after episode end");
        if (action < 0 || action > 3) throw std::invalid_argument("LookupTreeMaze: action out of range");
        StepResult r;
        bool new_maze = false;
        bool at_junction = (p_ == len_ - 1);
        if (action == kRight && !at_junction) {
            ++p_;
        } else if (action == kLeft && p_ > 0) {
            --p_;
        } else if (at_junction && (action == kTop || action == kDown)) {
            // Junction decision. Action 1 (top) picks the up arm (goal -1),
            // action 3 (down) the down arm (goal +1).
            int picked = (action == kDown) ? 1 : -1;
            r.reward = (picked == goal_) ? 4.0 / b_ : -0.1 / b_;
            ++k_;
            if (k_ >= b_) {
                done_ = true;
            } else {
                p_ = 0;
                enter_maze(k_);
                new_maze = true;
            }
        }
        ++t_;
        if (!done_ && p_ == len_ - 1) maybe_count_junction();
        if (!done_ && t_ >= timeout_) {
            done_ = true;
            r.truncated = true;
        }
        r.done = done_;
        r.obs = observe(false, new_maze);
        return r;
    }

    Tensor2 observe(bool initial, bool new_maze) const {
        Tensor2 o(obs_width(), 1);
        for (int i = 0; i < tau_; ++i) encode_ternary(o, 3 * i, initial ? d_[static_cast<size_t>(i)] : 0);
        int index_slot = (initial || new_maze) ? index_ : tau_;
        o[static_cast<size_t>(3 * tau_ + index_slot)] = 1.0;
        if (p_ == len_ - 1) o[static_cast<size_t>(obs_width() - 1)] = 1.0;
        return o;
    }

    /// Mid-corridor observation: zero table, index absent, flag 0.
    static Tensor2 idle_observation(int tau) {
        Tensor2 o(obs_width_for(tau), 1);
        for (int i = 0; i < tau; ++i) encode_ternary(o, 3 * i, 0);
        o[static_cast<size_t>(3 * tau + tau)] = 1.0;
        return o;
    }

    /// t=0-style observation for a given table, index absent, flag 0.
    static Tensor2 table_observation(const std::vector<int>& table) {
        int tau = static_cast<int>(table.size());
        Tensor2 o(obs_width_for(tau), 1);
        for (int i = 0; i < tau; ++i) encode_ternary(o, 3 * i, table[static_cast<size_t>(i)]);
        o[static_cast<size_t>(3 * tau + tau)] = 1.0;
        return o;
    }

  private:
    bool constant_table() const {
        bool has_up = false, has_down = false;
        for (int v : d_) (v == -1 ? has_up : has_down) = true;
        return !(has_up && has_down);
    }

    void enter_maze(int k) {
        len_ = lengths_[static_cast<size_t>(k)];
        goal_ = rng_.uniform() < 0.5 ? -1 : 1;
        // Index uniformly among table entries matching the goal.
        std::vector<int> candidates;
        for (int i = 0; i < tau_; ++i)
            if (d_[static_cast<size_t>(i)] == goal_) candidates.push_back(i);
        index_ = candidates[static_cast<size_t>(rng_.uniform_int(static_cast<int>(candidates.size())))];
        counted_junction_ = false;
        if (p_ == len_ - 1) maybe_count_junction();
    }

    void maybe_count_junction() {
        if (!counted_junction_) {
            ++junctions_reached_;
            counted_junction_ = true;
        }
    }

    Rng rng_;
    int n_low_ = 1, n_high_ = 1, l_low_ = 1, l_high_ = 1, tau_ = 2;
    int b_ = 1, k_ = 0, p_ = 0, t_ = 0, len_ = 1, goal_ = 1, index_ = 0;
    int timeout_ = 0;
    int junctions_reached_ = 0;
    bool counted_junction_ = false;
    std::vector<int> d_;
    std::vector<int> lengths_;
    bool done_ = true;
};

/// Training distribution over T-mazes: each reset draws a fresh length
/// uniformly from [lo, hi].
class TMazeRangeEnv : public Env {
  public:
    TMazeRangeEnv(int lo, int hi, uint64_t seed) : rng_(seed), lo_(lo), hi_(hi) {
        if (!(0 < lo && lo <= hi)) throw std::invalid_argument("TMazeRangeEnv: bad length range");
    }

    int obs_width() const override { return TMaze::kObsWidth; }
    bool done() const override { return !inner_ || inner_->done(); }
    const TMaze& inner() const { return *inner_; }

    Tensor2 reset() override {
        int len = lo_ + rng_.uniform_int(hi_ - lo_ + 1);
        inner_ = std::make_unique<TMaze>(len, rng_.next_u64());
        return inner_->reset();
    }

    Tensor2 reset(uint64_t seed) override {
        rng_.reseed(seed);
        return reset();
    }

    StepResult step(int action) override {
        if (!inner_) throw std::logic_error("TMazeRangeEnv: step before reset");
        return inner_->step(action);
    }

  private:
    Rng rng_;
    int lo_ = 1, hi_ = 1;
    std::unique_ptr<TMaze> inner_;
};

// ---------------------------------------------------------------------------
// Scripted reference agents.
// ---------------------------------------------------------------------------

/// Optimal T-maze policy: walk right, then turn toward the remembered goal.
struct TMazeOracle {
    int goal = 0;
    void observe_reset(const Tensor2& obs) { goal = obs[0] > 0.5 ? -1 : (obs[2] > 0.5 ? 1 : 0); }
    int act(const Tensor2& obs) const {
        bool at_end = obs[3] > 0.5;
        if (!at_end) return kRight;
        return goal == -1 ? kTop : kDown;
    }
};

/// Optimal LookupTreeMaze policy: remember the table, follow each index.
struct LookupOracle {
    std::vector<int> table;
    int index = 0;
    int tau = 0;

    void observe_reset(const Tensor2& obs, int tau_in) {
        tau = tau_in;
        table.assign(static_cast<size_t>(tau), 0);
        for (int i = 0; i < tau; ++i) {
            if (obs[static_cast<size_t>(3 * i)] > 0.5) table[static_cast<size_t>(i)] = -1;
            if (obs[static_cast<size_t>(3 * i + 2)] > 0.5) table[static_cast<size_t>(i)] = 1;
        }
        read_index(obs);
    }
    void read_index(const Tensor2& obs) {
        for (int i = 0; i < tau; ++i)
            if (obs[static_cast<size_t>(3 * tau + i)] > 0.5) index = i;
    }
    int act(const Tensor2& obs) {
        read_index(obs);
        bool at_end = obs[static_cast<size_t>(obs.size() - 1)] > 0.5;
        if (!at_end) return kRight;
        return table[static_cast<size_t>(index)] == -1 ? kTop : kDown;
    }
};

}  // namespace thg
