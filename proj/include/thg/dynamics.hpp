#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/envs.hpp"
#include "thg/network.hpp"
#include "thg/tensor.hpp"

namespace thg {

inline Tensor2 flatten_hidden(const HiddenState& h) {
    Tensor2 out(0, 1);
    for (const Tensor2& s : h.slots) out = concat_rows(out, s);
    return out;
}

inline HiddenState unflatten_hidden(const NetworkSpec& spec, const Tensor2& flat) {
    HiddenState h = initial_hidden(spec);
    size_t off = 0;
    for (Tensor2& s : h.slots) {
        for (size_t i = 0; i < s.size(); ++i) s[i] = flat[off + i];
        off += s.size();
    }
    if (off != flat.size()) throw std::invalid_argument("unflatten_hidden: size mismatch");
    return h;
}

/// The hidden-state update under a frozen idle observation: one network
/// step with the heads ignored and dropout disabled.
class IdleMap {
  public:
    IdleMap(const Model& model, Tensor2 idle_obs) : model_(&model), obs_(std::move(idle_obs)) {
        if (obs_.rows != model.spec.input_width)
            throw std::invalid_argument("IdleMap: observation width mismatch");
    }

    Tensor2 apply(const Tensor2& flat) const {
        HiddenState h = unflatten_hidden(model_->spec, flat);
        model_step(*model_, obs_, h);
        return flatten_hidden(h);
    }

    const Model& model() const { return *model_; }
    const Tensor2& idle_obs() const { return obs_; }

  private:
    const Model* model_;
    Tensor2 obs_;
};

struct IterateResult {
    Tensor2 final_state;
    int converged_step = -1;  // first step with ||h_k - h_{k-1}||_inf < eps/10
    bool diverged = false;
};

/// M-fold application of the map with a convergence trace.
template <class Map>
IterateResult iterate_map(const Map& map, const Tensor2& h0, int iterations, double eps) {
    if (iterations < 1) throw std::invalid_argument("iterate_map: M must be >= 1");
    IterateResult res;
    Tensor2 h = h0;
    for (int k = 1; k <= iterations; ++k) {
        Tensor2 next = map.apply(h);
        if (max_norm(next) > 1e6) {
            res.diverged = true;
            res.final_state = next;
            return res;
        }
        double d = max_dist(next, h);
        if (res.converged_step < 0 && d < eps / 10.0) res.converged_step = k;
        h = std::move(next);
        // Bitwise fixed point: further iterations cannot change anything.
        if (d == 0.0) break;
    }
    res.final_state = std::move(h);
    return res;
}

struct StabilityReport {
    int initial_set_size = 0;
    int iterations = 0;
    double eps = 0.0;
    double vaa = 0.0;
    int cluster_count = 0;
    bool multistable = false;
    std::vector<Tensor2> finals;
    std::vector<int> cluster_assignment;  // greedy representative index per initial state
    std::vector<Tensor2> attractors;      // cluster representatives
    bool any_diverged = false;
};

/// Approximate variability-among-attractors: iterate each initial state M
/// times, then average 1 / #{j : ||f_i - f_j|| <= eps}. The eps-ball count
/// is used exactly as stated, with no transitive closure. A greedy
/// representative pass provides the cluster count for classification.
template <class Map>
StabilityReport vaa(const Map& map, const std::vector<Tensor2>& initial_states, int iterations, double eps) {
    if (initial_states.size() < 2) throw std::invalid_argument("vaa: need at least two initial states");
    StabilityReport rep;
    rep.initial_set_size = static_cast<int>(initial_states.size());
    rep.iterations = iterations;
    rep.eps = eps;
    for (const Tensor2& h0 : initial_states) {
        IterateResult it = iterate_map(map, h0, iterations, eps);
        if (it.diverged) rep.any_diverged = true;
        if (!it.final_state.all_finite())
            throw std::runtime_error("vaa: non-finite iterate from an initial state");
        rep.finals.push_back(std::move(it.final_state));
    }
    const size_t n = rep.finals.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        int near = 0;
        for (size_t j = 0; j < n; ++j)
            if (l2_dist(rep.finals[i], rep.finals[j]) <= eps) ++near;
        acc += 1.0 / near;
    }
    rep.vaa = acc / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        int assigned = -1;
        for (size_t c = 0; c < rep.attractors.size(); ++c) {
            if (l2_dist(rep.finals[i], rep.attractors[c]) <= eps) {
                assigned = static_cast<int>(c);
                break;
            }
        }
        if (assigned < 0) {
            rep.attractors.push_back(rep.finals[i]);
            assigned = static_cast<int>(rep.attractors.size()) - 1;
        }
        rep.cluster_assignment.push_back(assigned);
    }
    rep.cluster_count = static_cast<int>(rep.attractors.size());
    rep.multistable = rep.cluster_count >= 2;
    return rep;
}

/// Diagnostic single-linkage clusters at threshold eps (human inspection
/// only; never feeds the VAA number).
inline int single_linkage_clusters(const std::vector<Tensor2>& points, double eps) {
    const size_t n = points.size();
    std::vector<int> root(n);
    for (size_t i = 0; i < n; ++i) root[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int i) { return root[i] == i ? i : root[i] = find(root[i]); };
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (l2_dist(points[i], points[j]) <= eps) root[find(static_cast<int>(i))] = find(static_cast<int>(j));
    int count = 0;
    for (size_t i = 0; i < n; ++i)
        if (find(static_cast<int>(i)) == static_cast<int>(i)) ++count;
    return count;
}

template <class Map>
StabilityReport classify_stability(const Map& map, const std::vector<Tensor2>& initial_states, int iterations,
                                   double eps) {
    return vaa(map, initial_states, iterations, eps);
}

/// Spectral radius estimate of A by power iteration on A^T A is overkill
/// here; plain power iteration with a dense start is enough for the
/// stability precondition check.
inline double spectral_radius_estimate(const Tensor2& A, int iters = 200) {
    if (A.rows != A.cols) throw std::invalid_argument("spectral_radius_estimate: square matrix required");
    Tensor2 v(A.rows, 1, 1.0);
    double lambda = 0.0;
    for (int k = 0; k < iters; ++k) {
        Tensor2 w = matmul(A, v);
        double n = l2_norm(w);
        if (n == 0.0) return 0.0;
        lambda = n / l2_norm(v);
        v = scale(w, 1.0 / n);
    }
    return lambda;
}

/// Unique fixed point of h -> A h + B x for a stable A, via a pivoted
/// Gaussian solve of (I - A) h = B x.
inline Tensor2 linear_steady_state(const Tensor2& A, const Tensor2& B, const Tensor2& xbar) {
    if (A.rows != A.cols) throw std::invalid_argument("linear_steady_state: A must be square");
    if (spectral_radius_estimate(A) >= 1.0)
        throw std::invalid_argument("linear_steady_state: spectral radius of A is not < 1");
    const int n = A.rows;
    Tensor2 M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M.at(i, j) = (i == j ? 1.0 : 0.0) - A.at(i, j);
    Tensor2 rhs = matmul(B, xbar);
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(M.at(r, col)) > std::fabs(M.at(piv, col))) piv = r;
        if (std::fabs(M.at(piv, col)) < 1e-14)
            throw std::runtime_error("linear_steady_state: (I - A) is singular");
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(M.at(col, j), M.at(piv, j));
            std::swap(rhs[static_cast<size_t>(col)], rhs[static_cast<size_t>(piv)]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = M.at(r, col) / M.at(col, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) M.at(r, j) -= f * M.at(col, j);
            rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
        }
    }
    Tensor2 h(n, 1);
    for (int i = n - 1; i >= 0; --i) {
        double s = rhs[static_cast<size_t>(i)];
        for (int j = i + 1; j < n; ++j) s -= M.at(i, j) * h[static_cast<size_t>(j)];
        h[static_cast<size_t>(i)] = s / M.at(i, i);
    }
    return h;
}

/// Closed-form minGRU steady state: h = W_n x + b_n, valid whenever every
/// gate component is strictly positive (sigma guarantees it; an exact zero
/// would make that component non-contracting).
inline Tensor2 gated_steady_state(const ParamSet& params, const std::string& prefix, const Tensor2& xbar) {
    Tensor2 z_pre = add(matmul(params.get(prefix + "W_z"), xbar), params.get(prefix + "b_z"));
    for (size_t i = 0; i < z_pre.size(); ++i) {
        double z = sigmoid(z_pre[i]);
        if (z >= 1.0)
            throw std::runtime_error("gated_steady_state: gate component " + std::to_string(i) +
                                     " saturated at 1; non-contracting");
    }
    return add(matmul(params.get(prefix + "W_n"), xbar), params.get(prefix + "b_n"));
}

/// Task-defined initial hidden states and idle input.
struct TaskStates {
    std::vector<Tensor2> initial_states;  // flattened hidden states
    Tensor2 idle_obs;
};

/// T-maze: the two states reached from zero hidden after observing each
/// goal side. LookupTreeMaze: the 2^tau - 2 states after feeding each
/// admissible table at t=0 (index absent).
inline TaskStates task_initial_states(const Model& model, const std::string& env_kind, int tau = 4) {
    TaskStates ts;
    if (env_kind == "tmaze") {
        if (model.spec.input_width != TMaze::kObsWidth)
            throw std::invalid_argument("task_initial_states: model width does not match tmaze");
        ts.idle_obs = TMaze::idle_observation();
        for (int g : {-1, 1}) {
            HiddenState h = initial_hidden(model.spec);
            model_step(model, TMaze::first_observation(g, /*length=*/2), h);
            ts.initial_states.push_back(flatten_hidden(h));
        }
    } else if (env_kind == "lookup") {
        if (model.spec.input_width != LookupTreeMaze::obs_width_for(tau))
            throw std::invalid_argument("task_initial_states: model width does not match lookup(tau)");
        ts.idle_obs = LookupTreeMaze::idle_observation(tau);
        for (int mask = 1; mask < (1 << tau) - 1; ++mask) {
            std::vector<int> table(static_cast<size_t>(tau));
            for (int i = 0; i < tau; ++i) table[static_cast<size_t>(i)] = (mask >> i) & 1 ? 1 : -1;
            HiddenState h = initial_hidden(model.spec);
            model_step(model, LookupTreeMaze::table_observation(table), h);
            ts.initial_states.push_back(flatten_hidden(h));
        }
    } else {
        throw std::invalid_argument("task_initial_states: unknown env kind " + env_kind);
    }
    return ts;
}

}  // namespace thg
