#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/params.hpp"
#include "thg/rng.hpp"
#include "thg/tape.hpp"
#include "thg/tensor.hpp"

namespace thg {

enum class CellFamily { GRU, BRC, nBRC, MinGRU, BMRU };

inline const char* family_name(CellFamily f) {
    switch (f) {
        case CellFamily::GRU: return "gru";
        case CellFamily::BRC: return "brc";
        case CellFamily::nBRC: return "nbrc";
        case CellFamily::MinGRU: return "mingru";
        case CellFamily::BMRU: return "bmru";
    }
    return "?";
}

inline CellFamily parse_family(const std::string& s) {
    if (s == "gru") return CellFamily::GRU;
    if (s == "brc") return CellFamily::BRC;
    if (s == "nbrc") return CellFamily::nBRC;
    if (s == "mingru") return CellFamily::MinGRU;
    if (s == "bmru") return CellFamily::BMRU;
    throw std::invalid_argument("unknown cell family: " + s);
}

// Gates of minGRU and BMRU depend on the input only, which is what makes
// their recurrences scannable.
inline bool input_gated(CellFamily f) { return f == CellFamily::MinGRU || f == CellFamily::BMRU; }

/// Per-family parameter names and shapes, given input and hidden widths.
inline std::vector<std::pair<std::string, std::pair<int, int>>> cell_param_shapes(CellFamily f, int input,
                                                                                 int hidden) {
    const int h = hidden, in = input;
    switch (f) {
        case CellFamily::GRU:
            return {{"W_xr", {h, in}}, {"W_hr", {h, h}}, {"b_r", {h, 1}},
                    {"W_xz", {h, in}}, {"W_hz", {h, h}}, {"b_z", {h, 1}},
                    {"W_xn", {h, in}}, {"W_hn", {h, h}}, {"b_n", {h, 1}}};
        case CellFamily::BRC:
            return {{"W_r", {h, in}}, {"w_r", {h, 1}}, {"b_r", {h, 1}},
                    {"W_z", {h, in}}, {"w_z", {h, 1}}, {"b_z", {h, 1}},
                    {"W_n", {h, in}}, {"b_n", {h, 1}}};
        case CellFamily::nBRC:
            return {{"W_xr", {h, in}}, {"W_hr", {h, h}}, {"b_r", {h, 1}},
                    {"W_xz", {h, in}}, {"W_hz", {h, h}}, {"b_z", {h, 1}},
                    {"W_n", {h, in}},  {"b_n", {h, 1}}};
        case CellFamily::MinGRU:
            return {{"W_z", {h, in}}, {"b_z", {h, 1}}, {"W_n", {h, in}}, {"b_n", {h, 1}}};
        case CellFamily::BMRU:
            return {{"W_n", {h, in}}, {"b_n", {h, 1}}, {"W_beta", {h, in}}, {"b_beta", {h, 1}}, {"alpha", {h, 1}}};
    }
    throw std::logic_error("unreachable");
}

/// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero,
/// BMRU alpha starts at 1. Elementwise vector weights use fan_in = 1.
inline void add_cell_params(ParamSet& ps, const std::string& prefix, CellFamily f, int input, int hidden,
                            Rng& rng) {
    if (input <= 0 || hidden <= 0) throw std::invalid_argument("add_cell_params: zero-width layer");
    for (auto& [name, shape] : cell_param_shapes(f, input, hidden)) {
        auto [r, c] = shape;
        Tensor2 t(r, c);
        if (name == "alpha") {
            for (double& v : t.data) v = 1.0;
        } else if (name[0] == 'W' || name[0] == 'w') {
            int fan_in = (name[0] == 'w') ? 1 : c;
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : t.data) v = rng.uniform(-bound, bound);
        }
        ps.add(prefix + name, t);
    }
}

// ---------------------------------------------------------------------------
// Evaluation algebras. The same cell/network code runs either directly on
// Tensor2 (rollouts, sweeps, dynamics) or on a Tape (BPTT).
// ---------------------------------------------------------------------------

struct RawAlg {
    using V = Tensor2;
    const ParamSet* ps = nullptr;

    V param(const std::string& name) const { return ps->get(name); }
    V constant(const Tensor2& t) const { return t; }
    V matmul(const V& a, const V& b) const { return thg::matmul(a, b); }
    V add(const V& a, const V& b) const { return thg::add(a, b); }
    V sub(const V& a, const V& b) const { return thg::sub(a, b); }
    V mul(const V& a, const V& b) const { return hadamard(a, b); }
    V sigmoid(const V& a) const { return map(a, [](double x) { return thg::sigmoid(x); }); }
    V tanh_(const V& a) const { return map(a, [](double x) { return std::tanh(x); }); }
    V relu(const V& a) const { return map(a, [](double x) { return x > 0.0 ? x : 0.0; }); }
    V abs_(const V& a) const { return map(a, [](double x) { return std::fabs(x); }); }
    V heaviside(const V& a) const {
        return map(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
    }
    V sign(const V& a) const {
        return map(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    }
    V one_minus(const V& a) const { return map(a, [](double x) { return 1.0 - x; }); }
    V add_scalar(const V& a, double c) const { return map(a, [c](double x) { return x + c; }); }
    V concat(const V& a, const V& b) const { return concat_rows(a, b); }
};

struct TapeAlg {
    using V = Var;
    Tape* tape = nullptr;
    const ParamSet* ps = nullptr;
    std::map<std::string, Var> leaves;

    V param(const std::string& name) {
        auto it = leaves.find(name);
        if (it != leaves.end()) return it->second;
        Var v = tape->leaf(ps->get(name));
        leaves.emplace(name, v);
        return v;
    }
    /// Gradient of a named parameter after backward; zero tensor if the
    /// parameter never entered the graph.
    Tensor2 grad(const std::string& name) const {
        auto it = leaves.find(name);
        if (it == leaves.end()) {
            const Tensor2& p = ps->get(name);
            return Tensor2(p.rows, p.cols);
        }
        return tape->adjoint(it->second);
    }
    V constant(const Tensor2& t) { return tape->constant(t); }
    V matmul(V a, V b) { return tape->matmul(a, b); }
    V add(V a, V b) { return tape->add(a, b); }
    V sub(V a, V b) { return tape->sub(a, b); }
    V mul(V a, V b) { return tape->mul(a, b); }
    V sigmoid(V a) { return tape->sigmoid(a); }
    V tanh_(V a) { return tape->tanh_(a); }
    V relu(V a) { return tape->relu(a); }
    V abs_(V a) { return tape->abs_(a); }
    V heaviside(V a) { return tape->heaviside(a); }
    V sign(V a) { return tape->sign(a); }
    V one_minus(V a) { return tape->scale(tape->add_scalar(a, -1.0), -1.0); }
    V add_scalar(V a, double c) { return tape->add_scalar(a, c); }
    V concat(V a, V b) { return tape->concat_rows(a, b); }
};

/// One step of the named recurrent cell. `prefix` selects the parameter
/// block (e.g. "l0."). State convention for the gated families is
/// h_t = z (.) h_prev + (1 - z) (.) n.
template <class A>
typename A::V cell_step(A& alg, CellFamily f, const std::string& prefix, typename A::V x, typename A::V h) {
    using V = typename A::V;
    auto p = [&](const char* n) { return alg.param(prefix + n); };
    switch (f) {
        case CellFamily::GRU: {
            V r = alg.sigmoid(alg.add(alg.add(alg.matmul(p("W_xr"), x), alg.matmul(p("W_hr"), h)), p("b_r")));
            V z = alg.sigmoid(alg.add(alg.add(alg.matmul(p("W_xz"), x), alg.matmul(p("W_hz"), h)), p("b_z")));
            V n = alg.tanh_(alg.add(alg.add(alg.matmul(p("W_xn"), x), alg.mul(r, alg.matmul(p("W_hn"), h))), p("b_n")));
            return alg.add(alg.mul(z, h), alg.mul(alg.one_minus(z), n));
        }
        case CellFamily::BRC: {
            V r = alg.add_scalar(alg.tanh_(alg.add(alg.add(alg.matmul(p("W_r"), x), alg.mul(p("w_r"), h)), p("b_r"))), 1.0);
            V z = alg.sigmoid(alg.add(alg.add(alg.matmul(p("W_z"), x), alg.mul(p("w_z"), h)), p("b_z")));
            V n = alg.tanh_(alg.add(alg.add(alg.matmul(p("W_n"), x), alg.mul(r, h)), p("b_n")));
            return alg.add(alg.mul(z, h), alg.mul(alg.one_minus(z), n));
        }
        case CellFamily::nBRC: {
            V r = alg.add_scalar(alg.tanh_(alg.add(alg.add(alg.matmul(p("W_xr"), x), alg.matmul(p("W_hr"), h)), p("b_r"))), 1.0);
            V z = alg.sigmoid(alg.add(alg.add(alg.matmul(p("W_xz"), x), alg.matmul(p("W_hz"), h)), p("b_z")));
            V n = alg.tanh_(alg.add(alg.add(alg.matmul(p("W_n"), x), alg.mul(r, h)), p("b_n")));
            return alg.add(alg.mul(z, h), alg.mul(alg.one_minus(z), n));
        }
        case CellFamily::MinGRU: {
            V z = alg.sigmoid(alg.add(alg.matmul(p("W_z"), x), p("b_z")));
            V n = alg.add(alg.matmul(p("W_n"), x), p("b_n"));
            return alg.add(alg.mul(z, h), alg.mul(alg.one_minus(z), n));
        }
        case CellFamily::BMRU: {
            V n = alg.add(alg.matmul(p("W_n"), x), p("b_n"));
            V beta = alg.abs_(alg.add(alg.matmul(p("W_beta"), x), p("b_beta")));
            V z = alg.heaviside(alg.sub(alg.abs_(n), beta));
            V write = alg.mul(z, alg.mul(alg.sign(n), p("alpha")));
            return alg.add(write, alg.mul(alg.one_minus(z), h));
        }
    }
    throw std::logic_error("unreachable");
}

/// Raw single step with input validation; used by the non-tape paths.
inline Tensor2 cell_step_raw(const ParamSet& ps, CellFamily f, const std::string& prefix, const Tensor2& x,
                             const Tensor2& h) {
    if (!x.all_finite()) throw std::invalid_argument("cell_step: non-finite input");
    RawAlg alg{&ps};
    return cell_step(alg, f, prefix, x, h);
}

// ---------------------------------------------------------------------------
// Parallel scan for input-gated cells. Each step is the affine map
// h -> a (.) h + b; composition is associative, so prefixes are computed by
// iterative doubling. The BMRU case is exact: a is 0/1 and b is 0 on carry
// steps, so composing maps never rounds.
// ---------------------------------------------------------------------------

/// Per-step hidden states for a minGRU or BMRU cell under the given inputs.
inline std::vector<Tensor2> scan_forward(const ParamSet& ps, CellFamily f, const std::string& prefix,
                                         const Tensor2& h0, const std::vector<Tensor2>& inputs) {
    if (!input_gated(f))
        throw std::invalid_argument("scan_forward: cell family has state-dependent gates");
    const size_t n = inputs.size();
    RawAlg alg{&ps};
    std::vector<Tensor2> a(n), b(n);
    for (size_t t = 0; t < n; ++t) {
        const Tensor2& x = inputs[t];
        if (!x.all_finite()) throw std::invalid_argument("scan_forward: non-finite input");
        if (f == CellFamily::MinGRU) {
            Tensor2 z = alg.sigmoid(add(matmul(ps.get(prefix + "W_z"), x), ps.get(prefix + "b_z")));
            Tensor2 nn = add(matmul(ps.get(prefix + "W_n"), x), ps.get(prefix + "b_n"));
            a[t] = z;
            b[t] = hadamard(alg.one_minus(z), nn);
        } else {
            Tensor2 nn = add(matmul(ps.get(prefix + "W_n"), x), ps.get(prefix + "b_n"));
            Tensor2 beta = alg.abs_(add(matmul(ps.get(prefix + "W_beta"), x), ps.get(prefix + "b_beta")));
            Tensor2 z = alg.heaviside(sub(alg.abs_(nn), beta));
            a[t] = alg.one_minus(z);
            b[t] = hadamard(z, hadamard(alg.sign(nn), ps.get(prefix + "alpha")));
        }
    }
    // Inclusive scan by doubling: after round d, (a,b)[t] composes steps
    // (t-2d, t].
    std::vector<Tensor2> a2(n), b2(n);
    for (size_t d = 1; d < n; d <<= 1) {
        for (size_t t = 0; t < n; ++t) {
            if (t >= d) {
                // current map after the prefix ending at t-d
                Tensor2 na = hadamard(a[t], a[t - d]);
                Tensor2 nb = add(hadamard(a[t], b[t - d]), b[t]);
                a2[t] = std::move(na);
                b2[t] = std::move(nb);
            } else {
                a2[t] = a[t];
                b2[t] = b[t];
            }
        }
        std::swap(a, a2);
        std::swap(b, b2);
    }
    std::vector<Tensor2> states(n);
    for (size_t t = 0; t < n; ++t) states[t] = add(hadamard(a[t], h0), b[t]);
    return states;
}

/// Sequential oracle for scan_forward: plain left-to-right cell steps.
inline std::vector<Tensor2> sequential_forward(const ParamSet& ps, CellFamily f, const std::string& prefix,
                                               const Tensor2& h0, const std::vector<Tensor2>& inputs) {
    std::vector<Tensor2> states;
    states.reserve(inputs.size());
    Tensor2 h = h0;
    for (const Tensor2& x : inputs) {
        h = cell_step_raw(ps, f, prefix, x, h);
        states.push_back(h);
    }
    return states;
}

}  // namespace thg
