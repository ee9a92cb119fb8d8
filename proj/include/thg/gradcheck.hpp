#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "thg/cells.hpp"
#include "thg/params.hpp"
#include "thg/rng.hpp"
#include "thg/tape.hpp"

namespace thg {

struct GradCheckReport {
    bool pass = false;
    bool objective_finite = true;
    double max_rel_err = 0.0;
    std::string worst_param;
    size_t worst_index = 0;
    size_t entries_checked = 0;
};

/// Central-difference check of analytic gradients. The objective must be
/// deterministic. Relative error is |analytic - numeric| / max(1, |numeric|),
/// maximized over every entry of every parameter named in `analytic`.
inline GradCheckReport finite_diff_check(const std::function<double(const ParamSet&)>& objective,
                                         ParamSet& params,
                                         const std::map<std::string, Tensor2>& analytic, double step,
                                         double tolerance) {
    GradCheckReport rep;
    for (const auto& [name, grad] : analytic) {
        Tensor2& p = params.get(name);
        if (!p.same_shape(grad)) throw std::invalid_argument("finite_diff_check: grad shape mismatch for " + name);
        for (size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            double fp = objective(params);
            p[i] = saved - step;
            double fm = objective(params);
            p[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                rep.objective_finite = false;
                rep.worst_param = name;
                rep.worst_index = i;
                rep.pass = false;
                return rep;
            }
            double numeric = (fp - fm) / (2.0 * step);
            double rel = std::fabs(grad[i] - numeric) / std::max(1.0, std::fabs(numeric));
            ++rep.entries_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = name;
                rep.worst_index = i;
            }
        }
    }
    rep.pass = rep.objective_finite && rep.max_rel_err < tolerance;
    return rep;
}

/// BPTT-vs-finite-differences check for a single recurrent cell. The
/// objective is sum_t c . h_t for a fixed random read-out c, over a random
/// input sequence from zero hidden state.
///
/// The BMRU hidden update is piecewise constant in its gate parameters
/// (Heaviside/sign), so finite differences are only meaningful for its
/// smooth parameter alpha; the surrogate-gradient path is validated
/// separately by the training tests.
inline GradCheckReport gradcheck_cell(CellFamily family, int input_width, int hidden, int seq_len,
                                      uint64_t seed, double step = 1e-5, double tolerance = 1e-4) {
    Rng rng(seed);
    ParamSet params;
    add_cell_params(params, "c0.", family, input_width, hidden, rng);
    // Perturb biases away from zero so no gate sits at a symmetric point.
    for (auto& e : params)
        if (e.name[3] == 'b')
            for (double& v : e.value.data) v = rng.uniform(-0.3, 0.3);
    std::vector<Tensor2> inputs;
    for (int t = 0; t < seq_len; ++t) {
        Tensor2 x(input_width, 1);
        for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
        inputs.push_back(std::move(x));
    }
    Tensor2 readout(hidden, 1);
    for (double& v : readout.data) v = rng.uniform(-1.0, 1.0);

    auto objective = [&](const ParamSet& ps) {
        Tensor2 h(hidden, 1);
        double loss = 0.0;
        for (const Tensor2& x : inputs) {
            h = cell_step_raw(ps, family, "c0.", x, h);
            for (int i = 0; i < hidden; ++i) loss += readout[static_cast<size_t>(i)] * h[static_cast<size_t>(i)];
        }
        return loss;
    };

    // Analytic gradients by tape BPTT of the same objective.
    Tape tape;
    TapeAlg alg{&tape, &params, {}};
    Var h = tape.constant(Tensor2(hidden, 1));
    Var c = tape.constant(readout);
    std::vector<Var> terms;
    for (const Tensor2& x : inputs) {
        h = cell_step(alg, family, "c0.", tape.constant(x), h);
        terms.push_back(tape.sum(tape.mul(c, h)));
    }
    Var loss = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) loss = tape.add(loss, terms[i]);
    tape.backward_scalar(loss);

    std::map<std::string, Tensor2> analytic;
    for (const auto& e : params) {
        bool smooth = family != CellFamily::BMRU || e.name == "c0.alpha";
        if (smooth) analytic[e.name] = alg.grad(e.name);
    }
    return finite_diff_check(objective, params, analytic, step, tolerance);
}

}  // namespace thg
