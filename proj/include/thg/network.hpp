#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/cells.hpp"
#include "thg/params.hpp"
#include "thg/rng.hpp"
#include "thg/tensor.hpp"

namespace thg {

/// Layer kinds. SkipSumRelu adds the activation recorded just before the
/// recurrent segment, then applies ReLU. HybridRecurrent is a 50/50 split
/// of BMRU and minGRU units fed the same input, outputs concatenated.
struct LayerSpec {
    enum class Kind { Recurrent, HybridRecurrent, Relu, Linear, Dropout, SkipSumRelu };
    Kind kind = Kind::Linear;
    CellFamily family = CellFamily::GRU;  // Recurrent only
    int width = 0;                        // output width (Dropout/SkipSumRelu: pass-through)
    double p = 0.0;                       // Dropout only
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    int input_width = 0;
    int output_width = 0;  // width of the final Linear layer

    int recurrent_layer_count() const {
        int n = 0;
        for (auto& l : layers)
            if (l.kind == LayerSpec::Kind::Recurrent || l.kind == LayerSpec::Kind::HybridRecurrent) ++n;
        return n;
    }
};

/// Hidden state: one vector per recurrent state slot (hybrid layers own
/// two slots, BMRU half first). Episode reset re-zeros everything.
struct HiddenState {
    std::vector<Tensor2> slots;
};

struct Model {
    NetworkSpec spec;
    ParamSet params;
};

inline std::string layer_prefix(int i) { return "l" + std::to_string(i) + "."; }

inline HiddenState initial_hidden(const NetworkSpec& spec) {
    HiddenState h;
    for (auto& l : spec.layers) {
        if (l.kind == LayerSpec::Kind::Recurrent) {
            h.slots.emplace_back(l.width, 1);
        } else if (l.kind == LayerSpec::Kind::HybridRecurrent) {
            h.slots.emplace_back(l.width / 2, 1);
            h.slots.emplace_back(l.width / 2, 1);
        }
    }
    return h;
}

inline Model init_params(const NetworkSpec& spec, Rng& rng) {
    Model m;
    m.spec = spec;
    int in = spec.input_width;
    if (in <= 0) throw std::invalid_argument("init_params: zero-width input");
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::string pre = layer_prefix(static_cast<int>(i));
        switch (l.kind) {
            case LayerSpec::Kind::Recurrent:
                add_cell_params(m.params, pre, l.family, in, l.width, rng);
                in = l.width;
                break;
            case LayerSpec::Kind::HybridRecurrent: {
                if (l.width % 2 != 0) throw std::invalid_argument("hybrid layer width must be even");
                add_cell_params(m.params, pre + "bmru.", CellFamily::BMRU, in, l.width / 2, rng);
                add_cell_params(m.params, pre + "mingru.", CellFamily::MinGRU, in, l.width / 2, rng);
                in = l.width;
                break;
            }
            case LayerSpec::Kind::Relu:
            case LayerSpec::Kind::Linear: {
                if (l.width <= 0) throw std::invalid_argument("init_params: zero-width layer");
                Tensor2 W(l.width, in);
                double bound = 1.0 / std::sqrt(static_cast<double>(in));
                for (double& v : W.data) v = rng.uniform(-bound, bound);
                m.params.add(pre + "W", W);
                m.params.add(pre + "b", Tensor2(l.width, 1));
                in = l.width;
                break;
            }
            case LayerSpec::Kind::Dropout:
            case LayerSpec::Kind::SkipSumRelu:
                break;  // no parameters, width preserved
        }
    }
    return m;
}

/// Width of the activation entering layer i (for mask shapes).
inline int layer_output_width_before(const NetworkSpec& spec, size_t i) {
    int w = spec.input_width;
    for (size_t j = 0; j < i; ++j) {
        const LayerSpec& l = spec.layers[j];
        if (l.kind == LayerSpec::Kind::Recurrent || l.kind == LayerSpec::Kind::HybridRecurrent ||
            l.kind == LayerSpec::Kind::Relu || l.kind == LayerSpec::Kind::Linear)
            w = l.width;
    }
    return w;
}

/// One full network step. Consumes and updates the hidden slots in place;
/// returns the head output. Dropout draws inverted-dropout masks from
/// `dropout_rng` only when train_mode is set.
template <class A>
typename A::V step_network(A& alg, const NetworkSpec& spec, typename A::V x, std::vector<typename A::V>& slots,
                           bool train_mode = false, Rng* dropout_rng = nullptr) {
    using V = typename A::V;
    V act = x;
    std::optional<V> skip_src;
    bool before_recurrent = true;
    size_t slot = 0;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::string pre = layer_prefix(static_cast<int>(i));
        switch (l.kind) {
            case LayerSpec::Kind::Recurrent: {
                if (before_recurrent) skip_src = act, before_recurrent = false;
                V h = cell_step(alg, l.family, pre, act, slots[slot]);
                slots[slot] = h;
                act = h;
                ++slot;
                break;
            }
            case LayerSpec::Kind::HybridRecurrent: {
                if (before_recurrent) skip_src = act, before_recurrent = false;
                V hb = cell_step(alg, CellFamily::BMRU, pre + "bmru.", act, slots[slot]);
                V hm = cell_step(alg, CellFamily::MinGRU, pre + "mingru.", act, slots[slot + 1]);
                slots[slot] = hb;
                slots[slot + 1] = hm;
                act = alg.concat(hb, hm);
                slot += 2;
                break;
            }
            case LayerSpec::Kind::Relu:
                act = alg.relu(alg.add(alg.matmul(alg.param(pre + "W"), act), alg.param(pre + "b")));
                break;
            case LayerSpec::Kind::Linear:
                act = alg.add(alg.matmul(alg.param(pre + "W"), act), alg.param(pre + "b"));
                break;
            case LayerSpec::Kind::SkipSumRelu:
                if (!skip_src) throw std::invalid_argument("skip-sum without a recorded source activation");
                act = alg.relu(alg.add(act, *skip_src));
                break;
            case LayerSpec::Kind::Dropout: {
                if (train_mode) {
                    if (!dropout_rng) throw std::invalid_argument("dropout in train mode needs an rng");
                    // Mask shape equals the running activation width.
                    int w = layer_output_width_before(spec, i);
                    Tensor2 mask(w, 1);
                    double keep = 1.0 - l.p;
                    for (double& v : mask.data) v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
                    act = alg.mul(act, alg.constant(mask));
                }
                break;
            }
        }
    }
    return act;
}

/// Raw (non-tape) network step.
inline Tensor2 model_step(const Model& m, const Tensor2& x, HiddenState& h, bool train_mode = false,
                          Rng* dropout_rng = nullptr) {
    if (x.rows != m.spec.input_width || x.cols != 1)
        throw std::invalid_argument("model_step: observation width mismatch, got " + shape_str(x));
    RawAlg alg{&m.params};
    return step_network(alg, m.spec, x, h.slots, train_mode, dropout_rng);
}

struct SequenceResult {
    std::vector<Tensor2> outputs;
    HiddenState final_state;
};

/// Left-to-right evaluation of a whole input sequence.
inline SequenceResult forward_sequence(const Model& m, const HiddenState& h0, const std::vector<Tensor2>& inputs,
                                       bool train_mode = false, Rng* dropout_rng = nullptr) {
    if (inputs.empty()) throw std::invalid_argument("forward_sequence: empty input sequence");
    SequenceResult res;
    res.final_state = h0;
    if (res.final_state.slots.size() != initial_hidden(m.spec).slots.size())
        throw std::invalid_argument("forward_sequence: hidden state does not match spec");
    res.outputs.reserve(inputs.size());
    for (const Tensor2& x : inputs)
        res.outputs.push_back(model_step(m, x, res.final_state, train_mode, dropout_rng));
    return res;
}

enum class ArchKind { TMazeSmall, TMazeDeepMinGRU, LookupStandard, LookupHybrid };

inline ArchKind parse_arch(const std::string& s) {
    if (s == "tmaze-small") return ArchKind::TMazeSmall;
    if (s == "tmaze-deep-mingru") return ArchKind::TMazeDeepMinGRU;
    if (s == "lookup-standard") return ArchKind::LookupStandard;
    if (s == "lookup-hybrid") return ArchKind::LookupHybrid;
    throw std::invalid_argument("unknown architecture kind: " + s);
}

/// The four experiment architectures.
///   tmaze-small:       RNN5 -> ReLU20 -> ReLU10 -> FC_out
///   tmaze-deep-mingru: ReLU128 -> minGRU128 x4 -> skip-sum+ReLU -> ReLU64 -> ReLU16 -> FC_out
///   lookup-standard:   ReLU128 -> RNN128 -> skip-sum+ReLU -> ReLU64 -> ReLU16 -> FC_out,
///                      dropout p=0.1 after every layer but the last
///   lookup-hybrid:     as lookup-standard with a 64 BMRU + 64 minGRU recurrent layer
inline NetworkSpec build_architecture(ArchKind kind, CellFamily family, int input_width, int out_width) {
    using K = LayerSpec::Kind;
    NetworkSpec s;
    s.input_width = input_width;
    s.output_width = out_width;
    const double p = 0.1;
    switch (kind) {
        case ArchKind::TMazeSmall:
            s.layers = {{K::Recurrent, family, 5},
                        {K::Relu, family, 20},
                        {K::Relu, family, 10},
                        {K::Linear, family, out_width}};
            break;
        case ArchKind::TMazeDeepMinGRU:
            if (family != CellFamily::MinGRU)
                throw std::invalid_argument("tmaze-deep-mingru is only defined for minGRU");
            s.layers = {{K::Relu, family, 128},
                        {K::Recurrent, CellFamily::MinGRU, 128},
                        {K::Recurrent, CellFamily::MinGRU, 128},
                        {K::Recurrent, CellFamily::MinGRU, 128},
                        {K::Recurrent, CellFamily::MinGRU, 128},
                        {K::SkipSumRelu, family, 128},
                        {K::Relu, family, 64},
                        {K::Relu, family, 16},
                        {K::Linear, family, out_width}};
            break;
        case ArchKind::LookupStandard:
            s.layers = {{K::Relu, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::Recurrent, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::SkipSumRelu, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::Relu, family, 64},
                        {K::Dropout, family, 64, p},
                        {K::Relu, family, 16},
                        {K::Dropout, family, 16, p},
                        {K::Linear, family, out_width}};
            break;
        case ArchKind::LookupHybrid:
            s.layers = {{K::Relu, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::HybridRecurrent, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::SkipSumRelu, family, 128},
                        {K::Dropout, family, 128, p},
                        {K::Relu, family, 64},
                        {K::Dropout, family, 64, p},
                        {K::Relu, family, 16},
                        {K::Dropout, family, 16, p},
                        {K::Linear, family, out_width}};
            break;
    }
    return s;
}

}  // namespace thg
