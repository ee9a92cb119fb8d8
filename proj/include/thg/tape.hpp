#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thg/rng.hpp"
#include "thg/tensor.hpp"

namespace thg {

// Handle into a Tape's node list.
using Var = int;

/// Eager reverse-mode tape over Tensor2 values. Operations execute
/// immediately and record a backward closure; backward() walks the node
/// list in reverse, accumulating adjoints into the leaves.
///
/// The Heaviside and sign steps used by the BMRU gate are non-smooth;
/// their backward rules use a sigmoid/tanh surrogate with slope k.
class Tape {
  public:
    static constexpr double kSurrogateSlope = 10.0;

    struct Node {
        Tensor2 value;
        Tensor2 adjoint;
        std::function<void(Tape&, const Tensor2&)> backward;  // receives this node's adjoint
        bool is_leaf = false;
    };

    Var leaf(const Tensor2& t) {
        Var v = push(t, "leaf");
        nodes_[v].is_leaf = true;
        return v;
    }

    // Constant: participates in forward math, receives no gradient.
    Var constant(const Tensor2& t) { return push(t, "constant"); }

    const Tensor2& value(Var v) const { return nodes_[v].value; }
    const Tensor2& adjoint(Var v) const { return nodes_[v].adjoint; }
    size_t num_nodes() const { return nodes_.size(); }

    Var matmul(Var a, Var b) {
        const Tensor2& A = val(a);
        const Tensor2& B = val(b);
        Var out = push(thg::matmul(A, B), "matmul");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            const Tensor2& A = t.val(a);
            const Tensor2& B = t.val(b);
            // dA += g * B^T ; dB += A^T * g
            Tensor2& dA = t.nodes_[a].adjoint;
            for (int i = 0; i < A.rows; ++i)
                for (int k = 0; k < A.cols; ++k) {
                    double s = 0.0;
                    for (int j = 0; j < B.cols; ++j) s += g.at(i, j) * B.at(k, j);
                    dA.at(i, k) += s;
                }
            Tensor2& dB = t.nodes_[b].adjoint;
            for (int k = 0; k < B.rows; ++k)
                for (int j = 0; j < B.cols; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < A.rows; ++i) s += A.at(i, k) * g.at(i, j);
                    dB.at(k, j) += s;
                }
        };
        return out;
    }

    Var add(Var a, Var b) {
        Var out = push(thg::add(val(a), val(b)), "add");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            t.accumulate(a, g);
            t.accumulate(b, g);
        };
        return out;
    }

    Var sub(Var a, Var b) {
        Var out = push(thg::sub(val(a), val(b)), "sub");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            t.accumulate(a, g);
            Tensor2& db = t.nodes_[b].adjoint;
            for (size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
        };
        return out;
    }

    Var mul(Var a, Var b) {
        Var out = push(hadamard(val(a), val(b)), "mul");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            const Tensor2& A = t.val(a);
            const Tensor2& B = t.val(b);
            Tensor2& da = t.nodes_[a].adjoint;
            Tensor2& db = t.nodes_[b].adjoint;
            for (size_t i = 0; i < g.size(); ++i) {
                da[i] += g[i] * B[i];
                db[i] += g[i] * A[i];
            }
        };
        return out;
    }

    Var scale(Var a, double s) {
        Var out = push(thg::scale(val(a), s), "scale");
        nodes_[out].backward = [a, s](Tape& t, const Tensor2& g) {
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
        };
        return out;
    }

    Var add_scalar(Var a, double c) {
        Var out = push(map(val(a), [c](double x) { return x + c; }), "add_scalar");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) { t.accumulate(a, g); };
        return out;
    }

    Var sigmoid(Var a) {
        Var out = push(map(val(a), [](double x) { return thg::sigmoid(x); }), "sigmoid");
        nodes_[out].backward = [a, out](Tape& t, const Tensor2& g) {
            const Tensor2& y = t.val(out);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
        };
        return out;
    }

    Var tanh_(Var a) {
        Var out = push(map(val(a), [](double x) { return std::tanh(x); }), "tanh");
        nodes_[out].backward = [a, out](Tape& t, const Tensor2& g) {
            const Tensor2& y = t.val(out);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
        };
        return out;
    }

    Var relu(Var a) {
        Var out = push(map(val(a), [](double x) { return x > 0.0 ? x : 0.0; }), "relu");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) {
            const Tensor2& x = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) da[i] += g[i];
        };
        return out;
    }

    Var abs_(Var a) {
        Var out = push(map(val(a), [](double x) { return std::fabs(x); }), "abs");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) {
            const Tensor2& x = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) {
                double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
                da[i] += g[i] * s;
            }
        };
        return out;
    }

    // H(u) = 1 if u > 0 else 0; backward dH/du ~= k * sigma'(k u).
    Var heaviside(Var a) {
        Var out = push(map(val(a), [](double x) { return x > 0.0 ? 1.0 : 0.0; }), "heaviside");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) {
            const Tensor2& x = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) {
                double s = thg::sigmoid(kSurrogateSlope * x[i]);
                da[i] += g[i] * kSurrogateSlope * s * (1.0 - s);
            }
        };
        return out;
    }

    // S(u) = sign(u); backward dS/du ~= k * (1 - tanh^2(k u)).
    Var sign(Var a) {
        Var out = push(map(val(a), [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }), "sign");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) {
            const Tensor2& x = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) {
                double th = std::tanh(kSurrogateSlope * x[i]);
                da[i] += g[i] * kSurrogateSlope * (1.0 - th * th);
            }
        };
        return out;
    }

    Var exp_(Var a) {
        Var out = push(map(val(a), [](double x) { return std::exp(x); }), "exp");
        nodes_[out].backward = [a, out](Tape& t, const Tensor2& g) {
            const Tensor2& y = t.val(out);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
        };
        return out;
    }

    // Gradient flows only where lo < x < hi.
    Var clamp(Var a, double lo, double hi) {
        Var out = push(map(val(a), [lo, hi](double x) { return std::min(hi, std::max(lo, x)); }), "clamp");
        nodes_[out].backward = [a, lo, hi](Tape& t, const Tensor2& g) {
            const Tensor2& x = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < g.size(); ++i)
                if (x[i] > lo && x[i] < hi) da[i] += g[i];
        };
        return out;
    }

    // Elementwise minimum; on ties the gradient goes to a.
    Var minimum(Var a, Var b) {
        const Tensor2& A = val(a);
        const Tensor2& B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("minimum: shape mismatch");
        Tensor2 v = A;
        for (size_t i = 0; i < v.size(); ++i) v[i] = std::min(A[i], B[i]);
        Var out = push(v, "minimum");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            const Tensor2& A = t.val(a);
            const Tensor2& B = t.val(b);
            Tensor2& da = t.nodes_[a].adjoint;
            Tensor2& db = t.nodes_[b].adjoint;
            for (size_t i = 0; i < g.size(); ++i) {
                if (A[i] <= B[i])
                    da[i] += g[i];
                else
                    db[i] += g[i];
            }
        };
        return out;
    }

    Var concat_rows(Var a, Var b) {
        Var out = push(thg::concat_rows(val(a), val(b)), "concat_rows");
        nodes_[out].backward = [a, b](Tape& t, const Tensor2& g) {
            const Tensor2& A = t.val(a);
            Tensor2& da = t.nodes_[a].adjoint;
            Tensor2& db = t.nodes_[b].adjoint;
            size_t na = A.size();
            for (size_t i = 0; i < na; ++i) da[i] += g[i];
            for (size_t i = na; i < g.size(); ++i) db[i - na] += g[i];
        };
        return out;
    }

    // Scalar sum of all entries, as a 1x1 tensor.
    Var sum(Var a) {
        double s = 0.0;
        for (double v : val(a).data) s += v;
        Tensor2 out1(1, 1);
        out1[0] = s;
        Var out = push(out1, "sum");
        nodes_[out].backward = [a](Tape& t, const Tensor2& g) {
            Tensor2& da = t.nodes_[a].adjoint;
            for (size_t i = 0; i < da.size(); ++i) da[i] += g[0];
        };
        return out;
    }

    // log softmax(logits)[index] for a column vector of logits.
    Var log_prob(Var logits, int index) {
        const Tensor2& L = val(logits);
        if (L.cols != 1 || index < 0 || index >= L.rows)
            throw std::invalid_argument("log_prob: bad logits shape or index");
        double lse = log_sum_exp(L.data);
        Tensor2 out1(1, 1);
        out1[0] = L[index] - lse;
        Var out = push(out1, "log_prob");
        nodes_[out].backward = [logits, index](Tape& t, const Tensor2& g) {
            const Tensor2& L = t.val(logits);
            std::vector<double> p = softmax(L.data);
            Tensor2& da = t.nodes_[logits].adjoint;
            for (int i = 0; i < L.rows; ++i)
                da[i] += g[0] * ((i == index ? 1.0 : 0.0) - p[i]);
        };
        return out;
    }

    // Entropy of softmax(logits), as a 1x1 tensor.
    Var entropy(Var logits) {
        const Tensor2& L = val(logits);
        if (L.cols != 1) throw std::invalid_argument("entropy: logits must be a column vector");
        std::vector<double> p = softmax(L.data);
        double h = 0.0;
        for (double v : p)
            if (v > 0.0) h -= v * std::log(v);
        Tensor2 out1(1, 1);
        out1[0] = h;
        Var out = push(out1, "entropy");
        nodes_[out].backward = [logits, h](Tape& t, const Tensor2& g) {
            const Tensor2& L = t.val(logits);
            std::vector<double> p = softmax(L.data);
            double lse = log_sum_exp(L.data);
            Tensor2& da = t.nodes_[logits].adjoint;
            // dH/dl_j = -p_j (log p_j + H)
            for (int i = 0; i < L.rows; ++i) {
                double logp = L[i] - lse;
                da[i] += g[0] * (-p[i] * (logp + h));
            }
        };
        return out;
    }

    /// Seed the given node with an adjoint and propagate to all leaves.
    /// Each node's backward runs exactly once, in reverse creation order.
    void backward(Var seed_node, const Tensor2& seed_adjoint) {
        if (nodes_.empty()) throw std::logic_error("backward before forward: tape is empty");
        if (!nodes_[seed_node].value.same_shape(seed_adjoint))
            throw std::invalid_argument("backward: seed adjoint shape mismatch");
        for (auto& n : nodes_) {
            n.adjoint = Tensor2(n.value.rows, n.value.cols);
        }
        accumulate(seed_node, seed_adjoint);
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.backward && max_norm(n.adjoint) != 0.0) n.backward(*this, n.adjoint);
        }
    }

    void backward_scalar(Var seed_node) {
        Tensor2 one(val(seed_node).rows, val(seed_node).cols);
        if (one.size() != 1) throw std::invalid_argument("backward_scalar: node is not scalar");
        one[0] = 1.0;
        backward(seed_node, one);
    }

  private:
    friend struct TapeAlg;

    const Tensor2& val(Var v) const { return nodes_[v].value; }

    void accumulate(Var v, const Tensor2& g) {
        Tensor2& a = nodes_[v].adjoint;
        for (size_t i = 0; i < g.size(); ++i) a[i] += g[i];
    }

    Var push(Tensor2 value, const char* op) {
        if (!value.all_finite())
            throw std::runtime_error(std::string("tape op '") + op + "' produced non-finite values at node " +
                                     std::to_string(nodes_.size()));
        Node n;
        n.value = std::move(value);
        n.adjoint = Tensor2(n.value.rows, n.value.cols);
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

}  // namespace thg
