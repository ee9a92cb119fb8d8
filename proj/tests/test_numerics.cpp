#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "thg/rng.hpp"
#include "thg/tape.hpp"
#include "thg/tensor.hpp"

using namespace thg;

TEST(Tensor, MatmulSmall) {
    Tensor2 a(2, 3);
    Tensor2 b(3, 1);
    for (size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i + 1);  // [[1,2,3],[4,5,6]]
    for (size_t i = 0; i < b.size(); ++i) b[i] = static_cast<double>(i + 1);  // [1,2,3]
    Tensor2 c = matmul(a, b);
    ASSERT_EQ(c.rows, 2);
    ASSERT_EQ(c.cols, 1);
    EXPECT_DOUBLE_EQ(c[0], 14.0);
    EXPECT_DOUBLE_EQ(c[1], 32.0);
}

TEST(Tensor, ShapeMismatchThrows) {
    Tensor2 a(2, 3), b(2, 3);
    EXPECT_THROW(matmul(a, b), std::invalid_argument);
    EXPECT_THROW(add(a, Tensor2(3, 2)), std::invalid_argument);
    EXPECT_THROW(l2_dist(a, Tensor2(3, 2)), std::invalid_argument);
}

TEST(Tensor, Norms) {
    Tensor2 v = Tensor2::vec({3.0, -4.0});
    EXPECT_DOUBLE_EQ(l2_norm(v), 5.0);
    EXPECT_DOUBLE_EQ(max_norm(v), 4.0);
    EXPECT_DOUBLE_EQ(l2_dist(v, Tensor2::vec({0.0, 0.0})), 5.0);
}

TEST(Rng, DeterministicStreams) {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    bool differs = false;
    Rng a2(123);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    EXPECT_TRUE(differs);
}

TEST(Rng, SubstreamsIndependentOfEachOther) {
    // Adding a consumer never perturbs an existing one: substreams depend
    // only on (root, name).
    Rng s1 = Rng::substream(7, "rollout");
    Rng s2 = Rng::substream(7, "policy-init");
    Rng s1b = Rng::substream(7, "rollout");
    EXPECT_EQ(s1.next_u64(), s1b.next_u64());
    EXPECT_NE(Rng::derive_seed(7, "rollout"), Rng::derive_seed(7, "policy-init"));
    EXPECT_NE(Rng::derive_seed(7, "rollout"), Rng::derive_seed(8, "rollout"));
    (void)s2;
}

TEST(Rng, UniformBounds) {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        int k = r.uniform_int(7);
        EXPECT_GE(k, 0);
        EXPECT_LT(k, 7);
    }
}

TEST(Rng, StateRoundTrip) {
    Rng r(99);
    r.next_u64();
    auto saved = r.state();
    uint64_t expected = r.next_u64();
    Rng r2(0);
    r2.set_state(saved);
    EXPECT_EQ(r2.next_u64(), expected);
}

TEST(Softmax, MatchesHandValues) {
    std::vector<double> p = softmax({0.0, 0.0});
    EXPECT_NEAR(p[0], 0.5, 1e-15);
    // Overflow safety: huge logits.
    std::vector<double> q = softmax({1000.0, 1000.0, 0.0});
    EXPECT_NEAR(q[0], 0.5, 1e-12);
    EXPECT_NEAR(q[2], 0.0, 1e-12);
    EXPECT_NEAR(log_sum_exp({std::log(2.0), std::log(3.0)}), std::log(5.0), 1e-14);
}

TEST(Softmax, CategoricalSamplingFrequencies) {
    Rng r(17);
    std::vector<double> logits = {std::log(0.7), std::log(0.2), std::log(0.1)};
    int counts[3] = {0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_categorical(r, logits)];
    EXPECT_NEAR(counts[0] / double(n), 0.7, 0.01);
    EXPECT_NEAR(counts[1] / double(n), 0.2, 0.01);
    EXPECT_NEAR(counts[2] / double(n), 0.1, 0.01);
}

// ---------------------------------------------------------------------------
// Tape: each primitive checked against central finite differences.
// ---------------------------------------------------------------------------

namespace {

// FD of a scalar function of one tensor entry.
double fd(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace

TEST(Tape, UnaryOpGradients) {
    struct Case {
        const char* name;
        std::function<Var(Tape&, Var)> op;
        std::function<double(double)> ref;
        double x;
    };
    std::vector<Case> cases = {
        {"sigmoid", [](Tape& t, Var v) { return t.sigmoid(v); }, [](double x) { return sigmoid(x); }, 0.37},
        {"tanh", [](Tape& t, Var v) { return t.tanh_(v); }, [](double x) { return std::tanh(x); }, -0.8},
        {"relu", [](Tape& t, Var v) { return t.relu(v); }, [](double x) { return x > 0 ? x : 0.0; }, 0.4},
        {"exp", [](Tape& t, Var v) { return t.exp_(v); }, [](double x) { return std::exp(x); }, 0.2},
        {"abs", [](Tape& t, Var v) { return t.abs_(v); }, [](double x) { return std::fabs(x); }, -0.6},
        {"scale", [](Tape& t, Var v) { return t.scale(v, 2.5); }, [](double x) { return 2.5 * x; }, 1.1},
        {"clamp_in", [](Tape& t, Var v) { return t.clamp(v, 0.0, 1.0); }, [](double x) { return x; }, 0.5},
    };
    for (auto& c : cases) {
        Tape tape;
        Var x = tape.leaf(Tensor2::vec({c.x}));
        Var y = c.op(tape, x);
        tape.backward_scalar(y);
        double analytic = tape.adjoint(x)[0];
        double numeric = fd(c.ref, c.x);
        EXPECT_NEAR(analytic, numeric, 1e-6) << c.name;
    }
}

TEST(Tape, ClampOutsideRangeHasZeroGradient) {
    Tape tape;
    Var x = tape.leaf(Tensor2::vec({2.0}));
    Var y = tape.clamp(x, 0.0, 1.0);
    tape.backward_scalar(y);
    EXPECT_DOUBLE_EQ(tape.value(y)[0], 1.0);
    EXPECT_DOUBLE_EQ(tape.adjoint(x)[0], 0.0);
}

TEST(Tape, MinimumTieGoesToFirst) {
    Tape tape;
    Var a = tape.leaf(Tensor2::vec({1.0}));
    Var b = tape.leaf(Tensor2::vec({1.0}));
    Var m = tape.minimum(a, b);
    tape.backward_scalar(m);
    EXPECT_DOUBLE_EQ(tape.adjoint(a)[0], 1.0);
    EXPECT_DOUBLE_EQ(tape.adjoint(b)[0], 0.0);
}

TEST(Tape, MatmulGradient) {
    // f(W) = sum(W x); df/dW_ij = x_j.
    Tape tape;
    Tensor2 W(2, 2);
    W.at(0, 0) = 1;
    W.at(0, 1) = 2;
    W.at(1, 0) = -1;
    W.at(1, 1) = 0.5;
    Var w = tape.leaf(W);
    Var x = tape.constant(Tensor2::vec({3.0, -2.0}));
    Var y = tape.sum(tape.matmul(w, x));
    tape.backward_scalar(y);
    const Tensor2& g = tape.adjoint(w);
    EXPECT_DOUBLE_EQ(g.at(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(g.at(0, 1), -2.0);
    EXPECT_DOUBLE_EQ(g.at(1, 0), 3.0);
    EXPECT_DOUBLE_EQ(g.at(1, 1), -2.0);
}

TEST(Tape, LogProbGradientIsOneHotMinusSoftmax) {
    Tape tape;
    std::vector<double> logits = {0.3, -0.2, 1.4, 0.0};
    Var l = tape.leaf(Tensor2::vec(logits));
    Var lp = tape.log_prob(l, 2);
    tape.backward_scalar(lp);
    std::vector<double> p = softmax(logits);
    for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(tape.adjoint(l)[i], (i == 2 ? 1.0 : 0.0) - p[i], 1e-14);
    EXPECT_NEAR(tape.value(lp)[0], logits[2] - log_sum_exp(logits), 1e-14);
}

TEST(Tape, EntropyValueAndGradient) {
    Tape tape;
    std::vector<double> logits = {0.0, 0.0};
    Var l = tape.leaf(Tensor2::vec(logits));
    Var h = tape.entropy(l);
    EXPECT_NEAR(tape.value(h)[0], std::log(2.0), 1e-14);
    tape.backward_scalar(h);
    // Uniform distribution: entropy is at a maximum, gradient 0.
    EXPECT_NEAR(tape.adjoint(l)[0], 0.0, 1e-14);
    EXPECT_NEAR(tape.adjoint(l)[1], 0.0, 1e-14);

    // Non-uniform case against finite differences.
    std::vector<double> lg = {0.7, -0.4, 0.1};
    Tape t2;
    Var l2 = t2.leaf(Tensor2::vec(lg));
    Var h2 = t2.entropy(l2);
    t2.backward_scalar(h2);
    for (int i = 0; i < 3; ++i) {
        auto f = [&](double x) {
            std::vector<double> m = lg;
            m[static_cast<size_t>(i)] = x;
            std::vector<double> p = softmax(m);
            double e = 0;
            for (double v : p) e -= v * std::log(v);
            return e;
        };
        EXPECT_NEAR(t2.adjoint(l2)[static_cast<size_t>(i)], fd(f, lg[static_cast<size_t>(i)]), 1e-6);
    }
}

TEST(Tape, SurrogateGradients) {
    // Forward is the hard step; backward follows the slope-10 surrogate.
    Tape tape;
    Var x = tape.leaf(Tensor2::vec({0.12}));
    Var h = tape.heaviside(x);
    EXPECT_DOUBLE_EQ(tape.value(h)[0], 1.0);
    tape.backward_scalar(h);
    double s = sigmoid(10.0 * 0.12);
    EXPECT_NEAR(tape.adjoint(x)[0], 10.0 * s * (1 - s), 1e-12);

    Tape t2;
    Var y = t2.leaf(Tensor2::vec({-0.3}));
    Var sg = t2.sign(y);
    EXPECT_DOUBLE_EQ(t2.value(sg)[0], -1.0);
    t2.backward_scalar(sg);
    double th = std::tanh(10.0 * -0.3);
    EXPECT_NEAR(t2.adjoint(y)[0], 10.0 * (1 - th * th), 1e-12);
}

TEST(Tape, FanOutAccumulates) {
    // y = x*x + 3x: dy/dx = 2x + 3.
    Tape tape;
    Var x = tape.leaf(Tensor2::vec({1.5}));
    Var y = tape.add(tape.mul(x, x), tape.scale(x, 3.0));
    tape.backward_scalar(y);
    EXPECT_DOUBLE_EQ(tape.adjoint(x)[0], 2 * 1.5 + 3.0);
}

TEST(Tape, NonFiniteForwardThrows) {
    Tape tape;
    Var x = tape.leaf(Tensor2::vec({1000.0}));
    EXPECT_THROW(tape.exp_(x), std::runtime_error);
}

TEST(Tape, BackwardResetsAdjoints) {
    Tape tape;
    Var x = tape.leaf(Tensor2::vec({2.0}));
    Var y = tape.scale(x, 4.0);
    tape.backward_scalar(y);
    tape.backward_scalar(y);  // second call must not double-count
    EXPECT_DOUBLE_EQ(tape.adjoint(x)[0], 4.0);
}
