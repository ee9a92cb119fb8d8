#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "thg/cells.hpp"
#include "thg/dynamics.hpp"
#include "thg/network.hpp"
#include "thg/rng.hpp"

using namespace thg;

namespace {

struct ScalarMap {
    std::function<double(double)> f;
    Tensor2 apply(const Tensor2& h) const { return Tensor2::vec({f(h[0])}); }
};

/// Independent oracle: all fixed points of a scalar map on [-3, 3] by dense
/// grid plus sign-change bisection on h - f(h).
std::vector<double> scalar_fixed_points(const std::function<double(double)>& f) {
    auto g = [&](double h) { return h - f(h); };
    std::vector<double> roots;
    const int n = 100000;
    double prev = g(-3.0), prev_x = -3.0;
    for (int i = 1; i <= n; ++i) {
        double x = -3.0 + 6.0 * i / n;
        double v = g(x);
        if (v == 0.0 || (v > 0) != (prev > 0)) {
            double lo = prev_x, hi = x;
            for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
                double mid = 0.5 * (lo + hi);
                if ((g(mid) > 0) == (g(lo) > 0))
                    lo = mid;
                else
                    hi = mid;
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev = v;
        prev_x = x;
    }
    return roots;
}

}  // namespace

TEST(IterateMap, GeometricContraction) {
    ScalarMap m{[](double h) { return 0.5 * h; }};
    IterateResult r = iterate_map(m, Tensor2::vec({1.0}), 20, 1e-3);
    EXPECT_NEAR(r.final_state[0], std::pow(0.5, 20), 1e-12);
    EXPECT_FALSE(r.diverged);
    EXPECT_GT(r.converged_step, 0);
}

TEST(IterateMap, IdentityIsFixed) {
    ScalarMap m{[](double h) { return h; }};
    IterateResult r = iterate_map(m, Tensor2::vec({0.7}), 1000, 1e-3);
    EXPECT_DOUBLE_EQ(r.final_state[0], 0.7);
}

TEST(IterateMap, Tanh5ConvergesToBisectionRoot) {
    ScalarMap m{[](double h) { return std::tanh(5.0 * h); }};
    IterateResult r = iterate_map(m, Tensor2::vec({0.1}), 10000, 1e-8);
    auto roots = scalar_fixed_points(m.f);
    ASSERT_EQ(roots.size(), 3u);  // -h*, 0, +h*
    EXPECT_NEAR(r.final_state[0], roots[2], 1e-8);
    EXPECT_GT(roots[2], 0.999);
}

TEST(IterateMap, DivergenceReported) {
    ScalarMap m{[](double h) { return 3.0 * h; }};
    IterateResult r = iterate_map(m, Tensor2::vec({1.0}), 100, 1e-3);
    EXPECT_TRUE(r.diverged);
}

TEST(Vaa, CommonFixedPointGivesHalf) {
    ScalarMap m{[](double h) { return 0.5 * h; }};
    StabilityReport rep = vaa(m, {Tensor2::vec({1.0}), Tensor2::vec({-1.0})}, 100, 1e-3);
    EXPECT_DOUBLE_EQ(rep.vaa, 0.5);
    EXPECT_EQ(rep.cluster_count, 1);
    EXPECT_FALSE(rep.multistable);
}

TEST(Vaa, IdentityKeepsStatesApart) {
    ScalarMap m{[](double h) { return h; }};
    StabilityReport rep = vaa(m, {Tensor2::vec({1.0}), Tensor2::vec({-1.0})}, 10, 1e-3);
    EXPECT_DOUBLE_EQ(rep.vaa, 1.0);
    EXPECT_EQ(rep.cluster_count, 2);
    EXPECT_TRUE(rep.multistable);
}

TEST(Vaa, TwoBasinScalarMap) {
    // h -> tanh(5h): basins split at 0, attractors near +-0.9999.
    ScalarMap m{[](double h) { return std::tanh(5.0 * h); }};
    StabilityReport rep = vaa(m, {Tensor2::vec({-0.9}), Tensor2::vec({0.9})}, 1000, 1e-3);
    EXPECT_DOUBLE_EQ(rep.vaa, 1.0);
    EXPECT_TRUE(rep.multistable);
}

TEST(Vaa, RangeAndPermutationInvariance) {
    Rng rng(5);
    ScalarMap m{[](double h) { return std::tanh(5.0 * h); }};
    std::vector<Tensor2> H = {Tensor2::vec({-0.9}), Tensor2::vec({0.9}), Tensor2::vec({0.5}),
                              Tensor2::vec({-0.1})};
    StabilityReport a = vaa(m, H, 1000, 1e-3);
    std::vector<Tensor2> Hrev(H.rbegin(), H.rend());
    StabilityReport b = vaa(m, Hrev, 1000, 1e-3);
    EXPECT_DOUBLE_EQ(a.vaa, b.vaa);
    EXPECT_GE(a.vaa, 1.0 / 4.0);
    EXPECT_LE(a.vaa, 1.0);
    (void)rng;
}

TEST(Vaa, RejectsSingleton) {
    ScalarMap m{[](double h) { return h; }};
    EXPECT_THROW(vaa(m, {Tensor2::vec({1.0})}, 10, 1e-3), std::invalid_argument);
}

TEST(SteadyState, LinearScalar) {
    // h = 0.5h + 1*2 -> h = 4.
    Tensor2 A(1, 1, 0.5), B(1, 1, 1.0), x(1, 1, 2.0);
    EXPECT_NEAR(linear_steady_state(A, B, x)[0], 4.0, 1e-12);
}

TEST(SteadyState, ZeroAGivesBx) {
    Tensor2 A(2, 2), B(2, 1), x(1, 1, 3.0);
    B[0] = 1.0;
    B[1] = -2.0;
    Tensor2 h = linear_steady_state(A, B, x);
    EXPECT_NEAR(h[0], 3.0, 1e-12);
    EXPECT_NEAR(h[1], -6.0, 1e-12);
}

TEST(SteadyState, RandomStableMatchesIteration) {
    Rng rng(404);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 4;
        Tensor2 A(n, n), B(n, 2), x(2, 1);
        for (double& v : A.data) v = rng.uniform(-0.4, 0.4);  // row-sum bound keeps rho < 1
        for (double& v : B.data) v = rng.uniform(-1, 1);
        for (double& v : x.data) v = rng.uniform(-1, 1);
        Tensor2 closed = linear_steady_state(A, B, x);
        struct AffineMap {
            const Tensor2 *A, *B, *x;
            Tensor2 apply(const Tensor2& h) const { return add(matmul(*A, h), matmul(*B, *x)); }
        } m{&A, &B, &x};
        IterateResult it = iterate_map(m, Tensor2(n, 1), 10000, 1e-9);
        EXPECT_LT(max_dist(closed, it.final_state), 1e-8);
    }
}

TEST(SteadyState, UnstableRejected) {
    Tensor2 A(1, 1, 1.5), B(1, 1, 1.0), x(1, 1, 1.0);
    EXPECT_THROW(linear_steady_state(A, B, x), std::invalid_argument);
}

TEST(SteadyState, GatedMatchesIterationAndIgnoresWz) {
    Rng rng(505);
    for (int rep = 0; rep < 100; ++rep) {
        ParamSet ps;
        add_cell_params(ps, "c.", CellFamily::MinGRU, 3, 4, rng);
        for (auto& e : ps)
            for (double& v : e.value.data) v = rng.uniform(-1, 1);
        Tensor2 x(3, 1);
        for (double& v : x.data) v = rng.uniform(-1, 1);
        Tensor2 closed = gated_steady_state(ps, "c.", x);
        struct CellMap {
            const ParamSet* ps;
            const Tensor2* x;
            Tensor2 apply(const Tensor2& h) const {
                return cell_step_raw(*ps, CellFamily::MinGRU, "c.", *x, h);
            }
        } m{&ps, &x};
        IterateResult it = iterate_map(m, Tensor2(4, 1), 10000, 1e-9);
        EXPECT_LT(max_dist(closed, it.final_state), 1e-8);
        // Independence from the gate weights.
        ps.get("c.W_z")[0] += 1.0;
        EXPECT_DOUBLE_EQ(max_dist(gated_steady_state(ps, "c.", x), closed), 0.0);
    }
}

TEST(Stability, ScalarGruWithStrongRecurrenceIsBistable) {
    // GRU, hidden 1, w_hn = 5, all other weights 0: the update is
    // h' = 0.5h + 0.5 tanh(2.5h), which has attractors near the roots of
    // the bisection oracle.
    ParamSet ps;
    Rng rng(1);
    add_cell_params(ps, "c.", CellFamily::GRU, 1, 1, rng);
    for (auto& e : ps)
        for (double& v : e.value.data) v = 0.0;
    ps.get("c.W_hn")[0] = 5.0;
    Tensor2 x(1, 1);
    struct CellMap {
        const ParamSet* ps;
        const Tensor2* x;
        Tensor2 apply(const Tensor2& h) const { return cell_step_raw(*ps, CellFamily::GRU, "c.", *x, h); }
    } m{&ps, &x};
    auto roots = scalar_fixed_points([&](double h) { return m.apply(Tensor2::vec({h}))[0]; });
    ASSERT_EQ(roots.size(), 3u);
    StabilityReport rep = vaa(m, {Tensor2::vec({-0.9}), Tensor2::vec({0.9})}, 2000, 1e-3);
    EXPECT_DOUBLE_EQ(rep.vaa, 1.0);
    EXPECT_TRUE(rep.multistable);
    EXPECT_NEAR(rep.finals[0][0], roots[0], 1e-6);
    EXPECT_NEAR(rep.finals[1][0], roots[2], 1e-6);
}

TEST(Stability, RandomMinGruAlwaysMonostable) {
    Rng rng(606);
    for (int draw = 0; draw < 20; ++draw) {
        ParamSet ps;
        add_cell_params(ps, "c.", CellFamily::MinGRU, 3, 4, rng);
        for (auto& e : ps)
            for (double& v : e.value.data) v = rng.uniform(-1.5, 1.5);
        for (int xi = 0; xi < 3; ++xi) {
            Tensor2 x(3, 1);
            for (double& v : x.data) v = rng.uniform(-1, 1);
            struct CellMap {
                const ParamSet* ps;
                const Tensor2* x;
                Tensor2 apply(const Tensor2& h) const {
                    return cell_step_raw(*ps, CellFamily::MinGRU, "c.", *x, h);
                }
            } m{&ps, &x};
            std::vector<Tensor2> H;
            for (int i = 0; i < 6; ++i) {
                Tensor2 h(4, 1);
                for (double& v : h.data) v = rng.uniform(-2, 2);
                H.push_back(std::move(h));
            }
            // Large M: a gate component at z ~ 0.998 contracts slowly, and
            // the eps-ball test needs the finals to actually meet.
            StabilityReport rep = vaa(m, H, 20000, 1e-3);
            EXPECT_FALSE(rep.multistable);
            EXPECT_DOUBLE_EQ(rep.vaa, 1.0 / 6.0);
        }
    }
}

TEST(Stability, GateClosedBmruKeepsBothAlphaStates) {
    // Idle input with beta > |n|: the gate stays closed, +-alpha are both
    // exact fixed points.
    ParamSet ps;
    ps.add("c.W_n", Tensor2(1, 1));
    ps.add("c.b_n", Tensor2(1, 1));
    ps.add("c.W_beta", Tensor2(1, 1));
    ps.add("c.b_beta", Tensor2(1, 1, 0.5));
    ps.add("c.alpha", Tensor2(1, 1, 1.0));
    Tensor2 x(1, 1);
    struct CellMap {
        const ParamSet* ps;
        const Tensor2* x;
        Tensor2 apply(const Tensor2& h) const { return cell_step_raw(*ps, CellFamily::BMRU, "c.", *x, h); }
    } m{&ps, &x};
    StabilityReport rep = vaa(m, {Tensor2::vec({-1.0}), Tensor2::vec({1.0})}, 1000, 1e-3);
    EXPECT_DOUBLE_EQ(rep.vaa, 1.0);
    EXPECT_TRUE(rep.multistable);
    EXPECT_DOUBLE_EQ(rep.finals[0][0], -1.0);
    EXPECT_DOUBLE_EQ(rep.finals[1][0], 1.0);
}

TEST(TaskStates, SizesMatchTask) {
    Rng rng(808);
    Model tm = init_params(build_architecture(ArchKind::TMazeSmall, CellFamily::GRU, 4, 4), rng);
    TaskStates ts = task_initial_states(tm, "tmaze");
    EXPECT_EQ(ts.initial_states.size(), 2u);
    EXPECT_EQ(ts.idle_obs.rows, 4);

    Model lk = init_params(
        build_architecture(ArchKind::LookupStandard, CellFamily::MinGRU, LookupTreeMaze::obs_width_for(4), 4),
        rng);
    TaskStates ls = task_initial_states(lk, "lookup", 4);
    EXPECT_EQ(ls.initial_states.size(), 14u);  // 2^4 - 2

    EXPECT_THROW(task_initial_states(tm, "lookup", 4), std::invalid_argument);
}

TEST(Hidden, FlattenRoundTrip) {
    Rng rng(900);
    Model m = init_params(
        build_architecture(ArchKind::LookupHybrid, CellFamily::BMRU, LookupTreeMaze::obs_width_for(4), 4),
        rng);
    HiddenState h = initial_hidden(m.spec);
    ASSERT_EQ(h.slots.size(), 2u);  // hybrid: BMRU half + minGRU half
    for (auto& s : h.slots)
        for (double& v : s.data) v = rng.uniform(-1, 1);
    Tensor2 flat = flatten_hidden(h);
    EXPECT_EQ(flat.rows, 128);
    HiddenState back = unflatten_hidden(m.spec, flat);
    for (size_t i = 0; i < h.slots.size(); ++i) EXPECT_DOUBLE_EQ(max_dist(h.slots[i], back.slots[i]), 0.0);
}
