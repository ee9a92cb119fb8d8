#include <gtest/gtest.h>

#include <cmath>

#include "thg/cells.hpp"
#include "thg/gradcheck.hpp"
#include "thg/rng.hpp"

using namespace thg;

TEST(Cells, FamilyNamesRoundTrip) {
    for (CellFamily f : {CellFamily::GRU, CellFamily::BRC, CellFamily::nBRC, CellFamily::MinGRU,
                         CellFamily::BMRU})
        EXPECT_EQ(parse_family(family_name(f)), f);
    EXPECT_THROW(parse_family("lstm"), std::invalid_argument);
}

TEST(Cells, ParamShapes) {
    auto shapes = cell_param_shapes(CellFamily::GRU, 3, 5);
    ASSERT_EQ(shapes.size(), 9u);
    EXPECT_EQ(shapes[0].first, "W_xr");
    EXPECT_EQ(shapes[0].second, std::make_pair(5, 3));
    EXPECT_EQ(shapes[1].second, std::make_pair(5, 5));  // W_hr

    auto brc = cell_param_shapes(CellFamily::BRC, 3, 5);
    // Elementwise recurrent weights are vectors.
    EXPECT_EQ(brc[1].first, "w_r");
    EXPECT_EQ(brc[1].second, std::make_pair(5, 1));

    auto bmru = cell_param_shapes(CellFamily::BMRU, 3, 5);
    ASSERT_EQ(bmru.size(), 5u);
    EXPECT_EQ(bmru[4].first, "alpha");
}

TEST(Cells, InitBoundsAndSpecials) {
    Rng rng(11);
    ParamSet ps;
    add_cell_params(ps, "x.", CellFamily::BMRU, 4, 6, rng);
    for (double v : ps.get("x.alpha").data) EXPECT_DOUBLE_EQ(v, 1.0);
    for (double v : ps.get("x.b_n").data) EXPECT_DOUBLE_EQ(v, 0.0);
    double bound = 1.0 / std::sqrt(4.0);
    for (double v : ps.get("x.W_n").data) {
        EXPECT_GE(v, -bound);
        EXPECT_LE(v, bound);
    }
    ParamSet brc;
    add_cell_params(brc, "y.", CellFamily::BRC, 4, 6, rng);
    // Elementwise vector weights use fan_in = 1.
    bool outside_matrix_bound = false;
    for (double v : brc.get("y.w_r").data) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
        if (std::fabs(v) > bound) outside_matrix_bound = true;
    }
    (void)outside_matrix_bound;  // range check is the contract
}

TEST(Cells, InputGatedFlag) {
    EXPECT_TRUE(input_gated(CellFamily::MinGRU));
    EXPECT_TRUE(input_gated(CellFamily::BMRU));
    EXPECT_FALSE(input_gated(CellFamily::GRU));
    EXPECT_FALSE(input_gated(CellFamily::BRC));
    EXPECT_FALSE(input_gated(CellFamily::nBRC));
}

TEST(Cells, MinGruScalarThreeSteps) {
    // z = 0.5, n = 1 constantly: h = 0, 0.5, 0.75, 0.875.
    ParamSet ps;
    ps.add("c.W_z", Tensor2(1, 1));
    ps.add("c.b_z", Tensor2(1, 1));
    ps.add("c.W_n", Tensor2(1, 1));
    Tensor2 bn(1, 1);
    bn[0] = 1.0;
    ps.add("c.b_n", bn);
    Tensor2 h(1, 1), x(1, 1);
    h = cell_step_raw(ps, CellFamily::MinGRU, "c.", x, h);
    EXPECT_DOUBLE_EQ(h[0], 0.5);
    h = cell_step_raw(ps, CellFamily::MinGRU, "c.", x, h);
    EXPECT_DOUBLE_EQ(h[0], 0.75);
    h = cell_step_raw(ps, CellFamily::MinGRU, "c.", x, h);
    EXPECT_DOUBLE_EQ(h[0], 0.875);
}

namespace {

// Independent longhand oracle for one step of each family.
Tensor2 oracle_step(const ParamSet& ps, CellFamily f, const Tensor2& x, const Tensor2& h) {
    auto mv = [&](const std::string& n, const Tensor2& v) { return matmul(ps.get("c." + n), v); };
    auto b = [&](const std::string& n) { return ps.get("c." + n); };
    int H = h.rows;
    Tensor2 out(H, 1);
    for (int i = 0; i < H; ++i) {
        double r, z, n;
        switch (f) {
            case CellFamily::GRU: {
                r = sigmoid(mv("W_xr", x)[i] + mv("W_hr", h)[i] + b("b_r")[i]);
                z = sigmoid(mv("W_xz", x)[i] + mv("W_hz", h)[i] + b("b_z")[i]);
                n = std::tanh(mv("W_xn", x)[i] + r * mv("W_hn", h)[i] + b("b_n")[i]);
                out[i] = z * h[i] + (1 - z) * n;
                break;
            }
            case CellFamily::BRC: {
                r = 1 + std::tanh(mv("W_r", x)[i] + b("w_r")[i] * h[i] + b("b_r")[i]);
                z = sigmoid(mv("W_z", x)[i] + b("w_z")[i] * h[i] + b("b_z")[i]);
                n = std::tanh(mv("W_n", x)[i] + r * h[i] + b("b_n")[i]);
                out[i] = z * h[i] + (1 - z) * n;
                break;
            }
            case CellFamily::nBRC: {
                r = 1 + std::tanh(mv("W_xr", x)[i] + mv("W_hr", h)[i] + b("b_r")[i]);
                z = sigmoid(mv("W_xz", x)[i] + mv("W_hz", h)[i] + b("b_z")[i]);
                n = std::tanh(mv("W_n", x)[i] + r * h[i] + b("b_n")[i]);
                out[i] = z * h[i] + (1 - z) * n;
                break;
            }
            case CellFamily::MinGRU: {
                z = sigmoid(mv("W_z", x)[i] + b("b_z")[i]);
                n = mv("W_n", x)[i] + b("b_n")[i];
                out[i] = z * h[i] + (1 - z) * n;
                break;
            }
            case CellFamily::BMRU: {
                n = mv("W_n", x)[i] + b("b_n")[i];
                double beta = std::fabs(mv("W_beta", x)[i] + b("b_beta")[i]);
                double zg = std::fabs(n) - beta > 0 ? 1.0 : 0.0;
                double s = n > 0 ? 1.0 : (n < 0 ? -1.0 : 0.0);
                out[i] = zg * s * b("alpha")[i] + (1 - zg) * h[i];
                break;
            }
        }
    }
    return out;
}

}  // namespace

TEST(Cells, StepMatchesLonghandOracle) {
    Rng rng(202);
    for (CellFamily f : {CellFamily::GRU, CellFamily::BRC, CellFamily::nBRC, CellFamily::MinGRU,
                         CellFamily::BMRU}) {
        for (int rep = 0; rep < 20; ++rep) {
            ParamSet ps;
            add_cell_params(ps, "c.", f, 3, 4, rng);
            for (auto& e : ps)
                if (e.name.back() != 'a')  // keep alpha at 1; randomize biases too
                    for (double& v : e.value.data) v = rng.uniform(-1, 1);
            Tensor2 x(3, 1), h(4, 1);
            for (double& v : x.data) v = rng.uniform(-1, 1);
            for (double& v : h.data) v = rng.uniform(-1, 1);
            Tensor2 got = cell_step_raw(ps, f, "c.", x, h);
            Tensor2 want = oracle_step(ps, f, x, h);
            for (size_t i = 0; i < got.size(); ++i)
                EXPECT_NEAR(got[i], want[i], 1e-14) << family_name(f);
        }
    }
}

TEST(Cells, BmruGateSemantics) {
    // |n| > beta writes sign(n)*alpha; otherwise the state carries exactly.
    ParamSet ps;
    ps.add("c.W_n", Tensor2(1, 1, 1.0));
    ps.add("c.b_n", Tensor2(1, 1));
    ps.add("c.W_beta", Tensor2(1, 1));
    Tensor2 bb(1, 1);
    bb[0] = 0.5;
    ps.add("c.b_beta", bb);
    Tensor2 alpha(1, 1);
    alpha[0] = 2.0;
    ps.add("c.alpha", alpha);
    Tensor2 h(1, 1);
    h[0] = 0.123456;
    Tensor2 x(1, 1);
    x[0] = -0.9;  // n = -0.9, |n| > 0.5: write -alpha
    EXPECT_DOUBLE_EQ(cell_step_raw(ps, CellFamily::BMRU, "c.", x, h)[0], -2.0);
    x[0] = 0.9;
    EXPECT_DOUBLE_EQ(cell_step_raw(ps, CellFamily::BMRU, "c.", x, h)[0], 2.0);
    x[0] = 0.2;  // |n| < beta: carry, bit-exact
    EXPECT_DOUBLE_EQ(cell_step_raw(ps, CellFamily::BMRU, "c.", x, h)[0], 0.123456);
}

TEST(Scan, MatchesSequentialSmall) {
    Rng rng(303);
    for (CellFamily f : {CellFamily::MinGRU, CellFamily::BMRU}) {
        for (int rep = 0; rep < 20; ++rep) {
            int in_w = 1 + rng.uniform_int(4);
            int hid = 1 + rng.uniform_int(5);
            int len = 1 + rng.uniform_int(64);
            ParamSet ps;
            add_cell_params(ps, "c.", f, in_w, hid, rng);
            Tensor2 h0(hid, 1);
            for (double& v : h0.data) v = rng.uniform(-1, 1);
            std::vector<Tensor2> xs;
            for (int t = 0; t < len; ++t) {
                Tensor2 x(in_w, 1);
                for (double& v : x.data) v = rng.uniform(-1, 1);
                xs.push_back(std::move(x));
            }
            auto a = scan_forward(ps, f, "c.", h0, xs);
            auto b = sequential_forward(ps, f, "c.", h0, xs);
            ASSERT_EQ(a.size(), b.size());
            double tol = f == CellFamily::BMRU ? 0.0 : 1e-12;
            for (size_t t = 0; t < a.size(); ++t)
                EXPECT_LE(max_dist(a[t], b[t]), tol) << family_name(f) << " len " << len << " t " << t;
        }
    }
}

TEST(Scan, RejectsStateDependentGates) {
    ParamSet ps;
    Rng rng(1);
    add_cell_params(ps, "c.", CellFamily::GRU, 2, 2, rng);
    EXPECT_THROW(scan_forward(ps, CellFamily::GRU, "c.", Tensor2(2, 1), {Tensor2(2, 1)}),
                 std::invalid_argument);
}

TEST(GradCheck, AllFamiliesSmall) {
    for (CellFamily f : {CellFamily::GRU, CellFamily::BRC, CellFamily::nBRC, CellFamily::MinGRU,
                         CellFamily::BMRU}) {
        GradCheckReport rep = gradcheck_cell(f, 3, 4, 6, 909);
        EXPECT_TRUE(rep.pass) << family_name(f) << " max_rel_err " << rep.max_rel_err << " at "
                              << rep.worst_param;
    }
}

TEST(GradCheck, DetectsWrongGradient) {
    // Sanity of the checker itself: a corrupted analytic gradient must fail.
    Rng rng(7);
    ParamSet ps;
    ps.add("w", Tensor2(1, 1, 0.5));
    auto objective = [](const ParamSet& p) { return p.get("w")[0] * p.get("w")[0]; };
    std::map<std::string, Tensor2> wrong;
    wrong["w"] = Tensor2(1, 1, 99.0);
    GradCheckReport rep = finite_diff_check(objective, ps, wrong, 1e-5, 1e-4);
    EXPECT_FALSE(rep.pass);
    (void)rng;
}
