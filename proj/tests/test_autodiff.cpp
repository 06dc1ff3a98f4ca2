#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "finflow/ad/checkpoint.hpp"
#include "finflow/ad/gradcheck.hpp"
#include "finflow/ad/ops.hpp"
#include "finflow/core/rng.hpp"

#include <cmath>
#include <functional>

using namespace finflow;
using namespace finflow::ad;

namespace {

Tensor random_tensor(Rng& rng, Shape s, double lo = -2.0, double hi = 2.0) {
    Tensor t = Tensor::uninit(s);
    double* p = t.raw();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = rng.uniform(lo, hi);
    return t;
}

double rel_err(const Tensor& a, const Tensor& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

using FieldFn = std::function<DiffVar(Tape&, const DiffVar&)>;

double eval_loss(const FieldFn& f, const Tensor& x, const Tensor& proj) {
    Tape t;
    t.recording = false;
    DiffVar y = f(t, constant(x));
    return kern::ops().dot(y.val.data(), proj.data(), y.val.size());
}

// central finite differences against the tape gradient, vector-norm relative
void check_vjp(const char* name, Shape xs, const FieldFn& f, double tol = 2e-6,
               double lo = -2.0, double hi = 2.0, double eps = 1e-6) {
    INFO("primitive: " << std::string(name));
    Rng rng(std::hash<std::string>{}(name) & 0xffffff);
    Tensor x0 = random_tensor(rng, xs, lo, hi);

    Tape probe;
    probe.recording = false;
    Tensor yshape = f(probe, constant(x0)).val;
    Tensor proj = random_tensor(rng, yshape.shape(), -1.0, 1.0);

    Tape tape;
    DiffVar x = tape.leaf(x0, "x");
    DiffVar y = f(tape, x);
    DiffVar loss = reduce_sum(tape, mul(tape, y, constant(proj)));
    GradStore gs = tape.backward(loss);
    Tensor g_ad = gs.grad_or_zero(x.node, xs);

    Tensor g_fd = Tensor::zeros(xs);
    double* gf = g_fd.raw();
    for (std::size_t i = 0; i < x0.size(); ++i) {
        Tensor xp = x0, xm = x0;
        xp.raw()[i] += eps;
        xm.raw()[i] -= eps;
        gf[i] = (eval_loss(f, xp, proj) - eval_loss(f, xm, proj)) / (2 * eps);
    }
    CHECK(rel_err(g_ad, g_fd) < tol);
}

} // namespace

TEST_CASE("spec examples: linear, quadratic form, sigmoid") {
    Tape t;
    DiffVar x = t.leaf(Tensor::scalar(2.0), "x");
    DiffVar y = scale(t, x, 3.0);
    auto gs = t.backward(y);
    CHECK(gs.grad(x.node).scalar_value() == doctest::Approx(3.0));

    Tape t2;
    Rng rng(1);
    Tensor f0 = random_tensor(rng, {1, 4, 5});
    DiffVar f = t2.leaf(f0, "f");
    DiffVar loss = reduce_sum(t2, mul(t2, f, f));
    auto gs2 = t2.backward(loss);
    const Tensor& g = gs2.grad(f.node);
    for (std::size_t i = 0; i < f0.size(); ++i)
        CHECK(g.data()[i] == doctest::Approx(2.0 * f0.data()[i]));

    Tape t3;
    DiffVar z = t3.leaf(Tensor::scalar(0.0), "z");
    DiffVar s = vsigmoid(t3, z);
    auto gs3 = t3.backward(s);
    CHECK(gs3.grad(z.node).scalar_value() == doctest::Approx(0.25)); // sigma'(0) = 0.25
}

TEST_CASE("every primitive vjp matches central finite differences") {
    check_vjp("add", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return add(t, x, constant(Tensor::full({1, 3, 4}, 0.7)));
    });
    check_vjp("add_scalar_b", {1, 3, 4},
              [](Tape& t, const DiffVar& x) { return add(t, x, constant(1.3)); });
    check_vjp("sub", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return sub(t, constant(Tensor::full({1, 3, 4}, 0.4)), x);
    });
    check_vjp("sub_scalar", {1, 1, 1},
              [](Tape& t, const DiffVar& x) { return sub(t, x, constant(2.0)); });
    check_vjp("mul_same", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return mul(t, x, x); });
    check_vjp("mul_scalarB", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return mul(t, x, crop(t, x, 0, 1, 0, 1, 0, 1));
    });
    check_vjp("mul_wbcast", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        DiffVar wcol = rowsum_w(t, x);
        return mul(t, x, wcol);
    });
    check_vjp("mul_hbcast", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        DiffVar row = crop(t, x, 0, 1, 0, 1, 0, 4);
        return mul(t, x, row);
    });
    check_vjp("div_same", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return div(t, constant(Tensor::full({1, 3, 4}, 1.5)), x);
    }, 2e-6, 0.5, 2.0);
    check_vjp("div_wbcast", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return div(t, x, rowsum_w(t, x));
    }, 2e-6, 0.5, 2.0);
    check_vjp("div_scalarB", {1, 3, 4}, [](Tape& t, const DiffVar& x) {
        return div(t, x, crop(t, x, 0, 1, 0, 1, 0, 1));
    }, 2e-6, 0.5, 2.0);
    check_vjp("scale", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return scale(t, x, -2.5); });
    check_vjp("exp", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return vexp(t, x); });
    check_vjp("sqrt", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return vsqrt(t, x); }, 2e-6, 0.5, 2.0);
    check_vjp("sigmoid", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return vsigmoid(t, x); });
    check_vjp("sin", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return vsin(t, x); });
    check_vjp("cos", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return vcos(t, x); });
    check_vjp("atan2", {1, 3, 2}, [](Tape& t, const DiffVar& x) {
        return vatan2(t, x, constant(Tensor::full({1, 3, 2}, 1.2)));
    });
    check_vjp("atan2_x", {1, 3, 2}, [](Tape& t, const DiffVar& x) {
        return vatan2(t, constant(Tensor::full({1, 3, 2}, 0.8)), x);
    }, 2e-6, 0.5, 2.0);
    check_vjp("silu", {1, 3, 4}, [](Tape& t, const DiffVar& x) { return silu(t, x); });
    check_vjp("reduce_sum", {2, 3, 4}, [](Tape& t, const DiffVar& x) { return reduce_sum(t, x); });
    check_vjp("reduce_mean", {2, 3, 4}, [](Tape& t, const DiffVar& x) { return reduce_mean(t, x); });
    check_vjp("rowsum_w", {2, 3, 4}, [](Tape& t, const DiffVar& x) { return rowsum_w(t, x); });
    check_vjp("reduce_rows_sum", {1, 5, 3},
              [](Tape& t, const DiffVar& x) { return reduce_rows_sum(t, x); });
    check_vjp("broadcast_rows", {1, 1, 4},
              [](Tape& t, const DiffVar& x) { return broadcast_rows(t, x, 5); });
    check_vjp("reshape", {1, 4, 6},
              [](Tape& t, const DiffVar& x) { return reshape(t, x, {2, 3, 4}); });
    check_vjp("crop", {2, 5, 6},
              [](Tape& t, const DiffVar& x) { return crop(t, x, 0, 2, 1, 3, 2, 3); });
    check_vjp("pad2d", {2, 3, 4},
              [](Tape& t, const DiffVar& x) { return pad2d(t, x, 1, 2, 0, 3); });
    check_vjp("concat_ch", {2, 3, 4}, [](Tape& t, const DiffVar& x) {
        return concat_ch(t, x, constant(Tensor::full({1, 3, 4}, 0.3)));
    });
    check_vjp("concat_w", {1, 3, 2}, [](Tape& t, const DiffVar& x) { return concat_w(t, x, x); });
    check_vjp("gather_rows", {1, 6, 2},
              [](Tape& t, const DiffVar& x) { return gather_rows(t, x, {0, 5, 2, 2, 1}); });
    check_vjp("scatter_add_rows", {1, 4, 2}, [](Tape& t, const DiffVar& x) {
        return scatter_add_rows(t, x, {3, 0, 0, 2}, 5);
    });
    check_vjp("softmin_rows", {1, 4, 5},
              [](Tape& t, const DiffVar& x) { return softmin_rows(t, x, 0.7); }, 5e-6);
    {
        Rng rng(77);
        Tensor pts = random_tensor(rng, {1, 6, 2});
        check_vjp("sqdist_points_rows", {1, 3, 2},
                  [pts](Tape& t, const DiffVar& q) { return sqdist_points_rows(t, pts, q); });
        check_vjp("sqdist_rows_points", {1, 3, 2},
                  [pts](Tape& t, const DiffVar& q) { return sqdist_rows_points(t, q, pts); });
    }
    {
        Rng rng(78);
        Tensor w = random_tensor(rng, {3, 2, 9}, -0.5, 0.5);
        Tensor b = random_tensor(rng, {3, 1, 1});
        Tensor x = random_tensor(rng, {2, 5, 6});
        for (auto pad : {kern::Pad::Zero, kern::Pad::Periodic}) {
            check_vjp(pad == kern::Pad::Zero ? "conv3x3_x_zero" : "conv3x3_x_periodic", {2, 5, 6},
                      [w, b, pad](Tape& t, const DiffVar& xx) {
                          return conv3x3(t, xx, constant(w), constant(b), pad);
                      });
            check_vjp(pad == kern::Pad::Zero ? "conv3x3_w_zero" : "conv3x3_w_periodic", {3, 2, 9},
                      [x, b, pad](Tape& t, const DiffVar& ww) {
                          return conv3x3(t, constant(x), ww, constant(b), pad);
                      });
            check_vjp("conv3x3_bias", {3, 1, 1}, [x, w, pad](Tape& t, const DiffVar& bb) {
                return conv3x3(t, constant(x), constant(w), bb, pad);
            });
        }
    }
    check_vjp("avgpool2", {2, 4, 6}, [](Tape& t, const DiffVar& x) { return avgpool2(t, x); });
    check_vjp("upsample2", {2, 3, 4}, [](Tape& t, const DiffVar& x) { return upsample2(t, x); });
    check_vjp("center_to_facex", {1, 3, 5},
              [](Tape& t, const DiffVar& x) { return center_to_facex(t, x); });
    check_vjp("center_to_facey", {1, 3, 5},
              [](Tape& t, const DiffVar& x) { return center_to_facey(t, x); });
    {
        // small SPD system
        const int n = 6;
        std::vector<double> a(n * n, 0.0);
        for (int i = 0; i < n; ++i) {
            a[std::size_t(i) * n + i] = 4.0;
            if (i + 1 < n) a[std::size_t(i) * n + i + 1] = a[std::size_t(i + 1) * n + i] = -1.0;
        }
        static Chol chol = Chol::factor(a, n);
        check_vjp("solve_spd", {1, 6, 1},
                  [](Tape& t, const DiffVar& rhs) { return solve_spd(t, chol, rhs); });
    }
    // round_f32 is a storage quantizer with a straight-through VJP; finite
    // differences of a step function are meaningless, so check it directly
    {
        Tape t;
        DiffVar x = t.leaf(Tensor::scalar(1.0 + 1e-12), "x");
        DiffVar y = round_f32(t, x);
        CHECK(y.val.scalar_value() == doctest::Approx(1.0));
        auto gs = t.backward(reduce_sum(t, scale(t, y, 3.0)));
        CHECK(gs.grad(x.node).scalar_value() == doctest::Approx(3.0));
    }
}

TEST_CASE("linearity of backward") {
    Rng rng(21);
    Tensor f0 = random_tensor(rng, {1, 4, 4});
    const double a = 2.25, b = -0.5; // exactly representable
    auto grad_of = [&](std::function<DiffVar(Tape&, const DiffVar&)> fn) {
        Tape t;
        DiffVar x = t.leaf(f0, "x");
        auto gs = t.backward(fn(t, x));
        return gs.grad_or_zero(x.node, f0.shape());
    };
    auto f = [](Tape& t, const DiffVar& x) { return reduce_sum(t, mul(t, x, x)); };
    auto g = [](Tape& t, const DiffVar& x) { return reduce_sum(t, vsin(t, x)); };
    Tensor gf = grad_of(f), gg = grad_of(g);
    Tensor gsum = grad_of([&](Tape& t, const DiffVar& x) {
        return add(t, scale(t, f(t, x), a), scale(t, g(t, x), b));
    });
    for (std::size_t i = 0; i < f0.size(); ++i)
        CHECK(gsum.data()[i] ==
              doctest::Approx(a * gf.data()[i] + b * gg.data()[i]).epsilon(1e-14));
}

TEST_CASE("backward errors: non-scalar seed, consumed tape, non-finite op") {
    Tape t;
    DiffVar x = t.leaf(Tensor::full({1, 2, 2}, 1.0), "x");
    DiffVar y = mul(t, x, x);
    CHECK_THROWS_AS((void)t.backward(y), SimError); // seed not scalar

    Tape t2;
    DiffVar x2 = t2.leaf(Tensor::scalar(1.0), "x");
    DiffVar y2 = mul(t2, x2, x2);
    (void)t2.backward(y2);
    CHECK_THROWS_AS((void)t2.backward(y2), SimError); // already consumed

    Tape t3;
    DiffVar x3 = t3.leaf(Tensor::scalar(1000.0), "x");
    CHECK_THROWS_AS((void)vexp(t3, x3), SimError); // overflow to inf detected eagerly
}

TEST_CASE("fan-out accumulates additively; unreached leaves read zero") {
    Tape t;
    DiffVar x = t.leaf(Tensor::scalar(3.0), "x");
    DiffVar unused = t.leaf(Tensor::scalar(5.0), "unused");
    DiffVar y = add(t, mul(t, x, x), x); // y = x^2 + x, dy/dx = 2x + 1
    auto gs = t.backward(y);
    CHECK(gs.grad(x.node).scalar_value() == doctest::Approx(7.0));
    CHECK(gs.grad_or_zero(unused.node, {1, 1, 1}).scalar_value() == 0.0);
}

namespace {

// toy recurrence: s' = s + 0.1 sin(p * s), loss increment s'^2
StepResult toy_step(Tape& t, int, const std::vector<DiffVar>& state,
                    const std::vector<DiffVar>& params) {
    DiffVar s = state[0];
    DiffVar p = params[0];
    DiffVar s2 = add(t, s, scale(t, vsin(t, mul(t, p, s)), 0.1));
    DiffVar li = mul(t, s2, s2);
    return {{s2}, li};
}

} // namespace

TEST_CASE("checkpointed_unroll: trivial cases") {
    std::vector<Tensor> s0 = {Tensor::scalar(0.7)};
    std::vector<Tensor> p = {Tensor::scalar(1.3)};

    CheckpointedUnroll u0(toy_step, s0, p, 0, 2);
    u0.run_forward();
    CHECK(u0.checkpoint_count() == 0);
    CHECK(u0.loss() == 0.0);
    CHECK(u0.final_state()[0].scalar_value() == doctest::Approx(0.7));

    CheckpointedUnroll u4(toy_step, s0, p, 4, 2);
    u4.run_forward();
    CHECK(u4.checkpoint_count() == 2);
}

TEST_CASE("checkpointed and plain unroll gradients agree to 1e-12") {
    std::vector<Tensor> s0 = {Tensor::scalar(0.7)};
    std::vector<Tensor> p = {Tensor::scalar(1.3)};
    const int n = 10;

    CheckpointedUnroll plain(toy_step, s0, p, n, n); // single segment = no checkpointing
    plain.run_forward();
    auto g_plain = plain.backward();

    CheckpointedUnroll ck(toy_step, s0, p, n, 1);
    ck.run_forward();
    auto g_ck = ck.backward();

    CHECK(plain.loss() == doctest::Approx(ck.loss()).epsilon(1e-15));
    double gp = g_plain.d_params[0].scalar_value();
    double gc = g_ck.d_params[0].scalar_value();
    CHECK(std::fabs(gp - gc) / std::max(std::fabs(gp), 1e-12) < 1e-12);
    double sp = g_plain.d_initial_state[0].scalar_value();
    double sc = g_ck.d_initial_state[0].scalar_value();
    CHECK(std::fabs(sp - sc) / std::max(std::fabs(sp), 1e-12) < 1e-12);

    // and both match finite differences
    auto loss_at = [&](double pv) {
        CheckpointedUnroll u(toy_step, s0, {Tensor::scalar(pv)}, n, 3);
        u.run_forward();
        return u.loss();
    };
    double eps = 1e-6;
    double g_fd = (loss_at(1.3 + eps) - loss_at(1.3 - eps)) / (2 * eps);
    CHECK(std::fabs(gp - g_fd) / std::max(std::fabs(g_fd), 1e-12) < 1e-8);
}

TEST_CASE("checkpointed_unroll propagates non-finite error with step index") {
    auto bad_step = [](Tape& t, int ti, const std::vector<DiffVar>& state,
                       const std::vector<DiffVar>&) -> StepResult {
        DiffVar s = state[0];
        if (ti == 3) s = vexp(t, scale(t, s, 1e6)); // overflows
        return {{s}, constant(0.0)};
    };
    CheckpointedUnroll u(bad_step, {Tensor::scalar(2.0)}, {}, 6, 2);
    try {
        u.run_forward();
        FAIL("expected SimError");
    } catch (const SimError& e) {
        CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    }
}

TEST_CASE("finite_difference_check harness") {
    // loss = p^2 at p = 3
    auto sq = [](double p) { return p * p; };
    auto sq_grad = [](double p) {
        Tape t;
        DiffVar x = t.leaf(Tensor::scalar(p), "p");
        auto gs = t.backward(mul(t, x, x));
        return gs.grad(x.node).scalar_value();
    };
    auto r = finite_difference_check(sq, sq_grad, 3.0, 1e-5);
    CHECK(r.rel_err < 1e-8);

    // loss = sin(p) at p = 1; analytic cos(1)
    auto sn = [](double p) { return std::sin(p); };
    auto sn_grad = [](double p) {
        Tape t;
        DiffVar x = t.leaf(Tensor::scalar(p), "p");
        auto gs = t.backward(vsin(t, x));
        return gs.grad(x.node).scalar_value();
    };
    auto r2 = finite_difference_check(sn, sn_grad, 1.0, 1e-6);
    CHECK(r2.rel_err < 1e-7);
    CHECK(r2.g_ad == doctest::Approx(std::cos(1.0)));

    // non-deterministic loss is flagged
    int calls = 0;
    auto nd = [&calls](double p) { return p + 1e-6 * (calls++); };
    CHECK_THROWS_AS((void)finite_difference_check(nd, sq_grad, 1.0, 1e-5), SimError);
}
