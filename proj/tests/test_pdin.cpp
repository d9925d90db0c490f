#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "core/net.hpp"
#include "fd_check.hpp"

using namespace pgs;
using fd::DParam;
using fd::DTensor;

namespace {

using DPdin = PdinParamsT<double>;

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double q_at(DPdin& p, double astd, double y) {
    NoGradGuardT<double> off;
    DTensor yt = DTensor::full(Shape{1, 1, 1, 1}, y);
    DTensor at = DTensor::full(Shape{1, 1, 1, 1}, astd);
    return moving_weight(yt, at, p).item();
}

DTensor channel_std_ref(const DTensor& x) {
    NoGradGuardT<double> off;
    return ops::channel_std(x);
}

}  // namespace

TEST_CASE("moving weight matches the frozen example") {
    Rng rng(0);
    DPdin p("p", 4, PdinInit::Constant, rng);
    // k1=1, b1=0.3, k2=-1, b2=0.3; astd=0.1, y=0.6: upper hinge 0.2 active,
    // lower hinge inactive -> sigmoid(0.2) + sigmoid(0) = 1.049834.
    CHECK(q_at(p, 0.1, 0.6) == doctest::Approx(1.049834).epsilon(1e-6));
    CHECK(q_at(p, 0.1, 0.6) == doctest::Approx(sigmoid_ref(0.2) + 0.5).epsilon(1e-12));
}

TEST_CASE("moving weight is exactly one between the lines") {
    Rng rng(0);
    DPdin p("p", 4, PdinInit::Constant, rng);
    // Between the separating lines both hinge margins are <= 0, so both
    // branches evaluate sigmoid(0) = 0.5 exactly.
    for (double astd : {0.05, 0.2, 0.45}) {
        const double upper = 1.0 * astd + 0.3;
        const double lower = -1.0 * astd + 0.3;
        for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double y = lower + frac * (upper - lower);
            CHECK(q_at(p, astd, y) == 1.0);
        }
    }
}

TEST_CASE("moving weight exceeds one outside the lines") {
    Rng rng(0);
    DPdin p("p", 4, PdinInit::Constant, rng);
    const double astd = 0.15;
    const double upper = astd + 0.3;
    const double lower = -astd + 0.3;

    double q = q_at(p, astd, upper + 0.4);
    CHECK(q > 1.0);
    CHECK(q == doctest::Approx(sigmoid_ref(0.4) + 0.5).epsilon(1e-9));

    q = q_at(p, astd, lower - 0.25);
    CHECK(q > 1.0);
    CHECK(q == doctest::Approx(0.5 + sigmoid_ref(0.25)).epsilon(1e-9));
}

TEST_CASE("moving weight rejects mismatched shapes") {
    Rng rng(0);
    DPdin p("p", 4, PdinInit::Constant, rng);
    DTensor y = DTensor::zeros(Shape{1, 1, 2, 2});
    DTensor astd = DTensor::zeros(Shape{1, 1, 2, 3});
    CHECK_THROWS_AS(moving_weight(y, astd, p), DimensionError);
}

TEST_CASE("pdin scales channel deviation by the gated pan weight") {
    Rng rng(7);
    const int c = 5, k = 3, h = 4, w = 4;
    DPdin p("p", k, PdinInit::Constant, rng);
    for (auto& v : *p.wp1_w.value.data) v = rng.uniform(-0.5, 0.5);
    for (auto& v : *p.wp2_w.value.data) v = rng.uniform(-0.5, 0.5);
    for (auto& v : *p.wy_w.value.data) v = rng.uniform(-0.5, 0.5);

    DTensor abun = fd::random_tensor(Shape{1, c, h, w}, rng, 0.0, 1.0);
    DTensor pan = fd::random_tensor(Shape{1, k, h, w}, rng, -1.0, 1.0);

    NoGradGuardT<double> off;
    DTensor y = ops::conv2d(pan, p.wy_w.value, p.wy_b.value, 1, 0);
    DTensor astd = ops::channel_std(abun);
    DTensor q = moving_weight(y, astd, p);
    DTensor p1 = ops::leaky_relu(ops::conv2d(pan, p.wp1_w.value, p.wp1_b.value, 1, 1), 0.2);

    // X_e = (q*P1 + 1)*abun + q*P2: the additive term is channel-constant,
    // so STD(X_e) = |q*P1 + 1| * STD(abun) pixel for pixel.
    PdinAblation full;
    DTensor out = pdin_forward(abun, pan, p, full, 0.2);
    DTensor got = ops::channel_std(out);
    for (int i = 0; i < h * w; ++i) {
        const double gain = std::fabs(q.data->at(i) * p1.data->at(i) + 1.0);
        CHECK(got.data->at(i) == doctest::Approx(gain * astd.data->at(i)).epsilon(1e-6));
    }

    PdinAblation no_res;
    no_res.use_residual = false;
    DTensor out2 = pdin_forward(abun, pan, p, no_res, 0.2);
    DTensor got2 = ops::channel_std(out2);
    for (int i = 0; i < h * w; ++i) {
        const double gain = std::fabs(q.data->at(i) * p1.data->at(i));
        CHECK(got2.data->at(i) == doctest::Approx(gain * astd.data->at(i)).epsilon(1e-6));
    }
}

TEST_CASE("pdin bias term leaves channel std unchanged") {
    Rng rng(11);
    const int c = 6, k = 4, h = 3, w = 5;
    DPdin p("p", k, PdinInit::Constant, rng);
    for (auto& v : *p.wp2_w.value.data) v = rng.uniform(-1.0, 1.0);
    p.wp2_b.value.data->at(0) = 0.7;

    DTensor abun = fd::random_tensor(Shape{1, c, h, w}, rng, 0.0, 1.0);
    DTensor pan = fd::random_tensor(Shape{1, k, h, w}, rng, -1.0, 1.0);

    NoGradGuardT<double> off;
    PdinAblation with_bias;
    PdinAblation no_bias;
    no_bias.use_bias = false;
    DTensor a = ops::channel_std(pdin_forward(abun, pan, p, with_bias, 0.2));
    DTensor b = ops::channel_std(pdin_forward(abun, pan, p, no_bias, 0.2));
    for (std::size_t i = 0; i < a.data->size(); ++i)
        CHECK(a.data->at(i) == doctest::Approx(b.data->at(i)).epsilon(1e-9));
}

TEST_CASE("pdin with everything disabled is the identity") {
    Rng rng(3);
    DPdin p("p", 4, PdinInit::Normal, rng);
    DTensor abun = fd::random_tensor(Shape{2, 3, 4, 4}, rng, 0.0, 1.0);
    DTensor pan = fd::random_tensor(Shape{2, 4, 4, 4}, rng, -1.0, 1.0);

    NoGradGuardT<double> off;
    PdinAblation none;
    none.use_q = none.use_pan_weights = none.use_bias = none.use_residual = false;
    DTensor out = pdin_forward(abun, pan, p, none, 0.2);
    CHECK(*out.data == *abun.data);
}

TEST_CASE("pdin residual flag doubles a passthrough") {
    Rng rng(3);
    DPdin p("p", 4, PdinInit::Normal, rng);
    DTensor abun = fd::random_tensor(Shape{1, 3, 4, 4}, rng, 0.0, 1.0);
    DTensor pan = fd::random_tensor(Shape{1, 4, 4, 4}, rng, -1.0, 1.0);

    NoGradGuardT<double> off;
    PdinAblation only_res;
    only_res.use_q = only_res.use_pan_weights = only_res.use_bias = false;
    only_res.use_residual = true;
    DTensor out = pdin_forward(abun, pan, p, only_res, 0.2);
    for (std::size_t i = 0; i < out.data->size(); ++i)
        CHECK(out.data->at(i) == 2.0 * abun.data->at(i));
}

TEST_CASE("constant initialization makes the pan maps one and zero") {
    Rng rng(0);
    const int c = 4, k = 6, h = 3, w = 3;
    DPdin p("p", k, PdinInit::Constant, rng);

    // Constant pan feature v: w_y averages channels so y = v; w_p1 gives
    // P1 = 1 and w_p2 gives P2 = 0, hence X_e = (q + 1) * abun with a
    // hand-computable q.
    const double v = 0.9;
    DTensor pan = DTensor::full(Shape{1, k, h, w}, v);
    DTensor abun = DTensor::full(Shape{1, c, h, w}, 0.25);  // astd = 0

    NoGradGuardT<double> off;
    PdinAblation full;
    DTensor out = pdin_forward(abun, pan, p, full, 0.2);
    const double q = sigmoid_ref(v - 0.3) + 0.5;
    for (std::size_t i = 0; i < out.data->size(); ++i)
        CHECK(out.data->at(i) == doctest::Approx((q + 1.0) * 0.25).epsilon(1e-12));
}

TEST_CASE("line parameter initialization modes are deterministic and distinct") {
    Rng r1(42), r2(42), r3(42);
    DPdin a("a", 4, PdinInit::Normal, r1);
    DPdin b("b", 4, PdinInit::Normal, r2);
    DPdin c("c", 4, PdinInit::Uniform, r3);

    CHECK(a.k1.value.item() == b.k1.value.item());
    CHECK(a.b2.value.item() == b.b2.value.item());
    CHECK(a.k1.value.item() != 1.0);
    CHECK(c.k1.value.item() >= -1.0);
    CHECK(c.k1.value.item() <= 1.0);
    // Structural parts are init-mode independent.
    CHECK(a.wp1_b.value.item() == 1.0);
    CHECK(c.wp2_b.value.item() == 0.0);
    for (double v : *a.wy_w.value.data) CHECK(v == 0.25);
}

TEST_CASE("pdin gradients agree with finite differences") {
    Rng rng(19);
    const int c = 3, k = 2, h = 4, w = 4;
    DPdin p("p", k, PdinInit::Constant, rng);
    for (auto& v : *p.wp1_w.value.data) v = rng.uniform(-0.5, 0.5);
    for (auto& v : *p.wp2_w.value.data) v = rng.uniform(-0.5, 0.5);

    // Inputs chosen so that across pixels both hinges and the in-between
    // region all occur; the mask makes the loss sensitive everywhere.
    DParam abun("abun", fd::random_tensor(Shape{1, c, h, w}, rng, 0.0, 1.0));
    DParam pan("pan", fd::random_tensor(Shape{1, k, h, w}, rng, -2.0, 2.0));
    DTensor mask = fd::random_tensor(Shape{1, c, h, w}, rng, 0.5, 1.5);

    std::vector<DParam*> params = {&p.k1,   &p.b1,   &p.k2,    &p.b2,    &p.wy_w, &p.wy_b,
                                   &p.wp1_w, &p.wp1_b, &p.wp2_w, &p.wp2_b, &abun,   &pan};
    PdinAblation full;
    fd::check_grads(params, [&] {
        return ops::sum(ops::mul(pdin_forward(abun.value, pan.value, p, full, 0.2), mask));
    });
}

TEST_CASE("pdin gradient flow respects ablation switches") {
    Rng rng(23);
    const int c = 3, k = 2, h = 3, w = 3;
    DPdin p("p", k, PdinInit::Constant, rng);
    // Move wp2 off its all-zero init: a zero pre-activation sits exactly on
    // the LeakyReLU kink where finite differences straddle both slopes.
    for (auto& v : *p.wp2_w.value.data) v = rng.uniform(-0.5, 0.5);
    p.wp2_b.value.data->at(0) = 0.1;
    DParam abun("abun", fd::random_tensor(Shape{1, c, h, w}, rng, 0.0, 1.0));
    DTensor pan = fd::random_tensor(Shape{1, k, h, w}, rng, -2.0, 2.0);

    PdinAblation no_q;
    no_q.use_q = false;
    std::vector<DParam*> params = {&p.wp1_w, &p.wp1_b, &p.wp2_w, &p.wp2_b, &abun};
    fd::check_grads(params, [&] {
        return ops::sum(pdin_forward(abun.value, pan, p, no_q, 0.2));
    });

    // With q disabled the line parameters must receive no gradient at all.
    for (auto* q_param : {&p.k1, &p.b1, &p.k2, &p.b2}) {
        q_param->zero_grad();
        DTensor l = ops::sum(pdin_forward(abun.value, pan, p, no_q, 0.2));
        backward(l);
        for (double g : q_param->grad()) CHECK(g == 0.0);
    }
}
