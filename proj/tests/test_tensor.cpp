#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "core/losses.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace pgs;

namespace {

using DTensor = TensorT<double>;
using DParam = ParameterT<double>;

DTensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    DTensor t = DTensor::zeros(s);
    for (auto& v : *t.data) v = rng.uniform(lo, hi);
    return t;
}

// Central-difference audit: analytic gradients of loss() w.r.t. every
// registered parameter must match (f(x+h)-f(x-h))/2h coordinate-wise.
void check_grads(std::vector<DParam*> params, const std::function<DTensor()>& loss,
                 double h = 1e-5, double tol = 1e-5) {
    for (auto* p : params) p->zero_grad();
    DTensor l = loss();
    backward(l);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        DParam& p = *params[pi];
        std::vector<double> analytic = p.grad();
        auto& vals = *p.value.data;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double keep = vals[i];
            double lp, lm;
            {
                NoGradGuardT<double> off;
                vals[i] = keep + h;
                lp = loss().item();
                vals[i] = keep - h;
                lm = loss().item();
                vals[i] = keep;
            }
            const double fd = (lp - lm) / (2.0 * h);
            const double err = std::fabs(analytic[i] - fd);
            const double scale = std::max({1.0, std::fabs(analytic[i]), std::fabs(fd)});
            CAPTURE(pi);
            CAPTURE(i);
            CAPTURE(analytic[i]);
            CAPTURE(fd);
            CHECK(err <= tol * scale);
        }
    }
    TapeT<double>::instance().clear();
}

}  // namespace

TEST_CASE("shape basics") {
    Shape s{2, 3, 4};
    CHECK(s.nd == 3);
    CHECK(s.numel() == 24);
    CHECK(s.str() == "[2,3,4]");
    auto p = s.padded();
    CHECK(p[0] == 1);
    CHECK(p[1] == 2);
    CHECK(p[2] == 3);
    CHECK(p[3] == 4);
    CHECK(Shape{2, 3} == Shape{2, 3});
    CHECK(Shape{2, 3} != Shape{3, 2});
    CHECK(Shape{2, 3} != Shape{2, 3, 1});
    CHECK_THROWS_AS((Shape{1, 2, 3, 4, 5}), DimensionError);
    CHECK(Shape{}.numel() == 0);
}

TEST_CASE("rng determinism and state round-trip") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

    Rng c(7);
    for (int i = 0; i < 33; ++i) c.normal();  // odd count leaves a cached spare
    std::string snap = c.state();
    std::vector<double> expect;
    for (int i = 0; i < 50; ++i) expect.push_back(c.normal());
    Rng d(0);
    d.restore(snap);
    for (int i = 0; i < 50; ++i) CHECK(d.normal() == expect[i]);
}

TEST_CASE("rng uniform_int bounds and shuffle permutation") {
    Rng r(3);
    bool lo_hit = false, hi_hit = false;
    for (int i = 0; i < 2000; ++i) {
        int v = r.uniform_int(2, 5);
        CHECK(v >= 2);
        CHECK(v <= 5);
        lo_hit = lo_hit || v == 2;
        hi_hit = hi_hit || v == 5;
    }
    CHECK(lo_hit);
    CHECK(hi_hit);

    std::vector<int> perm(257);
    std::iota(perm.begin(), perm.end(), 0);
    r.shuffle(perm);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 257; ++i) CHECK(sorted[i] == i);
    CHECK(perm != sorted);  // astronomically unlikely to be identity
}

TEST_CASE("rng normal moments") {
    Rng r(11);
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        s += v;
        s2 += v * v;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    CHECK(std::fabs(mean) < 0.03);
    CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("elementwise forward values") {
    // broadcast add: [2,3] + [3]
    auto a = DTensor::from(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = DTensor::from(Shape{3}, {10, 20, 30});
    auto c = ops::add(a, b);
    CHECK(c.shape == Shape{2, 3});
    std::vector<double> want{11, 22, 33, 14, 25, 36};
    for (int i = 0; i < 6; ++i) CHECK((*c.data)[i] == want[i]);

    auto d = ops::mul(a, b);
    std::vector<double> wantm{10, 40, 90, 40, 100, 180};
    for (int i = 0; i < 6; ++i) CHECK((*d.data)[i] == wantm[i]);

    auto e = ops::sub(b, a);
    std::vector<double> wants{9, 18, 27, 6, 15, 24};
    for (int i = 0; i < 6; ++i) CHECK((*e.data)[i] == wants[i]);

    // column-vector broadcast: [2,1] across [2,3]
    auto col = DTensor::from(Shape{2, 1}, {100, 200});
    auto f = ops::add(a, col);
    std::vector<double> wantc{101, 102, 103, 204, 205, 206};
    for (int i = 0; i < 6; ++i) CHECK((*f.data)[i] == wantc[i]);

    CHECK_THROWS_AS(ops::add(DTensor::zeros(Shape{2, 3}), DTensor::zeros(Shape{4})),
                    DimensionError);
}

TEST_CASE("activation forward values") {
    auto x = DTensor::from(Shape{5}, {-2.0, -0.5, 0.0, 0.5, 2.0});
    auto lr = ops::leaky_relu(x, 0.2);
    std::vector<double> want{-0.4, -0.1, 0.0, 0.5, 2.0};
    for (int i = 0; i < 5; ++i) CHECK((*lr.data)[i] == doctest::Approx(want[i]).epsilon(1e-12));

    auto r = ops::relu(x);
    std::vector<double> wantr{0.0, 0.0, 0.0, 0.5, 2.0};
    for (int i = 0; i < 5; ++i) CHECK((*r.data)[i] == wantr[i]);

    auto s = ops::sigmoid(DTensor::scalar(0.2));
    CHECK(std::fabs(s.item() - 0.549834) < 1e-6);
    CHECK(ops::sigmoid(DTensor::scalar(0.0)).item() == doctest::Approx(0.5));
    // extreme inputs stay finite and saturate
    CHECK(ops::sigmoid(DTensor::scalar(-500.0)).item() == doctest::Approx(0.0));
    CHECK(ops::sigmoid(DTensor::scalar(500.0)).item() == doctest::Approx(1.0));

    CHECK_THROWS_AS(ops::leaky_relu(x, 1.5), ConfigError);
}

TEST_CASE("channel_std forward value") {
    // one pixel, spectrum {1,2,3,4}: population variance 1.25
    auto x = DTensor::from(Shape{1, 4, 1, 1}, {1, 2, 3, 4});
    auto s = ops::channel_std(x);
    CHECK(s.shape == Shape{1, 1, 1, 1});
    CHECK(s.item() == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));

    // constant spectrum has zero deviation (up to rounding residue)
    auto u = ops::channel_std(DTensor::full(Shape{2, 3, 2, 2}, 0.7));
    for (double v : *u.data) CHECK(std::fabs(v) < 1e-12);
}

TEST_CASE("concat layout") {
    auto a = DTensor::from(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
    auto b = DTensor::from(Shape{1, 2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
    auto c = ops::concat_channels<double>({a, b});
    CHECK(c.shape == Shape{1, 3, 2, 2});
    std::vector<double> want{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    for (int i = 0; i < 12; ++i) CHECK((*c.data)[i] == want[i]);
    CHECK_THROWS_AS(ops::concat_channels<double>({a, DTensor::zeros(Shape{1, 1, 3, 2})}),
                    DimensionError);
}

TEST_CASE("conv2d matches direct reference") {
    Rng rng(5);
    const int n = 2, ci = 3, h = 6, w = 5, co = 4, k = 3, stride = 1, pad = 1;
    auto x = random_tensor(Shape{n, ci, h, w}, rng);
    auto wt = random_tensor(Shape{co, ci, k, k}, rng);
    auto bs = random_tensor(Shape{co}, rng);
    auto y = ops::conv2d(x, wt, bs, stride, pad);
    CHECK(y.shape == Shape{n, co, h, w});

    // independent quadruple-loop oracle
    for (int b = 0; b < n; ++b)
        for (int f = 0; f < co; ++f)
            for (int oy = 0; oy < h; ++oy)
                for (int ox = 0; ox < w; ++ox) {
                    double acc = (*bs.data)[f];
                    for (int c = 0; c < ci; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride + ky - pad;
                                int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += (*x.data)[((b * ci + c) * h + iy) * w + ix] *
                                       (*wt.data)[((f * ci + c) * k + ky) * k + kx];
                            }
                    CHECK((*y.data)[((b * co + f) * h + oy) * w + ox] ==
                          doctest::Approx(acc).epsilon(1e-12));
                }
}

TEST_CASE("conv2d 1x1 equals per-pixel matrix product") {
    Rng rng(6);
    auto x = random_tensor(Shape{1, 3, 4, 4}, rng);
    auto wt = random_tensor(Shape{2, 3, 1, 1}, rng);
    auto bs = random_tensor(Shape{2}, rng);
    auto y = ops::conv2d(x, wt, bs, 1, 0);
    for (int f = 0; f < 2; ++f)
        for (int p = 0; p < 16; ++p) {
            double acc = (*bs.data)[f];
            for (int c = 0; c < 3; ++c) acc += (*wt.data)[f * 3 + c] * (*x.data)[c * 16 + p];
            CHECK((*y.data)[f * 16 + p] == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv2d extent rules") {
    auto x = DTensor::zeros(Shape{1, 1, 8, 8});
    auto w4 = DTensor::zeros(Shape{2, 1, 4, 4});
    auto b2 = DTensor::zeros(Shape{2});
    auto y = ops::conv2d(x, w4, b2, 4, 0);  // stride = kernel: exact tiling
    CHECK(y.shape == Shape{1, 2, 2, 2});

    auto x9 = DTensor::zeros(Shape{1, 1, 9, 9});
    CHECK_THROWS_AS(ops::conv2d(x9, w4, b2, 4, 0), ConfigError);  // 9 not tiled by 4

    auto w3 = DTensor::zeros(Shape{2, 1, 3, 3});
    auto ys = ops::conv2d(x9, w3, b2, 2, 1);  // (9+2-3)/2+1 = 5
    CHECK(ys.shape == Shape{1, 2, 5, 5});
    CHECK_THROWS_AS(ops::conv2d(x, w3, b2, 2, 1), ConfigError);  // (8+2-3)=7 not even

    CHECK_THROWS_AS(ops::conv2d(x, DTensor::zeros(Shape{2, 3, 1, 1}), b2, 1, 0), DimensionError);
    CHECK_THROWS_AS(ops::conv2d(x, DTensor::zeros(Shape{2, 1, 1, 1}), DTensor::zeros(Shape{3}), 1, 0),
                    DimensionError);
}

TEST_CASE("conv2d narrow input with padding stays in bounds") {
    // kernel wider than the unpadded input: every tap must clamp correctly
    Rng rng(17);
    auto x = random_tensor(Shape{1, 1, 1, 1}, rng);
    auto wt = random_tensor(Shape{1, 1, 3, 3}, rng);
    auto bs = DTensor::zeros(Shape{1});
    auto y = ops::conv2d(x, wt, bs, 2, 1);  // (1+2-3)/2+1 = 1
    CHECK(y.shape == Shape{1, 1, 1, 1});
    CHECK(y.item() == doctest::Approx((*x.data)[0] * (*wt.data)[4]).epsilon(1e-12));
}

TEST_CASE("batch_norm training statistics") {
    Rng rng(8);
    const int n = 4, c = 3, h = 2, w = 2;
    auto x = random_tensor(Shape{n, c, h, w}, rng, 0.0, 2.0);
    auto gamma = DTensor::full(Shape{c}, 1.0);
    auto beta = DTensor::zeros(Shape{c});
    ops::BatchNormStats<double> stats{std::vector<double>(c, 0.0), std::vector<double>(c, 1.0)};

    auto y = ops::batch_norm(x, gamma, beta, &stats, true);
    const std::int64_t cnt = n * h * w;
    for (int k = 0; k < c; ++k) {
        double m = 0, v = 0, bm = 0, bv = 0;
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < h * w; ++i) {
                m += (*y.data)[(b * c + k) * h * w + i];
                bm += (*x.data)[(b * c + k) * h * w + i];
            }
        m /= cnt;
        bm /= cnt;
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < h * w; ++i) {
                double dy = (*y.data)[(b * c + k) * h * w + i] - m;
                double dx = (*x.data)[(b * c + k) * h * w + i] - bm;
                v += dy * dy;
                bv += dx * dx;
            }
        v /= cnt;
        // normalized output: zero mean, unit population variance (up to eps)
        CHECK(m == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
        // running stats: momentum 0.1 toward batch mean / unbiased variance
        double unbiased = (bv / cnt) * cnt / (cnt - 1.0);
        CHECK(stats.running_mean[k] == doctest::Approx(0.9 * 0.0 + 0.1 * bm).epsilon(1e-9));
        CHECK(stats.running_var[k] == doctest::Approx(0.9 * 1.0 + 0.1 * unbiased).epsilon(1e-9));
    }

    // eval mode normalizes with the running stats, not the batch
    auto ye = ops::batch_norm(x, gamma, beta, &stats, false);
    for (int k = 0; k < c; ++k) {
        double inv = 1.0 / std::sqrt(stats.running_var[k] + 1e-5);
        for (int b = 0; b < n; ++b)
            for (int i = 0; i < h * w; ++i) {
                double want = ((*x.data)[(b * c + k) * h * w + i] - stats.running_mean[k]) * inv;
                CHECK((*ye.data)[(b * c + k) * h * w + i] == doctest::Approx(want).epsilon(1e-9));
            }
    }

    // affine transform applies after normalization
    auto g2 = DTensor::from(Shape{c}, {2.0, 3.0, 4.0});
    auto b2 = DTensor::from(Shape{c}, {0.5, -0.5, 1.0});
    auto ya = ops::batch_norm(x, g2, b2, &stats, false);
    for (int k = 0; k < c; ++k)
        for (int i = 0; i < n * h * w; ++i) {
            int b = i / (h * w), p = i % (h * w);
            double base = (*ye.data)[(b * c + k) * h * w + p];
            CHECK((*ya.data)[(b * c + k) * h * w + p] ==
                  doctest::Approx(base * (*g2.data)[k] + (*b2.data)[k]).epsilon(1e-9));
        }

    // a single value per channel cannot be normalized in training mode
    auto tiny = DTensor::zeros(Shape{1, 3, 1, 1});
    CHECK_THROWS_AS(ops::batch_norm(tiny, gamma, beta, &stats, true), ConfigError);
}

TEST_CASE("bicubic preserves constants exactly and reproduces linear ramps") {
    auto c = DTensor::full(Shape{1, 2, 5, 7}, 0.3125);
    auto up = ops::bicubic_resize(c, 2.0);
    CHECK(up.shape == Shape{1, 2, 10, 14});
    for (double v : *up.data) CHECK(v == 0.3125);  // bit-exact

    // width ramp x(i)=i: interior of a x2 upsample lands on the same line
    const int w = 8;
    DTensor ramp = DTensor::zeros(Shape{1, 1, 4, w});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < w; ++x) (*ramp.data)[y * w + x] = static_cast<double>(x);
    auto r2 = ops::bicubic_resize(ramp, 2.0);
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 12; ++x) {  // columns whose taps never clamp
            double sx = (x + 0.5) / 2.0 - 0.5;
            CHECK((*r2.data)[y * 16 + x] == doctest::Approx(sx).epsilon(1e-12));
        }

}

TEST_CASE("bicubic size rules") {
    auto a = DTensor::full(Shape{1, 1, 4, 4}, 1.0);
    CHECK(ops::bicubic_resize(a, 4.0).shape == Shape{1, 1, 16, 16});
    CHECK(ops::bicubic_resize(a, 0.5).shape == Shape{1, 1, 2, 2});
    CHECK(ops::bicubic_resize(a, 1.5).shape == Shape{1, 1, 6, 6});
    CHECK_THROWS_AS(ops::bicubic_resize(a, 0.3), ConfigError);
    CHECK_THROWS_AS(ops::bicubic_resize(DTensor::zeros(Shape{1, 1, 1, 4}), 2.0), ConfigError);
}

TEST_CASE("loss forward values") {
    // uniform 0.1 residual, 2 channels: sum d^2 over elements / pixel count
    auto p = DTensor::full(Shape{1, 2, 2, 2}, 0.6);
    auto r = DTensor::full(Shape{1, 2, 2, 2}, 0.5);
    CHECK(ops::mse_loss(p, r).item() == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(ops::mse_loss(r, r).item() == 0.0);

    // storage is band-planar: pixel spectra here are (1,0),(1,1) vs (0,1),(1,0),
    // i.e. one orthogonal pair (pi/2) and one 45-degree pair (pi/4)
    auto a = DTensor::from(Shape{1, 2, 1, 2}, {1, 1, 0, 1});
    auto b = DTensor::from(Shape{1, 2, 1, 2}, {0, 1, 1, 0});
    double want = 0.5 * (M_PI / 2.0 + M_PI / 4.0);
    CHECK(ops::sam_loss(a, b).item() == doctest::Approx(want).epsilon(1e-9));

    auto c = DTensor::from(Shape{1, 2, 1, 1}, {1, 1});
    auto d = DTensor::from(Shape{1, 2, 1, 1}, {1, 0});
    CHECK(ops::sam_loss(c, d).item() == doctest::Approx(M_PI / 4.0).epsilon(1e-9));
    CHECK(ops::sam_loss(c, c).item() == doctest::Approx(0.0).scale(1.0));

    // zero spectrum is guarded, not NaN
    auto z = DTensor::zeros(Shape{1, 2, 1, 1});
    CHECK(std::isfinite(ops::sam_loss(z, c).item()));

    CHECK(ops::combined_loss(p, r, 0.25).item() ==
          doctest::Approx(ops::mse_loss(p, r).item() + 0.25 * ops::sam_loss(p, r).item())
              .epsilon(1e-9));
    CHECK_THROWS_AS(ops::mse_loss(p, DTensor::zeros(Shape{1, 2, 2, 3})), DimensionError);
}

TEST_CASE("tape mechanics") {
    auto& tape = TapeT<double>::instance();
    tape.clear();

    // non-scalar loss rejected
    DParam p("p", DTensor::full(Shape{2}, 1.0));
    auto y = ops::mul(p.value, 3.0);
    CHECK_THROWS_AS(backward(y), DimensionError);
    tape.clear();

    // empty tape rejected
    CHECK_THROWS_AS(backward(DTensor::scalar(1.0)), ConfigError);

    // same tensor used twice accumulates: d/dx sum(x*x) = 2x
    DParam x("x", DTensor::from(Shape{3}, {1.0, -2.0, 0.5}));
    auto loss = ops::sum(ops::mul(x.value, x.value));
    backward(loss);
    for (int i = 0; i < 3; ++i)
        CHECK(x.grad()[i] == doctest::Approx(2.0 * (*x.value.data)[i]).epsilon(1e-12));

    // two backward passes accumulate into the sink until zero_grad
    auto loss2 = ops::sum(ops::mul(x.value, x.value));
    backward(loss2);
    for (int i = 0; i < 3; ++i)
        CHECK(x.grad()[i] == doctest::Approx(4.0 * (*x.value.data)[i]).epsilon(1e-12));
    x.zero_grad();
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 0.0);

    // no-grad scope records nothing
    {
        NoGradGuardT<double> off;
        auto q = ops::mul(x.value, x.value);
        CHECK_FALSE(q.requires_grad);
        CHECK(tape.size() == 0);
    }
    // tracking resumes after the guard
    auto q2 = ops::mul(x.value, x.value);
    CHECK(q2.requires_grad);
    CHECK(tape.size() == 1);
    tape.clear();
}

TEST_CASE("non-finite values abort with the producing op named") {
    Tensor big = Tensor::full(Shape{2}, 3e38f);
    try {
        ops::add(big, big);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("add") != std::string::npos);
    }
}

TEST_CASE("gradients: elementwise and broadcast") {
    Rng rng(21);
    DParam a("a", random_tensor(Shape{2, 3, 4, 5}, rng));
    DParam b("b", random_tensor(Shape{3, 1, 5}, rng));
    auto wsum = random_tensor(Shape{2, 3, 4, 5}, rng);  // fixed weights, no grad

    check_grads({&a, &b}, [&] { return ops::sum(ops::mul(ops::add(a.value, b.value), wsum)); });
    check_grads({&a, &b}, [&] { return ops::sum(ops::mul(ops::sub(a.value, b.value), wsum)); });
    check_grads({&a, &b}, [&] { return ops::sum(ops::mul(ops::mul(a.value, b.value), wsum)); });
}

TEST_CASE("gradients: activations") {
    Rng rng(22);
    // keep magnitudes above the FD step so no sample crosses a kink
    DTensor init = random_tensor(Shape{2, 3, 3, 3}, rng);
    for (auto& v : *init.data)
        if (std::fabs(v) < 0.05) v = v < 0 ? v - 0.1 : v + 0.1;
    DParam x("x", init);
    auto wsum = random_tensor(Shape{2, 3, 3, 3}, rng);

    check_grads({&x}, [&] { return ops::sum(ops::mul(ops::leaky_relu(x.value, 0.2), wsum)); });
    check_grads({&x}, [&] { return ops::sum(ops::mul(ops::relu(x.value), wsum)); });
    check_grads({&x}, [&] { return ops::sum(ops::mul(ops::sigmoid(x.value), wsum)); });
}

TEST_CASE("gradients: channel_std and concat") {
    Rng rng(23);
    DParam x("x", random_tensor(Shape{2, 5, 3, 3}, rng, 0.1, 1.0));
    auto wsum = random_tensor(Shape{2, 1, 3, 3}, rng);
    check_grads({&x}, [&] { return ops::sum(ops::mul(ops::channel_std(x.value), wsum)); });

    DParam a("a", random_tensor(Shape{2, 2, 3, 3}, rng));
    DParam b("b", random_tensor(Shape{2, 3, 3, 3}, rng));
    auto wc = random_tensor(Shape{2, 5, 3, 3}, rng);
    check_grads({&a, &b}, [&] {
        return ops::sum(ops::mul(ops::concat_channels<double>({a.value, b.value}), wc));
    });
}

TEST_CASE("gradients: conv2d") {
    Rng rng(24);
    struct Case {
        int ci, co, h, w, k, stride, pad;
    };
    for (const Case cs : {Case{3, 4, 5, 5, 1, 1, 0}, Case{2, 3, 6, 5, 3, 1, 1},
                          Case{1, 4, 8, 8, 4, 4, 0}, Case{2, 2, 7, 7, 3, 2, 1}}) {
        DParam x("x", random_tensor(Shape{2, cs.ci, cs.h, cs.w}, rng));
        DParam w("w", random_tensor(Shape{cs.co, cs.ci, cs.k, cs.k}, rng));
        DParam b("b", random_tensor(Shape{cs.co}, rng));
        int oh = (cs.h + 2 * cs.pad - cs.k) / cs.stride + 1;
        int ow = (cs.w + 2 * cs.pad - cs.k) / cs.stride + 1;
        auto wsum = random_tensor(Shape{2, cs.co, oh, ow}, rng);
        check_grads({&x, &w, &b}, [&] {
            return ops::sum(ops::mul(ops::conv2d(x.value, w.value, b.value, cs.stride, cs.pad), wsum));
        });
    }
}

TEST_CASE("gradients: batch_norm (train and eval)") {
    Rng rng(25);
    DParam x("x", random_tensor(Shape{3, 4, 2, 2}, rng, 0.0, 2.0));
    DParam g("g", random_tensor(Shape{4}, rng, 0.5, 1.5));
    DParam b("b", random_tensor(Shape{4}, rng));
    auto wsum = random_tensor(Shape{3, 4, 2, 2}, rng);

    // training mode: stats updates are side effects, so hold them fixed per eval
    check_grads({&x, &g, &b}, [&] {
        ops::BatchNormStats<double> st{std::vector<double>(4, 0.0), std::vector<double>(4, 1.0)};
        return ops::sum(
            ops::mul(ops::batch_norm(x.value, g.value, b.value, &st, true), wsum));
    });

    ops::BatchNormStats<double> fixed{{0.1, -0.2, 0.3, 0.0}, {1.1, 0.9, 1.3, 0.7}};
    check_grads({&x, &g, &b}, [&] {
        auto st = fixed;
        return ops::sum(ops::mul(ops::batch_norm(x.value, g.value, b.value, &st, false), wsum));
    });
}

TEST_CASE("gradients: bicubic resize") {
    Rng rng(26);
    DParam x("x", random_tensor(Shape{1, 2, 4, 4}, rng));
    auto wup = random_tensor(Shape{1, 2, 8, 8}, rng);
    check_grads({&x}, [&] { return ops::sum(ops::mul(ops::bicubic_resize(x.value, 2.0), wup)); });

    DParam y("y", random_tensor(Shape{1, 1, 8, 8}, rng));
    auto wdn = random_tensor(Shape{1, 1, 2, 2}, rng);
    check_grads({&y}, [&] { return ops::sum(ops::mul(ops::bicubic_resize(y.value, 0.25), wdn)); });

    DParam z("z", random_tensor(Shape{1, 1, 4, 6}, rng));
    auto wmid = random_tensor(Shape{1, 1, 6, 9}, rng);
    check_grads({&z}, [&] { return ops::sum(ops::mul(ops::bicubic_resize(z.value, 1.5), wmid)); });
}

TEST_CASE("gradients: losses") {
    Rng rng(27);
    // spectra bounded away from zero and from parallel: acos stays smooth
    DParam p("p", random_tensor(Shape{2, 3, 2, 2}, rng, 0.3, 1.0));
    DParam r("r", random_tensor(Shape{2, 3, 2, 2}, rng, 0.3, 1.0));
    check_grads({&p, &r}, [&] { return ops::mse_loss(p.value, r.value); });
    check_grads({&p, &r}, [&] { return ops::sam_loss(p.value, r.value); }, 1e-5, 5e-5);
    check_grads({&p, &r}, [&] { return ops::combined_loss(p.value, r.value, 0.25); }, 1e-5, 5e-5);
}

TEST_CASE("forward determinism across repeated runs") {
    auto run = [] {
        Rng rng(31);
        TensorT<float> x = TensorT<float>::zeros(Shape{1, 3, 8, 8});
        for (auto& v : *x.data) v = static_cast<float>(rng.uniform(-1, 1));
        TensorT<float> w = TensorT<float>::zeros(Shape{4, 3, 3, 3});
        for (auto& v : *w.data) v = static_cast<float>(rng.uniform(-1, 1));
        TensorT<float> b = TensorT<float>::zeros(Shape{4});
        auto y = ops::conv2d(x, w, b, 1, 1);
        auto z = ops::sigmoid(ops::leaky_relu(y, 0.2f));
        return ops::sum(z).item();
    };
    float a = run(), b = run();
    CHECK(std::memcmp(&a, &b, sizeof(float)) == 0);
}
