#include <doctest.h>

#include <cmath>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/rng.hpp"

using namespace dffw;

namespace {

// Reference implementations that expand the factored tensor
//   W(i,j,k,o) = sum_f w_v(i,f) w_h(j,f) w_hist(k,f) w_l(o,f)
// and contract it with plain nested loops. Deliberately O(n^4 * n_f); only
// run on tiny models.

double bank_tensor_term(const FactorBank<double>& bank, const ModelParams<double>& p,
                        const LayerState<double>& s) {
    double acc = 0.0;
    for (Index i = 0; i < p.dims.n_v; ++i)
        for (Index j = 0; j < p.dims.n_h; ++j)
            for (Index k = 0; k < p.dims.n_vlt; ++k)
                for (Index o = 0; o < p.dims.n_l; ++o) {
                    double w = 0.0;
                    for (Index f = 0; f < bank.factors(); ++f)
                        w += bank.w_v(i, f) * bank.w_h(j, f) * bank.w_hist(k, f) * bank.w_l(o, f);
                    acc += w * (s.v[i] / p.sigma[i]) * s.h[j] * (s.hist[k] / p.sigma_hist[k]) * s.l[o];
                }
    return acc;
}

double energy_oracle(const ModelParams<double>& p, const LayerState<double>& s) {
    double e = 0.0;
    for (Index i = 0; i < p.dims.n_v; ++i) {
        const double d = (s.v[i] - p.a[i]) / p.sigma[i];
        e += 0.5 * d * d;
    }
    for (Index j = 0; j < p.dims.n_h; ++j) e -= p.b[j] * s.h[j];
    for (Index o = 0; o < p.dims.n_l; ++o) e -= p.c[o] * s.l[o];
    e -= bank_tensor_term(p.bank1, p, s);
    if (!p.single_bank()) e -= bank_tensor_term(p.bank2, p, s);
    return e;
}

VectorX<double> hidden_input_oracle(const ModelParams<double>& p, const LayerState<double>& s) {
    VectorX<double> out = VectorX<double>::Zero(p.dims.n_h);
    auto add = [&](const FactorBank<double>& bank) {
        for (Index j = 0; j < p.dims.n_h; ++j)
            for (Index i = 0; i < p.dims.n_v; ++i)
                for (Index k = 0; k < p.dims.n_vlt; ++k)
                    for (Index o = 0; o < p.dims.n_l; ++o) {
                        double w = 0.0;
                        for (Index f = 0; f < bank.factors(); ++f)
                            w += bank.w_v(i, f) * bank.w_h(j, f) * bank.w_hist(k, f) * bank.w_l(o, f);
                        out[j] += w * (s.v[i] / p.sigma[i]) * (s.hist[k] / p.sigma_hist[k]) * s.l[o];
                    }
    };
    add(p.bank1);
    if (!p.single_bank()) add(p.bank2);
    return out;
}

VectorX<double> visible_input_oracle(const ModelParams<double>& p, const LayerState<double>& s) {
    VectorX<double> out = VectorX<double>::Zero(p.dims.n_v);
    const FactorBank<double>& bank = p.bank1;
    for (Index i = 0; i < p.dims.n_v; ++i)
        for (Index j = 0; j < p.dims.n_h; ++j)
            for (Index k = 0; k < p.dims.n_vlt; ++k)
                for (Index o = 0; o < p.dims.n_l; ++o) {
                    double w = 0.0;
                    for (Index f = 0; f < bank.factors(); ++f)
                        w += bank.w_v(i, f) * bank.w_h(j, f) * bank.w_hist(k, f) * bank.w_l(o, f);
                    out[i] += w * s.h[j] * (s.hist[k] / p.sigma_hist[k]) * s.l[o];
                }
    return out;
}

VectorX<double> label_input_oracle(const ModelParams<double>& p, const LayerState<double>& s) {
    VectorX<double> out = VectorX<double>::Zero(p.dims.n_l);
    if (p.single_bank()) return out;
    const FactorBank<double>& bank = p.bank2;
    for (Index o = 0; o < p.dims.n_l; ++o)
        for (Index i = 0; i < p.dims.n_v; ++i)
            for (Index j = 0; j < p.dims.n_h; ++j)
                for (Index k = 0; k < p.dims.n_vlt; ++k) {
                    double w = 0.0;
                    for (Index f = 0; f < bank.factors(); ++f)
                        w += bank.w_v(i, f) * bank.w_h(j, f) * bank.w_hist(k, f) * bank.w_l(o, f);
                    out[o] += w * (s.v[i] / p.sigma[i]) * s.h[j] * (s.hist[k] / p.sigma_hist[k]);
                }
    return out;
}

LayerDims random_dims(Rng& rng, bool allow_single_bank) {
    LayerDims d;
    d.n_v = 1 + static_cast<Index>(rng.below(3));
    d.n_h = 1 + static_cast<Index>(rng.below(3));
    d.n_vlt = 1 + static_cast<Index>(rng.below(3));
    d.n_l = 1 + static_cast<Index>(rng.below(3));
    d.n_f1 = 1 + static_cast<Index>(rng.below(3));
    d.n_f2 = static_cast<Index>(rng.below(4));
    if (!allow_single_bank && d.n_f2 == 0) d.n_f2 = 1;
    return d;
}

ModelParams<double> random_params(const LayerDims& dims, Rng& rng) {
    ModelParams<double> p = init_params<double>(dims, rng.next_u64(), 0.7);
    for (Index i = 0; i < dims.n_v; ++i) p.a[i] = rng.normal();
    for (Index j = 0; j < dims.n_h; ++j) p.b[j] = rng.normal();
    for (Index o = 0; o < dims.n_l; ++o) p.c[o] = rng.normal();
    for (Index i = 0; i < dims.n_v; ++i) p.sigma[i] = rng.uniform(0.5, 2.0);
    for (Index k = 0; k < dims.n_vlt; ++k) p.sigma_hist[k] = rng.uniform(0.5, 2.0);
    return p;
}

LayerState<double> random_state(const LayerDims& dims, Rng& rng) {
    LayerState<double> s;
    s.v = VectorX<double>::NullaryExpr(dims.n_v, [&](Index) { return rng.normal(); });
    s.hist = VectorX<double>::NullaryExpr(dims.n_vlt, [&](Index) { return rng.normal(); });
    s.h = VectorX<double>::NullaryExpr(dims.n_h, [&](Index) { return rng.uniform01(); });
    s.l = VectorX<double>::NullaryExpr(dims.n_l, [&](Index) { return rng.uniform01(); });
    return s;
}

bool close_rel(double got, double want, double tol) {
    return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

}  // namespace

TEST_SUITE_BEGIN("core");

TEST_CASE("energy of the all-ones toy model is known in closed form") {
    LayerDims d{1, 1, 1, 1, 1, 1};
    ModelParams<double> p = init_params<double>(d, 0, 0.1);
    p.bank1.w_v.setOnes();
    p.bank1.w_h.setOnes();
    p.bank1.w_hist.setOnes();
    p.bank1.w_l.setOnes();
    p.bank2 = p.bank1;
    LayerState<double> s;
    s.v = VectorX<double>::Ones(1);
    s.h = VectorX<double>::Ones(1);
    s.l = VectorX<double>::Ones(1);
    s.hist = VectorX<double>::Ones(1);

    // 0.5 quadratic, minus one interaction unit per bank
    CHECK(energy(p, s) == doctest::Approx(-1.5).epsilon(1e-15));

    ModelParams<double> q = p;
    q.dims.n_f2 = 0;
    q.bank2 = FactorBank<double>::zero(q.dims, 0);
    CHECK(energy(q, s) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("energy matches the expanded tensor oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 400; ++trial) {
        LayerDims d = random_dims(rng, true);
        ModelParams<double> p = random_params(d, rng);
        LayerState<double> s = random_state(d, rng);
        const double got = energy(p, s);
        const double want = energy_oracle(p, s);
        REQUIRE(close_rel(got, want, 1e-12));
    }
}

TEST_CASE("layer inputs match the expanded tensor oracles") {
    Rng rng(2025);
    for (int trial = 0; trial < 400; ++trial) {
        LayerDims d = random_dims(rng, true);
        ModelParams<double> p = random_params(d, rng);
        LayerState<double> s = random_state(d, rng);

        const VectorX<double> sh = hidden_input(p, s);
        const VectorX<double> sh_want = hidden_input_oracle(p, s);
        const VectorX<double> sv = visible_input(p, s);
        const VectorX<double> sv_want = visible_input_oracle(p, s);
        const VectorX<double> sl = label_input(p, s);
        const VectorX<double> sl_want = label_input_oracle(p, s);

        for (Index j = 0; j < d.n_h; ++j) REQUIRE(close_rel(sh[j], sh_want[j], 1e-12));
        for (Index i = 0; i < d.n_v; ++i) REQUIRE(close_rel(sv[i], sv_want[i], 1e-12));
        for (Index o = 0; o < d.n_l; ++o) REQUIRE(close_rel(sl[o], sl_want[o], 1e-12));
    }
}

TEST_CASE("hidden input is the negative energy gradient in h") {
    Rng rng(99);
    const double eps = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        LayerDims d = random_dims(rng, true);
        ModelParams<double> p = random_params(d, rng);
        LayerState<double> s = random_state(d, rng);
        const VectorX<double> sh = hidden_input(p, s);
        for (Index j = 0; j < d.n_h; ++j) {
            LayerState<double> plus = s, minus = s;
            plus.h[j] += eps;
            minus.h[j] -= eps;
            const double fd = (energy(p, plus) - energy(p, minus)) / (2 * eps);
            REQUIRE(std::abs(-fd - (p.b[j] + sh[j])) < 1e-6);
        }
    }
}

TEST_CASE("bank-restricted inputs are the per-bank energy gradients in v and l") {
    Rng rng(100);
    const double eps = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        LayerDims d = random_dims(rng, false);
        ModelParams<double> p = random_params(d, rng);
        LayerState<double> s = random_state(d, rng);

        // The reconstruction kernels read one bank each, so the full energy
        // gradient decomposes into the kernel value plus the other bank's
        // contribution, computed here via the skip projection.
        const VectorX<double> sv = visible_input(p, s);
        const VectorX<double> sv2 = p.bank2.w_v * factor_projection(p.bank2, s, p.sigma, p.sigma_hist, LayerTag::visible);
        for (Index i = 0; i < d.n_v; ++i) {
            LayerState<double> plus = s, minus = s;
            plus.v[i] += eps;
            minus.v[i] -= eps;
            const double fd = (energy(p, plus) - energy(p, minus)) / (2 * eps);
            const double want = (s.v[i] - p.a[i]) / (p.sigma[i] * p.sigma[i]) - (sv[i] + sv2[i]) / p.sigma[i];
            REQUIRE(std::abs(fd - want) < 1e-6);
        }

        const VectorX<double> sl = label_input(p, s);
        const VectorX<double> sl1 = p.bank1.w_l * factor_projection(p.bank1, s, p.sigma, p.sigma_hist, LayerTag::label);
        for (Index o = 0; o < d.n_l; ++o) {
            LayerState<double> plus = s, minus = s;
            plus.l[o] += eps;
            minus.l[o] -= eps;
            const double fd = (energy(p, plus) - energy(p, minus)) / (2 * eps);
            REQUIRE(std::abs(-fd - (p.c[o] + sl[o] + sl1[o])) < 1e-6);
        }
    }
}

TEST_CASE("a single-bank model equals a two-bank model with a silent second bank") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        LayerDims d = random_dims(rng, false);
        ModelParams<double> two = random_params(d, rng);
        two.bank2.set_zero();

        ModelParams<double> one = two;
        one.dims.n_f2 = 0;
        one.bank2 = FactorBank<double>::zero(one.dims, 0);

        LayerState<double> s = random_state(d, rng);
        CHECK(energy(two, s) == energy(one, s));
        CHECK(hidden_input(two, s) == hidden_input(one, s));
        CHECK(visible_input(two, s) == visible_input(one, s));
        CHECK(label_input(two, s) == label_input(one, s));
        CHECK((label_input(two, s).array() == 0.0).all());
    }
}

TEST_CASE("permuting factors inside a bank changes nothing observable") {
    Rng rng(13);
    LayerDims d{3, 2, 3, 2, 4, 3};
    ModelParams<double> p = random_params(d, rng);
    LayerState<double> s = random_state(d, rng);

    std::vector<int> perm{2, 0, 3, 1};
    ModelParams<double> q = p;
    for (int fnew = 0; fnew < 4; ++fnew) {
        q.bank1.w_v.col(fnew) = p.bank1.w_v.col(perm[static_cast<size_t>(fnew)]);
        q.bank1.w_h.col(fnew) = p.bank1.w_h.col(perm[static_cast<size_t>(fnew)]);
        q.bank1.w_hist.col(fnew) = p.bank1.w_hist.col(perm[static_cast<size_t>(fnew)]);
        q.bank1.w_l.col(fnew) = p.bank1.w_l.col(perm[static_cast<size_t>(fnew)]);
    }

    CHECK(energy(q, s) == doctest::Approx(energy(p, s)).epsilon(1e-14));
    CHECK((hidden_input(q, s) - hidden_input(p, s)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((visible_input(q, s) - visible_input(p, s)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((label_input(q, s) - label_input(p, s)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("unit probabilities stay finite inside [0,1] even when saturated") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        LayerDims d = random_dims(rng, true);
        ModelParams<double> p = random_params(d, rng);
        LayerState<double> s = random_state(d, rng);
        s.v *= 50.0;
        s.hist *= 50.0;
        const VectorX<double> ph = hidden_probs(p, s);
        const VectorX<double> pl = label_probs(p, s);
        REQUIRE((ph.array() >= 0.0).all());
        REQUIRE((ph.array() <= 1.0).all());
        REQUIRE((pl.array() >= 0.0).all());
        REQUIRE((pl.array() <= 1.0).all());
        REQUIRE(ph.allFinite());
        REQUIRE(pl.allFinite());
    }
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("initialization: zero biases, unit stds, weight spread as requested") {
    LayerDims d{20, 20, 20, 20, 30, 30};
    ModelParams<double> p = init_params<double>(d, 4242, 0.3);
    CHECK((p.a.array() == 0.0).all());
    CHECK((p.b.array() == 0.0).all());
    CHECK((p.c.array() == 0.0).all());
    CHECK((p.sigma.array() == 1.0).all());
    CHECK((p.sigma_hist.array() == 1.0).all());

    double s1 = 0.0, s2 = 0.0;
    long n = 0;
    auto tally = [&](const MatrixX<double>& m) {
        s1 += m.sum();
        s2 += m.array().square().sum();
        n += m.size();
    };
    for (const FactorBank<double>* bank : {&p.bank1, &p.bank2}) {
        tally(bank->w_v);
        tally(bank->w_h);
        tally(bank->w_hist);
        tally(bank->w_l);
    }
    const double mean = s1 / double(n);
    const double var = s2 / double(n) - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(0.09).epsilon(0.06));
}

TEST_CASE("initialization: bank 1 is seed stable regardless of the second bank") {
    LayerDims two{5, 4, 10, 4, 6, 6};
    LayerDims one = two;
    one.n_f2 = 0;
    ModelParams<double> p2 = init_params<double>(two, 31337, 0.3);
    ModelParams<double> p1 = init_params<double>(one, 31337, 0.3);
    CHECK(p1.bank1.w_v == p2.bank1.w_v);
    CHECK(p1.bank1.w_h == p2.bank1.w_h);
    CHECK(p1.bank1.w_hist == p2.bank1.w_hist);
    CHECK(p1.bank1.w_l == p2.bank1.w_l);
}

TEST_CASE("sampling is reproducible and respects its distribution") {
    LayerDims d{3, 4, 5, 2, 3, 3};
    Rng prng(1);
    ModelParams<double> p = random_params(d, prng);
    LayerState<double> s = random_state(d, prng);

    Rng r1(88), r2(88);
    CHECK(sample_hidden(p, s, r1) == sample_hidden(p, s, r2));
    CHECK(sample_label(p, s, r1) == sample_label(p, s, r2));
    CHECK(sample_visible(p, s, r1) == sample_visible(p, s, r2));

    VectorX<double> probs(4);
    probs << 0.0, 1.0, 0.25, 0.75;
    Rng r3(5);
    VectorX<double> acc = VectorX<double>::Zero(4);
    const int n = 20000;
    for (int i = 0; i < n; ++i) acc += sample_bernoulli(probs, r3);
    acc /= double(n);
    CHECK(acc[0] == 0.0);
    CHECK(acc[1] == 1.0);
    CHECK(std::abs(acc[2] - 0.25) < 0.02);
    CHECK(std::abs(acc[3] - 0.75) < 0.02);
}

TEST_CASE("dimension mismatches are rejected") {
    LayerDims d{2, 2, 2, 2, 2, 2};
    ModelParams<double> p = init_params<double>(d, 1, 0.3);
    LayerState<double> s;
    s.v = VectorX<double>::Zero(3);
    s.h = VectorX<double>::Zero(2);
    s.l = VectorX<double>::Zero(2);
    s.hist = VectorX<double>::Zero(2);
    CHECK_THROWS_AS((void)energy(p, s), std::invalid_argument);
    CHECK_THROWS_AS((void)hidden_input(p, s), std::invalid_argument);
    LayerDims bad{0, 1, 1, 1, 1, 1};
    CHECK_THROWS_AS((void)init_params<double>(bad, 1, 0.3), std::invalid_argument);
    CHECK_THROWS_AS((void)init_params<double>(d, 1, 0.0), std::invalid_argument);
}

TEST_SUITE_END();
