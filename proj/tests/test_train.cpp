#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/rng.hpp"
#include "dffw/train.hpp"

using namespace dffw;

namespace {

LayerDims tiny_dims(Rng& rng) {
    LayerDims d;
    d.n_v = 1 + static_cast<Index>(rng.below(3));
    d.n_h = 1 + static_cast<Index>(rng.below(3));
    d.n_vlt = 1 + static_cast<Index>(rng.below(3));
    d.n_l = 1 + static_cast<Index>(rng.below(3));
    d.n_f1 = 1 + static_cast<Index>(rng.below(3));
    d.n_f2 = 1 + static_cast<Index>(rng.below(3));
    return d;
}

ModelParams<double> tiny_params(const LayerDims& dims, Rng& rng) {
    ModelParams<double> p = init_params<double>(dims, rng.next_u64(), 0.7);
    for (Index i = 0; i < dims.n_v; ++i) p.a[i] = rng.normal();
    for (Index j = 0; j < dims.n_h; ++j) p.b[j] = rng.normal();
    for (Index o = 0; o < dims.n_l; ++o) p.c[o] = rng.normal();
    for (Index i = 0; i < dims.n_v; ++i) p.sigma[i] = rng.uniform(0.5, 2.0);
    for (Index k = 0; k < dims.n_vlt; ++k) p.sigma_hist[k] = rng.uniform(0.5, 2.0);
    return p;
}

LayerState<double> tiny_state(const LayerDims& dims, Rng& rng) {
    LayerState<double> s;
    s.v = VectorX<double>::NullaryExpr(dims.n_v, [&](Index) { return rng.normal(); });
    s.hist = VectorX<double>::NullaryExpr(dims.n_vlt, [&](Index) { return rng.normal(); });
    s.h = VectorX<double>::NullaryExpr(dims.n_h, [&](Index) { return rng.uniform01(); });
    s.l = VectorX<double>::NullaryExpr(dims.n_l, [&](Index) { return rng.uniform01(); });
    return s;
}

ModelParams<double> zero_params(const LayerDims& dims) {
    ModelParams<double> p = init_params<double>(dims, 0, 0.1);
    p.bank1.set_zero();
    p.bank2.set_zero();
    return p;
}

Sample<double> random_sample(const LayerDims& dims, Rng& rng) {
    Sample<double> s;
    s.present = VectorX<double>::NullaryExpr(dims.n_v, [&](Index) { return rng.normal(); });
    s.history = VectorX<double>::NullaryExpr(dims.n_vlt, [&](Index) { return rng.normal(); });
    s.label = VectorX<double>::Zero(dims.n_l);
    s.label[static_cast<Index>(rng.below(static_cast<std::uint64_t>(dims.n_l)))] = 1.0;
    return s;
}

// Central finite difference of the energy in one parameter entry, on a copy.
template <typename Access>
double energy_fd(const ModelParams<double>& p, const LayerState<double>& s, Access entry) {
    const double eps = 1e-5;
    ModelParams<double> q = p;
    entry(q) += eps;
    const double e_plus = energy(q, s);
    entry(q) -= 2 * eps;
    const double e_minus = energy(q, s);
    return (e_plus - e_minus) / (2 * eps);
}

bool all_equal(const MatrixX<double>& x, const MatrixX<double>& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
}

bool all_equal(const VectorX<double>& x, const VectorX<double>& y) {
    return x.size() == y.size() && (x.array() == y.array()).all();
}

bool params_equal(const ModelParams<double>& x, const ModelParams<double>& y) {
    return all_equal(x.bank1.w_v, y.bank1.w_v) && all_equal(x.bank1.w_h, y.bank1.w_h) &&
           all_equal(x.bank1.w_hist, y.bank1.w_hist) && all_equal(x.bank1.w_l, y.bank1.w_l) &&
           all_equal(x.bank2.w_v, y.bank2.w_v) && all_equal(x.bank2.w_h, y.bank2.w_h) &&
           all_equal(x.bank2.w_hist, y.bank2.w_hist) && all_equal(x.bank2.w_l, y.bank2.w_l) &&
           all_equal(x.a, y.a) && all_equal(x.b, y.b) && all_equal(x.c, y.c);
}

// A smooth, strongly predictable synthetic set: the present continues a
// sinusoid whose recent past fills the history window.
std::vector<Sample<double>> sinusoid_set(const LayerDims& dims, int count, Rng& rng) {
    std::vector<Sample<double>> set;
    set.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double phase = rng.uniform(0.0, 2 * 3.14159265358979);
        const double step = 0.25;
        Sample<double> s;
        s.history.resize(dims.n_vlt);
        for (Index k = 0; k < dims.n_vlt; ++k)
            s.history[k] = std::sin(phase - step * static_cast<double>(dims.n_vlt - k));
        s.present.resize(dims.n_v);
        for (Index i2 = 0; i2 < dims.n_v; ++i2) s.present[i2] = std::sin(phase + step * static_cast<double>(i2));
        s.label = VectorX<double>::Zero(dims.n_l);
        s.label[i % dims.n_l] = 1.0;
        set.push_back(std::move(s));
    }
    return set;
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("every statistic is the negative energy gradient at the clamped state") {
    Rng rng(4101);
    for (int trial = 0; trial < 120; ++trial) {
        const LayerDims d = tiny_dims(rng);
        const ModelParams<double> p = tiny_params(d, rng);
        const LayerState<double> s = tiny_state(d, rng);
        const GradientSet<double> g = statistics(p, s);

        auto check_matrix = [&](const MatrixX<double>& stat, auto pick) {
            for (Index r = 0; r < stat.rows(); ++r)
                for (Index f = 0; f < stat.cols(); ++f) {
                    const double fd = energy_fd(p, s, [&](ModelParams<double>& q) -> double& { return pick(q)(r, f); });
                    REQUIRE(std::abs(stat(r, f) + fd) < 1e-6);
                }
        };
        check_matrix(g.bank1.w_v, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank1.w_v; });
        check_matrix(g.bank1.w_h, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank1.w_h; });
        check_matrix(g.bank1.w_hist, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank1.w_hist; });
        check_matrix(g.bank1.w_l, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank1.w_l; });
        check_matrix(g.bank2.w_v, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank2.w_v; });
        check_matrix(g.bank2.w_h, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank2.w_h; });
        check_matrix(g.bank2.w_hist, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank2.w_hist; });
        check_matrix(g.bank2.w_l, [](ModelParams<double>& q) -> MatrixX<double>& { return q.bank2.w_l; });

        auto check_vector = [&](const VectorX<double>& stat, auto pick) {
            for (Index i = 0; i < stat.size(); ++i) {
                const double fd = energy_fd(p, s, [&](ModelParams<double>& q) -> double& { return pick(q)[i]; });
                REQUIRE(std::abs(stat[i] + fd) < 1e-6);
            }
        };
        check_vector(g.a, [](ModelParams<double>& q) -> VectorX<double>& { return q.a; });
        check_vector(g.b, [](ModelParams<double>& q) -> VectorX<double>& { return q.b; });
        check_vector(g.c, [](ModelParams<double>& q) -> VectorX<double>& { return q.c; });
    }
}

TEST_CASE("an all-zero layer activity silences every factor statistic") {
    Rng rng(4102);
    const LayerDims d = tiny_dims(rng);
    const ModelParams<double> p = tiny_params(d, rng);

    LayerState<double> s = tiny_state(d, rng);
    s.h.setZero();
    GradientSet<double> g = statistics(p, s);
    for (const FactorBank<double>* bank : {&g.bank1, &g.bank2}) {
        CHECK(bank->w_v.cwiseAbs().maxCoeff() == 0.0);
        CHECK(bank->w_h.cwiseAbs().maxCoeff() == 0.0);
        CHECK(bank->w_hist.cwiseAbs().maxCoeff() == 0.0);
        CHECK(bank->w_l.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(g.b.cwiseAbs().maxCoeff() == 0.0);

    s = tiny_state(d, rng);
    s.l.setZero();
    g = statistics(p, s);
    for (const FactorBank<double>* bank : {&g.bank1, &g.bank2}) {
        CHECK(bank->w_v.cwiseAbs().maxCoeff() == 0.0);
        CHECK(bank->w_l.cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(g.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the all-ones toy model has unit statistics everywhere") {
    const LayerDims d{1, 1, 1, 1, 1, 1};
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

    const GradientSet<double> g = statistics(p, s);
    for (const FactorBank<double>* bank : {&g.bank1, &g.bank2}) {
        CHECK(bank->w_v(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(bank->w_h(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(bank->w_hist(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(bank->w_l(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(g.a[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.b[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.c[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("update with momentum and decay off moves by alpha times the gradient") {
    const LayerDims d{1, 1, 1, 1, 1, 1};
    ModelParams<double> p = zero_params(d);
    VelocitySet<double> vel = GradientSet<double>::zero(d);
    GradientSet<double> pos = GradientSet<double>::zero(d);
    GradientSet<double> neg = GradientSet<double>::zero(d);
    pos.bank1.w_v(0, 0) = 1.0;

    TrainConfig cfg;
    cfg.alpha = 0.1;
    cfg.rho = 0.0;
    cfg.gamma = 0.0;
    apply_update(p, vel, pos, neg, cfg);
    CHECK(p.bank1.w_v(0, 0) == 0.1);
    CHECK(p.bank1.w_h(0, 0) == 0.0);
}

TEST_CASE("momentum compounds a repeated gradient by one plus rho") {
    const LayerDims d{1, 1, 1, 1, 1, 1};
    ModelParams<double> p = zero_params(d);
    VelocitySet<double> vel = GradientSet<double>::zero(d);
    GradientSet<double> pos = GradientSet<double>::zero(d);
    const GradientSet<double> neg = GradientSet<double>::zero(d);
    pos.bank1.w_hist(0, 0) = 1.0;

    TrainConfig cfg;
    cfg.alpha = 1e-3;
    cfg.rho = 0.5;
    cfg.gamma = 0.0;
    apply_update(p, vel, pos, neg, cfg);
    const double first = p.bank1.w_hist(0, 0);
    apply_update(p, vel, pos, neg, cfg);
    const double second = p.bank1.w_hist(0, 0) - first;
    CHECK(first == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(second == doctest::Approx(1.5e-3).epsilon(1e-12));
}

TEST_CASE("three-step update sequence matches the scalar recursion") {
    const LayerDims d{1, 1, 1, 1, 1, 0};
    ModelParams<double> p = zero_params(d);
    p.bank1.w_v(0, 0) = 0.4;
    VelocitySet<double> vel = GradientSet<double>::zero(d);

    TrainConfig cfg;
    cfg.alpha = 0.003;
    cfg.rho = 0.3;
    cfg.gamma = 0.01;

    const double deltas[3] = {0.9, -0.2, 0.5};
    double theta = 0.4, v = 0.0;
    for (double delta : deltas) {
        GradientSet<double> pos = GradientSet<double>::zero(d);
        const GradientSet<double> neg = GradientSet<double>::zero(d);
        pos.bank1.w_v(0, 0) = delta;
        apply_update(p, vel, pos, neg, cfg);

        v = cfg.rho * v + cfg.alpha * (delta - cfg.gamma * theta);
        theta += v;
        CHECK(std::abs(p.bank1.w_v(0, 0) - theta) < 1e-12);
        CHECK(std::abs(vel.bank1.w_v(0, 0) - v) < 1e-12);
    }
}

TEST_CASE("weight decay leaves the biases alone") {
    const LayerDims d{2, 2, 2, 2, 1, 1};
    ModelParams<double> p = zero_params(d);
    p.a.setConstant(1.0);
    p.b.setConstant(1.0);
    p.c.setConstant(1.0);
    p.bank1.w_v.setConstant(0.5);
    VelocitySet<double> vel = GradientSet<double>::zero(d);
    const GradientSet<double> zero = GradientSet<double>::zero(d);

    TrainConfig cfg;
    cfg.alpha = 0.01;
    cfg.rho = 0.0;
    cfg.gamma = 0.5;
    apply_update(p, vel, zero, zero, cfg);
    CHECK(p.bank1.w_v(0, 0) == doctest::Approx(0.5 * (1.0 - 0.01 * 0.5)).epsilon(1e-15));
    CHECK(p.a[0] == 1.0);
    CHECK(p.b[0] == 1.0);
    CHECK(p.c[0] == 1.0);
}

TEST_CASE("weight columns are rescaled onto the norm bound when an update overshoots") {
    const LayerDims d{4, 2, 2, 2, 2, 1};
    ModelParams<double> p = zero_params(d);
    VelocitySet<double> vel = GradientSet<double>::zero(d);
    GradientSet<double> pos = GradientSet<double>::zero(d);
    GradientSet<double> neg = GradientSet<double>::zero(d);

    p.bank1.w_v.col(0) << 2.0, 0.0, 0.0, 0.0;
    p.bank1.w_v.col(1) << 0.1, 0.1, 0.0, 0.0;
    p.bank2.w_v.col(0) << 1.0, 0.0, 0.0, 0.0;

    TrainConfig cfg;
    cfg.alpha = 0.1;
    cfg.rho = 0.0;
    cfg.gamma = 0.0;
    apply_update(p, vel, pos, neg, cfg);

    const double read_cap = kReadoutNormScale * std::sqrt(static_cast<double>(d.n_v));
    const double feat_cap = kFeatureNormScale * std::sqrt(static_cast<double>(d.n_v));
    CHECK(p.bank1.w_v.col(0).norm() == doctest::Approx(read_cap).epsilon(1e-12));
    CHECK(p.bank1.w_v(1, 0) == 0.0);
    CHECK(p.bank1.w_v(0, 1) == 0.1);
    CHECK(p.bank1.w_v(1, 1) == 0.1);
    CHECK(p.bank2.w_v.col(0).norm() == doctest::Approx(feat_cap).epsilon(1e-12));
}

TEST_CASE("a present chain with zero weights reconstructs the visible biases") {
    Rng rng(4103);
    const LayerDims d{3, 2, 4, 2, 2, 2};
    ModelParams<double> p = zero_params(d);
    for (Index i = 0; i < d.n_v; ++i) p.a[i] = rng.normal();
    const VectorX<double> a0 = p.a;
    const Sample<double> s = random_sample(d, rng);

    VelocitySet<double> vel = GradientSet<double>::zero(d);
    TrainConfig cfg;
    cfg.cd_steps = 1;
    Rng chain_rng(99);
    const ChainResult<double> r = run_chain_present(p, vel, s, cfg, chain_rng);
    CHECK(all_equal(r.final_v, a0));
}

TEST_CASE("a label chain with zero weights reconstructs sigmoid of the label biases") {
    Rng rng(4104);
    const LayerDims d{3, 2, 4, 3, 2, 2};
    ModelParams<double> p = zero_params(d);
    for (Index o = 0; o < d.n_l; ++o) p.c[o] = rng.normal();
    const VectorX<double> expected = p.c.unaryExpr([](double t) { return sigmoid(t); });
    const Sample<double> s = random_sample(d, rng);

    VelocitySet<double> vel = GradientSet<double>::zero(d);
    TrainConfig cfg;
    cfg.cd_steps = 1;
    Rng chain_rng(99);
    const ChainResult<double> r = run_chain_label(p, vel, s, cfg, chain_rng);
    CHECK(all_equal(r.final_l, expected));
}

TEST_CASE("a fixed seed reproduces chain statistics, state, and parameters") {
    Rng rng(4105);
    const LayerDims d = tiny_dims(rng);
    const ModelParams<double> p0 = tiny_params(d, rng);
    const Sample<double> s = random_sample(d, rng);
    TrainConfig cfg;
    cfg.cd_steps = 3;

    auto run = [&](ModelParams<double>& p) {
        VelocitySet<double> vel = GradientSet<double>::zero(d);
        Rng chain_rng(12345);
        return run_chain_present(p, vel, s, cfg, chain_rng);
    };
    ModelParams<double> pa = p0, pb = p0;
    const ChainResult<double> ra = run(pa);
    const ChainResult<double> rb = run(pb);
    CHECK(all_equal(ra.final_v, rb.final_v));
    CHECK(all_equal(ra.pos.bank1.w_v, rb.pos.bank1.w_v));
    CHECK(all_equal(ra.neg.bank2.w_l, rb.neg.bank2.w_l));
    CHECK(params_equal(pa, pb));
}

TEST_CASE("a one-unit present chain matches a hand-stepped transcript") {
    const LayerDims d{1, 1, 1, 1, 1, 0};
    ModelParams<double> p = zero_params(d);
    p.bank1.w_v(0, 0) = 0.6;
    p.bank1.w_h(0, 0) = -0.25;
    p.bank1.w_hist(0, 0) = 0.2;
    p.bank1.w_l(0, 0) = 0.28;
    p.a[0] = 0.1;
    p.b[0] = -0.2;
    p.c[0] = 0.05;

    Sample<double> s;
    s.present = VectorX<double>::Constant(1, 0.9);
    s.history = VectorX<double>::Constant(1, -0.7);
    s.label = VectorX<double>::Constant(1, 1.0);

    TrainConfig cfg;
    cfg.alpha = 0.01;
    cfg.rho = 0.5;
    cfg.gamma = 0.002;
    cfg.cd_steps = 1;

    // Hand transcript. Factor sums with one unit per layer collapse to plain
    // products. The present starts at zero, so the first hidden probability
    // sees no visible contribution. Seed weights sit inside the norm bounds
    // so the transcript needs no rescale step.
    double wv = 0.6, wh = -0.25, whist = 0.2, wl = 0.28, a = 0.1, b = -0.2, c = 0.05;
    const double v = 0.9, hist = -0.7, l = 1.0;
    const double h_blind = sigmoid(b);

    // positive statistics: chain hidden paired with the data activities
    const double pos_wv = v * (wh * h_blind) * (whist * hist) * (wl * l);
    const double pos_wh = h_blind * (wv * v) * (whist * hist) * (wl * l);
    const double pos_whist = hist * (wv * v) * (wh * h_blind) * (wl * l);
    const double pos_wl = l * (wv * v) * (wh * h_blind) * (whist * hist);
    const double pos_a = v - a;
    const double pos_b = h_blind;
    const double pos_c = l;

    // mean-field reconstruction from the blind hidden state, then the
    // negative phase
    const double v_rec = a + wv * (wh * h_blind) * (whist * hist) * (wl * l);
    const double h_rec = sigmoid(b + wh * (wv * v_rec) * (whist * hist) * (wl * l));
    const double neg_wv = v_rec * (wh * h_rec) * (whist * hist) * (wl * l);
    const double neg_wh = h_rec * (wv * v_rec) * (whist * hist) * (wl * l);
    const double neg_whist = hist * (wv * v_rec) * (wh * h_rec) * (wl * l);
    const double neg_wl = l * (wv * v_rec) * (wh * h_rec) * (whist * hist);
    const double neg_a = v_rec - a;
    const double neg_b = h_rec;
    const double neg_c = l;

    // one momentum update, decay on weights only
    wv += cfg.alpha * (pos_wv - neg_wv - cfg.gamma * wv);
    wh += cfg.alpha * (pos_wh - neg_wh - cfg.gamma * wh);
    whist += cfg.alpha * (pos_whist - neg_whist - cfg.gamma * whist);
    wl += cfg.alpha * (pos_wl - neg_wl - cfg.gamma * wl);
    a += cfg.alpha * (pos_a - neg_a);
    b += cfg.alpha * (pos_b - neg_b);
    c += cfg.alpha * (pos_c - neg_c);

    VelocitySet<double> vel = GradientSet<double>::zero(d);
    Rng chain_rng(777);
    const ChainResult<double> r = run_chain_present(p, vel, s, cfg, chain_rng);

    CHECK(r.pos.bank1.w_v(0, 0) == doctest::Approx(pos_wv).epsilon(1e-12));
    CHECK(r.pos.bank1.w_h(0, 0) == doctest::Approx(pos_wh).epsilon(1e-12));
    CHECK(r.pos.bank1.w_hist(0, 0) == doctest::Approx(pos_whist).epsilon(1e-12));
    CHECK(r.pos.bank1.w_l(0, 0) == doctest::Approx(pos_wl).epsilon(1e-12));
    CHECK(r.pos.a[0] == doctest::Approx(pos_a).epsilon(1e-12));
    CHECK(r.pos.b[0] == doctest::Approx(pos_b).epsilon(1e-12));
    CHECK(r.pos.c[0] == doctest::Approx(pos_c).epsilon(1e-12));
    CHECK(r.neg.bank1.w_v(0, 0) == doctest::Approx(neg_wv).epsilon(1e-12));
    CHECK(r.neg.bank1.w_h(0, 0) == doctest::Approx(neg_wh).epsilon(1e-12));
    CHECK(r.neg.bank1.w_hist(0, 0) == doctest::Approx(neg_whist).epsilon(1e-12));
    CHECK(r.neg.bank1.w_l(0, 0) == doctest::Approx(neg_wl).epsilon(1e-12));
    CHECK(r.neg.a[0] == doctest::Approx(neg_a).epsilon(1e-12));
    CHECK(r.neg.b[0] == doctest::Approx(neg_b).epsilon(1e-12));
    CHECK(r.neg.c[0] == doctest::Approx(neg_c).epsilon(1e-12));
    CHECK(r.final_v[0] == doctest::Approx(v_rec).epsilon(1e-12));
    CHECK(p.bank1.w_v(0, 0) == doctest::Approx(wv).epsilon(1e-12));
    CHECK(p.bank1.w_h(0, 0) == doctest::Approx(wh).epsilon(1e-12));
    CHECK(p.bank1.w_hist(0, 0) == doctest::Approx(whist).epsilon(1e-12));
    CHECK(p.bank1.w_l(0, 0) == doctest::Approx(wl).epsilon(1e-12));
    CHECK(p.a[0] == doctest::Approx(a).epsilon(1e-12));
    CHECK(p.b[0] == doctest::Approx(b).epsilon(1e-12));
    CHECK(p.c[0] == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("training with a silent second bank tracks the single-bank baseline bit for bit") {
    Rng rng(4106);
    const LayerDims d{3, 3, 4, 2, 2, 2};
    std::vector<Sample<double>> data;
    for (int i = 0; i < 100; ++i) data.push_back(random_sample(d, rng));

    ModelParams<double> dual = init_params<double>(d, 21, 0.3);
    dual.bank2.set_zero();

    LayerDims ds = d;
    ds.n_f2 = 0;
    ModelParams<double> single;
    single.dims = ds;
    single.bank1 = dual.bank1;
    single.bank2 = FactorBank<double>::zero(ds, 0);
    single.a = dual.a;
    single.b = dual.b;
    single.c = dual.c;
    single.sigma = dual.sigma;
    single.sigma_hist = dual.sigma_hist;

    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 31;
    const std::vector<EpochStats> log_dual = train(dual, data, cfg);
    const std::vector<EpochStats> log_single = train_ffw(single, data, cfg);

    CHECK(all_equal(dual.bank1.w_v, single.bank1.w_v));
    CHECK(all_equal(dual.bank1.w_h, single.bank1.w_h));
    CHECK(all_equal(dual.bank1.w_hist, single.bank1.w_hist));
    CHECK(all_equal(dual.bank1.w_l, single.bank1.w_l));
    CHECK(all_equal(dual.a, single.a));
    CHECK(all_equal(dual.b, single.b));
    CHECK(all_equal(dual.c, single.c));
    CHECK(dual.bank2.w_v.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(log_dual.size() == log_single.size());
    for (size_t e = 0; e < log_dual.size(); ++e) {
        CHECK(log_dual[e].mean_recon_v == log_single[e].mean_recon_v);
        CHECK(log_dual[e].mean_recon_l == log_single[e].mean_recon_l);
        CHECK(log_dual[e].mean_energy == log_single[e].mean_energy);
    }
}

TEST_CASE("zero epochs return the parameters untouched") {
    Rng rng(4107);
    const LayerDims d = tiny_dims(rng);
    ModelParams<double> p = tiny_params(d, rng);
    const ModelParams<double> before = p;
    std::vector<Sample<double>> data{random_sample(d, rng)};

    TrainConfig cfg;
    cfg.epochs = 0;
    const std::vector<EpochStats> log = train(p, data, cfg);
    CHECK(log.empty());
    CHECK(params_equal(p, before));
}

TEST_CASE("training is a pure function of params, data, and config") {
    Rng rng(4108);
    const LayerDims d{3, 4, 6, 2, 3, 3};
    std::vector<Sample<double>> data;
    for (int i = 0; i < 40; ++i) data.push_back(random_sample(d, rng));
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 99;

    ModelParams<double> pa = init_params<double>(d, 1, 0.3);
    ModelParams<double> pb = init_params<double>(d, 1, 0.3);
    const std::vector<EpochStats> la = train(pa, data, cfg);
    const std::vector<EpochStats> lb = train(pb, data, cfg);
    CHECK(params_equal(pa, pb));
    REQUIRE(la.size() == lb.size());
    for (size_t e = 0; e < la.size(); ++e) CHECK(la[e].mean_energy == lb[e].mean_energy);
}

TEST_CASE("twenty epochs shrink the present reconstruction error") {
    Rng rng(4109);
    const LayerDims d{3, 6, 12, 2, 8, 8};
    const std::vector<Sample<double>> data = sinusoid_set(d, 200, rng);

    ModelParams<double> p = init_params<double>(d, 40, 0.3);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 41;
    const std::vector<EpochStats> log = train(p, data, cfg);
    REQUIRE(log.size() == 20);
    CHECK(log.back().mean_recon_v < log.front().mean_recon_v);
}

TEST_CASE("non-finite parameters abort with the group name and epoch") {
    Rng rng(4110);
    const LayerDims d{2, 2, 2, 2, 1, 1};
    ModelParams<double> p = init_params<double>(d, 8, 0.3);
    std::vector<Sample<double>> data{random_sample(d, rng)};
    data[0].present[0] = std::numeric_limits<double>::quiet_NaN();

    TrainConfig cfg;
    cfg.epochs = 2;
    CHECK_THROWS_WITH_AS(train(p, data, cfg), doctest::Contains("non-finite values in bank1.w_v at epoch 1"),
                         std::runtime_error);
}

TEST_CASE("the baseline trainer rejects a two-bank model") {
    Rng rng(4111);
    const LayerDims d{2, 2, 2, 2, 1, 1};
    ModelParams<double> p = init_params<double>(d, 8, 0.3);
    std::vector<Sample<double>> data{random_sample(d, rng)};
    TrainConfig cfg;
    CHECK_THROWS_AS(train_ffw(p, data, cfg), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range settings") {
    TrainConfig cfg;
    cfg.validate();

    TrainConfig bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.rho = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.gamma = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.cd_steps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.epochs = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_SUITE_END();
