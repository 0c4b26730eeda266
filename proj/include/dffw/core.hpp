#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "dffw/rng.hpp"

namespace dffw {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Layer sizes of one four-way machine. A disjunctive machine carries two
/// factor banks (n_f1 for the regression bank, n_f2 for the classification
/// bank); the single-tensor baseline is the special case n_f2 == 0.
struct LayerDims {
    Index n_v = 0;     ///< present (visible) units
    Index n_h = 0;     ///< hidden units
    Index n_vlt = 0;   ///< history units
    Index n_l = 0;     ///< label units
    Index n_f1 = 0;    ///< factors, bank 1 (regression)
    Index n_f2 = 0;    ///< factors, bank 2 (classification); 0 for the baseline

    bool single_bank() const { return n_f2 == 0; }

    void validate() const {
        if (n_v < 1 || n_h < 1 || n_vlt < 1 || n_l < 1 || n_f1 < 1 || n_f2 < 0)
            throw std::invalid_argument("LayerDims: all layer counts must be >= 1 (n_f2 >= 0)");
    }

    bool operator==(const LayerDims&) const = default;
};

/// One factoring layer: the four low-rank weight matrices that replace a
/// fourth-order tensor. Every matrix maps its layer's units to the same
/// factor dimension.
template <typename Scalar>
struct FactorBank {
    MatrixX<Scalar> w_v;     ///< n_v x n_f
    MatrixX<Scalar> w_h;     ///< n_h x n_f
    MatrixX<Scalar> w_hist;  ///< n_vlt x n_f
    MatrixX<Scalar> w_l;     ///< n_l x n_f

    Index factors() const { return w_v.cols(); }

    static FactorBank zero(const LayerDims& d, Index n_f) {
        FactorBank b;
        b.w_v = MatrixX<Scalar>::Zero(d.n_v, n_f);
        b.w_h = MatrixX<Scalar>::Zero(d.n_h, n_f);
        b.w_hist = MatrixX<Scalar>::Zero(d.n_vlt, n_f);
        b.w_l = MatrixX<Scalar>::Zero(d.n_l, n_f);
        return b;
    }

    void set_zero() {
        w_v.setZero();
        w_h.setZero();
        w_hist.setZero();
        w_l.setZero();
    }

    bool all_finite() const {
        return w_v.allFinite() && w_h.allFinite() && w_hist.allFinite() && w_l.allFinite();
    }
};

/// All free parameters of one machine.
template <typename Scalar>
struct ModelParams {
    LayerDims dims;
    FactorBank<Scalar> bank1;  ///< drives real-valued reconstruction
    FactorBank<Scalar> bank2;  ///< drives label reconstruction; 0 factors for the baseline
    VectorX<Scalar> a;          ///< visible biases, n_v
    VectorX<Scalar> b;          ///< hidden biases, n_h
    VectorX<Scalar> c;          ///< label biases, n_l
    VectorX<Scalar> sigma;      ///< per-unit visible std, n_v, > 0
    VectorX<Scalar> sigma_hist; ///< per-unit history std, n_vlt, > 0

    bool single_bank() const { return dims.single_bank(); }
};

/// One joint configuration of the four layers. h and l hold probabilities
/// or binary samples; v and hist are real-valued.
template <typename Scalar>
struct LayerState {
    VectorX<Scalar> v;
    VectorX<Scalar> h;
    VectorX<Scalar> l;
    VectorX<Scalar> hist;
};

enum class LayerTag { none, visible, hidden, history, label };

namespace detail {

template <typename Scalar>
void check_state_dims(const ModelParams<Scalar>& p, const LayerState<Scalar>& s, const char* where) {
    const LayerDims& d = p.dims;
    if (s.v.size() != d.n_v || s.h.size() != d.n_h || s.l.size() != d.n_l || s.hist.size() != d.n_vlt)
        throw std::invalid_argument(std::string(where) + ": state dimensions do not match model dims");
}

}  // namespace detail

/// Numerically stable logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// Draw every weight from N(0, std^2); biases start at zero and both sigma
/// vectors at one (inputs are z-scored upstream). Bank 1 is drawn before
/// bank 2, so a single-bank model shares bank 1 bit-for-bit with a two-bank
/// model built from the same seed.
template <typename Scalar = double>
ModelParams<Scalar> init_params(const LayerDims& dims, std::uint64_t seed, Scalar weight_std) {
    dims.validate();
    if (!(weight_std > Scalar(0))) throw std::invalid_argument("init_params: std must be > 0");

    Rng rng = Rng::derive(seed, 0x1217);
    auto fill = [&rng, weight_std](MatrixX<Scalar>& m) {
        for (Index j = 0; j < m.cols(); ++j)
            for (Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.normal(0.0, static_cast<double>(weight_std)));
    };

    ModelParams<Scalar> p;
    p.dims = dims;
    p.bank1 = FactorBank<Scalar>::zero(dims, dims.n_f1);
    p.bank2 = FactorBank<Scalar>::zero(dims, dims.n_f2);
    fill(p.bank1.w_v);
    fill(p.bank1.w_h);
    fill(p.bank1.w_hist);
    fill(p.bank1.w_l);
    fill(p.bank2.w_v);
    fill(p.bank2.w_h);
    fill(p.bank2.w_hist);
    fill(p.bank2.w_l);
    p.a = VectorX<Scalar>::Zero(dims.n_v);
    p.b = VectorX<Scalar>::Zero(dims.n_h);
    p.c = VectorX<Scalar>::Zero(dims.n_l);
    p.sigma = VectorX<Scalar>::Ones(dims.n_v);
    p.sigma_hist = VectorX<Scalar>::Ones(dims.n_vlt);
    return p;
}

/// Per-factor weighted layer sums for one bank. Visible and history
/// activities enter divided by their std; hidden and label enter raw.
/// These four vectors are the O(n * n_f) backbone of every kernel below.
template <typename Scalar>
struct FactorSums {
    VectorX<Scalar> sv, sh, shist, sl;  // each n_f

    void compute(const FactorBank<Scalar>& bank, const LayerState<Scalar>& s,
                 const VectorX<Scalar>& sigma, const VectorX<Scalar>& sigma_hist) {
        sv.noalias() = bank.w_v.transpose() * (s.v.array() / sigma.array()).matrix();
        sh.noalias() = bank.w_h.transpose() * s.h;
        shist.noalias() = bank.w_hist.transpose() * (s.hist.array() / sigma_hist.array()).matrix();
        sl.noalias() = bank.w_l.transpose() * s.l;
    }

    /// Elementwise product of the three sums other than `skip`
    /// (all four when skip == none).
    VectorX<Scalar> projection(LayerTag skip) const {
        switch (skip) {
            case LayerTag::visible: return sh.array() * shist.array() * sl.array();
            case LayerTag::hidden: return sv.array() * shist.array() * sl.array();
            case LayerTag::history: return sv.array() * sh.array() * sl.array();
            case LayerTag::label: return sv.array() * sh.array() * shist.array();
            case LayerTag::none: return sv.array() * sh.array() * shist.array() * sl.array();
        }
        return VectorX<Scalar>();
    }
};

/// Per-factor product over all layers except `skip` for one bank.
template <typename Scalar>
VectorX<Scalar> factor_projection(const FactorBank<Scalar>& bank, const LayerState<Scalar>& state,
                                  const VectorX<Scalar>& sigma, const VectorX<Scalar>& sigma_hist,
                                  LayerTag skip) {
    FactorSums<Scalar> sums;
    sums.compute(bank, state, sigma, sigma_hist);
    return sums.projection(skip);
}

/// Joint energy of one configuration: quadratic visible term plus hidden and
/// label bias terms, minus the factored interaction term of each bank. The
/// quadratic term carries the +1/(2 sigma^2) Gaussian convention so that the
/// visible conditional below is its exact complement.
template <typename Scalar>
Scalar energy(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    detail::check_state_dims(p, s, "energy");
    const Scalar quad = ((s.v - p.a).array() / p.sigma.array()).square().sum() / Scalar(2);
    Scalar e = quad - p.b.dot(s.h) - p.c.dot(s.l);

    FactorSums<Scalar> sums;
    sums.compute(p.bank1, s, p.sigma, p.sigma_hist);
    e -= sums.projection(LayerTag::none).sum();
    if (!p.single_bank()) {
        sums.compute(p.bank2, s, p.sigma, p.sigma_hist);
        e -= sums.projection(LayerTag::none).sum();
    }
    return e;
}

// ---------------------------------------------------------------------------
// Layer inputs. The hidden input collects both banks; the visible input is
// driven by bank 1 only and the label input by bank 2 only -- that asymmetry
// is what specializes one bank to regression and the other to classification.
// ---------------------------------------------------------------------------

template <typename Scalar>
void hidden_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s,
                  FactorSums<Scalar>& ws1, FactorSums<Scalar>& ws2, VectorX<Scalar>& out) {
    ws1.compute(p.bank1, s, p.sigma, p.sigma_hist);
    out.noalias() = p.bank1.w_h * ws1.projection(LayerTag::hidden);
    if (!p.single_bank()) {
        ws2.compute(p.bank2, s, p.sigma, p.sigma_hist);
        out.noalias() += p.bank2.w_h * ws2.projection(LayerTag::hidden);
    }
}

template <typename Scalar>
VectorX<Scalar> hidden_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    detail::check_state_dims(p, s, "hidden_input");
    FactorSums<Scalar> ws1, ws2;
    VectorX<Scalar> out;
    hidden_input(p, s, ws1, ws2, out);
    return out;
}

template <typename Scalar>
void visible_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s,
                   FactorSums<Scalar>& ws1, VectorX<Scalar>& out) {
    ws1.compute(p.bank1, s, p.sigma, p.sigma_hist);
    out.noalias() = p.bank1.w_v * ws1.projection(LayerTag::visible);
}

template <typename Scalar>
VectorX<Scalar> visible_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    detail::check_state_dims(p, s, "visible_input");
    FactorSums<Scalar> ws;
    VectorX<Scalar> out;
    visible_input(p, s, ws, out);
    return out;
}

template <typename Scalar>
void label_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s,
                 FactorSums<Scalar>& ws2, VectorX<Scalar>& out) {
    if (p.single_bank()) {
        out = VectorX<Scalar>::Zero(p.dims.n_l);
        return;
    }
    ws2.compute(p.bank2, s, p.sigma, p.sigma_hist);
    out.noalias() = p.bank2.w_l * ws2.projection(LayerTag::label);
}

template <typename Scalar>
VectorX<Scalar> label_input(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    detail::check_state_dims(p, s, "label_input");
    FactorSums<Scalar> ws;
    VectorX<Scalar> out;
    label_input(p, s, ws, out);
    return out;
}

// ---------------------------------------------------------------------------
// Activations: hidden and label units are logistic, the visible conditional
// is Gaussian with mean a + s^v and variance sigma^2.
// ---------------------------------------------------------------------------

template <typename Scalar>
VectorX<Scalar> hidden_probs(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    VectorX<Scalar> x = hidden_input(p, s);
    return (p.b + x).unaryExpr([](Scalar t) { return sigmoid(t); });
}

template <typename Scalar>
VectorX<Scalar> label_probs(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    VectorX<Scalar> x = label_input(p, s);
    return (p.c + x).unaryExpr([](Scalar t) { return sigmoid(t); });
}

template <typename Scalar>
VectorX<Scalar> visible_mean(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    return p.a + visible_input(p, s);
}

/// Independent Bernoulli draw per unit.
template <typename Scalar>
VectorX<Scalar> sample_bernoulli(const VectorX<Scalar>& probs, Rng& rng) {
    VectorX<Scalar> out(probs.size());
    for (Index i = 0; i < probs.size(); ++i) out[i] = rng.bernoulli(static_cast<double>(probs[i])) ? Scalar(1) : Scalar(0);
    return out;
}

template <typename Scalar>
VectorX<Scalar> sample_hidden(const ModelParams<Scalar>& p, const LayerState<Scalar>& s, Rng& rng) {
    return sample_bernoulli<Scalar>(hidden_probs(p, s), rng);
}

template <typename Scalar>
VectorX<Scalar> sample_label(const ModelParams<Scalar>& p, const LayerState<Scalar>& s, Rng& rng) {
    return sample_bernoulli<Scalar>(label_probs(p, s), rng);
}

template <typename Scalar>
VectorX<Scalar> sample_visible(const ModelParams<Scalar>& p, const LayerState<Scalar>& s, Rng& rng) {
    if ((p.sigma.array() <= Scalar(0)).any())
        throw std::invalid_argument("sample_visible: sigma must be strictly positive");
    VectorX<Scalar> mean = visible_mean(p, s);
    for (Index i = 0; i < mean.size(); ++i)
        mean[i] = static_cast<Scalar>(rng.normal(static_cast<double>(mean[i]), static_cast<double>(p.sigma[i])));
    return mean;
}

}  // namespace dffw
