#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/data.hpp"
#include "dffw/rng.hpp"

namespace dffw {

struct TrainConfig {
    double alpha = 1e-4;   ///< learning rate
    double rho = 0.5;      ///< momentum
    double gamma = 2e-4;   ///< weight decay, factor matrices only
    int cd_steps = 3;      ///< Markov chain length n
    int epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("TrainConfig: alpha must be in (0,1)");
        if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("TrainConfig: rho must be in [0,1)");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainConfig: gamma must be in [0,1)");
        if (cd_steps < 1) throw std::invalid_argument("TrainConfig: cd_steps must be >= 1");
        if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    }
};

/// One value per free parameter group, shaped like ModelParams. Used for
/// phase statistics, gradients, and momentum buffers alike.
template <typename Scalar>
struct GradientSet {
    FactorBank<Scalar> bank1, bank2;
    VectorX<Scalar> a, b, c;

    static GradientSet zero(const LayerDims& d) {
        GradientSet g;
        g.bank1 = FactorBank<Scalar>::zero(d, d.n_f1);
        g.bank2 = FactorBank<Scalar>::zero(d, d.n_f2);
        g.a = VectorX<Scalar>::Zero(d.n_v);
        g.b = VectorX<Scalar>::Zero(d.n_h);
        g.c = VectorX<Scalar>::Zero(d.n_l);
        return g;
    }

    void set_zero() {
        bank1.set_zero();
        bank2.set_zero();
        a.setZero();
        b.setZero();
        c.setZero();
    }

    GradientSet& operator+=(const GradientSet& o) {
        bank1.w_v += o.bank1.w_v;
        bank1.w_h += o.bank1.w_h;
        bank1.w_hist += o.bank1.w_hist;
        bank1.w_l += o.bank1.w_l;
        bank2.w_v += o.bank2.w_v;
        bank2.w_h += o.bank2.w_h;
        bank2.w_hist += o.bank2.w_hist;
        bank2.w_l += o.bank2.w_l;
        a += o.a;
        b += o.b;
        c += o.c;
        return *this;
    }
};

template <typename Scalar>
using VelocitySet = GradientSet<Scalar>;

/// Scratch buffers reused across samples so the inner loop never allocates
/// beyond the first call.
template <typename Scalar>
struct TrainWorkspace {
    LayerState<Scalar> state;
    GradientSet<Scalar> pos, neg;
    FactorSums<Scalar> ws1, ws2;
    VectorX<Scalar> input, h_probs, l_probs;

    explicit TrainWorkspace(const LayerDims& d) : pos(GradientSet<Scalar>::zero(d)), neg(GradientSet<Scalar>::zero(d)) {
        state.v.resize(d.n_v);
        state.h.resize(d.n_h);
        state.l.resize(d.n_l);
        state.hist.resize(d.n_vlt);
    }
};

/// Phase statistics at one fully specified state: per factor weight the unit
/// activity times the product of the other three layers' factor sums, per
/// bias the exact negative energy derivative ((v-a)/sigma^2 for the visible
/// bias, raw activity for hidden and label -- identical on z-scored data with
/// unit sigma). Every entry equals -dE/dtheta at the state.
template <typename Scalar>
void statistics_into(const ModelParams<Scalar>& p, const LayerState<Scalar>& s, GradientSet<Scalar>& out,
                     FactorSums<Scalar>& ws1, FactorSums<Scalar>& ws2) {
    const VectorX<Scalar> v_scaled = s.v.array() / p.sigma.array();
    const VectorX<Scalar> hist_scaled = s.hist.array() / p.sigma_hist.array();

    ws1.compute(p.bank1, s, p.sigma, p.sigma_hist);
    out.bank1.w_v.noalias() = v_scaled * ws1.projection(LayerTag::visible).transpose();
    out.bank1.w_h.noalias() = s.h * ws1.projection(LayerTag::hidden).transpose();
    out.bank1.w_hist.noalias() = hist_scaled * ws1.projection(LayerTag::history).transpose();
    out.bank1.w_l.noalias() = s.l * ws1.projection(LayerTag::label).transpose();
    if (!p.single_bank()) {
        ws2.compute(p.bank2, s, p.sigma, p.sigma_hist);
        out.bank2.w_v.noalias() = v_scaled * ws2.projection(LayerTag::visible).transpose();
        out.bank2.w_h.noalias() = s.h * ws2.projection(LayerTag::hidden).transpose();
        out.bank2.w_hist.noalias() = hist_scaled * ws2.projection(LayerTag::history).transpose();
        out.bank2.w_l.noalias() = s.l * ws2.projection(LayerTag::label).transpose();
    }
    out.a = (s.v - p.a).array() / p.sigma.array().square();
    out.b = s.h;
    out.c = s.l;
}

template <typename Scalar>
GradientSet<Scalar> statistics(const ModelParams<Scalar>& p, const LayerState<Scalar>& s) {
    detail::check_state_dims(p, s, "statistics");
    GradientSet<Scalar> g = GradientSet<Scalar>::zero(p.dims);
    FactorSums<Scalar> ws1, ws2;
    statistics_into(p, s, g, ws1, ws2);
    return g;
}

/// Velocity entries are bounded to +-kStepLimit per update. The factor
/// products give the statistics heavy tails, and with several updates per
/// sample an unbounded step lets one extreme sample amplify its own next
/// reconstruction; that feedback diverges in finite time. The bound sits an
/// order of magnitude above step sizes seen in healthy training, so it only
/// engages in that runaway regime.
inline constexpr double kStepLimit = 0.1;

/// Max-norm constraints on factor-weight columns: after each update, any
/// column whose Euclidean norm exceeds scale * sqrt(rows) is rescaled onto
/// that bound. The energy is unbounded below in the weights (the four-way
/// products can deepen indefinitely while reconstructions stay fixed), so
/// gradient descent alone drifts until the multiplicative terms overflow;
/// bounding column norms bounds every factor sum and with it the energy over
/// the feasible set.
///
/// The bound is role-dependent. Each conditional mean is a linear readout of
/// factor products: the present reconstruction reads through bank 1's visible
/// weights, the label reconstruction through bank 2's label weights. Those
/// two readout matrices get three times the expected column norm at
/// initialization, room to fit the conditionals. The remaining six matrices
/// only form the products being read out, and they are held at the
/// initialization norm itself: their columns can rotate but not grow. Left
/// loose, the feature matrices keep absorbing gradient long after the
/// readouts have fit, and with one training trajectory per class they drift
/// into encoding those trajectories rather than anything that transfers.
inline constexpr double kReadoutNormScale = 0.45;
inline constexpr double kFeatureNormScale = 0.60;

namespace detail {

template <typename Scalar>
void clamp_columns(MatrixX<Scalar>& w, double scale) {
    const Scalar cap2 = static_cast<Scalar>(scale * scale) * static_cast<Scalar>(w.rows());
    for (Index f = 0; f < w.cols(); ++f) {
        const Scalar n2 = w.col(f).squaredNorm();
        if (n2 > cap2) w.col(f) *= std::sqrt(cap2 / n2);
    }
}

}  // namespace detail

/// Momentum update: velocity <- rho*velocity + alpha*((pos-neg) - gamma*theta),
/// theta <- theta + velocity. Weight decay touches the eight factor matrices
/// only, never the biases.
template <typename Scalar>
void apply_update(ModelParams<Scalar>& p, VelocitySet<Scalar>& vel, const GradientSet<Scalar>& pos,
                  const GradientSet<Scalar>& neg, const TrainConfig& cfg) {
    const Scalar alpha = static_cast<Scalar>(cfg.alpha);
    const Scalar rho = static_cast<Scalar>(cfg.rho);
    const Scalar gamma = static_cast<Scalar>(cfg.gamma);
    const Scalar lim = static_cast<Scalar>(kStepLimit);
    auto weight = [&](MatrixX<Scalar>& w, MatrixX<Scalar>& v, const MatrixX<Scalar>& ps, const MatrixX<Scalar>& ns,
                      double scale) {
        v = (rho * v + alpha * (ps - ns - gamma * w)).cwiseMax(-lim).cwiseMin(lim);
        w += v;
        detail::clamp_columns(w, scale);
    };
    auto bias = [&](VectorX<Scalar>& b, VectorX<Scalar>& v, const VectorX<Scalar>& ps, const VectorX<Scalar>& ns) {
        v = (rho * v + alpha * (ps - ns)).cwiseMax(-lim).cwiseMin(lim);
        b += v;
    };
    weight(p.bank1.w_v, vel.bank1.w_v, pos.bank1.w_v, neg.bank1.w_v, kReadoutNormScale);
    weight(p.bank1.w_h, vel.bank1.w_h, pos.bank1.w_h, neg.bank1.w_h, kFeatureNormScale);
    weight(p.bank1.w_hist, vel.bank1.w_hist, pos.bank1.w_hist, neg.bank1.w_hist, kFeatureNormScale);
    weight(p.bank1.w_l, vel.bank1.w_l, pos.bank1.w_l, neg.bank1.w_l, kFeatureNormScale);
    weight(p.bank2.w_v, vel.bank2.w_v, pos.bank2.w_v, neg.bank2.w_v, kFeatureNormScale);
    weight(p.bank2.w_h, vel.bank2.w_h, pos.bank2.w_h, neg.bank2.w_h, kFeatureNormScale);
    weight(p.bank2.w_hist, vel.bank2.w_hist, pos.bank2.w_hist, neg.bank2.w_hist, kFeatureNormScale);
    weight(p.bank2.w_l, vel.bank2.w_l, pos.bank2.w_l, neg.bank2.w_l, kReadoutNormScale);
    bias(p.a, vel.a, pos.a, neg.a);
    bias(p.b, vel.b, pos.b, neg.b);
    bias(p.c, vel.c, pos.c, neg.c);
}

/// Accumulated chain output, mainly for inspection and tests; training itself
/// applies updates inside the loop.
template <typename Scalar>
struct ChainResult {
    GradientSet<Scalar> pos, neg;  ///< summed over the chain's steps
    VectorX<Scalar> final_v;       ///< last present reconstruction (chain 1)
    VectorX<Scalar> final_l;       ///< last label probabilities (chain 2)
};

namespace detail {

template <typename Scalar>
void hidden_probs_into(const ModelParams<Scalar>& p, TrainWorkspace<Scalar>& ws) {
    hidden_input(p, ws.state, ws.ws1, ws.ws2, ws.input);
    ws.h_probs = (p.b + ws.input).unaryExpr([](Scalar t) { return sigmoid(t); });
}

}  // namespace detail

/// First Markov chain: reconstruct the present layer with label and history
/// clamped. The present starts at zero, so the first hidden state is inferred
/// without seeing the answer; every positive phase pairs the chain's current
/// hidden probabilities with the sample's present. Each step then
/// reconstructs v from that hidden state, re-infers h at the reconstruction,
/// takes negative statistics there, and updates the parameters. Starting the
/// free layer blind is what makes the reconstruction pathway usable at test
/// time, where the present is unknown and is initialized the same way. The
/// whole chain is mean-field: layers carry their activation probabilities and
/// Gaussian means, never samples, so training is deterministic and the
/// updates are free of sampling noise.
template <typename Scalar>
void chain_reconstruct_present(ModelParams<Scalar>& p, VelocitySet<Scalar>& vel, const Sample<Scalar>& sample,
                               const TrainConfig& cfg, Rng& rng, TrainWorkspace<Scalar>& ws,
                               ChainResult<Scalar>* accum = nullptr) {
    (void)rng;
    ws.state.l = sample.label;
    ws.state.hist = sample.history;
    ws.state.v = VectorX<Scalar>::Zero(p.dims.n_v);
    detail::hidden_probs_into(p, ws);
    for (int lam = 0; lam < cfg.cd_steps; ++lam) {
        ws.state.v = sample.present;
        ws.state.h = ws.h_probs;
        statistics_into(p, ws.state, ws.pos, ws.ws1, ws.ws2);

        visible_input(p, ws.state, ws.ws1, ws.input);
        ws.state.v = p.a + ws.input;
        detail::hidden_probs_into(p, ws);
        ws.state.h = ws.h_probs;
        statistics_into(p, ws.state, ws.neg, ws.ws1, ws.ws2);

        if (accum) {
            accum->pos += ws.pos;
            accum->neg += ws.neg;
        }
        apply_update(p, vel, ws.pos, ws.neg, cfg);
    }
    if (accum) accum->final_v = ws.state.v;
}

/// Second Markov chain: reconstruct the label layer with present and history
/// clamped, mirroring the first chain. The label starts at zero, so the
/// hidden state driving each reconstruction never sees the true class; the
/// positive phase pairs that hidden state with the sample's one-hot label.
/// This is where the classifier's discrimination comes from: if the label
/// were clamped during inference, reconstructing it would be circular and
/// the label-pathway gradient would vanish. Mean-field throughout, like the
/// first chain.
template <typename Scalar>
void chain_reconstruct_label(ModelParams<Scalar>& p, VelocitySet<Scalar>& vel, const Sample<Scalar>& sample,
                             const TrainConfig& cfg, Rng& rng, TrainWorkspace<Scalar>& ws,
                             ChainResult<Scalar>* accum = nullptr) {
    (void)rng;
    ws.state.v = sample.present;
    ws.state.hist = sample.history;
    ws.state.l = VectorX<Scalar>::Zero(p.dims.n_l);
    detail::hidden_probs_into(p, ws);
    for (int lam = 0; lam < cfg.cd_steps; ++lam) {
        ws.state.l = sample.label;
        ws.state.h = ws.h_probs;
        statistics_into(p, ws.state, ws.pos, ws.ws1, ws.ws2);

        label_input(p, ws.state, ws.ws2, ws.input);
        ws.l_probs = (p.c + ws.input).unaryExpr([](Scalar t) { return sigmoid(t); });
        ws.state.l = ws.l_probs;
        detail::hidden_probs_into(p, ws);
        ws.state.h = ws.h_probs;
        statistics_into(p, ws.state, ws.neg, ws.ws1, ws.ws2);

        if (accum) {
            accum->pos += ws.pos;
            accum->neg += ws.neg;
        }
        apply_update(p, vel, ws.pos, ws.neg, cfg);
    }
    if (accum) accum->final_l = ws.l_probs;
}

/// Allocating single-sample wrappers around the chains.
template <typename Scalar>
ChainResult<Scalar> run_chain_present(ModelParams<Scalar>& p, VelocitySet<Scalar>& vel, const Sample<Scalar>& sample,
                                      const TrainConfig& cfg, Rng& rng) {
    TrainWorkspace<Scalar> ws(p.dims);
    ChainResult<Scalar> r{GradientSet<Scalar>::zero(p.dims), GradientSet<Scalar>::zero(p.dims), {}, {}};
    chain_reconstruct_present(p, vel, sample, cfg, rng, ws, &r);
    return r;
}

template <typename Scalar>
ChainResult<Scalar> run_chain_label(ModelParams<Scalar>& p, VelocitySet<Scalar>& vel, const Sample<Scalar>& sample,
                                    const TrainConfig& cfg, Rng& rng) {
    TrainWorkspace<Scalar> ws(p.dims);
    ChainResult<Scalar> r{GradientSet<Scalar>::zero(p.dims), GradientSet<Scalar>::zero(p.dims), {}, {}};
    chain_reconstruct_label(p, vel, sample, cfg, rng, ws, &r);
    return r;
}

struct EpochStats {
    int epoch = 0;            ///< 1-based
    double mean_recon_v = 0;  ///< mean squared error of the final present reconstruction
    double mean_recon_l = 0;  ///< mean squared error of the final label probabilities
    double mean_energy = 0;   ///< mean energy at the data-clamped mean-field state
};

namespace detail {

template <typename Scalar>
void check_training_inputs(const ModelParams<Scalar>& p, const std::vector<Sample<Scalar>>& data) {
    for (const Sample<Scalar>& s : data)
        if (s.present.size() != p.dims.n_v || s.history.size() != p.dims.n_vlt || s.label.size() != p.dims.n_l)
            throw std::invalid_argument("train: sample dimensions do not match model dims");
}

template <typename Scalar>
void check_finite(const ModelParams<Scalar>& p, int epoch) {
    const std::pair<const char*, bool> groups[] = {
        {"bank1.w_v", p.bank1.w_v.allFinite()},   {"bank1.w_h", p.bank1.w_h.allFinite()},
        {"bank1.w_hist", p.bank1.w_hist.allFinite()}, {"bank1.w_l", p.bank1.w_l.allFinite()},
        {"bank2.w_v", p.bank2.w_v.allFinite()},   {"bank2.w_h", p.bank2.w_h.allFinite()},
        {"bank2.w_hist", p.bank2.w_hist.allFinite()}, {"bank2.w_l", p.bank2.w_l.allFinite()},
        {"a", p.a.allFinite()},                   {"b", p.b.allFinite()},
        {"c", p.c.allFinite()}};
    for (const auto& [name, ok] : groups)
        if (!ok)
            throw std::runtime_error("train: non-finite values in " + std::string(name) + " at epoch " +
                                     std::to_string(epoch));
}

}  // namespace detail

/// Sequential contrastive divergence: per epoch, visit every sample in a
/// seed-shuffled order and run both reconstruction chains with in-loop
/// updates. Pure function of (params, data, cfg).
template <typename Scalar>
std::vector<EpochStats> train(ModelParams<Scalar>& p, const std::vector<Sample<Scalar>>& data,
                              const TrainConfig& cfg,
                              const std::function<void(const EpochStats&)>& on_epoch = {}) {
    cfg.validate();
    detail::check_training_inputs(p, data);
    if (data.empty()) throw std::invalid_argument("train: empty dataset");

    Rng rng = Rng::derive(cfg.seed, 0x7463);
    VelocitySet<Scalar> vel = GradientSet<Scalar>::zero(p.dims);
    TrainWorkspace<Scalar> ws(p.dims);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<EpochStats> log;
    log.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        EpochStats es;
        es.epoch = epoch;
        for (size_t i : order) {
            const Sample<Scalar>& s = data[i];
            chain_reconstruct_present(p, vel, s, cfg, rng, ws);
            es.mean_recon_v += (ws.state.v - s.present).squaredNorm() / double(p.dims.n_v);
            chain_reconstruct_label(p, vel, s, cfg, rng, ws);
            es.mean_recon_l += (ws.l_probs - s.label).squaredNorm() / double(p.dims.n_l);

            ws.state.v = s.present;
            ws.state.l = s.label;
            ws.state.hist = s.history;
            hidden_input(p, ws.state, ws.ws1, ws.ws2, ws.input);
            ws.state.h = (p.b + ws.input).unaryExpr([](Scalar t) { return sigmoid(t); });
            es.mean_energy += static_cast<double>(energy(p, ws.state));
        }
        es.mean_recon_v /= double(data.size());
        es.mean_recon_l /= double(data.size());
        es.mean_energy /= double(data.size());
        detail::check_finite(p, epoch);
        log.push_back(es);
        if (on_epoch) on_epoch(es);
    }
    return log;
}

/// Baseline trainer: identical procedure on a single-bank machine (the label
/// reconstruction degenerates to sigmoid(c) because no bank feeds the label
/// layer).
template <typename Scalar>
std::vector<EpochStats> train_ffw(ModelParams<Scalar>& p, const std::vector<Sample<Scalar>>& data,
                                  const TrainConfig& cfg,
                                  const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (!p.single_bank()) throw std::invalid_argument("train_ffw: model must have a single factor bank");
    return train(p, data, cfg, on_epoch);
}

}  // namespace dffw
