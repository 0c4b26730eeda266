#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/data.hpp"
#include "dffw/metrics.hpp"
#include "dffw/rng.hpp"

namespace dffw {

/// Split of the present layer into clamped (observed 2D) and free (estimated
/// 3D) units.
struct VisiblePartition {
    std::vector<Index> known_idx;
    std::vector<Index> unknown_idx;

    /// Balls layout: present = (x, y, z, u, v), the 2D projection is observed.
    static VisiblePartition balls() { return {{3, 4}, {0, 1, 2}}; }

    /// Every present unit free; used for autonomous rollouts.
    static VisiblePartition all_unknown(Index n_v) {
        VisiblePartition part;
        for (Index i = 0; i < n_v; ++i) part.unknown_idx.push_back(i);
        return part;
    }

    void validate(Index n_v) const {
        std::vector<char> seen(static_cast<size_t>(n_v), 0);
        for (const std::vector<Index>* set : {&known_idx, &unknown_idx})
            for (Index i : *set) {
                if (i < 0 || i >= n_v || seen[static_cast<size_t>(i)])
                    throw std::invalid_argument("VisiblePartition: indices must uniquely cover 0..n_v-1");
                seen[static_cast<size_t>(i)] = 1;
            }
        if (static_cast<Index>(known_idx.size() + unknown_idx.size()) != n_v)
            throw std::invalid_argument("VisiblePartition: indices must uniquely cover 0..n_v-1");
    }
};

/// All inference below is mean-field and therefore deterministic: hidden and
/// label layers take their activation probabilities, free visible units their
/// Gaussian means. The rng parameter is kept for interface stability but not
/// drawn from.

/// Infer the class of a (possibly partial) present observation with history
/// clamped. Returns the argmax label (lowest index on ties) and the label
/// probability vector.
template <typename Scalar>
std::pair<int, VectorX<Scalar>> classify(const ModelParams<Scalar>& p, const VectorX<Scalar>& present,
                                         const VectorX<Scalar>& hist, int gibbs_steps, Rng& rng) {
    (void)rng;
    if (gibbs_steps < 1) throw std::invalid_argument("classify: gibbs_steps must be >= 1");
    LayerState<Scalar> s;
    s.v = present;
    s.hist = hist;
    s.l = VectorX<Scalar>::Zero(p.dims.n_l);
    s.h = VectorX<Scalar>::Zero(p.dims.n_h);
    detail::check_state_dims(p, s, "classify");
    for (int g = 0; g < gibbs_steps; ++g) {
        s.h = hidden_probs(p, s);
        s.l = label_probs(p, s);
    }
    int best = 0;
    for (Index o = 1; o < p.dims.n_l; ++o)
        if (s.l[o] > s.l[best]) best = static_cast<int>(o);
    return {best, s.l};
}

/// Complete the present layer from a 2D observation: free units relax to
/// their conditional means while the known units are re-clamped to obs2d
/// after every pass. The relaxation replays the reconstruction schedule the
/// training loop drives toward the data: the present starts silent (an
/// all-zero present zeroes every factor product, so the hidden layer opens
/// at its bias activation), each round writes the present from the current
/// hidden state and only then refreshes the hidden layer from the clamped
/// result. Running the same composition of maps that was trained keeps the
/// iteration on the relaxation path the weights were shaped around. When no
/// label is supplied the class is inferred first and its one-hot encoding
/// clamps the label layer.
template <typename Scalar>
VectorX<Scalar> estimate_present(const ModelParams<Scalar>& p, const VectorX<Scalar>& obs2d,
                                 const VectorX<Scalar>& hist, const VectorX<Scalar>* label,
                                 const VisiblePartition& part, int gibbs_steps, Rng& rng) {
    part.validate(p.dims.n_v);
    if (static_cast<Index>(part.known_idx.size()) != obs2d.size())
        throw std::invalid_argument("estimate_present: obs2d size does not match partition");
    if (gibbs_steps < 1) throw std::invalid_argument("estimate_present: gibbs_steps must be >= 1");

    LayerState<Scalar> s;
    s.v = VectorX<Scalar>::Zero(p.dims.n_v);
    s.hist = hist;
    s.h = VectorX<Scalar>::Zero(p.dims.n_h);

    if (label) {
        if (label->size() != p.dims.n_l) throw std::invalid_argument("estimate_present: label size mismatch");
        s.l = *label;
    } else {
        VectorX<Scalar> padded = VectorX<Scalar>::Zero(p.dims.n_v);
        for (size_t k = 0; k < part.known_idx.size(); ++k)
            padded[part.known_idx[k]] = obs2d[static_cast<Index>(k)];
        const auto [cls, probs] = classify(p, padded, hist, gibbs_steps, rng);
        (void)probs;
        s.l = VectorX<Scalar>::Zero(p.dims.n_l);
        s.l[cls] = Scalar(1);
    }
    detail::check_state_dims(p, s, "estimate_present");

    s.h = hidden_probs(p, s);  // silent present: reduces to the bias activation
    for (int g = 0; g < gibbs_steps; ++g) {
        const VectorX<Scalar> mean = visible_mean(p, s);
        for (Index i : part.unknown_idx) s.v[i] = mean[i];
        for (size_t k = 0; k < part.known_idx.size(); ++k) s.v[part.known_idx[k]] = obs2d[static_cast<Index>(k)];
        s.h = hidden_probs(p, s);
    }
    return s.v;
}

template <typename Scalar>
struct MultistepResult {
    std::vector<VectorX<Scalar>> presents;  ///< raw-space present vectors, one per step
    VectorX<Scalar> final_history;          ///< raw-space window after the last step
};

/// Autonomous rollout: starting from a raw 2D history window, repeatedly
/// complete the present layer with nothing clamped, then push the 2D portion
/// of the output back into the window. The model operates in normalized
/// space; the window and the returned vectors stay in raw units so each
/// history slot is normalized with its own statistics.
template <typename Scalar>
MultistepResult<Scalar> predict_multistep(const ModelParams<Scalar>& p, const NormStats& norm,
                                          const VectorX<Scalar>& seed_history_raw, const VectorX<Scalar>& label,
                                          int steps, const VisiblePartition& part, int gibbs_steps, Rng& rng) {
    if (steps < 1) throw std::invalid_argument("predict_multistep: steps must be >= 1");
    if (seed_history_raw.size() != p.dims.n_vlt)
        throw std::invalid_argument("predict_multistep: history size mismatch");
    norm.validate();
    if (norm.present_dim != p.dims.n_v || norm.mean.size() != p.dims.n_v + p.dims.n_vlt)
        throw std::invalid_argument("predict_multistep: normalizer does not match model dims");
    part.validate(p.dims.n_v);
    const Index block = static_cast<Index>(part.known_idx.size());
    if (block < 1 || p.dims.n_vlt % block != 0)
        throw std::invalid_argument("predict_multistep: history is not a whole number of 2D frames");

    const VisiblePartition free_all = VisiblePartition::all_unknown(p.dims.n_v);
    const VectorX<Scalar> empty_obs;
    MultistepResult<Scalar> out;
    out.presents.reserve(static_cast<size_t>(steps));

    VectorX<Scalar> window = seed_history_raw;
    VectorX<Scalar> hist_norm(p.dims.n_vlt), present_raw(p.dims.n_v);
    for (int step = 0; step < steps; ++step) {
        hist_norm = (window - norm.mean.tail(p.dims.n_vlt)).cwiseQuotient(norm.std.tail(p.dims.n_vlt));
        const VectorX<Scalar> present_norm =
            estimate_present(p, empty_obs, hist_norm, &label, free_all, gibbs_steps, rng);
        present_raw = present_norm.cwiseProduct(norm.std.head(p.dims.n_v)) + norm.mean.head(p.dims.n_v);
        if (!present_raw.allFinite())
            throw std::runtime_error("predict_multistep: non-finite output at step " + std::to_string(step + 1));
        out.presents.push_back(present_raw);

        window.head(p.dims.n_vlt - block) = window.tail(p.dims.n_vlt - block).eval();
        for (Index k = 0; k < block; ++k)
            window[p.dims.n_vlt - block + k] = present_raw[part.known_idx[static_cast<size_t>(k)]];
    }
    out.final_history = window;
    return out;
}

/// Mean and sample standard deviation of the energy over a normalized
/// dataset, with hidden and label layers at their mean-field activations
/// given the clamped present and history (one alternation: h at a silent
/// label, then l, then h again).
template <typename Scalar>
MeanStd dataset_energy(const ModelParams<Scalar>& p, const std::vector<Sample<Scalar>>& samples) {
    std::vector<double> energies;
    energies.reserve(samples.size());
    LayerState<Scalar> s;
    for (const Sample<Scalar>& smp : samples) {
        s.v = smp.present;
        s.hist = smp.history;
        s.l = VectorX<Scalar>::Zero(p.dims.n_l);
        s.h = VectorX<Scalar>::Zero(p.dims.n_h);
        detail::check_state_dims(p, s, "dataset_energy");
        s.h = hidden_probs(p, s);
        s.l = label_probs(p, s);
        s.h = hidden_probs(p, s);
        energies.push_back(static_cast<double>(energy(p, s)));
    }
    return aggregate(energies);
}

}  // namespace dffw
