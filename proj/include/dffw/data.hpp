#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/sim.hpp"

namespace dffw {

/// One training/evaluation instance: the real-valued present layer, the
/// flattened 2D history window, and a one-hot class label.
template <typename Scalar>
struct Sample {
    VectorX<Scalar> present;  ///< concat(xyz, uv), n_v
    VectorX<Scalar> history;  ///< uv of the last L frames, oldest first, 2L
    VectorX<Scalar> label;    ///< one-hot, n_l
    int traj_id = -1;
    int class_id = -1;
    int frame = -1;           ///< index of the present frame in its trajectory
};

using SampleD = Sample<double>;

/// Window every trajectory into samples: at each time t >= L the present
/// layer holds frame t's (xyz, uv) and the history holds the uv of frames
/// t-L .. t-1, oldest first. Labels are one-hot over n_classes.
inline std::vector<SampleD> build_samples(const std::vector<Trajectory>& trajs, int L, int n_classes) {
    if (L < 1) throw std::invalid_argument("build_samples: history length must be >= 1");
    std::vector<SampleD> out;
    for (size_t ti = 0; ti < trajs.size(); ++ti) {
        const Trajectory& tr = trajs[ti];
        const int n = static_cast<int>(tr.frames.size());
        if (n <= L)
            throw std::invalid_argument("build_samples: trajectory " + std::to_string(ti) +
                                        " has " + std::to_string(n) + " frames, need > " + std::to_string(L));
        if (tr.class_id < 0 || tr.class_id >= n_classes)
            throw std::invalid_argument("build_samples: trajectory " + std::to_string(ti) + " has bad class id");
        for (int t = L; t < n; ++t) {
            SampleD s;
            s.present.resize(5);
            s.present << tr.frames[static_cast<size_t>(t)].xyz, tr.frames[static_cast<size_t>(t)].uv;
            s.history.resize(2 * L);
            for (int k = 0; k < L; ++k)
                s.history.segment<2>(2 * k) = tr.frames[static_cast<size_t>(t - L + k)].uv;
            s.label = VectorX<double>::Zero(n_classes);
            s.label[tr.class_id] = 1.0;
            s.traj_id = static_cast<int>(ti);
            s.class_id = tr.class_id;
            s.frame = t;
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Per-feature z-score statistics over the present block followed by the
/// history block. Zero-variance features keep std 1 and are recorded in
/// `constant_features`.
struct NormStats {
    Eigen::VectorXd mean;  ///< n_v + n_vlt
    Eigen::VectorXd std;   ///< n_v + n_vlt, all > 0
    std::vector<Index> constant_features;

    Index present_dim = 0;

    void validate() const {
        if (mean.size() != std.size() || present_dim < 0 || present_dim > mean.size())
            throw std::invalid_argument("NormStats: inconsistent sizes");
        if ((std.array() <= 0.0).any()) throw std::invalid_argument("NormStats: std must be > 0");
    }
};

inline NormStats fit_normalizer(const std::vector<SampleD>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_normalizer: need at least 2 samples");
    const Index nv = samples.front().present.size();
    const Index nh = samples.front().history.size();
    const Index dim = nv + nh;
    const double n = static_cast<double>(samples.size());

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sumsq = Eigen::VectorXd::Zero(dim);
    for (const SampleD& s : samples) {
        sum.head(nv) += s.present;
        sum.tail(nh) += s.history;
        sumsq.head(nv) += s.present.cwiseAbs2();
        sumsq.tail(nh) += s.history.cwiseAbs2();
    }

    NormStats ns;
    ns.present_dim = nv;
    ns.mean = sum / n;
    ns.std.resize(dim);
    for (Index i = 0; i < dim; ++i) {
        const double var = sumsq[i] / n - ns.mean[i] * ns.mean[i];
        if (var > 0.0) {
            ns.std[i] = std::sqrt(var);
        } else {
            ns.std[i] = 1.0;
            ns.constant_features.push_back(i);
        }
    }
    return ns;
}

inline void apply_normalizer(const NormStats& ns, std::vector<SampleD>& samples) {
    ns.validate();
    for (SampleD& s : samples) {
        if (s.present.size() != ns.present_dim || s.present.size() + s.history.size() != ns.mean.size())
            throw std::invalid_argument("apply_normalizer: sample dims do not match stats");
        s.present = (s.present - ns.mean.head(ns.present_dim)).cwiseQuotient(ns.std.head(ns.present_dim));
        s.history = (s.history - ns.mean.tail(s.history.size())).cwiseQuotient(ns.std.tail(s.history.size()));
    }
}

inline void invert_normalizer(const NormStats& ns, std::vector<SampleD>& samples) {
    ns.validate();
    for (SampleD& s : samples) {
        s.present = s.present.cwiseProduct(ns.std.head(ns.present_dim)) + ns.mean.head(ns.present_dim);
        s.history = s.history.cwiseProduct(ns.std.tail(s.history.size())) + ns.mean.tail(s.history.size());
    }
}

/// One cross-validation split over whole trajectories (never frames).
struct FoldSplit {
    std::vector<int> train;  ///< trajectory indices
    std::vector<int> test;
};

/// Leave-ten-in protocol: fold i trains on trajectory i of every class and
/// tests on all remaining trajectories. Trajectories must be grouped as
/// produced by make_dataset (class-major, equal count per class).
inline std::vector<FoldSplit> kfold_by_trajectory(const std::vector<Trajectory>& trajs, int n_classes,
                                                  int traj_per_class) {
    if (static_cast<int>(trajs.size()) != n_classes * traj_per_class)
        throw std::invalid_argument("kfold_by_trajectory: dataset is not class-major with equal counts");
    if (traj_per_class < 2) throw std::invalid_argument("kfold_by_trajectory: need >= 2 trajectories per class");
    for (int c = 0; c < n_classes; ++c)
        for (int j = 0; j < traj_per_class; ++j)
            if (trajs[static_cast<size_t>(c * traj_per_class + j)].class_id != c)
                throw std::invalid_argument("kfold_by_trajectory: trajectory order is not class-major");

    std::vector<FoldSplit> folds(static_cast<size_t>(traj_per_class));
    for (int i = 0; i < traj_per_class; ++i) {
        FoldSplit& f = folds[static_cast<size_t>(i)];
        for (int c = 0; c < n_classes; ++c)
            for (int j = 0; j < traj_per_class; ++j) {
                const int idx = c * traj_per_class + j;
                (j == i ? f.train : f.test).push_back(idx);
            }
    }
    return folds;
}

/// Subset of samples whose trajectory is listed in `traj_ids`.
inline std::vector<SampleD> select_samples(const std::vector<SampleD>& samples, const std::vector<int>& traj_ids) {
    std::vector<SampleD> out;
    for (const SampleD& s : samples)
        for (int id : traj_ids)
            if (s.traj_id == id) {
                out.push_back(s);
                break;
            }
    return out;
}

// CSV serialization (see data_io.cpp). All numbers are written with
// shortest-round-trip formatting, so identical inputs give identical bytes.
void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs, long id_offset = 0);
std::vector<Trajectory> read_trajectories(const std::string& path);
void write_normstats(const std::string& path, const NormStats& ns);
NormStats read_normstats(const std::string& path, Index present_dim);

}  // namespace dffw
