#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dffw/checkpoint.hpp"
#include "dffw/config.hpp"
#include "dffw/data.hpp"
#include "dffw/infer.hpp"
#include "dffw/metrics.hpp"
#include "dffw/train.hpp"

namespace dffw {

/// Run independent jobs on `threads` workers (inline when threads <= 1).
/// Callers keep determinism by writing results into per-job slots.
void run_parallel(std::vector<std::function<void()>> jobs, int threads);

/// Class count and trajectories-per-class of a class-major dataset.
std::pair<int, int> dataset_shape(const std::vector<Trajectory>& trajs);

/// Train one cross-validation fold: fit the normalizer on the fold's training
/// trajectories, train the configured model, and return a ready checkpoint.
/// Fold f derives its init and train seeds from the configured ones by
/// offsetting with f.
ModelCheckpoint train_fold(const RunConfig& rc, const std::vector<Trajectory>& trajs, int fold,
                           std::vector<EpochStats>* log = nullptr);

/// Per-fold evaluation outcomes (classification plus per-trajectory-averaged
/// estimation and rollout metrics).
struct FoldEval {
    int fold = -1;
    double accuracy = 0.0;
    double est_nrmse = 0.0;
    double est_pcc = 0.0;
    double est_pvalue = 0.0;
    std::vector<std::pair<long, std::pair<double, double>>> horizon_nrmse_pcc;
};

/// Evaluate a trained checkpoint on its fold's held-out trajectories: label
/// classification over every test sample, present-step 3D estimation with the
/// 2D units clamped (label inferred, so classification and estimation run
/// jointly), and autonomous rollouts at each requested horizon. Estimation
/// and rollout metrics are computed per test trajectory, then averaged.
FoldEval evaluate_fold(const ModelCheckpoint& ck, const RunConfig& rc, const std::vector<Trajectory>& trajs);

struct EvalRow {
    std::string task;
    std::string metric;
    MeanStd stats;
};

/// Mean and sample std across folds, one row per (task, metric).
std::vector<EvalRow> aggregate_evals(const std::vector<FoldEval>& folds, const std::vector<long>& horizons);

struct SweepCell {
    std::string model;
    long n_h = 0;
    long n_f = 0;
    MeanStd energy;
    bool ok = false;
    std::string error;
};

/// Train every (model, n_h, n_f) grid point from scratch on the configured
/// fold's training split and measure the mean dataset energy over all
/// samples. Cell failures are recorded and the sweep continues. Row order is
/// fixed (model, then n_h, then n_f) regardless of thread count.
std::vector<SweepCell> run_sweep(const RunConfig& rc, const std::vector<Trajectory>& trajs);

void write_epoch_log(const std::string& path, const std::vector<EpochStats>& log);
void write_eval_report(const std::string& path, const std::vector<EvalRow>& rows);
void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells);

}  // namespace dffw
