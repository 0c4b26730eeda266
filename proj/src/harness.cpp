#include "dffw/harness.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include "dffw/textio.hpp"

namespace dffw {

void run_parallel(std::vector<std::function<void()>> jobs, int threads) {
    if (threads <= 1 || jobs.size() <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<size_t> next{0};
    const size_t workers = std::min<size_t>(static_cast<size_t>(threads), jobs.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                jobs[i]();
            }
        });
    for (std::thread& t : pool) t.join();
}

std::pair<int, int> dataset_shape(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw std::invalid_argument("dataset_shape: empty dataset");
    int n_classes = 0;
    for (const Trajectory& t : trajs) n_classes = std::max(n_classes, t.class_id + 1);
    if (trajs.size() % static_cast<size_t>(n_classes) != 0)
        throw std::invalid_argument("dataset_shape: class counts are unequal");
    const int per_class = static_cast<int>(trajs.size()) / n_classes;
    for (int c = 0; c < n_classes; ++c)
        for (int j = 0; j < per_class; ++j)
            if (trajs[static_cast<size_t>(c * per_class + j)].class_id != c)
                throw std::invalid_argument("dataset_shape: dataset is not class-major");
    return {n_classes, per_class};
}

namespace {

LayerDims dims_for(const RunConfig& rc, int n_classes) {
    LayerDims d = rc.dims();
    d.n_l = n_classes;
    return d;
}

}  // namespace

ModelCheckpoint train_fold(const RunConfig& rc, const std::vector<Trajectory>& trajs, int fold,
                           std::vector<EpochStats>* log) {
    const auto [n_classes, per_class] = dataset_shape(trajs);
    if (fold < 0 || fold >= per_class)
        throw std::invalid_argument("train_fold: fold " + std::to_string(fold) + " out of range (have " +
                                    std::to_string(per_class) + " trajectories per class)");
    const LayerDims dims = dims_for(rc, n_classes);

    const std::vector<FoldSplit> folds = kfold_by_trajectory(trajs, n_classes, per_class);
    std::vector<SampleD> samples = build_samples(trajs, rc.history_frames, n_classes);
    std::vector<SampleD> train_set = select_samples(samples, folds[static_cast<size_t>(fold)].train);

    ModelCheckpoint ck;
    ck.kind = rc.model_kind;
    ck.fold = fold;
    ck.init_seed = rc.init_seed + static_cast<std::uint64_t>(fold);
    ck.init_std = rc.init_std;
    ck.train_cfg = rc.train;
    ck.train_cfg.seed = rc.train.seed + static_cast<std::uint64_t>(fold);
    ck.norm = fit_normalizer(train_set);
    apply_normalizer(ck.norm, train_set);

    ck.params = init_params<double>(dims, ck.init_seed, rc.init_std);
    std::vector<EpochStats> stats = rc.model_kind == "ffw" ? train_ffw(ck.params, train_set, ck.train_cfg)
                                                           : train(ck.params, train_set, ck.train_cfg);
    if (log) *log = std::move(stats);
    return ck;
}

namespace {

Eigen::MatrixXd to_series(const std::vector<Eigen::VectorXd>& rows) {
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Index>(i)) = rows[i];
    return m;
}

}  // namespace

FoldEval evaluate_fold(const ModelCheckpoint& ck, const RunConfig& rc, const std::vector<Trajectory>& trajs) {
    const auto [n_classes, per_class] = dataset_shape(trajs);
    if (ck.params.dims.n_l != n_classes)
        throw std::invalid_argument("evaluate_fold: checkpoint has " + std::to_string(ck.params.dims.n_l) +
                                    " label units, dataset has " + std::to_string(n_classes) + " classes");
    if (ck.fold < 0 || ck.fold >= per_class)
        throw std::invalid_argument("evaluate_fold: checkpoint fold out of range for this dataset");
    const int L = static_cast<int>(ck.params.dims.n_vlt / 2);
    const VisiblePartition part = VisiblePartition::balls();
    const ModelParams<double>& p = ck.params;
    Rng rng = Rng::derive(ck.train_cfg.seed, 0x6576);

    const std::vector<FoldSplit> folds = kfold_by_trajectory(trajs, n_classes, per_class);
    const FoldSplit& split = folds[static_cast<size_t>(ck.fold)];

    FoldEval ev;
    ev.fold = ck.fold;
    for (long h : rc.horizons) ev.horizon_nrmse_pcc.push_back({h, {0.0, 0.0}});

    long cls_hits = 0, cls_total = 0;
    int traj_count = 0;
    for (int ti : split.test) {
        const Trajectory& tr = trajs[static_cast<size_t>(ti)];
        std::vector<SampleD> raw = build_samples({tr}, L, n_classes);
        std::vector<SampleD> norm = raw;
        apply_normalizer(ck.norm, norm);

        // Joint classification + present-step estimation over every sample.
        std::vector<Eigen::VectorXd> pred_xyz, true_xyz;
        pred_xyz.reserve(norm.size());
        true_xyz.reserve(norm.size());
        for (size_t si = 0; si < norm.size(); ++si) {
            const SampleD& s = norm[si];
            Eigen::VectorXd v_obs = Eigen::VectorXd::Zero(p.dims.n_v);
            Eigen::VectorXd obs2d(static_cast<Index>(part.known_idx.size()));
            for (size_t k = 0; k < part.known_idx.size(); ++k) {
                v_obs[part.known_idx[k]] = s.present[part.known_idx[k]];
                obs2d[static_cast<Index>(k)] = s.present[part.known_idx[k]];
            }
            const auto [cls, probs] = classify(p, v_obs, s.history, rc.gibbs_steps, rng);
            (void)probs;
            cls_hits += (cls == tr.class_id) ? 1 : 0;
            ++cls_total;

            Eigen::VectorXd onehot = Eigen::VectorXd::Zero(p.dims.n_l);
            onehot[cls] = 1.0;
            const Eigen::VectorXd est = estimate_present(p, obs2d, s.history, &onehot, part, rc.gibbs_steps, rng);
            Eigen::VectorXd est_raw =
                est.cwiseProduct(ck.norm.std.head(p.dims.n_v)) + ck.norm.mean.head(p.dims.n_v);
            Eigen::VectorXd xyz(static_cast<Index>(part.unknown_idx.size()));
            Eigen::VectorXd xyz_true(static_cast<Index>(part.unknown_idx.size()));
            for (size_t k = 0; k < part.unknown_idx.size(); ++k) {
                xyz[static_cast<Index>(k)] = est_raw[part.unknown_idx[k]];
                xyz_true[static_cast<Index>(k)] = raw[si].present[part.unknown_idx[k]];
            }
            pred_xyz.push_back(std::move(xyz));
            true_xyz.push_back(std::move(xyz_true));
        }
        const Eigen::MatrixXd pred_m = to_series(pred_xyz), true_m = to_series(true_xyz);
        const double traj_pcc = pcc(pred_m, true_m);
        ev.est_nrmse += nrmse(pred_m, true_m);
        ev.est_pcc += traj_pcc;
        ev.est_pvalue += pcc_pvalue(std::clamp(traj_pcc, -1.0, 1.0), pred_m.rows());

        // Autonomous rollouts at each horizon, evenly spaced start frames.
        for (auto& [h, acc] : ev.horizon_nrmse_pcc) {
            const int len = static_cast<int>(tr.frames.size());
            const int hi = static_cast<int>(h);
            const int span = len - L - hi + 1;
            if (span < 1)
                throw std::invalid_argument("evaluate_fold: trajectory " + std::to_string(ti) + " too short for horizon " +
                                            std::to_string(hi));
            const int count = std::min(rc.rollouts_per_traj, span);
            std::vector<Eigen::VectorXd> roll_pred, roll_true;
            for (int r = 0; r < count; ++r) {
                const int t0 = L + (span > 1 ? r * (span - 1) / std::max(count - 1, 1) : 0);
                if (t0 + hi > len) continue;
                Eigen::VectorXd window(p.dims.n_vlt);
                for (int k = 0; k < L; ++k) {
                    window[2 * k] = tr.frames[static_cast<size_t>(t0 - L + k)].uv.x();
                    window[2 * k + 1] = tr.frames[static_cast<size_t>(t0 - L + k)].uv.y();
                }
                const Eigen::VectorXd win_norm = (window - ck.norm.mean.tail(p.dims.n_vlt))
                                                     .cwiseQuotient(ck.norm.std.tail(p.dims.n_vlt));
                const auto [cls, probs] =
                    classify(p, Eigen::VectorXd::Zero(p.dims.n_v).eval(), win_norm, rc.gibbs_steps, rng);
                (void)probs;
                Eigen::VectorXd onehot = Eigen::VectorXd::Zero(p.dims.n_l);
                onehot[cls] = 1.0;
                const MultistepResult<double> ms =
                    predict_multistep(p, ck.norm, window, onehot, hi, part, rc.gibbs_steps, rng);
                for (int k = 0; k < hi; ++k) {
                    Eigen::VectorXd xyz(static_cast<Index>(part.unknown_idx.size()));
                    Eigen::VectorXd xyz_true(static_cast<Index>(part.unknown_idx.size()));
                    for (size_t q = 0; q < part.unknown_idx.size(); ++q) {
                        xyz[static_cast<Index>(q)] = ms.presents[static_cast<size_t>(k)][part.unknown_idx[q]];
                        xyz_true[static_cast<Index>(q)] =
                            tr.frames[static_cast<size_t>(t0 + k)].xyz[static_cast<Index>(q)];
                    }
                    roll_pred.push_back(std::move(xyz));
                    roll_true.push_back(std::move(xyz_true));
                }
            }
            const Eigen::MatrixXd rp = to_series(roll_pred), rt = to_series(roll_true);
            acc.first += nrmse(rp, rt);
            acc.second += pcc(rp, rt);
        }
        ++traj_count;
    }

    ev.accuracy = 100.0 * double(cls_hits) / double(cls_total);
    ev.est_nrmse /= traj_count;
    ev.est_pcc /= traj_count;
    ev.est_pvalue /= traj_count;
    for (auto& [h, acc] : ev.horizon_nrmse_pcc) {
        (void)h;
        acc.first /= traj_count;
        acc.second /= traj_count;
    }
    return ev;
}

std::vector<EvalRow> aggregate_evals(const std::vector<FoldEval>& folds, const std::vector<long>& horizons) {
    if (folds.empty()) throw std::invalid_argument("aggregate_evals: no fold results");
    auto collect = [&](const std::function<double(const FoldEval&)>& get) {
        std::vector<double> xs;
        xs.reserve(folds.size());
        for (const FoldEval& f : folds) xs.push_back(get(f));
        return aggregate(xs);
    };

    std::vector<EvalRow> rows;
    rows.push_back({"classification", "accuracy", collect([](const FoldEval& f) { return f.accuracy; })});
    rows.push_back({"estimation", "nrmse", collect([](const FoldEval& f) { return f.est_nrmse; })});
    rows.push_back({"estimation", "pcc", collect([](const FoldEval& f) { return f.est_pcc; })});
    rows.push_back({"estimation", "pvalue", collect([](const FoldEval& f) { return f.est_pvalue; })});
    for (size_t hi = 0; hi < horizons.size(); ++hi) {
        const std::string task = "prediction_h" + std::to_string(horizons[hi]);
        rows.push_back({task, "nrmse", collect([hi](const FoldEval& f) { return f.horizon_nrmse_pcc[hi].second.first; })});
        rows.push_back({task, "pcc", collect([hi](const FoldEval& f) { return f.horizon_nrmse_pcc[hi].second.second; })});
    }
    return rows;
}

std::vector<SweepCell> run_sweep(const RunConfig& rc, const std::vector<Trajectory>& trajs) {
    const auto [n_classes, per_class] = dataset_shape(trajs);
    const std::vector<FoldSplit> folds = kfold_by_trajectory(trajs, n_classes, per_class);
    if (rc.fold < 0 || rc.fold >= per_class) throw std::invalid_argument("run_sweep: fold out of range");
    const std::vector<SampleD> all_samples = build_samples(trajs, rc.history_frames, n_classes);
    const std::vector<SampleD> train_raw = select_samples(all_samples, folds[static_cast<size_t>(rc.fold)].train);

    std::vector<SweepCell> cells;
    for (const char* kind : {"dffw", "ffw"})
        for (long nh : rc.sweep_hidden)
            for (long nf : rc.sweep_factors) {
                SweepCell c;
                c.model = kind;
                c.n_h = nh;
                c.n_f = nf;
                cells.push_back(c);
            }

    std::vector<std::function<void()>> jobs;
    jobs.reserve(cells.size());
    for (SweepCell& cell : cells)
        jobs.push_back([&cell, &rc, &train_raw, &all_samples, n_classes]() {
            try {
                LayerDims d;
                d.n_v = 5;
                d.n_h = cell.n_h;
                d.n_vlt = 2 * static_cast<Index>(rc.history_frames);
                d.n_l = n_classes;
                d.n_f1 = cell.n_f;
                d.n_f2 = cell.model == "ffw" ? 0 : cell.n_f;

                std::vector<SampleD> train_set = train_raw;
                NormStats norm = fit_normalizer(train_set);
                apply_normalizer(norm, train_set);

                TrainConfig cfg = rc.train;
                cfg.epochs = rc.sweep_epochs;
                ModelParams<double> params = init_params<double>(d, rc.init_seed, rc.init_std);
                if (cell.model == "ffw")
                    train_ffw(params, train_set, cfg);
                else
                    train(params, train_set, cfg);

                std::vector<SampleD> everything = all_samples;
                apply_normalizer(norm, everything);
                cell.energy = dataset_energy(params, everything);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
                cell.energy = MeanStd{std::nan(""), std::nan(""), 0};
            }
        });
    run_parallel(std::move(jobs), rc.threads);
    return cells;
}

void write_epoch_log(const std::string& path, const std::vector<EpochStats>& log) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_epoch_log: cannot open " + path);
    os << "epoch,mean_recon_v,mean_recon_l,mean_energy\n";
    for (const EpochStats& e : log)
        os << e.epoch << ',' << format_double(e.mean_recon_v) << ',' << format_double(e.mean_recon_l) << ','
           << format_double(e.mean_energy) << '\n';
    if (!os.flush()) throw std::runtime_error("write_epoch_log: write failed for " + path);
}

void write_eval_report(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_eval_report: cannot open " + path);
    os << "task,metric,mean,std,n\n";
    for (const EvalRow& r : rows)
        os << r.task << ',' << r.metric << ',' << format_double(r.stats.mean) << ',' << format_double(r.stats.std)
           << ',' << r.stats.n << '\n';
    if (!os.flush()) throw std::runtime_error("write_eval_report: write failed for " + path);
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_sweep_csv: cannot open " + path);
    os << "model,n_h,n_f,energy_mean,energy_std\n";
    for (const SweepCell& c : cells)
        os << c.model << ',' << c.n_h << ',' << c.n_f << ',' << format_double(c.energy.mean) << ','
           << format_double(c.energy.std) << '\n';
    if (!os.flush()) throw std::runtime_error("write_sweep_csv: write failed for " + path);
}

}  // namespace dffw
