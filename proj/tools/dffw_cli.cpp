#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "dffw/checkpoint.hpp"
#include "dffw/config.hpp"
#include "dffw/data.hpp"
#include "dffw/harness.hpp"
#include "dffw/infer.hpp"
#include "dffw/sim.hpp"
#include "dffw/textio.hpp"

namespace fs = std::filesystem;

namespace {

/// Flags shared by every subcommand. Option pointers remember whether a flag
/// was actually given so config-file values survive when it was not.
struct CommonFlags {
    std::string config;
    std::string data;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 1;
    int fold = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* fold_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_data) {
    cmd->add_option("--config", f.config, "run configuration file, flat key=value lines")
        ->check(CLI::ExistingFile);
    f.seed_opt = cmd->add_option("--seed", f.seed, "override sim.seed, model.init_seed and train.seed");
    cmd->add_option("--out", f.out, "output directory (overrides out.dir)");
    f.threads_opt = cmd->add_option("--threads", f.threads, "worker threads (overrides threads)");
    if (with_data)
        cmd->add_option("--data", f.data, "dataset: trajectory CSV or manifest.txt (overrides data.path)")
            ->check(CLI::ExistingFile);
}

dffw::RunConfig load_run_config(const CommonFlags& f) {
    dffw::RunConfig rc =
        f.config.empty() ? dffw::RunConfig{} : dffw::run_config_from(dffw::parse_config_file(f.config));
    if (f.seed_opt->count() > 0) {
        rc.sim.seed = f.seed;
        rc.init_seed = f.seed;
        rc.train.seed = f.seed;
    }
    if (!f.out.empty()) rc.out_dir = f.out;
    if (!f.data.empty()) rc.data_path = f.data;
    if (f.threads_opt->count() > 0) rc.threads = f.threads;
    if (f.fold_opt != nullptr && f.fold_opt->count() > 0) rc.fold = f.fold;
    rc.validate();
    return rc;
}

fs::path ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("cannot create output directory " + dir);
    return {dir};
}

/// Accepts either a raw trajectory CSV or a generation manifest whose file.N
/// entries are read relative to the manifest's directory.
std::vector<dffw::Trajectory> load_dataset(const std::string& path) {
    if (path.empty()) throw std::invalid_argument("no dataset given (set data.path or pass --data)");
    std::string first;
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw std::runtime_error("cannot open dataset " + path);
        std::getline(probe, first);
    }
    if (dffw::trim(first) == "traj_id,class_id,frame,x,y,z,u,v") return dffw::read_trajectories(path);

    const dffw::KeyValues kv = dffw::parse_config_file(path);
    if (dffw::get_string(kv, "kind", "") != "dataset-manifest")
        throw std::runtime_error("dataset " + path + " is neither a trajectory CSV nor a dataset manifest");
    const fs::path dir = fs::path(path).parent_path();
    std::vector<dffw::Trajectory> all;
    for (int i = 0; kv.count("file." + std::to_string(i)) > 0; ++i) {
        std::vector<dffw::Trajectory> part =
            dffw::read_trajectories((dir / kv.at("file." + std::to_string(i))).string());
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (all.empty()) throw std::runtime_error("manifest " + path + " lists no trajectory files");
    dffw::dataset_shape(all);
    return all;
}

/// The manifest pairs the trajectory listing with the effective generation
/// keys so a run is reproducible from this one file.
void write_manifest(const fs::path& path, const dffw::RunConfig& rc, const std::vector<dffw::Trajectory>& trajs,
                    const std::vector<std::string>& files) {
    using dffw::format_double;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    os << "kind=dataset-manifest\n";
    os << "seed=" << rc.sim.seed << '\n';
    os << "classes=" << rc.sim.num_classes() << '\n';
    os << "sim.seed=" << rc.sim.seed << '\n';
    os << "sim.gravity=" << format_double(rc.sim.gravity) << '\n';
    os << "sim.drag=" << format_double(rc.sim.drag_coeff) << '\n';
    os << "sim.magnus=" << format_double(rc.sim.magnus_coeff) << '\n';
    os << "sim.dt=" << format_double(rc.sim.dt) << '\n';
    os << "sim.frames=" << rc.sim.frames << '\n';
    os << "sim.traj_per_class=" << rc.sim.traj_per_class << '\n';
    os << "sim.speed_min=" << format_double(rc.sim.speed_min) << '\n';
    os << "sim.speed_max=" << format_double(rc.sim.speed_max) << '\n';
    os << "sim.elev_min=" << format_double(rc.sim.elev_min_deg) << '\n';
    os << "sim.elev_max=" << format_double(rc.sim.elev_max_deg) << '\n';
    os << "sim.azim_min=" << format_double(rc.sim.azim_min_deg) << '\n';
    os << "sim.azim_max=" << format_double(rc.sim.azim_max_deg) << '\n';
    os << "sim.spin_magnitude=" << format_double(rc.sim.spin_classes.front().norm()) << '\n';
    os << "data.history=" << rc.history_frames << '\n';
    for (size_t i = 0; i < files.size(); ++i) os << "file." << i << '=' << files[i] << '\n';
    for (size_t t = 0; t < trajs.size(); ++t)
        os << "traj." << t << '=' << trajs[t].class_id << ',' << trajs[t].frames.size() << '\n';
    if (!os.flush()) throw std::runtime_error("write failed for " + path.string());
}

int cmd_generate(const CommonFlags& f) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const std::vector<dffw::Trajectory> trajs = dffw::make_dataset(rc.sim, rc.history_frames + 1);
    const auto [n_classes, per_class] = dffw::dataset_shape(trajs);

    std::vector<std::string> files;
    long rows = 0;
    for (int c = 0; c < n_classes; ++c) {
        const std::string name = "class_" + std::to_string(c) + ".csv";
        const std::vector<dffw::Trajectory> sub(trajs.begin() + c * per_class,
                                                trajs.begin() + (c + 1) * per_class);
        dffw::write_trajectories((out / name).string(), sub, static_cast<long>(c) * per_class);
        for (const dffw::Trajectory& tr : sub) rows += static_cast<long>(tr.frames.size());
        files.push_back(name);
    }
    write_manifest(out / "manifest.txt", rc, trajs, files);
    std::cout << "wrote " << (out / "manifest.txt").string() << " (" << trajs.size() << " trajectories, "
              << rows << " rows)\n";
    return 0;
}

int cmd_train(const CommonFlags& f) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const std::vector<dffw::Trajectory> trajs = load_dataset(rc.data_path);

    std::vector<dffw::EpochStats> log;
    const dffw::ModelCheckpoint ck = dffw::train_fold(rc, trajs, rc.fold, &log);
    const std::string stem = rc.model_kind + "_fold" + std::to_string(rc.fold);
    const fs::path ck_path = out / (stem + ".ckpt");
    const fs::path log_path = out / (stem + "_log.csv");
    dffw::save_checkpoint(ck_path.string(), ck);
    dffw::write_epoch_log(log_path.string(), log);
    std::cout << "wrote " << ck_path.string() << " and " << log_path.string() << '\n';
    return 0;
}

int cmd_evaluate(const CommonFlags& f, const std::vector<std::string>& models) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const std::vector<dffw::Trajectory> trajs = load_dataset(rc.data_path);

    std::vector<dffw::FoldEval> evals(models.size());
    std::vector<std::string> errors(models.size());
    std::vector<std::function<void()>> jobs;
    for (size_t i = 0; i < models.size(); ++i)
        jobs.emplace_back([&, i]() {
            try {
                evals[i] = dffw::evaluate_fold(dffw::load_checkpoint(models[i]), rc, trajs);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
    dffw::run_parallel(std::move(jobs), rc.threads);
    for (size_t i = 0; i < models.size(); ++i)
        if (!errors[i].empty()) throw std::runtime_error(models[i] + ": " + errors[i]);

    const std::vector<dffw::EvalRow> rows = dffw::aggregate_evals(evals, rc.horizons);
    const fs::path report = out / "eval_report.csv";
    dffw::write_eval_report(report.string(), rows);
    std::cout << "task,metric,mean,std,n\n";
    for (const dffw::EvalRow& r : rows)
        std::cout << r.task << ',' << r.metric << ',' << dffw::format_double(r.stats.mean) << ','
                  << dffw::format_double(r.stats.std) << ',' << r.stats.n << '\n';
    std::cout << "wrote " << report.string() << '\n';
    return 0;
}

int cmd_classify(const CommonFlags& f, const std::string& model, int traj, int frame) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const dffw::ModelCheckpoint ck = dffw::load_checkpoint(model);
    const dffw::ModelParams<double>& p = ck.params;
    const std::vector<dffw::Trajectory> trajs = load_dataset(rc.data_path);
    if (traj < 0 || traj >= static_cast<int>(trajs.size()))
        throw std::invalid_argument("trajectory index " + std::to_string(traj) + " out of range (dataset has " +
                                    std::to_string(trajs.size()) + ")");

    const int L = static_cast<int>(p.dims.n_vlt / 2);
    std::vector<dffw::SampleD> samples =
        dffw::build_samples({trajs[static_cast<size_t>(traj)]}, L, static_cast<int>(p.dims.n_l));
    dffw::apply_normalizer(ck.norm, samples);

    const dffw::VisiblePartition part = dffw::VisiblePartition::balls();
    part.validate(p.dims.n_v);
    dffw::Rng rng(0);

    const fs::path csv = out / "classify.csv";
    std::ofstream os(csv, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + csv.string());
    os << "traj_id,frame,true_class,pred_class";
    for (dffw::Index j = 0; j < p.dims.n_l; ++j) os << ",p" << j;
    os << '\n';

    long written = 0;
    Eigen::VectorXd v_obs(p.dims.n_v);
    for (const dffw::SampleD& s : samples) {
        if (frame >= 0 && s.frame != frame) continue;
        v_obs.setZero();
        for (const dffw::Index k : part.known_idx) v_obs[k] = s.present[k];
        const auto [cls, probs] = dffw::classify(p, v_obs, s.history, rc.gibbs_steps, rng);
        os << traj << ',' << s.frame << ',' << s.class_id << ',' << cls;
        for (dffw::Index j = 0; j < probs.size(); ++j) os << ',' << dffw::format_double(probs[j]);
        os << '\n';
        ++written;
    }
    if (written == 0)
        throw std::invalid_argument("no sample at frame " + std::to_string(frame) + " (first usable frame is " +
                                    std::to_string(L) + ")");
    if (!os.flush()) throw std::runtime_error("write failed for " + csv.string());
    std::cout << "wrote " << csv.string() << " (" << written << " rows)\n";
    return 0;
}

int cmd_predict(const CommonFlags& f, const std::string& model, int traj, int start, int steps, int label) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const dffw::ModelCheckpoint ck = dffw::load_checkpoint(model);
    const dffw::ModelParams<double>& p = ck.params;
    const std::vector<dffw::Trajectory> trajs = load_dataset(rc.data_path);
    if (traj < 0 || traj >= static_cast<int>(trajs.size()))
        throw std::invalid_argument("trajectory index " + std::to_string(traj) + " out of range (dataset has " +
                                    std::to_string(trajs.size()) + ")");
    const dffw::Trajectory& tr = trajs[static_cast<size_t>(traj)];

    const int L = static_cast<int>(p.dims.n_vlt / 2);
    const int len = static_cast<int>(tr.frames.size());
    if (start < 0) start = L;
    if (start < L || start > len)
        throw std::invalid_argument("start frame must be in [" + std::to_string(L) + ", " + std::to_string(len) +
                                    "], got " + std::to_string(start));

    Eigen::VectorXd window(p.dims.n_vlt);
    for (int k = 0; k < L; ++k) {
        window[2 * k] = tr.frames[static_cast<size_t>(start - L + k)].uv.x();
        window[2 * k + 1] = tr.frames[static_cast<size_t>(start - L + k)].uv.y();
    }

    const dffw::VisiblePartition part = dffw::VisiblePartition::balls();
    part.validate(p.dims.n_v);
    dffw::Rng rng(0);

    Eigen::VectorXd onehot = Eigen::VectorXd::Zero(p.dims.n_l);
    if (label >= 0) {
        if (label >= static_cast<int>(p.dims.n_l))
            throw std::invalid_argument("label " + std::to_string(label) + " out of range (model has " +
                                        std::to_string(p.dims.n_l) + " classes)");
        onehot[label] = 1.0;
    } else {
        const Eigen::VectorXd hist_norm = (window - ck.norm.mean.tail(p.dims.n_vlt))
                                              .cwiseQuotient(ck.norm.std.tail(p.dims.n_vlt));
        const auto [cls, probs] =
            dffw::classify(p, Eigen::VectorXd::Zero(p.dims.n_v).eval(), hist_norm, rc.gibbs_steps, rng);
        (void)probs;
        onehot[cls] = 1.0;
    }

    const dffw::MultistepResult<double> ms =
        dffw::predict_multistep(p, ck.norm, window, onehot, steps, part, rc.gibbs_steps, rng);

    const fs::path csv = out / "predict.csv";
    std::ofstream os(csv, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + csv.string());
    os << "step,frame,x,y,z,u,v\n";
    for (size_t i = 0; i < ms.presents.size(); ++i) {
        os << (i + 1) << ',' << (start + static_cast<long>(i));
        for (dffw::Index d = 0; d < ms.presents[i].size(); ++d) os << ',' << dffw::format_double(ms.presents[i][d]);
        os << '\n';
    }
    if (!os.flush()) throw std::runtime_error("write failed for " + csv.string());
    std::cout << "wrote " << csv.string() << " (" << ms.presents.size() << " steps)\n";
    return 0;
}

int cmd_sweep(const CommonFlags& f) {
    const dffw::RunConfig rc = load_run_config(f);
    const fs::path out = ensure_out_dir(rc.out_dir);
    const std::vector<dffw::Trajectory> trajs = load_dataset(rc.data_path);

    const std::vector<dffw::SweepCell> cells = dffw::run_sweep(rc, trajs);
    const fs::path csv = out / "sweep.csv";
    dffw::write_sweep_csv(csv.string(), cells);

    long failed = 0;
    for (const dffw::SweepCell& c : cells)
        if (!c.ok) {
            ++failed;
            std::cerr << "warning: cell " << c.model << " n_h=" << c.n_h << " n_f=" << c.n_f << " failed: "
                      << c.error << '\n';
        }
    std::cout << "wrote " << csv.string() << " (" << cells.size() << " cells, " << failed << " failed)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"factored four-way conditional RBM toolkit: trajectory data, training, inference, evaluation"};
    app.require_subcommand(1);

    CommonFlags gen_f, train_f, eval_f, cls_f, pred_f, sweep_f;

    CLI::App* gen = app.add_subcommand("generate", "simulate ball trajectories and write per-class CSVs");
    add_common(gen, gen_f, false);

    CLI::App* train = app.add_subcommand("train", "train one model on one fold, write checkpoint and epoch log");
    add_common(train, train_f, true);
    train_f.fold_opt = train->add_option("--fold", train_f.fold, "cross-validation fold (overrides train.fold)");

    std::vector<std::string> eval_models;
    CLI::App* eval = app.add_subcommand("evaluate", "evaluate checkpoints on their folds, write aggregate report");
    add_common(eval, eval_f, true);
    eval->add_option("--model", eval_models, "checkpoint file (repeat for cross-fold aggregation)")
        ->required()
        ->check(CLI::ExistingFile);

    std::string cls_model;
    int cls_traj = 0, cls_frame = -1;
    CLI::App* cls = app.add_subcommand("classify", "classify samples of one trajectory from 2D and history");
    add_common(cls, cls_f, true);
    cls->add_option("--model", cls_model, "checkpoint file")->required()->check(CLI::ExistingFile);
    cls->add_option("--traj", cls_traj, "trajectory index")->required();
    cls->add_option("--frame", cls_frame, "single present-frame index (default: all frames)");

    std::string pred_model;
    int pred_traj = 0, pred_start = -1, pred_steps = 50, pred_label = -1;
    CLI::App* pred = app.add_subcommand("predict", "roll the model forward from a seed window");
    add_common(pred, pred_f, true);
    pred->add_option("--model", pred_model, "checkpoint file")->required()->check(CLI::ExistingFile);
    pred->add_option("--traj", pred_traj, "trajectory index")->required();
    pred->add_option("--start", pred_start, "first predicted frame index (default: end of first window)");
    pred->add_option("--steps", pred_steps, "number of steps to predict")->check(CLI::PositiveNumber);
    pred->add_option("--label", pred_label, "clamp this class id (default: classify the seed window)");

    CLI::App* sweep = app.add_subcommand("sweep", "train a (model, hidden, factors) grid and record energies");
    add_common(sweep, sweep_f, true);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_generate(gen_f);
        if (train->parsed()) return cmd_train(train_f);
        if (eval->parsed()) return cmd_evaluate(eval_f, eval_models);
        if (cls->parsed()) return cmd_classify(cls_f, cls_model, cls_traj, cls_frame);
        if (pred->parsed()) return cmd_predict(pred_f, pred_model, pred_traj, pred_start, pred_steps, pred_label);
        if (sweep->parsed()) return cmd_sweep(sweep_f);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.get_exit_code() != 0 ? e.get_exit_code() : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
