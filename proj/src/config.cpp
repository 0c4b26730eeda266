#include "dffw/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dffw/textio.hpp"

namespace dffw {

KeyValues parse_config_text(const std::string& text) {
    KeyValues kv;
    std::istringstream is(text);
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string_view t = trim(line);
        const size_t hash = t.find('#');
        if (hash != std::string_view::npos) t = trim(t.substr(0, hash));
        if (t.empty()) continue;
        const size_t eq = t.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                                        std::string(t) + "'");
        const std::string key(trim(t.substr(0, eq)));
        const std::string value(trim(t.substr(eq + 1)));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

KeyValues parse_config_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

double get_double(const KeyValues& kv, const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_double(it->second);
}

long get_int(const KeyValues& kv, const std::string& key, long fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_int(it->second);
}

std::uint64_t get_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_u64(it->second);
}

std::string get_string(const KeyValues& kv, const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::vector<long> get_int_list(const KeyValues& kv, const std::string& key, const std::vector<long>& fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<long> out;
    for (const std::string& part : split(it->second, ','))
        if (!trim(part).empty()) out.push_back(parse_int(trim(part)));
    if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
    return out;
}

void RunConfig::validate() const {
    if (model_kind != "dffw" && model_kind != "ffw")
        throw std::invalid_argument("config: model.kind must be dffw or ffw");
    if (hidden < 1 || factors < 1) throw std::invalid_argument("config: model.hidden and model.factors must be >= 1");
    if (history_frames < 1) throw std::invalid_argument("config: data.history must be >= 1");
    if (gibbs_steps < 1) throw std::invalid_argument("config: eval.gibbs must be >= 1");
    if (rollouts_per_traj < 3)
        throw std::invalid_argument("config: eval.rollouts_per_traj must be >= 3 (correlation needs 3 points)");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (fold < 0) throw std::invalid_argument("config: train.fold must be >= 0");
    for (long h : horizons)
        if (h < 1) throw std::invalid_argument("config: eval.horizons entries must be >= 1");
    for (long v : sweep_hidden)
        if (v < 1) throw std::invalid_argument("config: sweep.hidden entries must be >= 1");
    for (long v : sweep_factors)
        if (v < 1) throw std::invalid_argument("config: sweep.factors entries must be >= 1");
    if (sweep_epochs < 1) throw std::invalid_argument("config: sweep.epochs must be >= 1");
    train.validate();
    sim.validate(history_frames + 2);
    dims().validate();
}

RunConfig run_config_from(const KeyValues& kv) {
    static const std::set<std::string> known = {
        "model.kind",      "model.hidden",    "model.factors",  "model.init_std", "model.init_seed",
        "sim.seed",        "sim.gravity",     "sim.drag",       "sim.magnus",     "sim.dt",
        "sim.frames",      "sim.traj_per_class", "sim.speed_min", "sim.speed_max", "sim.elev_min",
        "sim.elev_max",    "sim.azim_min",    "sim.azim_max",   "sim.spin_magnitude",
        "data.history",    "data.path",
        "train.alpha",     "train.rho",       "train.gamma",    "train.cd_steps", "train.epochs",
        "train.seed",      "train.fold",
        "eval.gibbs",      "eval.horizons",   "eval.rollouts_per_traj",
        "sweep.hidden",    "sweep.factors",   "sweep.epochs",
        "out.dir",         "threads",
    };
    for (const auto& [key, value] : kv) {
        (void)value;
        if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    RunConfig rc;
    rc.model_kind = get_string(kv, "model.kind", rc.model_kind);
    rc.hidden = static_cast<int>(get_int(kv, "model.hidden", rc.hidden));
    rc.factors = static_cast<int>(get_int(kv, "model.factors", rc.factors));
    rc.init_std = get_double(kv, "model.init_std", rc.init_std);
    rc.init_seed = get_u64(kv, "model.init_seed", rc.init_seed);

    rc.sim.seed = get_u64(kv, "sim.seed", rc.sim.seed);
    rc.sim.gravity = get_double(kv, "sim.gravity", rc.sim.gravity);
    rc.sim.drag_coeff = get_double(kv, "sim.drag", rc.sim.drag_coeff);
    rc.sim.magnus_coeff = get_double(kv, "sim.magnus", rc.sim.magnus_coeff);
    rc.sim.dt = get_double(kv, "sim.dt", rc.sim.dt);
    rc.sim.frames = static_cast<int>(get_int(kv, "sim.frames", rc.sim.frames));
    rc.sim.traj_per_class = static_cast<int>(get_int(kv, "sim.traj_per_class", rc.sim.traj_per_class));
    rc.sim.speed_min = get_double(kv, "sim.speed_min", rc.sim.speed_min);
    rc.sim.speed_max = get_double(kv, "sim.speed_max", rc.sim.speed_max);
    rc.sim.elev_min_deg = get_double(kv, "sim.elev_min", rc.sim.elev_min_deg);
    rc.sim.elev_max_deg = get_double(kv, "sim.elev_max", rc.sim.elev_max_deg);
    rc.sim.azim_min_deg = get_double(kv, "sim.azim_min", rc.sim.azim_min_deg);
    rc.sim.azim_max_deg = get_double(kv, "sim.azim_max", rc.sim.azim_max_deg);
    if (kv.count("sim.spin_magnitude"))
        rc.sim.spin_classes = BallSimConfig::default_spins(get_double(kv, "sim.spin_magnitude", 20.0));

    rc.history_frames = static_cast<int>(get_int(kv, "data.history", rc.history_frames));
    rc.data_path = get_string(kv, "data.path", rc.data_path);

    rc.train.alpha = get_double(kv, "train.alpha", rc.train.alpha);
    rc.train.rho = get_double(kv, "train.rho", rc.train.rho);
    rc.train.gamma = get_double(kv, "train.gamma", rc.train.gamma);
    rc.train.cd_steps = static_cast<int>(get_int(kv, "train.cd_steps", rc.train.cd_steps));
    rc.train.epochs = static_cast<int>(get_int(kv, "train.epochs", rc.train.epochs));
    rc.train.seed = get_u64(kv, "train.seed", rc.train.seed);
    rc.fold = static_cast<int>(get_int(kv, "train.fold", rc.fold));

    rc.gibbs_steps = static_cast<int>(get_int(kv, "eval.gibbs", rc.gibbs_steps));
    rc.horizons = get_int_list(kv, "eval.horizons", rc.horizons);
    rc.rollouts_per_traj = static_cast<int>(get_int(kv, "eval.rollouts_per_traj", rc.rollouts_per_traj));

    rc.sweep_hidden = get_int_list(kv, "sweep.hidden", rc.sweep_hidden);
    rc.sweep_factors = get_int_list(kv, "sweep.factors", rc.sweep_factors);
    rc.sweep_epochs = static_cast<int>(get_int(kv, "sweep.epochs", rc.sweep_epochs));

    rc.out_dir = get_string(kv, "out.dir", rc.out_dir);
    rc.threads = static_cast<int>(get_int(kv, "threads", rc.threads));
    return rc;
}

}  // namespace dffw
