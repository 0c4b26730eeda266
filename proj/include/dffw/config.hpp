#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dffw/core.hpp"
#include "dffw/sim.hpp"
#include "dffw/train.hpp"

namespace dffw {

/// Flat key=value configuration with dotted section keys, e.g.
/// `train.alpha=1e-4`. '#' starts a comment, blank lines are skipped.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);

double get_double(const KeyValues& kv, const std::string& key, double fallback);
long get_int(const KeyValues& kv, const std::string& key, long fallback);
std::uint64_t get_u64(const KeyValues& kv, const std::string& key, std::uint64_t fallback);
std::string get_string(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::vector<long> get_int_list(const KeyValues& kv, const std::string& key, const std::vector<long>& fallback);

/// Everything one command run needs, assembled from a config file plus flag
/// overrides. Unknown keys are rejected so typos fail loudly.
struct RunConfig {
    std::string model_kind = "dffw";  ///< "dffw" or "ffw"
    int hidden = 10;
    int factors = 100;
    double init_std = 0.3;
    std::uint64_t init_seed = 7;

    BallSimConfig sim;
    int history_frames = 50;

    TrainConfig train;
    int fold = 0;

    int gibbs_steps = 3;
    std::vector<long> horizons{1, 50};
    int rollouts_per_traj = 4;

    std::vector<long> sweep_hidden{10, 20, 40};
    std::vector<long> sweep_factors{10, 40, 100};
    int sweep_epochs = 20;

    std::string data_path;
    std::string out_dir = ".";
    int threads = 1;

    LayerDims dims() const {
        LayerDims d;
        d.n_v = 5;
        d.n_h = hidden;
        d.n_vlt = 2 * static_cast<Index>(history_frames);
        d.n_l = sim.num_classes();
        d.n_f1 = factors;
        d.n_f2 = model_kind == "ffw" ? 0 : factors;
        return d;
    }

    void validate() const;
};

/// Build a RunConfig from parsed key=values. Every recognized key has a
/// default; unknown keys raise.
RunConfig run_config_from(const KeyValues& kv);

}  // namespace dffw
