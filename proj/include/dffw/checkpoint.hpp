#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dffw/core.hpp"
#include "dffw/data.hpp"
#include "dffw/train.hpp"

namespace dffw {

struct CheckpointError : std::runtime_error {
    enum class Code {
        io,
        bad_magic,
        bad_header,
        version_mismatch,
        truncated_array,
        name_mismatch,
        length_mismatch,
    };

    CheckpointError(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
    Code code;
};

/// A trained (or freshly initialized) model plus everything needed to use and
/// reproduce it: normalization statistics, the training configuration echo,
/// and seed provenance.
struct ModelCheckpoint {
    int format_version = 1;
    std::string kind = "dffw";  ///< "dffw" or "ffw"
    ModelParams<double> params;
    NormStats norm;
    TrainConfig train_cfg;
    std::uint64_t init_seed = 0;
    double init_std = 0.3;
    int fold = -1;
};

/// On-disk layout: a text header (magic line, key=value fields, blank line)
/// followed by named length-prefixed little-endian float64 arrays in a fixed
/// order (bank1.w_v, bank1.w_h, bank1.w_hist, bank1.w_l, bank2 likewise, a,
/// b, c, sigma, sigma_hist, norm.mean, norm.std). Matrices are stored
/// column-major. Identical checkpoints serialize to identical bytes.
void save_checkpoint(const std::string& path, const ModelCheckpoint& ck);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace dffw
