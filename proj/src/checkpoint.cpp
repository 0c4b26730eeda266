#include "dffw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dffw/textio.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace dffw {

namespace {

constexpr const char* kMagic = "dffwcrbm-checkpoint";
constexpr int kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); }
void write_u64(std::ostream& os, std::uint64_t x) { os.write(reinterpret_cast<const char*>(&x), 8); }

void write_array(std::ostream& os, const std::string& name, const double* data, std::uint64_t count) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, count);
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
}

struct ArraySpec {
    std::string name;
    double* data;
    std::uint64_t count;
};

std::vector<ArraySpec> array_layout(ModelCheckpoint& ck) {
    ModelParams<double>& p = ck.params;
    return {
        {"bank1.w_v", p.bank1.w_v.data(), static_cast<std::uint64_t>(p.bank1.w_v.size())},
        {"bank1.w_h", p.bank1.w_h.data(), static_cast<std::uint64_t>(p.bank1.w_h.size())},
        {"bank1.w_hist", p.bank1.w_hist.data(), static_cast<std::uint64_t>(p.bank1.w_hist.size())},
        {"bank1.w_l", p.bank1.w_l.data(), static_cast<std::uint64_t>(p.bank1.w_l.size())},
        {"bank2.w_v", p.bank2.w_v.data(), static_cast<std::uint64_t>(p.bank2.w_v.size())},
        {"bank2.w_h", p.bank2.w_h.data(), static_cast<std::uint64_t>(p.bank2.w_h.size())},
        {"bank2.w_hist", p.bank2.w_hist.data(), static_cast<std::uint64_t>(p.bank2.w_hist.size())},
        {"bank2.w_l", p.bank2.w_l.data(), static_cast<std::uint64_t>(p.bank2.w_l.size())},
        {"a", p.a.data(), static_cast<std::uint64_t>(p.a.size())},
        {"b", p.b.data(), static_cast<std::uint64_t>(p.b.size())},
        {"c", p.c.data(), static_cast<std::uint64_t>(p.c.size())},
        {"sigma", p.sigma.data(), static_cast<std::uint64_t>(p.sigma.size())},
        {"sigma_hist", p.sigma_hist.data(), static_cast<std::uint64_t>(p.sigma_hist.size())},
        {"norm.mean", ck.norm.mean.data(), static_cast<std::uint64_t>(ck.norm.mean.size())},
        {"norm.std", ck.norm.std.data(), static_cast<std::uint64_t>(ck.norm.std.size())},
    };
}

[[noreturn]] void fail(CheckpointError::Code code, const std::string& msg) { throw CheckpointError(code, msg); }

}  // namespace

void save_checkpoint(const std::string& path, const ModelCheckpoint& ck) {
    ModelCheckpoint mut = ck;
    const LayerDims& d = ck.params.dims;
    if (ck.norm.mean.size() != d.n_v + d.n_vlt || ck.norm.std.size() != d.n_v + d.n_vlt)
        fail(CheckpointError::Code::length_mismatch, "save_checkpoint: normalizer size does not match dims");
    if ((ck.kind == "ffw") != (d.n_f2 == 0))
        fail(CheckpointError::Code::bad_header, "save_checkpoint: kind does not match factor counts");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(CheckpointError::Code::io, "save_checkpoint: cannot open " + path);

    os << kMagic << "\n";
    os << "format_version=" << ck.format_version << "\n";
    os << "kind=" << ck.kind << "\n";
    os << "n_v=" << d.n_v << "\nn_h=" << d.n_h << "\nn_vlt=" << d.n_vlt << "\nn_l=" << d.n_l << "\nn_f1="
       << d.n_f1 << "\nn_f2=" << d.n_f2 << "\n";
    os << "init_seed=" << ck.init_seed << "\n";
    os << "init_std=" << format_double(ck.init_std) << "\n";
    os << "train_seed=" << ck.train_cfg.seed << "\n";
    os << "alpha=" << format_double(ck.train_cfg.alpha) << "\n";
    os << "rho=" << format_double(ck.train_cfg.rho) << "\n";
    os << "gamma=" << format_double(ck.train_cfg.gamma) << "\n";
    os << "cd_steps=" << ck.train_cfg.cd_steps << "\n";
    os << "epochs=" << ck.train_cfg.epochs << "\n";
    os << "fold=" << ck.fold << "\n";
    os << "\n";

    for (const ArraySpec& a : array_layout(mut)) write_array(os, a.name, a.data, a.count);
    os.flush();
    if (!os) fail(CheckpointError::Code::io, "save_checkpoint: write failed for " + path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(CheckpointError::Code::io, "load_checkpoint: cannot open " + path);

    std::string line;
    if (!std::getline(is, line) || trim(line) != kMagic)
        fail(CheckpointError::Code::bad_magic, "load_checkpoint: not a checkpoint file: " + path);

    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        const std::string_view t = trim(line);
        if (t.empty()) break;
        const size_t eq = t.find('=');
        if (eq == std::string_view::npos)
            fail(CheckpointError::Code::bad_header, "load_checkpoint: malformed header line '" + std::string(t) + "'");
        kv[std::string(t.substr(0, eq))] = std::string(t.substr(eq + 1));
    }

    auto need = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            fail(CheckpointError::Code::bad_header, std::string("load_checkpoint: missing header key ") + key);
        return it->second;
    };

    ModelCheckpoint ck;
    ck.format_version = static_cast<int>(parse_int(need("format_version")));
    if (ck.format_version != kVersion)
        fail(CheckpointError::Code::version_mismatch,
             "load_checkpoint: unsupported format_version " + std::to_string(ck.format_version));
    ck.kind = need("kind");
    if (ck.kind != "dffw" && ck.kind != "ffw")
        fail(CheckpointError::Code::bad_header, "load_checkpoint: unknown kind '" + ck.kind + "'");

    LayerDims d;
    d.n_v = parse_int(need("n_v"));
    d.n_h = parse_int(need("n_h"));
    d.n_vlt = parse_int(need("n_vlt"));
    d.n_l = parse_int(need("n_l"));
    d.n_f1 = parse_int(need("n_f1"));
    d.n_f2 = parse_int(need("n_f2"));
    if ((ck.kind == "ffw") != (d.n_f2 == 0))
        fail(CheckpointError::Code::bad_header, "load_checkpoint: kind does not match factor counts");

    ck.init_seed = parse_u64(need("init_seed"));
    ck.init_std = parse_double(need("init_std"));
    ck.train_cfg.seed = parse_u64(need("train_seed"));
    ck.train_cfg.alpha = parse_double(need("alpha"));
    ck.train_cfg.rho = parse_double(need("rho"));
    ck.train_cfg.gamma = parse_double(need("gamma"));
    ck.train_cfg.cd_steps = static_cast<int>(parse_int(need("cd_steps")));
    ck.train_cfg.epochs = static_cast<int>(parse_int(need("epochs")));
    ck.fold = static_cast<int>(parse_int(need("fold")));

    ck.params.dims = d;
    ck.params.bank1 = FactorBank<double>::zero(d, d.n_f1);
    ck.params.bank2 = FactorBank<double>::zero(d, d.n_f2);
    ck.params.a.resize(d.n_v);
    ck.params.b.resize(d.n_h);
    ck.params.c.resize(d.n_l);
    ck.params.sigma.resize(d.n_v);
    ck.params.sigma_hist.resize(d.n_vlt);
    ck.norm.mean.resize(d.n_v + d.n_vlt);
    ck.norm.std.resize(d.n_v + d.n_vlt);
    ck.norm.present_dim = d.n_v;

    for (const ArraySpec& spec : array_layout(ck)) {
        std::uint32_t name_len = 0;
        if (!is.read(reinterpret_cast<char*>(&name_len), 4))
            fail(CheckpointError::Code::truncated_array, "load_checkpoint: truncated array " + spec.name);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            fail(CheckpointError::Code::truncated_array, "load_checkpoint: truncated array " + spec.name);
        if (name != spec.name)
            fail(CheckpointError::Code::name_mismatch,
                 "load_checkpoint: expected array '" + spec.name + "', found '" + name + "'");
        std::uint64_t count = 0;
        if (!is.read(reinterpret_cast<char*>(&count), 8))
            fail(CheckpointError::Code::truncated_array, "load_checkpoint: truncated array " + spec.name);
        if (count != spec.count)
            fail(CheckpointError::Code::length_mismatch,
                 "load_checkpoint: array '" + spec.name + "' has " + std::to_string(count) + " values, dims require " +
                     std::to_string(spec.count));
        if (!is.read(reinterpret_cast<char*>(spec.data), static_cast<std::streamsize>(count * sizeof(double))))
            fail(CheckpointError::Code::truncated_array, "load_checkpoint: truncated array " + spec.name);
    }
    return ck;
}

}  // namespace dffw
