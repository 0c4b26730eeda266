#include "dffw/data.hpp"

#include <fstream>

#include "dffw/textio.hpp"

namespace dffw {

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs, long id_offset) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_trajectories: cannot open " + path);
    os << "traj_id,class_id,frame,x,y,z,u,v\n";
    for (size_t ti = 0; ti < trajs.size(); ++ti) {
        const Trajectory& tr = trajs[ti];
        for (size_t f = 0; f < tr.frames.size(); ++f) {
            const TrajFrame& fr = tr.frames[f];
            os << id_offset + static_cast<long>(ti) << ',' << tr.class_id << ',' << f << ','
               << format_double(fr.xyz.x()) << ','
               << format_double(fr.xyz.y()) << ',' << format_double(fr.xyz.z()) << ',' << format_double(fr.uv.x())
               << ',' << format_double(fr.uv.y()) << '\n';
        }
    }
    if (!os.flush()) throw std::runtime_error("write_trajectories: write failed for " + path);
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_trajectories: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || trim(line) != "traj_id,class_id,frame,x,y,z,u,v")
        throw std::runtime_error("read_trajectories: bad header in " + path);

    std::vector<Trajectory> out;
    long lineno = 1;
    long base_id = -1;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        const std::vector<std::string> cols = split(t, ',');
        if (cols.size() != 8)
            throw std::runtime_error("read_trajectories: expected 8 columns at " + path + ":" +
                                     std::to_string(lineno));
        const long traj_id = parse_int(cols[0]);
        const long class_id = parse_int(cols[1]);
        const long frame = parse_int(cols[2]);
        if (base_id < 0) base_id = traj_id;
        const long slot = traj_id - base_id;
        if (slot < 0 || slot > static_cast<long>(out.size()))
            throw std::runtime_error("read_trajectories: non-contiguous traj_id at " + path + ":" +
                                     std::to_string(lineno));
        if (slot == static_cast<long>(out.size())) {
            out.emplace_back();
            out.back().class_id = static_cast<int>(class_id);
        }
        Trajectory& tr = out[static_cast<size_t>(slot)];
        if (tr.class_id != static_cast<int>(class_id) || frame != static_cast<long>(tr.frames.size()))
            throw std::runtime_error("read_trajectories: inconsistent trajectory rows at " + path + ":" +
                                     std::to_string(lineno));
        TrajFrame fr;
        fr.xyz << parse_double(cols[3]), parse_double(cols[4]), parse_double(cols[5]);
        fr.uv << parse_double(cols[6]), parse_double(cols[7]);
        tr.frames.push_back(fr);
    }
    return out;
}

void write_normstats(const std::string& path, const NormStats& ns) {
    ns.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_normstats: cannot open " + path);
    os << "feature,mean,std\n";
    for (Index i = 0; i < ns.mean.size(); ++i)
        os << i << ',' << format_double(ns.mean[i]) << ',' << format_double(ns.std[i]) << '\n';
    if (!os.flush()) throw std::runtime_error("write_normstats: write failed for " + path);
}

NormStats read_normstats(const std::string& path, Index present_dim) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_normstats: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || trim(line) != "feature,mean,std")
        throw std::runtime_error("read_normstats: bad header in " + path);

    std::vector<double> mean, std_;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty()) continue;
        const std::vector<std::string> cols = split(t, ',');
        if (cols.size() != 3 || parse_int(cols[0]) != static_cast<long>(mean.size()))
            throw std::runtime_error("read_normstats: malformed row at " + path + ":" + std::to_string(lineno));
        mean.push_back(parse_double(cols[1]));
        std_.push_back(parse_double(cols[2]));
    }

    NormStats ns;
    ns.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Index>(mean.size()));
    ns.std = Eigen::Map<const Eigen::VectorXd>(std_.data(), static_cast<Index>(std_.size()));
    ns.present_dim = present_dim;
    ns.validate();
    return ns;
}

}  // namespace dffw
