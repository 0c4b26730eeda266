#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dffw/rng.hpp"

namespace dffw {

/// Fixed pinhole camera. `orientation` rows are the camera axes expressed in
/// world coordinates (x right, y down in the image, z forward), so a world
/// point maps into the camera frame as orientation * (p - position).
struct Camera {
    Eigen::Vector3d position = default_position();
    Eigen::Matrix3d orientation = default_orientation();
    double focal = 600.0;
    Eigen::Vector2d principal{320.0, 240.0};

    /// Axes of a camera at `position` aimed at `target`, image up aligned
    /// with world z. The view direction must not be vertical.
    static Eigen::Matrix3d orientation_toward(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
        const Eigen::Vector3d forward = (target - position).normalized();
        Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
        if (right.norm() < 1e-9) throw std::invalid_argument("Camera: view direction is vertical");
        right.normalize();
        Eigen::Matrix3d axes;
        axes.row(0) = right;
        axes.row(1) = forward.cross(right);  // image-down, mostly -z
        axes.row(2) = forward;
        return axes;
    }

    static Camera look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
        Camera cam;
        cam.position = position;
        cam.orientation = orientation_toward(position, target);
        return cam;
    }

    /// Default view: oblique, ahead of and to the side of the launch arc, so
    /// every world axis has a strong component in the image plane and none of
    /// the class-dependent curvature hides along the optical depth axis.
    static Eigen::Vector3d default_position() { return {150.0, -110.0, 60.0}; }
    static Eigen::Matrix3d default_orientation() { return orientation_toward(default_position(), {55.0, 0.0, 35.0}); }

    void validate() const {
        if (!(focal > 0.0)) throw std::invalid_argument("Camera: focal must be > 0");
        const Eigen::Matrix3d gram = orientation * orientation.transpose();
        if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("Camera: orientation must be orthonormal");
    }
};

/// Perspective projection of one world point. Throws if the point is not
/// strictly in front of the camera.
inline Eigen::Vector2d project(const Camera& cam, const Eigen::Vector3d& xyz) {
    const Eigen::Vector3d pc = cam.orientation * (xyz - cam.position);
    if (!(pc.z() > 0.0)) throw std::domain_error("project: point has non-positive depth");
    return cam.principal + cam.focal / pc.z() * Eigen::Vector2d(pc.x(), pc.y());
}

/// Ball-flight generator settings. The dynamics are
///   accel = gravity + drag + Magnus,  drag = -drag_coeff |v| v,
///   Magnus = magnus_coeff (omega x v),
/// with one fixed spin vector per class. Spin axes are +-x and +-y (pairwise
/// angles >= 90 degrees): sidespin of either sign curves the flight left or
/// right, topspin/backspin dives or lofts it, so the four classes trace
/// visibly different arcs regardless of where inside the launch window a
/// trajectory starts. The launch ranges are kept narrow enough that this
/// class geometry dominates the launch-to-launch variation.
struct BallSimConfig {
    double gravity = 9.81;        ///< magnitude, acting along -z
    double drag_coeff = 0.0010;
    double magnus_coeff = 0.0035;
    double dt = 0.02;
    int frames = 400;             ///< hard cap per trajectory
    int traj_per_class = 11;
    std::uint64_t seed = 1;

    Eigen::Vector3d launch_pos{0.0, 0.0, 1.0};
    double speed_min = 43.5, speed_max = 45.5;          ///< m/s
    double elev_min_deg = 71.0, elev_max_deg = 75.0;    ///< above horizon
    double azim_min_deg = -6.0, azim_max_deg = 6.0;     ///< around +x

    std::vector<Eigen::Vector3d> spin_classes = default_spins(22.0);

    Camera camera;

    static std::vector<Eigen::Vector3d> default_spins(double magnitude) {
        return {{magnitude, 0.0, 0.0}, {-magnitude, 0.0, 0.0}, {0.0, magnitude, 0.0}, {0.0, -magnitude, 0.0}};
    }

    int num_classes() const { return static_cast<int>(spin_classes.size()); }

    void validate(int min_frames = 2) const {
        if (!(dt > 0.0)) throw std::invalid_argument("BallSimConfig: dt must be > 0");
        if (frames < min_frames)
            throw std::invalid_argument("BallSimConfig: trajectory shorter than history (frames=" +
                                        std::to_string(frames) + ", need >= " + std::to_string(min_frames) + ")");
        if (spin_classes.empty()) throw std::invalid_argument("BallSimConfig: no spin classes");
        if (traj_per_class < 1) throw std::invalid_argument("BallSimConfig: traj_per_class must be >= 1");
        if (!(speed_max >= speed_min) || !(elev_max_deg >= elev_min_deg) || !(azim_max_deg >= azim_min_deg))
            throw std::invalid_argument("BallSimConfig: empty launch range");
        camera.validate();
    }
};

struct TrajFrame {
    Eigen::Vector3d xyz;
    Eigen::Vector2d uv;
};

struct Trajectory {
    int class_id = 0;
    std::vector<TrajFrame> frames;
};

/// Integrate the ball flight from a given launch state. Velocity-Verlet
/// stepping (kick-drift-kick): exact for constant gravity, second order once
/// drag and Magnus enter. Positions are recorded per step, launch state
/// first, stopping at ground contact (z < 0) or after cfg.frames records.
inline std::vector<Eigen::Vector3d> integrate_ball(const BallSimConfig& cfg, Eigen::Vector3d pos,
                                                   Eigen::Vector3d vel, const Eigen::Vector3d& omega) {
    const Eigen::Vector3d grav(0.0, 0.0, -cfg.gravity);
    auto accel = [&](const Eigen::Vector3d& v) -> Eigen::Vector3d {
        return grav - cfg.drag_coeff * v.norm() * v + cfg.magnus_coeff * omega.cross(v);
    };

    std::vector<Eigen::Vector3d> path;
    path.reserve(static_cast<size_t>(cfg.frames));
    path.push_back(pos);
    while (static_cast<int>(path.size()) < cfg.frames) {
        const Eigen::Vector3d vh = vel + 0.5 * cfg.dt * accel(vel);
        pos += cfg.dt * vh;
        vel = vh + 0.5 * cfg.dt * accel(vh);
        if (pos.z() < 0.0) break;
        path.push_back(pos);
    }
    return path;
}

/// One full trajectory of a given class: launch sampled from the configured
/// ranges, spin fixed by the class, every position projected through the
/// camera.
inline Trajectory simulate_trajectory(const BallSimConfig& cfg, int class_id, Rng& rng) {
    if (class_id < 0 || class_id >= cfg.num_classes())
        throw std::invalid_argument("simulate_trajectory: bad class id " + std::to_string(class_id));

    const double deg = std::acos(-1.0) / 180.0;
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double elev = rng.uniform(cfg.elev_min_deg, cfg.elev_max_deg) * deg;
    const double azim = rng.uniform(cfg.azim_min_deg, cfg.azim_max_deg) * deg;
    const Eigen::Vector3d v0(speed * std::cos(elev) * std::cos(azim),
                             speed * std::cos(elev) * std::sin(azim),
                             speed * std::sin(elev));

    Trajectory traj;
    traj.class_id = class_id;
    const std::vector<Eigen::Vector3d> path =
        integrate_ball(cfg, cfg.launch_pos, v0, cfg.spin_classes[static_cast<size_t>(class_id)]);
    traj.frames.reserve(path.size());
    for (const Eigen::Vector3d& p : path) traj.frames.push_back({p, project(cfg.camera, p)});
    return traj;
}

/// The full dataset: traj_per_class trajectories for every class, class-major
/// order. Each trajectory draws from its own rng stream, so the dataset is a
/// pure function of cfg regardless of generation order.
inline std::vector<Trajectory> make_dataset(const BallSimConfig& cfg, int min_frames = 2) {
    cfg.validate(min_frames);
    std::vector<Trajectory> out;
    out.reserve(static_cast<size_t>(cfg.num_classes() * cfg.traj_per_class));
    for (int c = 0; c < cfg.num_classes(); ++c)
        for (int j = 0; j < cfg.traj_per_class; ++j) {
            const std::uint64_t idx = static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(cfg.traj_per_class) +
                                      static_cast<std::uint64_t>(j);
            Rng rng = Rng::derive(cfg.seed, 0x7472, idx);
            Trajectory t = simulate_trajectory(cfg, c, rng);
            if (static_cast<int>(t.frames.size()) < min_frames)
                throw std::runtime_error("make_dataset: trajectory shorter than history (class " +
                                         std::to_string(c) + ", index " + std::to_string(j) + ")");
            out.push_back(std::move(t));
        }
    return out;
}

}  // namespace dffw
