#include "cardiored/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cardiored/error.hpp"

namespace cardiored {

std::string to_string(NoiseModel m) { return m == NoiseModel::multiplicative ? "multiplicative" : "additive_range"; }

NoiseModel noise_model_from_string(const std::string& s) {
    if (s == "multiplicative") return NoiseModel::multiplicative;
    if (s == "additive_range") return NoiseModel::additive_range;
    throw InvalidArgument("unknown noise model '" + s + "'");
}

Eigen::Index MeasurementSet::sites() const {
    return static_cast<Eigen::Index>((site_mask.array() > 0.5).count());
}

void MeasurementSet::validate() const {
    for (Eigen::Index i = 0; i < site_mask.size(); ++i)
        if (site_mask[i] != 0.0 && site_mask[i] != 1.0) throw InvalidArgument("site mask entries must be 0 or 1");
    if (frames.rows() != site_mask.size() || frames.cols() != static_cast<Eigen::Index>(marker_steps.size()))
        throw InvalidArgument("measurement frames do not match mask and markers");
    if (!(dt > 0.0) || !(dt_snap > 0.0)) throw InvalidArgument("measurement time steps must be positive");
    const long every = std::lround(dt_snap / dt);
    for (std::size_t i = 0; i < marker_steps.size(); ++i) {
        if (marker_steps[i] < 1 || marker_steps[i] % every != 0)
            throw InvalidArgument("marker step " + std::to_string(marker_steps[i]) + " is not a multiple of dt_snap/dt");
        if (i && marker_steps[i] <= marker_steps[i - 1]) throw InvalidArgument("marker steps must increase");
    }
}

Eigen::VectorXd surface_site_mask(const Mesh& mesh, int k) {
    if (k < 1) throw InvalidArgument("site grid needs k >= 1");
    const auto box = bounding_box(mesh);
    const double tol = 1e-9 * std::max(1.0, (box.hi - box.lo).norm());
    std::vector<std::size_t> top;
    std::set<long long> xs;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        if (std::abs(mesh.nodes[i].z() - box.hi.z()) <= tol) {
            top.push_back(i);
            xs.insert(std::llround(mesh.nodes[i].x() / tol));
        }
    k = std::min<int>(k, static_cast<int>(xs.size()));

    Eigen::VectorXd mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            const double fx = k == 1 ? 0.5 : double(a) / (k - 1);
            const double fy = k == 1 ? 0.5 : double(b) / (k - 1);
            const Point3 target(box.lo.x() + fx * (box.hi.x() - box.lo.x()),
                                box.lo.y() + fy * (box.hi.y() - box.lo.y()), box.hi.z());
            std::size_t best = top.front();
            double best_d = (mesh.nodes[best] - target).squaredNorm();
            for (std::size_t i : top) {
                const double d = (mesh.nodes[i] - target).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            mask[static_cast<Eigen::Index>(best)] = 1.0;
        }
    return mask;
}

std::vector<long> snapshot_markers(double dt_snap, double dt, double T) {
    if (!(dt > 0.0) || !(dt_snap > 0.0) || !(T > 0.0)) throw InvalidArgument("marker times must be positive");
    const double ratio = dt_snap / dt;
    const long every = std::lround(ratio);
    if (every < 1 || std::abs(ratio - every) > 1e-9 * ratio)
        throw InvalidArgument("dt_snap must be a whole multiple of dt");
    const long L = std::lround(T / dt);
    std::vector<long> out;
    for (long s = every; s <= L; s += every) out.push_back(s);
    return out;
}

MeasurementSet sample_measurements(const TrajectoryRecord& rec, const Eigen::VectorXd& site_mask, double dt_snap) {
    MeasurementSet m;
    m.site_mask = site_mask;
    m.dt = rec.dt;
    m.dt_snap = dt_snap;
    m.marker_steps = snapshot_markers(dt_snap, rec.dt, rec.steps * rec.dt);
    if (rec.u.rows() != site_mask.size()) throw InvalidArgument("site mask length differs from trajectory");
    m.frames.resize(site_mask.size(), static_cast<Eigen::Index>(m.marker_steps.size()));
    for (std::size_t i = 0; i < m.marker_steps.size(); ++i) {
        if (m.marker_steps[i] % rec.stride != 0)
            throw InvalidArgument("trajectory stride does not cover the measurement markers");
        m.frames.col(static_cast<Eigen::Index>(i)) = rec.u_at(m.marker_steps[i]);
    }
    return m;
}

Eigen::MatrixXd add_noise(const Eigen::MatrixXd& frames, double level, std::uint64_t seed, NoiseModel model) {
    if (!(level >= 0.0)) throw InvalidArgument("noise level must be non-negative");
    if (level == 0.0) return frames;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> eta(-1.0, 1.0);
    const double range = frames.size() ? frames.maxCoeff() - frames.minCoeff() : 0.0;
    Eigen::MatrixXd out = frames;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const double e = eta(rng);
            if (model == NoiseModel::multiplicative)
                out(i, j) *= 1.0 + level * e;
            else
                out(i, j) += level * e * range;
        }
    return out;
}

}  // namespace cardiored
