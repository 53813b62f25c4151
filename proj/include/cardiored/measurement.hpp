#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cardiored/forward.hpp"
#include "cardiored/mesh.hpp"

namespace cardiored {

enum class NoiseModel { multiplicative, additive_range };

std::string to_string(NoiseModel m);
NoiseModel noise_model_from_string(const std::string& s);

// Observations u_meas^l at the marked steps, restricted in the misfit to the
// 0/1 diagonal site mask X_site.
struct MeasurementSet {
    Eigen::VectorXd site_mask;        // n entries in {0, 1}
    std::vector<long> marker_steps;   // ascending, multiples of dt_snap / dt
    Eigen::MatrixXd frames;           // n x K, one column per marker
    double dt = 0.05;
    double dt_snap = 2.0;

    Conductivity sigma_exact{};
    double noise_level = 0.0;
    std::uint64_t seed = 0;
    NoiseModel noise_model = NoiseModel::multiplicative;

    Eigen::Index size() const { return site_mask.size(); }
    std::size_t count() const { return marker_steps.size(); }
    Eigen::Index sites() const;
    void validate() const;
};

// k x k grid over the top surface (max z) snapped to the nearest top-surface node;
// k is clamped to the number of distinct top-surface x coordinates.
Eigen::VectorXd surface_site_mask(const Mesh& mesh, int k = 100);

// Steps m, 2m, ... <= T/dt with m = round(dt_snap / dt); dt_snap must be a multiple of dt.
std::vector<long> snapshot_markers(double dt_snap, double dt, double T);

// Samples `rec` (which must hold u at every marker step) on the markers.
MeasurementSet sample_measurements(const TrajectoryRecord& rec, const Eigen::VectorXd& site_mask, double dt_snap);

// multiplicative:  u (1 + level eta);  additive_range: u + level eta (max u - min u),
// eta ~ U(-1, 1) i.i.d. per entry from a mt19937_64 seeded with `seed`.
Eigen::MatrixXd add_noise(const Eigen::MatrixXd& frames, double level, std::uint64_t seed,
                          NoiseModel model = NoiseModel::multiplicative);

}  // namespace cardiored
