#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cardiored/assembly.hpp"
#include "cardiored/forward.hpp"
#include "cardiored/inverse_opt.hpp"
#include "cardiored/rom_build.hpp"

namespace cardiored {

struct PolarPoint {
    double rho;
    double theta;
};

// theta_i = theta_max - (theta_max - theta_min) cos((i-1) pi / (2 (n_theta - 1))), i = 1..n_theta,
// and per angular band i the radial nodes rho_j^i with the same rule and
// n_rho(i) = max(rho_base - i, rho_floor) nodes. Samples are band/radial midpoints.
struct PolarSamplingSpec {
    double theta_min = std::atan(1.0 / 14.0);
    double theta_max = std::atan(1.2);
    double rho_min = 1.5;
    double rho_max = 6.5;
    int n_theta = 4;
    int rho_base = 6;
    int rho_floor = 3;
    std::vector<PolarPoint> extra{{1.3, 0.5 * (std::atan(1.0 / 14.0) + std::atan(1.2))}};

    int n_rho(int band) const { return std::max(rho_base - band, rho_floor); }
    void validate() const;
};

// Chebyshev-type node sequence lo..hi (first node lo, last node hi).
std::vector<double> cosine_nodes(double lo, double hi, int count);

// Midpoint samples followed by the extra points. Samples outside `admissible`
// are kept and reported through a warning.
std::vector<Conductivity> polar_samples(const PolarSamplingSpec& spec, const Constraints& admissible = {});

// k + 1 equi-spaced boundaries over [theta_min, theta_max].
std::vector<double> equiangular_partition(int k, double theta_min, double theta_max);

// Band index of theta for the given boundaries (clamped to the first/last band).
int angular_band(const std::vector<double>& boundaries, double theta);

enum class DoeClass { black, cyan, white };
std::string to_string(DoeClass c);
// black: e <= 0.002, cyan: 0.002 < e <= 0.005, white: otherwise.
DoeClass classify(double e);

struct DoePoint {
    Conductivity sigma;
    double e = 0.0;
    DoeClass cls = DoeClass::white;
    bool ok = true;
    std::string error;
};

struct DoeMap {
    Conductivity sigma_gen;
    std::vector<DoePoint> points;
};

// nx x ny grid over [ml_lo, ml_hi] x [mt_lo, mt_hi], ml fastest.
std::vector<Conductivity> doe_grid(double ml_lo, double ml_hi, double mt_lo, double mt_hi, int nx, int ny);

// sum_l |mean + Z a^l - u^l|^2 / sum_l |u^l|^2 over all steps.
double relative_error(const TrajectoryRecord& full, const PodBasis& Zu, const ReducedTrajectory& reduced);

struct ForwardContext {
    const AssembledOperators* ops = nullptr;
    NodalStimulus stim;
    SolveConfig cfg;
    IonicParams ionic;
};

// One full-order and one reduced solve per grid point; failures are recorded per point.
DoeMap doe_map(const ReducedBasis& basis, const std::vector<Conductivity>& grid, const ForwardContext& ctx);

// Share of points with e <= 0.005 whose angle lies in the band of sigma_gen
// (bands from equiangular_partition over the grid's own angle range).
double band_confinement(const DoeMap& map, int k);

}  // namespace cardiored
