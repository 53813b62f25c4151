#pragma once

#include <vector>

#include <Eigen/Core>

#include "cardiored/assembly.hpp"
#include "cardiored/ionic.hpp"
#include "cardiored/mesh.hpp"
#include "cardiored/solve_config.hpp"

namespace cardiored {

struct StimulusSite {
    Point3 center;
    double radius = 0.1;  // cm
};

struct StimulusProtocol {
    std::vector<StimulusSite> sites;
    double amplitude = 1e5;  // uA/cm^3
    double duration = 1.0;   // ms

    void validate() const;
};

// Four slab corners plus the centre, at mid-thickness.
StimulusProtocol corner_and_center_stimulus(const Mesh& mesh, double radius);

// Amplitude at nodes inside any site ball while 0 <= t < duration, else zero.
Eigen::VectorXd apply_stimulus(const StimulusProtocol& stim, const Mesh& mesh, double t);

// Spatial footprint precomputed once for the time loop.
struct NodalStimulus {
    Eigen::VectorXd pattern;  // amplitude on covered nodes
    double duration = 0.0;

    bool active(double t) const { return t >= 0.0 && t < duration; }
};
NodalStimulus nodal_stimulus(const StimulusProtocol& stim, const Mesh& mesh);

// Frames at steps stride, 2*stride, ..., L (timestamp step * dt); step 0 is
// kept separately in u0 / w0. Empty matrices for fields not recorded.
struct TrajectoryRecord {
    double dt = 0.0;
    long steps = 0;
    int stride = 1;
    Eigen::VectorXd u0, w0;
    Eigen::MatrixXd u, w, iion;
    int forward_iterations = 0;  // accumulated linear-solver iterations

    Eigen::Index frames() const { return static_cast<Eigen::Index>(steps / stride); }
    long frame_step(Eigen::Index f) const { return (f + 1) * stride; }
    // State at step l (0 returns the initial data). Requires stride 1 or l on the stride.
    Eigen::VectorXd u_at(long l) const;
    Eigen::VectorXd w_at(long l) const;
};

// Semi-implicit BDF2 monodomain stepper with explicit extrapolation of the
// ionic term and backward Euler gating:
//   A_m u^{l+1} = M (I_app^{l+1} - beta I_ion(u~, w^{l+1})) + beta C_m M sum alpha_i/dt u^{l+1-i}
// with A_m = beta C_m alpha0/dt M + sigma_ml S_l + sigma_mt S_t and M the lumped mass.
// `exact_load` switches the ionic term to the quadrature reference path when
// cfg.ionic == IonicEvaluation::exact.
TrajectoryRecord solve_monodomain(const AssembledOperators& ops, const Conductivity& sigma,
                                  const NodalStimulus& stim, const SolveConfig& cfg, const IonicParams& p,
                                  const Eigen::VectorXd& u0, const Eigen::VectorXd& w0,
                                  const ExactIonicLoad* exact_load = nullptr);

// Rest initial data u = V_r, w = 0.
TrajectoryRecord solve_monodomain(const AssembledOperators& ops, const Conductivity& sigma,
                                  const NodalStimulus& stim, const SolveConfig& cfg, const IonicParams& p);

enum class ConductivityComponent { ml, mt };

// Forward sensitivities du/dsigma_k, dw/dsigma_k (stored in the u / w frames of
// the result). `base` must hold u and w at every step.
TrajectoryRecord solve_sensitivity(const AssembledOperators& ops, const Conductivity& sigma,
                                   const NodalStimulus& stim, const SolveConfig& cfg, const IonicParams& p,
                                   const TrajectoryRecord& base, ConductivityComponent which);

// A_m for the given BDF leading coefficient.
SparseMatrix monodomain_matrix(const AssembledOperators& ops, const Conductivity& sigma, double alpha0,
                               const SolveConfig& cfg, const IonicParams& p);

}  // namespace cardiored
