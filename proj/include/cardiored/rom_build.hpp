#pragma once

#include <Eigen/Core>

#include "cardiored/assembly.hpp"
#include "cardiored/deim.hpp"
#include "cardiored/forward.hpp"
#include "cardiored/measurement.hpp"
#include "cardiored/pod.hpp"
#include "cardiored/rom.hpp"

namespace cardiored {

// One (Z_u, Z_ion, DEIM) triple and its generating parameter.
struct ReducedBasis {
    PodBasis u;
    PodBasis ion;
    DeimOperator deim;
    Conductivity sigma_gen{};
};

// POD of the u and I_ion frames of `rec` (centred) truncated to N and M, plus DEIM.
ReducedBasis build_reduced_basis(const TrajectoryRecord& rec, const Conductivity& sigma_gen, Eigen::Index N,
                                 Eigen::Index M, const AssembledOperators& ops);

// Offline projection of every full-order object. `meas` may be null (no misfit data).
ReducedOperators build_reduced_operators(const AssembledOperators& ops, const ReducedBasis& basis,
                                         const MeasurementSet* meas, const NodalStimulus& stim,
                                         const Eigen::VectorXd& u0, const Eigen::VectorXd& w0);
// Rest initial data.
ReducedOperators build_reduced_operators(const AssembledOperators& ops, const ReducedBasis& basis,
                                         const MeasurementSet* meas, const NodalStimulus& stim,
                                         const IonicParams& p);

// mean + Z_u a^l for every step, n x L.
Eigen::MatrixXd lift(const PodBasis& Zu, const ReducedTrajectory& t);

// 1/2 sum over markers of |X (mean + Z_u a - u_meas)|^2, evaluated in full space.
double lifted_misfit(const PodBasis& Zu, const ReducedTrajectory& t, const MeasurementSet& meas);

}  // namespace cardiored
