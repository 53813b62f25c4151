#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cardiored/assembly.hpp"
#include "cardiored/forward.hpp"
#include "cardiored/measurement.hpp"
#include "cardiored/regularization.hpp"
#include "cardiored/rom_build.hpp"

namespace cardiored {

// Admissible set h_i(sigma) > 0:
//   h1 = ml/mt - 1, h2 = 100 - ml/mt, h3 = mt - 0.05, h4 = 7 - ml.
struct Constraints {
    double ratio_min = 1.0;
    double ratio_max = 100.0;
    double mt_min = 0.05;
    double ml_max = 7.0;

    std::array<double, 4> h(const Conductivity& s) const;
    bool feasible(const Conductivity& s) const;
    // -mu sum log h_i and its gradient; +inf outside the set.
    double barrier(const Conductivity& s, double mu) const;
    std::array<double, 2> barrier_gradient(const Conductivity& s, double mu) const;
};

// 1/2 sum over markers |X (u^l - u_meas^l)|^2 + (alpha/2) R(sigma).
double cost_full(const TrajectoryRecord& traj, const MeasurementSet& meas, const Conductivity& sigma = {},
                 const Regularization& reg = {});

struct FullDual {
    Eigen::MatrixXd q;  // n x L
    Eigen::MatrixXd r;  // n x L
};

// Discrete adjoint of the full-order scheme; `base` needs u and w at every step.
FullDual solve_full_adjoint(const AssembledOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                            const IonicParams& p, const TrajectoryRecord& base, const MeasurementSet& meas);

// dJ/dsigma_k = -sum_l q^l^T S_k u^l + (alpha/2) dR/dsigma_k.
std::array<double, 2> full_gradient(const AssembledOperators& ops, const TrajectoryRecord& base, const FullDual& dual,
                                    const Conductivity& sigma, const Regularization& reg = {});

using BasisLibrary = std::vector<ReducedBasis>;

// Angle unit of the selection metric; degrees make angular gaps dominate.
inline constexpr double kDegreesPerRadian = 57.29577951308232;

// argmin_j of the Euclidean distance in (rho, theta_scale * theta); ties go to the lowest index.
std::size_t select_basis(const std::vector<Conductivity>& generators, const Conductivity& sigma,
                         double theta_scale = kDegreesPerRadian);
std::size_t select_basis(const BasisLibrary& lib, const Conductivity& sigma, double theta_scale = kDegreesPerRadian);

struct BarrierOptions {
    int max_iter = 40;
    double mu0 = 1.0;
    double shrink = 0.1;     // varsigma
    double mu_min = 1e-6;    // stop shrinking (and declare convergence) below this
    double grad_tol = 1e-6;  // |grad phi| < grad_tol * max(1, |J|)
    double armijo = 1e-4;
    int max_halvings = 30;
    Regularization reg;
    Constraints constraints;
    double theta_scale = kDegreesPerRadian;  // basis selection metric
};

struct IterateRecord {
    int iter = 0;
    Conductivity sigma;
    double J = 0.0;          // misfit plus regularization, no barrier
    double grad_norm = 0.0;  // |grad (J - mu sum log h)|
    int basis_index = -1;    // -1 for full order
    double mu = 0.0;
};

enum class OptimizerStatus { converged, max_iterations, line_search_failed };
std::string to_string(OptimizerStatus s);

struct SolveCounts {
    long forward = 0;
    long backward = 0;
};

struct OptimizationResult {
    Conductivity sigma;
    double J = 0.0;
    OptimizerStatus status = OptimizerStatus::max_iterations;
    std::vector<IterateRecord> history;
    SolveCounts counts;
    double wall_seconds = 0.0;
    int iterations = 0;
    std::size_t library_size = 0;  // bases in use at the end (reduced / adaptive)
};

// Hooks the barrier-BFGS driver needs from a cost model.
struct Objective {
    std::function<int(const Conductivity&)> select;  // returns the basis index in use (-1 if none)
    std::function<double(const Conductivity&)> value;
    std::function<std::pair<double, std::array<double, 2>>(const Conductivity&)> value_and_gradient;
    std::function<SolveCounts()> counts;
};

// Log-barrier BFGS with Armijo backtracking; every iterate is strictly feasible.
OptimizationResult barrier_bfgs(const Conductivity& sigma0, const Objective& obj, const BarrierOptions& opts);

// Everything a forward model needs besides sigma.
struct InverseProblem {
    const AssembledOperators* ops = nullptr;
    NodalStimulus stim;
    SolveConfig cfg;
    IonicParams ionic;
    const MeasurementSet* meas = nullptr;
};

OptimizationResult optimize_full(const Conductivity& sigma0, const InverseProblem& prob, const BarrierOptions& opts);

OptimizationResult optimize_reduced(const Conductivity& sigma0, const BasisLibrary& lib, const InverseProblem& prob,
                                    const BarrierOptions& opts);

struct AdaptiveOptions {
    int cycles = 5;
    int inner_max_iter = 20;
    Eigen::Index N = 35;
    Eigen::Index M = 80;
    BarrierOptions barrier;
};

// Per cycle: full-order snapshots at the current sigma0, new bases appended to
// the library, reduced optimization from sigma0 capped at inner_max_iter.
OptimizationResult optimize_adaptive(const Conductivity& sigma0, const InverseProblem& prob,
                                     const AdaptiveOptions& opts, BasisLibrary* library_out = nullptr);

}  // namespace cardiored
