#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "cardiored/ionic.hpp"
#include "cardiored/regularization.hpp"
#include "cardiored/solve_config.hpp"

// Online reduced-order model. Nothing in this header (or the library built from
// it) refers to full-order sparse operators; every object is N- or M-sized
// except the offline-built measurement projections, which are N-vectors too.
namespace cardiored {

// Dense reduced operators for u ~ mean + Z_u a and
// I_ion ~ mean_ion + Z_ion (P^T Z_ion)^{-1} (I_ion(P^T u, w_P) - P^T mean_ion).
struct ReducedOperators {
    Eigen::MatrixXd M_u;   // Z_u^T M_L Z_u
    Eigen::MatrixXd S_lu;  // Z_u^T S_l Z_u
    Eigen::MatrixXd S_tu;  // Z_u^T S_t Z_u
    Eigen::MatrixXd M_iu;  // Z_u^T M_L Z_ion (P^T Z_ion)^{-1}
    Eigen::MatrixXd U;     // P^T Z_u

    Eigen::VectorXd s_l;     // Z_u^T S_l mean
    Eigen::VectorXd s_t;     // Z_u^T S_t mean
    Eigen::VectorXd c_ion;   // Z_u^T M_L mean_ion - M_iu P^T mean_ion
    Eigen::VectorXd mean_P;  // P^T mean

    Eigen::VectorXd stim;       // Z_u^T M_L I_app pattern
    double stim_duration = 0.0; // ms, active on [0, duration)

    Eigen::VectorXd a0;  // Z_u^T (u0 - mean)
    Eigen::VectorXd w0;  // P^T w0

    // Misfit data: X_u = Z_u^T X Z_u, u_hat = Z_u^T X (u_meas - mean),
    // norm2 = |X (u_meas - mean)|^2, one entry per marked step.
    Eigen::MatrixXd X_u;
    std::vector<long> marker_steps;
    std::vector<Eigen::VectorXd> u_hat;
    std::vector<double> norm2;

    Eigen::Index N() const { return M_u.rows(); }
    Eigen::Index M() const { return U.rows(); }
    void validate() const;
};

struct ReducedTrajectory {
    double dt = 0.0;
    long steps = 0;
    Eigen::VectorXd a0, w0;
    Eigen::MatrixXd a;  // N x L, column l-1 is step l
    Eigen::MatrixXd w;  // M x L, gating at the DEIM points

    Eigen::VectorXd a_at(long l) const { return l == 0 ? a0 : Eigen::VectorXd(a.col(l - 1)); }
    Eigen::VectorXd w_at(long l) const { return l == 0 ? w0 : Eigen::VectorXd(w.col(l - 1)); }
};

struct ReducedDual {
    Eigen::MatrixXd q;  // N x L
    Eigen::MatrixXd r;  // M x L
};

// A_r a^{l} = stim + beta C_m M_u sum alpha_i/dt a^{l-i} - beta (M_iu f + c_ion) - sigma_ml s_l - sigma_mt s_t,
// A_r = beta C_m alpha0/dt M_u + sigma_ml S_lu + sigma_mt S_tu, factored once per call.
ReducedTrajectory solve_reduced(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                                const IonicParams& p);

// 1/2 sum over marked steps of a^T X_u a - 2 u_hat^T a + norm2.
double reduced_misfit(const ReducedOperators& ops, const ReducedTrajectory& primal);

// Backward sweep l = L..1 for the discrete Lagrange multipliers of the reduced
// step (q) and of the gating step (r); values beyond L are zero.
ReducedDual solve_reduced_adjoint(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                                  const IonicParams& p, const ReducedTrajectory& primal);

// dJ/dsigma_k = -sum_l q^l^T (S_ku a^l + s_k) + (alpha/2) dR/dsigma_k.
std::array<double, 2> reduced_gradient(const ReducedOperators& ops, const ReducedTrajectory& primal,
                                       const ReducedDual& dual, const Conductivity& sigma,
                                       const Regularization& reg = {});

}  // namespace cardiored
