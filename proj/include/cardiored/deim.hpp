#pragma once

#include <vector>

#include <Eigen/Core>

#include "cardiored/pod.hpp"

namespace cardiored {

struct DeimSelection {
    std::vector<Eigen::Index> indices;
    Eigen::MatrixXd inv_PtZ;  // (P^T Z)^{-1}, built incrementally
};

// Greedy DEIM index selection over the columns of Z (n x M). Ties in the arg-max
// go to the lowest row. Throws DegenerateBasisError when a residual pivot falls
// below 1e-14.
DeimSelection select_indices(const Eigen::MatrixXd& Z);
DeimSelection select_indices(const PodBasis& basis);

struct DeimOperator {
    std::vector<Eigen::Index> indices;
    Eigen::MatrixXd projector;  // N x M:  Z_u^T M_L Z_ion (P^T Z_ion)^{-1}
    Eigen::MatrixXd extractor;  // M x N:  P^T Z_u
    Eigen::MatrixXd inv_PtZ;    // M x M

    Eigen::Index points() const { return static_cast<Eigen::Index>(indices.size()); }
};

// `lumped_mass` is the diagonal of M_L (length n).
DeimOperator build_deim_operator(const PodBasis& Zu, const PodBasis& Zion, const Eigen::VectorXd& lumped_mass);

// Rows of v at the interpolation indices (P^T v).
Eigen::VectorXd gather(const std::vector<Eigen::Index>& indices, const Eigen::VectorXd& v);

// Reference path: mean + Z_ion (P^T Z_ion)^{-1} (f_P - P^T mean), an n-vector.
Eigen::VectorXd deim_approximate(const DeimOperator& op, const PodBasis& Zion, const Eigen::VectorXd& f_at_points);

// Projected path: projector * f_P, touching only N x M data.
Eigen::VectorXd deim_project(const DeimOperator& op, const Eigen::VectorXd& f_at_points);

}  // namespace cardiored
