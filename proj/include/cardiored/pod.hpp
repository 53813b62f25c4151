#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cardiored/forward.hpp"

namespace cardiored {

enum class SnapshotField { u, iion };

std::string to_string(SnapshotField f);
SnapshotField snapshot_field_from_string(const std::string& s);

// Snapshot columns after subtracting their mean (the mean is kept).
struct SnapshotMatrix {
    Eigen::MatrixXd columns;
    Eigen::VectorXd mean;
    Conductivity sigma_gen;
    SnapshotField field = SnapshotField::u;

    Eigen::Index size() const { return columns.rows(); }
    Eigen::Index count() const { return columns.cols(); }
    Eigen::MatrixXd raw() const { return columns.colwise() + mean; }
};

// Centres the columns of `raw` unless `center` is false (mean set to zero).
SnapshotMatrix make_snapshots(Eigen::MatrixXd raw, const Conductivity& sigma_gen, SnapshotField field,
                              bool center = true);

// u or I_ion frames of a trajectory as a snapshot set.
SnapshotMatrix trajectory_snapshots(const TrajectoryRecord& rec, const Conductivity& sigma_gen,
                                    SnapshotField field, bool center = true);

struct PodBasis {
    Eigen::MatrixXd modes;            // n x N, orthonormal columns
    Eigen::VectorXd singular_values;  // all m values, descending
    Conductivity sigma_gen;
    SnapshotField field = SnapshotField::u;
    Eigen::VectorXd mean;

    Eigen::Index size() const { return modes.rows(); }
    Eigen::Index rank() const { return modes.cols(); }

    Eigen::VectorXd project(const Eigen::VectorXd& y) const { return modes.transpose() * (y - mean); }
    Eigen::VectorXd lift(const Eigen::VectorXd& coeffs) const { return mean + modes * coeffs; }
};

// Thin QR Y = QR, SVD R = U_R S V_R^T, modes = first N columns of Q U_R.
// Trailing modes with s_i < 1e-14 s_1 are dropped with a warning.
PodBasis build_pod(const SnapshotMatrix& snaps, Eigen::Index N);

// Smallest N with s_N / s_1 <= tau (all modes when never reached).
Eigen::Index rank_for_decay(const Eigen::VectorXd& singular_values, double tau);

// Singular values of the snapshot set, via the same QR + SVD route.
Eigen::VectorXd snapshot_singular_values(const SnapshotMatrix& snaps);

// s_i / s_1, descending, starting at 1.
std::vector<double> singular_decay_report(const SnapshotMatrix& snaps);

// 1-based index of the first ratio <= threshold, 0 if never reached.
std::size_t first_index_below(const std::vector<double>& ratios, double threshold);

// Columns [y^1, dl*s_l^1, dt*s_t^1, y^2, ...] built from the raw snapshots, then
// re-centred. Columns scaled by a zero factor are dropped.
SnapshotMatrix augment_with_sensitivities(const SnapshotMatrix& snaps, const Eigen::MatrixXd& sens_l,
                                          const Eigen::MatrixXd& sens_t, double delta_l, double delta_t);

// dI_ion/dsigma frames from a base trajectory and its sensitivity record.
Eigen::MatrixXd ionic_sensitivity_frames(const TrajectoryRecord& base, const TrajectoryRecord& sens,
                                         const IonicParams& p);

// Identity basis of R^n (mean zero): the lossless reference for equivalence checks.
PodBasis identity_basis(Eigen::Index n, SnapshotField field);

}  // namespace cardiored
