#include "cardiored/rom_build.hpp"

#include "cardiored/error.hpp"

namespace cardiored {

ReducedBasis build_reduced_basis(const TrajectoryRecord& rec, const Conductivity& sigma_gen, Eigen::Index N,
                                 Eigen::Index M, const AssembledOperators& ops) {
    ReducedBasis b;
    b.sigma_gen = sigma_gen;
    b.u = build_pod(trajectory_snapshots(rec, sigma_gen, SnapshotField::u), N);
    b.ion = build_pod(trajectory_snapshots(rec, sigma_gen, SnapshotField::iion), M);
    b.deim = build_deim_operator(b.u, b.ion, ops.M_L);
    return b;
}

ReducedOperators build_reduced_operators(const AssembledOperators& ops, const ReducedBasis& basis,
                                         const MeasurementSet* meas, const NodalStimulus& stim,
                                         const Eigen::VectorXd& u0, const Eigen::VectorXd& w0) {
    const Eigen::Index n = ops.size();
    const Eigen::MatrixXd& Z = basis.u.modes;
    if (basis.u.size() != n || basis.ion.size() != n || stim.pattern.size() != n || u0.size() != n ||
        w0.size() != n)
        throw InvalidArgument("reduced operators: basis, stimulus or initial data length differs from mesh");
    if (basis.deim.projector.rows() != Z.cols() || basis.deim.points() != basis.ion.rank())
        throw InvalidArgument("reduced operators: DEIM operator was built for other bases");
    if (meas && meas->size() != n) throw InvalidArgument("reduced operators: measurement length differs from mesh");

    const Eigen::VectorXd ubar = basis.u.mean.size() ? basis.u.mean : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd ibar = basis.ion.mean.size() ? basis.ion.mean : Eigen::VectorXd::Zero(n);
    const auto& idx = basis.deim.indices;

    ReducedOperators r;
    const Eigen::MatrixXd MZ = ops.M_L.asDiagonal() * Z;
    r.M_u = Z.transpose() * MZ;
    const Eigen::MatrixXd SlZ = ops.S_l * Z, StZ = ops.S_t * Z;
    r.S_lu = Z.transpose() * SlZ;
    r.S_tu = Z.transpose() * StZ;
    r.M_iu = basis.deim.projector;
    r.U = basis.deim.extractor;
    r.s_l = Z.transpose() * (ops.S_l * ubar);
    r.s_t = Z.transpose() * (ops.S_t * ubar);
    r.c_ion = MZ.transpose() * ibar - r.M_iu * gather(idx, ibar);
    r.mean_P = gather(idx, ubar);
    r.stim = MZ.transpose() * stim.pattern;
    r.stim_duration = stim.duration;
    r.a0 = Z.transpose() * (u0 - ubar);
    r.w0 = gather(idx, w0);

    if (meas) {
        meas->validate();
        const Eigen::MatrixXd XZ = meas->site_mask.asDiagonal() * Z;
        r.X_u = Z.transpose() * XZ;
        r.marker_steps = meas->marker_steps;
        for (Eigen::Index k = 0; k < meas->frames.cols(); ++k) {
            const Eigen::VectorXd d = meas->site_mask.cwiseProduct(meas->frames.col(k) - ubar);
            r.u_hat.push_back(Z.transpose() * d);
            r.norm2.push_back(d.squaredNorm());
        }
    } else {
        r.X_u = Eigen::MatrixXd::Zero(Z.cols(), Z.cols());
    }
    r.validate();
    return r;
}

ReducedOperators build_reduced_operators(const AssembledOperators& ops, const ReducedBasis& basis,
                                         const MeasurementSet* meas, const NodalStimulus& stim,
                                         const IonicParams& p) {
    const Eigen::Index n = ops.size();
    return build_reduced_operators(ops, basis, meas, stim, Eigen::VectorXd::Constant(n, p.V_r),
                                   Eigen::VectorXd::Zero(n));
}

Eigen::MatrixXd lift(const PodBasis& Zu, const ReducedTrajectory& t) {
    Eigen::MatrixXd out = Zu.modes * t.a;
    if (Zu.mean.size()) out.colwise() += Zu.mean;
    return out;
}

double lifted_misfit(const PodBasis& Zu, const ReducedTrajectory& t, const MeasurementSet& meas) {
    double J = 0.0;
    for (std::size_t k = 0; k < meas.count(); ++k) {
        const long l = meas.marker_steps[k];
        if (l > t.steps) throw InvalidArgument("marker beyond the reduced trajectory");
        const Eigen::VectorXd u = Zu.lift(t.a_at(l));
        J += meas.site_mask.cwiseProduct(u - meas.frames.col(static_cast<Eigen::Index>(k))).squaredNorm();
    }
    return 0.5 * J;
}

}  // namespace cardiored
