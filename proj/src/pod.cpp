#include "cardiored/pod.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <spdlog/spdlog.h>

#include "cardiored/error.hpp"

namespace cardiored {

namespace {

constexpr double kRankTol = 1e-14;

struct ThinSvd {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr;
    Eigen::MatrixXd U_R;
    Eigen::VectorXd s;
};

ThinSvd thin_svd(const Eigen::MatrixXd& Y, bool want_vectors) {
    const Eigen::Index m = Y.cols();
    ThinSvd out{Eigen::HouseholderQR<Eigen::MatrixXd>(Y), {}, {}};
    const Eigen::Index k = std::min(Y.rows(), m);
    Eigen::MatrixXd R = out.qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(R, want_vectors ? Eigen::ComputeThinU : 0);
    out.s = svd.singularValues();
    if (want_vectors) out.U_R = svd.matrixU();
    return out;
}

}  // namespace

std::string to_string(SnapshotField f) { return f == SnapshotField::u ? "u" : "iion"; }

SnapshotField snapshot_field_from_string(const std::string& s) {
    if (s == "u") return SnapshotField::u;
    if (s == "iion") return SnapshotField::iion;
    throw InvalidArgument("unknown snapshot field '" + s + "'");
}

SnapshotMatrix make_snapshots(Eigen::MatrixXd raw, const Conductivity& sigma_gen, SnapshotField field,
                              bool center) {
    if (raw.cols() < 1) throw InvalidArgument("snapshot set needs at least one column");
    SnapshotMatrix s;
    s.sigma_gen = sigma_gen;
    s.field = field;
    s.mean = center ? Eigen::VectorXd(raw.rowwise().mean()) : Eigen::VectorXd::Zero(raw.rows());
    if (center) raw.colwise() -= s.mean;
    s.columns = std::move(raw);
    return s;
}

SnapshotMatrix trajectory_snapshots(const TrajectoryRecord& rec, const Conductivity& sigma_gen,
                                    SnapshotField field, bool center) {
    const Eigen::MatrixXd& frames = field == SnapshotField::u ? rec.u : rec.iion;
    if (frames.cols() == 0) throw InvalidArgument("trajectory does not hold " + to_string(field) + " frames");
    return make_snapshots(frames, sigma_gen, field, center);
}

PodBasis build_pod(const SnapshotMatrix& snaps, Eigen::Index N) {
    const Eigen::Index m = snaps.count();
    if (N < 1 || N > m) throw InvalidArgument("POD rank must satisfy 1 <= N <= number of snapshots");
    if (m > snaps.size()) throw InvalidArgument("more snapshots than rows; thin QR needs m <= n");

    auto f = thin_svd(snaps.columns, true);
    Eigen::Index keep = N;
    const double s1 = f.s.size() ? f.s[0] : 0.0;
    if (!(s1 > 0.0)) throw DegenerateBasisError("snapshot set is identically zero");
    for (Eigen::Index i = 0; i < N; ++i)
        if (f.s[i] < kRankTol * s1) {
            keep = i;
            spdlog::warn("POD: snapshot rank {} below requested {}; basis truncated", i, N);
            break;
        }

    PodBasis basis;
    basis.sigma_gen = snaps.sigma_gen;
    basis.field = snaps.field;
    basis.mean = snaps.mean;
    basis.singular_values = f.s;
    Eigen::MatrixXd lifted = Eigen::MatrixXd::Zero(snaps.size(), keep);
    lifted.topRows(f.U_R.rows()) = f.U_R.leftCols(keep);
    basis.modes = f.qr.householderQ() * lifted;
    return basis;
}

Eigen::Index rank_for_decay(const Eigen::VectorXd& s, double tau) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] <= tau * s[0]) return i + 1;
    return s.size();
}

Eigen::VectorXd snapshot_singular_values(const SnapshotMatrix& snaps) {
    return thin_svd(snaps.columns, false).s;
}

std::vector<double> singular_decay_report(const SnapshotMatrix& snaps) {
    const Eigen::VectorXd s = snapshot_singular_values(snaps);
    std::vector<double> out(static_cast<std::size_t>(s.size()), 0.0);
    if (s.size() == 0) return out;
    if (!(s[0] > 0.0)) {
        out[0] = 1.0;
        return out;
    }
    for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s[i] / s[0];
    return out;
}

std::size_t first_index_below(const std::vector<double>& ratios, double threshold) {
    for (std::size_t i = 0; i < ratios.size(); ++i)
        if (ratios[i] <= threshold) return i + 1;
    return 0;
}

SnapshotMatrix augment_with_sensitivities(const SnapshotMatrix& snaps, const Eigen::MatrixXd& sens_l,
                                          const Eigen::MatrixXd& sens_t, double delta_l, double delta_t) {
    const Eigen::Index m = snaps.count();
    if (sens_l.cols() != m || sens_t.cols() != m || sens_l.rows() != snaps.size() ||
        sens_t.rows() != snaps.size())
        throw InvalidArgument("sensitivity frames do not match the snapshot set");
    const bool use_l = delta_l != 0.0, use_t = delta_t != 0.0;
    const Eigen::Index per = 1 + (use_l ? 1 : 0) + (use_t ? 1 : 0);
    Eigen::MatrixXd cols(snaps.size(), per * m);
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        cols.col(c++) = snaps.columns.col(j) + snaps.mean;
        if (use_l) cols.col(c++) = delta_l * sens_l.col(j);
        if (use_t) cols.col(c++) = delta_t * sens_t.col(j);
    }
    return make_snapshots(std::move(cols), snaps.sigma_gen, snaps.field, true);
}

Eigen::MatrixXd ionic_sensitivity_frames(const TrajectoryRecord& base, const TrajectoryRecord& sens,
                                         const IonicParams& p) {
    const long L = base.steps;
    if (base.stride != 1 || sens.stride != 1 || sens.steps != L || base.u.cols() != L || base.w.cols() != L)
        throw InvalidArgument("ionic sensitivities need full-resolution base and sensitivity records");
    Eigen::MatrixXd out(base.u.rows(), L);
    for (long l = 1; l <= L; ++l) {
        const Eigen::VectorXd u_tilde = l == 1 ? base.u0 : Eigen::VectorXd(2.0 * base.u_at(l - 1) - base.u_at(l - 2));
        const Eigen::VectorXd s_tilde =
            l == 1 ? Eigen::VectorXd::Zero(base.u0.size()) : Eigen::VectorXd(2.0 * sens.u_at(l - 1) - sens.u_at(l - 2));
        out.col(l - 1) = du_i_ion(u_tilde, base.w_at(l), p).cwiseProduct(s_tilde) +
                         dw_i_ion(u_tilde, p).cwiseProduct(sens.w_at(l));
    }
    return out;
}

PodBasis identity_basis(Eigen::Index n, SnapshotField field) {
    PodBasis b;
    b.modes = Eigen::MatrixXd::Identity(n, n);
    b.singular_values = Eigen::VectorXd::Ones(n);
    b.field = field;
    b.mean = Eigen::VectorXd::Zero(n);
    return b;
}

}  // namespace cardiored
