#include "cardiored/deim.hpp"

#include <cmath>

#include "cardiored/error.hpp"

namespace cardiored {

namespace {

constexpr double kPivotTol = 1e-14;

Eigen::Index argmax_abs(const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    double best_val = -1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > best_val) {
            best_val = std::abs(v[i]);
            best = i;
        }
    return best;
}

}  // namespace

DeimSelection select_indices(const Eigen::MatrixXd& Z) {
    const Eigen::Index n = Z.rows(), M = Z.cols();
    if (M < 1 || M > n) throw InvalidArgument("DEIM needs 1 <= M <= n basis vectors");

    DeimSelection out;
    out.indices.reserve(static_cast<std::size_t>(M));
    Eigen::Index p = argmax_abs(Z.col(0));
    double rho = Z(p, 0);
    if (std::abs(rho) < kPivotTol) throw DegenerateBasisError("DEIM: first basis vector vanishes");
    out.indices.push_back(p);
    Eigen::MatrixXd inv(1, 1);
    inv(0, 0) = 1.0 / rho;

    Eigen::VectorXd Ptz, c, r, aTM;
    for (Eigen::Index l = 1; l < M; ++l) {
        Ptz = gather(out.indices, Z.col(l));
        c = inv * Ptz;
        r = Z.col(l) - Z.leftCols(l) * c;
        p = argmax_abs(r);
        rho = r[p];
        if (std::abs(rho) < kPivotTol)
            throw DegenerateBasisError("DEIM: residual pivot below tolerance at basis vector " + std::to_string(l));
        aTM = (Z.row(p).head(l) * inv).transpose();

        Eigen::MatrixXd next(l + 1, l + 1);
        next.topLeftCorner(l, l) = inv + c * aTM.transpose() / rho;
        next.topRightCorner(l, 1) = -c / rho;
        next.bottomLeftCorner(1, l) = -aTM.transpose() / rho;
        next(l, l) = 1.0 / rho;
        inv = std::move(next);
        out.indices.push_back(p);
    }
    out.inv_PtZ = std::move(inv);
    return out;
}

DeimSelection select_indices(const PodBasis& basis) { return select_indices(basis.modes); }

Eigen::VectorXd gather(const std::vector<Eigen::Index>& indices, const Eigen::VectorXd& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[indices[i]];
    return out;
}

DeimOperator build_deim_operator(const PodBasis& Zu, const PodBasis& Zion, const Eigen::VectorXd& lumped_mass) {
    if (Zu.size() != Zion.size() || lumped_mass.size() != Zu.size())
        throw InvalidArgument("DEIM operator: bases and mass differ in length");
    auto sel = select_indices(Zion);
    DeimOperator op;
    op.indices = std::move(sel.indices);
    op.inv_PtZ = std::move(sel.inv_PtZ);
    op.projector = Zu.modes.transpose() * (lumped_mass.asDiagonal() * Zion.modes) * op.inv_PtZ;
    op.extractor.resize(op.points(), Zu.rank());
    for (Eigen::Index i = 0; i < op.points(); ++i) op.extractor.row(i) = Zu.modes.row(op.indices[i]);
    return op;
}

Eigen::VectorXd deim_approximate(const DeimOperator& op, const PodBasis& Zion, const Eigen::VectorXd& f_at_points) {
    if (f_at_points.size() != op.points() || Zion.rank() != op.points())
        throw InvalidArgument("DEIM approximation: expected " + std::to_string(op.points()) + " point values");
    const Eigen::VectorXd mean = Zion.mean.size() ? Zion.mean : Eigen::VectorXd::Zero(Zion.size());
    return mean + Zion.modes * (op.inv_PtZ * (f_at_points - gather(op.indices, mean)));
}

Eigen::VectorXd deim_project(const DeimOperator& op, const Eigen::VectorXd& f_at_points) {
    if (f_at_points.size() != op.points())
        throw InvalidArgument("DEIM projection: expected " + std::to_string(op.points()) + " point values");
    return op.projector * f_at_points;
}

}  // namespace cardiored
