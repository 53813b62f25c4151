#include "cardiored/rom.hpp"

#include <Eigen/Cholesky>

#include "cardiored/error.hpp"

namespace cardiored {

namespace {

// LDLT of the two time-constant reduced matrices (BDF1 bootstrap and main).
struct ReducedSystem {
    Eigen::LDLT<Eigen::MatrixXd> first, main;

    ReducedSystem(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                  const IonicParams& p) {
        const Eigen::MatrixXd S = sigma.ml * ops.S_lu + sigma.mt * ops.S_tu;
        const double scale = cfg.beta * p.C_m / cfg.dt;
        first.compute(scale * bdf_coefficients(1, cfg.bdf_order).alpha0 * ops.M_u + S);
        main.compute(scale * bdf_coefficients(2, cfg.bdf_order).alpha0 * ops.M_u + S);
        if (first.info() != Eigen::Success || main.info() != Eigen::Success || !first.isPositive() ||
            !main.isPositive())
            throw SolveError("reduced system matrix is not positive definite", 0);
    }

    const Eigen::LDLT<Eigen::MatrixXd>& at(long step) const { return step == 1 ? first : main; }
};

void check(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg, const IonicParams& p) {
    cfg.validate();
    p.validate();
    ops.validate();
    if (!sigma.positive()) throw InvalidArgument("conductivities must be finite and positive");
}

Eigen::VectorXd extrapolated(const ReducedTrajectory& t, long l) {
    if (l == 1) return t.a0;
    return 2.0 * t.a_at(l - 1) - t.a_at(l - 2);
}

std::vector<int> marker_table(const ReducedOperators& ops, long L) {
    std::vector<int> table(static_cast<std::size_t>(L + 1), -1);
    for (std::size_t i = 0; i < ops.marker_steps.size(); ++i) {
        const long s = ops.marker_steps[i];
        if (s < 1 || s > L) throw InvalidArgument("measurement marker outside the simulated steps");
        table[static_cast<std::size_t>(s)] = static_cast<int>(i);
    }
    return table;
}

}  // namespace

void ReducedOperators::validate() const {
    const Eigen::Index n = N(), m = M();
    auto square = [n](const Eigen::MatrixXd& A) { return A.rows() == n && A.cols() == n; };
    if (n < 1 || m < 1) throw InvalidArgument("reduced operators are empty");
    if (!square(S_lu) || !square(S_tu) || !square(X_u) || M_iu.rows() != n || M_iu.cols() != m || U.cols() != n)
        throw InvalidArgument("reduced operator shapes are inconsistent");
    if (s_l.size() != n || s_t.size() != n || c_ion.size() != n || stim.size() != n || a0.size() != n ||
        mean_P.size() != m || w0.size() != m)
        throw InvalidArgument("reduced offset vectors have the wrong length");
    if (u_hat.size() != marker_steps.size() || norm2.size() != marker_steps.size())
        throw InvalidArgument("reduced measurement data does not match the markers");
    for (const auto& v : u_hat)
        if (v.size() != n) throw InvalidArgument("projected measurement has the wrong length");
}

ReducedTrajectory solve_reduced(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                                const IonicParams& p) {
    check(ops, sigma, cfg, p);
    const long L = cfg.steps();
    const ReducedSystem sys(ops, sigma, cfg, p);
    const double scale = cfg.beta * p.C_m / cfg.dt;
    const Eigen::VectorXd offset = cfg.beta * ops.c_ion + sigma.ml * ops.s_l + sigma.mt * ops.s_t;

    ReducedTrajectory t;
    t.dt = cfg.dt;
    t.steps = L;
    t.a0 = ops.a0;
    t.w0 = ops.w0;
    t.a.resize(ops.N(), L);
    t.w.resize(ops.M(), L);

    Eigen::VectorXd w = ops.w0, uP, rhs;
    for (long l = 1; l <= L; ++l) {
        const auto bdf = bdf_coefficients(l, cfg.bdf_order);
        uP = ops.mean_P + ops.U * extrapolated(t, l);
        w = gating_update(w, uP, cfg.dt, p);
        const Eigen::VectorXd prev2 = l >= 2 ? t.a_at(l - 2) : t.a0;
        rhs = scale * (ops.M_u * (bdf.alpha1 * t.a_at(l - 1) + bdf.alpha2 * prev2)) -
              cfg.beta * (ops.M_iu * i_ion(uP, w, p)) - offset;
        if (l * cfg.dt < ops.stim_duration) rhs += ops.stim;
        t.a.col(l - 1) = sys.at(l).solve(rhs);
        t.w.col(l - 1) = w;
    }
    return t;
}

double reduced_misfit(const ReducedOperators& ops, const ReducedTrajectory& primal) {
    const auto table = marker_table(ops, primal.steps);
    double J = 0.0;
    for (long l = 1; l <= primal.steps; ++l) {
        const int k = table[static_cast<std::size_t>(l)];
        if (k < 0) continue;
        const auto a = primal.a.col(l - 1);
        J += a.dot(ops.X_u * a) - 2.0 * ops.u_hat[static_cast<std::size_t>(k)].dot(a) +
             ops.norm2[static_cast<std::size_t>(k)];
    }
    return 0.5 * J;
}

ReducedDual solve_reduced_adjoint(const ReducedOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                                  const IonicParams& p, const ReducedTrajectory& primal) {
    check(ops, sigma, cfg, p);
    const long L = cfg.steps();
    if (primal.steps != L || primal.a.cols() != L || primal.w.cols() != L || primal.a.rows() != ops.N() ||
        primal.w.rows() != ops.M())
        throw InvalidArgument("reduced adjoint needs the primal state at every step");
    const auto table = marker_table(ops, L);
    const ReducedSystem sys(ops, sigma, cfg, p);
    const double scale = cfg.beta * p.C_m / cfg.dt;
    const double du_g = -p.beta2();
    const double gate_den = 1.0 + cfg.dt * p.b * p.d;

    // Ionic partials at every step, evaluated at (P^T u~^l, w_P^l).
    Eigen::MatrixXd du_I(ops.M(), L), dw_I(ops.M(), L);
    for (long l = 1; l <= L; ++l) {
        const Eigen::VectorXd uP = ops.mean_P + ops.U * extrapolated(primal, l);
        du_I.col(l - 1) = du_i_ion(uP, primal.w.col(l - 1), p);
        dw_I.col(l - 1) = dw_i_ion(uP, p);
    }

    ReducedDual d;
    d.q = Eigen::MatrixXd::Zero(ops.N(), L);
    d.r = Eigen::MatrixXd::Zero(ops.M(), L);
    Eigen::VectorXd rhs(ops.N());
    for (long k = L; k >= 1; --k) {
        rhs.setZero();
        const int mk = table[static_cast<std::size_t>(k)];
        if (mk >= 0) rhs += ops.X_u * primal.a.col(k - 1) - ops.u_hat[static_cast<std::size_t>(mk)];
        if (k + 1 <= L) {
            const auto q1 = d.q.col(k);
            rhs += scale * bdf_coefficients(k + 1, cfg.bdf_order).alpha1 * (ops.M_u * q1);
            const Eigen::VectorXd c = (ops.M_iu.transpose() * q1).cwiseProduct(du_I.col(k));
            rhs -= ops.U.transpose() * (2.0 * cfg.beta * c + 2.0 * du_g * d.r.col(k));
        }
        if (k + 2 <= L) {
            const auto q2 = d.q.col(k + 1);
            rhs += scale * bdf_coefficients(k + 2, cfg.bdf_order).alpha2 * (ops.M_u * q2);
            const Eigen::VectorXd c = (ops.M_iu.transpose() * q2).cwiseProduct(du_I.col(k + 1));
            rhs += ops.U.transpose() * (cfg.beta * c + du_g * d.r.col(k + 1));
        }
        d.q.col(k - 1) = sys.at(k).solve(rhs);
        const Eigen::VectorXd r_next = k + 1 <= L ? Eigen::VectorXd(d.r.col(k)) : Eigen::VectorXd::Zero(ops.M());
        d.r.col(k - 1) =
            (r_next - cfg.dt * cfg.beta * (ops.M_iu.transpose() * d.q.col(k - 1)).cwiseProduct(dw_I.col(k - 1))) /
            gate_den;
    }
    return d;
}

std::array<double, 2> reduced_gradient(const ReducedOperators& ops, const ReducedTrajectory& primal,
                                       const ReducedDual& dual, const Conductivity& sigma, const Regularization& reg) {
    if (dual.q.cols() != primal.a.cols() || dual.q.rows() != primal.a.rows())
        throw InvalidArgument("primal and dual step counts differ");
    const Eigen::MatrixXd Sl_a = ops.S_lu * primal.a, St_a = ops.S_tu * primal.a;
    const Eigen::VectorXd qsum = dual.q.rowwise().sum();
    auto g = reg.gradient(sigma);
    g[0] -= dual.q.cwiseProduct(Sl_a).sum() + qsum.dot(ops.s_l);
    g[1] -= dual.q.cwiseProduct(St_a).sum() + qsum.dot(ops.s_t);
    return g;
}

}  // namespace cardiored
