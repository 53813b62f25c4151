#include "cardiored/forward.hpp"

#include <Eigen/IterativeLinearSolvers>

#include "cardiored/error.hpp"
#include "linear_solver.hpp"

namespace cardiored {

void StimulusProtocol::validate() const {
    for (const auto& s : sites)
        if (!(s.radius > 0.0)) throw InvalidArgument("stimulus radius must be positive");
    if (!(duration > 0.0)) throw InvalidArgument("stimulus duration must be positive");
}

StimulusProtocol corner_and_center_stimulus(const Mesh& mesh, double radius) {
    const auto box = bounding_box(mesh);
    const double zc = 0.5 * (box.lo.z() + box.hi.z());
    StimulusProtocol stim;
    for (double x : {box.lo.x(), box.hi.x()})
        for (double y : {box.lo.y(), box.hi.y()}) stim.sites.push_back({Point3(x, y, zc), radius});
    stim.sites.push_back({Point3(0.5 * (box.lo.x() + box.hi.x()), 0.5 * (box.lo.y() + box.hi.y()), zc), radius});
    return stim;
}

NodalStimulus nodal_stimulus(const StimulusProtocol& stim, const Mesh& mesh) {
    stim.validate();
    NodalStimulus out;
    out.duration = stim.duration;
    out.pattern = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        for (const auto& s : stim.sites)
            if ((mesh.nodes[i] - s.center).norm() <= s.radius) {
                out.pattern[static_cast<Eigen::Index>(i)] = stim.amplitude;
                break;
            }
    return out;
}

Eigen::VectorXd apply_stimulus(const StimulusProtocol& stim, const Mesh& mesh, double t) {
    const auto ns = nodal_stimulus(stim, mesh);
    if (ns.active(t)) return ns.pattern;
    return Eigen::VectorXd::Zero(ns.pattern.size());
}

Eigen::VectorXd TrajectoryRecord::u_at(long l) const {
    if (l == 0) return u0;
    return u.col(l / stride - 1);
}

Eigen::VectorXd TrajectoryRecord::w_at(long l) const {
    if (l == 0) return w0;
    return w.col(l / stride - 1);
}

SparseMatrix monodomain_matrix(const AssembledOperators& ops, const Conductivity& sigma, double alpha0,
                               const SolveConfig& cfg, const IonicParams& p) {
    SparseMatrix A = sigma.ml * ops.S_l + sigma.mt * ops.S_t;
    const Eigen::VectorXd shift = (cfg.beta * p.C_m * alpha0 / cfg.dt) * ops.M_L;
    for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += shift[i];
    A.makeCompressed();
    return A;
}

namespace {

void check_inputs(const AssembledOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                  const IonicParams& p) {
    cfg.validate();
    p.validate();
    if (!sigma.positive()) throw InvalidArgument("conductivities must be finite and positive");
    if (ops.size() == 0) throw InvalidArgument("empty operators");
}

}  // namespace

TrajectoryRecord solve_monodomain(const AssembledOperators& ops, const Conductivity& sigma,
                                  const NodalStimulus& stim, const SolveConfig& cfg, const IonicParams& p,
                                  const Eigen::VectorXd& u0, const Eigen::VectorXd& w0,
                                  const ExactIonicLoad* exact_load) {
    check_inputs(ops, sigma, cfg, p);
    const Eigen::Index n = ops.size();
    if (u0.size() != n || w0.size() != n) throw InvalidArgument("initial data length differs from mesh size");
    if (stim.pattern.size() != n) throw InvalidArgument("stimulus footprint length differs from mesh size");
    const bool exact = cfg.ionic == IonicEvaluation::exact;
    if (exact && exact_load == nullptr) throw InvalidArgument("exact ionic evaluation needs a quadrature load");

    const long L = cfg.steps();
    TrajectoryRecord rec;
    rec.dt = cfg.dt;
    rec.steps = L;
    rec.stride = cfg.stride;
    rec.u0 = u0;
    rec.w0 = w0;
    const Eigen::Index frames = rec.frames();
    if (cfg.record_u) rec.u.resize(n, frames);
    if (cfg.record_w) rec.w.resize(n, frames);
    if (cfg.record_iion) rec.iion.resize(n, frames);

    const double mass_scale = cfg.beta * p.C_m / cfg.dt;
    detail::SpdSolver bootstrap, main;
    bootstrap.compute(monodomain_matrix(ops, sigma, bdf_coefficients(1, cfg.bdf_order).alpha0, cfg, p),
                      cfg.linear_tol, cfg.max_linear_iter);
    main.compute(monodomain_matrix(ops, sigma, bdf_coefficients(2, cfg.bdf_order).alpha0, cfg, p),
                 cfg.linear_tol, cfg.max_linear_iter);

    Eigen::VectorXd u_prev = u0, u_prev2 = u0, w = w0, u_tilde(n), rhs(n), iion(n), u_next(n);
    for (long l = 1; l <= L; ++l) {
        const auto bdf = bdf_coefficients(l, cfg.bdf_order);
        u_tilde = l == 1 ? u_prev : Eigen::VectorXd(2.0 * u_prev - u_prev2);
        w = gating_update(w, u_tilde, cfg.dt, p);
        iion = i_ion(u_tilde, w, p);

        rhs = mass_scale * ops.M_L.cwiseProduct(bdf.alpha1 * u_prev + bdf.alpha2 * u_prev2);
        if (exact)
            rhs -= cfg.beta * (*exact_load)(u_tilde, w, p);
        else
            rhs -= cfg.beta * ops.M_L.cwiseProduct(iion);
        if (stim.active(l * cfg.dt)) rhs += ops.M_L.cwiseProduct(stim.pattern);

        auto& solver = l == 1 ? bootstrap : main;
        rec.forward_iterations += solver.solve(rhs, u_tilde, u_next, l);

        u_prev2 = u_prev;
        u_prev = u_next;
        if (l % cfg.stride == 0) {
            const Eigen::Index f = l / cfg.stride - 1;
            if (cfg.record_u) rec.u.col(f) = u_next;
            if (cfg.record_w) rec.w.col(f) = w;
            if (cfg.record_iion) rec.iion.col(f) = iion;
        }
    }
    return rec;
}

TrajectoryRecord solve_monodomain(const AssembledOperators& ops, const Conductivity& sigma,
                                  const NodalStimulus& stim, const SolveConfig& cfg, const IonicParams& p) {
    const Eigen::Index n = ops.size();
    return solve_monodomain(ops, sigma, stim, cfg, p, Eigen::VectorXd::Constant(n, p.V_r),
                            Eigen::VectorXd::Zero(n));
}

TrajectoryRecord solve_sensitivity(const AssembledOperators& ops, const Conductivity& sigma,
                                   const NodalStimulus& /*stim*/, const SolveConfig& cfg, const IonicParams& p,
                                   const TrajectoryRecord& base, ConductivityComponent which) {
    check_inputs(ops, sigma, cfg, p);
    const Eigen::Index n = ops.size();
    const long L = cfg.steps();
    if (base.stride != 1 || base.steps != L || base.u.cols() != L || base.w.cols() != L ||
        base.u0.size() != n || base.w0.size() != n)
        throw InvalidArgument("sensitivity solve needs base u and w frames at every step");

    const SparseMatrix& dA = which == ConductivityComponent::ml ? ops.S_l : ops.S_t;
    const double mass_scale = cfg.beta * p.C_m / cfg.dt;
    const double gate_den = 1.0 + cfg.dt * p.b * p.d;
    const double gate_u = cfg.dt * p.beta2();

    detail::SpdSolver bootstrap, main;
    bootstrap.compute(monodomain_matrix(ops, sigma, bdf_coefficients(1, cfg.bdf_order).alpha0, cfg, p),
                      cfg.linear_tol, cfg.max_linear_iter);
    main.compute(monodomain_matrix(ops, sigma, bdf_coefficients(2, cfg.bdf_order).alpha0, cfg, p),
                 cfg.linear_tol, cfg.max_linear_iter);

    TrajectoryRecord rec;
    rec.dt = cfg.dt;
    rec.steps = L;
    rec.stride = 1;
    rec.u0 = Eigen::VectorXd::Zero(n);
    rec.w0 = Eigen::VectorXd::Zero(n);
    rec.u.resize(n, L);
    rec.w.resize(n, L);

    Eigen::VectorXd s_prev = rec.u0, s_prev2 = rec.u0, sw = rec.w0, s_tilde(n), rhs(n), s_next(n);
    for (long l = 1; l <= L; ++l) {
        const auto bdf = bdf_coefficients(l, cfg.bdf_order);
        const Eigen::VectorXd u_tilde = l == 1 ? base.u0 : Eigen::VectorXd(2.0 * base.u_at(l - 1) - base.u_at(l - 2));
        const Eigen::VectorXd w_l = base.w_at(l);
        if (l == 1)
            s_tilde.setZero();
        else
            s_tilde = 2.0 * s_prev - s_prev2;
        sw = (sw + gate_u * s_tilde) / gate_den;

        const Eigen::VectorXd d_iion =
            du_i_ion(u_tilde, w_l, p).cwiseProduct(s_tilde) + dw_i_ion(u_tilde, p).cwiseProduct(sw);
        rhs = mass_scale * ops.M_L.cwiseProduct(bdf.alpha1 * s_prev + bdf.alpha2 * s_prev2) -
              cfg.beta * ops.M_L.cwiseProduct(d_iion) - dA * base.u_at(l);

        auto& solver = l == 1 ? bootstrap : main;
        rec.forward_iterations += solver.solve(rhs, s_tilde, s_next, l);
        s_prev2 = s_prev;
        s_prev = s_next;
        rec.u.col(l - 1) = s_next;
        rec.w.col(l - 1) = sw;
    }
    return rec;
}

}  // namespace cardiored
