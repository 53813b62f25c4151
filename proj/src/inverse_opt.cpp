#include "cardiored/inverse_opt.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "cardiored/error.hpp"
#include "linear_solver.hpp"

namespace cardiored {

std::array<double, 4> Constraints::h(const Conductivity& s) const {
    const double ratio = s.ml / s.mt;
    return {ratio - ratio_min, ratio_max - ratio, s.mt - mt_min, ml_max - s.ml};
}

bool Constraints::feasible(const Conductivity& s) const {
    if (!std::isfinite(s.ml) || !std::isfinite(s.mt) || !(s.mt > 0.0)) return false;
    for (double v : h(s))
        if (!(v > 0.0)) return false;
    return true;
}

double Constraints::barrier(const Conductivity& s, double mu) const {
    if (!feasible(s)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double v : h(s)) sum += std::log(v);
    return -mu * sum;
}

std::array<double, 2> Constraints::barrier_gradient(const Conductivity& s, double mu) const {
    const auto hv = h(s);
    const double d_ml = 1.0 / s.mt, d_mt = -s.ml / (s.mt * s.mt);  // gradient of ml/mt
    const std::array<std::array<double, 2>, 4> grads{{{d_ml, d_mt}, {-d_ml, -d_mt}, {0.0, 1.0}, {-1.0, 0.0}}};
    std::array<double, 2> g{0.0, 0.0};
    for (int i = 0; i < 4; ++i) {
        g[0] -= mu * grads[i][0] / hv[i];
        g[1] -= mu * grads[i][1] / hv[i];
    }
    return g;
}

double cost_full(const TrajectoryRecord& traj, const MeasurementSet& meas, const Conductivity& sigma,
                 const Regularization& reg) {
    if (meas.size() != traj.u.rows()) throw InvalidArgument("measurement length differs from trajectory");
    double J = 0.0;
    for (std::size_t k = 0; k < meas.count(); ++k) {
        const long l = meas.marker_steps[k];
        if (l > traj.steps || l % traj.stride != 0)
            throw InvalidArgument("trajectory has no frame at marked step " + std::to_string(l));
        J += meas.site_mask.cwiseProduct(traj.u_at(l) - meas.frames.col(static_cast<Eigen::Index>(k))).squaredNorm();
    }
    return 0.5 * J + reg.value(sigma);
}

FullDual solve_full_adjoint(const AssembledOperators& ops, const Conductivity& sigma, const SolveConfig& cfg,
                            const IonicParams& p, const TrajectoryRecord& base, const MeasurementSet& meas) {
    cfg.validate();
    p.validate();
    if (!sigma.positive()) throw InvalidArgument("conductivities must be finite and positive");
    const Eigen::Index n = ops.size();
    const long L = cfg.steps();
    if (base.stride != 1 || base.steps != L || base.u.cols() != L || base.w.cols() != L || base.u.rows() != n)
        throw InvalidArgument("full adjoint needs u and w at every step");
    if (meas.size() != n) throw InvalidArgument("measurement length differs from mesh");

    std::vector<int> marker(static_cast<std::size_t>(L + 1), -1);
    for (std::size_t k = 0; k < meas.count(); ++k) {
        const long s = meas.marker_steps[k];
        if (s < 1 || s > L) throw InvalidArgument("measurement marker outside the simulated steps");
        marker[static_cast<std::size_t>(s)] = static_cast<int>(k);
    }

    detail::SpdSolver first, main;
    first.compute(monodomain_matrix(ops, sigma, bdf_coefficients(1, cfg.bdf_order).alpha0, cfg, p), cfg.linear_tol,
                  cfg.max_linear_iter);
    main.compute(monodomain_matrix(ops, sigma, bdf_coefficients(2, cfg.bdf_order).alpha0, cfg, p), cfg.linear_tol,
                 cfg.max_linear_iter);

    const double scale = cfg.beta * p.C_m / cfg.dt;
    const double du_g = -p.beta2();
    const double gate_den = 1.0 + cfg.dt * p.b * p.d;
    auto u_tilde = [&](long l) -> Eigen::VectorXd {
        if (l == 1) return base.u0;
        return 2.0 * base.u_at(l - 1) - base.u_at(l - 2);
    };

    FullDual d;
    d.q = Eigen::MatrixXd::Zero(n, L);
    d.r = Eigen::MatrixXd::Zero(n, L);
    // du I_ion at steps k+1 and k+2, rolled as k decreases.
    Eigen::VectorXd du1 = Eigen::VectorXd::Zero(n), du2 = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rhs(n), q(n), Mq(n);
    for (long k = L; k >= 1; --k) {
        const Eigen::VectorXd ut = u_tilde(k);
        const Eigen::VectorXd du_k = du_i_ion(ut, base.w_at(k), p);
        const Eigen::VectorXd dw_k = dw_i_ion(ut, p);

        rhs.setZero();
        const int mk = marker[static_cast<std::size_t>(k)];
        if (mk >= 0) rhs = meas.site_mask.cwiseProduct(base.u_at(k) - meas.frames.col(mk));
        if (k + 1 <= L) {
            Mq = ops.M_L.cwiseProduct(d.q.col(k));
            rhs += scale * bdf_coefficients(k + 1, cfg.bdf_order).alpha1 * Mq;
            rhs -= 2.0 * cfg.beta * Mq.cwiseProduct(du1) + 2.0 * du_g * d.r.col(k);
        }
        if (k + 2 <= L) {
            Mq = ops.M_L.cwiseProduct(d.q.col(k + 1));
            rhs += scale * bdf_coefficients(k + 2, cfg.bdf_order).alpha2 * Mq;
            rhs += cfg.beta * Mq.cwiseProduct(du2) + du_g * d.r.col(k + 1);
        }
        const Eigen::VectorXd guess = k + 1 <= L ? Eigen::VectorXd(d.q.col(k)) : Eigen::VectorXd::Zero(n);
        (k == 1 ? first : main).solve(rhs, guess, q, k);
        d.q.col(k - 1) = q;
        const Eigen::VectorXd r_next = k + 1 <= L ? Eigen::VectorXd(d.r.col(k)) : Eigen::VectorXd::Zero(n);
        d.r.col(k - 1) = (r_next - cfg.dt * cfg.beta * ops.M_L.cwiseProduct(q).cwiseProduct(dw_k)) / gate_den;
        du2 = du1;
        du1 = du_k;
    }
    return d;
}

std::array<double, 2> full_gradient(const AssembledOperators& ops, const TrajectoryRecord& base, const FullDual& dual,
                                    const Conductivity& sigma, const Regularization& reg) {
    if (dual.q.cols() != base.u.cols() || dual.q.rows() != base.u.rows())
        throw InvalidArgument("primal and dual step counts differ");
    auto g = reg.gradient(sigma);
    for (Eigen::Index l = 0; l < base.u.cols(); ++l) {
        g[0] -= dual.q.col(l).dot(ops.S_l * base.u.col(l));
        g[1] -= dual.q.col(l).dot(ops.S_t * base.u.col(l));
    }
    return g;
}

std::size_t select_basis(const std::vector<Conductivity>& generators, const Conductivity& sigma, double theta_scale) {
    if (generators.empty()) throw InvalidArgument("basis library is empty");
    if (!(sigma.ml > 0.0)) throw InvalidArgument("basis selection needs sigma_ml > 0");
    if (!(theta_scale > 0.0)) throw InvalidArgument("basis selection angle scale must be positive");
    const double rho = sigma.rho(), theta = std::atan(sigma.mt / sigma.ml);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < generators.size(); ++j) {
        const auto& g = generators[j];
        const double d = std::hypot(rho - g.rho(), theta_scale * (theta - std::atan(g.mt / g.ml)));
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

std::size_t select_basis(const BasisLibrary& lib, const Conductivity& sigma, double theta_scale) {
    std::vector<Conductivity> gens;
    gens.reserve(lib.size());
    for (const auto& b : lib) gens.push_back(b.sigma_gen);
    return select_basis(gens, sigma, theta_scale);
}

std::string to_string(OptimizerStatus s) {
    switch (s) {
        case OptimizerStatus::converged: return "converged";
        case OptimizerStatus::max_iterations: return "max_iterations";
        case OptimizerStatus::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

namespace {

using Vec2 = Eigen::Vector2d;

Vec2 as_vec(const std::array<double, 2>& a) { return {a[0], a[1]}; }
Conductivity as_sigma(const Vec2& v) { return {v[0], v[1]}; }
Vec2 as_vec(const Conductivity& s) { return {s.ml, s.mt}; }

}  // namespace

OptimizationResult barrier_bfgs(const Conductivity& sigma0, const Objective& obj, const BarrierOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& C = opts.constraints;
    if (!C.feasible(sigma0)) throw InvalidArgument("initial conductivity is not strictly feasible");
    if (opts.max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
    if (!(opts.shrink > 0.0 && opts.shrink < 1.0)) throw InvalidArgument("barrier shrink factor must lie in (0, 1)");

    OptimizationResult res;
    double mu = opts.mu0;
    Vec2 x = as_vec(sigma0);
    int basis = obj.select(sigma0);
    auto [J, gJ] = obj.value_and_gradient(sigma0);
    auto phi_grad = [&](const Vec2& at, const std::array<double, 2>& g) {
        return Vec2(as_vec(g) + as_vec(C.barrier_gradient(as_sigma(at), mu)));
    };
    Vec2 g = phi_grad(x, gJ);
    res.history.push_back({0, sigma0, J, g.norm(), basis, mu});

    Eigen::Matrix2d H;
    bool have_H = false;
    int k = 0;
    res.status = OptimizerStatus::max_iterations;
    while (k < opts.max_iter) {
        if (g.norm() < opts.grad_tol * std::max(1.0, std::abs(J))) {
            if (mu <= opts.mu_min) {
                res.status = OptimizerStatus::converged;
                break;
            }
            mu *= opts.shrink;
            g = phi_grad(x, gJ);
            continue;
        }
        const double phi = J + C.barrier(as_sigma(x), mu);

        std::optional<Vec2> accepted;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (!have_H || attempt == 1) {
                H = Eigen::Matrix2d::Identity() / g.norm();
                have_H = true;
            }
            Vec2 dir = -H * g;
            if (!(dir.dot(g) < 0.0)) {
                H = Eigen::Matrix2d::Identity() / g.norm();
                dir = -H * g;
            }
            double step = 1.0;
            for (int halving = 0; halving <= opts.max_halvings; ++halving, step *= 0.5) {
                const Vec2 trial = x + step * dir;
                if (!C.feasible(as_sigma(trial))) continue;
                const double phi_t = obj.value(as_sigma(trial)) + C.barrier(as_sigma(trial), mu);
                if (std::isfinite(phi_t) && phi_t <= phi + opts.armijo * step * g.dot(dir)) {
                    accepted = trial;
                    break;
                }
            }
        }
        if (!accepted) {
            res.status = OptimizerStatus::line_search_failed;
            break;
        }

        const Vec2 x_new = *accepted;
        basis = obj.select(as_sigma(x_new));
        std::tie(J, gJ) = obj.value_and_gradient(as_sigma(x_new));
        const Vec2 g_new = phi_grad(x_new, gJ);
        const Vec2 s = x_new - x, y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix2d V = Eigen::Matrix2d::Identity() - rho * y * s.transpose();
            H = V.transpose() * H * V + rho * s * s.transpose();
        }
        x = x_new;
        g = g_new;
        ++k;
        res.history.push_back({k, as_sigma(x), J, g.norm(), basis, mu});
    }

    res.sigma = as_sigma(x);
    res.J = J;
    res.iterations = k;
    res.counts = obj.counts();
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {

void check_problem(const InverseProblem& prob) {
    if (!prob.ops || !prob.meas) throw InvalidArgument("inverse problem needs operators and measurements");
    if (prob.meas->size() != prob.ops->size()) throw InvalidArgument("measurement length differs from mesh");
    prob.meas->validate();
}

SolveConfig full_record_config(const SolveConfig& base) {
    SolveConfig cfg = base;
    cfg.stride = 1;
    cfg.record_u = true;
    cfg.record_w = true;
    cfg.record_iion = false;
    return cfg;
}

}  // namespace

OptimizationResult optimize_full(const Conductivity& sigma0, const InverseProblem& prob, const BarrierOptions& opts) {
    check_problem(prob);
    const SolveConfig cfg = full_record_config(prob.cfg);
    SolveCounts counts;
    std::optional<std::pair<Conductivity, TrajectoryRecord>> cache;

    auto forward = [&](const Conductivity& s) -> const TrajectoryRecord& {
        if (!cache || !(cache->first == s)) {
            cache.emplace(s, solve_monodomain(*prob.ops, s, prob.stim, cfg, prob.ionic));
            ++counts.forward;
        }
        return cache->second;
    };

    Objective obj;
    obj.select = [](const Conductivity&) { return -1; };
    obj.value = [&](const Conductivity& s) { return cost_full(forward(s), *prob.meas, s, opts.reg); };
    obj.value_and_gradient = [&](const Conductivity& s) {
        const auto& tr = forward(s);
        const double J = cost_full(tr, *prob.meas, s, opts.reg);
        const auto dual = solve_full_adjoint(*prob.ops, s, cfg, prob.ionic, tr, *prob.meas);
        ++counts.backward;
        return std::make_pair(J, full_gradient(*prob.ops, tr, dual, s, opts.reg));
    };
    obj.counts = [&] { return counts; };
    return barrier_bfgs(sigma0, obj, opts);
}

OptimizationResult optimize_reduced(const Conductivity& sigma0, const BasisLibrary& lib, const InverseProblem& prob,
                                    const BarrierOptions& opts) {
    check_problem(prob);
    if (lib.empty()) throw InvalidArgument("basis library is empty");
    SolveCounts counts;
    std::map<std::size_t, ReducedOperators> imported;
    std::size_t current = lib.size();
    const ReducedOperators* red = nullptr;
    std::optional<std::tuple<Conductivity, std::size_t, ReducedTrajectory>> cache;

    auto forward = [&](const Conductivity& s) -> const ReducedTrajectory& {
        if (!cache || !(std::get<0>(*cache) == s) || std::get<1>(*cache) != current) {
            cache.emplace(s, current, solve_reduced(*red, s, prob.cfg, prob.ionic));
            ++counts.forward;
        }
        return std::get<2>(*cache);
    };

    Objective obj;
    obj.select = [&](const Conductivity& s) {
        const std::size_t i = select_basis(lib, s, opts.theta_scale);
        if (i != current) {
            auto it = imported.find(i);
            if (it == imported.end())
                it = imported
                         .emplace(i, build_reduced_operators(*prob.ops, lib[i], prob.meas, prob.stim, prob.ionic))
                         .first;
            red = &it->second;
            current = i;
        }
        return static_cast<int>(i);
    };
    obj.value = [&](const Conductivity& s) { return reduced_misfit(*red, forward(s)) + opts.reg.value(s); };
    obj.value_and_gradient = [&](const Conductivity& s) {
        const auto& tr = forward(s);
        const double J = reduced_misfit(*red, tr) + opts.reg.value(s);
        const auto dual = solve_reduced_adjoint(*red, s, prob.cfg, prob.ionic, tr);
        ++counts.backward;
        return std::make_pair(J, reduced_gradient(*red, tr, dual, s, opts.reg));
    };
    obj.counts = [&] { return counts; };
    auto res = barrier_bfgs(sigma0, obj, opts);
    res.library_size = lib.size();
    return res;
}

OptimizationResult optimize_adaptive(const Conductivity& sigma0, const InverseProblem& prob,
                                     const AdaptiveOptions& opts, BasisLibrary* library_out) {
    check_problem(prob);
    if (opts.cycles < 1 || opts.inner_max_iter < 1) throw InvalidArgument("adaptive loop needs cycles, iterations >= 1");
    if (!opts.barrier.constraints.feasible(sigma0)) throw InvalidArgument("initial conductivity is not strictly feasible");
    const auto t0 = std::chrono::steady_clock::now();

    SolveConfig snap_cfg = prob.cfg;
    snap_cfg.stride = 1;
    snap_cfg.record_u = true;
    snap_cfg.record_iion = true;
    snap_cfg.record_w = false;

    BarrierOptions inner = opts.barrier;
    inner.max_iter = opts.inner_max_iter;

    BasisLibrary lib;
    OptimizationResult total;
    Conductivity sigma = sigma0;
    for (int cycle = 1; cycle <= opts.cycles; ++cycle) {
        bool known = false;
        for (const auto& b : lib) known = known || b.sigma_gen == sigma;
        if (!known) {
            const auto rec = solve_monodomain(*prob.ops, sigma, prob.stim, snap_cfg, prob.ionic);
            ++total.counts.forward;
            lib.push_back(build_reduced_basis(rec, sigma, opts.N, opts.M, *prob.ops));
        } else {
            spdlog::info("adaptive cycle {}: sigma already in the library, no new basis", cycle);
        }
        auto r = optimize_reduced(sigma, lib, prob, inner);
        const int offset = total.history.empty() ? 0 : total.history.back().iter + 1;
        for (auto h : r.history) {
            h.iter += offset;
            total.history.push_back(h);
        }
        total.counts.forward += r.counts.forward;
        total.counts.backward += r.counts.backward;
        total.iterations += r.iterations;
        total.status = r.status;
        total.J = r.J;
        sigma = r.sigma;
        spdlog::info("adaptive cycle {}: sigma = [{:.4f}, {:.4f}], J = {:.6g}", cycle, sigma.ml, sigma.mt, r.J);
    }
    total.sigma = sigma;
    total.library_size = lib.size();
    total.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (library_out) *library_out = std::move(lib);
    return total;
}

}  // namespace cardiored
