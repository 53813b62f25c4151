#include "doctest.h"

#include "cardiored/error.hpp"
#include "cardiored/forward.hpp"

using namespace cardiored;

namespace {

struct Slab {
    Mesh mesh;
    AssembledOperators ops;
    NodalStimulus stim;
};

Slab coarse_slab(double radius = 0.2) {
    Slab s;
    s.mesh = build_slab_mesh({1.0, 1.0, 0.2}, {8, 8, 2}, Point3(1, 0, 0));
    s.ops = assemble(s.mesh);
    s.stim = nodal_stimulus(corner_and_center_stimulus(s.mesh, radius), s.mesh);
    return s;
}

SolveConfig short_run(double T = 3.0) {
    SolveConfig c;
    c.T = T;
    return c;
}

double space_time_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_SUITE("forward") {

TEST_CASE("BDF coefficients") {
    const auto b1 = bdf_coefficients(1, 2);
    CHECK(b1.alpha0 == 1.0);
    CHECK(b1.alpha1 == 1.0);
    CHECK(b1.alpha2 == 0.0);
    const auto b2 = bdf_coefficients(2, 2);
    CHECK(b2.alpha0 == 1.5);
    CHECK(b2.alpha1 == 2.0);
    CHECK(b2.alpha2 == -0.5);
    CHECK(bdf_coefficients(7, 1).alpha0 == 1.0);
}

TEST_CASE("rest state is a fixed point") {
    auto s = coarse_slab();
    s.stim.pattern.setZero();
    IonicParams p;
    const auto rec = solve_monodomain(s.ops, {3.0, 1.0}, s.stim, short_run(2.0), p);
    CHECK((rec.u.array() - p.V_r).abs().maxCoeff() < 1e-8);
}

TEST_CASE("stimulus footprint and half-open support") {
    const auto s = coarse_slab(0.2);
    const auto proto = corner_and_center_stimulus(s.mesh, 0.2);
    CHECK(proto.sites.size() == 5);
    const auto at0 = apply_stimulus(proto, s.mesh, 0.0);
    for (std::size_t i = 0; i < s.mesh.num_nodes(); ++i) {
        bool inside = false;
        for (const auto& site : proto.sites) inside = inside || (s.mesh.nodes[i] - site.center).norm() <= site.radius;
        CHECK(at0[static_cast<Eigen::Index>(i)] == (inside ? proto.amplitude : 0.0));
    }
    CHECK(apply_stimulus(proto, s.mesh, proto.duration).isZero());
    auto zero = proto;
    zero.amplitude = 0.0;
    CHECK(apply_stimulus(zero, s.mesh, 0.3).isZero());
    auto bad = proto;
    bad.sites[0].radius = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("monodomain matrix is affine in beta") {
    const auto s = coarse_slab();
    IonicParams p;
    SolveConfig c1 = short_run(), c2 = short_run();
    c2.beta = 2.0 * c1.beta;
    const SparseMatrix d = monodomain_matrix(s.ops, {3, 1}, 1.5, c2, p) - monodomain_matrix(s.ops, {3, 1}, 1.5, c1, p);
    const Eigen::VectorXd expected = (c1.beta * p.C_m * 1.5 / c1.dt) * s.ops.M_L;
    CHECK((Eigen::VectorXd(d.diagonal()) - expected).cwiseAbs().maxCoeff() < 1e-9 * expected.maxCoeff());
}

TEST_CASE("stride records every k-th step") {
    const auto s = coarse_slab();
    auto c = short_run(2.0);
    c.stride = 5;
    c.record_w = c.record_iion = true;
    const auto rec = solve_monodomain(s.ops, {3, 1}, s.stim, c, IonicParams{});
    CHECK(rec.frames() == 8);
    CHECK(rec.u.cols() == 8);
    CHECK(rec.w.cols() == 8);
    CHECK(rec.frame_step(0) == 5);
    c.stride = 1;
    const auto full = solve_monodomain(s.ops, {3, 1}, s.stim, c, IonicParams{});
    CHECK((full.u.col(9) - rec.u.col(1)).norm() == 0.0);
}

TEST_CASE("isotropic solution is symmetric under swapping x and y") {
    const auto s = coarse_slab();
    const auto rec = solve_monodomain(s.ops, {2, 2}, s.stim, short_run(3.0), IonicParams{});
    const int nx = 9, ny = 9, nz = 3;
    double worst = 0.0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int a = i + nx * (j + ny * k), b = j + nx * (i + ny * k);
                worst = std::max(worst, (rec.u.row(a) - rec.u.row(b)).cwiseAbs().maxCoeff());
            }
    CHECK(worst < 1e-6);
}

TEST_CASE("sensitivities match central differences") {
    const auto s = coarse_slab();
    IonicParams p;
    auto c = short_run(4.0);
    c.record_w = true;
    const Conductivity sigma{3.0, 1.0};
    const auto base = solve_monodomain(s.ops, sigma, s.stim, c, p);
    const double h = 1e-3;
    for (auto which : {ConductivityComponent::ml, ConductivityComponent::mt}) {
        const Conductivity dp = which == ConductivityComponent::ml ? Conductivity{h, 0} : Conductivity{0, h};
        const auto up = solve_monodomain(s.ops, {sigma.ml + dp.ml, sigma.mt + dp.mt}, s.stim, c, p);
        const auto dn = solve_monodomain(s.ops, {sigma.ml - dp.ml, sigma.mt - dp.mt}, s.stim, c, p);
        const Eigen::MatrixXd fd = (up.u - dn.u) / (2 * h);
        const auto sens = solve_sensitivity(s.ops, sigma, s.stim, c, p, base, which);
        CHECK(space_time_rel(sens.u, fd) < 1e-3);
    }
}

TEST_CASE("sensitivity at rest vanishes and needs full frames") {
    auto s = coarse_slab();
    s.stim.pattern.setZero();
    IonicParams p;
    auto c = short_run(1.0);
    c.record_w = true;
    const auto base = solve_monodomain(s.ops, {3, 1}, s.stim, c, p);
    const auto sens = solve_sensitivity(s.ops, {3, 1}, s.stim, c, p, base, ConductivityComponent::ml);
    CHECK(sens.u.cwiseAbs().maxCoeff() < 1e-8);
    c.record_w = false;
    const auto no_w = solve_monodomain(s.ops, {3, 1}, s.stim, c, p);
    CHECK_THROWS_AS(solve_sensitivity(s.ops, {3, 1}, s.stim, c, p, no_w, ConductivityComponent::mt), InvalidArgument);
}

TEST_CASE("linear solver failure is reported with the step") {
    const auto s = coarse_slab();
    auto c = short_run(1.0);
    c.max_linear_iter = 1;
    c.linear_tol = 1e-16;
    try {
        solve_monodomain(s.ops, {3, 1}, s.stim, c, IonicParams{});
        FAIL("expected a solve error");
    } catch (const SolveError& e) {
        CHECK(e.step() == 1);
    }
}

TEST_CASE("input validation") {
    const auto s = coarse_slab();
    IonicParams p;
    CHECK_THROWS_AS(solve_monodomain(s.ops, {-1, 1}, s.stim, short_run(), p), InvalidArgument);
    auto c = short_run();
    c.dt = 0.0;
    CHECK_THROWS_AS(solve_monodomain(s.ops, {3, 1}, s.stim, c, p), InvalidArgument);
    auto e = short_run();
    e.ionic = IonicEvaluation::exact;
    CHECK_THROWS_AS(solve_monodomain(s.ops, {3, 1}, s.stim, e, p), InvalidArgument);
}

TEST_CASE("exact quadrature path runs and stays close on a tiny mesh") {
    const auto s = coarse_slab();
    IonicParams p;
    auto c = short_run(2.0);
    const auto nodal = solve_monodomain(s.ops, {3, 1}, s.stim, c, p);
    c.ionic = IonicEvaluation::exact;
    const ExactIonicLoad load(s.mesh);
    const auto n = s.ops.size();
    const auto exact = solve_monodomain(s.ops, {3, 1}, s.stim, c, p, Eigen::VectorXd::Constant(n, p.V_r),
                                        Eigen::VectorXd::Zero(n), &load);
    CHECK(exact.u.allFinite());
    CHECK(space_time_rel(exact.u, nodal.u) < 0.5);
}

}  // TEST_SUITE
