#include <Eigen/Dense>

#include "doctest.h"

#include "cardiored/error.hpp"
#include "cardiored/rom_build.hpp"

using namespace cardiored;

namespace {

struct Fixture {
    Mesh mesh = build_slab_mesh({1.0, 1.0, 0.2}, {8, 8, 2}, Point3(1, 0, 0));
    AssembledOperators ops = assemble(mesh);
    NodalStimulus stim = nodal_stimulus(corner_and_center_stimulus(mesh, 0.2), mesh);
    IonicParams p;

    SolveConfig config(double T) const {
        SolveConfig c;
        c.T = T;
        return c;
    }

    ReducedBasis identity() const {
        ReducedBasis b;
        b.u = identity_basis(ops.size(), SnapshotField::u);
        b.ion = identity_basis(ops.size(), SnapshotField::iion);
        b.deim = build_deim_operator(b.u, b.ion, ops.M_L);
        return b;
    }

    ReducedBasis pod(const Conductivity& gen, double T, Eigen::Index N, Eigen::Index M) const {
        auto c = config(T);
        c.record_iion = true;
        return build_reduced_basis(solve_monodomain(ops, gen, stim, c, p), gen, N, M, ops);
    }

    MeasurementSet measurements(const Conductivity& s, double T, double noise) const {
        const auto rec = solve_monodomain(ops, s, stim, config(T), p);
        auto m = sample_measurements(rec, surface_site_mask(mesh, 5), 1.0);
        m.frames = add_noise(m.frames, noise, 17);
        return m;
    }
};

double rel_fd_error(double g, double fd) { return std::abs(g - fd) / std::max(std::abs(fd), 1e-300); }

}  // namespace

TEST_SUITE("rom") {

TEST_CASE("full-rank bases reproduce the full-order trajectory") {
    Fixture f;
    const auto cfg = f.config(4.0);
    const auto full = solve_monodomain(f.ops, {3, 1}, f.stim, cfg, f.p);
    const auto b = f.identity();
    const auto red = build_reduced_operators(f.ops, b, nullptr, f.stim, f.p);
    const auto r = solve_reduced(red, {3, 1}, cfg, f.p);
    CHECK((lift(b.u, r) - full.u).norm() / full.u.norm() < 1e-8);
}

TEST_CASE("reduced operator structure") {
    Fixture f;
    const auto b = f.pod({3, 1}, 4.0, 10, 15);
    MeasurementSet all;
    all.site_mask = Eigen::VectorXd::Ones(f.ops.size());
    all.marker_steps = {20};
    all.dt_snap = 1.0;
    all.frames = Eigen::MatrixXd::Zero(f.ops.size(), 1);
    const auto red = build_reduced_operators(f.ops, b, &all, f.stim, f.p);
    CHECK(red.N() == 10);
    CHECK(red.M() == 15);
    CHECK((red.X_u - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((red.M_u - red.M_u.transpose()).cwiseAbs().maxCoeff() < 1e-12 * red.M_u.cwiseAbs().maxCoeff());
    CHECK(Eigen::LLT<Eigen::MatrixXd>(red.M_u).info() == Eigen::Success);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(red.S_lu);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * es.eigenvalues().maxCoeff());
    red.validate();
}

TEST_CASE("projected rest state stays at rest") {
    Fixture f;
    // mean offset carries the rest value, I_ion mean zero
    auto b = f.pod({3, 1}, 4.0, 10, 15);
    b.u.mean = Eigen::VectorXd::Constant(f.ops.size(), f.p.V_r);
    b.ion.mean = Eigen::VectorXd::Zero(f.ops.size());
    NodalStimulus none = f.stim;
    none.pattern.setZero();
    const auto red = build_reduced_operators(f.ops, b, nullptr, none, f.p);
    const auto r = solve_reduced(red, {3, 1}, f.config(3.0), f.p);
    const Eigen::MatrixXd u = lift(b.u, r);
    CHECK((u.array() - f.p.V_r).abs().maxCoeff() < 1e-8);
}

TEST_CASE("X_u cost form equals the lifted misfit") {
    Fixture f;
    const auto meas = f.measurements({4, 1.5}, 5.0, 0.1);
    const auto b = f.pod({3, 1}, 5.0, 12, 20);
    const auto red = build_reduced_operators(f.ops, b, &meas, f.stim, f.p);
    const auto r = solve_reduced(red, {3.5, 1.2}, f.config(5.0), f.p);
    const double direct = lifted_misfit(b.u, r, meas);
    CHECK(std::abs(reduced_misfit(red, r) - direct) <= 1e-10 * direct);
}

TEST_CASE("zero misfit gives a zero adjoint") {
    Fixture f;
    const auto cfg = f.config(3.0);
    const auto b = f.identity();
    const auto rec = solve_monodomain(f.ops, {3, 1}, f.stim, cfg, f.p);
    const auto meas = sample_measurements(rec, surface_site_mask(f.mesh, 5), 1.0);
    const auto red = build_reduced_operators(f.ops, b, &meas, f.stim, f.p);
    const auto r = solve_reduced(red, {3, 1}, cfg, f.p);
    const auto d = solve_reduced_adjoint(red, {3, 1}, cfg, f.p, r);
    CHECK(d.q.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(d.r.cwiseAbs().maxCoeff() < 1e-6);
    Regularization reg{0.5, {2, 2}};
    const ReducedDual zero{Eigen::MatrixXd::Zero(d.q.rows(), d.q.cols()), Eigen::MatrixXd::Zero(d.r.rows(), d.r.cols())};
    const auto g = reduced_gradient(red, r, zero, {3, 1}, reg);
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(-0.5));
}

TEST_CASE("reduced gradient matches central differences") {
    Fixture f;
    const double T = 6.0;
    const auto cfg = f.config(T);
    const auto meas = f.measurements({3.2, 0.8}, T, 0.15);
    const auto b = f.pod({2.5, 0.7}, T, 15, 25);
    const auto red = build_reduced_operators(f.ops, b, &meas, f.stim, f.p);
    const auto Jr = [&](Conductivity s) { return reduced_misfit(red, solve_reduced(red, s, cfg, f.p)); };
    const double h = 1e-3;
    for (Conductivity s : {Conductivity{2.5, 0.8}, {4.0, 1.5}, {1.8, 0.5}, {5.5, 3.0}, {3.2, 0.5}}) {
        const auto r = solve_reduced(red, s, cfg, f.p);
        const auto g = reduced_gradient(red, r, solve_reduced_adjoint(red, s, cfg, f.p, r), s);
        const double fd0 = (Jr({s.ml + h, s.mt}) - Jr({s.ml - h, s.mt})) / (2 * h);
        const double fd1 = (Jr({s.ml, s.mt + h}) - Jr({s.ml, s.mt - h})) / (2 * h);
        CHECK(rel_fd_error(g[0], fd0) < 1e-4);
        CHECK(rel_fd_error(g[1], fd1) < 1e-4);
        // a small step along +gradient increases J_r
        const double step = 1e-4 / std::hypot(g[0], g[1]);
        CHECK(Jr({s.ml + step * g[0], s.mt + step * g[1]}) > Jr(s));
    }
}

TEST_CASE("two-step problem: gradient against differences") {
    Fixture f;
    SolveConfig cfg = f.config(0.1);  // L = 2
    const auto rec = solve_monodomain(f.ops, {3.3, 1.1}, f.stim, cfg, f.p);
    auto meas = sample_measurements(rec, surface_site_mask(f.mesh, 5), 0.05);
    meas.frames.array() += 0.5;
    const auto b = f.identity();
    const auto red = build_reduced_operators(f.ops, b, &meas, f.stim, f.p);
    const Conductivity s{3.0, 1.0};
    const auto r = solve_reduced(red, s, cfg, f.p);
    const auto g = reduced_gradient(red, r, solve_reduced_adjoint(red, s, cfg, f.p, r), s);
    const auto Jr = [&](Conductivity c) { return reduced_misfit(red, solve_reduced(red, c, cfg, f.p)); };
    const double h = 1e-4;
    CHECK(rel_fd_error(g[0], (Jr({s.ml + h, s.mt}) - Jr({s.ml - h, s.mt})) / (2 * h)) < 1e-5);
    CHECK(rel_fd_error(g[1], (Jr({s.ml, s.mt + h}) - Jr({s.ml, s.mt - h})) / (2 * h)) < 1e-5);
}

TEST_CASE("shape mismatches are rejected") {
    Fixture f;
    auto b = f.pod({3, 1}, 3.0, 6, 8);
    const auto red = build_reduced_operators(f.ops, b, nullptr, f.stim, f.p);
    auto broken = red;
    broken.S_lu = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(broken.validate(), InvalidArgument);
    CHECK_THROWS_AS(solve_reduced(broken, {3, 1}, f.config(1.0), f.p), InvalidArgument);
}

}  // TEST_SUITE
