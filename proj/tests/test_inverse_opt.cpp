#include <cmath>

#include "doctest.h"

#include "cardiored/error.hpp"
#include "cardiored/inverse_opt.hpp"
#include "cardiored/sampling_doe.hpp"

using namespace cardiored;

namespace {

struct Fixture {
    Mesh mesh = build_slab_mesh({1.0, 1.0, 0.2}, {8, 8, 2}, Point3(1, 0, 0));
    AssembledOperators ops = assemble(mesh);
    NodalStimulus stim = nodal_stimulus(corner_and_center_stimulus(mesh, 0.2), mesh);
    IonicParams p;
    SolveConfig cfg = [] {
        SolveConfig c;
        c.T = 6.0;
        return c;
    }();

    MeasurementSet measure(const Conductivity& s, double noise, int grid = 100) const {
        auto m = sample_measurements(solve_monodomain(ops, s, stim, cfg, p), surface_site_mask(mesh, grid), 1.0);
        m.frames = add_noise(m.frames, noise, 5);
        m.sigma_exact = s;
        return m;
    }
};

}  // namespace

TEST_SUITE("inverse_opt") {

TEST_CASE("constraints and barrier") {
    Constraints c;
    const auto h = c.h({3, 1});
    CHECK(h[0] == doctest::Approx(2));
    CHECK(h[1] == doctest::Approx(97));
    CHECK(h[2] == doctest::Approx(0.95));
    CHECK(h[3] == doctest::Approx(4));
    CHECK(c.feasible({3, 1}));
    CHECK_FALSE(c.feasible({1, 1}));
    CHECK_FALSE(c.feasible({7, 1}));
    CHECK_FALSE(c.feasible({3, 0.05}));
    CHECK_FALSE(c.feasible({6, 0.055}));
    CHECK(std::isinf(c.barrier({1, 2}, 1.0)));
    const double eps = 1e-6;
    const Conductivity s{4.0, 0.7};
    const auto g = c.barrier_gradient(s, 0.3);
    CHECK(g[0] == doctest::Approx((c.barrier({s.ml + eps, s.mt}, 0.3) - c.barrier({s.ml - eps, s.mt}, 0.3)) / (2 * eps)).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx((c.barrier({s.ml, s.mt + eps}, 0.3) - c.barrier({s.ml, s.mt - eps}, 0.3)) / (2 * eps)).epsilon(1e-6));
}

TEST_CASE("full cost on hand-made data") {
    Fixture f;
    const auto rec = solve_monodomain(f.ops, {3, 1}, f.stim, f.cfg, f.p);
    auto meas = sample_measurements(rec, surface_site_mask(f.mesh), 1.0);
    CHECK(cost_full(rec, meas) == 0.0);
    Regularization reg{2.0, {1, 1}};
    meas.site_mask.setZero();
    meas.frames.array() += 3.0;
    CHECK(cost_full(rec, meas, {3, 1}, reg) == doctest::Approx(reg.value({3, 1})));
    // one site, one marker, misfit delta
    MeasurementSet one;
    one.site_mask = Eigen::VectorXd::Zero(f.ops.size());
    one.site_mask[7] = 1.0;
    one.marker_steps = {40};
    one.frames = Eigen::MatrixXd::Zero(f.ops.size(), 1);
    one.frames(7, 0) = rec.u(7, 39) + 0.3;
    CHECK(cost_full(rec, one) == doctest::Approx(0.5 * 0.09));
    one.marker_steps = {1000};
    CHECK_THROWS_AS(cost_full(rec, one), InvalidArgument);
}

TEST_CASE("full gradient matches central differences") {
    Fixture f;
    auto c = f.cfg;
    c.record_w = true;
    const auto meas = f.measure({3.2, 0.8}, 0.15);
    for (Conductivity s : {Conductivity{2.5, 0.8}, {4.0, 1.5}, {1.8, 0.5}, {5.5, 3.0}, {3.2, 0.5}}) {
        const auto tr = solve_monodomain(f.ops, s, f.stim, c, f.p);
        const auto g = full_gradient(f.ops, tr, solve_full_adjoint(f.ops, s, c, f.p, tr, meas), s);
        const auto J = [&](Conductivity x) { return cost_full(solve_monodomain(f.ops, x, f.stim, f.cfg, f.p), meas); };
        const double h = 1e-4;
        const double fd0 = (J({s.ml + h, s.mt}) - J({s.ml - h, s.mt})) / (2 * h);
        const double fd1 = (J({s.ml, s.mt + h}) - J({s.ml, s.mt - h})) / (2 * h);
        CHECK(std::abs(g[0] - fd0) < 1e-4 * std::abs(fd0));
        CHECK(std::abs(g[1] - fd1) < 1e-4 * std::abs(fd1));
    }
}

TEST_CASE("basis selection by polar distance") {
    const auto gens = polar_samples({});
    CHECK_THROWS_AS(select_basis(std::vector<Conductivity>{}, {3, 1}), InvalidArgument);
    CHECK(select_basis(std::vector<Conductivity>{{2, 1}}, {6, 0.1}) == 0);
    for (std::size_t i = 0; i < gens.size(); ++i) CHECK(select_basis(gens, gens[i]) == i);
    for (double scale : {1.0, kDegreesPerRadian})
        for (Conductivity s : {Conductivity{4.5, 1}, {3.2, 0.5}, {6, 5}, {5.5, 3}}) {
            std::size_t best = 0;
            double bd = 1e300;
            for (std::size_t j = 0; j < gens.size(); ++j) {
                const double d = std::hypot(s.rho() - gens[j].rho(),
                                            scale * (std::atan(s.mt / s.ml) - std::atan(gens[j].mt / gens[j].ml)));
                if (d < bd) bd = d, best = j;
            }
            CHECK(select_basis(gens, s, scale) == best);
        }
    // radians let the radius decide, degrees the angle
    CHECK(select_basis(gens, {6, 5}, 1.0) == 3);
    CHECK(select_basis(gens, {6, 5}) == 8);
    CHECK_THROWS_AS(select_basis(gens, {6, 5}, 0.0), InvalidArgument);
    // equidistant generators: lowest index wins
    CHECK(select_basis(std::vector<Conductivity>{Conductivity::from_polar(2, 0.3), Conductivity::from_polar(4, 0.3)},
                       Conductivity::from_polar(3, 0.3)) == 0);
}

TEST_CASE("barrier BFGS on a quadratic stays feasible and converges") {
    Objective obj;
    const Conductivity target{3.0, 0.9};
    obj.select = [](const Conductivity&) { return -1; };
    obj.value = [&](const Conductivity& s) {
        return 50.0 * (std::pow(s.ml - target.ml, 2) + 4.0 * std::pow(s.mt - target.mt, 2));
    };
    obj.value_and_gradient = [&](const Conductivity& s) {
        return std::make_pair(obj.value(s),
                              std::array<double, 2>{100.0 * (s.ml - target.ml), 400.0 * (s.mt - target.mt)});
    };
    obj.counts = [] { return SolveCounts{}; };
    BarrierOptions o;
    const auto r = barrier_bfgs({1.5, 1.0}, obj, o);
    CHECK(r.status == OptimizerStatus::converged);
    CHECK(r.sigma.ml == doctest::Approx(target.ml).epsilon(1e-3));
    CHECK(r.sigma.mt == doctest::Approx(target.mt).epsilon(1e-3));
    for (const auto& h : r.history) CHECK(o.constraints.feasible(h.sigma));
    CHECK_THROWS_AS(barrier_bfgs({1.0, 1.0}, obj, o), InvalidArgument);
}

TEST_CASE("full-order recovery from exact data") {
    Fixture f;
    const auto meas = f.measure({3.0, 0.9}, 0.0);
    InverseProblem prob{&f.ops, f.stim, f.cfg, f.p, &meas};
    const auto r = optimize_full({2.0, 1.2}, prob, {});
    CHECK(std::abs(r.sigma.ml / 3.0 - 1.0) < 0.02);
    CHECK(std::abs(r.sigma.mt / 0.9 - 1.0) < 0.02);
    CHECK(r.counts.forward >= r.counts.backward);
    for (const auto& h : r.history) CHECK(Constraints{}.feasible(h.sigma));
}

TEST_CASE("stationary start") {
    Fixture f;
    const Conductivity s0{2.5, 0.9};
    const auto meas = f.measure(s0, 0.0);
    InverseProblem prob{&f.ops, f.stim, f.cfg, f.p, &meas};
    // barrier weight already at its floor, so the misfit optimum is the start point
    BarrierOptions o;
    o.mu0 = o.mu_min = 1e-9;
    const auto r = optimize_full(s0, prob, o);
    CHECK(r.iterations <= 2);
    CHECK(std::hypot(r.sigma.ml - s0.ml, r.sigma.mt - s0.mt) < 1e-3);

    AdaptiveOptions ao;
    ao.cycles = 1;
    ao.N = 20;
    ao.M = 30;
    ao.barrier = o;
    BasisLibrary lib;
    const auto a = optimize_adaptive(s0, prob, ao, &lib);
    CHECK(lib.size() == 1);
    CHECK(a.library_size == 1);
    CHECK(std::hypot(a.sigma.ml - s0.ml, a.sigma.mt - s0.mt) < 1e-2);
}

TEST_CASE("reduced optimizer runs on a small library and records bases") {
    Fixture f;
    const auto meas = f.measure({3.0, 0.9}, 0.15);
    InverseProblem prob{&f.ops, f.stim, f.cfg, f.p, &meas};
    SolveConfig sc = f.cfg;
    sc.record_iion = true;
    BasisLibrary lib;
    for (Conductivity g : {Conductivity{2.0, 0.6}, {3.5, 1.0}})
        lib.push_back(build_reduced_basis(solve_monodomain(f.ops, g, f.stim, sc, f.p), g, 20, 30, f.ops));
    BarrierOptions o;
    o.max_iter = 15;
    const auto r = optimize_reduced({1.5, 1.0}, lib, prob, o);
    CHECK(r.iterations <= 15);
    CHECK(r.history.size() >= 1);
    for (const auto& h : r.history) {
        CHECK(o.constraints.feasible(h.sigma));
        CHECK(h.basis_index == static_cast<int>(select_basis(lib, h.sigma)));
    }
    CHECK_THROWS_AS(optimize_reduced({1.5, 1.0}, BasisLibrary{}, prob, o), InvalidArgument);
    CHECK_THROWS_AS(optimize_reduced({0.5, 1.0}, lib, prob, o), InvalidArgument);
}

}  // TEST_SUITE
