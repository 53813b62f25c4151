// Acceptance run: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "cardiored/inverse_opt.hpp"
#include "cardiored/sampling_doe.hpp"

using namespace cardiored;

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Slab {
    Mesh mesh;
    AssembledOperators ops;
    NodalStimulus stim;
    IonicParams p;

    Slab(std::array<double, 3> extent, std::array<int, 3> res, double radius = 0.2)
        : mesh(build_slab_mesh(extent, res, Point3(1, 0, 0))),
          ops(assemble(mesh)),
          stim(nodal_stimulus(corner_and_center_stimulus(mesh, radius), mesh)) {}

    SolveConfig config(double T, bool iion = false) const {
        SolveConfig c;
        c.T = T;
        c.record_iion = iion;
        return c;
    }

    ReducedBasis basis(const Conductivity& gen, double T, Eigen::Index N, Eigen::Index M) const {
        return build_reduced_basis(solve_monodomain(ops, gen, stim, config(T, true), p), gen, N, M, ops);
    }

    MeasurementSet measure(const Conductivity& s, double T, double noise, std::uint64_t seed) const {
        auto m = sample_measurements(solve_monodomain(ops, s, stim, config(T), p), surface_site_mask(mesh), 2.0);
        m.frames = add_noise(m.frames, noise, seed);
        m.sigma_exact = s;
        m.noise_level = noise;
        m.seed = seed;
        return m;
    }
};

std::string fmt_sigma(const Conductivity& s) {
    char b[64];
    std::snprintf(b, sizeof b, "[%.3f, %.3f]", s.ml, s.mt);
    return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// fourth-order central difference along component k
double central_diff(const std::function<double(Conductivity)>& J, const Conductivity& x, int k, double h) {
    const auto at = [&](double t) { return J(k == 0 ? Conductivity{x.ml + t, x.mt} : Conductivity{x.ml, x.mt + t}); };
    return (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
}

const std::vector<Conductivity> kTestPoints{{3.2, 0.5}, {4.5, 1}, {5.5, 3}, {4, 2}, {3, 2}, {6, 5}};
constexpr std::uint64_t kSeed = 20240607;

// 1. full-rank ROM reproduces the full-order trajectory
Outcome rom_equivalence() {
    Slab s({2.5, 2.5, 0.25}, {12, 12, 4});
    auto cfg = s.config(30.0);
    cfg.linear_tol = 1e-13;
    const Conductivity sig{3, 1};
    const auto full = solve_monodomain(s.ops, sig, s.stim, cfg, s.p);
    ReducedBasis b;
    b.u = identity_basis(s.ops.size(), SnapshotField::u);
    b.ion = identity_basis(s.ops.size(), SnapshotField::iion);
    b.deim = build_deim_operator(b.u, b.ion, s.ops.M_L);
    const auto red = build_reduced_operators(s.ops, b, nullptr, s.stim, s.p);
    const double err = (lift(b.u, solve_reduced(red, sig, cfg, s.p)) - full.u).norm() / full.u.norm();
    std::ostringstream d;
    d << "n=" << s.ops.size() << " relative space-time error " << err;
    return {s.ops.size() <= 2000 && err <= 1e-8, d.str()};
}

// 2. adjoint gradients against central differences
Outcome gradient_checks() {
    Slab s({2.5, 2.5, 0.25}, {16, 16, 2});
    const double T = 10.0;
    auto cfg = s.config(T);
    const auto meas = s.measure({3.2, 0.8}, T, 0.15, kSeed);
    const auto basis = s.basis({3, 1}, T, 20, 40);
    const auto red = build_reduced_operators(s.ops, basis, &meas, s.stim, s.p);
    const std::vector<Conductivity> points{{2.5, 0.8}, {4.0, 1.5}, {1.8, 0.5}, {5.5, 3.0}, {3.2, 0.5}};
    double worst_r = 0.0, worst_f = 0.0;
    for (const auto& x : points) {
        const auto Jr = [&](Conductivity c) { return reduced_misfit(red, solve_reduced(red, c, cfg, s.p)); };
        const auto tr = solve_reduced(red, x, cfg, s.p);
        const auto gr = reduced_gradient(red, tr, solve_reduced_adjoint(red, x, cfg, s.p, tr), x);
        double h = 1e-3;
        worst_r = std::max({worst_r, rel(gr[0], central_diff(Jr, x, 0, h)), rel(gr[1], central_diff(Jr, x, 1, h))});

        auto fc = cfg;
        fc.record_w = true;
        const auto Jf = [&](Conductivity c) { return cost_full(solve_monodomain(s.ops, c, s.stim, cfg, s.p), meas); };
        const auto base = solve_monodomain(s.ops, x, s.stim, fc, s.p);
        const auto gf = full_gradient(s.ops, base, solve_full_adjoint(s.ops, x, fc, s.p, base, meas), x);
        h = 1e-4;
        worst_f = std::max({worst_f, rel(gf[0], central_diff(Jf, x, 0, h)), rel(gf[1], central_diff(Jf, x, 1, h))});
    }
    std::ostringstream d;
    d << points.size() << " points, worst relative error reduced " << worst_r << " full " << worst_f;
    return {worst_r <= 1e-4 && worst_f <= 1e-4, d.str()};
}

// 3. DEIM selection on random instances
Outcome deim_suite() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> rows(20, 80), cols(2, 12);
    std::normal_distribution<double> g;
    double worst_interp = 0.0, worst_inv = 0.0;
    bool distinct = true;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rows(rng), m = std::min(cols(rng), n);
        Eigen::MatrixXd Z(n, m);
        for (auto& v : Z.reshaped()) v = g(rng);
        const auto sel = select_indices(Z);
        distinct &= std::set<Eigen::Index>(sel.indices.begin(), sel.indices.end()).size() == std::size_t(m);
        Eigen::MatrixXd PtZ(m, m);
        for (int i = 0; i < m; ++i) PtZ.row(i) = Z.row(sel.indices[std::size_t(i)]);
        const Eigen::MatrixXd direct = PtZ.inverse();
        worst_inv = std::max(worst_inv, (sel.inv_PtZ - direct).norm() / direct.norm());
        Eigen::VectorXd f(n);
        for (auto& v : f) v = g(rng);
        const Eigen::VectorXd approx = Z * (sel.inv_PtZ * gather(sel.indices, f));
        for (int i = 0; i < m; ++i) {
            const auto k = sel.indices[std::size_t(i)];
            worst_interp = std::max(worst_interp, std::abs(approx[k] - f[k]) / std::max(1.0, std::abs(f[k])));
        }
    }
    std::ostringstream d;
    d << "50 instances, distinct " << (distinct ? "yes" : "no") << ", interpolation " << worst_interp
      << ", inverse " << worst_inv;
    return {distinct && worst_interp <= 1e-10 && worst_inv <= 1e-10, d.str()};
}

// 4. POD optimality on small random snapshot sets
Outcome pod_suite() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    const int n = 60, m = 25, N = 6;
    Eigen::MatrixXd Y(n, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) Y(i, j) = g(rng) * std::pow(0.6, std::min(i, j));
    const auto snaps = make_snapshots(Y, {3, 1}, SnapshotField::u);
    const auto pod = build_pod(snaps, N);
    const double ortho = (pod.modes.transpose() * pod.modes - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
    const auto& C = snaps.columns;
    const double err = (C - pod.modes * (pod.modes.transpose() * C)).squaredNorm();
    const double tail = pod.singular_values.tail(pod.singular_values.size() - N).squaredNorm();
    const double identity_err = rel(err, tail);
    int beaten = 0;
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd R(n, N);
        for (auto& v : R.reshaped()) v = g(rng);
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ() * Eigen::MatrixXd::Identity(n, N);
        beaten += (C - Q * (Q.transpose() * C)).squaredNorm() < err;
    }
    std::ostringstream d;
    d << "orthonormality " << ortho << ", error identity " << identity_err << ", random bases better " << beaten << "/100";
    return {ortho <= 1e-10 && identity_err <= 1e-8 && beaten == 0, d.str()};
}

// 5. singular value decay of u and I_ion
Outcome singular_decay() {
    Slab s({2.5, 2.5, 0.25}, {40, 80, 4});
    const Conductivity sig{3, 1};
    const auto rec = solve_monodomain(s.ops, sig, s.stim, s.config(25.0, true), s.p);
    const auto iu = first_index_below(singular_decay_report(trajectory_snapshots(rec, sig, SnapshotField::u)), 1e-3);
    const auto ii = first_index_below(singular_decay_report(trajectory_snapshots(rec, sig, SnapshotField::iion)), 1e-3);
    std::ostringstream d;
    d << "n=" << s.ops.size() << ", " << rec.frames() << " snapshots, 1e-3 reached at u " << iu << " I_ion " << ii;
    return {s.ops.size() >= 5000 && rec.frames() == 500 && iu >= 30 && iu <= 90 && ii > iu, d.str()};
}

BasisLibrary polar_library(const Slab& s, double T) {
    BasisLibrary lib;
    for (const auto& g : polar_samples({})) lib.push_back(s.basis(g, T, 35, 80));
    return lib;
}

std::string recovery_line(const Conductivity& truth, const OptimizationResult& r) {
    char b[160];
    std::snprintf(b, sizeof b, "%s -> %s (%.1f%%, %.1f%%, %s)", fmt_sigma(truth).c_str(), fmt_sigma(r.sigma).c_str(),
                  100 * rel(r.sigma.ml, truth.ml), 100 * rel(r.sigma.mt, truth.mt), to_string(r.status).c_str());
    return b;
}

bool within(const Conductivity& est, const Conductivity& truth, double tol) {
    return rel(est.ml, truth.ml) <= tol && rel(est.mt, truth.mt) <= tol;
}

// 6. reduced recovery with the ten-sample library
Outcome recovery() {
    Slab s({1.0, 1.0, 0.1}, {70, 70, 2}, 0.1);
    const double T = 30.0;
    const auto lib = polar_library(s, T);
    bool ok = true;
    std::ostringstream d;
    d << "n=" << s.ops.size();
    for (const auto& truth : kTestPoints) {
        const auto meas = s.measure(truth, T, 0.15, kSeed);
        InverseProblem prob{&s.ops, s.stim, s.config(T), s.p, &meas};
        const auto r = optimize_reduced({1.5, 1}, lib, prob, {});
        ok &= within(r.sigma, truth, 0.15);
        d << "; " << recovery_line(truth, r);
    }
    return {ok, d.str()};
}

// 7. reduced vs full inverse wall time and per-solve speedup
Outcome speedup() {
    Slab s({2.5, 2.5, 0.25}, {48, 96, 4});
    const double T = 30.0;
    const auto lib = polar_library(s, T);
    const Conductivity truth{4.5, 1};
    const auto meas = s.measure(truth, T, 0.15, kSeed);
    InverseProblem prob{&s.ops, s.stim, s.config(T), s.p, &meas};
    const auto rr = optimize_reduced({1.5, 1}, lib, prob, {});
    const auto rf = optimize_full({1.5, 1}, prob, {});
    const double pct = 100.0 * rr.wall_seconds / rf.wall_seconds;

    const auto& b = lib[select_basis(lib, truth)];
    const auto red = build_reduced_operators(s.ops, b, nullptr, s.stim, s.p);
    auto t0 = Clock::now();
    solve_monodomain(s.ops, truth, s.stim, s.config(T), s.p);
    const double t_full = seconds(t0);
    t0 = Clock::now();
    const int reps = 20;
    for (int i = 0; i < reps; ++i) solve_reduced(red, truth, s.config(T), s.p);
    const double t_red = seconds(t0) / reps;
    std::ostringstream d;
    d << "n=" << s.ops.size() << ", reduced inverse " << rr.wall_seconds << " s vs full " << rf.wall_seconds
      << " s (" << pct << "%), forward " << t_full << " s vs " << t_red << " s (" << t_full / t_red << "x)";
    return {s.ops.size() >= 20000 && pct <= 20.0 && t_full / t_red >= 20.0, d.str()};
}

// 8. DOE confined to the generator's angular band
Outcome doe_confinement() {
    Slab s({2.5, 2.5, 0.25}, {40, 40, 4});
    const Conductivity gen{3, 0.35};
    const double T = 30.0;
    ForwardContext ctx{&s.ops, s.stim, s.config(T), s.p};
    const auto basis = s.basis(gen, T, 35, 80);
    const auto map = doe_map(basis, doe_grid(1, 5, 0.05, 2, 8, 8), ctx);
    const double e_gen = doe_map(basis, {gen}, ctx).points.front().e;
    const double conf = band_confinement(map, 4);
    int effective = 0;
    for (const auto& p : map.points) effective += p.ok && p.e <= 0.005;
    std::ostringstream d;
    d << "n=" << s.ops.size() << ", " << effective << " effective points, confinement " << conf << ", e(gen) " << e_gen;
    return {conf >= 0.9 && e_gen <= 0.002, d.str()};
}

// 9. polar sampling layout
Outcome sampling() {
    const PolarSamplingSpec spec;
    const auto s = polar_samples(spec);
    const auto th = cosine_nodes(spec.theta_min, spec.theta_max, spec.n_theta);
    const double e0 = std::abs(th.front() - std::atan(1.0 / 14.0)), e1 = std::abs(th.back() - std::atan(1.2));
    std::ostringstream d;
    d << s.size() << " samples, endpoint errors " << e0 << " " << e1;
    return {s.size() == 10 && e0 <= 1e-12 && e1 <= 1e-12, d.str()};
}

// 10. adaptive loop
Outcome adaptive() {
    Slab s({1.0, 1.0, 0.1}, {70, 70, 2}, 0.1);
    const double T = 30.0;
    AdaptiveOptions ao;
    bool ok = true;
    std::ostringstream d;
    d << "n=" << s.ops.size();
    for (const auto& truth : kTestPoints) {
        const auto meas = s.measure(truth, T, 0.15, kSeed);
        InverseProblem prob{&s.ops, s.stim, s.config(T), s.p, &meas};
        BasisLibrary lib;
        const auto r = optimize_adaptive({1.5, 1}, prob, ao, &lib);
        ok &= within(r.sigma, truth, 0.15) && lib.size() == std::size_t(ao.cycles);
        d << "; " << recovery_line(truth, r) << " library " << lib.size();
    }
    return {ok, d.str()};
}

// 11. component-wise ionic load vs exact quadrature
Outcome ionic_evaluation() {
    Slab s({1.0, 1.0, 0.1}, {150, 150, 2}, 0.1);
    const Conductivity sig{3, 1};
    auto cfg = s.config(30.0);
    cfg.record_w = true;
    const auto nodal = solve_monodomain(s.ops, sig, s.stim, cfg, s.p);
    const ExactIonicLoad load(s.mesh);
    auto ec = cfg;
    ec.ionic = IonicEvaluation::exact;
    const Eigen::VectorXd u0 = Eigen::VectorXd::Constant(s.ops.size(), s.p.V_r), w0 = Eigen::VectorXd::Zero(s.ops.size());
    const auto exact = solve_monodomain(s.ops, sig, s.stim, ec, s.p, u0, w0, &load);
    const double diff = (exact.u - nodal.u).norm() / nodal.u.norm();

    // time the right-hand side assembly alone on mid-run states
    const int reps = 20;
    double t_nodal = 0.0, t_exact = 0.0, sink = 0.0;
    for (int r = 0; r < reps; ++r) {
        const long l = 1 + (r * (nodal.steps - 1)) / reps;
        const Eigen::VectorXd u = nodal.u_at(l), w = nodal.w_at(l);
        auto t0 = Clock::now();
        const Eigen::VectorXd a = s.ops.M_L.cwiseProduct(i_ion(u, w, s.p));
        t_nodal += seconds(t0);
        t0 = Clock::now();
        const Eigen::VectorXd b = load(u, w, s.p);
        t_exact += seconds(t0);
        sink += a[0] + b[0];
    }
    std::ostringstream d;
    d << "n=" << s.ops.size() << ", assembly " << t_exact / reps << " s vs " << t_nodal / reps << " s ("
      << t_exact / t_nodal << "x), solution difference " << diff;
    if (!std::isfinite(sink)) d << " (non-finite load)";
    return {s.ops.size() >= 20000 && t_exact / t_nodal >= 5.0 && diff <= 0.02, d.str()};
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::string only, expect_fail, level = "warn";
    app.add_option("--only", only, "comma separated criteria to run (default all)");
    app.add_option("--expect-fail", expect_fail, "criteria known not to meet their target");
    app.add_option("--log-level", level);
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(level));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ROM/FOM equivalence", rom_equivalence},
        {"gradient checks", gradient_checks},
        {"DEIM suite", deim_suite},
        {"POD suite", pod_suite},
        {"singular value decay", singular_decay},
        {"conductivity recovery", recovery},
        {"speedup", speedup},
        {"DOE confinement", doe_confinement},
        {"sampling", sampling},
        {"adaptive loop", adaptive},
        {"ionic evaluation", ionic_evaluation},
    };
    const auto selected = parse_list(only);
    const auto expected = parse_list(expect_fail);

    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool xfail = !o.pass && expected.count(id);
        if (!o.pass && !xfail) ++unexpected;
        std::printf("criterion %2d %-24s %s%s [%.1f s] %s\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    xfail ? " (expected)" : "", seconds(t0), o.detail.c_str());
        std::fflush(stdout);
    }
    return unexpected ? 1 : 0;
}
