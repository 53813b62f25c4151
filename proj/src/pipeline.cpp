#include "cardiored/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cardiored/archive.hpp"
#include "cardiored/error.hpp"

namespace cardiored {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Setup {
    Mesh mesh;
    AssembledOperators ops;
    NodalStimulus stim;
    FileMeta meta;
};

Setup setup(const ExperimentConfig& cfg) {
    cfg.validate();
    Setup s;
    s.mesh = make_mesh(cfg.mesh);
    s.ops = assemble(s.mesh);
    s.stim = nodal_stimulus(make_stimulus(cfg.stimulus, s.mesh), s.mesh);
    s.meta.config_hash = config_hash(cfg);
    spdlog::info("mesh: {} nodes, {} tets", s.mesh.num_nodes(), s.mesh.num_tets());
    return s;
}

json sigma_json(const Conductivity& s) { return json::array({s.ml, s.mt}); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void save_report(const fs::path& path, const json& j) { write_atomic(path, j.dump(2) + "\n"); }

json stamp(const FileMeta& meta, const char* command) {
    return {{"command", command}, {"version", meta.version}, {"config_hash", meta.config_hash}};
}

TrajectoryRecord run_solver(const Setup& s, const Conductivity& sigma, const SolveConfig& cfg, const IonicParams& p) {
    std::unique_ptr<ExactIonicLoad> load;
    if (cfg.ionic == IonicEvaluation::exact) load = std::make_unique<ExactIonicLoad>(s.mesh);
    const auto n = s.ops.size();
    return solve_monodomain(s.ops, sigma, s.stim, cfg, p, Eigen::VectorXd::Constant(n, p.V_r),
                            Eigen::VectorXd::Zero(n), load.get());
}

}  // namespace

std::string to_string(EstimateMode m) {
    switch (m) {
        case EstimateMode::full: return "full";
        case EstimateMode::reduced: return "reduced";
        case EstimateMode::adaptive: return "adaptive";
    }
    return "full";
}

EstimateMode estimate_mode_from_string(const std::string& s) {
    if (s == "full") return EstimateMode::full;
    if (s == "reduced") return EstimateMode::reduced;
    if (s == "adaptive") return EstimateMode::adaptive;
    throw InvalidArgument("unknown estimation mode '" + s + "' (full, reduced, adaptive)");
}

json cmd_forward(const ExperimentConfig& cfg, const fs::path& out, std::optional<Conductivity> sigma) {
    const auto s = setup(cfg);
    const Conductivity sig = sigma.value_or(cfg.measurement.sigma_exact);
    const auto t0 = std::chrono::steady_clock::now();
    const auto rec = run_solver(s, sig, cfg.solve, cfg.ionic);
    const double wall = seconds_since(t0);

    json files = json::array();
    auto emit = [&](const Eigen::MatrixXd& frames, const char* name) {
        if (frames.cols() == 0) return;
        write_atomic(out / name, trajectory_csv(rec, frames, s.meta));
        files.push_back(name);
    };
    emit(rec.u, "trajectory_u.csv");
    emit(rec.w, "trajectory_w.csv");
    emit(rec.iion, "trajectory_iion.csv");

    json report = stamp(s.meta, "forward");
    report.update({{"sigma", sigma_json(sig)},
                   {"nodes", s.ops.size()},
                   {"steps", rec.steps},
                   {"frames", rec.frames()},
                   {"ionic", cfg.solve.ionic == IonicEvaluation::exact ? "exact" : "nodal"},
                   {"linear_iterations", rec.forward_iterations},
                   {"wall_seconds", wall},
                   {"files", files}});
    save_report(out / "forward.json", report);
    return report;
}

json cmd_measure(const ExperimentConfig& cfg, const fs::path& out, std::optional<Conductivity> sigma) {
    const auto s = setup(cfg);
    const Conductivity sig = sigma.value_or(cfg.measurement.sigma_exact);
    if (!cfg.optimizer.barrier.constraints.feasible(sig))
        throw InvalidArgument(fmt::format("sigma_exact [{}, {}] is not admissible", sig.ml, sig.mt));
    SolveConfig sc = cfg.solve;
    sc.stride = 1;
    sc.record_u = true;
    sc.record_w = sc.record_iion = false;
    sc.ionic = cfg.measurement.ionic;
    const auto rec = run_solver(s, sig, sc, cfg.ionic);

    const auto mask = surface_site_mask(s.mesh, cfg.measurement.site_grid);
    auto meas = sample_measurements(rec, mask, cfg.measurement.dt_snap);
    meas.frames = add_noise(meas.frames, cfg.measurement.noise_level, cfg.measurement.seed, cfg.measurement.noise_model);
    meas.sigma_exact = sig;
    meas.noise_level = cfg.measurement.noise_level;
    meas.seed = cfg.measurement.seed;
    meas.noise_model = cfg.measurement.noise_model;
    save_measurements(out / "measurements.json", meas, s.meta);

    json report = stamp(s.meta, "measure");
    report.update({{"sigma_exact", sigma_json(sig)},
                   {"sites", meas.sites()},
                   {"frames", meas.count()},
                   {"noise_level", meas.noise_level},
                   {"seed", meas.seed},
                   {"noise_model", to_string(meas.noise_model)},
                   {"file", "measurements.json"}});
    return report;
}

json cmd_bases(const ExperimentConfig& cfg, const fs::path& out) {
    const auto s = setup(cfg);
    SolveConfig sc = cfg.solve;
    sc.T = cfg.basis.T;
    sc.stride = 1;
    sc.record_u = sc.record_iion = true;
    sc.record_w = false;
    sc.ionic = IonicEvaluation::nodal;

    const auto samples = polar_samples(cfg.sampling, cfg.optimizer.barrier.constraints);
    json entries = json::array();
    int built = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sig = samples[i];
        const std::string name = fmt::format("basis_{:03d}.bin", i);
        json e{{"file", name}, {"sigma_gen", sigma_json(sig)}};
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const auto rec = solve_monodomain(s.ops, sig, s.stim, sc, cfg.ionic);
            const auto b = build_reduced_basis(rec, sig, cfg.basis.N, cfg.basis.M, s.ops);
            save_reduced_basis(out / "bases" / name, b, s.meta);
            e.update({{"ok", true}, {"N", b.u.rank()}, {"M", b.ion.rank()}, {"wall_seconds", seconds_since(t0)}});
            ++built;
            spdlog::info("basis {} at [{:.4f}, {:.4f}] written", i, sig.ml, sig.mt);
        } catch (const std::exception& ex) {
            e.update({{"ok", false}, {"error", ex.what()}});
            spdlog::error("basis {} at [{:.4f}, {:.4f}] failed: {}", i, sig.ml, sig.mt, ex.what());
        }
        entries.push_back(e);
    }
    json report = stamp(s.meta, "bases");
    report.update({{"samples", samples.size()}, {"built", built}, {"bases", entries}});
    save_report(out / "bases" / "index.json", report);
    return report;
}

namespace {

BasisLibrary load_library(const fs::path& dir) {
    const auto index = dir / "index.json";
    if (!fs::exists(index))
        throw InvalidArgument("reduced mode needs a basis directory; '" + index.string() +
                              "' not found (run the bases command first)");
    std::ifstream in(index);
    const json j = json::parse(in);
    BasisLibrary lib;
    for (const auto& e : j.at("bases"))
        if (e.value("ok", false)) lib.push_back(load_reduced_basis(dir / e.at("file").get<std::string>()));
    if (lib.empty()) throw InvalidArgument("basis directory '" + dir.string() + "' holds no usable bases");
    return lib;
}

}  // namespace

json cmd_estimate(const ExperimentConfig& cfg, const fs::path& out, EstimateMode mode) {
    const auto meas_path = out / "measurements.json";
    if (!fs::exists(meas_path))
        throw InvalidArgument("'" + meas_path.string() + "' not found (run the measure command first)");
    const auto s = setup(cfg);
    const auto meas = load_measurements(meas_path);
    if (meas.size() != s.ops.size()) throw InvalidArgument("measurements were taken on a different mesh");
    if (std::abs(meas.dt - cfg.solve.dt) > 1e-12)
        throw InvalidArgument("measurement time step differs from solve.dt");
    if (!meas.marker_steps.empty() && meas.marker_steps.back() > cfg.solve.steps())
        throw InvalidArgument("solve.T ends before the last measurement");

    SolveConfig sc = cfg.solve;
    sc.stride = 1;
    sc.record_u = true;
    sc.record_w = sc.record_iion = false;
    sc.ionic = IonicEvaluation::nodal;
    InverseProblem prob{&s.ops, s.stim, sc, cfg.ionic, &meas};
    const auto& bo = cfg.optimizer.barrier;

    OptimizationResult r;
    switch (mode) {
        case EstimateMode::full: r = optimize_full(cfg.optimizer.sigma0, prob, bo); break;
        case EstimateMode::reduced: {
            const auto lib = load_library(out / "bases");
            r = optimize_reduced(cfg.optimizer.sigma0, lib, prob, bo);
            break;
        }
        case EstimateMode::adaptive: {
            AdaptiveOptions ao;
            ao.cycles = cfg.optimizer.cycles;
            ao.inner_max_iter = cfg.optimizer.inner_max_iter;
            ao.N = cfg.basis.N;
            ao.M = cfg.basis.M;
            ao.barrier = bo;
            r = optimize_adaptive(cfg.optimizer.sigma0, prob, ao);
            break;
        }
    }
    const std::string tag = to_string(mode);
    write_atomic(out / ("history_" + tag + ".csv"), history_csv(r.history, s.meta));

    const auto& ex = meas.sigma_exact;
    json report = stamp(s.meta, "estimate");
    report.update({{"mode", tag},
                   {"sigma0", sigma_json(cfg.optimizer.sigma0)},
                   {"sigma_exact", sigma_json(ex)},
                   {"sigma_estimated", sigma_json(r.sigma)},
                   {"relative_error", {std::abs(r.sigma.ml / ex.ml - 1.0), std::abs(r.sigma.mt / ex.mt - 1.0)}},
                   {"J", r.J},
                   {"status", to_string(r.status)},
                   {"iterations", r.iterations},
                   {"forward_solves", r.counts.forward},
                   {"backward_solves", r.counts.backward},
                   {"wall_seconds", r.wall_seconds},
                   {"library_size", r.library_size}});
    const auto full_summary = out / "summary_full.json";
    if (mode != EstimateMode::full && fs::exists(full_summary)) {
        std::ifstream in(full_summary);
        const json f = json::parse(in);
        const double full_wall = f.at("wall_seconds").get<double>();
        if (full_wall > 0.0) report["time_percent_of_full"] = 100.0 * r.wall_seconds / full_wall;
    }
    save_report(out / ("summary_" + tag + ".json"), report);
    return report;
}

json cmd_doe(const ExperimentConfig& cfg, const fs::path& out) {
    const auto s = setup(cfg);
    SolveConfig sc = cfg.solve;
    sc.stride = 1;
    sc.record_u = sc.record_iion = true;
    sc.record_w = false;
    sc.ionic = IonicEvaluation::nodal;
    ForwardContext ctx{&s.ops, s.stim, sc, cfg.ionic};
    const auto grid = doe_grid(cfg.doe.ml_lo, cfg.doe.ml_hi, cfg.doe.mt_lo, cfg.doe.mt_hi, cfg.doe.nx, cfg.doe.ny);

    double th_lo = std::numeric_limits<double>::infinity(), th_hi = -th_lo;
    for (const auto& g : grid) {
        th_lo = std::min(th_lo, g.theta());
        th_hi = std::max(th_hi, g.theta());
    }
    const auto edges = equiangular_partition(cfg.doe.bands, th_lo, th_hi);

    json maps = json::array();
    for (std::size_t i = 0; i < cfg.doe.generators.size(); ++i) {
        const auto& gen = cfg.doe.generators[i];
        const std::string stem = fmt::format("doe_{:03d}", i);
        json e{{"sigma_gen", sigma_json(gen)}, {"csv", stem + ".csv"}, {"script", stem + ".gp"}};
        try {
            const auto rec = solve_monodomain(s.ops, gen, s.stim, sc, cfg.ionic);
            const auto basis = build_reduced_basis(rec, gen, cfg.basis.N, cfg.basis.M, s.ops);
            const auto map = doe_map(basis, grid, ctx);
            const auto self = doe_map(basis, {gen}, ctx);
            write_atomic(out / (stem + ".csv"), doe_csv(map, s.meta));
            write_atomic(out / (stem + ".gp"), doe_gnuplot(map, stem + ".csv", edges));
            int counts[3] = {0, 0, 0}, failed = 0;
            for (const auto& p : map.points) p.ok ? ++counts[static_cast<int>(p.cls)] : ++failed;
            e.update({{"ok", true},
                      {"e_gen", self.points.front().e},
                      {"black", counts[0]},
                      {"cyan", counts[1]},
                      {"white", counts[2]},
                      {"failed", failed},
                      {"band_confinement", band_confinement(map, cfg.doe.bands)}});
        } catch (const std::exception& ex) {
            e.update({{"ok", false}, {"error", ex.what()}});
            spdlog::error("DOE for [{}, {}] failed: {}", gen.ml, gen.mt, ex.what());
        }
        maps.push_back(e);
    }
    json report = stamp(s.meta, "doe");
    report.update({{"grid", {cfg.doe.nx, cfg.doe.ny}}, {"band_edges", edges}, {"maps", maps}});
    save_report(out / "doe.json", report);
    return report;
}

}  // namespace cardiored
