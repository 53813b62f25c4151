#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "cardiored/archive.hpp"
#include "cardiored/config.hpp"
#include "cardiored/error.hpp"
#include "cardiored/pipeline.hpp"

using namespace cardiored;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("cardiored_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.mesh.extent = {1.0, 1.0, 0.25};
    c.mesh.resolution = {6, 6, 2};
    c.solve.T = 4.0;
    c.basis = {8, 12, 4.0};
    c.measurement.dt_snap = 1.0;
    c.measurement.site_grid = 4;
    c.optimizer.barrier.max_iter = 3;
    c.optimizer.cycles = 1;
    c.optimizer.inner_max_iter = 2;
    c.sampling.n_theta = 3;
    c.sampling.rho_base = 4;
    c.sampling.rho_floor = 2;
    c.sampling.extra.clear();
    c.doe.nx = c.doe.ny = 2;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("config round trip and strict keys") {
    auto c = tiny_config();
    c.doe.generators = {{3, 0.35}, {4, 1}};
    c.stimulus.sites = {{Point3(0.1, 0.2, 0.0), 0.3}};
    const auto j = to_json(c);
    const auto back = config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    auto other = c;
    other.solve.dt = 0.025;
    CHECK(config_hash(other) != config_hash(c));

    auto bad = j;
    bad["solve"]["dtt"] = 0.1;
    CHECK_THROWS_AS(config_from_json(bad), FormatError);
    bad = j;
    bad["solve"]["dt"] = "fast";
    CHECK_THROWS_AS(config_from_json(bad), FormatError);
    CHECK(config_from_json(nlohmann::json::object()).basis.N == 35);
}

TEST_CASE("config file loading resolves relative mesh paths") {
    const auto d = scratch_dir("cfg");
    write_mesh(build_slab_mesh({1, 1, 1}, {1, 1, 1}, Point3(1, 0, 0)), d / "m.mesh");
    std::ofstream(d / "c.json") << R"({"mesh": {"path": "m.mesh"}})";
    const auto c = load_config(d / "c.json");
    CHECK(make_mesh(c.mesh).num_nodes() == 8);
    CHECK_THROWS(load_config(d / "missing.json"));
}

TEST_CASE("basis archive reloads bit for bit") {
    const auto c = tiny_config();
    const auto mesh = make_mesh(c.mesh);
    const auto ops = assemble(mesh);
    SolveConfig sc = c.solve;
    sc.record_iion = true;
    const Conductivity g{3, 1};
    const auto rec = solve_monodomain(ops, g, nodal_stimulus(make_stimulus(c.stimulus, mesh), mesh), sc, c.ionic);
    const auto b = build_reduced_basis(rec, g, 8, 12, ops);
    const auto d = scratch_dir("basis");
    save_reduced_basis(d / "b.bin", b, {config_hash(c)});
    CHECK_FALSE(fs::exists(d / "b.bin.tmp"));
    const auto r = load_reduced_basis(d / "b.bin");
    CHECK(r.u.modes == b.u.modes);
    CHECK(r.u.mean == b.u.mean);
    CHECK(r.u.singular_values == b.u.singular_values);
    CHECK(r.ion.modes == b.ion.modes);
    CHECK(r.deim.indices == b.deim.indices);
    CHECK(r.deim.projector == b.deim.projector);
    CHECK(r.deim.inv_PtZ == b.deim.inv_PtZ);
    CHECK(r.sigma_gen == g);
    const Eigen::MatrixXd G = r.u.modes.transpose() * r.u.modes;
    CHECK((G - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);

    // corrupt one mode and the orthonormality check trips
    auto broken = b;
    broken.u.modes.col(0) *= 1.01;
    save_reduced_basis(d / "bad.bin", broken, {});
    CHECK_THROWS_AS(load_reduced_basis(d / "bad.bin"), FormatError);
    std::ofstream(d / "junk.bin") << "not a basis\n";
    CHECK_THROWS_AS(load_reduced_basis(d / "junk.bin"), FormatError);
}

TEST_CASE("measurement metadata round trip") {
    MeasurementSet m;
    m.site_mask = Eigen::VectorXd::Zero(6);
    m.site_mask[1] = m.site_mask[4] = 1;
    m.marker_steps = {40, 80};
    m.frames = Eigen::MatrixXd::Random(6, 2);
    m.sigma_exact = {4.5, 1};
    m.noise_level = 0.15;
    m.seed = 99;
    m.noise_model = NoiseModel::additive_range;
    const auto d = scratch_dir("meas");
    save_measurements(d / "m.json", m, {"abc"});
    const auto r = load_measurements(d / "m.json");
    CHECK(r.site_mask == m.site_mask);
    CHECK(r.marker_steps == m.marker_steps);
    CHECK(r.sigma_exact == m.sigma_exact);
    CHECK(r.noise_level == m.noise_level);
    CHECK(r.seed == 99);
    CHECK(r.noise_model == NoiseModel::additive_range);
    CHECK(r.dt_snap == m.dt_snap);
    for (Eigen::Index i : {1, 4}) CHECK(r.frames.row(i) == m.frames.row(i));
    CHECK(r.frames.row(0).isZero());
    const auto j = measurement_to_json(m, {"abc"});
    CHECK(j.dump().find("abc") != std::string::npos);
}

TEST_CASE("csv writers") {
    std::vector<IterateRecord> h{{0, {1.5, 1}, 2.0, 0.5, -1, 1.0}, {1, {2, 1}, 1.0, 0.1, 3, 0.1}};
    const auto s = history_csv(h, {"h1"});
    CHECK(s.find("iter,sigma_ml,sigma_mt,J,grad_norm,basis_index,mu") != std::string::npos);
    CHECK(s.find("\n1,2,1,1,0.1,3,0.1") != std::string::npos);
    DoeMap map{{3, 0.35}, {{{1, 0.1}, 0.001, DoeClass::black, true, {}}, {{2, 0.1}, 0, DoeClass::white, false, "boom"}}};
    const auto dc = doe_csv(map, {});
    CHECK(dc.find("sigma_ml,sigma_mt,e,class") != std::string::npos);
    CHECK(dc.find("nan,failed") != std::string::npos);
    CHECK(doe_gnuplot(map, "doe_000.csv", {0.1, 0.2}).find("doe_000.csv") != std::string::npos);
}

TEST_CASE("pipeline commands") {
    const auto c = tiny_config();
    const auto d = scratch_dir("pipe");
    CHECK_THROWS_WITH_AS(cmd_estimate(c, d, EstimateMode::full), doctest::Contains("measurements"), InvalidArgument);

    cmd_forward(c, d);
    const auto first = slurp(d / "trajectory_u.csv");
    cmd_forward(c, d);
    CHECK(slurp(d / "trajectory_u.csv") == first);
    CHECK(first.find(config_hash(c)) != std::string::npos);

    cmd_measure(c, d);
    CHECK(fs::exists(d / "measurements.json"));
    CHECK_THROWS_WITH_AS(cmd_estimate(c, d, EstimateMode::reduced), doctest::Contains("bases"), InvalidArgument);

    const auto rb = cmd_bases(c, d);
    CHECK(rb["built"].get<int>() == 3);
    CHECK(fs::exists(d / "bases" / "basis_000.bin"));
    const auto full = cmd_estimate(c, d, EstimateMode::full);
    CHECK(full.contains("sigma_estimated"));
    const auto red = cmd_estimate(c, d, EstimateMode::reduced);
    CHECK(red.contains("time_percent_of_full"));
    CHECK(fs::exists(d / "history_reduced.csv"));
    const auto doe = cmd_doe(c, d);
    CHECK(fs::exists(d / "doe_000.csv"));
    CHECK(fs::exists(d / "doe.json"));
    CHECK(estimate_mode_from_string("adaptive") == EstimateMode::adaptive);
    CHECK_THROWS(estimate_mode_from_string("fast"));
}

}  // TEST_SUITE
