#include "cardiored/config.hpp"

#include <fstream>
#include <initializer_list>

#include <fmt/format.h>

#include "cardiored/error.hpp"

namespace cardiored {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> known) {
    if (!j.is_object()) throw FormatError(fmt::format("config: '{}' must be an object", where));
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw FormatError(fmt::format("config: unknown key '{}' in '{}'", key, where));
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(fmt::format("config: bad value for '{}': {}", key, e.what()));
    }
}

void read(const json& j, const char* key, Conductivity& out) {
    if (!j.contains(key)) return;
    std::array<double, 2> v{};
    read(j, key, v);
    out = {v[0], v[1]};
}

json to_json(const Conductivity& s) { return json::array({s.ml, s.mt}); }

IonicEvaluation ionic_from_string(const std::string& s) {
    if (s == "nodal") return IonicEvaluation::nodal;
    if (s == "exact") return IonicEvaluation::exact;
    throw FormatError("config: ionic evaluation must be 'nodal' or 'exact', got '" + s + "'");
}

std::string to_string(IonicEvaluation e) { return e == IonicEvaluation::nodal ? "nodal" : "exact"; }

void read(const json& j, const char* key, IonicEvaluation& out) {
    if (!j.contains(key)) return;
    std::string s;
    read(j, key, s);
    out = ionic_from_string(s);
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(fmt::format("config: {} must be positive", name));
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    check_keys(j, "<root>",
               {"mesh", "solve", "ionic", "stimulus", "measurement", "optimizer", "sampling", "basis", "doe", "output"});

    if (j.contains("mesh")) {
        const auto& m = j["mesh"];
        check_keys(m, "mesh", {"path", "extent", "resolution", "fiber"});
        read(m, "path", c.mesh.path);
        read(m, "extent", c.mesh.extent);
        read(m, "resolution", c.mesh.resolution);
        std::array<double, 3> f{c.mesh.fiber.x(), c.mesh.fiber.y(), c.mesh.fiber.z()};
        read(m, "fiber", f);
        c.mesh.fiber = Point3(f[0], f[1], f[2]);
        if (!c.mesh.path.empty() && std::filesystem::path(c.mesh.path).is_relative() && !base_dir.empty())
            c.mesh.path = (base_dir / c.mesh.path).string();
    }
    if (j.contains("solve")) {
        const auto& s = j["solve"];
        check_keys(s, "solve", {"dt", "T", "bdf_order", "beta", "linear_tol", "max_linear_iter", "stride", "ionic",
                                "record_w", "record_iion"});
        read(s, "dt", c.solve.dt);
        read(s, "T", c.solve.T);
        read(s, "bdf_order", c.solve.bdf_order);
        read(s, "beta", c.solve.beta);
        read(s, "linear_tol", c.solve.linear_tol);
        read(s, "max_linear_iter", c.solve.max_linear_iter);
        read(s, "stride", c.solve.stride);
        read(s, "ionic", c.solve.ionic);
        read(s, "record_w", c.solve.record_w);
        read(s, "record_iion", c.solve.record_iion);
    }
    if (j.contains("ionic")) {
        const auto& p = j["ionic"];
        check_keys(p, "ionic", {"C_m", "V_r", "V_th", "V_p", "c1", "c2", "b", "d"});
        read(p, "C_m", c.ionic.C_m);
        read(p, "V_r", c.ionic.V_r);
        read(p, "V_th", c.ionic.V_th);
        read(p, "V_p", c.ionic.V_p);
        read(p, "c1", c.ionic.c1);
        read(p, "c2", c.ionic.c2);
        read(p, "b", c.ionic.b);
        read(p, "d", c.ionic.d);
    }
    if (j.contains("stimulus")) {
        const auto& s = j["stimulus"];
        check_keys(s, "stimulus", {"radius", "amplitude", "duration", "sites"});
        read(s, "radius", c.stimulus.radius);
        read(s, "amplitude", c.stimulus.amplitude);
        read(s, "duration", c.stimulus.duration);
        if (s.contains("sites")) {
            std::vector<std::array<double, 4>> sites;
            read(s, "sites", sites);
            for (const auto& v : sites) c.stimulus.sites.push_back({Point3(v[0], v[1], v[2]), v[3]});
        }
    }
    if (j.contains("measurement")) {
        const auto& m = j["measurement"];
        check_keys(m, "measurement",
                   {"sigma_exact", "site_grid", "dt_snap", "noise_level", "seed", "noise_model", "ionic"});
        read(m, "sigma_exact", c.measurement.sigma_exact);
        read(m, "site_grid", c.measurement.site_grid);
        read(m, "dt_snap", c.measurement.dt_snap);
        read(m, "noise_level", c.measurement.noise_level);
        read(m, "seed", c.measurement.seed);
        if (m.contains("noise_model")) {
            std::string s;
            read(m, "noise_model", s);
            c.measurement.noise_model = noise_model_from_string(s);
        }
        read(m, "ionic", c.measurement.ionic);
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        check_keys(o, "optimizer", {"sigma0", "max_iter", "mu0", "shrink", "mu_min", "grad_tol", "armijo",
                                    "max_halvings", "alpha", "prior", "cycles", "inner_max_iter", "theta_scale"});
        auto& b = c.optimizer.barrier;
        read(o, "sigma0", c.optimizer.sigma0);
        read(o, "max_iter", b.max_iter);
        read(o, "mu0", b.mu0);
        read(o, "shrink", b.shrink);
        read(o, "mu_min", b.mu_min);
        read(o, "grad_tol", b.grad_tol);
        read(o, "armijo", b.armijo);
        read(o, "max_halvings", b.max_halvings);
        read(o, "theta_scale", b.theta_scale);
        read(o, "alpha", b.reg.alpha);
        read(o, "prior", b.reg.prior);
        read(o, "cycles", c.optimizer.cycles);
        read(o, "inner_max_iter", c.optimizer.inner_max_iter);
    }
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        check_keys(s, "sampling", {"theta_min", "theta_max", "rho_min", "rho_max", "n_theta", "rho_base", "rho_floor",
                                   "extra"});
        read(s, "theta_min", c.sampling.theta_min);
        read(s, "theta_max", c.sampling.theta_max);
        read(s, "rho_min", c.sampling.rho_min);
        read(s, "rho_max", c.sampling.rho_max);
        read(s, "n_theta", c.sampling.n_theta);
        read(s, "rho_base", c.sampling.rho_base);
        read(s, "rho_floor", c.sampling.rho_floor);
        if (s.contains("extra")) {
            std::vector<std::array<double, 2>> extra;
            read(s, "extra", extra);
            c.sampling.extra.clear();
            for (const auto& e : extra) c.sampling.extra.push_back({e[0], e[1]});
        }
    }
    if (j.contains("basis")) {
        const auto& b = j["basis"];
        check_keys(b, "basis", {"N", "M", "T"});
        read(b, "N", c.basis.N);
        read(b, "M", c.basis.M);
        read(b, "T", c.basis.T);
    }
    if (j.contains("doe")) {
        const auto& d = j["doe"];
        check_keys(d, "doe", {"generators", "ml_range", "mt_range", "nx", "ny", "bands"});
        if (d.contains("generators")) {
            std::vector<std::array<double, 2>> g;
            read(d, "generators", g);
            c.doe.generators.clear();
            for (const auto& v : g) c.doe.generators.push_back({v[0], v[1]});
        }
        std::array<double, 2> ml{c.doe.ml_lo, c.doe.ml_hi}, mt{c.doe.mt_lo, c.doe.mt_hi};
        read(d, "ml_range", ml);
        read(d, "mt_range", mt);
        c.doe.ml_lo = ml[0];
        c.doe.ml_hi = ml[1];
        c.doe.mt_lo = mt[0];
        c.doe.mt_hi = mt[1];
        read(d, "nx", c.doe.nx);
        read(d, "ny", c.doe.ny);
        read(d, "bands", c.doe.bands);
    }
    read(j, "output", c.output);
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["mesh"] = {{"path", c.mesh.path},
                 {"extent", c.mesh.extent},
                 {"resolution", c.mesh.resolution},
                 {"fiber", {c.mesh.fiber.x(), c.mesh.fiber.y(), c.mesh.fiber.z()}}};
    j["solve"] = {{"dt", c.solve.dt},
                  {"T", c.solve.T},
                  {"bdf_order", c.solve.bdf_order},
                  {"beta", c.solve.beta},
                  {"linear_tol", c.solve.linear_tol},
                  {"max_linear_iter", c.solve.max_linear_iter},
                  {"stride", c.solve.stride},
                  {"ionic", to_string(c.solve.ionic)},
                  {"record_w", c.solve.record_w},
                  {"record_iion", c.solve.record_iion}};
    j["ionic"] = {{"C_m", c.ionic.C_m}, {"V_r", c.ionic.V_r}, {"V_th", c.ionic.V_th}, {"V_p", c.ionic.V_p},
                  {"c1", c.ionic.c1},   {"c2", c.ionic.c2},   {"b", c.ionic.b},       {"d", c.ionic.d}};
    json sites = json::array();
    for (const auto& s : c.stimulus.sites)
        sites.push_back({s.center.x(), s.center.y(), s.center.z(), s.radius});
    j["stimulus"] = {{"radius", c.stimulus.radius},
                     {"amplitude", c.stimulus.amplitude},
                     {"duration", c.stimulus.duration},
                     {"sites", sites}};
    j["measurement"] = {{"sigma_exact", to_json(c.measurement.sigma_exact)},
                        {"site_grid", c.measurement.site_grid},
                        {"dt_snap", c.measurement.dt_snap},
                        {"noise_level", c.measurement.noise_level},
                        {"seed", c.measurement.seed},
                        {"noise_model", to_string(c.measurement.noise_model)},
                        {"ionic", to_string(c.measurement.ionic)}};
    const auto& b = c.optimizer.barrier;
    j["optimizer"] = {{"sigma0", to_json(c.optimizer.sigma0)},
                      {"max_iter", b.max_iter},
                      {"mu0", b.mu0},
                      {"shrink", b.shrink},
                      {"mu_min", b.mu_min},
                      {"grad_tol", b.grad_tol},
                      {"armijo", b.armijo},
                      {"max_halvings", b.max_halvings},
                      {"theta_scale", b.theta_scale},
                      {"alpha", b.reg.alpha},
                      {"prior", to_json(b.reg.prior)},
                      {"cycles", c.optimizer.cycles},
                      {"inner_max_iter", c.optimizer.inner_max_iter}};
    json extra = json::array();
    for (const auto& e : c.sampling.extra) extra.push_back({e.rho, e.theta});
    j["sampling"] = {{"theta_min", c.sampling.theta_min}, {"theta_max", c.sampling.theta_max},
                     {"rho_min", c.sampling.rho_min},     {"rho_max", c.sampling.rho_max},
                     {"n_theta", c.sampling.n_theta},     {"rho_base", c.sampling.rho_base},
                     {"rho_floor", c.sampling.rho_floor}, {"extra", extra}};
    j["basis"] = {{"N", static_cast<long>(c.basis.N)}, {"M", static_cast<long>(c.basis.M)}, {"T", c.basis.T}};
    json gens = json::array();
    for (const auto& g : c.doe.generators) gens.push_back(to_json(g));
    j["doe"] = {{"generators", gens},
                {"ml_range", {c.doe.ml_lo, c.doe.ml_hi}},
                {"mt_range", {c.doe.mt_lo, c.doe.mt_hi}},
                {"nx", c.doe.nx},
                {"ny", c.doe.ny},
                {"bands", c.doe.bands}};
    j["output"] = c.output;
    return j;
}

void ExperimentConfig::validate() const {
    if (!mesh.path.empty()) {
        if (!std::filesystem::exists(mesh.path)) throw InvalidArgument("config: mesh file '" + mesh.path + "' not found");
    } else {
        for (double e : mesh.extent) require_positive(e, "mesh.extent");
        for (int r : mesh.resolution) require_positive(r, "mesh.resolution");
    }
    solve.validate();
    ionic.validate();
    require_positive(stimulus.radius, "stimulus.radius");
    require_positive(stimulus.duration, "stimulus.duration");
    for (const auto& s : stimulus.sites) require_positive(s.radius, "stimulus site radius");
    require_positive(measurement.site_grid, "measurement.site_grid");
    require_positive(measurement.dt_snap, "measurement.dt_snap");
    if (!(measurement.noise_level >= 0.0)) throw InvalidArgument("config: measurement.noise_level must be >= 0");
    if (!measurement.sigma_exact.positive()) throw InvalidArgument("config: measurement.sigma_exact must be positive");
    if (!optimizer.sigma0.positive()) throw InvalidArgument("config: optimizer.sigma0 must be positive");
    require_positive(optimizer.barrier.max_iter, "optimizer.max_iter");
    require_positive(optimizer.barrier.mu0, "optimizer.mu0");
    if (!(optimizer.barrier.shrink > 0.0 && optimizer.barrier.shrink < 1.0))
        throw InvalidArgument("config: optimizer.shrink must lie in (0, 1)");
    require_positive(optimizer.barrier.theta_scale, "optimizer.theta_scale");
    require_positive(optimizer.cycles, "optimizer.cycles");
    require_positive(optimizer.inner_max_iter, "optimizer.inner_max_iter");
    sampling.validate();
    require_positive(static_cast<double>(basis.N), "basis.N");
    require_positive(static_cast<double>(basis.M), "basis.M");
    require_positive(basis.T, "basis.T");
    if (!(doe.ml_lo < doe.ml_hi) || !(doe.mt_lo < doe.mt_hi) || !(doe.ml_lo > 0.0) || !(doe.mt_lo > 0.0))
        throw InvalidArgument("config: doe ranges must be increasing and positive");
    require_positive(doe.nx, "doe.nx");
    require_positive(doe.ny, "doe.ny");
    require_positive(doe.bands, "doe.bands");
    if (output.empty()) throw InvalidArgument("config: output directory must not be empty");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("config '" + path.string() + "': " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

Mesh make_mesh(const MeshSpec& spec) {
    if (!spec.path.empty()) return load_mesh(spec.path);
    return build_slab_mesh(spec.extent, spec.resolution, spec.fiber.normalized());
}

StimulusProtocol make_stimulus(const StimulusSpec& spec, const Mesh& mesh) {
    StimulusProtocol stim;
    if (spec.sites.empty())
        stim = corner_and_center_stimulus(mesh, spec.radius);
    else
        stim.sites = spec.sites;
    stim.amplitude = spec.amplitude;
    stim.duration = spec.duration;
    stim.validate();
    return stim;
}

}  // namespace cardiored
