#include <filesystem>
#include <iostream>
#include <optional>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "cardiored/pipeline.hpp"

using namespace cardiored;

int main(int argc, char** argv) {
    CLI::App app{"POD-DEIM reduced-order monodomain solver and conductivity estimation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, mode = "reduced", log_level = "info";
    std::vector<double> sigma;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (default: the config's 'output')");
    };
    auto* fwd = app.add_subcommand("forward", "full-order solve, trajectory written as CSV");
    auto* meas = app.add_subcommand("measure", "synthetic noisy measurements at sigma_exact");
    auto* bases = app.add_subcommand("bases", "POD/DEIM basis archive per polar sample");
    auto* est = app.add_subcommand("estimate", "conductivity estimation from the measurements");
    auto* doe = app.add_subcommand("doe", "domain-of-effectiveness maps");
    for (auto* s : {fwd, meas, bases, est, doe}) add_common(s);
    for (auto* s : {fwd, meas})
        s->add_option("--sigma", sigma, "conductivity sigma_ml sigma_mt (overrides measurement.sigma_exact)")
            ->expected(2);
    est->add_option("--mode", mode, "full, reduced or adaptive")
        ->check(CLI::IsMember({"full", "reduced", "adaptive"}))
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        const auto cfg = load_config(config_path);
        const std::filesystem::path out = std::filesystem::path(out_dir.empty() ? cfg.output : out_dir);
        std::optional<Conductivity> sig;
        if (sigma.size() == 2) sig = Conductivity{sigma[0], sigma[1]};

        nlohmann::json report;
        if (*fwd) report = cmd_forward(cfg, out, sig);
        else if (*meas) report = cmd_measure(cfg, out, sig);
        else if (*bases) report = cmd_bases(cfg, out);
        else if (*est) report = cmd_estimate(cfg, out, estimate_mode_from_string(mode));
        else report = cmd_doe(cfg, out);
        std::cout << report.dump(2) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
