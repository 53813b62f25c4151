#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "cardiored/config.hpp"

namespace cardiored {

enum class EstimateMode { full, reduced, adaptive };
std::string to_string(EstimateMode m);
EstimateMode estimate_mode_from_string(const std::string& s);

// Each command writes into `out` (created on demand) and returns a JSON report
// that is also saved there. File names:
//   forward   trajectory_u.csv [trajectory_w.csv, trajectory_iion.csv], forward.json
//   measure   measurements.json
//   bases     bases/basis_XXX.bin, bases/index.json
//   estimate  history_<mode>.csv, summary_<mode>.json
//   doe       doe_XXX.csv, doe_XXX.gp, doe.json
// forward and measure solve at `sigma` when given, else at measurement.sigma_exact.
nlohmann::json cmd_forward(const ExperimentConfig& cfg, const std::filesystem::path& out,
                           std::optional<Conductivity> sigma = std::nullopt);
nlohmann::json cmd_measure(const ExperimentConfig& cfg, const std::filesystem::path& out,
                           std::optional<Conductivity> sigma = std::nullopt);
nlohmann::json cmd_bases(const ExperimentConfig& cfg, const std::filesystem::path& out);
// Reads out/measurements.json and, for reduced mode, out/bases. When another
// mode's summary already sits in `out`, the time percentage against a full
// order summary is included.
nlohmann::json cmd_estimate(const ExperimentConfig& cfg, const std::filesystem::path& out, EstimateMode mode);
nlohmann::json cmd_doe(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace cardiored
