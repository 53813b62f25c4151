#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cardiored/forward.hpp"
#include "cardiored/inverse_opt.hpp"
#include "cardiored/measurement.hpp"
#include "cardiored/mesh.hpp"
#include "cardiored/sampling_doe.hpp"

namespace cardiored {

// Either a `monomesh v1` file or a generated slab.
struct MeshSpec {
    std::string path;
    std::array<double, 3> extent{5.0, 5.0, 0.5};
    std::array<int, 3> resolution{40, 40, 4};
    Point3 fiber{1.0, 0.0, 0.0};
};

// Sites empty means the four corners plus the centre at mid-thickness.
struct StimulusSpec {
    double radius = 0.2;
    double amplitude = 1e5;
    double duration = 1.0;
    std::vector<StimulusSite> sites;
};

struct MeasurementSpec {
    Conductivity sigma_exact{4.5, 1.0};
    int site_grid = 100;
    double dt_snap = 2.0;
    double noise_level = 0.15;
    std::uint64_t seed = 20240607;
    NoiseModel noise_model = NoiseModel::multiplicative;
    IonicEvaluation ionic = IonicEvaluation::nodal;  // solver used to synthesise the data
};

struct OptimizerSpec {
    Conductivity sigma0{1.5, 1.0};
    BarrierOptions barrier;
    int cycles = 5;
    int inner_max_iter = 20;
};

struct BasisSpec {
    Eigen::Index N = 35;
    Eigen::Index M = 80;
    double T = 25.0;  // snapshot duration, every time step
};

struct DoeSpec {
    std::vector<Conductivity> generators{{3.0, 0.35}};
    double ml_lo = 1.0, ml_hi = 7.0;
    double mt_lo = 0.05, mt_hi = 3.0;
    int nx = 16, ny = 16;
    int bands = 4;
};

struct ExperimentConfig {
    MeshSpec mesh;
    SolveConfig solve;
    IonicParams ionic;
    StimulusSpec stimulus;
    MeasurementSpec measurement;
    OptimizerSpec optimizer;
    PolarSamplingSpec sampling;
    BasisSpec basis;
    DoeSpec doe;
    std::string output = "out";

    // Throws InvalidArgument on non-positive dimensional fields or a missing mesh file.
    void validate() const;
};

// Missing keys keep their defaults; unknown keys raise FormatError. Relative
// mesh paths are resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a of the canonical JSON dump, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

Mesh make_mesh(const MeshSpec& spec);
StimulusProtocol make_stimulus(const StimulusSpec& spec, const Mesh& mesh);

}  // namespace cardiored
