#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "cardiored/forward.hpp"
#include "cardiored/inverse_opt.hpp"
#include "cardiored/measurement.hpp"
#include "cardiored/pod.hpp"
#include "cardiored/rom_build.hpp"
#include "cardiored/sampling_doe.hpp"

namespace cardiored {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance stamped on every output file.
struct FileMeta {
    std::string config_hash;
    std::string version = kToolVersion;
};

// Writes `contents` to `path` + ".tmp" and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

// `podb v1`: magic line, then binary header (field tag u8, sigma_gen 2 x f64,
// n, N, m as i64) and mean, singular values, modes (column-major), all f64.
void write_pod(std::ostream& out, const PodBasis& b);
PodBasis read_pod(std::istream& in);

// `deim v1`: magic line, then M, N, n (i64), indices (i64), projector,
// extractor and inv_PtZ (column-major f64).
void write_deim(std::ostream& out, const DeimOperator& d, Eigen::Index n);
DeimOperator read_deim(std::istream& in, Eigen::Index* n = nullptr);

// One text line `cardiored basis <version> <hash>` followed by the u basis,
// the I_ion basis and the DEIM operator. Loading checks mode orthonormality
// to 1e-10 and throws FormatError otherwise.
void save_reduced_basis(const std::filesystem::path& path, const ReducedBasis& b, const FileMeta& meta);
ReducedBasis load_reduced_basis(const std::filesystem::path& path);

// JSON with metadata, the site list and the frames at the sites. Frames at
// non-site nodes are not stored and reload as zero.
nlohmann::json measurement_to_json(const MeasurementSet& m, const FileMeta& meta);
MeasurementSet measurement_from_json(const nlohmann::json& j);
void save_measurements(const std::filesystem::path& path, const MeasurementSet& m, const FileMeta& meta);
MeasurementSet load_measurements(const std::filesystem::path& path);

// `# ` metadata lines, then `step,t,v_0,...,v_{n-1}` per frame (%.17g).
std::string trajectory_csv(const TrajectoryRecord& rec, const Eigen::MatrixXd& frames, const FileMeta& meta);

// iter,sigma_ml,sigma_mt,J,grad_norm,basis_index,mu
std::string history_csv(const std::vector<IterateRecord>& history, const FileMeta& meta);

// sigma_ml,sigma_mt,e,class (failed points: e = nan, class = failed)
std::string doe_csv(const DoeMap& map, const FileMeta& meta);
// gnuplot script plotting `csv_name` as a coloured scatter with the generator marked.
std::string doe_gnuplot(const DoeMap& map, const std::string& csv_name, const std::vector<double>& band_edges);

}  // namespace cardiored
