#pragma once

// On-disk formats: trajectory CSVs with a JSON manifest, controller and model
// JSON, policy checkpoints (architecture JSON plus a raw weight blob) and
// learning curves.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "occball/linalg.hpp"
#include "occball/plant.hpp"
#include "occball/rl.hpp"

namespace occball {

using Json = nlohmann::ordered_json;

/// Shortest text that parses back to the same double.
[[nodiscard]] std::string format_double(double value);

/// 16 hex digits of FNV-1a over `bytes`.
[[nodiscard]] std::string content_hash(const std::string& bytes);
[[nodiscard]] std::string file_hash(const std::filesystem::path& path);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

[[nodiscard]] Json to_json(const PhysicalParams& params);
[[nodiscard]] PhysicalParams params_from_json(const Json& j);
[[nodiscard]] Json to_json(const SensorSpec& sensor);
[[nodiscard]] Json to_json(const Mat& m);
[[nodiscard]] Mat mat_from_json(const Json& j);
[[nodiscard]] Json to_json(const StateSpaceModel& model);
[[nodiscard]] StateSpaceModel model_from_json(const Json& j);

/// Columns t, h, h_dot, theta, theta_dot, u, y (state columns only when recorded).
[[nodiscard]] std::string trajectory_csv(const Trajectory& traj);
[[nodiscard]] Trajectory parse_trajectory_csv(const std::string& text);

struct DatasetManifest {
    std::uint64_t seed = 0;
    PhysicalParams params;
    SensorSpec sensor;
    long budget = 0;
    std::vector<std::string> files;
    std::string hash;  // over the concatenated trajectory CSVs
};

/// Writes traj_00000.csv, ... and manifest.json under `dir`; returns the manifest.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::vector<Trajectory>& data,
                              std::uint64_t seed, const PhysicalParams& params, const SensorSpec& sensor,
                              long budget);
[[nodiscard]] std::vector<Trajectory> read_dataset(const std::filesystem::path& dir,
                                                   DatasetManifest* manifest = nullptr);
[[nodiscard]] std::string dataset_hash(const std::vector<Trajectory>& data);

/// Architecture JSON at `stem`.json and row-major little-endian doubles at
/// `stem`.bin (actor, critic1, critic2, target1, target2).
void save_policy(const std::filesystem::path& stem, const PolicyParams& params, const SacConfig& config);
[[nodiscard]] PolicyParams load_policy(const std::filesystem::path& stem, SacConfig* config = nullptr);

[[nodiscard]] std::string learning_curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace occball
