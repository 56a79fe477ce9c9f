#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sirius/core_data.hpp"

namespace sirius {

// JSON-lines trajectory log. Each episode is one header line
//   {"traj": {"round":..,"seed":..,"success":..,"source":..,"task_id":..,"len":..}}
// followed by `len` sample lines
//   {"t":..,"s":[..],"a":[..],"r":..,"c":"demo"|"intv"|"preintv"|"robot"}
// with floats written at 17 significant digits so the text round-trips exactly.

void write_trajectory(std::ostream& out, const Trajectory& trajectory, std::string_view task_id);

/// Parses every episode in the stream. The task id of the last header is
/// stored into `task_id` when non-null.
std::vector<Trajectory> read_trajectories(std::istream& in, std::string* task_id = nullptr);

void append_trajectory(const std::filesystem::path& file, const Trajectory& trajectory,
                       std::string_view task_id);
std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& file,
                                             std::string* task_id = nullptr);

/// Ordered list of trajectory files making up a dataset directory.
struct DatasetManifest {
  std::string task_id;
  std::vector<std::string> files;
};

inline constexpr std::string_view kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);

/// Writes `dataset` into `dir`, one file per group as returned by `file_for`,
/// and a manifest listing the files in first-use order.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                   const std::function<std::string(const Trajectory&, std::size_t)>& file_for);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace sirius
