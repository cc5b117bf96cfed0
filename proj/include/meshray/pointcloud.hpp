#pragma once

// Point-cloud writers for simulation results.

#include <filesystem>
#include <string>
#include <vector>

#include "meshray/simulation.hpp"

namespace meshray {

struct CloudWriteOptions {
    bool per_pose = false;       // one file per pose: <stem>_<pose><ext>
    bool deterministic = false;  // omit the timestamp comment
    bool hits_only = false;      // skip miss records
};

/// Binary little-endian PLY. Vertex properties follow the selection:
/// x y z, nx ny nz (float), range (float), hit (uchar), prim_id geom_id inst_id (uint).
/// Returns the paths written.
std::vector<std::filesystem::path> write_cloud_ply(const std::filesystem::path& path, const SimResult& result,
                                                   const CloudWriteOptions& options = {});

/// One row per measurement: "pose,ray,<columns>" with columns hit, range,
/// x, y, z, nx, ny, nz, prim_id, geom_id, inst_id as selected.
std::vector<std::filesystem::path> write_cloud_csv(const std::filesystem::path& path, const SimResult& result,
                                                   const CloudWriteOptions& options = {});

/// Path of pose `index` under per-pose output.
std::filesystem::path per_pose_path(const std::filesystem::path& path, std::uint32_t index);

}  // namespace meshray
