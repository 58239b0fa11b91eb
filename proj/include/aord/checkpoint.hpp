#pragma once

// Checkpoint container, version 1. Little-endian throughout.
//
//   offset  size  field
//   0       8     magic "AORDCKPT"
//   8       4     u32 format version
//   12      8     u64 metadata length M
//   20      M     UTF-8 JSON metadata
//   20+M    8     u64 blob length N (bytes, multiple of 8)
//   28+M    N     f64 tensor data, column-major, in directory order
//   28+M+N  8     u64 FNV-1a of metadata bytes followed by blob bytes
//
// The metadata holds the run config echo and its model hash, the schedule
// constants, the seed lineage, epochs completed, the Adam step count, and a
// tensor directory {name, rows, cols, offset}. Parameter tensors come first,
// then Adam first/second moments named "adam.m/<param>" and "adam.v/<param>".
//
// Files are written to "<path>.tmp" and renamed into place, so a reader sees
// either the previous complete file or the new one.

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "aord/model_bundle.hpp"
#include "aord/nn.hpp"
#include "aord/run_config.hpp"

namespace aord {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadedCheckpoint {
  RunConfig config;
  std::unique_ptr<ModelBundle> bundle;
  AdamState adam;
  int epochs_done = 0;
  nlohmann::json metadata;
};

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, ModelBundle& bundle,
                     const AdamState& adam, int epochs_done);

// Throws CheckpointError on a bad magic, version, checksum, or tensor shape.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Writes `bytes` to `<path>.tmp`, syncs, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace aord
