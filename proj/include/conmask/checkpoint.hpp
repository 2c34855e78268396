#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "conmask/model.hpp"

namespace conmask {

// Layout (all integers little-endian):
//   char[8]  magic "CONMASKC"
//   u32      version
//   u64      metadata length, then that many bytes (key = value text)
//   u32      tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims[rank],
//               f64 values[product(dims)] as IEEE-754 binary64
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  std::vector<std::pair<std::string, nk::Tensor>> tensors;

  const nk::Tensor& at(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Every parameter value plus the batch-norm moving statistics.
Checkpoint snapshot(ModelParams& params, std::string metadata = {});
// Copies values into already-shaped params; a missing tensor or a shape
// mismatch is a DataError.
void restore(ModelParams& params, const Checkpoint& ckpt);

void save_checkpoint(ModelParams& params, const std::filesystem::path& path,
                     const std::string& metadata = {});
// Returns the stored metadata.
std::string load_checkpoint(ModelParams& params, const std::filesystem::path& path);

}  // namespace conmask
