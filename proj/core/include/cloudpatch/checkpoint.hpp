#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

// PRM1 parameter container (little-endian):
//   "PRM1", u32 header_len, header bytes (UTF-8 text), u32 blob_count, then per
//   blob: u32 name_len, name, u32 rank, rank x u32 dims, prod(dims) x f32.
struct NamedBlob {
  std::string name;
  Blob<float> blob;
};

struct Checkpoint {
  std::string header;
  std::vector<NamedBlob> blobs;
};

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Blob names are "<layer>/<weight|recurrent|bias>".
Checkpoint to_checkpoint(const ParamSet<float>& params, std::string header);
// Copies blobs into a parameter skeleton of the same layout.
void load_into(const Checkpoint& checkpoint, ParamSet<float>& params);

}  // namespace cloudpatch
