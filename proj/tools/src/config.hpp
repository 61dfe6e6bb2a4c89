#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cloudpatch/indices.hpp"
#include "cloudpatch/maskgen.hpp"
#include "cloudpatch/synth.hpp"
#include "cloudpatch/train.hpp"

namespace cloudpatch::cli {

struct PipelineConfig {
  std::filesystem::path input;  // series manifest; empty = derived from `out`
  std::filesystem::path out = "cloudpatch-out";
  SceneConfig scene;
  GrfConfig grf;
  TrainConfig train;
  std::vector<std::string> models{"cnn", "baseline"};
  IndexKind index_kind = IndexKind::kNdci;
  NdciOrientation orientation = NdciOrientation::kStandard;

  void validate() const;
};

// Flat INI text:
//
//   # comment
//   [section]
//   key = value
//
// Unknown sections or keys and malformed values raise ConfigError naming the
// source, line and field.
PipelineConfig parse_config(std::string_view text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

// Applies one `section.key` assignment; used by the parser and for flags.
void set_field(PipelineConfig& cfg, std::string_view field, std::string_view value);

}  // namespace cloudpatch::cli
