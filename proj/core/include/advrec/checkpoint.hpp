#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "advrec/nn.hpp"

namespace advrec {

/// On-disk parameter file:
///   {"format_version": 1, "kind": "...", "config": {...},
///    "params": {"<name>": {"shape": [...], "data": "<base64 le float64>"}}}
/// Parameter order in the file follows ParamSet insertion order and is
/// restored on load. `config_json` holds the kind-specific header as a
/// serialized JSON object.
struct Checkpoint {
  std::string kind;
  std::string config_json = "{}";
  ParamSet params;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expect_kind);

}  // namespace advrec
