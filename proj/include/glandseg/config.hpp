#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "glandseg/boundary.hpp"
#include "glandseg/forest.hpp"

namespace glandseg {

/// Every tunable of the pipeline. The `[parameters]` section of the config
/// file carries the five headline values under their short names
/// (z, W, N, f, k); everything else lives in its own section:
///
///   [parameters]      z W N f k
///   [preprocess]      iterations kappa step          (Perona-Malik)
///   [forest]          seed max_depth min_leaf_size
///   [boundary]        n_th                           (optional, overrides the model)
///   [boundary.thick]  max_steps min_area_fraction min_area
///   [boundary.thin]   p p2 n border_fraction proximity
///   [runtime]         threads
struct PipelineConfig {
  SegmentParams segment;
  ForestParams forest;
  std::optional<double> n_th;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;

  /// One `section.key = value` line per effective parameter, fixed order,
  /// round-trip precision.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(); changes iff an effective parameter changes.
  std::uint64_t hash() const;
};

PipelineConfig default_config();

/// Parses a config document over the defaults. Unknown sections or keys,
/// malformed numbers and out-of-range values throw ConfigError.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Worker count after applying GLANDSEG_THREADS as an upper bound.
int effective_threads(int requested);

std::string hex64(std::uint64_t v);

}  // namespace glandseg
