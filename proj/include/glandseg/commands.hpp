#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glandseg/config.hpp"
#include "glandseg/dataset.hpp"
#include "glandseg/metrics.hpp"

namespace glandseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitInput = 2;

/// 2 for configuration, ingestion and model-file problems, 1 otherwise.
int exit_code_for(const std::exception& e);

struct TrainResult {
  std::size_t images = 0;
  std::size_t samples = 0;
  std::size_t positives = 0;  // border-nucleus samples
  double n_th = 0.0;
  std::uint32_t checksum = 0;
};

/// Builds the training set from every annotated entry, trains the forest,
/// computes N_th over the images' nucleus masks and saves both to `model`.
TrainResult cmd_train(const PipelineConfig& cfg, const DatasetIndex& data, const std::filesystem::path& model,
                      const std::optional<std::filesystem::path>& features_csv = {});

struct ImageOutcome {
  std::string id;
  bool ok = false;
  std::string error;
  std::string kind;
  double ratio = 0.0;
  int regions = 0;
};

struct SegmentResult {
  std::vector<ImageOutcome> images;
  std::uint64_t config_hash = 0;
  std::uint32_t model_checksum = 0;

  std::size_t failures() const;
  int exit_code() const { return failures() == 0 ? kExitOk : kExitPartial; }
};

/// Writes `<id>_seg.png` (16-bit label map) per image plus `manifest.json`;
/// with overlays also `<id>_T.png`, `<id>_C.png` and `<id>_overlay.png`.
/// Images that fail are logged and recorded in the manifest.
SegmentResult cmd_segment(const PipelineConfig& cfg, const std::filesystem::path& model, const DatasetIndex& data,
                          const std::filesystem::path& out_dir, bool debug_overlays = false);

/// Scores `<pred>/<id>_seg.png` against every annotated entry. A missing
/// prediction is scored as an empty label map and flagged. Writes the JSON
/// report to `report` and the text table next to it (`.txt`).
MetricsReport cmd_evaluate(const std::filesystem::path& pred_dir, const DatasetIndex& gt,
                           const std::filesystem::path& report);

/// Writes `count` phantoms as `<prefix>_NN.png` / `<prefix>_NN_anno.png`.
void cmd_synth(const std::filesystem::path& out_dir, std::size_t count, std::uint64_t seed,
               const std::string& prefix, int size);

/// Regions tinted over the original image.
RgbImage render_overlay(const RgbImage& img, const LabelMap& regions);

}  // namespace glandseg
