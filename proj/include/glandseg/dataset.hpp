#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glandseg/features.hpp"

namespace glandseg {

/// `All` takes every image in the directory; the others keep only names
/// starting with `train`, `testA` or `testB` (case-insensitive), which is how
/// the Warwick-QU release names its files.
enum class Split { All, Train, TestA, TestB };

Split parse_split(const std::string& name);
const char* to_string(Split split);

struct DatasetEntry {
  std::string id;
  std::filesystem::path image;
  std::optional<std::filesystem::path> annotation;
  std::string split;  // train / testA / testB, or "all" for unprefixed names
};

struct DatasetIndex {
  Split split = Split::All;
  std::vector<DatasetEntry> entries;
};

struct IngestOptions {
  /// Every image must have an annotation; always on for Split::Train.
  bool require_annotations = false;
  /// Decode every file up front and check annotation sizes.
  bool verify = true;
};

/// Pairs `<name>.bmp|png` with `<name>_anno.bmp|png`, sorted by name.
/// Throws IngestionError (ImageDecodeError for undecodable files) naming the
/// offending path.
DatasetIndex ingest_dataset(const std::filesystem::path& root, Split split, IngestOptions options = {});

/// Split a file name belongs to, from its prefix.
std::string split_of(const std::string& id);

/// Loads every entry with an annotation.
std::vector<AnnotatedImage> load_annotated(const DatasetIndex& index);

}  // namespace glandseg
