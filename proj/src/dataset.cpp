#include "glandseg/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "glandseg/error.hpp"
#include "glandseg/image_io.hpp"

namespace fs = std::filesystem;

namespace glandseg {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool starts_with_ci(const std::string& s, const std::string& prefix) {
  return s.size() >= prefix.size() && lower(s.substr(0, prefix.size())) == lower(prefix);
}

bool selected(Split split, const std::string& id) {
  switch (split) {
    case Split::All: return true;
    case Split::Train: return starts_with_ci(id, "train");
    case Split::TestA: return starts_with_ci(id, "testa");
    case Split::TestB: return starts_with_ci(id, "testb");
  }
  return false;
}

constexpr std::string_view kAnnoSuffix = "_anno";

}  // namespace

Split parse_split(const std::string& name) {
  const std::string n = lower(name);
  if (n == "all") return Split::All;
  if (n == "train") return Split::Train;
  if (n == "testa") return Split::TestA;
  if (n == "testb") return Split::TestB;
  throw ConfigError("unknown split '" + name + "' (expected all, train, testA or testB)");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::All: return "all";
    case Split::Train: return "train";
    case Split::TestA: return "testA";
    case Split::TestB: return "testB";
  }
  return "all";
}

std::string split_of(const std::string& id) {
  if (starts_with_ci(id, "testa")) return "testA";
  if (starts_with_ci(id, "testb")) return "testB";
  if (starts_with_ci(id, "train")) return "train";
  return "all";
}

DatasetIndex ingest_dataset(const fs::path& root, Split split, IngestOptions options) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IngestionError("dataset directory does not exist: " + root.string());
  if (split == Split::Train) options.require_annotations = true;

  std::map<std::string, fs::path> images, annotations;
  for (const auto& item : fs::directory_iterator(root)) {
    if (!item.is_regular_file()) continue;
    const fs::path& p = item.path();
    const std::string ext = lower(p.extension().string());
    if (ext != ".bmp" && ext != ".png") continue;
    const std::string stem = p.stem().string();
    auto& bucket = stem.ends_with(kAnnoSuffix) ? annotations : images;
    const std::string id = stem.ends_with(kAnnoSuffix) ? stem.substr(0, stem.size() - kAnnoSuffix.size()) : stem;
    if (const auto [it, fresh] = bucket.emplace(id, p); !fresh)
      throw IngestionError("ambiguous dataset entry '" + id + "': both " + it->second.filename().string() +
                           " and " + p.filename().string());
  }

  DatasetIndex index;
  index.split = split;
  for (const auto& [id, path] : images) {
    if (!selected(split, id)) continue;
    DatasetEntry e{id, path, std::nullopt, split_of(id)};
    if (const auto it = annotations.find(id); it != annotations.end()) e.annotation = it->second;
    if (!e.annotation && options.require_annotations)
      throw IngestionError("missing annotation for training image " + path.string() + " (expected " + id +
                           "_anno.bmp or " + id + "_anno.png)");
    if (options.verify) {
      const RgbImage img = io::read_rgb(path);
      if (e.annotation) {
        const LabelMap lm = io::read_label_map(*e.annotation);
        if (!lm.same_shape(img.width(), img.height()))
          throw IngestionError("annotation " + e.annotation->string() + " is " + std::to_string(lm.width()) + "x" +
                               std::to_string(lm.height()) + " but image is " + std::to_string(img.width()) + "x" +
                               std::to_string(img.height()));
      }
    }
    index.entries.push_back(std::move(e));
  }
  return index;
}

std::vector<AnnotatedImage> load_annotated(const DatasetIndex& index) {
  std::vector<AnnotatedImage> out;
  for (const auto& e : index.entries) {
    if (!e.annotation) continue;
    AnnotatedImage a{e.id, io::read_rgb(e.image), io::read_label_map(*e.annotation)};
    if (!a.truth.same_shape(a.image.width(), a.image.height()))
      throw IngestionError("annotation " + e.annotation->string() + " does not match the size of " + e.image.string());
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace glandseg
