#include "glandseg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "glandseg/boundary.hpp"
#include "glandseg/error.hpp"
#include "glandseg/forest.hpp"
#include "glandseg/image_io.hpp"
#include "glandseg/parallel.hpp"
#include "glandseg/phantom.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace glandseg {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  io::write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
      dynamic_cast<const ModelFormatError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
      dynamic_cast<const TrainingError*>(&e))
    return kExitInput;
  return kExitPartial;
}

TrainResult cmd_train(const PipelineConfig& cfg, const DatasetIndex& data, const fs::path& model,
                      const std::optional<fs::path>& features_csv) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<AnnotatedImage> images = load_annotated(data);
  if (images.empty()) throw IngestionError("no annotated training images found");
  spdlog::info("train: {} annotated images", images.size());

  const TrainingSet set = build_training_set(images, cfg.segment.z, cfg.segment.glcm_levels);
  TrainResult result;
  result.images = images.size();
  result.samples = set.labels.size();
  result.positives = static_cast<std::size_t>(std::count(set.labels.begin(), set.labels.end(), 1));
  spdlog::info("train: {} nucleus samples, {} border / {} stromal ({:.1f}% border)", result.samples,
               result.positives, result.samples - result.positives,
               result.samples ? 100.0 * static_cast<double>(result.positives) / static_cast<double>(result.samples)
                              : 0.0);
  if (features_csv) write_text(*features_csv, training_set_csv(set, images));

  const Forest forest = train_forest(set.features, set.labels, cfg.forest, effective_threads(cfg.threads));

  std::vector<BinaryMask> nuclei;
  nuclei.reserve(images.size());
  for (const auto& img : images) nuclei.push_back(detect_nuclei(img.image).nuclei);
  result.n_th = compute_threshold_nth(nuclei, cfg.segment.link.p);

  save_forest(forest, model, result.n_th);
  result.checksum = load_forest(model).checksum;
  spdlog::info("train: N_th = {:.6f}; model {} written in {:.1f} s (checksum {})", result.n_th, model.string(),
               seconds_since(t0), hex32(result.checksum));
  return result;
}

std::size_t SegmentResult::failures() const {
  return static_cast<std::size_t>(std::count_if(images.begin(), images.end(), [](const auto& o) { return !o.ok; }));
}

RgbImage render_overlay(const RgbImage& img, const LabelMap& regions) {
  if (!regions.same_shape(img.width(), img.height())) throw ContractError("overlay: label map size differs");
  RgbImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int l = regions(x, y);
      if (l == 0) continue;
      // Spread hues with a multiplicative hash; blend 50/50.
      const std::uint32_t h = static_cast<std::uint32_t>(l) * 2654435761u;
      const Rgb tint{static_cast<std::uint8_t>(64 + (h >> 24) % 192), static_cast<std::uint8_t>(64 + (h >> 16) % 192),
                     static_cast<std::uint8_t>(64 + (h >> 8) % 192)};
      const Rgb c = img.at(x, y);
      const bool edge = (x > 0 && regions(x - 1, y) != l) || (x + 1 < img.width() && regions(x + 1, y) != l) ||
                        (y > 0 && regions(x, y - 1) != l) || (y + 1 < img.height() && regions(x, y + 1) != l);
      if (edge)
        out.set(x, y, {0, 200, 0});
      else
        out.set(x, y, {static_cast<std::uint8_t>((c.r + tint.r) / 2), static_cast<std::uint8_t>((c.g + tint.g) / 2),
                       static_cast<std::uint8_t>((c.b + tint.b) / 2)});
    }
  }
  return out;
}

SegmentResult cmd_segment(const PipelineConfig& cfg, const fs::path& model, const DatasetIndex& data,
                          const fs::path& out_dir, bool debug_overlays) {
  const LoadedModel loaded = load_forest(model);
  SegmentParams params = cfg.segment;
  if (cfg.n_th)
    params.n_th = *cfg.n_th;
  else if (loaded.n_th)
    params.n_th = *loaded.n_th;
  else
    throw ConfigError("model " + model.string() + " records no N_th and the config does not set boundary.n_th");
  params.keep_intermediates = debug_overlays;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IngestionError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  SegmentResult result;
  result.config_hash = cfg.hash();
  result.model_checksum = loaded.checksum;
  result.images.resize(data.entries.size());

  const int workers = effective_threads(cfg.threads);
  spdlog::info("segment: {} images on {} worker(s), N_th = {:.6f}", data.entries.size(), workers, params.n_th);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(data.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& e = data.entries[i];
    ImageOutcome& o = result.images[i];
    o.id = e.id;
    try {
      const RgbImage img = io::read_rgb(e.image);
      // Forest prediction is read-only and safe to share between workers;
      // the per-image pipeline is single-threaded.
      const GlandSegmentation seg = segment(img, loaded.forest, params);
      io::write_atomic(out_dir / (e.id + "_seg.png"), io::encode_label_png(seg.regions));
      if (debug_overlays && seg.intermediates) {
        io::write_atomic(out_dir / (e.id + "_T.png"), io::encode_mask_png(seg.intermediates->nuclei));
        io::write_atomic(out_dir / (e.id + "_C.png"), io::encode_mask_png(seg.intermediates->border));
        io::write_atomic(out_dir / (e.id + "_overlay.png"), io::encode_png(render_overlay(img, seg.regions)));
      }
      o.ok = true;
      o.kind = to_string(seg.kind.kind);
      o.ratio = seg.kind.ratio;
      o.regions = seg.regions.count;
      spdlog::info("segment: {} -> {} regions ({}, r = {:.4f})", e.id, o.regions, o.kind, o.ratio);
    } catch (const std::exception& ex) {
      o.error = ex.what();
      spdlog::error("segment: {} failed: {}", e.id, ex.what());
    }
  });

  ordered_json manifest;
  manifest["config_hash"] = hex64(result.config_hash);
  manifest["model"] = model.string();
  manifest["model_checksum"] = hex32(result.model_checksum);
  manifest["n_th"] = params.n_th;
  manifest["debug_overlays"] = debug_overlays;
  ordered_json cfg_json = ordered_json::object();
  {
    std::istringstream lines(cfg.canonical());
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) cfg_json[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  manifest["config"] = cfg_json;
  ordered_json rows = ordered_json::array();
  for (const auto& o : result.images) {
    ordered_json row;
    row["id"] = o.id;
    row["status"] = o.ok ? "ok" : "failed";
    if (o.ok) {
      row["output"] = o.id + "_seg.png";
      row["kind"] = o.kind;
      row["ratio"] = o.ratio;
      row["regions"] = o.regions;
    } else {
      row["error"] = o.error;
    }
    rows.push_back(std::move(row));
  }
  manifest["images"] = std::move(rows);
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  spdlog::info("segment: {} ok, {} failed in {:.1f} s", result.images.size() - result.failures(), result.failures(),
               seconds_since(t0));
  return result;
}

MetricsReport cmd_evaluate(const fs::path& pred_dir, const DatasetIndex& gt, const fs::path& report) {
  std::vector<ImageMetrics> rows;
  for (const auto& e : gt.entries) {
    if (!e.annotation) continue;
    const LabelMap truth = io::read_label_map(*e.annotation);
    std::optional<LabelMap> pred;
    for (const char* ext : {".png", ".bmp"}) {
      const fs::path p = pred_dir / (e.id + "_seg" + ext);
      if (fs::exists(p)) {
        pred = io::read_label_map(p);
        break;
      }
    }
    ImageMetrics m;
    if (pred) {
      if (!pred->same_shape(truth)) throw IngestionError("prediction for " + e.id + " does not match its annotation size");
      m = evaluate_image(*pred, truth, e.id, e.split);
    } else {
      spdlog::warn("evaluate: no prediction for {}; scored as all false negatives", e.id);
      m = evaluate_image(LabelMap(truth.width(), truth.height()), truth, e.id, e.split);
      m.missing_prediction = true;
    }
    rows.push_back(std::move(m));
  }
  if (rows.empty()) throw IngestionError("no annotated images to evaluate in the ground-truth directory");

  MetricsReport out;
  out.per_image = std::move(rows);
  out.aggregate = summarize(out.per_image);
  if (report.has_parent_path()) fs::create_directories(report.parent_path());
  write_text(report, report_to_json(out));
  fs::path table = report;
  table.replace_extension(".txt");
  if (table == report) table += ".txt";
  write_text(table, report_to_table(out));
  return out;
}

void cmd_synth(const fs::path& out_dir, std::size_t count, std::uint64_t seed, const std::string& prefix, int size) {
  fs::create_directories(out_dir);
  for (const Phantom& p : phantom_suite(count, seed, prefix, size)) {
    io::write_atomic(out_dir / (p.id + ".png"), io::encode_png(p.image));
    io::write_atomic(out_dir / (p.id + "_anno.png"), io::encode_label_png(p.truth));
  }
  spdlog::info("synth: wrote {} phantoms to {}", count, out_dir.string());
}

}  // namespace glandseg
