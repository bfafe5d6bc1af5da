#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "glandseg/commands.hpp"
#include "glandseg/config.hpp"
#include "glandseg/dataset.hpp"
#include "glandseg/metrics.hpp"

namespace fs = std::filesystem;
using namespace glandseg;

namespace {

PipelineConfig config_from(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("glandseg"));
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");

  CLI::App app{"Gland segmentation for stained tissue images"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::string config_path, data_dir, model_path, split_name = "all";

  auto* train = app.add_subcommand("train", "Train the nucleus classifier and record N_th");
  std::optional<std::uint64_t> seed;
  std::string features_csv;
  train->add_option("--data", data_dir, "Directory of <name>.bmp|png and <name>_anno.bmp|png")->required();
  train->add_option("--config", config_path, "Config file");
  train->add_option("--model", model_path, "Output model file")->required();
  train->add_option("--seed", seed, "Overrides forest.seed");
  train->add_option("--split", split_name, "all, train, testA or testB");
  train->add_option("--features-csv", features_csv, "Also dump the training feature matrix");

  auto* seg = app.add_subcommand("segment", "Segment every image in a directory");
  std::string out_dir;
  bool overlays = false;
  seg->add_option("--data", data_dir, "Image directory")->required();
  seg->add_option("--model", model_path, "Model file from `train`")->required();
  seg->add_option("--out", out_dir, "Output directory")->required();
  seg->add_option("--config", config_path, "Config file");
  seg->add_option("--split", split_name, "all, train, testA or testB");
  seg->add_flag("--debug-overlays", overlays, "Also write T, C and overlay PNGs");

  auto* eval = app.add_subcommand("evaluate", "Score label maps against annotations");
  std::string pred_dir, gt_dir, report_path;
  eval->add_option("--pred", pred_dir, "Directory of <id>_seg.png")->required();
  eval->add_option("--gt", gt_dir, "Annotated dataset directory")->required();
  eval->add_option("--report", report_path, "Report JSON path (table goes to .txt)")->required();
  eval->add_option("--split", split_name, "all, train, testA or testB");

  auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset");
  std::size_t count = 10;
  std::uint64_t synth_seed = 1;
  int size = 256;
  std::string prefix = "phantom";
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--count", count, "Number of phantoms")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--size", size, "Image side in pixels")->check(CLI::Range(96, 4096));
  synth->add_option("--prefix", prefix, "File name prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*train) {
      PipelineConfig cfg = config_from(config_path);
      if (seed) cfg.forest.seed = *seed;
      const DatasetIndex data =
          ingest_dataset(data_dir, parse_split(split_name), IngestOptions{.require_annotations = true});
      const TrainResult r = cmd_train(cfg, data, model_path,
                                      features_csv.empty() ? std::nullopt : std::optional<fs::path>(features_csv));
      std::printf("images %zu\nsamples %zu\nborder %zu\nstromal %zu\nn_th %.6f\nchecksum %08x\n", r.images,
                  r.samples, r.positives, r.samples - r.positives, r.n_th, r.checksum);
      return kExitOk;
    }
    if (*seg) {
      const PipelineConfig cfg = config_from(config_path);
      const DatasetIndex data = ingest_dataset(data_dir, parse_split(split_name), IngestOptions{.verify = false});
      const SegmentResult r = cmd_segment(cfg, model_path, data, out_dir, overlays);
      std::printf("segmented %zu of %zu images\n", r.images.size() - r.failures(), r.images.size());
      return r.exit_code();
    }
    if (*eval) {
      const DatasetIndex gt = ingest_dataset(gt_dir, parse_split(split_name));
      const MetricsReport report = cmd_evaluate(pred_dir, gt, report_path);
      std::fputs(report_to_table(report).c_str(), stdout);
      return kExitOk;
    }
    if (*synth) {
      cmd_synth(out_dir, count, synth_seed, prefix, size);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  }
  return kExitOk;
}
