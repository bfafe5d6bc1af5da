#include "glandseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace glandseg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (segment.z < 16) fail("parameters.z must be >= 16");
  if (segment.glcm_levels < 2 || segment.glcm_levels > 256) fail("GLCM levels must be in [2, 256]");
  try {
    segment.line.validate();
    segment.link.validate();
    segment.diffusion.validate();
    forest.validate(kFeatureCount);
  } catch (const ParameterError& e) {
    fail(e.what());
  }
  if (!(segment.border_fraction > 0 && segment.border_fraction <= 1))
    fail("boundary.thin.border_fraction must be in (0, 1]");
  if (!(segment.proximity >= 0)) fail("boundary.thin.proximity must be >= 0");
  if (!(segment.min_area_fraction >= 0 && segment.min_area_fraction < 1))
    fail("boundary.thick.min_area_fraction must be in [0, 1)");
  if (n_th && !(*n_th >= 0)) fail("boundary.n_th must be >= 0");
  if (threads < 0) fail("runtime.threads must be >= 0");
}

std::string PipelineConfig::canonical() const {
  std::ostringstream o;
  o << "parameters.z = " << segment.z << "\n"
    << "parameters.W = " << segment.line.window << "\n"
    << "parameters.N = " << forest.n_trees << "\n"
    << "parameters.f = " << forest.features_per_node << "\n"
    << "parameters.k = " << fmt_real(segment.line.k) << "\n"
    << "preprocess.iterations = " << segment.diffusion.iterations << "\n"
    << "preprocess.kappa = " << fmt_real(segment.diffusion.kappa) << "\n"
    << "preprocess.step = " << fmt_real(segment.diffusion.step) << "\n"
    << "features.glcm_levels = " << segment.glcm_levels << "\n"
    << "forest.seed = " << forest.seed << "\n"
    << "forest.max_depth = " << forest.max_depth << "\n"
    << "forest.min_leaf_size = " << forest.min_leaf_size << "\n"
    << "boundary.n_th = " << (n_th ? fmt_real(*n_th) : std::string("model")) << "\n"
    << "boundary.thick.max_steps = " << segment.line.max_steps << "\n"
    << "boundary.thick.min_area_fraction = " << fmt_real(segment.min_area_fraction) << "\n"
    << "boundary.thick.min_area = " << segment.min_area_pixels << "\n"
    << "boundary.thin.p = " << fmt_real(segment.link.p) << "\n"
    << "boundary.thin.p2 = " << fmt_real(segment.link.p2) << "\n"
    << "boundary.thin.n = " << segment.link.n << "\n"
    << "boundary.thin.border_fraction = " << fmt_real(segment.border_fraction) << "\n"
    << "boundary.thin.proximity = " << fmt_real(segment.proximity) << "\n";
  return o.str();
}

std::uint64_t PipelineConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  auto& s = cfg.segment;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto integer = [](int& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) {
      const long long x = parse_int(k, v);
      if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("config key '" + k + "' is out of range");
      field = static_cast<int>(x);
    };
  };
  auto real = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_real(k, v); };
  };
  const std::map<std::string, Setter> keys = {
      {"parameters.z", integer(s.z)},
      {"parameters.W", integer(s.line.window)},
      {"parameters.N", integer(cfg.forest.n_trees)},
      {"parameters.f", integer(cfg.forest.features_per_node)},
      {"parameters.k", real(s.line.k)},
      {"preprocess.iterations", integer(s.diffusion.iterations)},
      {"preprocess.kappa", real(s.diffusion.kappa)},
      {"preprocess.step", real(s.diffusion.step)},
      {"features.glcm_levels", integer(s.glcm_levels)},
      {"forest.seed",
       [&cfg](const std::string& k, const std::string& v) {
         const long long x = parse_int(k, v);
         if (x < 0) throw ConfigError("forest.seed must be >= 0");
         cfg.forest.seed = static_cast<std::uint64_t>(x);
       }},
      {"forest.max_depth", integer(cfg.forest.max_depth)},
      {"forest.min_leaf_size", integer(cfg.forest.min_leaf_size)},
      {"boundary.n_th", [&cfg](const std::string& k, const std::string& v) { cfg.n_th = parse_real(k, v); }},
      {"boundary.thick.max_steps", integer(s.line.max_steps)},
      {"boundary.thick.min_area_fraction", real(s.min_area_fraction)},
      {"boundary.thick.min_area",
       [&s](const std::string& k, const std::string& v) {
         const long long x = parse_int(k, v);
         if (x < 0) throw ConfigError("boundary.thick.min_area must be >= 0");
         s.min_area_pixels = static_cast<std::size_t>(x);
       }},
      {"boundary.thin.p", real(s.link.p)},
      {"boundary.thin.p2", real(s.link.p2)},
      {"boundary.thin.n", integer(s.link.n)},
      {"boundary.thin.border_fraction", real(s.border_fraction)},
      {"boundary.thin.proximity", real(s.proximity)},
      {"runtime.threads", integer(cfg.threads)},
  };

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = section + "." + trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + "unknown config key '" + key + "'");
    it->second(key, value);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

int effective_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("GLANDSEG_THREADS")) {
    int cap = 0;
    const std::string_view sv(env);
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), cap);
    if (ec == std::errc() && ptr == sv.data() + sv.size() && cap >= 1) n = std::min(n, cap);
  }
  return n;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace glandseg
