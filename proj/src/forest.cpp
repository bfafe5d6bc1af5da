#include "glandseg/forest.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "glandseg/image_io.hpp"
#include "glandseg/parallel.hpp"

namespace glandseg {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix(seed ^ splitmix(stream + 0x632be59bd9b4e019ULL))) {}

std::uint64_t CounterRng::next() { return splitmix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

std::uint64_t CounterRng::below(std::uint64_t bound) {
  // Lemire's multiply-and-reject; exact and platform independent.
  __uint128_t m = static_cast<__uint128_t>(next()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t floor = (0 - bound) % bound;
    while (low < floor) {
      m = static_cast<__uint128_t>(next()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

void ForestParams::validate(std::size_t n_features) const {
  if (n_trees < 1) throw ParameterError("forest: N (tree count) must be >= 1");
  if (features_per_node < 1 || static_cast<std::size_t>(features_per_node) > n_features)
    throw ParameterError("forest: f must be in [1, " + std::to_string(n_features) + "]");
  if (max_depth < 1) throw ParameterError("forest: max_depth must be >= 1");
  if (min_leaf_size < 1) throw ParameterError("forest: min_leaf_size must be >= 1");
}

double entropy_bits(std::uint64_t c0, std::uint64_t c1) {
  const double n = static_cast<double>(c0 + c1);
  if (c0 == 0 || c1 == 0) return 0.0;
  const double p0 = static_cast<double>(c0) / n;
  const double p1 = static_cast<double>(c1) / n;
  return -(p0 * std::log2(p0) + p1 * std::log2(p1));
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i];
}

ClassProbability DecisionTree::predict_proba(std::span<const double> x) const {
  const TreeNode& leaf = leaf_for(x);
  const double total = static_cast<double>(leaf.counts[0]) + leaf.counts[1];
  if (total == 0) return {{0.5, 0.5}};
  const double p1 = leaf.counts[1] / total;
  return {{1.0 - p1, p1}};
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

ClassProbability Forest::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features) throw ContractError("predict: feature vector has the wrong length");
  double p1 = 0.0;
  for (const auto& t : trees) p1 += t.predict_proba(x).p[1];
  p1 /= static_cast<double>(trees.size());
  return {{1.0 - p1, p1}};
}

int Forest::predict(std::span<const double> x) const {
  const ClassProbability p = predict_proba(x);
  return p.p[1] >= p.p[0] ? 1 : 0;
}

std::vector<std::size_t> bootstrap_sample(std::size_t n, std::uint64_t seed, std::size_t tree) {
  CounterRng rng(seed, tree);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  return idx;
}

namespace {

class TreeGrower {
 public:
  TreeGrower(const FeatureMatrix& x, std::span<const int> y, const ForestParams& params,
             CounterRng& rng)
      : x_(x), y_(y), params_(params), rng_(rng), pool_(x.cols()) {
    std::iota(pool_.begin(), pool_.end(), std::size_t{0});
  }

  DecisionTree grow(std::vector<std::size_t> sample) {
    build(sample, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  std::vector<std::size_t> draw_features() {
    // Partial Fisher-Yates over a persistent pool; sorted so ties resolve
    // to the lowest feature index.
    const std::size_t f = static_cast<std::size_t>(params_.features_per_node);
    for (std::size_t i = 0; i < f; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_.below(pool_.size() - i));
      std::swap(pool_[i], pool_[j]);
    }
    std::vector<std::size_t> chosen(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(f));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  Split best_split(const std::vector<std::size_t>& idx, const std::array<std::uint64_t, 2>& counts) {
    const double parent = entropy_bits(counts[0], counts[1]);
    const double n = static_cast<double>(idx.size());
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf_size);
    Split best;
    std::vector<std::pair<double, int>> column(idx.size());
    for (const std::size_t feature : draw_features()) {
      for (std::size_t i = 0; i < idx.size(); ++i) column[i] = {x_(idx[i], feature), y_[idx[i]]};
      std::sort(column.begin(), column.end());
      std::array<std::uint64_t, 2> left{};
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        const double a = column[i].first;
        const double b = column[i + 1].first;
        if (!(a < b)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = column.size() - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double hl = entropy_bits(left[0], left[1]);
        const double hr = entropy_bits(counts[0] - left[0], counts[1] - left[1]);
        const double gain = parent - (static_cast<double>(nl) / n) * hl - (static_cast<double>(nr) / n) * hr;
        if (gain > best.gain) {
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best = {static_cast<int>(feature), mid, gain};
        }
      }
    }
    return best;
  }

  std::int32_t build(const std::vector<std::size_t>& idx, int depth) {
    std::array<std::uint64_t, 2> counts{};
    for (const std::size_t i : idx) ++counts[static_cast<std::size_t>(y_[i])];
    const auto self = static_cast<std::int32_t>(tree_.nodes.size());
    TreeNode node;
    node.counts = {static_cast<std::uint32_t>(counts[0]), static_cast<std::uint32_t>(counts[1])};
    tree_.nodes.push_back(node);

    const bool pure = counts[0] == 0 || counts[1] == 0;
    if (pure || depth >= params_.max_depth ||
        idx.size() < 2 * static_cast<std::size_t>(params_.min_leaf_size))
      return self;

    const Split split = best_split(idx, counts);
    if (split.feature < 0 || split.gain <= 1e-12) return self;

    std::vector<std::size_t> left, right;
    for (const std::size_t i : idx)
      (x_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);

    tree_.nodes[self].feature = split.feature;
    tree_.nodes[self].threshold = split.threshold;
    tree_.nodes[self].gain = split.gain;
    const std::int32_t l = build(left, depth + 1);
    const std::int32_t r = build(right, depth + 1);
    tree_.nodes[self].left = l;
    tree_.nodes[self].right = r;
    return self;
  }

  const FeatureMatrix& x_;
  std::span<const int> y_;
  const ForestParams& params_;
  CounterRng& rng_;
  std::vector<std::size_t> pool_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree grow_tree(const FeatureMatrix& x, std::span<const int> y,
                       std::span<const std::size_t> sample, const ForestParams& params,
                       CounterRng& rng) {
  params.validate(x.cols());
  TreeGrower grower(x, y, params, rng);
  return grower.grow(std::vector<std::size_t>(sample.begin(), sample.end()));
}

Forest train_forest(const FeatureMatrix& x, std::span<const int> y, const ForestParams& params,
                    int threads) {
  params.validate(x.cols());
  if (x.rows() == 0) throw TrainingError("training set is empty");
  if (y.size() != x.rows()) throw ContractError("label count does not match sample count");
  std::array<std::size_t, 2> classes{};
  for (const int label : y) {
    if (label != 0 && label != 1) throw TrainingError("labels must be 0 or 1");
    ++classes[static_cast<std::size_t>(label)];
  }
  if (classes[0] == 0 || classes[1] == 0)
    throw TrainingError("training set contains a single class; both border and stromal samples are required");

  Forest forest;
  forest.params = params;
  forest.n_features = x.cols();
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));

  const std::size_t n = x.rows();
  auto grow_one = [&](std::size_t t) {
    // Draws 0..n-1 of the tree's stream are the bootstrap; the rest feed
    // the per-node feature subsets.
    CounterRng rng(params.seed, t);
    std::vector<std::size_t> sample(n);
    for (auto& i : sample) i = static_cast<std::size_t>(rng.below(n));
    TreeGrower grower(x, y, params, rng);
    forest.trees[t] = grower.grow(std::move(sample));
  };

  parallel_for(forest.trees.size(), threads, grow_one);
  return forest;
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'G', 'L', 'S', 'F', 'O', 'R', 'S', 'T'};
constexpr std::size_t kHeaderSize = kMagic.size() + 4 + 8;

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ModelTruncatedError("model file is truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

void write_subtree(Writer& w, const DecisionTree& t, std::int32_t i) {
  const TreeNode& n = t.nodes[static_cast<std::size_t>(i)];
  w.u8(n.is_leaf() ? 0 : 1);
  w.u32(n.counts[0]);
  w.u32(n.counts[1]);
  if (n.is_leaf()) return;
  w.u32(static_cast<std::uint32_t>(n.feature));
  w.f64(n.threshold);
  w.f64(n.gain);
  write_subtree(w, t, n.left);
  write_subtree(w, t, n.right);
}

std::int32_t read_subtree(Reader& r, DecisionTree& t, std::size_t n_features, std::size_t remaining_nodes) {
  if (t.nodes.size() >= remaining_nodes) throw ModelFormatError("tree has more nodes than declared");
  const auto self = static_cast<std::int32_t>(t.nodes.size());
  TreeNode n;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw ModelFormatError("unknown tree node kind");
  n.counts = {r.u32(), r.u32()};
  t.nodes.push_back(n);
  if (kind == 0) return self;
  const std::uint32_t feature = r.u32();
  if (feature >= n_features) throw ModelFormatError("split feature index out of range");
  t.nodes[static_cast<std::size_t>(self)].feature = static_cast<std::int32_t>(feature);
  t.nodes[static_cast<std::size_t>(self)].threshold = r.f64();
  t.nodes[static_cast<std::size_t>(self)].gain = r.f64();
  const std::int32_t l = read_subtree(r, t, n_features, remaining_nodes);
  const std::int32_t rr = read_subtree(r, t, n_features, remaining_nodes);
  t.nodes[static_cast<std::size_t>(self)].left = l;
  t.nodes[static_cast<std::size_t>(self)].right = rr;
  return self;
}

}  // namespace

std::vector<std::uint8_t> serialize_forest(const Forest& forest, std::optional<double> n_th) {
  Writer p;
  p.u32(static_cast<std::uint32_t>(forest.params.n_trees));
  p.u32(static_cast<std::uint32_t>(forest.params.features_per_node));
  p.u64(forest.params.seed);
  p.u32(static_cast<std::uint32_t>(forest.params.max_depth));
  p.u32(static_cast<std::uint32_t>(forest.params.min_leaf_size));
  p.u32(static_cast<std::uint32_t>(forest.n_features));
  p.u8(n_th ? 1 : 0);
  p.f64(n_th.value_or(0.0));
  p.u32(static_cast<std::uint32_t>(forest.trees.size()));
  for (const auto& t : forest.trees) {
    p.u32(static_cast<std::uint32_t>(t.nodes.size()));
    write_subtree(p, t, 0);
  }

  Writer file;
  file.out.assign(kMagic.begin(), kMagic.end());
  file.u32(kModelFormatVersion);
  file.u64(p.out.size());
  file.out.insert(file.out.end(), p.out.begin(), p.out.end());
  file.u32(crc(p.out));
  return file.out;
}

LoadedModel deserialize_forest(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw ModelTruncatedError("model file is truncated");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    throw ModelFormatError("not a glandseg model file (bad magic)");
  if (bytes.size() < kHeaderSize) throw ModelTruncatedError("model file header is truncated");
  Reader header(bytes.subspan(kMagic.size(), 12));
  const std::uint32_t version = header.u32();
  if (version != kModelFormatVersion)
    throw ModelVersionError("model format version " + std::to_string(version) +
                            " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  const std::uint64_t payload_size = header.u64();
  if (bytes.size() < kHeaderSize + payload_size + 4)
    throw ModelTruncatedError("model file is truncated");
  if (bytes.size() > kHeaderSize + payload_size + 4)
    throw ModelFormatError("model file has trailing bytes");
  const auto payload = bytes.subspan(kHeaderSize, payload_size);
  Reader trailer(bytes.subspan(kHeaderSize + payload_size, 4));
  const std::uint32_t stored = trailer.u32();
  const std::uint32_t actual = crc(payload);
  if (stored != actual) throw ModelChecksumError("model file checksum mismatch");

  LoadedModel m;
  m.checksum = actual;
  Reader r(payload);
  Forest& f = m.forest;
  f.params.n_trees = static_cast<int>(r.u32());
  f.params.features_per_node = static_cast<int>(r.u32());
  f.params.seed = r.u64();
  f.params.max_depth = static_cast<int>(r.u32());
  f.params.min_leaf_size = static_cast<int>(r.u32());
  f.n_features = r.u32();
  const bool has_nth = r.u8() != 0;
  const double nth = r.f64();
  if (has_nth) m.n_th = nth;
  const std::uint32_t trees = r.u32();
  if (trees != static_cast<std::uint32_t>(f.params.n_trees))
    throw ModelFormatError("tree count does not match the recorded parameters");
  f.trees.resize(trees);
  for (auto& t : f.trees) {
    const std::uint32_t nodes = r.u32();
    if (nodes == 0) throw ModelFormatError("empty tree record");
    t.nodes.reserve(nodes);
    read_subtree(r, t, f.n_features, nodes);
    if (t.nodes.size() != nodes) throw ModelFormatError("tree node count mismatch");
  }
  if (!r.done()) throw ModelFormatError("unexpected bytes after the last tree");
  return m;
}

void save_forest(const Forest& forest, const std::filesystem::path& path, std::optional<double> n_th) {
  io::write_atomic(path, serialize_forest(forest, n_th));
}

LoadedModel load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_forest(bytes);
}

}  // namespace glandseg
