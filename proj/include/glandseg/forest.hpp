#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "glandseg/features.hpp"

namespace glandseg {

struct ForestParams {
  int n_trees = 500;           // N
  int features_per_node = 20;  // f
  std::uint64_t seed = 0;
  int max_depth = 25;
  int min_leaf_size = 2;

  void validate(std::size_t n_features) const;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Counter-based generator: the i-th draw of stream s is a pure function of
/// (seed, s, i), so trees can be grown in any order or in parallel.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct TreeNode {
  std::int32_t feature = -1;  // < 0 for leaves
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<std::uint32_t, 2> counts{};  // training samples per class reaching the node
  double gain = 0.0;                      // information gain of the split, bits

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct ClassProbability {
  std::array<double, 2> p{};
};

/// Nodes are stored in preorder; the root is nodes[0].
class DecisionTree {
 public:
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(std::span<const double> x) const;
  ClassProbability predict_proba(std::span<const double> x) const;
  int depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

class Forest {
 public:
  ForestParams params;
  std::size_t n_features = kFeatureCount;
  std::vector<DecisionTree> trees;

  /// Unweighted mean of the per-tree leaf class distributions.
  ClassProbability predict_proba(std::span<const double> x) const;
  /// Most probable class; an exact 0.5 tie resolves to class 1.
  int predict(std::span<const double> x) const;

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Indices of a size-n bootstrap sample for tree `tree`, drawn from the
/// first n values of that tree's stream.
std::vector<std::size_t> bootstrap_sample(std::size_t n, std::uint64_t seed, std::size_t tree);

/// Grows one tree on the given multiset of row indices. `rng` supplies the
/// per-node feature subsets.
DecisionTree grow_tree(const FeatureMatrix& x, std::span<const int> y,
                       std::span<const std::size_t> sample, const ForestParams& params,
                       CounterRng& rng);

/// `threads` <= 0 uses the hardware concurrency; the result does not depend on it.
Forest train_forest(const FeatureMatrix& x, std::span<const int> y, const ForestParams& params,
                    int threads = 0);

/// Binary entropy in bits of a two-class count pair.
double entropy_bits(std::uint64_t c0, std::uint64_t c1);

// ---- persistence

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct LoadedModel {
  Forest forest;
  std::optional<double> n_th;  // precomputed thick/thin threshold, if recorded
  std::uint32_t checksum = 0;  // CRC-32 of the payload
};

std::vector<std::uint8_t> serialize_forest(const Forest& forest, std::optional<double> n_th = {});
LoadedModel deserialize_forest(std::span<const std::uint8_t> bytes);

void save_forest(const Forest& forest, const std::filesystem::path& path,
                 std::optional<double> n_th = {});
LoadedModel load_forest(const std::filesystem::path& path);

}  // namespace glandseg
