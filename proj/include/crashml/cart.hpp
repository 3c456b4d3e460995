#ifndef CRASHML_CART_HPP
#define CRASHML_CART_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "crashml/rng.hpp"
#include "crashml/types.hpp"

namespace crashml {

// Growth controls shared by forest and boosting trees.
struct GrowConfig {
  int min_leaf = 5;               // minimum rows per leaf
  std::optional<int> max_depth;   // absent = unlimited
  std::optional<int> mtry;        // candidate features per node; absent = all
  double min_gain = 0.0;          // a split must reduce SSE by strictly more

  bool operator==(const GrowConfig&) const = default;
};

// Split rule at an internal node. Numeric: value <= threshold goes left.
// Categorical: levels are partitioned by bitmask (at most 64 levels).
struct SplitRule {
  int feature = -1;  // -1 marks a leaf
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
  std::uint64_t right_levels = 0;
};

struct SplitCandidate {
  SplitRule rule;
  double gain = 0.0;  // SSE(parent) - SSE(left) - SSE(right)
  Eigen::Index n_left = 0;
  Eigen::Index n_right = 0;
};

struct TreeNode {
  SplitRule rule;
  int left = -1;
  int right = -1;
  bool unseen_goes_left = true;  // routing for levels absent from this node's rows
  double value = 0.0;            // mean response of rows reaching the node
  double sse = 0.0;              // residual sum of squares at the node
  std::int64_t n = 0;
  double gain = 0.0;             // realized split gain (internal nodes)

  bool is_leaf() const { return rule.feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root; children follow parents
  int n_features = 0;

  const TreeNode& root() const { return nodes.front(); }
};

// Best SSE-reduction split over `candidate_features` (must be ascending), or
// nullopt when no candidate clears min_gain with both children >= min_leaf.
// Numeric features try midpoints between consecutive distinct sorted values;
// categorical features try contiguous cuts of the levels ordered by
// within-level mean response. Equal gains resolve to the lowest feature
// index, then the smallest threshold / lexicographically smallest left
// level subset.
std::optional<SplitCandidate> best_split(const DataView& data, std::span<const int> rows,
                                         std::span<const int> candidate_features,
                                         const GrowConfig& config);

// Greedy recursive binary splitting over the given row subset. At every node
// mtry candidate features are drawn from rng without replacement; growth
// stops at max_depth, below 2*min_leaf rows, or when no admissible split
// remains. Deterministic given (rows, config, rng state).
RegressionTree grow_tree(const DataView& data, std::vector<int> rows, const GrowConfig& config,
                         Rng& rng);

// Routes the row to a leaf and returns its value. Throws on arity mismatch.
double predict_tree(const RegressionTree& tree, const Eigen::Ref<const Vector>& row);

// Lossless JSON round trip of the whole tree.
nlohmann::json tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const nlohmann::json& j);

nlohmann::json grow_config_to_json(const GrowConfig& config);
GrowConfig grow_config_from_json(const nlohmann::json& j);

}  // namespace crashml

#endif  // CRASHML_CART_HPP
