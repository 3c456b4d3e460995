#include "crashml/cart.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace crashml {

namespace {

constexpr int kMaxLevels = 64;

// Sorted level-index sequence of a mask, for lexicographic tie-breaks.
std::vector<int> mask_levels(std::uint64_t mask) {
  std::vector<int> out;
  for (int b = 0; b < kMaxLevels; ++b) {
    if (mask & (std::uint64_t{1} << b)) out.push_back(b);
  }
  return out;
}

bool subset_less(std::uint64_t a, std::uint64_t b) {
  const auto la = mask_levels(a);
  const auto lb = mask_levels(b);
  return std::lexicographical_compare(la.begin(), la.end(), lb.begin(), lb.end());
}

struct Best {
  bool found = false;
  SplitCandidate cand;

  // Candidates arrive in ascending (feature, threshold/cut) order, so a
  // strictly-greater gain test realizes the feature/threshold tie rules.
  // Equal-gain categorical cuts within one feature still need the explicit
  // subset comparison.
  void offer(const SplitCandidate& c) {
    if (!found || c.gain > cand.gain) {
      found = true;
      cand = c;
      return;
    }
    if (c.gain == cand.gain && c.rule.feature == cand.rule.feature && c.rule.categorical &&
        cand.rule.categorical && subset_less(c.rule.left_levels, cand.rule.left_levels)) {
      cand = c;
    }
  }
};

void scan_numeric(const DataView& data, std::span<const int> rows, int feature,
                  const GrowConfig& config, double total_sum, Best& best) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<std::pair<double, double>> vals;
  vals.reserve(rows.size());
  for (int r : rows) vals.emplace_back(data.features(r, feature), data.response(r));
  std::sort(vals.begin(), vals.end());

  const double parent_term = total_sum * total_sum / static_cast<double>(n);
  double left_sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    left_sum += vals[static_cast<std::size_t>(i)].second;
    const double a = vals[static_cast<std::size_t>(i)].first;
    const double b = vals[static_cast<std::size_t>(i + 1)].first;
    if (a == b) continue;
    const Eigen::Index n_left = i + 1;
    const Eigen::Index n_right = n - n_left;
    if (n_left < config.min_leaf || n_right < config.min_leaf) continue;
    const double right_sum = total_sum - left_sum;
    const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                        right_sum * right_sum / static_cast<double>(n_right) - parent_term;
    if (gain <= config.min_gain) continue;
    double threshold = a + (b - a) / 2.0;
    if (!(threshold < b)) threshold = a;  // keep a <= threshold < b so routing is exact
    SplitCandidate c;
    c.rule.feature = feature;
    c.rule.categorical = false;
    c.rule.threshold = threshold;
    c.gain = gain;
    c.n_left = n_left;
    c.n_right = n_right;
    best.offer(c);
  }
}

void scan_categorical(const DataView& data, std::span<const int> rows, int feature,
                      const GrowConfig& config, double total_sum, Best& best) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const int n_levels = data.meta[static_cast<std::size_t>(feature)].level_count();
  if (n_levels > kMaxLevels) throw std::invalid_argument("categorical feature exceeds 64 levels");

  std::array<double, kMaxLevels> sums{};
  std::array<Eigen::Index, kMaxLevels> counts{};
  for (int r : rows) {
    const auto level = static_cast<int>(std::llround(data.features(r, feature)));
    sums[static_cast<std::size_t>(level)] += data.response(r);
    counts[static_cast<std::size_t>(level)] += 1;
  }

  // Present levels ordered by within-level mean, index as tie-break; the
  // optimal squared-error bipartition is contiguous in this order.
  std::vector<int> present;
  for (int l = 0; l < n_levels; ++l) {
    if (counts[static_cast<std::size_t>(l)] > 0) present.push_back(l);
  }
  if (present.size() < 2) return;
  std::sort(present.begin(), present.end(), [&](int a, int b) {
    const double ma = sums[static_cast<std::size_t>(a)] / static_cast<double>(counts[static_cast<std::size_t>(a)]);
    const double mb = sums[static_cast<std::size_t>(b)] / static_cast<double>(counts[static_cast<std::size_t>(b)]);
    return ma < mb || (ma == mb && a < b);
  });
  std::uint64_t present_mask = 0;
  for (int l : present) present_mask |= std::uint64_t{1} << l;

  const double parent_term = total_sum * total_sum / static_cast<double>(n);
  double left_sum = 0.0;
  Eigen::Index n_left = 0;
  std::uint64_t left_mask = 0;
  for (std::size_t c = 0; c + 1 < present.size(); ++c) {
    const int level = present[c];
    left_sum += sums[static_cast<std::size_t>(level)];
    n_left += counts[static_cast<std::size_t>(level)];
    left_mask |= std::uint64_t{1} << level;
    const Eigen::Index n_right = n - n_left;
    if (n_left < config.min_leaf || n_right < config.min_leaf) continue;
    const double right_sum = total_sum - left_sum;
    const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                        right_sum * right_sum / static_cast<double>(n_right) - parent_term;
    if (gain <= config.min_gain) continue;
    SplitCandidate cand;
    cand.rule.feature = feature;
    cand.rule.categorical = true;
    cand.rule.left_levels = left_mask;
    cand.rule.right_levels = present_mask & ~left_mask;
    cand.gain = gain;
    cand.n_left = n_left;
    cand.n_right = n_right;
    best.offer(cand);
  }
}

bool route_left(const SplitRule& rule, bool unseen_goes_left, double value) {
  if (!rule.categorical) return value <= rule.threshold;
  const auto level = static_cast<std::int64_t>(std::llround(value));
  if (level < 0 || level >= kMaxLevels) return unseen_goes_left;
  const std::uint64_t bit = std::uint64_t{1} << level;
  if (rule.left_levels & bit) return true;
  if (rule.right_levels & bit) return false;
  return unseen_goes_left;
}

struct Grower {
  const DataView& data;
  const GrowConfig& config;
  Rng& rng;
  std::vector<int>& rows;
  std::vector<TreeNode>& nodes;
  std::vector<int> feature_pool;

  int grow(std::size_t begin, std::size_t end, int depth) {
    const auto n = static_cast<Eigen::Index>(end - begin);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += data.response(rows[i]);
    const double mean = sum / static_cast<double>(n);
    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = data.response(rows[i]) - mean;
      sse += d * d;
    }

    const int index = static_cast<int>(nodes.size());
    TreeNode node;
    node.value = mean;
    node.sse = sse;
    node.n = n;
    nodes.push_back(node);

    if (n < 2 * config.min_leaf) return index;
    if (config.max_depth && depth >= *config.max_depth) return index;
    if (sse <= 0.0) return index;

    const auto candidates = sample_features();
    const auto split =
        best_split(data, std::span<const int>(rows.data() + begin, static_cast<std::size_t>(n)),
                   candidates, config);
    if (!split) return index;

    const bool unseen_left = split->n_left >= split->n_right;
    const auto mid_it =
        std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                              rows.begin() + static_cast<std::ptrdiff_t>(end), [&](int r) {
                                return route_left(split->rule, unseen_left,
                                                  data.features(r, split->rule.feature));
                              });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());

    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    TreeNode& self = nodes[static_cast<std::size_t>(index)];
    self.rule = split->rule;
    self.gain = split->gain;
    self.left = left;
    self.right = right;
    self.unseen_goes_left = unseen_left;
    return index;
  }

  std::span<const int> sample_features() {
    const auto p = static_cast<int>(data.n_features());
    const int m = config.mtry ? std::min(*config.mtry, p) : p;
    if (feature_pool.empty()) {
      feature_pool.resize(static_cast<std::size_t>(p));
      for (int j = 0; j < p; ++j) feature_pool[static_cast<std::size_t>(j)] = j;
    }
    if (m >= p) {
      std::sort(feature_pool.begin(), feature_pool.end());
      return {feature_pool.data(), static_cast<std::size_t>(p)};
    }
    // partial Fisher-Yates, then ascending order for the tie rule
    for (int i = 0; i < m; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - i)));
      std::swap(feature_pool[static_cast<std::size_t>(i)], feature_pool[static_cast<std::size_t>(j)]);
    }
    std::sort(feature_pool.begin(), feature_pool.begin() + m);
    return {feature_pool.data(), static_cast<std::size_t>(m)};
  }
};

}  // namespace

std::optional<SplitCandidate> best_split(const DataView& data, std::span<const int> rows,
                                         std::span<const int> candidate_features,
                                         const GrowConfig& config) {
  if (rows.empty()) throw std::invalid_argument("best_split: empty row set");
  if (candidate_features.empty()) throw std::invalid_argument("best_split: no candidate features");

  double total_sum = 0.0;
  for (int r : rows) total_sum += data.response(r);

  Best best;
  for (int feature : candidate_features) {
    if (data.meta[static_cast<std::size_t>(feature)].kind == FeatureKind::Categorical) {
      scan_categorical(data, rows, feature, config, total_sum, best);
    } else {
      scan_numeric(data, rows, feature, config, total_sum, best);
    }
  }
  if (!best.found) return std::nullopt;
  return best.cand;
}

RegressionTree grow_tree(const DataView& data, std::vector<int> rows, const GrowConfig& config,
                         Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("grow_tree: empty row subset");
  if (config.min_leaf < 1) throw std::invalid_argument("grow_tree: min_leaf must be >= 1");
  RegressionTree tree;
  tree.n_features = static_cast<int>(data.n_features());
  tree.nodes.reserve(2 * rows.size());
  Grower grower{data, config, rng, rows, tree.nodes, {}};
  grower.grow(0, rows.size(), 0);
  return tree;
}

double predict_tree(const RegressionTree& tree, const Eigen::Ref<const Vector>& row) {
  if (row.size() != tree.n_features) {
    throw std::invalid_argument("predict_tree: row arity does not match training arity");
  }
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    const bool left = route_left(node->rule, node->unseen_goes_left, row(node->rule.feature));
    node = &tree.nodes[static_cast<std::size_t>(left ? node->left : node->right)];
  }
  return node->value;
}

nlohmann::json tree_to_json(const RegressionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : tree.nodes) {
    nlohmann::json j;
    if (node.is_leaf()) {
      j["kind"] = "leaf";
    } else {
      j["kind"] = "split";
      j["feature"] = node.rule.feature;
      if (node.rule.categorical) {
        j["left_levels"] = node.rule.left_levels;
        j["right_levels"] = node.rule.right_levels;
      } else {
        j["threshold"] = node.rule.threshold;
      }
      j["left"] = node.left;
      j["right"] = node.right;
      j["unseen_left"] = node.unseen_goes_left;
      j["gain"] = node.gain;
    }
    j["value"] = node.value;
    j["n"] = node.n;
    j["sse"] = node.sse;
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"n_features", tree.n_features}, {"nodes", std::move(nodes)}};
}

RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree tree;
  tree.n_features = j.at("n_features").get<int>();
  for (const auto& nj : j.at("nodes")) {
    TreeNode node;
    node.value = nj.at("value").get<double>();
    node.n = nj.at("n").get<std::int64_t>();
    node.sse = nj.at("sse").get<double>();
    if (nj.at("kind").get<std::string>() == "split") {
      node.rule.feature = nj.at("feature").get<int>();
      if (nj.contains("threshold")) {
        node.rule.threshold = nj.at("threshold").get<double>();
      } else {
        node.rule.categorical = true;
        node.rule.left_levels = nj.at("left_levels").get<std::uint64_t>();
        node.rule.right_levels = nj.at("right_levels").get<std::uint64_t>();
      }
      node.left = nj.at("left").get<int>();
      node.right = nj.at("right").get<int>();
      node.unseen_goes_left = nj.at("unseen_left").get<bool>();
      node.gain = nj.at("gain").get<double>();
    }
    tree.nodes.push_back(node);
  }
  return tree;
}

nlohmann::json grow_config_to_json(const GrowConfig& config) {
  nlohmann::json j{{"min_leaf", config.min_leaf}, {"min_gain", config.min_gain}};
  j["max_depth"] = config.max_depth ? nlohmann::json(*config.max_depth) : nlohmann::json();
  j["mtry"] = config.mtry ? nlohmann::json(*config.mtry) : nlohmann::json();
  return j;
}

GrowConfig grow_config_from_json(const nlohmann::json& j) {
  GrowConfig config;
  config.min_leaf = j.at("min_leaf").get<int>();
  config.min_gain = j.at("min_gain").get<double>();
  if (!j.at("max_depth").is_null()) config.max_depth = j.at("max_depth").get<int>();
  if (!j.at("mtry").is_null()) config.mtry = j.at("mtry").get<int>();
  return config;
}

}  // namespace crashml
