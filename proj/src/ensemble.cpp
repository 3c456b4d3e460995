#include "crashml/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crashml/metrics.hpp"
#include "crashml/parallel.hpp"
#include "crashml/rng.hpp"

namespace crashml {

namespace {

int resolve_mtry(const GrowConfig& config, Eigen::Index p) {
  if (config.mtry) return std::clamp(*config.mtry, 1, static_cast<int>(p));
  return std::max(1, static_cast<int>((p + 2) / 3));  // ceil(p / 3)
}

// Bootstrap draw; shared by training and model loading.
void draw_bag(Eigen::Index n, std::vector<int>& bag, std::vector<int>& oob, Rng& rng) {
  bag.resize(static_cast<std::size_t>(n));
  std::vector<char> in_bag(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    bag[static_cast<std::size_t>(i)] = r;
    in_bag[static_cast<std::size_t>(r)] = 1;
  }
  oob.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!in_bag[static_cast<std::size_t>(i)]) oob.push_back(static_cast<int>(i));
  }
}

}  // namespace

GrowConfig boost_stage_defaults() {
  GrowConfig config;
  config.min_leaf = 5;
  config.max_depth = 5;
  return config;
}

ForestModel train_forest(const Dataset& train, int k_trees, const GrowConfig& config,
                         std::uint64_t seed, int threads) {
  const auto n = train.n_rows();
  if (n < 1) throw std::invalid_argument("train_forest: empty training set");
  if (k_trees < 1) throw std::invalid_argument("train_forest: k_trees must be >= 1");

  ForestModel model;
  model.grow = config;
  model.grow.mtry = resolve_mtry(config, train.n_features());
  model.k_trees = k_trees;
  model.seed = seed;
  model.meta = train.meta;
  model.trees.resize(static_cast<std::size_t>(k_trees));
  model.bags.resize(static_cast<std::size_t>(k_trees));
  model.oob.resize(static_cast<std::size_t>(k_trees));

  const DataView view(train);
  parallel_for(static_cast<std::size_t>(k_trees), threads, [&](std::size_t k) {
    Rng rng = Rng::substream(seed, k);
    draw_bag(n, model.bags[k], model.oob[k], rng);
    model.trees[k] = grow_tree(view, model.bags[k], model.grow, rng);
  });
  return model;
}

BoostModel train_lsboost(const Dataset& train, int k_stages, double learning_rate,
                         const GrowConfig& stage_config, std::uint64_t seed) {
  const auto n = train.n_rows();
  if (n < 1) throw std::invalid_argument("train_lsboost: empty training set");
  if (k_stages < 1) throw std::invalid_argument("train_lsboost: k_stages must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw std::invalid_argument("train_lsboost: learning_rate must be in (0, 1]");
  }

  BoostModel model;
  model.initial_value = train.response.mean();
  model.learning_rate = learning_rate;
  model.grow = stage_config;
  model.k_stages = k_stages;
  model.seed = seed;
  model.meta = train.meta;
  model.stages.reserve(static_cast<std::size_t>(k_stages));

  std::vector<int> all_rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) all_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);

  Vector residual = train.response.array() - model.initial_value;
  const DataView view(train.features, residual, train.meta);
  for (int m = 0; m < k_stages; ++m) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(m));
    RegressionTree stage = grow_tree(view, all_rows, stage_config, rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      residual(i) -= learning_rate * predict_tree(stage, train.features.row(i));
    }
    model.stages.push_back(std::move(stage));
  }
  return model;
}

double predict_forest(const ForestModel& model, const Eigen::Ref<const Vector>& row) {
  return predict_forest_truncated(model, row, static_cast<int>(model.trees.size()));
}

double predict_forest_truncated(const ForestModel& model, const Eigen::Ref<const Vector>& row,
                                int k) {
  if (k < 1 || k > static_cast<int>(model.trees.size())) {
    throw std::invalid_argument("predict_forest: tree count out of range");
  }
  double sum = 0.0;
  for (int t = 0; t < k; ++t) sum += predict_tree(model.trees[static_cast<std::size_t>(t)], row);
  return sum / static_cast<double>(k);
}

double predict_boost(const BoostModel& model, const Eigen::Ref<const Vector>& row) {
  return predict_boost_truncated(model, row, static_cast<int>(model.stages.size()));
}

double predict_boost_truncated(const BoostModel& model, const Eigen::Ref<const Vector>& row,
                               int k) {
  if (k < 0 || k > static_cast<int>(model.stages.size())) {
    throw std::invalid_argument("predict_boost: stage count out of range");
  }
  double sum = model.initial_value;
  for (int t = 0; t < k; ++t) {
    sum += model.learning_rate * predict_tree(model.stages[static_cast<std::size_t>(t)], row);
  }
  return sum;
}

double predict_model(const Model& model, const Eigen::Ref<const Vector>& row) {
  if (const auto* forest = std::get_if<ForestModel>(&model)) return predict_forest(*forest, row);
  return predict_boost(std::get<BoostModel>(model), row);
}

Vector predict_matrix(const Model& model, const Matrix& rows, int threads) {
  Vector out(rows.rows());
  parallel_for(static_cast<std::size_t>(rows.rows()), threads, [&](std::size_t i) {
    out(static_cast<Eigen::Index>(i)) =
        predict_model(model, rows.row(static_cast<Eigen::Index>(i)));
  });
  return out;
}

ImportanceReport variable_importance(const ForestModel& model, const Dataset& train,
                                     std::uint64_t seed, int threads) {
  const auto k = model.trees.size();
  const auto p = static_cast<std::size_t>(train.n_features());
  if (k == 0) throw std::invalid_argument("variable_importance: empty model");
  for (std::size_t t = 0; t < k; ++t) {
    if (model.oob[t].empty()) {
      throw std::invalid_argument(
          "variable_importance: tree " + std::to_string(t) +
          " has no out-of-bag rows; increase the number of rows or trees");
    }
  }

  // Per-tree oob MSE before and after permuting each feature column.
  Matrix delta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  Vector base(static_cast<Eigen::Index>(k));
  Matrix purity_by_tree = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));

  parallel_for(k, threads, [&](std::size_t t) {
    const auto& tree = model.trees[t];
    const auto& oob = model.oob[t];
    const auto m = oob.size();

    double base_sse = 0.0;
    for (int r : oob) {
      const double d = predict_tree(tree, train.features.row(r)) - train.response(r);
      base_sse += d * d;
    }
    const double base_mse = base_sse / static_cast<double>(m);
    base(static_cast<Eigen::Index>(t)) = base_mse;

    Vector row_buf(train.n_features());
    std::vector<double> column(m);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        column[i] = train.features(oob[i], static_cast<Eigen::Index>(j));
      }
      Rng rng = Rng::substream(seed, t, j + 1);  // lane 0 is the grow stream
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto swap_with = i + static_cast<std::size_t>(rng.below(m - i));
        std::swap(column[i], column[swap_with]);
      }
      double sse = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        row_buf = train.features.row(oob[i]);
        row_buf(static_cast<Eigen::Index>(j)) = column[i];
        const double d = predict_tree(tree, row_buf) - train.response(oob[i]);
        sse += d * d;
      }
      delta(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
          sse / static_cast<double>(m) - base_mse;
    }

    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) {
        purity_by_tree(static_cast<Eigen::Index>(t), node.rule.feature) += node.gain;
      }
    }
  });

  const double baseline = base.mean();
  ImportanceReport report;
  for (const auto& fm : train.meta) report.feature_names.push_back(fm.name);
  report.permutation.resize(static_cast<Eigen::Index>(p));
  report.purity = purity_by_tree.colwise().mean().transpose();

  for (std::size_t j = 0; j < p; ++j) {
    // percent-of-baseline increase per tree, then scaled by its standard error
    Vector pct = delta.col(static_cast<Eigen::Index>(j));
    if (baseline > 0.0) pct *= 100.0 / baseline;
    const double mean = pct.mean();
    double value = mean;
    if (k >= 2) {
      const double var = (pct.array() - mean).square().sum() / static_cast<double>(k - 1);
      const double se = std::sqrt(var / static_cast<double>(k));
      if (se > 0.0) value = mean / se;
    }
    report.permutation(static_cast<Eigen::Index>(j)) = value;
  }

  auto order_of = [&](const Vector& v) {
    std::vector<int> order(p);
    for (std::size_t j = 0; j < p; ++j) order[j] = static_cast<int>(j);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return v(a) > v(b); });
    return order;
  };
  report.permutation_order = order_of(report.permutation);
  report.purity_order = order_of(report.purity);
  return report;
}

namespace {

void check_counts(const std::vector<int>& tree_counts, int available) {
  if (tree_counts.empty()) throw std::invalid_argument("sensitivity_curve: no tree counts");
  for (std::size_t i = 0; i + 1 < tree_counts.size(); ++i) {
    if (tree_counts[i] >= tree_counts[i + 1]) {
      throw std::invalid_argument("sensitivity_curve: tree counts must be strictly increasing");
    }
  }
  if (tree_counts.front() < 1) {
    throw std::invalid_argument("sensitivity_curve: counts must be >= 1");
  }
  if (tree_counts.back() > available) {
    throw std::invalid_argument("sensitivity_curve: counts exceed ensemble size");
  }
}

}  // namespace

SensitivityCurve sensitivity_curve(const ForestModel& model, const Dataset& test,
                                   const std::vector<int>& tree_counts) {
  check_counts(tree_counts, static_cast<int>(model.trees.size()));
  const auto n_test = test.n_rows();
  Vector accum = Vector::Zero(n_test);
  SensitivityCurve curve;
  curve.family = Family::Forest;
  std::size_t next = 0;
  for (int t = 0; t < tree_counts.back(); ++t) {
    for (Eigen::Index i = 0; i < n_test; ++i) {
      accum(i) += predict_tree(model.trees[static_cast<std::size_t>(t)], test.features.row(i));
    }
    if (next < tree_counts.size() && tree_counts[next] == t + 1) {
      const Vector pred = accum / static_cast<double>(t + 1);
      curve.points.push_back({t + 1, mae(test.response, pred), mse(test.response, pred)});
      ++next;
    }
  }
  return curve;
}

SensitivityCurve sensitivity_curve(const BoostModel& model, const Dataset& test,
                                   const std::vector<int>& tree_counts) {
  check_counts(tree_counts, static_cast<int>(model.stages.size()));
  const auto n_test = test.n_rows();
  Vector accum = Vector::Constant(n_test, model.initial_value);
  SensitivityCurve curve;
  curve.family = Family::Boost;
  std::size_t next = 0;
  for (int t = 0; t < tree_counts.back(); ++t) {
    for (Eigen::Index i = 0; i < n_test; ++i) {
      accum(i) += model.learning_rate *
                  predict_tree(model.stages[static_cast<std::size_t>(t)], test.features.row(i));
    }
    if (next < tree_counts.size() && tree_counts[next] == t + 1) {
      curve.points.push_back({t + 1, mae(test.response, accum), mse(test.response, accum)});
      ++next;
    }
  }
  return curve;
}

SensitivityCurve sensitivity_curve(const Dataset& train, const Dataset& test, Family family,
                                   const std::vector<int>& tree_counts, std::uint64_t seed,
                                   const GrowConfig& config, double learning_rate, int threads) {
  if (tree_counts.empty()) throw std::invalid_argument("sensitivity_curve: no tree counts");
  const int k_max = tree_counts.back();
  if (family == Family::Forest) {
    return sensitivity_curve(train_forest(train, k_max, config, seed, threads), test,
                             tree_counts);
  }
  return sensitivity_curve(train_lsboost(train, k_max, learning_rate, config, seed), test,
                           tree_counts);
}

namespace {

nlohmann::json meta_to_json(const std::vector<FeatureMeta>& meta) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& fm : meta) {
    arr.push_back({{"name", fm.name},
                   {"kind", fm.kind == FeatureKind::Categorical ? "categorical" : "numeric"},
                   {"levels", fm.levels}});
  }
  return arr;
}

std::vector<FeatureMeta> meta_from_json(const nlohmann::json& arr) {
  std::vector<FeatureMeta> meta;
  for (const auto& j : arr) {
    FeatureMeta fm;
    fm.name = j.at("name").get<std::string>();
    fm.kind = j.at("kind").get<std::string>() == "categorical" ? FeatureKind::Categorical
                                                               : FeatureKind::Numeric;
    fm.levels = j.at("levels").get<std::vector<std::string>>();
    meta.push_back(std::move(fm));
  }
  return meta;
}

nlohmann::json trees_to_json(const std::vector<RegressionTree>& trees) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(tree_to_json(t));
  return arr;
}

std::vector<RegressionTree> trees_from_json(const nlohmann::json& arr) {
  std::vector<RegressionTree> trees;
  for (const auto& j : arr) trees.push_back(tree_from_json(j));
  return trees;
}

}  // namespace

nlohmann::json forest_to_json(const ForestModel& model) {
  return nlohmann::json{{"schema_version", 1},
                        {"family", "forest"},
                        {"k_trees", model.k_trees},
                        {"seed", model.seed},
                        {"config", grow_config_to_json(model.grow)},
                        {"feature_meta", meta_to_json(model.meta)},
                        {"trees", trees_to_json(model.trees)}};
}

ForestModel forest_from_json(const nlohmann::json& j) {
  if (j.at("family").get<std::string>() != "forest") {
    throw std::invalid_argument("forest_from_json: not a forest document");
  }
  ForestModel model;
  model.k_trees = j.at("k_trees").get<int>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.grow = grow_config_from_json(j.at("config"));
  model.meta = meta_from_json(j.at("feature_meta"));
  model.trees = trees_from_json(j.at("trees"));
  // bootstrap and oob sets are a pure function of (seed, tree index, n)
  model.bags.resize(model.trees.size());
  model.oob.resize(model.trees.size());
  for (std::size_t k = 0; k < model.trees.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(model.trees[k].root().n);
    Rng rng = Rng::substream(model.seed, k);
    draw_bag(n, model.bags[k], model.oob[k], rng);
  }
  return model;
}

nlohmann::json boost_to_json(const BoostModel& model) {
  return nlohmann::json{{"schema_version", 1},
                        {"family", "boost"},
                        {"k_stages", model.k_stages},
                        {"seed", model.seed},
                        {"learning_rate", model.learning_rate},
                        {"initial_value", model.initial_value},
                        {"config", grow_config_to_json(model.grow)},
                        {"feature_meta", meta_to_json(model.meta)},
                        {"trees", trees_to_json(model.stages)}};
}

BoostModel boost_from_json(const nlohmann::json& j) {
  if (j.at("family").get<std::string>() != "boost") {
    throw std::invalid_argument("boost_from_json: not a boost document");
  }
  BoostModel model;
  model.k_stages = j.at("k_stages").get<int>();
  model.seed = j.at("seed").get<std::uint64_t>();
  model.learning_rate = j.at("learning_rate").get<double>();
  model.initial_value = j.at("initial_value").get<double>();
  model.grow = grow_config_from_json(j.at("config"));
  model.meta = meta_from_json(j.at("feature_meta"));
  model.stages = trees_from_json(j.at("trees"));
  return model;
}

nlohmann::json importance_to_json(const ImportanceReport& report) {
  nlohmann::json features = nlohmann::json::array();
  const auto p = report.feature_names.size();
  std::vector<int> perm_rank(p), purity_rank(p);
  for (std::size_t r = 0; r < p; ++r) {
    perm_rank[static_cast<std::size_t>(report.permutation_order[r])] = static_cast<int>(r) + 1;
    purity_rank[static_cast<std::size_t>(report.purity_order[r])] = static_cast<int>(r) + 1;
  }
  for (std::size_t jdx = 0; jdx < p; ++jdx) {
    features.push_back({{"name", report.feature_names[jdx]},
                        {"pct_inc_mse", report.permutation(static_cast<Eigen::Index>(jdx))},
                        {"pct_inc_mse_rank", perm_rank[jdx]},
                        {"node_purity", report.purity(static_cast<Eigen::Index>(jdx))},
                        {"node_purity_rank", purity_rank[jdx]}});
  }
  return nlohmann::json{{"schema_version", 1}, {"features", std::move(features)}};
}

std::string family_name(Family family) {
  return family == Family::Forest ? "forest" : "boost";
}

}  // namespace crashml
