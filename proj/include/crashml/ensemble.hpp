#ifndef CRASHML_ENSEMBLE_HPP
#define CRASHML_ENSEMBLE_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crashml/cart.hpp"
#include "crashml/types.hpp"

namespace crashml {

// Bagged ensemble: each tree sees a bootstrap sample of size n and draws
// mtry candidate features per node.
struct ForestModel {
  std::vector<RegressionTree> trees;
  std::vector<std::vector<int>> bags;  // bootstrap row indices, |bag| = n
  std::vector<std::vector<int>> oob;   // rows absent from the bag
  GrowConfig grow;                     // resolved config (mtry filled in)
  int k_trees = 0;
  std::uint64_t seed = 0;
  std::vector<FeatureMeta> meta;
};

// Stagewise least-squares ensemble: stage m fits the residuals of the model
// through stage m-1, scaled by the learning rate.
struct BoostModel {
  double initial_value = 0.0;  // mean of the training response
  std::vector<RegressionTree> stages;
  double learning_rate = 1.0;
  GrowConfig grow;
  int k_stages = 0;
  std::uint64_t seed = 0;
  std::vector<FeatureMeta> meta;
};

using Model = std::variant<ForestModel, BoostModel>;

// Per-tree rng substreams come from (seed, tree index), so training order and
// thread count cannot change the result. mtry defaults to ceil(p / 3).
ForestModel train_forest(const Dataset& train, int k_trees, const GrowConfig& config,
                         std::uint64_t seed, int threads = 1);

BoostModel train_lsboost(const Dataset& train, int k_stages, double learning_rate,
                         const GrowConfig& stage_config, std::uint64_t seed);

// Stage-tree defaults (shallow trees).
GrowConfig boost_stage_defaults();

double predict_forest(const ForestModel& model, const Eigen::Ref<const Vector>& row);
double predict_boost(const BoostModel& model, const Eigen::Ref<const Vector>& row);
double predict_model(const Model& model, const Eigen::Ref<const Vector>& row);

// Prediction of the ensemble truncated to its first k members.
double predict_forest_truncated(const ForestModel& model, const Eigen::Ref<const Vector>& row,
                                int k);
double predict_boost_truncated(const BoostModel& model, const Eigen::Ref<const Vector>& row,
                               int k);

// Row-wise batch prediction (parallelized over rows).
Vector predict_matrix(const Model& model, const Matrix& rows, int threads = 1);

struct ImportanceReport {
  std::vector<std::string> feature_names;
  Vector permutation;            // percent increase in oob MSE, scaled by its
                                 // standard error across trees
  Vector purity;                 // split SSE gain per feature, averaged over trees
  std::vector<int> permutation_order;  // feature indices, most important first
  std::vector<int> purity_order;
};

// Out-of-bag permutation importance plus node-purity importance. Throws when
// any tree has an empty oob set (increase rows or trees).
ImportanceReport variable_importance(const ForestModel& model, const Dataset& train,
                                     std::uint64_t seed, int threads = 1);

enum class Family { Forest, Boost };

struct SensitivityPoint {
  int trees = 0;
  double mae = 0.0;
  double mse = 0.0;
};

struct SensitivityCurve {
  Family family = Family::Forest;
  std::vector<SensitivityPoint> points;  // tree counts strictly increasing
};

// Trains once at max(tree_counts) and evaluates truncated ensembles on the
// test set.
SensitivityCurve sensitivity_curve(const Dataset& train, const Dataset& test, Family family,
                                   const std::vector<int>& tree_counts, std::uint64_t seed,
                                   const GrowConfig& config, double learning_rate = 1.0,
                                   int threads = 1);

// Truncation sweep over an already-trained model (counts must not exceed its
// size).
SensitivityCurve sensitivity_curve(const ForestModel& model, const Dataset& test,
                                   const std::vector<int>& tree_counts);
SensitivityCurve sensitivity_curve(const BoostModel& model, const Dataset& test,
                                   const std::vector<int>& tree_counts);

// Persistence. Loading re-derives bootstrap/oob index sets from the seed.
nlohmann::json forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const nlohmann::json& j);
nlohmann::json boost_to_json(const BoostModel& model);
BoostModel boost_from_json(const nlohmann::json& j);

nlohmann::json importance_to_json(const ImportanceReport& report);

std::string family_name(Family family);

}  // namespace crashml

#endif  // CRASHML_ENSEMBLE_HPP
