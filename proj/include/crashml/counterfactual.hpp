#ifndef CRASHML_COUNTERFACTUAL_HPP
#define CRASHML_COUNTERFACTUAL_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crashml/data_model.hpp"
#include "crashml/ensemble.hpp"
#include "crashml/stats.hpp"
#include "crashml/types.hpp"

namespace crashml {

// Every source row replicated once per lane width, all other features held
// fixed. Row-major ordering: source row outer, widths ascending inner.
struct CounterfactualDataset {
  Matrix features;
  std::vector<FeatureMeta> meta;
  std::vector<std::pair<int, double>> provenance;  // (source row, lane width)
  std::vector<double> widths;                      // ascending
  int lane_width_feature = -1;
  Eigen::Index source_rows = 0;
};

CounterfactualDataset expand_lane_widths(const Dataset& dataset,
                                         std::vector<double> widths = {9, 10, 11, 12});

struct EffectReport {
  ResponseMode mode = ResponseMode::Rate;
  std::vector<double> widths;
  std::vector<GroupSummary> groups;     // per width, over that width's predictions
  std::vector<double> marginal_means;   // per width
  double grand_mean = 0.0;              // mean of all predictions
  std::optional<PercentChangeTable> percent;
  std::optional<KruskalWallisResult> kruskal;
  std::optional<PairwiseMatrix> pairwise;
  bool no_detectable_effect = false;    // all predictions identical
};

// Predicts every expanded row with the model and assembles group summaries,
// percent changes, and the omnibus + pairwise tests over the width groups.
EffectReport simulate_effect(const Model& model, const CounterfactualDataset& expanded,
                             ResponseMode mode, int threads = 1);

struct ReplicationConfig {
  Family family = Family::Forest;
  int k_trees = 200;
  GrowConfig forest_grow;
  GrowConfig boost_grow = boost_stage_defaults();
  double learning_rate = 1.0;
  double train_fraction = 0.8;
  RateParameters rate;
  std::vector<double> widths = {9, 10, 11, 12};
  int threads = 1;
};

// Counts-as-response rerun: builds the counts-mode dataset (exposure columns
// included as predictors), trains the configured family on the train split,
// and simulates over the full dataset.
EffectReport counts_mode_replication(const std::vector<AggregatedSection>& sections,
                                     const ReplicationConfig& config, std::uint64_t seed);

nlohmann::json effect_report_to_json(const EffectReport& report);

}  // namespace crashml

#endif  // CRASHML_COUNTERFACTUAL_HPP
