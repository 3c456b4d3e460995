#include <doctest.h>

#include <cmath>
#include <map>

#include "crashml/counterfactual.hpp"
#include "crashml/data_model.hpp"
#include "crashml/rng.hpp"

using namespace crashml;

namespace {

Dataset small_rate_dataset(int sections, std::uint64_t seed) {
  std::map<double, double> effect = {{9, 28.0}, {10, 31.0}, {11, 20.0}, {12, 23.0}};
  const auto data = generate_synthetic(sections, effect, 2.0, seed, 3);
  return make_dataset(aggregate_sections(data.records), ResponseMode::Rate);
}

}  // namespace

TEST_CASE("expand_lane_widths: cartesian product with fixed other features") {
  const auto ds = small_rate_dataset(6, 5);
  const auto expanded = expand_lane_widths(ds);
  CHECK(expanded.features.rows() == 4 * ds.n_rows());
  CHECK(expanded.source_rows == ds.n_rows());
  REQUIRE(expanded.provenance.size() == static_cast<std::size_t>(4 * ds.n_rows()));

  const int lane = ds.feature_index("lane_width");
  for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
    for (int v = 0; v < 4; ++v) {
      const Eigen::Index row = i * 4 + v;
      CHECK(expanded.provenance[static_cast<std::size_t>(row)].first == static_cast<int>(i));
      CHECK(expanded.features(row, lane) == expanded.widths[static_cast<std::size_t>(v)]);
      for (Eigen::Index j = 0; j < ds.n_features(); ++j) {
        if (j == lane) continue;
        REQUIRE(expanded.features(row, j) == ds.features(i, j));
      }
    }
  }
}

TEST_CASE("expand_lane_widths: singleton width forces lane_width only") {
  const auto ds = small_rate_dataset(4, 6);
  const auto expanded = expand_lane_widths(ds, {11});
  REQUIRE(expanded.features.rows() == ds.n_rows());
  const int lane = ds.feature_index("lane_width");
  for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
    CHECK(expanded.features(i, lane) == 11.0);
  }
}

TEST_CASE("expand_lane_widths: restoring original widths recovers the dataset") {
  const auto ds = small_rate_dataset(5, 7);
  const auto expanded = expand_lane_widths(ds);
  const int lane = ds.feature_index("lane_width");
  Matrix restored(ds.n_rows(), ds.n_features());
  for (Eigen::Index row = 0; row < expanded.features.rows(); ++row) {
    const auto [src, width] = expanded.provenance[static_cast<std::size_t>(row)];
    if (width == expanded.widths.front()) {
      restored.row(src) = expanded.features.row(row);
      restored(src, lane) = ds.features(src, lane);
    }
  }
  CHECK(restored == ds.features);
}

TEST_CASE("expand_lane_widths requires the lane_width feature") {
  Dataset ds;
  ds.features.resize(2, 1);
  ds.features << 1, 2;
  ds.response.resize(2);
  ds.response << 1, 2;
  ds.meta = {{"speed_limit", FeatureKind::Numeric, {}}};
  CHECK_THROWS_WITH_AS(expand_lane_widths(ds), doctest::Contains("lane_width"),
                       std::invalid_argument);
}

TEST_CASE("simulate_effect: lane-width-blind model reports no detectable effect") {
  const auto ds = small_rate_dataset(8, 9);
  // a single-leaf tree predicts one constant everywhere
  ForestModel model;
  RegressionTree tree;
  tree.n_features = static_cast<int>(ds.n_features());
  TreeNode leaf;
  leaf.value = 4.5;
  leaf.n = ds.n_rows();
  tree.nodes.push_back(leaf);
  model.trees.push_back(tree);
  model.bags.push_back({0});
  model.oob.push_back({1});
  model.k_trees = 1;
  model.meta = ds.meta;

  const auto report = simulate_effect(Model(model), expand_lane_widths(ds), ResponseMode::Rate);
  CHECK(report.no_detectable_effect);
  CHECK_FALSE(report.kruskal.has_value());
  CHECK_FALSE(report.pairwise.has_value());
  REQUIRE(report.percent.has_value());
  for (const auto& row : report.percent->rows) CHECK(row.percent == 0.0);
  for (double m : report.marginal_means) CHECK(m == 4.5);
}

TEST_CASE("simulate_effect: groups have size n and the grand mean ties out") {
  const auto ds = small_rate_dataset(40, 12);
  const auto model = train_forest(ds, 30, {}, 3);
  const auto expanded = expand_lane_widths(ds);
  const auto report = simulate_effect(Model(model), expanded, ResponseMode::Rate);

  REQUIRE(report.groups.size() == 4);
  for (const auto& g : report.groups) CHECK(g.n == ds.n_rows());
  REQUIRE(report.kruskal.has_value());
  CHECK(report.kruskal->df == 3);

  double mean_of_means = 0.0;
  for (double m : report.marginal_means) mean_of_means += m;
  mean_of_means /= 4.0;
  CHECK(report.grand_mean == doctest::Approx(mean_of_means));

  // deterministic given (model, dataset)
  const auto again = simulate_effect(Model(model), expanded, ResponseMode::Rate);
  CHECK(effect_report_to_json(again).dump() == effect_report_to_json(report).dump());
}

TEST_CASE("simulate_effect recovers a planted ordering through the model") {
  int recovered = 0;
  const int runs = 10;
  for (int seed = 0; seed < runs; ++seed) {
    std::map<double, double> effect = {{9, 28.0}, {10, 31.0}, {11, 20.0}, {12, 23.0}};
    const auto data = generate_synthetic(300, effect, 4.0, 7000 + seed, 3);
    const auto ds = make_dataset(aggregate_sections(data.records), ResponseMode::Rate);
    const auto model = train_forest(ds, 60, {}, static_cast<std::uint64_t>(seed));
    const auto report = simulate_effect(Model(model), expand_lane_widths(ds), ResponseMode::Rate);
    // planted ordering of the width means: 10 > 9 > 12 > 11
    const auto& m = report.marginal_means;
    if (m[1] > m[0] && m[0] > m[3] && m[3] > m[2]) ++recovered;
  }
  CHECK(recovered >= 9);
}

TEST_CASE("counts_mode_replication trains on counts with exposure predictors") {
  std::map<double, double> effect = {{9, 28.0}, {10, 31.0}, {11, 20.0}, {12, 23.0}};
  const auto data = generate_synthetic(150, effect, 2.0, 31, 3);
  const auto sections = aggregate_sections(data.records);
  ReplicationConfig config;
  config.k_trees = 30;
  const auto report = counts_mode_replication(sections, config, 5);
  CHECK(report.mode == ResponseMode::Counts);
  REQUIRE(report.groups.size() == 4);
  for (const auto& g : report.groups) CHECK(g.n == static_cast<int>(sections.size()));
  // narrower widths mean more crashes in the planted map
  const auto& m = report.marginal_means;
  CHECK(std::min(m[0], m[1]) > std::max(m[2], m[3]));
}

TEST_CASE("effect report JSON carries the table payloads") {
  const auto ds = small_rate_dataset(30, 77);
  const auto model = train_forest(ds, 20, {}, 3);
  const auto report = simulate_effect(Model(model), expand_lane_widths(ds), ResponseMode::Rate);
  const auto j = effect_report_to_json(report);
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("response_mode") == "rate");
  CHECK(j.at("groups").size() == 4);
  CHECK(j.at("percent_changes").at("rows").size() == 6);
  CHECK(j.at("kruskal_wallis").contains("p_formatted"));
  CHECK(j.at("nemenyi").at("cells").size() == 6);
}
