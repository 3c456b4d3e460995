#include "crashml/counterfactual.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>

namespace crashml {

CounterfactualDataset expand_lane_widths(const Dataset& dataset, std::vector<double> widths) {
  if (dataset.n_rows() == 0) throw std::invalid_argument("expand_lane_widths: empty dataset");
  if (widths.empty()) throw std::invalid_argument("expand_lane_widths: empty width set");
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

  const int lane = dataset.feature_index("lane_width");
  if (lane < 0) {
    throw std::invalid_argument("expand_lane_widths: dataset has no lane_width feature");
  }

  CounterfactualDataset out;
  out.meta = dataset.meta;
  out.widths = widths;
  out.lane_width_feature = lane;
  out.source_rows = dataset.n_rows();

  const auto n = dataset.n_rows();
  const auto w = static_cast<Eigen::Index>(widths.size());
  out.features.resize(n * w, dataset.n_features());
  out.provenance.reserve(static_cast<std::size_t>(n * w));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index v = 0; v < w; ++v) {
      const Eigen::Index row = i * w + v;
      out.features.row(row) = dataset.features.row(i);
      out.features(row, lane) = widths[static_cast<std::size_t>(v)];
      out.provenance.emplace_back(static_cast<int>(i), widths[static_cast<std::size_t>(v)]);
    }
  }
  return out;
}

EffectReport simulate_effect(const Model& model, const CounterfactualDataset& expanded,
                             ResponseMode mode, int threads) {
  const Vector pred = predict_matrix(model, expanded.features, threads);

  EffectReport report;
  report.mode = mode;
  report.widths = expanded.widths;

  std::vector<std::vector<double>> groups(expanded.widths.size());
  for (auto& g : groups) g.reserve(static_cast<std::size_t>(expanded.source_rows));
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double width = expanded.provenance[static_cast<std::size_t>(i)].second;
    const auto g = static_cast<std::size_t>(
        std::lower_bound(expanded.widths.begin(), expanded.widths.end(), width) -
        expanded.widths.begin());
    groups[g].push_back(pred(i));
  }

  std::map<double, double> group_means;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    report.groups.push_back(boxplot_summary(groups[g]));
    report.marginal_means.push_back(report.groups.back().mean);
    group_means[expanded.widths[g]] = report.groups.back().mean;
  }
  report.grand_mean = pred.mean();

  if (report.grand_mean > 0.0 && groups.size() >= 2) {
    report.percent = percent_changes(group_means, report.grand_mean);
  }

  const bool all_identical = pred.minCoeff() == pred.maxCoeff();
  if (all_identical || groups.size() < 2) {
    report.no_detectable_effect = true;
    return report;
  }
  std::vector<std::string> labels;
  for (double w : expanded.widths) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g ft", w);
    labels.emplace_back(buf);
  }
  report.kruskal = kruskal_wallis(groups);
  report.pairwise = nemenyi(groups, labels);
  return report;
}

EffectReport counts_mode_replication(const std::vector<AggregatedSection>& sections,
                                     const ReplicationConfig& config, std::uint64_t seed) {
  const Dataset dataset = make_dataset(sections, ResponseMode::Counts, config.rate);
  const auto [train, test] = train_test_split(dataset, config.train_fraction, seed);

  Model model;
  if (config.family == Family::Forest) {
    model = train_forest(train, config.k_trees, config.forest_grow, seed, config.threads);
  } else {
    model = train_lsboost(train, config.k_trees, config.learning_rate, config.boost_grow, seed);
  }
  const auto expanded = expand_lane_widths(dataset, config.widths);
  return simulate_effect(model, expanded, ResponseMode::Counts, config.threads);
}

nlohmann::json effect_report_to_json(const EffectReport& report) {
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < report.groups.size(); ++g) {
    const auto& s = report.groups[g];
    groups.push_back({{"lane_width", report.widths[g]},
                      {"n", s.n},
                      {"mean", s.mean},
                      {"min", s.min},
                      {"q1", s.q1},
                      {"median", s.median},
                      {"q3", s.q3},
                      {"max", s.max},
                      {"whisker_lo", s.whisker_lo},
                      {"whisker_hi", s.whisker_hi},
                      {"outliers", s.outliers}});
  }

  nlohmann::json j{{"schema_version", 1},
                   {"response_mode", report.mode == ResponseMode::Rate ? "rate" : "counts"},
                   {"widths", report.widths},
                   {"groups", std::move(groups)},
                   {"marginal_means", report.marginal_means},
                   {"grand_mean", report.grand_mean},
                   {"no_detectable_effect", report.no_detectable_effect}};

  if (report.percent) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.percent->rows) {
      rows.push_back({{"width_from", r.width_from}, {"width_to", r.width_to},
                      {"percent_change", r.percent}});
    }
    j["percent_changes"] = {{"grand_mean", report.percent->grand_mean},
                            {"rows", std::move(rows)}};
  }
  if (report.kruskal) {
    j["kruskal_wallis"] = {{"h", report.kruskal->h},
                           {"df", report.kruskal->df},
                           {"p", report.kruskal->p},
                           {"p_formatted", format_pvalue(report.kruskal->p)}};
  }
  if (report.pairwise) {
    nlohmann::json cells = nlohmann::json::array();
    const auto k = report.pairwise->labels.size();
    for (std::size_t i = 1; i < k; ++i) {
      for (std::size_t jdx = 0; jdx < i; ++jdx) {
        const double p = report.pairwise->p(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(jdx));
        cells.push_back({{"group_a", report.pairwise->labels[i]},
                         {"group_b", report.pairwise->labels[jdx]},
                         {"p", p},
                         {"p_formatted", format_pvalue(p)}});
      }
    }
    j["nemenyi"] = {{"labels", report.pairwise->labels}, {"cells", std::move(cells)}};
  }
  return j;
}

}  // namespace crashml
