#include "crashml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace crashml {

namespace {

void check_lengths(const Vector& truth, const Vector& pred) {
  if (truth.size() == 0) throw std::invalid_argument("metrics: empty input");
  if (truth.size() != pred.size()) throw std::invalid_argument("metrics: length mismatch");
}

std::vector<double> bin_counts(const Vector& values, int bins, double lo, double hi) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((values(i) - lo) / width));
    b = std::clamp<std::ptrdiff_t>(b, 0, bins - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return counts;
}

}  // namespace

double mae(const Vector& truth, const Vector& pred) {
  check_lengths(truth, pred);
  return (truth - pred).cwiseAbs().mean();
}

double mse(const Vector& truth, const Vector& pred) {
  check_lengths(truth, pred);
  return (truth - pred).squaredNorm() / static_cast<double>(truth.size());
}

double histogram_intersection(const Vector& truth, const Vector& pred,
                              const HistogramSpec& spec) {
  check_lengths(truth, pred);
  if (spec.bins < 1) throw std::invalid_argument("histogram_intersection: bins must be >= 1");

  double lo, hi;
  if (spec.range) {
    lo = spec.range->first;
    hi = spec.range->second;
    if (!(lo < hi)) throw std::invalid_argument("histogram_intersection: range must have lo < hi");
  } else {
    lo = std::min(truth.minCoeff(), pred.minCoeff());
    hi = std::max(truth.maxCoeff(), pred.maxCoeff());
    if (!(lo < hi)) hi = lo + 1.0;  // degenerate constant samples share one bin
  }

  auto h_truth = bin_counts(truth, spec.bins, lo, hi);
  auto h_pred = bin_counts(pred, spec.bins, lo, hi);
  if (spec.proportions) {
    const auto n = static_cast<double>(truth.size());
    for (auto& c : h_truth) c /= n;
    for (auto& c : h_pred) c /= n;
  }
  double overlap = 0.0;
  for (int q = 0; q < spec.bins; ++q) {
    overlap += std::min(h_truth[static_cast<std::size_t>(q)], h_pred[static_cast<std::size_t>(q)]);
  }
  return overlap / static_cast<double>(spec.bins);
}

std::string select_winner(const AdequacyRow& forest, const AdequacyRow& boost) {
  if (forest.mse != boost.mse) return forest.mse < boost.mse ? forest.family : boost.family;
  if (forest.mae != boost.mae) return forest.mae < boost.mae ? forest.family : boost.family;
  return forest.family;
}

AdequacyTable adequacy_check(const Vector& truth, const Vector& forest_pred,
                             const Vector& boost_pred, const HistogramSpec& spec) {
  AdequacyTable table;
  table.forest = {"forest", mae(truth, forest_pred), mse(truth, forest_pred),
                  histogram_intersection(truth, forest_pred, spec)};
  table.boost = {"boost", mae(truth, boost_pred), mse(truth, boost_pred),
                 histogram_intersection(truth, boost_pred, spec)};
  table.winner = select_winner(table.forest, table.boost);
  return table;
}

nlohmann::json adequacy_to_json(const AdequacyTable& table) {
  auto row = [](const AdequacyRow& r) {
    return nlohmann::json{{"family", r.family},
                          {"mae", r.mae},
                          {"mse", r.mse},
                          {"histogram_intersection", r.intersection}};
  };
  return nlohmann::json{{"schema_version", 1},
                        {"models", nlohmann::json::array({row(table.boost), row(table.forest)})},
                        {"winner", table.winner}};
}

std::string adequacy_to_csv(const AdequacyTable& table) {
  auto line = [](const AdequacyRow& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g\n", r.family.c_str(), r.mae, r.mse,
                  r.intersection);
    return std::string(buf);
  };
  std::string out = "model,mean_absolute_error,mean_squared_error,histogram_intersection\n";
  out += line(table.boost);
  out += line(table.forest);
  out += "winner," + table.winner + ",,\n";
  return out;
}

}  // namespace crashml
