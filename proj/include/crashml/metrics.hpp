#ifndef CRASHML_METRICS_HPP
#define CRASHML_METRICS_HPP

#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "crashml/types.hpp"

namespace crashml {

struct HistogramSpec {
  int bins = 20;                                     // Q
  std::optional<std::pair<double, double>> range;    // absent: min/max of the union
  bool proportions = false;                          // bin proportions instead of raw counts
};

double mae(const Vector& truth, const Vector& pred);
double mse(const Vector& truth, const Vector& pred);

// (1/Q) * sum_q min(H_q(truth), H_q(pred)) over Q equal-width bins on the
// shared range; out-of-range values clamp into the end bins.
double histogram_intersection(const Vector& truth, const Vector& pred,
                              const HistogramSpec& spec = {});

struct AdequacyRow {
  std::string family;
  double mae = 0.0;
  double mse = 0.0;
  double intersection = 0.0;
};

struct AdequacyTable {
  AdequacyRow forest;
  AdequacyRow boost;
  std::string winner;  // family with the lower test MSE, MAE as tie-break
};

AdequacyTable adequacy_check(const Vector& truth, const Vector& forest_pred,
                             const Vector& boost_pred, const HistogramSpec& spec = {});

// Selection on already-computed measures (same rule as adequacy_check).
std::string select_winner(const AdequacyRow& forest, const AdequacyRow& boost);

nlohmann::json adequacy_to_json(const AdequacyTable& table);
std::string adequacy_to_csv(const AdequacyTable& table);

}  // namespace crashml

#endif  // CRASHML_METRICS_HPP
