#ifndef CRASHML_STATS_HPP
#define CRASHML_STATS_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crashml/types.hpp"

namespace crashml {

double norm_pdf(double z);
double norm_cdf(double z);

// Upper tail of the chi-square distribution (regularized upper incomplete
// gamma Q(df/2, x/2)).
double chi_square_sf(double x, double df);

// Upper tail of the studentized range distribution with infinite error
// degrees of freedom, by adaptive quadrature (absolute error <= 1e-8):
//   1 - k * Int phi(z) * (Phi(z) - Phi(z - q))^(k-1) dz
double studentized_range_sf(double q, int k);

struct KruskalWallisResult {
  double h = 0.0;  // tie-corrected statistic
  int df = 0;      // groups - 1
  double p = 0.0;  // chi-square upper tail
};

// Rank-based k-group omnibus test with midranks for ties. Throws when fewer
// than 2 groups, a group is empty, or every value is identical (the tie
// correction degenerates).
KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

struct PairwiseMatrix {
  std::vector<std::string> labels;  // one per group
  Matrix p;                         // k x k; lower triangle (i > j) holds p-values, rest NaN
};

// All-pairs rank comparison referred to the studentized range distribution:
// for each pair the statistic |mean rank difference| / se is mapped through
// studentized_range_sf(stat * sqrt(2), k). Same preconditions as
// kruskal_wallis.
PairwiseMatrix nemenyi(const std::vector<std::vector<double>>& groups,
                       std::vector<std::string> labels = {});

struct PercentChangeRow {
  double width_from = 0.0;
  double width_to = 0.0;
  double percent = 0.0;  // 100 * (mean_to - mean_from) / grand_mean
};

struct PercentChangeTable {
  std::vector<PercentChangeRow> rows;
  double grand_mean = 0.0;
};

double percent_change(double mean_from, double mean_to, double grand_mean);

// One row per ordered pair (from > to in width), grouped by destination
// width ascending. Throws when grand_mean <= 0 or fewer than 2 groups.
PercentChangeTable percent_changes(const std::map<double, double>& group_means,
                                   double grand_mean);

struct GroupSummary {
  int n = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_lo = 0.0;  // most extreme points within 1.5 IQR of the quartiles
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

// Five-number summary with linear-interpolation quartiles (position (n-1)*p)
// and 1.5*IQR whiskers.
GroupSummary boxplot_summary(std::span<const double> values);

// "< 2.2e-16" below that threshold, otherwise a short fixed rendering.
std::string format_pvalue(double p);

}  // namespace crashml

#endif  // CRASHML_STATS_HPP
