#include "crashml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace crashml {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Regularized lower incomplete gamma by power series (for x < a + 1).
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 1000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma by continued fraction (for x >= a + 1).
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

template <typename F>
double simpson_adaptive(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  constexpr int segments = 12;
  const double step = (b - a) / segments;
  double total = 0.0;
  for (int s = 0; s < segments; ++s) {
    const double lo = a + s * step;
    const double hi = lo + step;
    const double flo = f(lo);
    const double fmid = f(0.5 * (lo + hi));
    const double fhi = f(hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_adaptive(f, lo, hi, flo, fmid, fhi, whole, tol / segments, 48);
  }
  return total;
}

// Midranks (1-based) of the pooled sample.
std::vector<double> midranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

struct RankedGroups {
  std::vector<double> pooled;
  std::vector<double> ranks;
  std::vector<std::size_t> sizes;
  std::vector<double> rank_means;
  std::size_t total = 0;
};

RankedGroups rank_groups(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw std::invalid_argument("rank tests: need at least 2 groups");
  RankedGroups rg;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("rank tests: empty group");
    rg.sizes.push_back(g.size());
    rg.pooled.insert(rg.pooled.end(), g.begin(), g.end());
  }
  rg.total = rg.pooled.size();
  const auto [lo, hi] = std::minmax_element(rg.pooled.begin(), rg.pooled.end());
  if (*lo == *hi) {
    throw std::invalid_argument("rank tests: all values identical; no detectable effect");
  }
  rg.ranks = midranks(rg.pooled);
  std::size_t offset = 0;
  for (const auto size : rg.sizes) {
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i) sum += rg.ranks[offset + i];
    rg.rank_means.push_back(sum / static_cast<double>(size));
    offset += size;
  }
  return rg;
}

}  // namespace

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double chi_square_sf(double x, double df) {
  if (!(x >= 0.0)) throw std::domain_error("chi_square_sf: statistic must be >= 0");
  if (!(df >= 1.0)) throw std::domain_error("chi_square_sf: df must be >= 1");
  const double a = 0.5 * df;
  const double t = 0.5 * x;
  if (t == 0.0) return 1.0;
  if (t < a + 1.0) return 1.0 - gamma_p_series(a, t);
  return gamma_q_fraction(a, t);
}

double studentized_range_sf(double q, int k) {
  if (!(q >= 0.0)) throw std::domain_error("studentized_range_sf: statistic must be >= 0");
  if (k < 2) throw std::domain_error("studentized_range_sf: need k >= 2 groups");
  if (q == 0.0) return 1.0;
  const auto exponent = static_cast<double>(k - 1);
  const auto integrand = [&](double z) {
    return norm_pdf(z) * std::pow(norm_cdf(z) - norm_cdf(z - q), exponent);
  };
  const double cdf = static_cast<double>(k) * integrate(integrand, -9.0, 9.0, 1e-11);
  return std::clamp(1.0 - cdf, 0.0, 1.0);
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  const auto rg = rank_groups(groups);
  const auto n = static_cast<double>(rg.total);

  double weighted = 0.0;
  for (std::size_t g = 0; g < rg.sizes.size(); ++g) {
    weighted += static_cast<double>(rg.sizes[g]) * rg.rank_means[g] * rg.rank_means[g];
  }
  double h = 12.0 / (n * (n + 1.0)) * weighted - 3.0 * (n + 1.0);

  // tie correction: 1 - sum(t^3 - t) / (N^3 - N)
  std::vector<double> sorted = rg.pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i + 1);
    tie_sum += t * t * t - t;
    i = j + 1;
  }
  const double correction = 1.0 - tie_sum / (n * n * n - n);
  h = std::max(h / correction, 0.0);

  KruskalWallisResult result;
  result.h = h;
  result.df = static_cast<int>(groups.size()) - 1;
  result.p = chi_square_sf(h, static_cast<double>(result.df));
  return result;
}

PairwiseMatrix nemenyi(const std::vector<std::vector<double>>& groups,
                       std::vector<std::string> labels) {
  const auto rg = rank_groups(groups);
  const auto k = rg.sizes.size();
  const auto n = static_cast<double>(rg.total);

  PairwiseMatrix out;
  if (labels.empty()) {
    for (std::size_t g = 0; g < k; ++g) out.labels.push_back("group " + std::to_string(g + 1));
  } else {
    if (labels.size() != k) throw std::invalid_argument("nemenyi: label count mismatch");
    out.labels = std::move(labels);
  }
  out.p = Matrix::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k),
                           std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double se = std::sqrt(n * (n + 1.0) / 12.0 *
                                  (1.0 / static_cast<double>(rg.sizes[i]) +
                                   1.0 / static_cast<double>(rg.sizes[j])));
      const double stat = std::abs(rg.rank_means[i] - rg.rank_means[j]) / se;
      out.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          studentized_range_sf(stat * std::sqrt(2.0), static_cast<int>(k));
    }
  }
  return out;
}

double percent_change(double mean_from, double mean_to, double grand_mean) {
  if (!(grand_mean > 0.0)) throw std::domain_error("percent_change: grand mean must be > 0");
  return 100.0 * (mean_to - mean_from) / grand_mean;
}

PercentChangeTable percent_changes(const std::map<double, double>& group_means,
                                   double grand_mean) {
  if (group_means.size() < 2) throw std::invalid_argument("percent_changes: need >= 2 groups");
  if (!(grand_mean > 0.0)) throw std::domain_error("percent_changes: grand mean must be > 0");

  std::vector<double> widths;
  for (const auto& [w, _] : group_means) widths.push_back(w);

  PercentChangeTable table;
  table.grand_mean = grand_mean;
  for (std::size_t to = 0; to < widths.size(); ++to) {
    for (std::size_t from = to + 1; from < widths.size(); ++from) {
      table.rows.push_back({widths[from], widths[to],
                            percent_change(group_means.at(widths[from]),
                                           group_means.at(widths[to]), grand_mean)});
    }
  }
  return table;
}

GroupSummary boxplot_summary(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("boxplot_summary: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();

  const auto quantile = [&](double p) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
  };

  GroupSummary s;
  s.n = static_cast<int>(n);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);

  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_lo = s.q1;
  s.whisker_hi = s.q3;
  for (double v : sorted) {
    if (v >= lo_fence) {
      s.whisker_lo = v;
      break;
    }
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it <= hi_fence) {
      s.whisker_hi = *it;
      break;
    }
  }
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) s.outliers.push_back(v);
  }
  return s;
}

std::string format_pvalue(double p) {
  if (p < 2.2e-16) return "< 2.2e-16";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", p);
  return buf;
}

}  // namespace crashml
