// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Oracles (exhaustive split search, frozen reference grids, Monte
// Carlo and permutation baselines) live in tests/support and stay independent
// of the library code paths they check.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crashml/counterfactual.hpp"
#include "crashml/data_model.hpp"
#include "crashml/ensemble.hpp"
#include "crashml/metrics.hpp"
#include "crashml/pipeline.hpp"
#include "crashml/report_io.hpp"
#include "crashml/rng.hpp"
#include "crashml/stats.hpp"
#include "support/frozen_grids.hpp"
#include "support/oracles.hpp"

using namespace crashml;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// 1. Greedy tree growth equals an exhaustive per-node split search.
Outcome criterion_cart_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20260809);
  for (int rep = 0; rep < 200; ++rep) {
    const auto ds = testing::random_small_dataset(rng, 12, 3);
    GrowConfig config;
    config.min_leaf = 1 + static_cast<int>(rng.below(3));
    std::vector<int> rows(static_cast<std::size_t>(ds.n_rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    Rng grow_rng(static_cast<std::uint64_t>(rep));
    const auto tree = grow_tree(ds, rows, config, grow_rng);
    const auto check = testing::check_greedy_equivalence(ds, tree, config);
    if (!check.ok) {
      return {false, fmt("dataset %d: %s", rep, check.message.c_str())};
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) return {false, fmt("took %.2f s (limit 10 s)", elapsed)};
  return {true, fmt("200 datasets, %.2f s", elapsed)};
}

// 2. Closed-form crash rate reference values.
Outcome criterion_crash_rate() {
  const double value = crash_rate(10, 1.0, 2, 5000.0);
  const double rel = std::abs(value - testing::kCrashRateReference) /
                     testing::kCrashRateReference;
  if (rel > 1e-9) return {false, fmt("reference mismatch, rel err %.3e", rel)};
  if (crash_rate(0, 1.0, 2, 5000.0) != 0.0) return {false, "zero-count case not exact"};
  RateParameters p0;
  p0.exposure_p = 0.0;
  if (crash_rate(2, 2.0, 3, 1234.0, p0) != 1'000'000.0) {
    return {false, "exponent-zero case not exact"};
  }
  return {true, fmt("rate %.12f, rel err %.2e", value, rel)};
}

// 3. Stagewise training error never increases at unit learning rate.
Outcome criterion_boost_monotone() {
  Rng rng(314159);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 25 + static_cast<int>(rng.below(30));
    const int p = 2 + static_cast<int>(rng.below(3));
    Dataset ds;
    ds.features.resize(n, p);
    ds.response.resize(n);
    for (int j = 0; j < p; ++j) {
      ds.meta.push_back({"x" + std::to_string(j), FeatureKind::Numeric, {}});
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) ds.features(i, j) = rng.uniform();
      ds.response(i) = 3.0 * ds.features(i, 0) + rng.normal();
    }
    GrowConfig stage = boost_stage_defaults();
    stage.min_gain = 0.0;
    const auto model = train_lsboost(ds, 200, 1.0, stage, static_cast<std::uint64_t>(rep));
    Vector accum = Vector::Constant(n, model.initial_value);
    double prev = mse(ds.response, accum);
    int stage_index = 0;
    for (const auto& tree : model.stages) {
      ++stage_index;
      for (int i = 0; i < n; ++i) accum(i) += predict_tree(tree, ds.features.row(i));
      const double cur = mse(ds.response, accum);
      if (cur > prev + 1e-12 * std::max(1.0, prev)) {
        return {false, fmt("dataset %d stage %d: MSE rose from %.12g to %.12g", rep,
                           stage_index, prev, cur)};
      }
      prev = cur;
    }
  }
  return {true, "50 datasets x 200 stages, zero violations"};
}

// 4. Forest bytes identical across thread counts.
Outcome criterion_forest_determinism() {
  std::map<double, double> effect = {{9, 28.0}, {10, 31.0}, {11, 20.0}, {12, 23.0}};
  const auto data = generate_synthetic(300, effect, 2.0, 11, 3);
  const auto ds = make_dataset(aggregate_sections(data.records), ResponseMode::Rate);
  std::string reference;
  for (int threads : {1, 2, 8}) {
    const auto model = train_forest(ds, 30, {}, 424242, threads);
    const auto bytes = forest_to_json(model).dump();
    if (reference.empty()) {
      reference = bytes;
    } else if (bytes != reference) {
      return {false, fmt("serialized model differs at %d threads", threads)};
    }
  }
  return {true, fmt("identical %zu-byte models at 1, 2, 8 threads", reference.size())};
}

// 5. A planted strong predictor ranks first on both importance measures.
Outcome criterion_importance_recovery() {
  int both_first = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 50000);
    Dataset ds;
    const int n = 150, p = 9;
    ds.features.resize(n, p);
    ds.response.resize(n);
    for (int j = 0; j < p; ++j) {
      ds.meta.push_back({"x" + std::to_string(j), FeatureKind::Numeric, {}});
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) ds.features(i, j) = rng.uniform();
      ds.response(i) = 4.0 * ds.features(i, 0) + 0.25 * rng.normal();
    }
    const auto model = train_forest(ds, 50, {}, static_cast<std::uint64_t>(seed));
    const auto report = variable_importance(model, ds, static_cast<std::uint64_t>(seed) + 1);
    if (report.permutation_order[0] == 0 && report.purity_order[0] == 0) ++both_first;
  }
  if (both_first < 95) return {false, fmt("planted predictor first in only %d/100", both_first)};
  return {true, fmt("planted predictor first on both measures in %d/100", both_first)};
}

// 6. Statistical kernels against frozen grids, closed forms, Monte Carlo,
// and null calibration.
Outcome criterion_stat_kernels() {
  for (const auto& pt : testing::kChi2Grid) {
    const double got = chi_square_sf(pt.x, pt.df);
    if (std::abs(got - pt.sf) > 1e-10 * pt.sf) {
      return {false, fmt("chi2(x=%g, df=%g): got %.15e want %.15e", pt.x, pt.df, got, pt.sf)};
    }
  }

  for (double q : {0.25, 0.9, 1.7, 2.5, 3.6, 5.2}) {
    const double closed = 2.0 * (1.0 - norm_cdf(q / std::sqrt(2.0)));
    if (std::abs(studentized_range_sf(q, 2) - closed) > 1e-8) {
      return {false, fmt("range sf(k=2, q=%g) misses its closed form", q)};
    }
  }

  // 1e7-draw Monte Carlo of the k-normal range, k = 3..6
  for (int k = 3; k <= 6; ++k) {
    std::vector<double> qs;
    for (const auto& pt : testing::kRangeGrid) {
      if (pt.k == k) qs.push_back(pt.q);
    }
    qs.push_back(1.0 + 0.5 * k);  // one mid-tail point per k
    Rng rng(777000 + static_cast<std::uint64_t>(k));
    const int draws = 10'000'000;
    std::vector<int> exceed(qs.size(), 0);
    for (int d = 0; d < draws; ++d) {
      double lo = 1e300, hi = -1e300;
      for (int j = 0; j < k; ++j) {
        const double z = rng.normal();
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
      const double range = hi - lo;
      for (std::size_t iq = 0; iq < qs.size(); ++iq) {
        if (range > qs[iq]) ++exceed[iq];
      }
    }
    for (std::size_t iq = 0; iq < qs.size(); ++iq) {
      const double mc = static_cast<double>(exceed[iq]) / draws;
      const double got = studentized_range_sf(qs[iq], k);
      if (std::abs(got - mc) > 0.002) {
        return {false, fmt("range sf(k=%d, q=%g): got %.5f, MC %.5f", k, qs[iq], got, mc)};
      }
    }
  }

  const auto hand = kruskal_wallis({{1, 3}, {2, 4}});
  if (std::abs(hand.h - 0.6) > 1e-12 || std::abs(hand.p - 0.4386) > 5e-4) {
    return {false, fmt("hand case: H=%.6f p=%.6f", hand.h, hand.p)};
  }

  // null calibration: two same-distribution groups, p-values ~ U(0,1)
  const int reps = 1000;
  std::vector<double> pvalues;
  pvalues.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::substream(654321, static_cast<std::uint64_t>(r));
    std::vector<std::vector<double>> groups(2);
    for (auto& g : groups) {
      for (int i = 0; i < 30; ++i) g.push_back(rng.uniform());
    }
    pvalues.push_back(kruskal_wallis(groups).p);
  }
  std::sort(pvalues.begin(), pvalues.end());
  double ks = 0.0;
  for (int i = 0; i < reps; ++i) {
    const double hi = (i + 1.0) / reps - pvalues[static_cast<std::size_t>(i)];
    const double lo = pvalues[static_cast<std::size_t>(i)] - static_cast<double>(i) / reps;
    ks = std::max({ks, hi, lo});
  }
  if (ks >= 0.05) return {false, fmt("null calibration KS = %.4f (limit 0.05)", ks)};
  return {true, fmt("grids, closed forms, Monte Carlo, KS = %.4f", ks)};
}

// 7. Pairwise p-values track a 100k-draw permutation oracle.
Outcome criterion_nemenyi_permutation() {
  const auto start = std::chrono::steady_clock::now();
  Rng instance_rng(271828);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    std::vector<std::vector<double>> groups(3);
    const double shift1 = instance_rng.uniform(0.0, 1.2);
    const double shift2 = instance_rng.uniform(0.0, 1.2);
    for (int g = 0; g < 3; ++g) {
      const double shift = g == 1 ? shift1 : (g == 2 ? shift2 : 0.0);
      for (int i = 0; i < 20; ++i) groups[g].push_back(instance_rng.normal() + shift);
    }
    const auto matrix = nemenyi(groups);

    // joint ranks are fixed; permutations shuffle assignment only
    std::vector<double> pooled;
    for (const auto& g : groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const int total = 60;
    std::vector<int> order(total);
    for (int i = 0; i < total; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(total);
    for (int i = 0; i < total; ++i) ranks[static_cast<std::size_t>(order[i])] = i + 1;

    const double se = std::sqrt(total * (total + 1.0) / 12.0 * (2.0 / 20.0));
    auto group_means = [&](const std::vector<double>& r, double mean[3]) {
      for (int g = 0; g < 3; ++g) {
        double sum = 0.0;
        for (int i = 0; i < 20; ++i) sum += r[static_cast<std::size_t>(g * 20 + i)];
        mean[g] = sum / 20.0;
      }
    };
    double mean[3];
    group_means(ranks, mean);
    double observed[3][3] = {};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < a; ++b) observed[a][b] = std::abs(mean[a] - mean[b]) / se;
    }

    const int reps = 100'000;
    int exceed[3][3] = {};
    std::vector<double> shuffled = ranks;
    Rng perm_rng(99000 + static_cast<std::uint64_t>(inst));
    for (int rep = 0; rep < reps; ++rep) {
      for (int i = 0; i < total - 1; ++i) {
        std::swap(shuffled[static_cast<std::size_t>(i)],
                  shuffled[static_cast<std::size_t>(
                      i + static_cast<int>(perm_rng.below(static_cast<std::uint64_t>(total - i))))]);
      }
      group_means(shuffled, mean);
      double max_stat = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < a; ++b) {
          max_stat = std::max(max_stat, std::abs(mean[a] - mean[b]) / se);
        }
      }
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < a; ++b) {
          if (max_stat >= observed[a][b]) ++exceed[a][b];
        }
      }
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < a; ++b) {
        const double perm_p = static_cast<double>(exceed[a][b]) / reps;
        const double diff = std::abs(matrix.p(a, b) - perm_p);
        worst = std::max(worst, diff);
        if (diff > 0.02) {
          return {false, fmt("instance %d pair(%d,%d): nemenyi %.4f vs permutation %.4f",
                             inst, a, b, matrix.p(a, b), perm_p)};
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 120.0) return {false, fmt("took %.1f s (limit 120 s)", elapsed)};
  return {true, fmt("20 instances, max |diff| %.4f, %.1f s", worst, elapsed)};
}

// 8. Full pipeline on planted synthetic data recovers the decoded ordering.
Outcome criterion_end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path base = fs::temp_directory_path() / "crashml_acceptance_runs";
  fs::remove_all(base);

  int recovered = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    RunConfig config;
    config.generator = GeneratorSpec{};  // 10 > 9 > 12 > 11 planted by default
    config.generator->sections = 1818;
    config.k_trees = 200;
    config.sensitivity_trees = {1, 50, 200};
    config.seed = static_cast<std::uint64_t>(seed);
    config.out_dir = (base / ("s" + std::to_string(seed))).string();
    const auto outputs = cmd_run(config);
    fs::remove_all(config.out_dir);

    const auto& effect = outputs.effect;
    const auto& m = effect.marginal_means;  // widths ascending: 9, 10, 11, 12
    const bool ordering = m[1] > m[0] && m[0] > m[3] && m[3] > m[2];
    const bool omnibus = effect.kruskal && effect.kruskal->df == 3 && effect.kruskal->p < 0.05;
    bool cells = effect.pairwise.has_value();
    if (cells) {
      for (Eigen::Index i = 1; i < 4; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          cells = cells && std::isfinite(effect.pairwise->p(i, j));
        }
      }
    }
    if (ordering && omnibus && cells) ++recovered;
  }
  fs::remove_all(base);
  const double elapsed = seconds_since(start);
  if (recovered < 95) return {false, fmt("ordering + tests recovered in only %d/100", recovered)};
  if (elapsed >= 300.0) return {false, fmt("took %.1f s (limit 300 s)", elapsed)};
  return {true, fmt("recovered in %d/100 runs, %.1f s", recovered, elapsed)};
}

// 9. Percent-change decoding and antisymmetry.
Outcome criterion_percent_change() {
  std::map<double, double> means = {{9, 24.5}, {10, 26.73}, {11, 21.0}, {12, 20.0475}};
  const auto table = percent_changes(means, 26.73);
  bool found = false;
  for (const auto& row : table.rows) {
    if (row.width_from == 12.0 && row.width_to == 10.0) {
      found = true;
      if (std::abs(row.percent - 25.0) > 1e-9) {
        return {false, fmt("row (12, 10) prints %+.4f, want +25.0", row.percent)};
      }
    }
  }
  if (!found) return {false, "row (12, 10) missing from the table"};
  const auto csv = percent_changes_to_csv(table);
  if (csv.find("+25.0") == std::string::npos) {
    return {false, "formatted table does not print +25.0"};
  }

  Rng rng(13);
  for (int rep = 0; rep < 1000; ++rep) {
    const double a = rng.uniform(0.1, 50.0);
    const double b = rng.uniform(0.1, 50.0);
    const double grand = rng.uniform(0.1, 50.0);
    if (std::abs(percent_change(a, b, grand) + percent_change(b, a, grand)) > 1e-9) {
      return {false, "antisymmetry violated"};
    }
  }
  return {true, "row (12, 10) prints +25.0; antisymmetry holds on 1000 random draws"};
}

// 10. Winner selection on the published adequacy numbers.
Outcome criterion_adequacy_selection() {
  AdequacyRow forest{"forest", 15.73, 617.02, 10.07};
  AdequacyRow boost{"boost", 16.31, 669.42, 8.96};
  const auto winner = select_winner(forest, boost);
  if (winner != "forest") return {false, "selected " + winner};
  return {true, "forest selected on MSE 617.02 vs 669.42"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "CART greedy growth equals exhaustive split search", criterion_cart_oracle},
      {2, "crash-rate closed form", criterion_crash_rate},
      {3, "boosting training MSE monotone over 200 stages", criterion_boost_monotone},
      {4, "forest serialization invariant to thread count", criterion_forest_determinism},
      {5, "planted predictor tops both importance measures", criterion_importance_recovery},
      {6, "statistical kernels vs oracles and calibration", criterion_stat_kernels},
      {7, "pairwise p-values vs permutation oracle", criterion_nemenyi_permutation},
      {8, "end-to-end planted-effect pipeline run", criterion_end_to_end},
      {9, "percent-change decoding and antisymmetry", criterion_percent_change},
      {10, "adequacy winner selection", criterion_adequacy_selection},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %2d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", criterion.id,
                criterion.name, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
