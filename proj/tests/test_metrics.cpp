#include <doctest.h>

#include <cmath>

#include "crashml/metrics.hpp"
#include "crashml/rng.hpp"

using namespace crashml;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("mae basics") {
  CHECK(mae(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
  CHECK(mae(vec({0, 10}), vec({1, 9})) == doctest::Approx(1.0));
  CHECK(mae(vec({5}), vec({2})) == 3.0);
  CHECK_THROWS_AS(mae(vec({1, 2}), vec({1})), std::invalid_argument);
}

TEST_CASE("mse basics") {
  CHECK(mse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
  CHECK(mse(vec({0, 10}), vec({1, 9})) == doctest::Approx(1.0));
  CHECK(mse(vec({0}), vec({3})) == 9.0);
  CHECK_THROWS_AS(mse(vec({1, 2}), vec({1})), std::invalid_argument);
}

TEST_CASE("mse dominates squared mae (Jensen)") {
  Rng rng(17);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(40));
    Vector t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t(i) = rng.uniform(0, 50);
      p(i) = rng.uniform(0, 50);
    }
    const double a = mae(t, p);
    REQUIRE(mse(t, p) >= a * a - 1e-12);
  }
}

TEST_CASE("histogram_intersection: identical samples give n/Q") {
  HistogramSpec spec;
  spec.bins = 4;
  const auto x = vec({1, 2, 2, 3, 8, 9});
  CHECK(histogram_intersection(x, x, spec) == doctest::Approx(6.0 / 4.0));

  // constant sample (degenerate default range)
  const auto c = vec({5, 5, 5});
  CHECK(histogram_intersection(c, c, spec) == doctest::Approx(3.0 / 4.0));
}

TEST_CASE("histogram_intersection: hand-binned two-bin case") {
  HistogramSpec spec;
  spec.bins = 2;
  spec.range = {{0.0, 2.0}};
  // H(truth) = [3,1], H(pred) = [2,2] -> (1/2) * (2 + 1) = 1.5
  const auto truth = vec({0.1, 0.2, 0.3, 1.5});
  const auto pred = vec({0.4, 0.5, 1.2, 1.3});
  CHECK(histogram_intersection(truth, pred, spec) == doctest::Approx(1.5));
}

TEST_CASE("histogram_intersection: disjoint supports give zero") {
  HistogramSpec spec;
  spec.bins = 2;
  spec.range = {{0.0, 2.0}};
  const auto truth = vec({0.1, 0.5, 0.9});
  const auto pred = vec({1.1, 1.5, 1.9});
  CHECK(histogram_intersection(truth, pred, spec) == 0.0);
}

TEST_CASE("histogram_intersection: symmetry and clamping") {
  HistogramSpec spec;
  spec.bins = 5;
  spec.range = {{0.0, 1.0}};
  const auto a = vec({-3, 0.2, 0.5, 7});  // out-of-range values clamp into end bins
  const auto b = vec({0.1, 0.4, 0.95, 2});
  CHECK(histogram_intersection(a, b, spec) == histogram_intersection(b, a, spec));

  spec.proportions = true;
  CHECK(histogram_intersection(a, a, spec) == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("metrics are invariant to joint permutation of pairs") {
  Rng rng(31);
  Vector t(20), p(20);
  for (int i = 0; i < 20; ++i) {
    t(i) = rng.uniform(0, 10);
    p(i) = rng.uniform(0, 10);
  }
  std::vector<int> perm(20);
  for (int i = 0; i < 20; ++i) perm[i] = i;
  for (int i = 0; i < 19; ++i) std::swap(perm[i], perm[i + rng.below(20 - i)]);
  Vector t2(20), p2(20);
  for (int i = 0; i < 20; ++i) {
    t2(i) = t(perm[i]);
    p2(i) = p(perm[i]);
  }
  CHECK(mae(t, p) == doctest::Approx(mae(t2, p2)));
  CHECK(mse(t, p) == doctest::Approx(mse(t2, p2)));
  HistogramSpec spec;
  spec.range = {{0.0, 10.0}};
  CHECK(histogram_intersection(t, p, spec) == doctest::Approx(histogram_intersection(t2, p2, spec)));
}

TEST_CASE("adequacy_check: perfect model wins and symmetry flips the winner") {
  const auto truth = vec({1, 2, 3, 4});
  const auto off = vec({2, 3, 4, 5});
  const auto table = adequacy_check(truth, truth, off, {});
  CHECK(table.winner == "forest");
  CHECK(table.forest.mse == 0.0);

  const auto flipped = adequacy_check(truth, off, truth, {});
  CHECK(flipped.winner == "boost");
}

TEST_CASE("adequacy selection on the published error table") {
  AdequacyRow forest{"forest", 15.73, 617.02, 10.07};
  AdequacyRow boost{"boost", 16.31, 669.42, 8.96};
  CHECK(select_winner(forest, boost) == "forest");
}

TEST_CASE("adequacy serialization carries both rows") {
  const auto truth = vec({1, 2, 3, 4});
  const auto table = adequacy_check(truth, vec({1, 2, 3, 5}), vec({0, 2, 3, 4}), {});
  const auto j = adequacy_to_json(table);
  CHECK(j.at("models").size() == 2);
  const auto csv = adequacy_to_csv(table);
  CHECK(csv.find("model,mean_absolute_error,mean_squared_error,histogram_intersection") == 0);
  CHECK(csv.find("winner,") != std::string::npos);
}
