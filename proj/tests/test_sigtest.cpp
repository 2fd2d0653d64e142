#include <doctest.h>

#include <random>

#include "lexsum/common.hpp"
#include "lexsum/sigtest.hpp"
#include "oracles.hpp"

using namespace lexsum;
using namespace lexsum::judge;

TEST_CASE("Wilcoxon worked example") {
  const std::vector<double> a = {2, 3, 4, 5, 6};
  const std::vector<double> b = {1, 1, 1, 1, 1};
  const auto r = wilcoxon_signed_rank(a, b, Alternative::greater);
  CHECK(r.statistic == 15.0);
  CHECK(r.p_value == 0.03125);
  CHECK(r.exact);
  CHECK(r.n == 5);
  CHECK_FALSE(r.significant_at_99);
  CHECK(wilcoxon_signed_rank(a, b, Alternative::less).p_value == 1.0);
  CHECK(wilcoxon_signed_rank(a, b, Alternative::two_sided).p_value == 0.0625);
}

TEST_CASE("Wilcoxon errors") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  CHECK_THROWS_WITH_AS(wilcoxon_signed_rank(a, a), doctest::Contains("degenerate pairing"), Error);
  const std::vector<double> short_a = {1, 2, 3}, short_b = {0, 0, 0};
  CHECK_THROWS_AS(wilcoxon_signed_rank(short_a, short_b), Error);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, short_b), Error);
}

TEST_CASE("Wilcoxon exact p matches sign enumeration, ties included") {
  std::mt19937 gen(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(5, 14)(gen);
    std::vector<double> a(n), b(n, 0.0);
    for (auto& x : a) {
      do {
        x = std::uniform_int_distribution<int>(-4, 6)(gen);
      } while (x == 0);
    }
    std::vector<double> abs_d;
    double w_plus = 0;
    for (double d : a) abs_d.push_back(std::abs(d));
    const auto ranks = oracles::midranks(abs_d);
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] > 0) w_plus += ranks[i];
    }
    const auto r = wilcoxon_signed_rank(a, b, Alternative::greater, PValueMethod::exact);
    CHECK(r.statistic == doctest::Approx(w_plus));
    CHECK(r.p_value == doctest::Approx(oracles::wilcoxon_upper_by_signs(ranks, w_plus)).epsilon(1e-12));
  }
}

TEST_CASE("Mann-Whitney worked examples") {
  const std::vector<double> a = {1, 2}, b = {3, 4};
  const auto r = mann_whitney_u(a, b, Alternative::less);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0 / 6).epsilon(1e-15));
  CHECK(r.exact);

  const std::vector<double> same = {1, 2, 3, 4};
  CHECK(mann_whitney_u(same, same, Alternative::two_sided).p_value == doctest::Approx(1.0));

  std::vector<double> hi, lo;
  for (int i = 0; i < 10; ++i) {
    hi.push_back(100 + i);
    lo.push_back(i);
  }
  CHECK(mann_whitney_u(hi, lo, Alternative::greater).p_value < 0.01);
  CHECK(mann_whitney_u(hi, lo, Alternative::greater).significant_at_99);
  CHECK_THROWS_AS(mann_whitney_u({}, lo), Error);
}

TEST_CASE("Mann-Whitney exact p matches subset enumeration") {
  std::mt19937 gen(23);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n1 = std::uniform_int_distribution<std::size_t>(1, 7)(gen);
    const std::size_t n2 = std::uniform_int_distribution<std::size_t>(1, 7)(gen);
    std::vector<double> a(n1), b(n2);
    for (auto& x : a) x = std::uniform_int_distribution<int>(0, 5)(gen);
    for (auto& x : b) x = std::uniform_int_distribution<int>(0, 5)(gen);
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = oracles::midranks(pooled);
    double ra = 0;
    for (std::size_t i = 0; i < n1; ++i) ra += ranks[i];
    const double u = ra - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    const auto r = mann_whitney_u(a, b, Alternative::less, PValueMethod::exact);
    CHECK(r.statistic == doctest::Approx(u));
    CHECK(r.p_value == doctest::Approx(oracles::mann_whitney_lower_by_subsets(ranks, n1, u)).epsilon(1e-12));
  }
}

TEST_CASE("p-values stay in [0, 1] and large samples reach significance") {
  std::mt19937 gen(31);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> a, b;
  for (int i = 0; i < 40; ++i) {
    const double base = noise(gen);
    b.push_back(base);
    a.push_back(base + 1.0 + noise(gen));
  }
  const auto w = wilcoxon_signed_rank(a, b);
  CHECK_FALSE(w.exact);
  CHECK(w.p_value < 0.01);
  for (auto alt : {Alternative::greater, Alternative::less, Alternative::two_sided}) {
    for (auto method : {PValueMethod::exact, PValueMethod::normal}) {
      const auto p1 = wilcoxon_signed_rank(a, b, alt, method).p_value;
      const auto p2 = mann_whitney_u(std::span(a).first(15), std::span(b).first(15), alt, method).p_value;
      CHECK(p1 >= 0.0);
      CHECK(p1 <= 1.0);
      CHECK(p2 >= 0.0);
      CHECK(p2 <= 1.0);
    }
  }
}

TEST_CASE("average ranks and parsing") {
  const std::vector<double> v = {10, 20, 10, 30};
  CHECK(average_ranks(v) == std::vector<double>{1.5, 3, 1.5, 4});
  CHECK(parse_test("mannwhitney") == TestKind::mann_whitney_u);
  CHECK(parse_alternative("two-sided") == Alternative::two_sided);
  CHECK_THROWS_AS(parse_test("ttest"), Error);
}
