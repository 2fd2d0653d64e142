#include "lexsum/sigtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lexsum/common.hpp"

namespace lexsum::judge {
namespace {

double upper_normal(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
double lower_normal(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Sum of t^3 - t over tie groups.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    term += t * t * t - t;
    i = j;
  }
  return term;
}

// Normal-approximation p-value with continuity correction.
double normal_p(double statistic, double mean, double variance, Alternative alt) {
  if (variance <= 0.0) return 1.0;
  const double sd = std::sqrt(variance);
  switch (alt) {
    case Alternative::greater: return upper_normal((statistic - mean - 0.5) / sd);
    case Alternative::less: return lower_normal((statistic - mean + 0.5) / sd);
    case Alternative::two_sided: {
      const double z = std::max(std::abs(statistic - mean) - 0.5, 0.0) / sd;
      return std::min(1.0, 2.0 * upper_normal(z));
    }
  }
  return 1.0;
}

// Exact tail probabilities from a count table indexed by doubled statistic.
double exact_p(const std::vector<double>& counts, std::size_t observed, double total,
               Alternative alt) {
  double upper = 0.0;
  double lower = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (s >= observed) upper += counts[s];
    if (s <= observed) lower += counts[s];
  }
  upper /= total;
  lower /= total;
  switch (alt) {
    case Alternative::greater: return std::min(1.0, upper);
    case Alternative::less: return std::min(1.0, lower);
    case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(upper, lower));
  }
  return 1.0;
}

std::size_t doubled(double rank) { return static_cast<std::size_t>(std::llround(2.0 * rank)); }

TestResult finish(TestResult r) {
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.significant_at_99 = r.p_value < kSignificanceLevel;
  return r;
}

}  // namespace

std::string_view to_string(TestKind test) noexcept {
  return test == TestKind::mann_whitney_u ? "mann_whitney_u" : "wilcoxon_signed_rank";
}

std::string_view to_string(Alternative alt) noexcept {
  switch (alt) {
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    case Alternative::two_sided: return "two_sided";
  }
  return "greater";
}

Alternative parse_alternative(std::string_view name) {
  if (name == "greater") return Alternative::greater;
  if (name == "less") return Alternative::less;
  if (name == "two_sided" || name == "two-sided") return Alternative::two_sided;
  throw Error("judge", "unknown alternative '" + std::string(name) + "'");
}

TestKind parse_test(std::string_view name) {
  if (name == "wilcoxon" || name == "wilcoxon_signed_rank") return TestKind::wilcoxon_signed_rank;
  if (name == "mannwhitney" || name == "mann_whitney_u" || name == "mwu") {
    return TestKind::mann_whitney_u;
  }
  throw Error("judge", "unknown test '" + std::string(name) + "'");
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                Alternative alternative, PValueMethod method) {
  if (a.size() != b.size()) throw Error("judge", "wilcoxon needs paired samples of equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw Error("judge", "wilcoxon input contains non-finite values");
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw Error("judge", "degenerate pairing: all differences are zero");
  if (diffs.size() < 5) {
    throw Error("judge", "wilcoxon needs at least 5 nonzero differences, got " +
                             std::to_string(diffs.size()));
  }

  std::vector<double> magnitudes;
  for (double d : diffs) magnitudes.push_back(std::abs(d));
  const auto ranks = average_ranks(magnitudes);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0) w_plus += ranks[i];
  }

  const std::size_t n = diffs.size();
  TestResult r;
  r.test = TestKind::wilcoxon_signed_rank;
  r.alternative = alternative;
  r.statistic = w_plus;
  r.n = n;
  r.exact = method == PValueMethod::exact ||
            (method == PValueMethod::automatic && n <= kWilcoxonExactMax);

  if (r.exact) {
    // Each rank is positive or negative with probability 1/2 under the null.
    std::size_t max_sum = 0;
    for (double rk : ranks) max_sum += doubled(rk);
    std::vector<double> counts(max_sum + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (double rk : ranks) {
      const std::size_t step = doubled(rk);
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (counts[s] != 0.0) counts[s + step] += counts[s];
      }
      reach += step;
    }
    r.p_value = exact_p(counts, doubled(w_plus), std::ldexp(1.0, static_cast<int>(n)), alternative);
  } else {
    const auto nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term(magnitudes) / 48.0;
    r.p_value = normal_p(w_plus, mean, var, alternative);
  }
  return finish(r);
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alternative, PValueMethod method) {
  if (a.empty() || b.empty()) throw Error("judge", "mann-whitney needs two non-empty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double x : pooled) {
    if (!std::isfinite(x)) throw Error("judge", "mann-whitney input contains non-finite values");
  }
  const auto ranks = average_ranks(pooled);
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t total = n1 + n2;

  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum += ranks[i];
  const double n1d = static_cast<double>(n1);
  const double u = rank_sum - n1d * (n1d + 1.0) / 2.0;

  TestResult r;
  r.test = TestKind::mann_whitney_u;
  r.alternative = alternative;
  r.statistic = u;
  r.n = total;
  r.exact = method == PValueMethod::exact ||
            (method == PValueMethod::automatic && total <= kMannWhitneyExactMax);

  if (r.exact) {
    // Distribution of the doubled rank sum of a random n1-subset of the pooled ranks.
    std::size_t max_sum = 0;
    for (double rk : ranks) max_sum += doubled(rk);
    std::vector<std::vector<double>> counts(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    counts[0][0] = 1.0;
    for (double rk : ranks) {
      const std::size_t step = doubled(rk);
      for (std::size_t k = n1; k >= 1; --k) {
        for (std::size_t s = max_sum + 1; s-- > step;) counts[k][s] += counts[k - 1][s - step];
      }
    }
    double subsets = 0.0;
    for (double c : counts[n1]) subsets += c;
    r.p_value = exact_p(counts[n1], doubled(rank_sum), subsets, alternative);
  } else {
    const double n2d = static_cast<double>(n2);
    const double nd = static_cast<double>(total);
    const double mean = n1d * n2d / 2.0;
    const double var = n1d * n2d / 12.0 * ((nd + 1.0) - tie_term(pooled) / (nd * (nd - 1.0)));
    r.p_value = normal_p(u, mean, var, alternative);
  }
  return finish(r);
}

}  // namespace lexsum::judge
