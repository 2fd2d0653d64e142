#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace lexsum::judge {

enum class TestKind { wilcoxon_signed_rank, mann_whitney_u };
enum class Alternative { greater, less, two_sided };
enum class PValueMethod { automatic, exact, normal };

std::string_view to_string(TestKind test) noexcept;
std::string_view to_string(Alternative alt) noexcept;
Alternative parse_alternative(std::string_view name);
TestKind parse_test(std::string_view name);

inline constexpr double kSignificanceLevel = 0.01;

struct TestResult {
  TestKind test = TestKind::wilcoxon_signed_rank;
  double statistic = 0.0;
  double p_value = 1.0;
  Alternative alternative = Alternative::greater;
  bool significant_at_99 = false;
  bool exact = false;
  std::size_t n = 0;  // nonzero differences (Wilcoxon) or |a| + |b| (Mann-Whitney)
};

/// Average ranks (1-based) of `values`; tied values share the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Signed-rank test on paired differences a - b, zero differences dropped.
/// Statistic W+ (sum of ranks of positive differences); `greater` tests
/// a > b. Exact null distribution for n <= 25 (ties handled by enumerating
/// over the doubled average ranks), otherwise the normal approximation with
/// tie and continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                Alternative alternative = Alternative::greater,
                                PValueMethod method = PValueMethod::automatic);

/// Rank-sum test. Statistic U of sample a; `greater` tests a stochastically
/// larger than b. Exact for |a| + |b| <= 20, otherwise tie-corrected normal
/// approximation with continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alternative = Alternative::greater,
                          PValueMethod method = PValueMethod::automatic);

inline constexpr std::size_t kWilcoxonExactMax = 25;
inline constexpr std::size_t kMannWhitneyExactMax = 20;

}  // namespace lexsum::judge
