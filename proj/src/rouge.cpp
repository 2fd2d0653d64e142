#include "lexsum/rouge.hpp"

#include <algorithm>

namespace lexsum::rouge {

double f_measure(double precision, double recall) noexcept {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

std::uint32_t Vocabulary::intern(const std::string& token) {
  auto [it, inserted] = ids_.try_emplace(token, static_cast<std::uint32_t>(ids_.size()));
  return it->second;
}

std::vector<std::uint32_t> Vocabulary::intern(const Tokens& tokens) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(intern(t));
  return ids;
}

BigramCounts count_bigrams(std::span<const std::uint32_t> ids) {
  BigramCounts counts;
  if (ids.size() < 2) return counts;
  counts.reserve(ids.size());
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) ++counts[bigram_key(ids[i], ids[i + 1])];
  return counts;
}

std::size_t bigram_overlap(const BigramCounts& candidate, const BigramCounts& reference) {
  const BigramCounts& small = candidate.size() <= reference.size() ? candidate : reference;
  const BigramCounts& large = &small == &candidate ? reference : candidate;
  std::size_t overlap = 0;
  for (const auto& [key, count] : small) {
    auto it = large.find(key);
    if (it != large.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

RougeScore rouge2(const Tokens& candidate, const Tokens& reference) {
  Vocabulary vocab;
  const auto cand = vocab.intern(candidate);
  const auto ref = vocab.intern(reference);
  const std::size_t cand_total = cand.size() < 2 ? 0 : cand.size() - 1;
  const std::size_t ref_total = ref.size() < 2 ? 0 : ref.size() - 1;
  if (cand_total == 0 || ref_total == 0) return {};

  const std::size_t overlap = bigram_overlap(count_bigrams(cand), count_bigrams(ref));
  RougeScore s;
  s.precision = static_cast<double>(overlap) / static_cast<double>(cand_total);
  s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
  s.f1 = f_measure(s.precision, s.recall);
  return s;
}

std::size_t lcs_length(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() || b.empty()) return 0;
  if (b.size() > a.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

RougeScore rougeL(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return {};
  Vocabulary vocab;
  const auto cand = vocab.intern(candidate);
  const auto ref = vocab.intern(reference);
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  RougeScore s;
  s.precision = lcs / static_cast<double>(cand.size());
  s.recall = lcs / static_cast<double>(ref.size());
  s.f1 = f_measure(s.precision, s.recall);
  return s;
}

}  // namespace lexsum::rouge
