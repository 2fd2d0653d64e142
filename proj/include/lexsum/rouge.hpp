#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexsum/common.hpp"

namespace lexsum::rouge {

/// Precision, recall and F1 in [0, 1]. Reports multiply by 100.
struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

double f_measure(double precision, double recall) noexcept;

RougeScore rouge2(const Tokens& candidate, const Tokens& reference);
RougeScore rougeL(const Tokens& candidate, const Tokens& reference);

/// Two-row dynamic program over interned ids.
std::size_t lcs_length(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Maps token strings to dense ids so hot loops compare integers.
class Vocabulary {
 public:
  std::uint32_t intern(const std::string& token);
  std::vector<std::uint32_t> intern(const Tokens& tokens);
  std::size_t size() const noexcept { return ids_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
};

inline std::uint64_t bigram_key(std::uint32_t first, std::uint32_t second) noexcept {
  return (static_cast<std::uint64_t>(first) << 32) | second;
}

using BigramCounts = std::unordered_map<std::uint64_t, std::size_t>;

BigramCounts count_bigrams(std::span<const std::uint32_t> ids);

/// Clipped overlap: sum over bigrams of min(candidate count, reference count).
std::size_t bigram_overlap(const BigramCounts& candidate, const BigramCounts& reference);

}  // namespace lexsum::rouge
