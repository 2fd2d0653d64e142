#pragma once

// Reference implementations used only by tests. They favour obviousness over
// speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lexsum/textseg.hpp"

namespace oracles {

using Words = std::vector<std::string>;

inline Words words(const std::string& text) {
  Words out;
  std::istringstream in(text);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

inline double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

struct Prf {
  double p = 0, r = 0, f = 0;
};

inline std::map<std::pair<std::string, std::string>, int> bigram_multiset(const Words& w) {
  std::map<std::pair<std::string, std::string>, int> m;
  for (std::size_t i = 1; i < w.size(); ++i) m[{w[i - 1], w[i]}]++;
  return m;
}

inline Prf rouge2(const Words& cand, const Words& ref) {
  if (cand.size() < 2 || ref.size() < 2) return {};
  const auto c = bigram_multiset(cand);
  const auto r = bigram_multiset(ref);
  int overlap = 0;
  for (const auto& [g, n] : c) {
    auto it = r.find(g);
    if (it != r.end()) overlap += std::min(n, it->second);
  }
  Prf s;
  s.p = static_cast<double>(overlap) / static_cast<double>(cand.size() - 1);
  s.r = static_cast<double>(overlap) / static_cast<double>(ref.size() - 1);
  s.f = f1(s.p, s.r);
  return s;
}

/// Full (|a|+1) x (|b|+1) LCS table.
inline std::size_t lcs(const Words& a, const Words& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

inline Prf rougeL(const Words& cand, const Words& ref) {
  if (cand.empty() || ref.empty()) return {};
  const double l = static_cast<double>(lcs(cand, ref));
  Prf s;
  s.p = l / static_cast<double>(cand.size());
  s.r = l / static_cast<double>(ref.size());
  s.f = f1(s.p, s.r);
  return s;
}

/// ROUGE-2 F1 of the sentences in `mask`, concatenated in document order.
inline double subset_f1(const std::vector<Words>& sents, unsigned mask, const Words& ref) {
  Words cat;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (mask & (1u << i)) cat.insert(cat.end(), sents[i].begin(), sents[i].end());
  }
  return rouge2(cat, ref).f;
}

inline std::pair<unsigned, double> best_subset(const std::vector<Words>& sents, const Words& ref) {
  unsigned best_mask = 0;
  double best = 0.0;
  for (unsigned mask = 1; mask < (1u << sents.size()); ++mask) {
    const double f = subset_f1(sents, mask, ref);
    if (f > best) {
      best = f;
      best_mask = mask;
    }
  }
  return {best_mask, best};
}

/// Greedy oracle that rescores every candidate from scratch.
inline std::vector<std::size_t> naive_greedy(const std::vector<Words>& sents, const Words& ref) {
  unsigned mask = 0;
  double current = 0.0;
  std::vector<std::size_t> order;
  while (true) {
    double best = -1.0;
    std::size_t pick = sents.size();
    for (std::size_t i = 0; i < sents.size(); ++i) {
      if ((mask & (1u << i)) || sents[i].empty()) continue;
      const double f = subset_f1(sents, mask | (1u << i), ref);
      if (f > best) {
        best = f;
        pick = i;
      }
    }
    if (pick == sents.size() || best <= current + 1e-9) break;
    mask |= 1u << pick;
    current = best;
    order.push_back(pick);
  }
  return order;
}

/// Exact one-sided Wilcoxon p-value by enumerating all 2^n sign assignments.
/// Returns P(W+ >= observed) under H0.
inline double wilcoxon_upper_by_signs(const std::vector<double>& ranks, double observed) {
  const std::size_t n = ranks.size();
  std::size_t hits = 0;
  for (std::uint64_t signs = 0; signs < (std::uint64_t{1} << n); ++signs) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (signs & (std::uint64_t{1} << i)) w += ranks[i];
    }
    if (w >= observed - 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(std::uint64_t{1} << n);
}

/// Exact Mann-Whitney tail by enumerating every way to pick |a| ranks out of
/// the pooled ranks. Returns P(U <= observed) under H0.
inline double mann_whitney_lower_by_subsets(const std::vector<double>& pooled_ranks,
                                            std::size_t n1, double observed_u) {
  const std::size_t n = pooled_ranks.size();
  std::vector<int> pick(n, 0);
  std::fill(pick.end() - static_cast<long>(n1), pick.end(), 1);
  std::size_t total = 0, hits = 0;
  do {
    double r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick[i]) r += pooled_ranks[i];
    }
    const double u = r - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    ++total;
    if (u <= observed_u + 1e-9) ++hits;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

inline std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

/// Sentences built directly from word lists, with running token offsets.
inline std::vector<lexsum::textseg::Sentence> make_sentences(const std::vector<Words>& sents) {
  std::vector<lexsum::textseg::Sentence> out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    lexsum::textseg::Sentence s;
    s.index = i;
    s.tokens = sents[i];
    s.token_offset = offset;
    for (const auto& w : sents[i]) s.text += (s.text.empty() ? "" : " ") + w;
    offset += sents[i].size();
    out.push_back(std::move(s));
  }
  return out;
}

inline Words random_words(std::mt19937& gen, std::size_t max_len, int vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  Words w(len(gen));
  for (auto& x : w) x = "w" + std::to_string(tok(gen));
  return w;
}

}  // namespace oracles
