#include "lexsum/oracle.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <utility>

#include "lexsum/rouge.hpp"

namespace lexsum::oracle {
namespace {

constexpr double kImprovementEpsilon = 1e-9;

struct SentenceIds {
  std::vector<std::uint32_t> ids;
  std::vector<std::pair<std::uint64_t, std::size_t>> internal;  // bigram counts
};

struct Delta {
  std::uint64_t key;
  long change;
};

}  // namespace

ExtractiveLabelSet build_extractive_labels(std::span<const textseg::Sentence> doc_sentences,
                                           const Tokens& reference_tokens,
                                           std::string judgment_id) {
  if (doc_sentences.empty()) throw Error("oracle", "document has no sentences");
  if (reference_tokens.size() < 2) {
    throw Error("oracle", "reference too short for ROUGE-2 oracle");
  }

  rouge::Vocabulary vocab;
  const auto ref_ids = vocab.intern(reference_tokens);
  const rouge::BigramCounts ref_counts = rouge::count_bigrams(ref_ids);
  const double ref_total = static_cast<double>(ref_ids.size() - 1);

  std::vector<SentenceIds> sents(doc_sentences.size());
  for (std::size_t i = 0; i < doc_sentences.size(); ++i) {
    sents[i].ids = vocab.intern(doc_sentences[i].tokens);
    const auto counts = rouge::count_bigrams(sents[i].ids);
    sents[i].internal.assign(counts.begin(), counts.end());
  }

  auto ref_count = [&](std::uint64_t key) -> long {
    auto it = ref_counts.find(key);
    return it == ref_counts.end() ? 0 : static_cast<long>(it->second);
  };

  rouge::BigramCounts cand_counts;
  auto cand_count = [&](std::uint64_t key) -> long {
    auto it = cand_counts.find(key);
    return it == cand_counts.end() ? 0 : static_cast<long>(it->second);
  };

  std::set<std::size_t> selected;
  std::size_t selected_tokens = 0;
  long overlap = 0;
  double current_f1 = 0.0;

  // Bigram count changes caused by inserting sentence s.
  auto deltas_for = [&](std::size_t s) {
    std::vector<Delta> deltas;
    deltas.reserve(sents[s].internal.size() + 3);
    for (const auto& [key, c] : sents[s].internal) deltas.push_back({key, static_cast<long>(c)});

    std::optional<std::size_t> prev, next;
    auto it = selected.lower_bound(s);
    if (it != selected.end()) next = *it;
    if (it != selected.begin()) prev = *std::prev(it);

    const auto& ids = sents[s].ids;
    if (prev && next) {
      deltas.push_back({rouge::bigram_key(sents[*prev].ids.back(), sents[*next].ids.front()), -1});
    }
    if (prev) deltas.push_back({rouge::bigram_key(sents[*prev].ids.back(), ids.front()), 1});
    if (next) deltas.push_back({rouge::bigram_key(ids.back(), sents[*next].ids.front()), 1});

    std::sort(deltas.begin(), deltas.end(),
              [](const Delta& a, const Delta& b) { return a.key < b.key; });
    std::vector<Delta> merged;
    for (const auto& d : deltas) {
      if (!merged.empty() && merged.back().key == d.key) {
        merged.back().change += d.change;
      } else {
        merged.push_back(d);
      }
    }
    return merged;
  };

  auto overlap_change = [&](const std::vector<Delta>& deltas) {
    long change = 0;
    for (const auto& d : deltas) {
      if (d.change == 0) continue;
      const long c = cand_count(d.key);
      const long r = ref_count(d.key);
      change += std::min(c + d.change, r) - std::min(c, r);
    }
    return change;
  };

  auto f1_for = [&](long ov, std::size_t tokens) {
    if (tokens < 2 || ov <= 0) return 0.0;
    const double p = static_cast<double>(ov) / static_cast<double>(tokens - 1);
    const double r = static_cast<double>(ov) / ref_total;
    return rouge::f_measure(p, r);
  };

  ExtractiveLabelSet result;
  result.judgment_id = std::move(judgment_id);
  result.labels.assign(doc_sentences.size(), 0);

  while (true) {
    std::optional<std::size_t> best;
    double best_f1 = -1.0;
    std::vector<Delta> best_deltas;
    long best_overlap = 0;

    for (std::size_t s = 0; s < sents.size(); ++s) {
      if (result.labels[s] == 1 || sents[s].ids.empty()) continue;
      auto deltas = deltas_for(s);
      const long ov = overlap + overlap_change(deltas);
      const double f1 = f1_for(ov, selected_tokens + sents[s].ids.size());
      if (f1 > best_f1) {
        best_f1 = f1;
        best = s;
        best_deltas = std::move(deltas);
        best_overlap = ov;
      }
    }

    if (!best || best_f1 <= current_f1 + kImprovementEpsilon) break;

    for (const auto& d : best_deltas) {
      const long updated = cand_count(d.key) + d.change;
      if (updated <= 0) {
        cand_counts.erase(d.key);
      } else {
        cand_counts[d.key] = static_cast<std::size_t>(updated);
      }
    }
    selected.insert(*best);
    selected_tokens += sents[*best].ids.size();
    overlap = best_overlap;
    current_f1 = best_f1;
    result.labels[*best] = 1;
    result.selected_order.push_back(*best);
    result.prefix_f1.push_back(100.0 * best_f1);
  }

  result.final_rouge2_f1 = 100.0 * current_f1;
  return result;
}

}  // namespace lexsum::oracle
