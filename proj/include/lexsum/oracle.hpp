#pragma once

#include <span>
#include <string>
#include <vector>

#include "lexsum/common.hpp"
#include "lexsum/textseg.hpp"

namespace lexsum::oracle {

struct ExtractiveLabelSet {
  std::string judgment_id;
  /// One 0/1 label per document sentence, in document order.
  std::vector<int> labels;
  /// Sentence indices in the order the greedy search picked them.
  std::vector<std::size_t> selected_order;
  /// ROUGE-2 F1 (x100) after each pick; the last entry is final_rouge2_f1.
  std::vector<double> prefix_f1;
  double final_rouge2_f1 = 0.0;
};

/// Greedy ROUGE-2 oracle. Each round adds the unselected sentence whose
/// inclusion maximizes ROUGE-2 F1 of the selected sentences concatenated in
/// document order; stops once no addition improves F1 by more than 1e-9.
/// Ties go to the smallest sentence index.
///
/// Candidate bigram counts are updated incrementally: adding sentence s between
/// selected neighbours p < s < q only touches s's internal bigrams and the
/// boundary bigrams (p|s), (s|q), minus the old (p|q).
ExtractiveLabelSet build_extractive_labels(std::span<const textseg::Sentence> doc_sentences,
                                           const Tokens& reference_tokens,
                                           std::string judgment_id = {});

}  // namespace lexsum::oracle
