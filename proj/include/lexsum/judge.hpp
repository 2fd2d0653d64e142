#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexsum/common.hpp"
#include "lexsum/provider.hpp"
#include "lexsum/textseg.hpp"

namespace lexsum::judge {

/// Metric values on the [0, 100] scale, keyed by r2, rL, bertscore, neprec,
/// summac.
struct ScoreReport {
  std::string judgment_id;
  std::map<std::string, double> values;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy cosine matching between token vectors (no IDF, no rescaling).
/// Precision averages each candidate token's best match in the reference,
/// recall the reverse. Values in [0, 1].
PrecisionRecall bertscore_from_vectors(std::span<const provider::Vector> candidate,
                                       std::span<const provider::Vector> reference);

/// BERTScore F1 x100 using the provider's token embeddings. Token sequences are
/// sent as space-joined text.
double bertscore_f1(const Tokens& candidate, const Tokens& reference, Language lang,
                    provider::Provider& embedder);

/// Normalization used for entity matching: NFKC, Latin case-fold, collapsed
/// whitespace.
std::string normalize_entity(std::string_view surface);

/// Fraction (x100) of distinct summary entities that also occur among the
/// document's entities. A summary without entities scores 100.
double neprec_from_entities(std::span<const provider::Entity> document_entities,
                            std::span<const provider::Entity> summary_entities);

double neprec(std::string_view document_text, Language document_language,
              std::string_view summary_text, Language summary_language,
              provider::Provider& ner_provider);

/// Entailment probabilities, one row per summary sentence, one column per
/// document sentence (premise = document sentence, hypothesis = summary
/// sentence).
using EntailmentMatrix = std::vector<std::vector<double>>;

EntailmentMatrix entailment_matrix(std::span<const textseg::Sentence> doc_sentences,
                                   std::span<const textseg::Sentence> summary_sentences,
                                   provider::Provider& nli_provider);

/// Zero-shot aggregation: max over document sentences, mean over summary
/// sentences, x100.
double summac_zero_shot(const EntailmentMatrix& matrix);

/// Histogram of one summary sentence's entailment scores over `bins` equal
/// bins on [0, 1], normalized to sum to 1. This is the feature a learned
/// convolutional aggregator consumes.
std::vector<double> score_histogram(std::span<const double> row, std::size_t bins);

double summa_consistency(std::span<const textseg::Sentence> doc_sentences,
                         std::span<const textseg::Sentence> summary_sentences,
                         provider::Provider& nli_provider);

}  // namespace lexsum::judge
