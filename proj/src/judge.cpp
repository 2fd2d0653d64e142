#include "lexsum/judge.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace lexsum::judge {
namespace {

double norm_sq(const provider::Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// dot / sqrt(|a|^2 |b|^2): for a == b this is exactly 1.
double cosine(const provider::Vector& a, double a_sq, const provider::Vector& b, double b_sq) {
  if (a.size() != b.size()) throw Error("judge", "token vectors differ in dimension");
  if (a_sq <= 0.0 || b_sq <= 0.0) return 0.0;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return std::clamp(d / std::sqrt(a_sq * b_sq), -1.0, 1.0);
}

double to_percent(double x) { return std::clamp(100.0 * x, 0.0, 100.0); }

}  // namespace

PrecisionRecall bertscore_from_vectors(std::span<const provider::Vector> candidate,
                                       std::span<const provider::Vector> reference) {
  if (candidate.empty() || reference.empty()) {
    throw Error("judge", "bertscore needs non-empty candidate and reference");
  }
  std::vector<double> cand_sq, ref_sq;
  for (const auto& v : candidate) cand_sq.push_back(norm_sq(v));
  for (const auto& v : reference) ref_sq.push_back(norm_sq(v));

  std::vector<double> best_for_cand(candidate.size(), -1.0);
  std::vector<double> best_for_ref(reference.size(), -1.0);
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const double sim = cosine(candidate[i], cand_sq[i], reference[j], ref_sq[j]);
      best_for_cand[i] = std::max(best_for_cand[i], sim);
      best_for_ref[j] = std::max(best_for_ref[j], sim);
    }
  }
  PrecisionRecall pr;
  for (double s : best_for_cand) pr.precision += s;
  for (double s : best_for_ref) pr.recall += s;
  pr.precision /= static_cast<double>(candidate.size());
  pr.recall /= static_cast<double>(reference.size());
  const double denom = pr.precision + pr.recall;
  pr.f1 = denom > 0.0 ? 2.0 * pr.precision * pr.recall / denom : 0.0;
  return pr;
}

double bertscore_f1(const Tokens& candidate, const Tokens& reference, Language lang,
                    provider::Provider& embedder) {
  if (candidate.empty() || reference.empty()) {
    throw Error("judge", "bertscore needs non-empty candidate and reference");
  }
  const std::vector<std::string> texts = {join(candidate), join(reference)};
  std::vector<std::vector<provider::Vector>> vectors;
  try {
    vectors = embedder.embed_tokens(texts, lang);
  } catch (const Error& e) {
    throw Error("judge", std::string("bertscore: ") + e.what());
  }
  if (vectors.size() != 2 || vectors[0].empty() || vectors[1].empty()) {
    throw Error("judge", "bertscore: provider returned no token vectors");
  }
  return to_percent(bertscore_from_vectors(vectors[0], vectors[1]).f1);
}

std::string normalize_entity(std::string_view surface) {
  const std::string nf = textseg::nfkc(surface);
  std::string out;
  bool pending_space = false;
  for (std::size_t pos = 0; pos < nf.size();) {
    int32_t i = static_cast<int32_t>(pos);
    UChar32 c;
    U8_NEXT(reinterpret_cast<const uint8_t*>(nf.data()), i, static_cast<int32_t>(nf.size()), c);
    pos = static_cast<std::size_t>(i);
    if (c < 0) continue;
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    UErrorCode status = U_ZERO_ERROR;
    if (uscript_getScript(c, &status) == USCRIPT_LATIN) c = u_foldCase(c, U_FOLD_CASE_DEFAULT);
    if (pending_space) out += ' ';
    pending_space = false;
    char buf[4];
    int32_t len = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, 4, c, err);
    if (err) continue;
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

double neprec_from_entities(std::span<const provider::Entity> document_entities,
                            std::span<const provider::Entity> summary_entities) {
  std::set<std::string> doc;
  for (const auto& e : document_entities) doc.insert(normalize_entity(e.surface));
  std::set<std::string> summary;
  for (const auto& e : summary_entities) {
    auto key = normalize_entity(e.surface);
    if (!key.empty()) summary.insert(std::move(key));
  }
  if (summary.empty()) return 100.0;
  std::size_t matched = 0;
  for (const auto& s : summary) matched += doc.count(s);
  return 100.0 * static_cast<double>(matched) / static_cast<double>(summary.size());
}

double neprec(std::string_view document_text, Language document_language,
              std::string_view summary_text, Language summary_language,
              provider::Provider& ner_provider) {
  try {
    const std::vector<std::string> doc = {std::string(document_text)};
    const std::vector<std::string> sum = {std::string(summary_text)};
    const auto doc_entities = ner_provider.ner(doc, document_language);
    const auto sum_entities = ner_provider.ner(sum, summary_language);
    return neprec_from_entities(doc_entities.at(0), sum_entities.at(0));
  } catch (const Error& e) {
    throw Error("judge", std::string("neprec: ") + e.what());
  }
}

EntailmentMatrix entailment_matrix(std::span<const textseg::Sentence> doc_sentences,
                                   std::span<const textseg::Sentence> summary_sentences,
                                   provider::Provider& nli_provider) {
  if (summary_sentences.empty()) throw Error("judge", "no summary sentences");
  if (doc_sentences.empty()) throw Error("judge", "no document sentences");
  std::vector<provider::NliPair> pairs;
  pairs.reserve(doc_sentences.size() * summary_sentences.size());
  for (const auto& s : summary_sentences) {
    for (const auto& d : doc_sentences) pairs.push_back({d.text, s.text});
  }
  std::vector<provider::NliProbs> probs;
  try {
    probs = nli_provider.nli(pairs);
  } catch (const Error& e) {
    throw Error("judge", std::string("summac: ") + e.what());
  }
  EntailmentMatrix matrix(summary_sentences.size(), std::vector<double>(doc_sentences.size()));
  for (std::size_t s = 0; s < summary_sentences.size(); ++s) {
    for (std::size_t d = 0; d < doc_sentences.size(); ++d) {
      matrix[s][d] = probs[s * doc_sentences.size() + d].entail;
    }
  }
  return matrix;
}

double summac_zero_shot(const EntailmentMatrix& matrix) {
  if (matrix.empty()) throw Error("judge", "no summary sentences");
  double total = 0.0;
  for (const auto& row : matrix) {
    if (row.empty()) throw Error("judge", "no document sentences");
    total += *std::max_element(row.begin(), row.end());
  }
  return to_percent(total / static_cast<double>(matrix.size()));
}

std::vector<double> score_histogram(std::span<const double> row, std::size_t bins) {
  if (bins == 0) throw Error("judge", "histogram needs at least one bin");
  std::vector<double> hist(bins, 0.0);
  if (row.empty()) return hist;
  for (double x : row) {
    const double clamped = std::clamp(x, 0.0, 1.0);
    auto bin = static_cast<std::size_t>(clamped * static_cast<double>(bins));
    hist[std::min(bin, bins - 1)] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(row.size());
  return hist;
}

double summa_consistency(std::span<const textseg::Sentence> doc_sentences,
                         std::span<const textseg::Sentence> summary_sentences,
                         provider::Provider& nli_provider) {
  return summac_zero_shot(entailment_matrix(doc_sentences, summary_sentences, nli_provider));
}

}  // namespace lexsum::judge
