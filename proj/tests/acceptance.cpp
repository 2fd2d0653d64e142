// Acceptance checks: one PASS/FAIL/SKIP line per criterion, exit status 1 if
// any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "lexsum/chunkalign.hpp"
#include "lexsum/corpus.hpp"
#include "lexsum/corruptor.hpp"
#include "lexsum/judge.hpp"
#include "lexsum/oracle.hpp"
#include "lexsum/rouge.hpp"
#include "lexsum/sigtest.hpp"
#include "oracles.hpp"

using namespace lexsum;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind;
  std::string detail;
};

Outcome ok(std::string d) { return {Outcome::pass, std::move(d)}; }
Outcome bad(std::string d) { return {Outcome::fail, std::move(d)}; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome rouge_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 gen(1000);
  for (int i = 0; i < 1000; ++i) {
    const auto a = oracles::random_words(gen, 30, 8);
    const auto b = oracles::random_words(gen, 30, 8);
    const auto r2 = rouge::rouge2(a, b);
    const auto want2 = oracles::rouge2(a, b);
    if (r2.precision != want2.p || r2.recall != want2.r || r2.f1 != want2.f) {
      return bad("rouge2 mismatch on pair " + std::to_string(i));
    }
    if (rouge::rougeL(a, b).f1 != oracles::rougeL(a, b).f) {
      return bad("rougeL mismatch on pair " + std::to_string(i));
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 10.0) return bad(fmt("1000 pairs took %.2f s", secs));
  return ok(fmt("1000 pairs exact, %.3f s", secs));
}

Outcome worked_example() {
  const auto cand = oracles::words("the cat sat on the mat");
  const auto ref = oracles::words("the cat lay on the mat");
  const double r2 = 100 * rouge::rouge2(cand, ref).f1;
  const double rl = 100 * rouge::rougeL(cand, ref).f1;
  const bool good = std::abs(r2 - 60.0) < 0.01 && std::abs(rl - 83.33) < 0.01;
  return {good ? Outcome::pass : Outcome::fail, fmt("R-2 F1 %.2f, R-L F1 %.2f", r2, rl)};
}

Outcome oracle_labeling() {
  using oracles::words;
  const std::vector<oracles::Words> fixture = {words("a b"), words("c d"), words("a b c")};
  const auto ref = words("a b c d");
  const auto got = oracle::build_extractive_labels(oracles::make_sentences(fixture), ref);
  // Score every subset once, then replay the greedy trace against the table:
  // each pick must be the best single addition and the stop must be forced.
  std::vector<double> table(1u << fixture.size());
  for (unsigned mask = 0; mask < table.size(); ++mask) table[mask] = 100 * oracles::subset_f1(fixture, mask, ref);
  unsigned mask = 0;
  for (std::size_t step = 0; step <= got.selected_order.size(); ++step) {
    double best = -1;
    std::size_t pick = fixture.size();
    for (std::size_t s = 0; s < fixture.size(); ++s) {
      if (!(mask & (1u << s)) && table[mask | (1u << s)] > best) {
        best = table[mask | (1u << s)];
        pick = s;
      }
    }
    if (step == got.selected_order.size()) {
      if (pick != fixture.size() && best > table[mask] + 1e-9) return bad("greedy stopped early on the fixture");
      break;
    }
    if (pick != got.selected_order[step] || std::abs(best - got.prefix_f1[step]) > 1e-9) {
      return bad("greedy step " + std::to_string(step) + " disagrees with subset enumeration");
    }
    mask |= 1u << pick;
  }
  if (got.labels != std::vector<int>{0, 1, 1} || got.selected_order != std::vector<std::size_t>{2, 1} ||
      std::abs(got.final_rouge2_f1 - 85.714) > 0.01) {
    return bad("3-sentence fixture labels or final F1 differ");
  }
  const double fixture_optimum = 100 * oracles::best_subset(fixture, ref).second;

  // Synthetic documents: references are stitched from document fragments
  // plus noise words, as abstractive summaries of judgments tend to be.
  std::mt19937 gen(50);
  double worst = 1.0;
  for (int doc = 0; doc < 50; ++doc) {
    const int n = std::uniform_int_distribution<int>(3, 12)(gen);
    std::vector<oracles::Words> sents;
    for (int i = 0; i < n; ++i) {
      auto s = oracles::random_words(gen, 12, 40);
      if (s.size() < 2) s = {"w0", "w1"};
      sents.push_back(s);
    }
    oracles::Words summary;
    const int pieces = std::uniform_int_distribution<int>(1, 4)(gen);
    for (int p = 0; p < pieces; ++p) {
      const auto& src = sents[std::uniform_int_distribution<std::size_t>(0, sents.size() - 1)(gen)];
      const std::size_t from = std::uniform_int_distribution<std::size_t>(0, src.size() - 2)(gen);
      const std::size_t len = std::uniform_int_distribution<std::size_t>(2, 8)(gen);
      for (std::size_t k = from; k < std::min(src.size(), from + len); ++k) summary.push_back(src[k]);
      if (gen() % 2) summary.push_back("noise" + std::to_string(gen() % 50));
    }
    if (summary.size() < 2) summary.push_back(sents[0][0]);

    const auto labels = oracle::build_extractive_labels(oracles::make_sentences(sents), summary);
    for (std::size_t i = 1; i < labels.prefix_f1.size(); ++i) {
      if (labels.prefix_f1[i] < labels.prefix_f1[i - 1]) {
        return bad("prefix F1 decreased in document " + std::to_string(doc));
      }
    }
    const double optimum = 100 * oracles::best_subset(sents, summary).second;
    if (optimum > 0) worst = std::min(worst, labels.final_rouge2_f1 / optimum);
  }
  if (worst < 0.9) return bad(fmt("greedy/optimum ratio fell to %.3f", worst));
  return ok(fmt("fixture trace [S3 %.2f, S2 %.2f] confirmed by subset enumeration (global optimum %.2f); ",
                got.prefix_f1[0], got.prefix_f1[1], fixture_optimum) +
            fmt("50 docs, worst greedy/optimum %.3f", worst));
}

Outcome chunk_round_trip() {
  std::mt19937 gen(500);
  for (int doc = 0; doc < 500; ++doc) {
    const int n_sent = std::uniform_int_distribution<int>(1, 400)(gen);
    std::vector<oracles::Words> sents;
    for (int i = 0; i < n_sent; ++i) {
      oracles::Words s(std::uniform_int_distribution<std::size_t>(1, 40)(gen));
      for (auto& w : s) w = "t" + std::to_string(gen() % 1000);
      sents.push_back(std::move(s));
    }
    const auto sentences = oracles::make_sentences(sents);
    Tokens all;
    for (const auto& s : sents) all.insert(all.end(), s.begin(), s.end());
    for (std::size_t n : {32, 512, 4096}) {
      const auto chunks = chunkalign::chunk_document(sentences, n);
      if (chunks.size() != (all.size() + n - 1) / n) return bad("chunk count is not ceil(len/n)");
      std::size_t cursor = 0;
      std::vector<chunkalign::ChunkOutput> outputs;
      for (auto it = chunks.rbegin(); it != chunks.rend(); ++it) {
        const Tokens piece(all.begin() + static_cast<long>(it->token_span.start),
                           all.begin() + static_cast<long>(it->token_span.end));
        outputs.push_back({it->index, join(piece)});
      }
      for (const auto& c : chunks) {
        if (c.token_span.start != cursor || c.token_span.size() == 0 || c.token_span.size() > n) {
          return bad("spans do not partition the token range");
        }
        cursor = c.token_span.end;
      }
      if (cursor != all.size()) return bad("spans do not cover the document");
      if (chunkalign::reassemble(outputs, chunks.size()) != join(all)) {
        return bad("identity reassembly differs from the document");
      }
    }
  }
  return ok("500 documents x n in {32, 512, 4096}");
}

Outcome span_corruption() {
  corruptor::CorruptionConfig config;
  config.seed = 2024;
  std::mt19937 gen(7);
  double masked_sum = 0;
  const int windows = 10000;
  for (int w = 0; w < windows; ++w) {
    Tokens window(512);
    for (auto& t : window) t = "v" + std::to_string(gen() % 5000);
    const auto sample = corruptor::span_corrupt(window, config, static_cast<std::uint64_t>(w));
    std::size_t sentinels = 0;
    for (const auto& t : sample.input_tokens) sentinels += corruptor::sentinel_index(t).has_value();
    const std::size_t masked = sample.target_tokens.size() - sentinels - 1;
    if (masked != 77) return bad("window " + std::to_string(w) + " masked " + std::to_string(masked));
    if (sample.target_tokens.size() > 128) return bad("target longer than 128");
    if (corruptor::reconstruct(sample) != window) return bad("round trip failed on window " + std::to_string(w));
    masked_sum += static_cast<double>(masked) / 512.0;
  }
  const double mean = masked_sum / windows;
  if (mean < 0.145 || mean > 0.155) return bad(fmt("masked fraction mean %.4f", mean));
  return ok(fmt("10000 windows round-trip, masked fraction %.4f, 77 per window", mean));
}

Outcome language_mixing() {
  std::vector<corpus::CorpusDocument> docs;
  for (int d = 0; d < 2000; ++d) {
    std::string text;
    for (int w = 0; w < 100; ++w) text += "w" + std::to_string(w) + " ";
    docs.push_back({std::to_string(d), text, d % 2 ? Language::hi : Language::en});
  }
  corruptor::PretrainOptions opts;
  opts.objective = corruptor::Objective::next_token;
  opts.ntp_window = 8;
  opts.mix = corruptor::MixPreset::en_hi;
  opts.quota = 10000;
  std::size_t en = 0, hi = 0;
  for (const auto& s : corruptor::build_pretrain_corpus(docs, opts)) (s.language == Language::en ? en : hi)++;
  const bool good = en == 5000 && hi == 5000;
  return {good ? Outcome::pass : Outcome::fail,
          "en " + std::to_string(en) + ", hi " + std::to_string(hi)};
}

Outcome significance() {
  using namespace judge;
  const std::vector<double> a = {2, 3, 4, 5, 6}, b = {1, 1, 1, 1, 1};
  const double pw = wilcoxon_signed_rank(a, b, Alternative::greater).p_value;
  if (pw != 0.03125) return bad(fmt("wilcoxon p %.17g", pw));
  const std::vector<double> x = {1, 2}, y = {3, 4};
  const double pm = mann_whitney_u(x, y, Alternative::less).p_value;
  if (std::abs(pm - 1.0 / 6.0) > 1e-15) return bad(fmt("mann-whitney p %.17g", pm));

  std::mt19937 gen(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double shift = 0.1 * (trial % 8);
    std::vector<double> da(kWilcoxonExactMax), db(kWilcoxonExactMax, 0.0);
    for (auto& d : da) d = shift + noise(gen);
    std::vector<double> ma(kMannWhitneyExactMax / 2), mb(kMannWhitneyExactMax / 2);
    for (auto& v : ma) v = shift + noise(gen);
    for (auto& v : mb) v = noise(gen);
    for (auto alt : {Alternative::greater, Alternative::less}) {
      worst = std::max(worst, std::abs(wilcoxon_signed_rank(da, db, alt, PValueMethod::exact).p_value -
                                       wilcoxon_signed_rank(da, db, alt, PValueMethod::normal).p_value));
      worst = std::max(worst, std::abs(mann_whitney_u(ma, mb, alt, PValueMethod::exact).p_value -
                                       mann_whitney_u(ma, mb, alt, PValueMethod::normal).p_value));
    }
  }
  if (worst > 0.005) return bad(fmt("exact/normal gap %.4f at crossover sizes", worst));
  return ok(fmt("p=0.03125, p=1/6 exact; exact/normal gap %.4f", worst));
}

Outcome metric_identities() {
  provider::StubProvider stub;
  const std::string doc = "The Supreme Court of India heard the appeal filed by the State of Kerala. "
                          "Justice Ram Kumar delivered the judgment. The appeal was dismissed with costs.";
  const std::string summary = "The Supreme Court of India dismissed the appeal. "
                              "Justice Ram Kumar delivered the judgment.";
  const auto x = textseg::tokenize_words(doc);
  const double bs = judge::bertscore_f1(x, x, Language::en, stub);
  const double np = judge::neprec(doc, Language::en, summary, Language::en, stub);
  const auto doc_sents = textseg::split_sentences(doc, Language::en);
  const std::vector<textseg::Sentence> copied = {doc_sents[2], doc_sents[0]};
  const double sc = judge::summa_consistency(doc_sents, copied, stub);
  const bool good = bs == 100.0 && np == 100.0 && sc == 100.0;
  return {good ? Outcome::pass : Outcome::fail,
          fmt("bertscore(x,x)=%.2f, neprec=%.2f, summac(copied)=%.2f", bs, np, sc)};
}

Outcome dataset_reproduction() {
  const char* path = std::getenv("LEXSUM_MILDSUM_DATASET");
  if (path == nullptr || *path == '\0') {
    return {Outcome::skip, "set LEXSUM_MILDSUM_DATASET to the converted JSON-Lines dataset"};
  }
  struct Expect {
    corpus::SplitName split;
    std::size_t pairs;
    double doc, en, hi;
  };
  const Expect expected[] = {{corpus::SplitName::train, 2185, 4655, 753, 674},
                             {corpus::SplitName::validation, 469, 5319, 758, 687},
                             {corpus::SplitName::test, 468, 4473, 760, 664}};
  const auto start = std::chrono::steady_clock::now();
  auto within = [](double got, double want) { return std::abs(got - want) <= 0.05 * want; };
  double coverage = 0, density = 0;
  std::size_t total = 0;
  std::string detail;
  for (const auto& e : expected) {
    const auto en = corpus::load_dataset(path, e.split, Language::en);
    const auto stats_en = corpus::corpus_stats(en);
    corpus::StatsAccumulator hi;
    corpus::DatasetReader reader(path, e.split, Language::hi);
    while (auto pair = reader.next()) {
      hi.add(corpus::PairStats{0, static_cast<double>(textseg::whitespace_word_count(pair->summary.text)), {}});
    }
    const auto stats_hi = hi.report();
    detail += std::string(corpus::to_string(e.split)) + " " + std::to_string(stats_en.n_pairs) +
              fmt(" pairs %.0f/%.0f/%.0f words; ", stats_en.avg_doc_words,
                  stats_en.avg_summary_words, stats_hi.avg_summary_words);
    if (stats_en.n_pairs != e.pairs || !within(stats_en.avg_doc_words, e.doc) ||
        !within(stats_en.avg_summary_words, e.en) || !within(stats_hi.avg_summary_words, e.hi)) {
      return bad(detail);
    }
    coverage += stats_en.avg_coverage * static_cast<double>(stats_en.n_pairs);
    density += stats_en.avg_density * static_cast<double>(stats_en.n_pairs);
    total += stats_en.n_pairs;
  }
  coverage /= static_cast<double>(total);
  density /= static_cast<double>(total);
  detail += fmt("coverage %.3f, density %.2f", coverage, density);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (std::abs(coverage - 0.90) > 0.03 || std::abs(density - 24.42) > 2.0 || secs > 300) return bad(detail);
  return ok(detail);
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> checks[] = {
      {"rouge-oracle-equivalence", rouge_equivalence},
      {"rouge-worked-example", worked_example},
      {"oracle-labeling", oracle_labeling},
      {"chunk-round-trip", chunk_round_trip},
      {"span-corruption", span_corruption},
      {"language-mixing", language_mixing},
      {"significance-tests", significance},
      {"metric-identities", metric_identities},
      {"dataset-reproduction", dataset_reproduction},
  };
  int failures = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = bad(std::string("exception: ") + e.what());
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::skip ? "SKIP" : "FAIL";
    std::printf("%s %s: %s\n", tag, name, o.detail.c_str());
    failures += o.kind == Outcome::fail;
  }
  return failures == 0 ? 0 : 1;
}
