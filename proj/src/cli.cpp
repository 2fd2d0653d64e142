#include "lexsum/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "lexsum/chunkalign.hpp"
#include "lexsum/corpus.hpp"
#include "lexsum/corruptor.hpp"
#include "lexsum/judge.hpp"
#include "lexsum/manifest.hpp"
#include "lexsum/oracle.hpp"
#include "lexsum/provider.hpp"
#include "lexsum/rouge.hpp"
#include "lexsum/sigtest.hpp"

#ifndef LEXSUM_VERSION
#define LEXSUM_VERSION "0.0.0"
#endif

namespace lexsum::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr int kRecordSchema = corpus::kSchemaVersion;

// Runs `work` over a stream of items on `jobs` threads; results are emitted in
// input order. Only one batch is held in memory at a time.
template <typename In, typename Out>
void ordered_map(const std::function<std::optional<In>()>& next,
                 const std::function<Out(const In&)>& work,
                 const std::function<void(Out&&)>& emit, std::size_t jobs) {
  jobs = std::max<std::size_t>(jobs, 1);
  const std::size_t batch = jobs == 1 ? 1 : jobs * 8;
  while (true) {
    std::vector<In> items;
    while (items.size() < batch) {
      auto item = next();
      if (!item) break;
      items.push_back(std::move(*item));
    }
    if (items.empty()) return;
    std::vector<std::optional<Out>> results(items.size());
    if (jobs == 1) {
      for (std::size_t i = 0; i < items.size(); ++i) results[i] = work(items[i]);
    } else {
      std::atomic<std::size_t> cursor{0};
      std::vector<std::future<void>> workers;
      for (std::size_t t = 0; t < std::min(jobs, items.size()); ++t) {
        workers.push_back(std::async(std::launch::async, [&] {
          for (std::size_t i; (i = cursor++) < items.size();) results[i] = work(items[i]);
        }));
      }
      for (auto& w : workers) w.wait();
      for (auto& w : workers) w.get();
    }
    for (auto& r : results) emit(std::move(*r));
  }
}

/// Output target: a file written via a temporary and renamed on commit, or
/// the caller's stream for "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : path_(path) {
    if (path_ == "-") {
      stream_ = &fallback;
      return;
    }
    tmp_ = path_ + ".tmp";
    if (auto parent = fs::path(path_).parent_path(); !parent.empty()) fs::create_directories(parent);
    file_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!file_) throw Error("cli", "cannot write '" + path_ + "'");
    stream_ = &file_;
  }

  ~Output() {
    if (!committed_ && !tmp_.empty()) {
      file_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return *stream_; }
  bool is_file() const { return path_ != "-"; }
  const std::string& path() const { return path_; }

  void line(const ojson& record) { *stream_ << record.dump() << '\n'; }

  void commit() {
    if (!is_file()) {
      stream_->flush();
      return;
    }
    file_.close();
    if (!file_) throw Error("cli", "failed writing '" + path_ + "'");
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
  bool committed_ = false;
};

struct RunContext {
  std::vector<std::string> argv;
  std::ostream& out;
  std::ostream& err;
};

void finish_run(const RunContext& ctx, const std::string& subcommand, ojson config,
                const std::vector<std::string>& inputs, Output& output,
                std::optional<std::uint64_t> seed, ojson diagnostics = ojson::object()) {
  output.commit();
  if (!output.is_file()) return;
  manifest::RunManifest m;
  m.subcommand = subcommand;
  m.argv = ctx.argv;
  m.config = std::move(config);
  for (const auto& in : inputs) {
    if (!in.empty()) m.input_digests[in] = manifest::sha256_file(in);
  }
  m.output_digests[output.path()] = manifest::sha256_file(output.path());
  m.seed = seed;
  m.tool_version = LEXSUM_VERSION;
  m.diagnostics = std::move(diagnostics);
  manifest::write_manifest(m, manifest::manifest_path_for(output.path()));
}

std::unique_ptr<provider::Provider> require_provider(const std::string& flag,
                                                     const std::string& why,
                                                     std::size_t in_flight) {
  provider::ClientOptions opts;
  opts.max_in_flight = in_flight;
  std::unique_ptr<provider::Provider> p =
      flag.empty() ? provider::provider_from_env(opts) : provider::make_provider(flag, opts);
  if (!p) {
    throw Error("provider", why + " requires a provider backend: set " +
                                std::string(provider::kBackendEnv) +
                                " (stub | subprocess:<command> | http:<url>) or pass --provider");
  }
  return p;
}

std::string chunk_text(const corpus::Judgment& j, const TokenSpan& span) {
  if (span.size() == 0) return {};
  const auto begin = j.token_bytes[span.start].first;
  const auto end = j.token_bytes[span.end - 1].second;
  return j.text.substr(begin, end - begin);
}

std::string read_summary_field(const json& rec, const std::string& path, std::size_t line,
                               Language lang) {
  const std::string dataset_field = "summary_" + std::string(to_string(lang));
  for (const std::string& field : {std::string("summary"), std::string("text"), dataset_field}) {
    if (auto it = rec.find(field); it != rec.end() && it->is_string()) return it->get<std::string>();
  }
  throw Error("cli", path + ":" + std::to_string(line) + ": record needs a 'summary' string");
}

struct IdText {
  std::string id;
  std::string text;
};

std::vector<IdText> read_summaries(const std::string& path, Language lang) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open '" + path + "'");
  std::vector<IdText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
      throw Error("cli", path + ":" + std::to_string(line_no) + ": malformed record");
    }
    out.push_back({rec["id"].get<std::string>(), read_summary_field(rec, path, line_no, lang)});
  }
  if (out.empty()) throw Error("cli", "no records in '" + path + "'");
  return out;
}

// id -> (document text, language) from a dataset file, any split.
std::unordered_map<std::string, std::pair<std::string, Language>> read_documents(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open '" + path + "'");
  std::unordered_map<std::string, std::pair<std::string, Language>> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") ||
        !rec.contains("doc_text")) {
      throw Error("corpus", path + ":" + std::to_string(line_no) + ": malformed record");
    }
    const Language lang = parse_language(rec.value("doc_language", std::string("en")));
    docs[rec["id"].get<std::string>()] = {rec["doc_text"].get<std::string>(), lang};
  }
  return docs;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct DatasetArgs {
  std::string input;
  std::string split = "train";
  std::string lang = "en";
  std::string output = "-";
  std::size_t jobs = 1;
};

void add_dataset_args(CLI::App* sub, DatasetArgs& a) {
  sub->add_option("-i,--input", a.input, "Dataset JSON-Lines file")->required();
  sub->add_option("--split", a.split, "train | validation | test")->capture_default_str();
  sub->add_option("--lang", a.lang, "Summary language: en | hi")->capture_default_str();
  sub->add_option("-o,--output", a.output, "Output path ('-' for stdout)")->capture_default_str();
  sub->add_option("-j,--jobs", a.jobs, "Worker threads")->capture_default_str();
}

ojson dataset_config(const DatasetArgs& a) {
  return {{"input", a.input}, {"split", a.split}, {"lang", a.lang}, {"output", a.output},
          {"jobs", a.jobs}};
}

std::function<std::optional<corpus::DocumentPair>()> pair_source(corpus::DatasetReader& reader) {
  return [&reader] { return reader.next(); };
}

void cmd_stats(const RunContext& ctx, const DatasetArgs& a) {
  corpus::DatasetReader reader(a.input, corpus::parse_split(a.split), parse_language(a.lang));
  corpus::StatsAccumulator acc;
  ordered_map<corpus::DocumentPair, corpus::PairStats>(
      pair_source(reader), [](const corpus::DocumentPair& p) { return corpus::measure_pair(p); },
      [&](corpus::PairStats&& s) { acc.add(s); }, a.jobs);
  const auto report = acc.report();

  Output output(a.output, ctx.out);
  ojson j;
  j["schema_version"] = kRecordSchema;
  j["split"] = a.split;
  j["summary_language"] = a.lang;
  j["n_pairs"] = report.n_pairs;
  j["avg_doc_words"] = report.avg_doc_words;
  j["avg_summary_words"] = report.avg_summary_words;
  j["avg_coverage"] = report.avg_coverage;
  j["avg_density"] = report.avg_density;
  output.stream() << j.dump(2) << '\n';
  finish_run(ctx, "stats", dataset_config(a), {a.input}, output, std::nullopt);
}

void cmd_oracle(const RunContext& ctx, const DatasetArgs& a) {
  corpus::DatasetReader reader(a.input, corpus::parse_split(a.split), parse_language(a.lang));
  Output output(a.output, ctx.out);
  std::size_t docs = 0, degenerate = 0;
  ordered_map<corpus::DocumentPair, oracle::ExtractiveLabelSet>(
      pair_source(reader),
      [](const corpus::DocumentPair& p) {
        try {
          return oracle::build_extractive_labels(p.judgment.sentences, p.summary.tokens,
                                                 p.judgment.id);
        } catch (const Error& e) {
          throw Error(e.module(), "document '" + p.judgment.id + "': " + e.what());
        }
      },
      [&](oracle::ExtractiveLabelSet&& labels) {
        ++docs;
        if (labels.selected_order.empty()) ++degenerate;
        ojson rec;
        rec["schema_version"] = kRecordSchema;
        rec["id"] = labels.judgment_id;
        rec["labels"] = labels.labels;
        rec["selected_order"] = labels.selected_order;
        rec["final_rouge2_f1"] = labels.final_rouge2_f1;
        rec["degenerate"] = labels.selected_order.empty();
        output.line(rec);
      },
      a.jobs);
  finish_run(ctx, "oracle", dataset_config(a), {a.input}, output, std::nullopt,
             {{"documents", docs}, {"degenerate_documents", degenerate}});
}

struct ChunkArgs {
  DatasetArgs data;
  std::size_t n = 512;
  std::optional<std::size_t> fixed_budget;
  std::string provider;
  std::size_t in_flight = 8;
};

ojson chunk_config(const ChunkArgs& a) {
  ojson c = dataset_config(a.data);
  c["n"] = a.n;
  c["fixed_budget"] = a.fixed_budget ? ojson(*a.fixed_budget) : ojson(nullptr);
  return c;
}

void cmd_chunk(const RunContext& ctx, const ChunkArgs& a) {
  if (a.n == 0) throw Error("cli", "--n must be >= 1");
  corpus::DatasetReader reader(a.data.input, corpus::parse_split(a.data.split),
                               parse_language(a.data.lang));
  Output output(a.data.output, ctx.out);
  std::size_t docs = 0, chunks_total = 0;
  while (auto pair = reader.next()) {
    const auto& j = pair->judgment;
    const auto chunks = chunkalign::chunk_document(j.sentences, a.n, j.id);
    const std::size_t budget =
        a.fixed_budget ? *a.fixed_budget
                       : chunkalign::summary_budget(pair->summary.tokens.size(), chunks.size());
    for (const auto& c : chunks) {
      ojson rec;
      rec["schema_version"] = kRecordSchema;
      rec["id"] = c.judgment_id;
      rec["chunk_index"] = c.index;
      rec["m"] = c.m;
      rec["n"] = c.n;
      rec["token_start"] = c.token_span.start;
      rec["token_end"] = c.token_span.end;
      rec["sentence_indices"] = c.sentence_indices;
      rec["summary_budget"] = budget;
      rec["chunk_text"] = chunk_text(j, c.token_span);
      output.line(rec);
    }
    ++docs;
    chunks_total += chunks.size();
  }
  finish_run(ctx, "chunk", chunk_config(a), {a.data.input}, output, std::nullopt,
             {{"documents", docs}, {"chunks", chunks_total}});
}

void cmd_align(const RunContext& ctx, const ChunkArgs& a) {
  if (a.n == 0) throw Error("cli", "--n must be >= 1");
  auto embedder = require_provider(a.provider, "align (sentence mapping)", a.in_flight);
  corpus::DatasetReader reader(a.data.input, corpus::parse_split(a.data.split),
                               parse_language(a.data.lang));
  Output output(a.data.output, ctx.out);

  struct Aligned {
    corpus::DocumentPair pair;
    chunkalign::PairingResult result;
  };
  std::size_t docs = 0, pairs = 0, dropped = 0;
  ordered_map<corpus::DocumentPair, Aligned>(
      pair_source(reader),
      [&](const corpus::DocumentPair& p) {
        try {
          const auto chunks = chunkalign::chunk_document(p.judgment.sentences, a.n, p.judgment.id);
          const auto mapping = chunkalign::map_summary_sentences(
              p.judgment.sentences, p.judgment.language, p.summary.sentences, p.summary.language,
              *embedder);
          return Aligned{p, chunkalign::build_chunk_pairs(chunks, mapping, p.judgment.sentences,
                                                          p.summary.sentences)};
        } catch (const Error& e) {
          throw Error(e.module(), "document '" + p.judgment.id + "': " + e.what());
        }
      },
      [&](Aligned&& al) {
        ++docs;
        dropped += al.result.dropped_chunks.size();
        for (const auto& ap : al.result.pairs) {
          ojson rec;
          rec["schema_version"] = kRecordSchema;
          rec["id"] = ap.chunk.judgment_id;
          rec["chunk_index"] = ap.chunk.index;
          rec["m"] = ap.chunk.m;
          rec["n"] = ap.chunk.n;
          rec["chunk_text"] = chunk_text(al.pair.judgment, ap.chunk.token_span);
          rec["summary_text"] = ap.summary_text;
          rec["summary_sentence_indices"] = ap.summary_sentence_indices;
          output.line(rec);
          ++pairs;
        }
      },
      a.data.jobs);
  ojson diagnostics = {{"documents", docs}, {"pairs", pairs}, {"dropped_chunks", dropped}};
  ctx.err << ojson{{"diagnostics", diagnostics}}.dump() << '\n';
  ojson config = chunk_config(a);
  config["provider"] = embedder->info().backend;
  finish_run(ctx, "align", config, {a.data.input}, output, std::nullopt, diagnostics);
}

struct PretrainArgs {
  std::string input;
  std::string mix = "en";
  std::optional<std::size_t> quota;
  std::uint64_t seed = 0;
  std::string output = "-";
  corruptor::CorruptionConfig config;
  std::size_t window = 128;
};

ojson pretrain_config(const PretrainArgs& a, bool denoise) {
  ojson c = {{"input", a.input},
             {"mix", a.mix},
             {"quota", a.quota ? ojson(*a.quota) : ojson(nullptr)},
             {"seed", a.seed},
             {"output", a.output}};
  if (denoise) {
    c["seq_len"] = a.config.sequence_length;
    c["mask_rate"] = a.config.mask_rate;
    c["mean_span"] = a.config.mean_span_length;
    c["max_target"] = a.config.max_target_length;
  } else {
    c["window"] = a.window;
  }
  return c;
}

void cmd_pretrain(const RunContext& ctx, const PretrainArgs& a, corruptor::Objective objective) {
  const bool denoise = objective == corruptor::Objective::span_corruption;
  corruptor::PretrainOptions opts;
  opts.objective = objective;
  opts.config = a.config;
  opts.config.seed = a.seed;
  opts.ntp_window = a.window;
  opts.mix = corruptor::parse_mix(a.mix);
  opts.quota = a.quota;

  // One reader per language stream over the same file.
  std::vector<std::unique_ptr<corpus::CorpusReader>> readers;
  auto sources = [&](Language) -> corruptor::DocumentSource {
    readers.push_back(std::make_unique<corpus::CorpusReader>(a.input));
    corpus::CorpusReader* r = readers.back().get();
    return [r] { return r->next(); };
  };

  Output output(a.output, ctx.out);
  std::map<std::string, std::size_t> per_language;
  corruptor::build_pretrain_corpus(sources, opts, [&](const corruptor::PretrainSample& s) {
    ojson rec;
    rec["schema_version"] = kRecordSchema;
    rec["language"] = std::string(to_string(s.language));
    if (const auto* d = std::get_if<corruptor::DenoisingSample>(&s.sample)) {
      rec["input"] = join(d->input_tokens);
      rec["target"] = join(d->target_tokens);
      rec["source_window"] = {d->source_window.start, d->source_window.end};
    } else {
      const auto& t = std::get<corruptor::NextTokenSample>(s.sample);
      rec["tokens"] = join(t.tokens);
      rec["source_window"] = {t.source_window.start, t.source_window.end};
    }
    output.line(rec);
    ++per_language[rec["language"].get<std::string>()];
  });
  finish_run(ctx, denoise ? "corrupt" : "ntp", pretrain_config(a, denoise), {a.input}, output,
             a.seed, {{"samples_per_language", per_language}});
}

struct ScoreArgs {
  std::string system;
  std::string reference;
  std::string documents;
  std::string lang = "en";
  std::string metrics = "r2,rL";
  std::string output = "-";
  std::string provider;
  std::size_t jobs = 1;
  std::size_t in_flight = 8;
};

void cmd_score(const RunContext& ctx, const ScoreArgs& a) {
  const Language lang = parse_language(a.lang);
  const auto metrics = split_csv(a.metrics);
  bool needs_provider = false, needs_docs = false;
  for (const auto& m : metrics) {
    if (m != "r2" && m != "rL" && m != "bertscore" && m != "neprec" && m != "summac") {
      throw Error("cli", "unknown metric '" + m + "' (r2, rL, bertscore, neprec, summac)");
    }
    if (m == "bertscore" || m == "neprec" || m == "summac") needs_provider = true;
    if (m == "neprec" || m == "summac") needs_docs = true;
  }
  if (metrics.empty()) throw Error("cli", "no metrics requested");

  std::unique_ptr<provider::Provider> backend;
  if (needs_provider) {
    std::string which;
    for (const auto& m : metrics) {
      if (m == "bertscore" || m == "neprec" || m == "summac") which += (which.empty() ? "" : ", ") + m;
    }
    backend = require_provider(a.provider, "metric(s) " + which, a.in_flight);
  }
  if (needs_docs && a.documents.empty()) {
    throw Error("cli", "neprec/summac need the source documents (--documents)");
  }

  const auto system = read_summaries(a.system, lang);
  std::unordered_map<std::string, std::string> references;
  for (auto& r : read_summaries(a.reference, lang)) references[r.id] = std::move(r.text);
  std::unordered_map<std::string, std::pair<std::string, Language>> documents;
  if (!a.documents.empty()) documents = read_documents(a.documents);

  Output output(a.output, ctx.out);
  std::map<std::string, double> sums;
  std::size_t scored = 0;
  std::size_t cursor = 0;

  ordered_map<IdText, judge::ScoreReport>(
      [&]() -> std::optional<IdText> {
        if (cursor >= system.size()) return std::nullopt;
        return system[cursor++];
      },
      [&](const IdText& sys) {
        auto ref = references.find(sys.id);
        if (ref == references.end()) throw Error("cli", "no reference summary for '" + sys.id + "'");
        judge::ScoreReport report;
        report.judgment_id = sys.id;
        const auto cand = textseg::tokenize_words(sys.text, lang);
        const auto gold = textseg::tokenize_words(ref->second, lang);
        const std::pair<std::string, Language>* doc = nullptr;
        if (needs_docs) {
          auto it = documents.find(sys.id);
          if (it == documents.end()) throw Error("cli", "no source document for '" + sys.id + "'");
          doc = &it->second;
        }
        for (const auto& m : metrics) {
          if (m == "r2") {
            report.values[m] = 100.0 * rouge::rouge2(cand, gold).f1;
          } else if (m == "rL") {
            report.values[m] = 100.0 * rouge::rougeL(cand, gold).f1;
          } else if (m == "bertscore") {
            report.values[m] = cand.empty() || gold.empty()
                                   ? 0.0
                                   : judge::bertscore_f1(cand, gold, lang, *backend);
          } else if (m == "neprec") {
            report.values[m] = judge::neprec(doc->first, doc->second, sys.text, lang, *backend);
          } else if (m == "summac") {
            const auto doc_sents = textseg::split_sentences(doc->first, doc->second);
            const auto sum_sents = textseg::split_sentences(sys.text, lang);
            report.values[m] = judge::summa_consistency(doc_sents, sum_sents, *backend);
          }
        }
        return report;
      },
      [&](judge::ScoreReport&& report) {
        ++scored;
        for (const auto& [k, v] : report.values) sums[k] += v;
        ojson rec;
        rec["schema_version"] = kRecordSchema;
        rec["id"] = report.judgment_id;
        ojson scores = ojson::object();
        for (const auto& m : metrics) scores[m] = report.values[m];
        rec["scores"] = scores;
        output.line(rec);
      },
      a.jobs);

  ojson means = ojson::object();
  for (const auto& m : metrics) means[m] = sums[m] / static_cast<double>(scored);
  ojson summary = {{"documents", scored}, {"means", means}};
  if (output.is_file()) ctx.out << summary.dump(2) << '\n';

  ojson config = {{"system", a.system},     {"reference", a.reference}, {"documents", a.documents},
                  {"lang", a.lang},         {"metrics", a.metrics},     {"output", a.output},
                  {"jobs", a.jobs}};
  if (backend) config["provider"] = backend->info().backend;
  finish_run(ctx, "score", config, {a.system, a.reference, a.documents}, output, std::nullopt,
             summary);
}

struct SigtestArgs {
  std::string file_a;
  std::string file_b;
  std::string test = "wilcoxon";
  std::string alt = "greater";
  std::string metric;
  std::string method = "auto";
  std::string output = "-";
};

std::vector<std::pair<std::string, double>> read_scores(const std::string& path,
                                                        std::string& metric) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "cannot open score file '" + path + "'");
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json rec = json::parse(line, nullptr, false);
    const auto where = path + ":" + std::to_string(line_no);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec.contains("scores") ||
        !rec["scores"].is_object()) {
      throw Error("cli", where + ": expected {\"id\":...,\"scores\":{...}}");
    }
    const json& scores = rec["scores"];
    if (metric.empty()) {
      if (scores.size() != 1) throw Error("cli", where + ": several metrics present; pass --metric");
      metric = scores.begin().key();
    }
    if (!scores.contains(metric) || !scores[metric].is_number()) {
      throw Error("cli", where + ": no numeric score for metric '" + metric + "'");
    }
    out.emplace_back(rec["id"].get<std::string>(), scores[metric].get<double>());
  }
  if (out.empty()) throw Error("cli", "no records in '" + path + "'");
  return out;
}

void cmd_sigtest(const RunContext& ctx, const SigtestArgs& a) {
  const auto test = judge::parse_test(a.test);
  const auto alt = judge::parse_alternative(a.alt);
  judge::PValueMethod method = judge::PValueMethod::automatic;
  if (a.method == "exact") method = judge::PValueMethod::exact;
  else if (a.method == "normal") method = judge::PValueMethod::normal;
  else if (a.method != "auto") throw Error("cli", "unknown --method '" + a.method + "'");

  std::string metric = a.metric;
  const auto scores_a = read_scores(a.file_a, metric);
  const auto scores_b = read_scores(a.file_b, metric);

  std::vector<double> xs, ys;
  if (test == judge::TestKind::wilcoxon_signed_rank) {
    std::unordered_map<std::string, double> by_id(scores_b.begin(), scores_b.end());
    for (const auto& [id, v] : scores_a) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("cli", "document '" + id + "' missing from " + a.file_b);
      xs.push_back(v);
      ys.push_back(it->second);
    }
    if (by_id.size() != scores_a.size()) {
      throw Error("cli", "paired score files cover different documents");
    }
  } else {
    for (const auto& [id, v] : scores_a) xs.push_back(v);
    for (const auto& [id, v] : scores_b) ys.push_back(v);
  }

  const auto result = test == judge::TestKind::wilcoxon_signed_rank
                          ? judge::wilcoxon_signed_rank(xs, ys, alt, method)
                          : judge::mann_whitney_u(xs, ys, alt, method);
  Output output(a.output, ctx.out);
  ojson j;
  j["schema_version"] = kRecordSchema;
  j["test"] = std::string(judge::to_string(result.test));
  j["metric"] = metric;
  j["statistic"] = result.statistic;
  j["p_value"] = result.p_value;
  j["alternative"] = std::string(judge::to_string(result.alternative));
  j["significant_at_99"] = result.significant_at_99;
  j["exact"] = result.exact;
  j["n"] = result.n;
  output.stream() << j.dump(2) << '\n';
  finish_run(ctx, "sigtest",
             {{"a", a.file_a}, {"b", a.file_b}, {"test", a.test}, {"alt", a.alt},
              {"metric", metric}, {"method", a.method}, {"output", a.output}},
             {a.file_a, a.file_b}, output, std::nullopt);
}

void cmd_reassemble(const RunContext& ctx, const std::string& input, const std::string& out_path) {
  std::ifstream in(input);
  if (!in) throw Error("cli", "cannot open '" + input + "'");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<chunkalign::ChunkOutput>> groups;
  std::unordered_map<std::string, std::size_t> expected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("id") || !rec.contains("chunk_index") ||
        !rec.contains("text")) {
      throw Error("cli", input + ":" + std::to_string(line_no) +
                             ": expected {\"id\",\"chunk_index\",\"text\"}");
    }
    const auto id = rec["id"].get<std::string>();
    if (!groups.count(id)) order.push_back(id);
    groups[id].push_back({rec["chunk_index"].get<std::size_t>(), rec["text"].get<std::string>()});
    if (rec.contains("m")) expected[id] = rec["m"].get<std::size_t>();
  }
  Output output(out_path, ctx.out);
  for (const auto& id : order) {
    std::optional<std::size_t> m;
    if (auto it = expected.find(id); it != expected.end()) m = it->second;
    std::string text;
    try {
      text = chunkalign::reassemble(groups[id], m);
    } catch (const Error& e) {
      throw Error("chunkalign", "document '" + id + "': " + e.what());
    }
    output.line(ojson{{"schema_version", kRecordSchema}, {"id", id}, {"summary", text}});
  }
  finish_run(ctx, "reassemble", {{"input", input}, {"output", out_path}}, {input}, output,
             std::nullopt);
}

void cmd_providers_check(const RunContext& ctx, const std::string& flag) {
  auto backend = require_provider(flag, "providers-check", 8);
  const auto info = backend->info();
  ojson j;
  j["ok"] = true;
  j["backend"] = info.backend;
  j["dim"] = info.dim;
  j["models"] = ojson::parse(info.models.dump());
  ctx.out << j.dump(2) << '\n';
}

int cmd_replay(const RunContext& ctx, const std::string& manifest_path);

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lexsum: data preparation and evaluation for legal document summarization"};
  app.set_version_flag("--version", std::string(LEXSUM_VERSION));
  app.require_subcommand(1);

  RunContext ctx{args, out, err};

  DatasetArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Corpus statistics and extractive fragment coverage/density");
  add_dataset_args(stats, stats_args);

  DatasetArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "Greedy ROUGE-2 extractive sentence labels");
  add_dataset_args(oracle_cmd, oracle_args);

  ChunkArgs chunk_args;
  auto* chunk = app.add_subcommand("chunk", "Split documents into token-budget chunks");
  add_dataset_args(chunk, chunk_args.data);
  chunk->add_option("--n", chunk_args.n, "Chunk budget in word tokens")->capture_default_str();
  chunk->add_option("--fixed-budget", chunk_args.fixed_budget,
                    "Per-chunk summary length t for every document (default: per document)");

  ChunkArgs align_args;
  auto* align = app.add_subcommand("align", "Chunk-level fine-tuning pairs via sentence mapping");
  add_dataset_args(align, align_args.data);
  align->add_option("--n", align_args.n, "Chunk budget in word tokens")->capture_default_str();
  align->add_option("--provider", align_args.provider, "Provider backend (overrides env)");
  align->add_option("--in-flight", align_args.in_flight, "Provider requests in flight")
      ->capture_default_str();

  PretrainArgs corrupt_args;
  auto* corrupt = app.add_subcommand("corrupt", "Span-corruption denoising samples");
  corrupt->add_option("-i,--input", corrupt_args.input, "Corpus JSON-Lines {id,text,language}")
      ->required();
  corrupt->add_option("--mix", corrupt_args.mix, "en | hi | en+hi")->capture_default_str();
  corrupt->add_option("--quota", corrupt_args.quota, "Total samples (split equally for en+hi)");
  corrupt->add_option("--seed", corrupt_args.seed, "Random seed")->capture_default_str();
  corrupt->add_option("-o,--output", corrupt_args.output, "Output path")->capture_default_str();
  corrupt->add_option("--seq-len", corrupt_args.config.sequence_length, "Window length in tokens")->capture_default_str();
  corrupt->add_option("--mask-rate", corrupt_args.config.mask_rate, "Fraction of tokens masked")->capture_default_str();
  corrupt->add_option("--mean-span", corrupt_args.config.mean_span_length, "Mean masked span length")->capture_default_str();
  corrupt->add_option("--max-target", corrupt_args.config.max_target_length, "Target length cap")->capture_default_str();

  PretrainArgs ntp_args;
  auto* ntp = app.add_subcommand("ntp", "Next-token prediction windows");
  ntp->add_option("-i,--input", ntp_args.input, "Corpus JSON-Lines {id,text,language}")->required();
  ntp->add_option("--mix", ntp_args.mix, "en | hi | en+hi")->capture_default_str();
  ntp->add_option("--quota", ntp_args.quota, "Total samples (split equally for en+hi)");
  ntp->add_option("--seed", ntp_args.seed, "Seed for the language interleaving")
      ->capture_default_str();
  ntp->add_option("--window", ntp_args.window, "Window length in tokens")->capture_default_str();
  ntp->add_option("-o,--output", ntp_args.output, "Output path")->capture_default_str();

  ScoreArgs score_args;
  auto* score = app.add_subcommand("score", "Per-document ROUGE / BERTScore / NEPrec / SummaC");
  score->add_option("--system", score_args.system, "System summaries {id,summary}")->required();
  score->add_option("--reference", score_args.reference, "Reference summaries {id,summary}")
      ->required();
  score->add_option("--documents", score_args.documents, "Dataset file with source documents");
  score->add_option("--lang", score_args.lang, "Summary language")->capture_default_str();
  score->add_option("--metrics", score_args.metrics, "Comma-separated metrics")
      ->capture_default_str();
  score->add_option("-o,--output", score_args.output, "Per-document scores")->capture_default_str();
  score->add_option("--provider", score_args.provider, "Provider backend (overrides env)");
  score->add_option("-j,--jobs", score_args.jobs, "Worker threads")->capture_default_str();
  score->add_option("--in-flight", score_args.in_flight, "Provider requests in flight")->capture_default_str();

  SigtestArgs sig_args;
  auto* sig = app.add_subcommand("sigtest", "Wilcoxon signed-rank / Mann-Whitney U on score files");
  sig->add_option("a", sig_args.file_a, "Scores of the system under test")->required();
  sig->add_option("b", sig_args.file_b, "Scores of the baseline")->required();
  sig->add_option("--test", sig_args.test, "wilcoxon | mannwhitney")->capture_default_str();
  sig->add_option("--alt", sig_args.alt, "greater | less | two_sided")->capture_default_str();
  sig->add_option("--metric", sig_args.metric, "Metric key in the score files");
  sig->add_option("--method", sig_args.method, "auto | exact | normal")->capture_default_str();
  sig->add_option("-o,--output", sig_args.output, "Output path")->capture_default_str();

  std::string reassemble_in, reassemble_out = "-";
  auto* reassemble = app.add_subcommand("reassemble", "Concatenate chunk-wise summaries per document");
  reassemble->add_option("-i,--input", reassemble_in, "{id,chunk_index,text[,m]} records")->required();
  reassemble->add_option("-o,--output", reassemble_out)->capture_default_str();

  std::string check_provider;
  auto* check = app.add_subcommand("providers-check", "Handshake with the configured provider");
  check->add_option("--provider", check_provider, "Provider backend (overrides env)");

  app.add_subcommand("serve-stub", "Serve the deterministic stub provider on stdin/stdout");

  std::string replay_manifest;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  replay->add_option("manifest", replay_manifest, "Manifest written next to an output")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << LEXSUM_VERSION << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << ojson{{"error", {{"module", "cli"}, {"message", std::string(e.what())}}}}.dump() << '\n';
    return 2;
  }

  if (stats->parsed()) cmd_stats(ctx, stats_args);
  else if (oracle_cmd->parsed()) cmd_oracle(ctx, oracle_args);
  else if (chunk->parsed()) cmd_chunk(ctx, chunk_args);
  else if (align->parsed()) cmd_align(ctx, align_args);
  else if (corrupt->parsed()) cmd_pretrain(ctx, corrupt_args, corruptor::Objective::span_corruption);
  else if (ntp->parsed()) cmd_pretrain(ctx, ntp_args, corruptor::Objective::next_token);
  else if (score->parsed()) cmd_score(ctx, score_args);
  else if (sig->parsed()) cmd_sigtest(ctx, sig_args);
  else if (reassemble->parsed()) cmd_reassemble(ctx, reassemble_in, reassemble_out);
  else if (check->parsed()) cmd_providers_check(ctx, check_provider);
  else if (app.got_subcommand("serve-stub")) {
    provider::StubProvider stub;
    provider::serve(stub, std::cin, out);
  } else if (replay->parsed()) {
    return cmd_replay(ctx, replay_manifest);
  }
  return 0;
}

int cmd_replay(const RunContext& ctx, const std::string& manifest_path) {
  const auto original = manifest::read_manifest(manifest_path);
  if (original.subcommand == "replay") throw Error("cli", "refusing to replay a replay");
  for (const auto& [path, digest] : original.input_digests) {
    if (manifest::sha256_file(path) != digest) {
      throw Error("cli", "input '" + path + "' changed since the manifest was written");
    }
  }
  std::ostringstream sink_out, sink_err;
  const int code = dispatch(original.argv, sink_out, sink_err);
  if (code != 0) {
    ctx.err << sink_err.str();
    return code;
  }
  ojson report = {{"manifest", manifest_path}, {"identical", true}, {"outputs", ojson::object()}};
  for (const auto& [path, digest] : original.output_digests) {
    const auto now = manifest::sha256_file(path);
    report["outputs"][path] = {{"expected", digest}, {"actual", now}};
    if (now != digest) report["identical"] = false;
  }
  ctx.out << report.dump(2) << '\n';
  return report["identical"].get<bool>() ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << ojson{{"error", {{"module", e.module()}, {"message", std::string(e.what())}}}}.dump()
        << '\n';
  } catch (const std::exception& e) {
    err << ojson{{"error", {{"module", "internal"}, {"message", std::string(e.what())}}}}.dump()
        << '\n';
  }
  return 1;
}

}  // namespace lexsum::cli
