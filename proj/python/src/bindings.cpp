#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lexsum/chunkalign.hpp"
#include "lexsum/cli.hpp"
#include "lexsum/corpus.hpp"
#include "lexsum/corruptor.hpp"
#include "lexsum/judge.hpp"
#include "lexsum/oracle.hpp"
#include "lexsum/rouge.hpp"
#include "lexsum/sigtest.hpp"
#include "lexsum/textseg.hpp"

namespace py = pybind11;
using namespace lexsum;

namespace {

Language lang_of(const std::string& tag) { return parse_language(tag); }

py::dict sentence_dict(const textseg::Sentence& s) {
  py::dict d;
  d["index"] = s.index;
  d["text"] = s.text;
  d["tokens"] = s.tokens;
  d["token_offset"] = s.token_offset;
  d["begin"] = s.begin;
  d["end"] = s.end;
  return d;
}

py::dict score_dict(double p, double r, double f) {
  py::dict d;
  d["precision"] = p;
  d["recall"] = r;
  d["f1"] = f;
  return d;
}

py::dict test_dict(const judge::TestResult& r) {
  py::dict d;
  d["test"] = std::string(judge::to_string(r.test));
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["alternative"] = std::string(judge::to_string(r.alternative));
  d["significant_at_99"] = r.significant_at_99;
  d["exact"] = r.exact;
  d["n"] = r.n;
  return d;
}

judge::PValueMethod method_of(const std::string& name) {
  if (name == "auto") return judge::PValueMethod::automatic;
  if (name == "exact") return judge::PValueMethod::exact;
  if (name == "normal") return judge::PValueMethod::normal;
  throw Error("judge", "unknown p-value method: " + name);
}

corruptor::CorruptionConfig corruption_config(std::size_t sequence_length, double mask_rate,
                                              double mean_span_length,
                                              std::size_t max_target_length, std::uint64_t seed) {
  corruptor::CorruptionConfig config;
  config.sequence_length = sequence_length;
  config.mask_rate = mask_rate;
  config.mean_span_length = mean_span_length;
  config.max_target_length = max_target_length;
  config.seed = seed;
  config.validate();
  return config;
}

}  // namespace

PYBIND11_MODULE(_lexsum, m) {
  m.doc() = "Tokenization, oracle labels, chunking, span corruption and scoring for legal summaries";
  m.attr("__version__") = LEXSUM_VERSION;

  static py::exception<Error> error_type(m, "LexsumError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::reinterpret_borrow<py::object>(error_type.ptr());
      py::object exc = type(e.module() + ": " + e.what());
      exc.attr("module") = e.module();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("nfkc", &textseg::nfkc, py::arg("text"));
  m.def(
      "tokenize",
      [](const std::string& text, const std::string& lang) {
        return textseg::tokenize_words(text, lang_of(lang));
      },
      py::arg("text"), py::arg("lang") = "en");
  m.def(
      "split_sentences",
      [](const std::string& text, const std::string& lang) {
        py::list out;
        for (const auto& s : textseg::split_sentences(text, lang_of(lang))) out.append(sentence_dict(s));
        return out;
      },
      py::arg("text"), py::arg("lang") = "en");

  m.def(
      "rouge2",
      [](const Tokens& candidate, const Tokens& reference) {
        const auto s = rouge::rouge2(candidate, reference);
        return score_dict(s.precision, s.recall, s.f1);
      },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "rougeL",
      [](const Tokens& candidate, const Tokens& reference) {
        const auto s = rouge::rougeL(candidate, reference);
        return score_dict(s.precision, s.recall, s.f1);
      },
      py::arg("candidate"), py::arg("reference"));

  m.def(
      "oracle_labels",
      [](const std::string& document, const std::string& reference, const std::string& lang) {
        const auto sentences = textseg::split_sentences(document, lang_of(lang));
        const auto labels = oracle::build_extractive_labels(
            sentences, textseg::tokenize_words(reference, lang_of(lang)));
        py::dict d;
        d["labels"] = labels.labels;
        d["selected_order"] = labels.selected_order;
        d["prefix_f1"] = labels.prefix_f1;
        d["final_rouge2_f1"] = labels.final_rouge2_f1;
        return d;
      },
      py::arg("document"), py::arg("reference"), py::arg("lang") = "en");

  m.def("chunk_spans", [](std::size_t token_count, std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& s : chunkalign::chunk_spans(token_count, n)) out.emplace_back(s.start, s.end);
    return out;
  }, py::arg("token_count"), py::arg("n"));
  m.def(
      "chunk_document",
      [](const std::string& document, std::size_t n, const std::string& lang) {
        const auto sentences = textseg::split_sentences(document, lang_of(lang));
        py::list out;
        for (const auto& c : chunkalign::chunk_document(sentences, n)) {
          py::dict d;
          d["index"] = c.index;
          d["token_span"] = std::make_pair(c.token_span.start, c.token_span.end);
          d["sentence_indices"] = c.sentence_indices;
          d["m"] = c.m;
          out.append(d);
        }
        return out;
      },
      py::arg("document"), py::arg("n") = 512, py::arg("lang") = "en");
  m.def(
      "reassemble",
      [](const std::vector<std::pair<std::size_t, std::string>>& outputs,
         std::optional<std::size_t> expected_count) {
        std::vector<chunkalign::ChunkOutput> chunks;
        for (const auto& [index, text] : outputs) chunks.push_back({index, text});
        return chunkalign::reassemble(chunks, expected_count);
      },
      py::arg("outputs"), py::arg("expected_count") = py::none());
  m.def("summary_budget", &chunkalign::summary_budget, py::arg("reference_summary_tokens"), py::arg("m"));

  m.def(
      "span_corrupt",
      [](const Tokens& window, std::uint64_t seed, std::uint64_t stream, double mask_rate,
         double mean_span_length, std::size_t max_target_length) {
        const auto config =
            corruption_config(window.size(), mask_rate, mean_span_length, max_target_length, seed);
        const auto s = corruptor::span_corrupt(window, config, stream);
        py::dict d;
        d["input_tokens"] = s.input_tokens;
        d["target_tokens"] = s.target_tokens;
        return d;
      },
      py::arg("window"), py::arg("seed") = 0, py::arg("stream") = 0, py::arg("mask_rate") = 0.15,
      py::arg("mean_span_length") = 3.0, py::arg("max_target_length") = 128);
  m.def(
      "reconstruct",
      [](const Tokens& input_tokens, const Tokens& target_tokens) {
        corruptor::DenoisingSample sample;
        sample.input_tokens = input_tokens;
        sample.target_tokens = target_tokens;
        return corruptor::reconstruct(sample);
      },
      py::arg("input_tokens"), py::arg("target_tokens"));
  m.def(
      "next_token_samples",
      [](const Tokens& stream, std::size_t window) {
        std::vector<Tokens> out;
        for (auto& s : corruptor::next_token_samples(stream, window)) out.push_back(std::move(s.tokens));
        return out;
      },
      py::arg("stream"), py::arg("window") = 128);

  m.def(
      "extractive_fragments",
      [](const Tokens& document, const Tokens& summary) {
        std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
        for (const auto& f : corpus::extractive_fragments(document, summary)) {
          out.emplace_back(f.summary_start, f.doc_start, f.length);
        }
        return out;
      },
      py::arg("document"), py::arg("summary"));
  m.def(
      "coverage_density",
      [](const Tokens& document, const Tokens& summary) {
        const auto cd = corpus::coverage_density(document, summary);
        return std::make_pair(cd.coverage, cd.density);
      },
      py::arg("document"), py::arg("summary"));

  m.def(
      "wilcoxon",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::string& alternative,
         const std::string& method) {
        return test_dict(judge::wilcoxon_signed_rank(a, b, judge::parse_alternative(alternative),
                                                     method_of(method)));
      },
      py::arg("a"), py::arg("b"), py::arg("alternative") = "greater", py::arg("method") = "auto");
  m.def(
      "mann_whitney",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::string& alternative,
         const std::string& method) {
        return test_dict(
            judge::mann_whitney_u(a, b, judge::parse_alternative(alternative), method_of(method)));
      },
      py::arg("a"), py::arg("b"), py::arg("alternative") = "greater", py::arg("method") = "auto");

  // Model metrics against the built-in deterministic stub backend.
  m.def(
      "stub_bertscore",
      [](const std::string& candidate, const std::string& reference, const std::string& lang) {
        provider::StubProvider stub;
        return judge::bertscore_f1(textseg::tokenize_words(candidate, lang_of(lang)),
                                   textseg::tokenize_words(reference, lang_of(lang)), lang_of(lang), stub);
      },
      py::arg("candidate"), py::arg("reference"), py::arg("lang") = "en");
  m.def(
      "stub_neprec",
      [](const std::string& document, const std::string& summary, const std::string& lang) {
        provider::StubProvider stub;
        return judge::neprec(document, lang_of(lang), summary, lang_of(lang), stub);
      },
      py::arg("document"), py::arg("summary"), py::arg("lang") = "en");
  m.def(
      "stub_summac",
      [](const std::string& document, const std::string& summary, const std::string& lang) {
        provider::StubProvider stub;
        return judge::summa_consistency(textseg::split_sentences(document, lang_of(lang)),
                                        textseg::split_sentences(summary, lang_of(lang)), stub);
      },
      py::arg("document"), py::arg("summary"), py::arg("lang") = "en");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
