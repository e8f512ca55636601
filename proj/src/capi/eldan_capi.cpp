// Copyright 2026 The ELDAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eldan/eldan.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eldan/autodiff.hpp"
#include "eldan/corpus.hpp"
#include "eldan/error.hpp"
#include "eldan/eval.hpp"
#include "eldan/model.hpp"
#include "eldan/synthgen.hpp"
#include "eldan/train.hpp"

struct eldan_corpus {
  eldan::Corpus corpus;
};

struct eldan_model {
  eldan::ModelParams params;
};

namespace {

thread_local std::string g_last_error;

eldan_status to_status(eldan::ErrorCode code) {
  switch (code) {
    case eldan::ErrorCode::kInvalidArgument: return ELDAN_ERR_INVALID_ARGUMENT;
    case eldan::ErrorCode::kParse: return ELDAN_ERR_PARSE;
    case eldan::ErrorCode::kNotFound: return ELDAN_ERR_NOT_FOUND;
    case eldan::ErrorCode::kIo: return ELDAN_ERR_IO;
    case eldan::ErrorCode::kNumeric: return ELDAN_ERR_NUMERIC;
    case eldan::ErrorCode::kCorrupt: return ELDAN_ERR_CORRUPT;
    case eldan::ErrorCode::kShapeMismatch: return ELDAN_ERR_SHAPE_MISMATCH;
    case eldan::ErrorCode::kInternal: return ELDAN_ERR_INTERNAL;
  }
  return ELDAN_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into a status plus a thread-local message.
template <class Fn>
eldan_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return ELDAN_OK;
  } catch (const eldan::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return ELDAN_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ELDAN_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void need(const void* p, const char* what) {
  if (!p) eldan::fail(eldan::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

nlohmann::ordered_json prf_json(const eldan::PRFReport& r) {
  nlohmann::ordered_json j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  if (r.defined) {
    j["f1"] = r.f1;
  } else {
    j["f1"] = nullptr;
  }
  j["n_enc"] = r.n_enc;
  j["n_doc"] = r.n_doc;
  j["n_source"] = r.n_source;
  return j;
}

std::string stats_tsv(const eldan::Corpus& corpus) {
  std::ostringstream out;
  out << "code\tprevalence\tmean_docs\tcarriers\n";
  char buf[128];
  for (const auto& s : eldan::code_stats(corpus)) {
    std::snprintf(buf, sizeof buf, "\t%.9g\t%.9g\t%zu\n", s.prevalence, s.mean_docs, s.carriers);
    out << s.code << buf;
  }
  return out.str();
}

eldan::TrainConfig train_config(const char* json) {
  return json ? eldan::parse_train_config(json) : eldan::TrainConfig{};
}

}  // namespace

extern "C" {

const char* eldan_version(void) { return "1.0.0"; }

const char* eldan_status_string(eldan_status status) {
  switch (status) {
    case ELDAN_OK: return "ok";
    case ELDAN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ELDAN_ERR_PARSE: return "parse error";
    case ELDAN_ERR_NOT_FOUND: return "not found";
    case ELDAN_ERR_IO: return "i/o error";
    case ELDAN_ERR_NUMERIC: return "numeric error";
    case ELDAN_ERR_CORRUPT: return "corrupt file";
    case ELDAN_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case ELDAN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* eldan_last_error(void) { return g_last_error.c_str(); }

void eldan_string_free(char* s) { std::free(s); }

eldan_status eldan_corpus_load(const char* jsonl_path, const char* manifest_path,
                               eldan_corpus** out) {
  return guarded([&] {
    need(jsonl_path, "jsonl_path");
    need(manifest_path, "manifest_path");
    need(out, "out");
    *out = new eldan_corpus{eldan::load_corpus(jsonl_path, manifest_path)};
  });
}

eldan_status eldan_corpus_parse(const char* jsonl, size_t jsonl_len, const char* manifest_json,
                                eldan_corpus** out) {
  return guarded([&] {
    need(jsonl, "jsonl");
    need(manifest_json, "manifest_json");
    need(out, "out");
    std::istringstream mstream(manifest_json);
    const auto manifest = eldan::parse_manifest(mstream);
    std::istringstream in(std::string(jsonl, jsonl_len));
    *out = new eldan_corpus{eldan::parse_corpus(in, manifest)};
  });
}

eldan_status eldan_corpus_save(const eldan_corpus* corpus, const char* jsonl_path,
                               const char* manifest_path) {
  return guarded([&] {
    need(corpus, "corpus");
    need(jsonl_path, "jsonl_path");
    need(manifest_path, "manifest_path");
    eldan::save_corpus(corpus->corpus, jsonl_path, manifest_path);
  });
}

eldan_status eldan_corpus_serialize(const eldan_corpus* corpus, char** jsonl) {
  return guarded([&] {
    need(corpus, "corpus");
    need(jsonl, "jsonl");
    std::ostringstream out;
    eldan::write_corpus(corpus->corpus, out);
    *jsonl = dup_string(out.str());
  });
}

void eldan_corpus_free(eldan_corpus* corpus) { delete corpus; }

size_t eldan_corpus_encounter_count(const eldan_corpus* corpus) {
  return corpus ? corpus->corpus.encounters.size() : 0;
}

size_t eldan_corpus_document_count(const eldan_corpus* corpus) {
  if (!corpus) return 0;
  size_t n = 0;
  for (const auto& e : corpus->corpus.encounters) n += e.documents.size();
  return n;
}

uint32_t eldan_corpus_feature_dim(const eldan_corpus* corpus) {
  return corpus ? corpus->corpus.feature_dim : 0;
}

int eldan_corpus_has_code(const eldan_corpus* corpus, const char* code) {
  return corpus && code && corpus->corpus.code_vocab.contains(code) ? 1 : 0;
}

eldan_status eldan_corpus_generate(const char* gen_config_json, uint64_t seed, eldan_corpus** out,
                                   char** warnings) {
  return guarded([&] {
    need(gen_config_json, "gen_config_json");
    need(out, "out");
    auto result = eldan::generate(eldan::parse_gen_config(gen_config_json), seed);
    if (warnings) {
      std::string text;
      for (const auto& w : result.warnings) text += w + "\n";
      *warnings = dup_string(text);
    }
    *out = new eldan_corpus{std::move(result.corpus)};
  });
}

eldan_status eldan_corpus_split(const eldan_corpus* corpus, double r_train, double r_dev,
                                double r_test, uint64_t seed, eldan_corpus** train,
                                eldan_corpus** dev, eldan_corpus** test) {
  return guarded([&] {
    need(corpus, "corpus");
    need(train, "train");
    need(dev, "dev");
    need(test, "test");
    auto parts = eldan::split_corpus(corpus->corpus, {r_train, r_dev, r_test}, seed);
    auto* a = new eldan_corpus{std::move(parts.train)};
    auto* b = new eldan_corpus{std::move(parts.dev)};
    auto* c = new eldan_corpus{std::move(parts.test)};
    *train = a;
    *dev = b;
    *test = c;
  });
}

eldan_status eldan_corpus_code_stats(const eldan_corpus* corpus, char** tsv) {
  return guarded([&] {
    need(corpus, "corpus");
    need(tsv, "tsv");
    *tsv = dup_string(stats_tsv(corpus->corpus));
  });
}

eldan_status eldan_corpus_ranked_codes(const eldan_corpus* corpus, char** lines) {
  return guarded([&] {
    need(corpus, "corpus");
    need(lines, "lines");
    std::string text;
    for (const auto& s : eldan::code_stats(corpus->corpus)) text += s.code + "\n";
    *lines = dup_string(text);
  });
}

eldan_status eldan_model_init(uint32_t feature_dim, uint32_t embed_dim, uint32_t fc1_dim,
                              uint32_t fc2_dim, uint32_t fc3_dim, eldan_mode mode, uint64_t seed,
                              const char* target, eldan_model** out) {
  return guarded([&] {
    need(out, "out");
    const eldan::Dims dims{feature_dim, embed_dim, fc1_dim, fc2_dim, fc3_dim};
    const auto m = mode == ELDAN_MODE_ELDN ? eldan::Mode::kEldn : eldan::Mode::kEldan;
    *out = new eldan_model{eldan::init_params(dims, m, seed, target ? target : "")};
  });
}

eldan_status eldan_model_load(const char* path, uint32_t expected_feature_dim, eldan_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    std::optional<uint32_t> expected;
    if (expected_feature_dim) expected = expected_feature_dim;
    *out = new eldan_model{eldan::load_model(path, expected)};
  });
}

eldan_status eldan_model_save(const eldan_model* model, const char* path, int value_width) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    eldan::save_model(model->params, path, value_width);
  });
}

void eldan_model_free(eldan_model* model) { delete model; }

eldan_status eldan_model_info(const eldan_model* model, char** json) {
  return guarded([&] {
    need(model, "model");
    need(json, "json");
    const auto& p = model->params;
    nlohmann::ordered_json j;
    j["dims"] = {{"feature_dim", p.dims.feature_dim}, {"embed_dim", p.dims.embed_dim},
                 {"fc1_dim", p.dims.fc1_dim},         {"fc2_dim", p.dims.fc2_dim},
                 {"fc3_dim", p.dims.fc3_dim},         {"n_classes", eldan::Dims::kClasses}};
    j["mode"] = eldan::mode_name(p.mode);
    j["target"] = p.target;
    j["seed"] = p.seed;
    *json = dup_string(j.dump());
  });
}

eldan_status eldan_model_predict(const eldan_model* model, const eldan_corpus* corpus,
                                 size_t encounter_index, double* positive_prob, double* attention,
                                 size_t attention_cap, size_t* n_docs) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    eldan::check_compatible(model->params, corpus->corpus.feature_dim);
    if (encounter_index >= corpus->corpus.encounters.size()) {
      eldan::fail(eldan::ErrorCode::kInvalidArgument, "encounter index out of range");
    }
    const auto trace = eldan::predict(corpus->corpus.encounters[encounter_index], model->params);
    if (positive_prob) *positive_prob = trace.positive_probability();
    if (n_docs) *n_docs = trace.docs.size();
    if (attention) {
      for (size_t j = 0; j < trace.docs.size() && j < attention_cap; ++j) {
        attention[j] = trace.docs[j].attention;
      }
    }
  });
}

eldan_status eldan_train_code(const eldan_corpus* train, const eldan_corpus* dev, const char* code,
                              const char* train_config_json, const eldan_model* embedding_donor,
                              eldan_model** out, char** history_tsv) {
  return guarded([&] {
    need(train, "train");
    need(dev, "dev");
    need(code, "code");
    need(out, "out");
    const auto cfg = train_config(train_config_json);
    const auto train_set = eldan::binarize(train->corpus, code);
    const auto dev_set = eldan::binarize(dev->corpus, code);
    const eldan::Matrix* init = embedding_donor ? &embedding_donor->params.embedding : nullptr;
    auto result = eldan::train_code(train_set, dev_set, cfg, init);
    if (history_tsv) *history_tsv = dup_string(result.history.to_tsv());
    *out = new eldan_model{std::move(result.params)};
  });
}

eldan_status eldan_train_all(const eldan_corpus* train, const eldan_corpus* dev,
                             const char* train_config_json, const char* out_dir, unsigned threads,
                             char** summary_tsv) {
  return guarded([&] {
    need(train, "train");
    need(dev, "dev");
    need(out_dir, "out_dir");
    const auto cfg = train_config(train_config_json);
    std::vector<eldan::CodeId> ranked;
    for (const auto& s : eldan::code_stats(train->corpus)) ranked.push_back(s.code);
    const auto entries =
        eldan::train_all(train->corpus, dev->corpus, ranked, cfg, std::string(out_dir), threads);
    if (summary_tsv) {
      std::ostringstream out;
      out << "code\tstatus\tbest_epoch\tdev_f1\ttransfer_from\tmessage\n";
      char buf[64];
      for (const auto& e : entries) {
        out << e.code << '\t' << (e.ok ? "ok" : "skipped") << '\t';
        if (e.ok) {
          const auto& h = e.result->history;
          double f1 = 0.0;
          for (const auto& rec : h.epochs) {
            if (rec.epoch == h.best_epoch) f1 = rec.dev_f1;
          }
          std::snprintf(buf, sizeof buf, "%u\t%.9g", h.best_epoch, f1);
          out << buf;
        } else {
          out << "-\t-";
        }
        out << '\t' << (e.transfer_from.empty() ? "-" : e.transfer_from) << '\t'
            << (e.ok ? "" : e.message) << '\n';
      }
      *summary_tsv = dup_string(out.str());
    }
  });
}

eldan_status eldan_eval_encounters(const eldan_model* model, const eldan_corpus* corpus,
                                   char** report_json) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(report_json, "report_json");
    const auto set = eldan::binarize(corpus->corpus, model->params.target);
    const auto ev = eldan::evaluate_encounters(model->params, set);
    auto j = prf_json(ev.prf);
    j["positives"] = set.positives();
    j["mean_loss"] = ev.mean_loss;
    *report_json = dup_string(j.dump());
  });
}

eldan_status eldan_attention_dump(const eldan_model* model, const eldan_corpus* corpus,
                                  char** jsonl) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(jsonl, "jsonl");
    std::string text;
    for (const auto& rec : eldan::attention_dump(model->params, corpus->corpus, model->params.target)) {
      text += eldan::attention_record_json(rec) + "\n";
    }
    *jsonl = dup_string(text);
  });
}

eldan_status eldan_document_f1(const eldan_model* model, const eldan_corpus* corpus,
                               char** report_json) {
  return guarded([&] {
    need(model, "model");
    need(corpus, "corpus");
    need(report_json, "report_json");
    auto j = prf_json(eldan::document_f1(model->params, corpus->corpus, model->params.target));
    j["code"] = model->params.target;
    *report_json = dup_string(j.dump());
  });
}

eldan_status eldan_chance(const eldan_corpus* corpus, const char* code, uint32_t runs,
                          uint64_t seed, unsigned threads, char** report_json) {
  return guarded([&] {
    need(corpus, "corpus");
    need(code, "code");
    need(report_json, "report_json");
    const auto r = eldan::chance_document_f1(corpus->corpus, code, runs, seed, threads);
    nlohmann::ordered_json j;
    j["code"] = code;
    j["runs"] = r.runs;
    if (r.shape.defined) {
      j["mean_f1"] = r.mean_f1;
    } else {
      j["mean_f1"] = nullptr;
    }
    j["std_f1"] = r.std_f1;
    j["n_enc"] = r.shape.n_enc;
    j["n_doc"] = r.shape.n_doc;
    j["n_source"] = r.shape.n_source;
    j["run_f1"] = r.run_f1;
    *report_json = dup_string(j.dump());
  });
}

eldan_status eldan_significance(const char* chance_report_json, double model_f1, int two_sided,
                                double* t, double* p, int* significant) {
  return guarded([&] {
    need(chance_report_json, "chance_report_json");
    eldan::ChanceReport report;
    try {
      const auto j = nlohmann::json::parse(chance_report_json);
      report.run_f1 = j.at("run_f1").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      eldan::fail(eldan::ErrorCode::kParse, std::string("chance report: ") + e.what());
    }
    report.runs = static_cast<uint32_t>(report.run_f1.size());
    eldan::require(report.runs >= 2, "chance report needs at least 2 runs");
    double sum = 0.0;
    for (double f : report.run_f1) sum += f;
    report.mean_f1 = sum / report.runs;
    double ss = 0.0;
    for (double f : report.run_f1) ss += (f - report.mean_f1) * (f - report.mean_f1);
    report.std_f1 = std::sqrt(ss / (report.runs - 1));
    const auto s = eldan::significance(report, model_f1, two_sided != 0);
    if (t) *t = s.t;
    if (p) *p = s.p;
    if (significant) *significant = s.significant ? 1 : 0;
  });
}

eldan_status eldan_gradcheck(const char* options_json, char** report_tsv, int* passed) {
  return guarded([&] {
    eldan::GradCheckOptions opt;
    if (options_json) {
      try {
        const auto j = nlohmann::json::parse(options_json);
        if (j.contains("mode")) opt.mode = eldan::parse_mode(j.at("mode").get<std::string>());
        opt.seed = j.value("seed", opt.seed);
        opt.n_trials = j.value("n_trials", opt.n_trials);
        opt.eps = j.value("eps", opt.eps);
        opt.tol = j.value("tol", opt.tol);
      } catch (const nlohmann::json::exception& e) {
        eldan::fail(eldan::ErrorCode::kParse, std::string("gradcheck options: ") + e.what());
      }
    }
    eldan::require(opt.eps > 0, "eps must be positive");
    eldan::require(opt.tol > 0, "tol must be positive");
    const auto report = eldan::grad_check(opt);
    if (report_tsv) *report_tsv = dup_string(report.to_tsv());
    if (passed) *passed = report.passed ? 1 : 0;
  });
}

eldan_status eldan_report(const char* models_dir, const eldan_corpus* test,
                          const eldan_corpus* annotated, uint32_t group_size, uint32_t chance_runs,
                          uint64_t seed, unsigned threads, char** encounter_tsv, char** macro_tsv,
                          char** document_tsv) {
  return guarded([&] {
    need(models_dir, "models_dir");
    need(test, "test");
    namespace fs = std::filesystem;
    const fs::path dir(models_dir);
    if (!fs::is_directory(dir)) {
      eldan::fail(eldan::ErrorCode::kIo, "models directory '" + dir.string() + "' not found");
    }
    auto load_if = [&](const eldan::CodeId& code, eldan::Mode mode,
                       bool transfer) -> std::optional<eldan::ModelParams> {
      const auto path = dir / (eldan::model_stem(code, mode, transfer) + ".eldan");
      if (!fs::exists(path)) return std::nullopt;
      return eldan::load_model(path.string(), test->corpus.feature_dim);
    };

    std::vector<eldan::CodeTableRow> rows;
    std::vector<eldan::DocumentTableRow> doc_rows;
    for (const auto& stat : eldan::code_stats(test->corpus)) {
      const auto eldn = load_if(stat.code, eldan::Mode::kEldn, false);
      const auto plain = load_if(stat.code, eldan::Mode::kEldan, false);
      const auto transfer = load_if(stat.code, eldan::Mode::kEldan, true);
      if (!eldn && !plain && !transfer) continue;
      const auto set = eldan::binarize(test->corpus, stat.code);
      eldan::CodeTableRow row{stat.code, stat.mean_docs, stat.prevalence, {}, {}, {}};
      if (eldn) row.eldn = eldan::encounter_f1(*eldn, set).f1;
      if (plain) row.eldan = eldan::encounter_f1(*plain, set).f1;
      if (transfer) row.eldan_transfer = eldan::encounter_f1(*transfer, set).f1;
      rows.push_back(row);

      if (annotated && plain && annotated->corpus.code_vocab.contains(stat.code)) {
        eldan::DocumentTableRow doc_row{stat.code,
                                        eldan::document_f1(*plain, annotated->corpus, stat.code),
                                        std::nullopt};
        if (chance_runs >= 2 && doc_row.attention.defined) {
          doc_row.chance_mean =
              eldan::chance_document_f1(annotated->corpus, stat.code, chance_runs, seed, threads)
                  .mean_f1;
        }
        doc_rows.push_back(std::move(doc_row));
      }
    }
    eldan::require(group_size > 0, "group size must be positive");
    if (encounter_tsv) *encounter_tsv = dup_string(eldan::format_encounter_table(rows));
    if (macro_tsv) *macro_tsv = dup_string(eldan::format_macro_table(rows, group_size));
    if (document_tsv) {
      *document_tsv = annotated ? dup_string(eldan::format_document_table(doc_rows)) : nullptr;
    }
  });
}

}  // extern "C"
