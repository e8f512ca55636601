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

// Command-line front end. Everything goes through the C API in eldan.h.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eldan/eldan.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Thrown to unwind to main() with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

int exit_code_for(eldan_status s) {
  switch (s) {
    case ELDAN_OK: return kExitOk;
    case ELDAN_ERR_IO:
    case ELDAN_ERR_NUMERIC:
    case ELDAN_ERR_INTERNAL: return kExitRuntime;
    default: return kExitValidation;
  }
}

void check(eldan_status s) {
  if (s != ELDAN_OK) {
    throw Exit{exit_code_for(s), std::string(eldan_status_string(s)) + ": " + eldan_last_error()};
  }
}

struct CorpusDeleter {
  void operator()(eldan_corpus* c) const { eldan_corpus_free(c); }
};
struct ModelDeleter {
  void operator()(eldan_model* m) const { eldan_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { eldan_string_free(s); }
};
using CorpusPtr = std::unique_ptr<eldan_corpus, CorpusDeleter>;
using ModelPtr = std::unique_ptr<eldan_model, ModelDeleter>;
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) {
  OwnedString owned(s);
  return s ? std::string(s) : std::string();
}

std::string manifest_for(const std::string& corpus_path) {
  const std::string ext = ".jsonl";
  if (corpus_path.size() > ext.size() &&
      corpus_path.compare(corpus_path.size() - ext.size(), ext.size(), ext) == 0) {
    return corpus_path.substr(0, corpus_path.size() - ext.size()) + ".manifest.json";
  }
  return corpus_path + ".manifest.json";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{kExitValidation, "cannot read '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::optional<std::string>& path, const std::string& text) {
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out) throw Exit{kExitRuntime, "cannot write '" + *path + "'"};
  out << text;
  if (!out) throw Exit{kExitRuntime, "write failed for '" + *path + "'"};
}

CorpusPtr load_corpus(const std::string& path, const std::optional<std::string>& manifest) {
  eldan_corpus* c = nullptr;
  check(eldan_corpus_load(path.c_str(), manifest.value_or(manifest_for(path)).c_str(), &c));
  return CorpusPtr(c);
}

ModelPtr load_model(const std::string& path, uint32_t feature_dim) {
  eldan_model* m = nullptr;
  check(eldan_model_load(path.c_str(), feature_dim, &m));
  return ModelPtr(m);
}

// Options shared by every subcommand.
struct Common {
  std::optional<std::string> config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, Common& c, bool with_seed = true) {
  app->add_option("--config", c.config, "JSON config file (flags override file values)");
  if (with_seed) app->add_option("--seed", c.seed, "random seed");
  app->add_option("--out", c.out, "output path (stdout when omitted, where applicable)");
}

// The config file may hold one section per subcommand ("gen", "train",
// "eval", ...) or be the section itself.
json config_section(const Common& c, const std::string& section) {
  if (!c.config) return json::object();
  json j;
  try {
    j = json::parse(read_file(*c.config));
  } catch (const json::exception& e) {
    throw Exit{kExitValidation, "config '" + *c.config + "': " + e.what()};
  }
  if (!j.is_object()) throw Exit{kExitValidation, "config must be a JSON object"};
  if (j.contains(section) && j[section].is_object()) return j[section];
  return j;
}

uint64_t resolve_seed(const Common& c, const json& cfg) {
  if (c.seed) return *c.seed;
  return cfg.value("seed", uint64_t{0});
}

unsigned resolve_threads(const std::optional<unsigned>& flag, const json& cfg) {
  if (flag) return std::max(1u, *flag);
  if (cfg.contains("threads")) return std::max(1u, cfg["threads"].get<unsigned>());
  if (const char* env = std::getenv("ELDAN_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encounter-level document attention network: data, training and evaluation"};
  app.require_subcommand(1);

  // gen
  Common gen_c;
  std::optional<std::string> gen_manifest;
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus with planted source documents");
  add_common(gen, gen_c);
  gen->add_option("--manifest", gen_manifest, "manifest output path (default: derived from --out)");

  // split
  Common split_c;
  std::string split_corpus;
  std::optional<std::string> split_manifest;
  std::vector<double> ratios;
  auto* split = app.add_subcommand("split", "split a corpus into train/dev/test by encounter id");
  add_common(split, split_c);
  split->add_option("--corpus", split_corpus, "input corpus (JSONL)")->required();
  split->add_option("--manifest", split_manifest, "input manifest (default: derived)");
  split->add_option("--ratios", ratios, "train,dev,test ratios (default 0.8,0.1,0.1)")->delimiter(',');

  // stats
  Common stats_c;
  std::string stats_corpus;
  std::optional<std::string> stats_manifest;
  auto* stats = app.add_subcommand("stats", "per-code prevalence and mean documents per carrier");
  add_common(stats, stats_c, false);
  stats->add_option("--corpus", stats_corpus, "corpus (JSONL)")->required();
  stats->add_option("--manifest", stats_manifest, "manifest (default: derived)");

  // train
  Common train_c;
  std::string train_path, dev_path, train_code;
  std::optional<std::string> train_mode, transfer_from, history_path;
  auto* train = app.add_subcommand("train", "train a one-vs-all model for one code");
  add_common(train, train_c);
  train->add_option("--train", train_path, "training corpus (JSONL)")->required();
  train->add_option("--dev", dev_path, "development corpus (JSONL)")->required();
  train->add_option("--code", train_code, "target code")->required();
  train->add_option("--mode", train_mode, "eldan|eldn")->check(CLI::IsMember({"eldan", "eldn"}));
  train->add_option("--transfer-from", transfer_from,
                    "model whose W_Embedding initializes this one");
  train->add_option("--history", history_path, "per-epoch history TSV output");

  // train-all
  Common all_c;
  std::string all_train, all_dev;
  std::optional<std::string> all_mode;
  bool all_transfer = false;
  auto* train_all = app.add_subcommand("train-all", "one-vs-all sweep over every code, most frequent first");
  add_common(train_all, all_c);
  train_all->add_option("--train", all_train, "training corpus (JSONL)")->required();
  train_all->add_option("--dev", all_dev, "development corpus (JSONL)")->required();
  train_all->add_option("--mode", all_mode, "eldan|eldn")->check(CLI::IsMember({"eldan", "eldn"}));
  train_all->add_flag("--transfer", all_transfer, "initialize each model's embedding from the previous code");
  train_all->add_option("--threads", all_c.threads, "parallel codes (non-transfer sweeps)");

  // eval / attend / doc-f1
  Common eval_c, attend_c, docf1_c;
  std::string eval_model, eval_corpus, attend_model, attend_corpus, docf1_model, docf1_corpus;
  auto* eval = app.add_subcommand("eval", "encounter-level precision/recall/F1 (JSON)");
  add_common(eval, eval_c, false);
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_option("--corpus", eval_corpus, "evaluation corpus (JSONL)")->required();
  auto* attend = app.add_subcommand("attend", "dump attention and selected documents (JSONL)");
  add_common(attend, attend_c, false);
  attend->add_option("--model", attend_model, "model file")->required();
  attend->add_option("--corpus", attend_corpus, "annotated corpus (JSONL)")->required();
  auto* docf1 = app.add_subcommand("doc-f1", "document-level F1 of attention-selected documents (JSON)");
  add_common(docf1, docf1_c, false);
  docf1->add_option("--model", docf1_model, "model file")->required();
  docf1->add_option("--corpus", docf1_corpus, "annotated corpus (JSONL)")->required();

  // chance
  Common chance_c;
  std::string chance_corpus, chance_code;
  std::optional<std::string> chance_model;
  std::optional<uint32_t> chance_runs;
  bool two_sided = false;
  auto* chance = app.add_subcommand("chance", "uniform-attention chance baseline for document F1 (JSON)");
  add_common(chance, chance_c);
  chance->add_option("--corpus", chance_corpus, "annotated corpus (JSONL)")->required();
  chance->add_option("--code", chance_code, "target code")->required();
  chance->add_option("--runs", chance_runs, "number of chance runs (default 500)");
  chance->add_option("--threads", chance_c.threads, "parallel runs");
  chance->add_option("--model", chance_model, "also test this model's document F1 against chance");
  chance->add_flag("--two-sided", two_sided, "two-sided instead of one-sided t-test");

  // gradcheck
  Common gc_c;
  std::optional<std::string> gc_mode;
  std::optional<uint32_t> gc_trials;
  std::optional<double> gc_eps, gc_tol;
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients (TSV)");
  add_common(gradcheck, gc_c);
  gradcheck->add_option("--mode", gc_mode, "eldan|eldn")->check(CLI::IsMember({"eldan", "eldn"}));
  gradcheck->add_option("--trials", gc_trials, "random trials (default 20)");
  gradcheck->add_option("--eps", gc_eps, "central-difference step (default 1e-5)");
  gradcheck->add_option("--tol", gc_tol, "max relative error (default 1e-5)");

  // report
  Common rep_c;
  std::string rep_models, rep_test;
  std::optional<std::string> rep_annotated;
  std::optional<uint32_t> rep_group, rep_runs;
  auto* report = app.add_subcommand("report", "encounter, macro-average and document F1 tables (TSV)");
  add_common(report, rep_c);
  report->add_option("--models", rep_models, "directory of trained models")->required();
  report->add_option("--test", rep_test, "test corpus (JSONL)")->required();
  report->add_option("--annotated", rep_annotated, "annotated corpus for the document table");
  report->add_option("--group-size", rep_group, "codes per macro-average row (default 10)");
  report->add_option("--runs", rep_runs, "chance runs per code (default 500)");
  report->add_option("--threads", rep_c.threads, "parallel chance runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitValidation;
  }

  try {
    if (*gen) {
      const json cfg = config_section(gen_c, "gen");
      if (!gen_c.out) throw Exit{kExitValidation, "gen: --out is required"};
      eldan_corpus* c = nullptr;
      char* warnings = nullptr;
      check(eldan_corpus_generate(cfg.dump().c_str(), resolve_seed(gen_c, cfg), &c, &warnings));
      CorpusPtr corpus(c);
      std::cerr << take(warnings);
      check(eldan_corpus_save(corpus.get(), gen_c.out->c_str(),
                              gen_manifest.value_or(manifest_for(*gen_c.out)).c_str()));
    } else if (*split) {
      const json cfg = config_section(split_c, "split");
      if (ratios.empty()) ratios = cfg.value("ratios", std::vector<double>{0.8, 0.1, 0.1});
      if (ratios.size() != 3) throw Exit{kExitValidation, "split: --ratios needs three values"};
      const std::string prefix = split_c.out.value_or("split");
      auto corpus = load_corpus(split_corpus, split_manifest);
      eldan_corpus *a = nullptr, *b = nullptr, *t = nullptr;
      check(eldan_corpus_split(corpus.get(), ratios[0], ratios[1], ratios[2],
                               resolve_seed(split_c, cfg), &a, &b, &t));
      CorpusPtr parts[] = {CorpusPtr(a), CorpusPtr(b), CorpusPtr(t)};
      const char* names[] = {"train", "dev", "test"};
      for (int i = 0; i < 3; ++i) {
        const std::string path = prefix + "." + names[i] + ".jsonl";
        check(eldan_corpus_save(parts[i].get(), path.c_str(), manifest_for(path).c_str()));
        std::cerr << names[i] << ": " << eldan_corpus_encounter_count(parts[i].get())
                  << " encounters -> " << path << '\n';
      }
    } else if (*stats) {
      auto corpus = load_corpus(stats_corpus, stats_manifest);
      char* tsv = nullptr;
      check(eldan_corpus_code_stats(corpus.get(), &tsv));
      write_output(stats_c.out, take(tsv));
    } else if (*train) {
      json cfg = config_section(train_c, "train");
      if (train_mode) cfg["mode"] = *train_mode;
      if (train_c.seed) cfg["seed"] = *train_c.seed;
      if (!train_c.out) throw Exit{kExitValidation, "train: --out is required"};
      auto tr = load_corpus(train_path, std::nullopt);
      auto dv = load_corpus(dev_path, std::nullopt);
      if (!eldan_corpus_has_code(tr.get(), train_code.c_str())) {
        throw Exit{kExitValidation, "train: code '" + train_code + "' is not in the corpus"};
      }
      ModelPtr donor;
      if (transfer_from) donor = load_model(*transfer_from, eldan_corpus_feature_dim(tr.get()));
      eldan_model* m = nullptr;
      char* history = nullptr;
      check(eldan_train_code(tr.get(), dv.get(), train_code.c_str(), cfg.dump().c_str(),
                             donor.get(), &m, &history));
      ModelPtr model(m);
      const std::string hist = take(history);
      check(eldan_model_save(model.get(), train_c.out->c_str(), 64));
      write_output(history_path ? history_path : std::optional<std::string>(*train_c.out + ".history.tsv"),
                   hist);
    } else if (*train_all) {
      json cfg = config_section(all_c, "train");
      if (all_mode) cfg["mode"] = *all_mode;
      if (all_c.seed) cfg["seed"] = *all_c.seed;
      if (all_transfer) cfg["transfer"] = true;
      const unsigned threads = resolve_threads(all_c.threads, cfg);
      cfg.erase("threads");
      auto tr = load_corpus(all_train, std::nullopt);
      auto dv = load_corpus(all_dev, std::nullopt);
      char* summary = nullptr;
      check(eldan_train_all(tr.get(), dv.get(), cfg.dump().c_str(),
                            all_c.out.value_or("models").c_str(), threads, &summary));
      std::cout << take(summary);
    } else if (*eval) {
      auto corpus = load_corpus(eval_corpus, std::nullopt);
      auto model = load_model(eval_model, eldan_corpus_feature_dim(corpus.get()));
      char* out = nullptr;
      check(eldan_eval_encounters(model.get(), corpus.get(), &out));
      write_output(eval_c.out, take(out) + "\n");
    } else if (*attend) {
      auto corpus = load_corpus(attend_corpus, std::nullopt);
      auto model = load_model(attend_model, eldan_corpus_feature_dim(corpus.get()));
      char* out = nullptr;
      check(eldan_attention_dump(model.get(), corpus.get(), &out));
      write_output(attend_c.out, take(out));
    } else if (*docf1) {
      auto corpus = load_corpus(docf1_corpus, std::nullopt);
      auto model = load_model(docf1_model, eldan_corpus_feature_dim(corpus.get()));
      char* out = nullptr;
      check(eldan_document_f1(model.get(), corpus.get(), &out));
      write_output(docf1_c.out, take(out) + "\n");
    } else if (*chance) {
      const json cfg = config_section(chance_c, "eval");
      const uint32_t runs = chance_runs.value_or(cfg.value("runs", 500u));
      auto corpus = load_corpus(chance_corpus, std::nullopt);
      char* out = nullptr;
      check(eldan_chance(corpus.get(), chance_code.c_str(), runs, resolve_seed(chance_c, cfg),
                         resolve_threads(chance_c.threads, cfg), &out));
      json report = json::parse(take(out));
      if (chance_model) {
        auto model = load_model(*chance_model, eldan_corpus_feature_dim(corpus.get()));
        char* doc = nullptr;
        check(eldan_document_f1(model.get(), corpus.get(), &doc));
        const json doc_report = json::parse(take(doc));
        if (!doc_report["f1"].is_null()) {
          double t = 0, p = 0;
          int sig = 0;
          check(eldan_significance(report.dump().c_str(), doc_report["f1"].get<double>(),
                                   two_sided ? 1 : 0, &t, &p, &sig));
          report["model_f1"] = doc_report["f1"];
          report["t"] = t;
          report["p"] = p;
          report["significant"] = sig != 0;
        }
      }
      write_output(chance_c.out, report.dump() + "\n");
    } else if (*gradcheck) {
      json cfg = config_section(gc_c, "gradcheck");
      if (gc_mode) cfg["mode"] = *gc_mode;
      if (gc_c.seed) cfg["seed"] = *gc_c.seed;
      if (gc_trials) cfg["n_trials"] = *gc_trials;
      if (gc_eps) cfg["eps"] = *gc_eps;
      if (gc_tol) cfg["tol"] = *gc_tol;
      char* tsv = nullptr;
      int passed = 0;
      check(eldan_gradcheck(cfg.dump().c_str(), &tsv, &passed));
      write_output(gc_c.out, take(tsv));
      if (!passed) throw Exit{kExitRuntime, "gradcheck: tolerance exceeded"};
    } else if (*report) {
      const json cfg = config_section(rep_c, "eval");
      auto test = load_corpus(rep_test, std::nullopt);
      CorpusPtr annotated;
      if (rep_annotated) annotated = load_corpus(*rep_annotated, std::nullopt);
      char *enc = nullptr, *macro = nullptr, *doc = nullptr;
      check(eldan_report(rep_models.c_str(), test.get(), annotated.get(),
                         rep_group.value_or(cfg.value("group_size", 10u)),
                         rep_runs.value_or(cfg.value("runs", 500u)), resolve_seed(rep_c, cfg),
                         resolve_threads(rep_c.threads, cfg), &enc, &macro, &doc));
      const std::string enc_s = take(enc), macro_s = take(macro), doc_s = take(doc);
      if (rep_c.out) {
        write_output(*rep_c.out + ".encounter.tsv", enc_s);
        write_output(*rep_c.out + ".macro.tsv", macro_s);
        if (annotated) write_output(*rep_c.out + ".document.tsv", doc_s);
      } else {
        std::cout << enc_s << '\n' << macro_s;
        if (annotated) std::cout << '\n' << doc_s;
      }
    }
  } catch (const Exit& e) {
    if (!e.message.empty()) std::cerr << "eldan: " << e.message << '\n';
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "eldan: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
