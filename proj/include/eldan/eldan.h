/* Copyright 2026 The ELDAN Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/*
 * C interface to the encounter-level document attention network library.
 *
 * Conventions:
 *  - Every fallible call returns an eldan_status. On failure the message is
 *    available from eldan_last_error() on the calling thread until the next
 *    failing call on that thread.
 *  - Handles are opaque; release them with the matching *_free function.
 *    Passing NULL to a *_free function is a no-op.
 *  - char** outputs are NUL-terminated, heap allocated, and owned by the
 *    caller, who releases them with eldan_string_free().
 *  - Configuration and structured reports travel as JSON text; tables as TSV.
 */

#ifndef ELDAN_ELDAN_H_
#define ELDAN_ELDAN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ELDAN_BUILDING_LIBRARY)
#    define ELDAN_API __declspec(dllexport)
#  else
#    define ELDAN_API __declspec(dllimport)
#  endif
#else
#  define ELDAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eldan_status {
  ELDAN_OK = 0,
  ELDAN_ERR_INVALID_ARGUMENT = 1,
  ELDAN_ERR_PARSE = 2,
  ELDAN_ERR_NOT_FOUND = 3,
  ELDAN_ERR_IO = 4,
  ELDAN_ERR_NUMERIC = 5,
  ELDAN_ERR_CORRUPT = 6,
  ELDAN_ERR_SHAPE_MISMATCH = 7,
  ELDAN_ERR_INTERNAL = 8
} eldan_status;

typedef enum eldan_mode { ELDAN_MODE_ELDAN = 0, ELDAN_MODE_ELDN = 1 } eldan_mode;

typedef struct eldan_corpus eldan_corpus;
typedef struct eldan_model eldan_model;

ELDAN_API const char* eldan_version(void);
ELDAN_API const char* eldan_status_string(eldan_status status);
ELDAN_API const char* eldan_last_error(void);
ELDAN_API void eldan_string_free(char* s);

/* ---- corpus ------------------------------------------------------------ */

ELDAN_API eldan_status eldan_corpus_load(const char* jsonl_path, const char* manifest_path,
                                         eldan_corpus** out);
/* Parses a JSONL buffer against a manifest given as JSON text. */
ELDAN_API eldan_status eldan_corpus_parse(const char* jsonl, size_t jsonl_len,
                                          const char* manifest_json, eldan_corpus** out);
ELDAN_API eldan_status eldan_corpus_save(const eldan_corpus* corpus, const char* jsonl_path,
                                         const char* manifest_path);
/* Canonical JSONL serialization. */
ELDAN_API eldan_status eldan_corpus_serialize(const eldan_corpus* corpus, char** jsonl);
ELDAN_API void eldan_corpus_free(eldan_corpus* corpus);

ELDAN_API size_t eldan_corpus_encounter_count(const eldan_corpus* corpus);
ELDAN_API size_t eldan_corpus_document_count(const eldan_corpus* corpus);
ELDAN_API uint32_t eldan_corpus_feature_dim(const eldan_corpus* corpus);
ELDAN_API int eldan_corpus_has_code(const eldan_corpus* corpus, const char* code);

/* Generates a synthetic corpus from a generator config (JSON). Warnings, if
 * any, are returned one per line in *warnings (may be NULL). */
ELDAN_API eldan_status eldan_corpus_generate(const char* gen_config_json, uint64_t seed,
                                             eldan_corpus** out, char** warnings);

ELDAN_API eldan_status eldan_corpus_split(const eldan_corpus* corpus, double r_train,
                                          double r_dev, double r_test, uint64_t seed,
                                          eldan_corpus** train, eldan_corpus** dev,
                                          eldan_corpus** test);

/* Per-code prevalence table (TSV: code, prevalence, mean_docs, carriers),
 * ranked by prevalence descending. */
ELDAN_API eldan_status eldan_corpus_code_stats(const eldan_corpus* corpus, char** tsv);

/* Codes ranked by prevalence in `corpus`, one per line. */
ELDAN_API eldan_status eldan_corpus_ranked_codes(const eldan_corpus* corpus, char** lines);

/* ---- model ------------------------------------------------------------- */

ELDAN_API eldan_status eldan_model_init(uint32_t feature_dim, uint32_t embed_dim, uint32_t fc1_dim,
                                        uint32_t fc2_dim, uint32_t fc3_dim, eldan_mode mode,
                                        uint64_t seed, const char* target, eldan_model** out);
/* expected_feature_dim == 0 skips the feature_dim check. */
ELDAN_API eldan_status eldan_model_load(const char* path, uint32_t expected_feature_dim,
                                        eldan_model** out);
/* value_width is 64 or 32. */
ELDAN_API eldan_status eldan_model_save(const eldan_model* model, const char* path,
                                        int value_width);
ELDAN_API void eldan_model_free(eldan_model* model);
/* {"dims": {...}, "mode", "target", "seed"} */
ELDAN_API eldan_status eldan_model_info(const eldan_model* model, char** json);

/* Positive-class probability and attention weights for one encounter.
 * `attention` may be NULL; otherwise it receives up to `attention_cap`
 * weights and *n_docs the encounter's document count. */
ELDAN_API eldan_status eldan_model_predict(const eldan_model* model, const eldan_corpus* corpus,
                                           size_t encounter_index, double* positive_prob,
                                           double* attention, size_t attention_cap,
                                           size_t* n_docs);

/* ---- training ---------------------------------------------------------- */

/* Trains one code. `train_config_json` may be NULL for defaults. When
 * `embedding_donor` is non-NULL its W_Embedding initializes the new model.
 * *history_tsv (may be NULL) receives the per-epoch history. */
ELDAN_API eldan_status eldan_train_code(const eldan_corpus* train, const eldan_corpus* dev,
                                        const char* code, const char* train_config_json,
                                        const eldan_model* embedding_donor, eldan_model** out,
                                        char** history_tsv);

/* One-vs-all sweep over the codes ranked by train prevalence. Writes
 * <code>.<mode>[.transfer].eldan plus .history.tsv files into out_dir and
 * returns a TSV summary (code, status, best_epoch, dev_f1, transfer_from,
 * message). Per-code failures appear as "skipped" rows. */
ELDAN_API eldan_status eldan_train_all(const eldan_corpus* train, const eldan_corpus* dev,
                                       const char* train_config_json, const char* out_dir,
                                       unsigned threads, char** summary_tsv);

/* ---- evaluation -------------------------------------------------------- */

/* Encounter-level report as JSON (tp, fp, fn, precision, recall, f1, n_enc,
 * n_doc, mean_loss). The model's target code is evaluated. */
ELDAN_API eldan_status eldan_eval_encounters(const eldan_model* model, const eldan_corpus* corpus,
                                             char** report_json);

/* Attention dump as JSONL for the encounters carrying the model's code. */
ELDAN_API eldan_status eldan_attention_dump(const eldan_model* model, const eldan_corpus* corpus,
                                            char** jsonl);

/* Document-level report as JSON; "f1" is null when no encounter carries the
 * code. */
ELDAN_API eldan_status eldan_document_f1(const eldan_model* model, const eldan_corpus* corpus,
                                         char** report_json);

/* Chance baseline (JSON: runs, mean_f1, std_f1, run_f1, n_enc, n_doc,
 * n_source). */
ELDAN_API eldan_status eldan_chance(const eldan_corpus* corpus, const char* code, uint32_t runs,
                                    uint64_t seed, unsigned threads, char** report_json);

/* One-sample t-test of chance runs against a model F1. */
ELDAN_API eldan_status eldan_significance(const char* chance_report_json, double model_f1,
                                          int two_sided, double* t, double* p, int* significant);

/* Gradient check (options JSON: mode, seed, n_trials, eps, tol; NULL for
 * defaults). Writes the per-tensor TSV and sets *passed. */
ELDAN_API eldan_status eldan_gradcheck(const char* options_json, char** report_tsv, int* passed);

/* Report tables from the models in models_dir (named by model stem). The
 * encounter and macro tables use `test`; the document table is produced
 * when `annotated` is non-NULL, with `chance_runs` chance runs per code. */
ELDAN_API eldan_status eldan_report(const char* models_dir, const eldan_corpus* test,
                                    const eldan_corpus* annotated, uint32_t group_size,
                                    uint32_t chance_runs, uint64_t seed, unsigned threads,
                                    char** encounter_tsv, char** macro_tsv, char** document_tsv);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* ELDAN_ELDAN_H_ */
