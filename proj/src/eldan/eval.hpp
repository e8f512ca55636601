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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eldan/corpus.hpp"
#include "eldan/model.hpp"

namespace eldan {

struct PRFReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_enc = 0;
  std::size_t n_doc = 0;
  std::size_t n_source = 0;
  // False when no encounter qualified (rendered as "-").
  bool defined = true;

  static PRFReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

struct EncounterEval {
  PRFReport prf;
  double mean_loss = 0.0;
};

// Argmax prediction per encounter; F1 of the positive class.
EncounterEval evaluate_encounters(const ModelParams& params, const BinaryLabeledSet& set);
PRFReport encounter_f1(const ModelParams& params, const BinaryLabeledSet& set);

// Indices j with a_j > max(a) / 2, ascending.
std::vector<std::size_t> select_source_docs(std::span<const double> a);

struct AttentionRecord {
  std::string encounter_id;
  CodeId code;
  std::vector<double> attention;
  std::vector<std::size_t> selected;
};

std::string attention_record_json(const AttentionRecord& record);

// Attention of every encounter carrying `code` in the annotated corpus.
std::vector<AttentionRecord> attention_dump(const ModelParams& params, const Corpus& annotated,
                                            const CodeId& code);

// Micro-aggregated document-level counts over the encounters that carry
// `code`. `selections[i]` holds the selected documents of the i-th such
// encounter in corpus order.
PRFReport document_f1_from_selections(const Corpus& annotated, const CodeId& code,
                                      std::span<const std::vector<std::size_t>> selections);

PRFReport document_f1(const ModelParams& params, const Corpus& annotated, const CodeId& code);

struct ChanceReport {
  std::uint32_t runs = 0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::vector<double> run_f1;
  PRFReport shape;  // n_enc / n_doc / n_source of the restricted set
};

// Per run, iid Uniform(0,1) scores per document and the same selection rule.
// Run r draws from its own stream derived from (seed, r), so the report is
// independent of `threads`.
ChanceReport chance_document_f1(const Corpus& annotated, const CodeId& code,
                                std::uint32_t runs, std::uint64_t seed, unsigned threads = 1);

struct Significance {
  double t = 0.0;
  double p = 1.0;
  bool significant = false;
};

// One-sample t-test of the chance runs against the model F1. t is
// (mean_chance - model_f1) / (std / sqrt(runs)); the one-sided p-value is
// P(T <= t) with runs - 1 degrees of freedom.
Significance significance(const ChanceReport& chance, double model_f1, bool two_sided = false);

struct CodeTableRow {
  CodeId code;
  double mean_docs = 0.0;
  double prevalence = 0.0;
  std::optional<double> eldn;
  std::optional<double> eldan;
  std::optional<double> eldan_transfer;
};

struct DocumentTableRow {
  CodeId code;
  PRFReport attention;
  std::optional<double> chance_mean;
};

// Per-code encounter F1 table with a closing Average row.
std::string format_encounter_table(std::span<const CodeTableRow> rows);
// Macro average per group of `group_size` consecutive rows.
std::string format_macro_table(std::span<const CodeTableRow> rows, std::size_t group_size);
std::string format_document_table(std::span<const DocumentTableRow> rows);

std::string ordinal(std::size_t n);

}  // namespace eldan
