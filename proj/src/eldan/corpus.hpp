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
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace eldan {

using CodeId = std::string;
using CodeSet = std::set<CodeId>;

struct FeatureEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

// Sparse document vector. Entries are strictly increasing by index.
struct SparseDocVector {
  std::string doc_id;
  std::vector<FeatureEntry> entries;

  friend bool operator==(const SparseDocVector&, const SparseDocVector&) = default;
};

struct Encounter {
  std::string encounter_id;
  std::vector<SparseDocVector> documents;
  CodeSet codes;
  // Per-document source-code annotations. Never read by training.
  std::optional<std::vector<CodeSet>> doc_codes;

  bool has_code(const CodeId& code) const { return codes.contains(code); }

  friend bool operator==(const Encounter&, const Encounter&) = default;
};

struct Corpus {
  std::uint32_t feature_dim = 0;
  std::vector<Encounter> encounters;
  CodeSet code_vocab;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

enum class Label : int { kNegative = -1, kPositive = 1 };

inline int class_index(Label y) { return y == Label::kPositive ? 1 : 0; }

struct LabeledEncounter {
  const Encounter* encounter = nullptr;
  Label label = Label::kNegative;
};

// Borrowed view over a corpus: the corpus must outlive the set.
struct BinaryLabeledSet {
  CodeId target;
  std::uint32_t feature_dim = 0;
  std::vector<LabeledEncounter> items;

  std::size_t positives() const;
  std::size_t size() const { return items.size(); }
};

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

struct CodeStat {
  CodeId code;
  double prevalence = 0.0;
  double mean_docs = 0.0;
  std::size_t carriers = 0;
};

struct Manifest {
  std::uint32_t feature_dim = 0;
  CodeSet code_vocab;
};

// Validation shared by the parser and the generator.
void validate_document(const SparseDocVector& doc, std::uint32_t feature_dim);
void validate_encounter(const Encounter& enc, std::uint32_t feature_dim,
                        const CodeSet& code_vocab);
void validate_corpus(const Corpus& corpus);

Manifest parse_manifest(std::istream& in);
Manifest load_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, std::ostream& out);

// Reads one encounter per JSONL line. Blank lines are skipped; errors carry
// the 1-based line number.
Corpus parse_corpus(std::istream& jsonl, const Manifest& manifest);
Corpus load_corpus(const std::string& jsonl_path, const std::string& manifest_path);

// Canonical serialization: fixed key order, codes sorted.
std::string serialize_encounter(const Encounter& enc);
void write_corpus(const Corpus& corpus, std::ostream& jsonl);
void save_corpus(const Corpus& corpus, const std::string& jsonl_path,
                 const std::string& manifest_path);

// Position of an encounter in [0, 1): FNV-1a over the 8 little-endian seed
// bytes followed by the UTF-8 encounter id, passed through the MurmurHash3
// fmix64 finalizer, divided by 2^64.
double split_position(const std::string& encounter_id, std::uint64_t seed);

CorpusSplit split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                         std::uint64_t seed);

BinaryLabeledSet binarize(const Corpus& corpus, const CodeId& target);

// Sorted by prevalence descending, ties by code ascending. Covers the whole
// code vocabulary, including codes with no carriers.
std::vector<CodeStat> code_stats(const Corpus& corpus);

}  // namespace eldan
