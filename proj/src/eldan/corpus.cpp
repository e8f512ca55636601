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

#include "eldan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "eldan/error.hpp"
#include "eldan/rng.hpp"

namespace eldan {

using nlohmann::json;

std::size_t BinaryLabeledSet::positives() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const LabeledEncounter& it) {
        return it.label == Label::kPositive;
      }));
}

void validate_document(const SparseDocVector& doc, std::uint32_t feature_dim) {
  for (std::size_t i = 0; i < doc.entries.size(); ++i) {
    const FeatureEntry& e = doc.entries[i];
    if (e.index >= feature_dim) {
      fail(ErrorCode::kInvalidArgument,
           "document '" + doc.doc_id + "': feature id " + std::to_string(e.index) +
               " >= feature_dim " + std::to_string(feature_dim));
    }
    if (!std::isfinite(e.value)) {
      fail(ErrorCode::kInvalidArgument, "document '" + doc.doc_id +
                                            "': non-finite value for feature " +
                                            std::to_string(e.index));
    }
    if (i > 0 && doc.entries[i - 1].index >= e.index) {
      fail(ErrorCode::kInvalidArgument,
           "document '" + doc.doc_id + "': feature ids must be strictly increasing (" +
               std::to_string(doc.entries[i - 1].index) + " then " +
               std::to_string(e.index) + ")");
    }
  }
}

void validate_encounter(const Encounter& enc, std::uint32_t feature_dim,
                        const CodeSet& code_vocab) {
  if (enc.encounter_id.empty()) fail(ErrorCode::kInvalidArgument, "empty encounter_id");
  if (enc.documents.empty()) {
    fail(ErrorCode::kInvalidArgument,
         "encounter '" + enc.encounter_id + "' has no documents");
  }
  for (const auto& doc : enc.documents) validate_document(doc, feature_dim);
  for (const auto& code : enc.codes) {
    if (code.empty()) {
      fail(ErrorCode::kInvalidArgument,
           "encounter '" + enc.encounter_id + "' has an empty code");
    }
    if (!code_vocab.contains(code)) {
      fail(ErrorCode::kInvalidArgument, "encounter '" + enc.encounter_id +
                                            "': code '" + code +
                                            "' not in manifest code_vocab");
    }
  }
  if (enc.doc_codes) {
    if (enc.doc_codes->size() != enc.documents.size()) {
      fail(ErrorCode::kInvalidArgument,
           "encounter '" + enc.encounter_id + "': doc_codes has " +
               std::to_string(enc.doc_codes->size()) + " entries for " +
               std::to_string(enc.documents.size()) + " documents");
    }
    for (const auto& set : *enc.doc_codes) {
      for (const auto& code : set) {
        if (!enc.codes.contains(code)) {
          fail(ErrorCode::kInvalidArgument, "encounter '" + enc.encounter_id +
                                                "': doc_codes entry '" + code +
                                                "' is not an encounter code");
        }
      }
    }
  }
}

void validate_corpus(const Corpus& corpus) {
  require(corpus.feature_dim > 0, "feature_dim must be positive");
  std::unordered_set<std::string> seen;
  for (const auto& enc : corpus.encounters) {
    validate_encounter(enc, corpus.feature_dim, corpus.code_vocab);
    if (!seen.insert(enc.encounter_id).second) {
      fail(ErrorCode::kInvalidArgument,
           "duplicate encounter_id '" + enc.encounter_id + "'");
    }
  }
}

namespace {

CodeSet parse_code_list(const json& j, const char* what) {
  if (!j.is_array()) fail(ErrorCode::kParse, std::string(what) + " must be an array");
  CodeSet out;
  for (const auto& c : j) {
    if (!c.is_string()) fail(ErrorCode::kParse, std::string(what) + " entries must be strings");
    out.insert(c.get<std::string>());
  }
  return out;
}

const json& field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::kParse, std::string("missing field '") + key + "'");
  return *it;
}

SparseDocVector parse_document(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "document must be an object");
  SparseDocVector doc;
  const json& id = field(j, "doc_id");
  if (!id.is_string()) fail(ErrorCode::kParse, "doc_id must be a string");
  doc.doc_id = id.get<std::string>();
  const json& feats = field(j, "features");
  if (!feats.is_array()) fail(ErrorCode::kParse, "features must be an array");
  doc.entries.reserve(feats.size());
  for (const auto& pair : feats) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number()) {
      fail(ErrorCode::kParse, "feature entries must be [int, number] pairs");
    }
    const auto index = pair[0].get<std::int64_t>();
    if (index < 0 || index > static_cast<std::int64_t>(UINT32_MAX)) {
      fail(ErrorCode::kInvalidArgument,
           "feature id " + std::to_string(index) + " out of range");
    }
    doc.entries.push_back({static_cast<std::uint32_t>(index), pair[1].get<double>()});
  }
  return doc;
}

Encounter parse_encounter(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kParse, "record must be a JSON object");
  Encounter enc;
  const json& id = field(j, "encounter_id");
  if (!id.is_string()) fail(ErrorCode::kParse, "encounter_id must be a string");
  enc.encounter_id = id.get<std::string>();
  const json& docs = field(j, "documents");
  if (!docs.is_array()) fail(ErrorCode::kParse, "documents must be an array");
  for (const auto& d : docs) enc.documents.push_back(parse_document(d));
  enc.codes = parse_code_list(field(j, "codes"), "codes");
  if (auto it = j.find("doc_codes"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail(ErrorCode::kParse, "doc_codes must be an array");
    std::vector<CodeSet> per_doc;
    for (const auto& entry : *it) per_doc.push_back(parse_code_list(entry, "doc_codes entry"));
    enc.doc_codes = std::move(per_doc);
  }
  return enc;
}

}  // namespace

Manifest parse_manifest(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    const json& dim = field(j, "feature_dim");
    if (!dim.is_number_integer() || dim.get<std::int64_t>() <= 0 ||
        dim.get<std::int64_t>() > static_cast<std::int64_t>(UINT32_MAX)) {
      fail(ErrorCode::kParse, "feature_dim must be a positive integer");
    }
    m.feature_dim = dim.get<std::uint32_t>();
    m.code_vocab = parse_code_list(field(j, "code_vocab"), "code_vocab");
  } catch (const Error& e) {
    fail(e.code(), std::string("manifest: ") + e.what());
  }
  for (const auto& c : m.code_vocab) {
    if (c.empty()) fail(ErrorCode::kParse, "manifest: empty code in code_vocab");
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open manifest '" + path + "'");
  return parse_manifest(in);
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
  json j;
  j["feature_dim"] = manifest.feature_dim;
  j["code_vocab"] = json::array();
  for (const auto& c : manifest.code_vocab) j["code_vocab"].push_back(c);
  out << j.dump() << '\n';
}

Corpus parse_corpus(std::istream& jsonl, const Manifest& manifest) {
  Corpus corpus;
  corpus.feature_dim = manifest.feature_dim;
  corpus.code_vocab = manifest.code_vocab;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(jsonl, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        fail(ErrorCode::kParse, e.what());
      }
      Encounter enc = parse_encounter(j);
      validate_encounter(enc, corpus.feature_dim, corpus.code_vocab);
      if (!seen.insert(enc.encounter_id).second) {
        fail(ErrorCode::kInvalidArgument,
             "duplicate encounter_id '" + enc.encounter_id + "'");
      }
      corpus.encounters.push_back(std::move(enc));
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& jsonl_path, const std::string& manifest_path) {
  const Manifest manifest = load_manifest(manifest_path);
  std::ifstream in(jsonl_path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open corpus '" + jsonl_path + "'");
  return parse_corpus(in, manifest);
}

std::string serialize_encounter(const Encounter& enc) {
  // ordered_json keeps insertion order, which is the canonical order.
  nlohmann::ordered_json j;
  j["encounter_id"] = enc.encounter_id;
  auto docs = nlohmann::ordered_json::array();
  for (const auto& d : enc.documents) {
    nlohmann::ordered_json dj;
    dj["doc_id"] = d.doc_id;
    auto feats = nlohmann::ordered_json::array();
    for (const auto& e : d.entries) feats.push_back({e.index, e.value});
    dj["features"] = std::move(feats);
    docs.push_back(std::move(dj));
  }
  j["documents"] = std::move(docs);
  j["codes"] = enc.codes;
  if (enc.doc_codes) j["doc_codes"] = *enc.doc_codes;
  return j.dump();
}

void write_corpus(const Corpus& corpus, std::ostream& jsonl) {
  for (const auto& enc : corpus.encounters) jsonl << serialize_encounter(enc) << '\n';
}

void save_corpus(const Corpus& corpus, const std::string& jsonl_path,
                 const std::string& manifest_path) {
  std::ofstream out(jsonl_path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write corpus '" + jsonl_path + "'");
  write_corpus(corpus, out);
  std::ofstream mout(manifest_path, std::ios::binary | std::ios::trunc);
  if (!mout) fail(ErrorCode::kIo, "cannot write manifest '" + manifest_path + "'");
  write_manifest({corpus.feature_dim, corpus.code_vocab}, mout);
  if (!out || !mout) fail(ErrorCode::kIo, "write failed for '" + jsonl_path + "'");
}

double split_position(const std::string& encounter_id, std::uint64_t seed) {
  unsigned char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<unsigned char>(seed >> (8 * i));
  std::uint64_t h = fnv1a64(seed_bytes);
  h = fnv1a64({reinterpret_cast<const unsigned char*>(encounter_id.data()),
               encounter_id.size()},
              h);
  h = fmix64(h);
  // 2^-64; the product of a 64-bit integer and this constant is < 1 except
  // when rounding carries to 1.0, which is clamped.
  const double pos = static_cast<double>(h) * 0x1.0p-64;
  return pos < 1.0 ? pos : std::nextafter(1.0, 0.0);
}

CorpusSplit split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                         std::uint64_t seed) {
  if (corpus.encounters.empty()) fail(ErrorCode::kInvalidArgument, "cannot split an empty corpus");
  require(ratios.train >= 0 && ratios.dev >= 0 && ratios.test >= 0,
          "split ratios must be nonnegative");
  require(std::abs(ratios.train + ratios.dev + ratios.test - 1.0) <= 1e-9,
          "split ratios must sum to 1");
  CorpusSplit out;
  for (Corpus* part : {&out.train, &out.dev, &out.test}) {
    part->feature_dim = corpus.feature_dim;
    part->code_vocab = corpus.code_vocab;
  }
  for (const auto& enc : corpus.encounters) {
    const double u = split_position(enc.encounter_id, seed);
    if (u < ratios.train) {
      out.train.encounters.push_back(enc);
    } else if (u < ratios.train + ratios.dev) {
      out.dev.encounters.push_back(enc);
    } else {
      out.test.encounters.push_back(enc);
    }
  }
  return out;
}

BinaryLabeledSet binarize(const Corpus& corpus, const CodeId& target) {
  if (!corpus.code_vocab.contains(target)) {
    fail(ErrorCode::kNotFound, "unknown code '" + target + "'");
  }
  BinaryLabeledSet set;
  set.target = target;
  set.feature_dim = corpus.feature_dim;
  set.items.reserve(corpus.encounters.size());
  for (const auto& enc : corpus.encounters) {
    set.items.push_back(
        {&enc, enc.has_code(target) ? Label::kPositive : Label::kNegative});
  }
  return set;
}

std::vector<CodeStat> code_stats(const Corpus& corpus) {
  require(!corpus.encounters.empty(), "code_stats needs a nonempty corpus");
  std::vector<CodeStat> stats;
  for (const auto& code : corpus.code_vocab) {
    CodeStat s;
    s.code = code;
    std::size_t docs = 0;
    for (const auto& enc : corpus.encounters) {
      if (enc.has_code(code)) {
        ++s.carriers;
        docs += enc.documents.size();
      }
    }
    s.prevalence = static_cast<double>(s.carriers) /
                   static_cast<double>(corpus.encounters.size());
    s.mean_docs = s.carriers ? static_cast<double>(docs) / static_cast<double>(s.carriers) : 0.0;
    stats.push_back(std::move(s));
  }
  std::stable_sort(stats.begin(), stats.end(), [](const CodeStat& a, const CodeStat& b) {
    if (a.carriers != b.carriers) return a.carriers > b.carriers;
    return a.code < b.code;
  });
  return stats;
}

}  // namespace eldan
