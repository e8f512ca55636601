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
#include <string>
#include <vector>

#include "eldan/corpus.hpp"

namespace eldan {

struct HistogramBin {
  std::uint32_t doc_count = 0;
  double weight = 0.0;
};

struct PlantedCode {
  CodeId code;
  double prevalence = 0.0;
  std::vector<std::uint32_t> signal_features;
  std::uint32_t n_source_docs = 1;
};

struct GenConfig {
  std::uint32_t n_encounters = 1000;
  std::uint32_t feature_dim = 2000;
  std::vector<HistogramBin> docs_histogram;  // empty means default_histogram()
  std::vector<PlantedCode> codes;
  double background_zipf_s = 1.1;
  std::uint32_t background_features_per_doc = 20;
  double signal_leak_prob = 0.0;
  std::uint32_t signal_strength = 4;
};

struct GenResult {
  Corpus corpus;
  std::vector<std::string> warnings;
};

// Docs-per-encounter shape of the outpatient corpus, unnormalized counts for
// m = 1..16.
std::vector<HistogramBin> raw_default_histogram();

// Same bins with weights summing to 1.
std::vector<HistogramBin> default_histogram();

void validate_gen_config(const GenConfig& config);

// Encounters draw m from the histogram and Zipf background features per
// document. Each code is planted independently: a positive encounter gets
// signal_strength distinct signal features injected into each of
// min(n_source_docs, m) distinct documents, which are annotated in doc_codes.
// In encounters negative for a code, every document has signal_strength leak
// slots, each filled with a random signal feature of that code with
// probability signal_leak_prob.
GenResult generate(const GenConfig& config, std::uint64_t seed);

GenConfig parse_gen_config(const std::string& json_text);
std::string gen_config_to_json(const GenConfig& config);

}  // namespace eldan
