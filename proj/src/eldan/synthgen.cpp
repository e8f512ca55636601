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

#include "eldan/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "eldan/error.hpp"
#include "eldan/rng.hpp"

namespace eldan {

using nlohmann::json;

std::vector<HistogramBin> raw_default_histogram() {
  static constexpr double kCounts[] = {145518, 113706, 72580, 45864, 28364, 17935,
                                       12242,  8274,   5648,  3989,  2863,  2190,
                                       1663,   1217,   997,   816};
  std::vector<HistogramBin> bins;
  for (std::uint32_t m = 1; m <= 16; ++m) bins.push_back({m, kCounts[m - 1]});
  return bins;
}

std::vector<HistogramBin> default_histogram() {
  auto bins = raw_default_histogram();
  double total = 0.0;
  for (const auto& b : bins) total += b.weight;
  for (auto& b : bins) b.weight /= total;
  return bins;
}

void validate_gen_config(const GenConfig& c) {
  require(c.n_encounters > 0, "n_encounters must be positive");
  require(c.feature_dim > 0, "feature_dim must be positive");
  require(c.background_zipf_s > 0, "background_zipf_s must be positive");
  require(c.background_features_per_doc > 0 &&
              c.background_features_per_doc <= c.feature_dim,
          "background_features_per_doc must be in [1, feature_dim]");
  require(c.signal_leak_prob >= 0 && c.signal_leak_prob < 1,
          "signal_leak_prob must be in [0, 1)");
  require(c.signal_strength > 0, "signal_strength must be positive");
  double total = 0.0;
  for (const auto& b : c.docs_histogram) {
    require(b.doc_count >= 1, "histogram doc_count must be >= 1");
    require(b.weight >= 0 && std::isfinite(b.weight), "histogram weights must be nonnegative");
    total += b.weight;
  }
  require(c.docs_histogram.empty() || total > 0, "histogram weights must not all be zero");
  std::set<std::uint32_t> used;
  std::set<CodeId> names;
  for (const auto& pc : c.codes) {
    require(!pc.code.empty(), "code symbol must be nonempty");
    require(names.insert(pc.code).second, "duplicate code '" + pc.code + "'");
    require(pc.prevalence > 0 && pc.prevalence < 1,
            "prevalence of '" + pc.code + "' must be in (0, 1)");
    require(pc.n_source_docs >= 1, "n_source_docs must be positive");
    require(!pc.signal_features.empty(), "code '" + pc.code + "' has no signal features");
    require(pc.signal_features.size() >= c.signal_strength,
            "code '" + pc.code + "' has fewer signal features than signal_strength");
    std::set<std::uint32_t> own;
    for (auto f : pc.signal_features) {
      require(f < c.feature_dim, "signal feature " + std::to_string(f) + " >= feature_dim");
      require(own.insert(f).second, "duplicate signal feature " + std::to_string(f));
      require(!used.contains(f), "signal feature " + std::to_string(f) +
                                     " is shared between codes");
    }
    used.insert(own.begin(), own.end());
  }
}

namespace {

// Inverse-CDF sampler over a finite discrete distribution.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights) {
    cumulative_.reserve(weights.size());
    double acc = 0.0;
    for (double w : weights) cumulative_.push_back(acc += w);
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform01() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    return std::min(idx, cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

// Picks k distinct indices out of [0, n) by a partial Fisher-Yates shuffle.
std::vector<std::uint32_t> choose_distinct(Rng& rng, std::uint32_t n, std::uint32_t k) {
  std::vector<std::uint32_t> pool(n);
  for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
  for (std::uint32_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.below(n - i)]);
  }
  pool.resize(k);
  return pool;
}

std::string encounter_name(std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "enc%07u", i);
  return buf;
}

}  // namespace

GenResult generate(const GenConfig& config, std::uint64_t seed) {
  validate_gen_config(config);
  GenResult result;
  Corpus& corpus = result.corpus;
  corpus.feature_dim = config.feature_dim;
  for (const auto& pc : config.codes) {
    corpus.code_vocab.insert(pc.code);
    if (pc.prevalence * config.n_encounters < 1.0) {
      result.warnings.push_back("code '" + pc.code + "': expected positives " +
                                std::to_string(pc.prevalence * config.n_encounters) +
                                " < 1 for " + std::to_string(config.n_encounters) +
                                " encounters");
    }
  }

  const auto bins = config.docs_histogram.empty() ? default_histogram() : config.docs_histogram;
  std::vector<double> bin_weights;
  for (const auto& b : bins) bin_weights.push_back(b.weight);
  const DiscreteSampler doc_count_sampler(bin_weights);

  std::vector<double> zipf(config.feature_dim);
  for (std::uint32_t k = 0; k < config.feature_dim; ++k) {
    zipf[k] = std::pow(static_cast<double>(k + 1), -config.background_zipf_s);
  }
  const DiscreteSampler background_sampler(zipf);

  corpus.encounters.reserve(config.n_encounters);
  for (std::uint32_t i = 0; i < config.n_encounters; ++i) {
    Rng rng(derive_seed(seed, i));
    Encounter enc;
    enc.encounter_id = encounter_name(i);
    const std::uint32_t m = bins[doc_count_sampler.sample(rng)].doc_count;

    std::vector<std::set<std::uint32_t>> features(m);
    for (auto& f : features) {
      while (f.size() < config.background_features_per_doc) {
        f.insert(static_cast<std::uint32_t>(background_sampler.sample(rng)));
      }
    }

    std::vector<CodeSet> doc_codes(m);
    for (const auto& pc : config.codes) {
      const auto n_signal = static_cast<std::uint32_t>(pc.signal_features.size());
      if (rng.bernoulli(pc.prevalence)) {
        enc.codes.insert(pc.code);
        const auto sources = choose_distinct(rng, m, std::min(pc.n_source_docs, m));
        for (auto doc : sources) {
          for (auto s : choose_distinct(rng, n_signal, config.signal_strength)) {
            features[doc].insert(pc.signal_features[s]);
          }
          doc_codes[doc].insert(pc.code);
        }
      } else if (config.signal_leak_prob > 0) {
        for (auto& f : features) {
          for (std::uint32_t slot = 0; slot < config.signal_strength; ++slot) {
            if (rng.bernoulli(config.signal_leak_prob)) {
              f.insert(pc.signal_features[rng.below(n_signal)]);
            }
          }
        }
      }
    }

    for (std::uint32_t j = 0; j < m; ++j) {
      SparseDocVector doc;
      doc.doc_id = enc.encounter_id + "/" + std::to_string(j);
      for (auto f : features[j]) doc.entries.push_back({f, 1.0});
      enc.documents.push_back(std::move(doc));
    }
    enc.doc_codes = std::move(doc_codes);
    corpus.encounters.push_back(std::move(enc));
  }
  return result;
}

GenConfig parse_gen_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("gen config: ") + e.what());
  }
  require(j.is_object(), "gen config must be a JSON object");
  GenConfig c;
  try {
    c.n_encounters = j.value("n_encounters", c.n_encounters);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.background_zipf_s = j.value("background_zipf_s", c.background_zipf_s);
    c.background_features_per_doc =
        j.value("background_features_per_doc", c.background_features_per_doc);
    c.signal_leak_prob = j.value("signal_leak_prob", c.signal_leak_prob);
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    if (j.contains("docs_histogram")) {
      for (const auto& bin : j.at("docs_histogram")) {
        c.docs_histogram.push_back({bin.at(0).get<std::uint32_t>(), bin.at(1).get<double>()});
      }
    }
    if (j.contains("codes")) {
      for (const auto& cj : j.at("codes")) {
        PlantedCode pc;
        pc.code = cj.at("code").get<std::string>();
        pc.prevalence = cj.at("prevalence").get<double>();
        pc.signal_features = cj.at("signal_features").get<std::vector<std::uint32_t>>();
        pc.n_source_docs = cj.value("n_source_docs", pc.n_source_docs);
        c.codes.push_back(std::move(pc));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("gen config: ") + e.what());
  }
  validate_gen_config(c);
  return c;
}

std::string gen_config_to_json(const GenConfig& c) {
  nlohmann::ordered_json j;
  j["n_encounters"] = c.n_encounters;
  j["feature_dim"] = c.feature_dim;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& b : c.docs_histogram) hist.push_back({b.doc_count, b.weight});
  j["docs_histogram"] = std::move(hist);
  auto codes = nlohmann::ordered_json::array();
  for (const auto& pc : c.codes) {
    nlohmann::ordered_json cj;
    cj["code"] = pc.code;
    cj["prevalence"] = pc.prevalence;
    cj["signal_features"] = pc.signal_features;
    cj["n_source_docs"] = pc.n_source_docs;
    codes.push_back(std::move(cj));
  }
  j["codes"] = std::move(codes);
  j["background_zipf_s"] = c.background_zipf_s;
  j["background_features_per_doc"] = c.background_features_per_doc;
  j["signal_leak_prob"] = c.signal_leak_prob;
  j["signal_strength"] = c.signal_strength;
  return j.dump(2);
}

}  // namespace eldan
