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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "eldan/error.hpp"
#include "eldan/synthgen.hpp"

using namespace eldan;

namespace {

GenConfig small_config() {
  GenConfig cfg;
  cfg.n_encounters = 100;
  cfg.feature_dim = 200;
  cfg.background_features_per_doc = 8;
  cfg.signal_strength = 3;
  cfg.codes = {{"C1", 0.5, {150, 151, 152, 153, 154}, 1}};
  return cfg;
}

std::string serialized(const Corpus& c) {
  std::ostringstream out;
  write_corpus(c, out);
  return out.str();
}

bool has_feature(const SparseDocVector& d, std::uint32_t f) {
  return std::any_of(d.entries.begin(), d.entries.end(),
                     [&](const FeatureEntry& e) { return e.index == f; });
}

}  // namespace

TEST_CASE("raw histogram bins match the outpatient table") {
  const std::vector<double> expected = {145518, 113706, 72580, 45864, 28364, 17935, 12242, 8274,
                                        5648,   3989,   2863,  2190,  1663,  1217,  997,   816};
  const auto raw = raw_default_histogram();
  REQUIRE(raw.size() == 16);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(raw[i].doc_count == i + 1);
    CHECK(raw[i].weight == expected[i]);
  }
  CHECK(raw.front().weight == 145518);
  CHECK(raw.back().weight == 816);
}

TEST_CASE("normalized histogram sums to one") {
  const auto h = default_histogram();
  double sum = 0.0;
  for (const auto& b : h) sum += b.weight;
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  const auto raw = raw_default_histogram();
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0,
                                       [](double a, const HistogramBin& b) { return a + b.weight; });
  for (std::size_t i = 0; i < h.size(); ++i) {
    CHECK(h[i].weight == doctest::Approx(raw[i].weight / total).epsilon(1e-14));
  }
}

TEST_CASE("half-prevalence code stays within the binomial bound") {
  for (std::uint64_t seed : {0ull, 1ull, 17ull, 2024ull}) {
    const auto c = generate(small_config(), seed).corpus;
    std::size_t positives = 0;
    for (const auto& e : c.encounters) positives += e.has_code("C1");
    CHECK(std::abs(static_cast<double>(positives) - 50.0) <= 3.0 * std::sqrt(100 * 0.25));
  }
}

TEST_CASE("without leakage each positive has one annotated source holding every injected feature") {
  GenConfig cfg = small_config();
  cfg.signal_leak_prob = 0.0;
  const std::vector<std::uint32_t> signal = cfg.codes[0].signal_features;
  for (std::uint64_t seed : {3ull, 4ull}) {
    const auto c = generate(cfg, seed).corpus;
    for (const auto& e : c.encounters) {
      REQUIRE(e.doc_codes.has_value());
      std::size_t annotated = 0;
      for (std::size_t j = 0; j < e.documents.size(); ++j) {
        std::size_t hits = 0;
        for (auto f : signal) hits += has_feature(e.documents[j], f);
        const bool is_source = (*e.doc_codes)[j].contains("C1");
        annotated += is_source;
        // Background draws may also land on signal features.
        if (is_source) CHECK(hits >= cfg.signal_strength);
      }
      CHECK(annotated == (e.has_code("C1") ? 1u : 0u));
    }
  }
}

TEST_CASE("source count is capped by the encounter size") {
  GenConfig cfg = small_config();
  cfg.codes[0].n_source_docs = 3;
  const auto c = generate(cfg, 9).corpus;
  for (const auto& e : c.encounters) {
    std::size_t annotated = 0;
    for (const auto& dc : *e.doc_codes) annotated += dc.contains("C1");
    if (e.has_code("C1")) {
      CHECK(annotated == std::min<std::size_t>(3, e.documents.size()));
    } else {
      CHECK(annotated == 0);
    }
  }
}

TEST_CASE("degenerate histogram gives single-document encounters") {
  GenConfig cfg = small_config();
  cfg.docs_histogram = {{1, 1.0}};
  const auto c = generate(cfg, 5).corpus;
  for (const auto& e : c.encounters) CHECK(e.documents.size() == 1);
}

TEST_CASE("generation is deterministic and seed dependent") {
  GenConfig cfg = small_config();
  cfg.signal_leak_prob = 0.2;
  const auto a = serialized(generate(cfg, 11).corpus);
  const auto b = serialized(generate(cfg, 11).corpus);
  const auto other = serialized(generate(cfg, 12).corpus);
  CHECK(a == b);
  CHECK(a != other);
}

TEST_CASE("generated corpora are valid and respect annotation invariants") {
  GenConfig cfg = small_config();
  cfg.signal_leak_prob = 0.3;
  cfg.codes.push_back({"C2", 0.2, {10, 20, 30}, 2});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto c = generate(cfg, seed).corpus;
    CHECK_NOTHROW(validate_corpus(c));
    CHECK(c.feature_dim == cfg.feature_dim);
    CHECK(c.code_vocab == CodeSet{"C1", "C2"});
    for (const auto& e : c.encounters) {
      for (const auto& dc : *e.doc_codes) {
        for (const auto& code : dc) CHECK(e.has_code(code));
      }
      for (const auto& code : e.codes) {
        CHECK(std::any_of(e.doc_codes->begin(), e.doc_codes->end(),
                          [&](const CodeSet& s) { return s.contains(code); }));
      }
      for (const auto& d : e.documents) {
        for (const auto& fe : d.entries) CHECK(fe.value == 1.0);
      }
    }
  }
}

TEST_CASE("leakage puts signal features into negatives") {
  auto leaked = [](double prob) {
    GenConfig cfg = small_config();
    cfg.signal_leak_prob = prob;
    const auto c = generate(cfg, 21).corpus;
    std::size_t n = 0;
    for (const auto& e : c.encounters) {
      if (e.has_code("C1")) continue;
      for (const auto& d : e.documents) {
        for (auto f : cfg.codes[0].signal_features) n += has_feature(d, f);
      }
    }
    return n;
  };
  CHECK(leaked(0.5) > leaked(0.0) + 20);
}

TEST_CASE("docs-per-encounter distribution matches the histogram") {
  GenConfig cfg;
  cfg.n_encounters = 10000;
  cfg.feature_dim = 100;
  cfg.background_features_per_doc = 1;
  cfg.signal_strength = 1;
  cfg.codes = {{"X", 0.1, {99}, 1}};
  const auto c = generate(cfg, 31337).corpus;
  const auto h = default_histogram();
  std::vector<double> observed(h.size(), 0.0);
  for (const auto& e : c.encounters) observed.at(e.documents.size() - 1) += 1.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double expected = h[i].weight * cfg.n_encounters;
    chi2 += (observed[i] - expected) * (observed[i] - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(h.size() - 1));
  const double p = boost::math::cdf(boost::math::complement(dist, chi2));
  CHECK(p > 0.001);
}

TEST_CASE("rare codes warn instead of failing") {
  GenConfig cfg = small_config();
  cfg.codes = {{"R", 0.005, {1, 2, 3}, 1}};
  const auto result = generate(cfg, 1);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("R") != std::string::npos);
  CHECK(generate(small_config(), 1).warnings.empty());
}

TEST_CASE("invalid configurations are rejected") {
  auto rejects = [](auto mutate) {
    GenConfig cfg = small_config();
    mutate(cfg);
    return std::make_pair(
        [&] {
          try {
            validate_gen_config(cfg);
          } catch (const Error&) {
            return true;
          }
          return false;
        }(),
        [&] {
          try {
            generate(cfg, 0);
          } catch (const Error&) {
            return true;
          }
          return false;
        }());
  };
  const std::vector<std::function<void(GenConfig&)>> bad = {
      [](GenConfig& c) { c.n_encounters = 0; },
      [](GenConfig& c) { c.feature_dim = 0; },
      [](GenConfig& c) { c.codes[0].prevalence = 0.0; },
      [](GenConfig& c) { c.codes[0].prevalence = 1.0; },
      [](GenConfig& c) { c.codes.push_back({"C2", 0.1, {154, 160, 161}, 1}); },
      [](GenConfig& c) { c.codes.push_back({"C1", 0.1, {1, 2, 3}, 1}); },
      [](GenConfig& c) { c.codes[0].signal_features = {150, 250}; },
      [](GenConfig& c) { c.codes[0].n_source_docs = 0; },
      [](GenConfig& c) { c.background_zipf_s = 0.0; },
      [](GenConfig& c) { c.background_features_per_doc = 0; },
      [](GenConfig& c) { c.signal_leak_prob = 1.0; },
      [](GenConfig& c) { c.signal_strength = 0; },
      [](GenConfig& c) { c.signal_strength = 6; },
      [](GenConfig& c) { c.docs_histogram = {{1, 0.0}, {2, 0.0}}; },
      [](GenConfig& c) { c.docs_histogram = {{1, -1.0}, {2, 2.0}}; },
      [](GenConfig& c) { c.docs_histogram = {{0, 1.0}}; },
  };
  for (std::size_t i = 0; i < bad.size(); ++i) {
    CAPTURE(i);
    const auto [validated, generated] = rejects(bad[i]);
    CHECK(validated);
    CHECK(generated);
  }
}

TEST_CASE("config JSON round-trips") {
  GenConfig cfg = small_config();
  cfg.docs_histogram = {{1, 2.0}, {3, 1.0}};
  cfg.signal_leak_prob = 0.05;
  const auto text = gen_config_to_json(cfg);
  const auto again = parse_gen_config(text);
  CHECK(gen_config_to_json(again) == text);
  CHECK(again.codes[0].signal_features == cfg.codes[0].signal_features);
  CHECK(again.docs_histogram.size() == 2);
  CHECK_THROWS_AS(parse_gen_config("{\"n_encounters\": \"many\"}"), Error);
  CHECK_THROWS_AS(parse_gen_config("not json"), Error);
}
