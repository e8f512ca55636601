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
#include <filesystem>
#include <set>

#include "eldan/error.hpp"
#include "eldan/eval.hpp"
#include "eldan/synthgen.hpp"
#include "eldan/train.hpp"
#include "test_util.hpp"

using namespace eldan;
using eldan::testing::doc;
using eldan::testing::encounter;

namespace {

Corpus labeled_corpus(std::size_t positives, std::size_t negatives) {
  Corpus c;
  c.feature_dim = 4;
  c.code_vocab = {"T"};
  for (std::size_t i = 0; i < positives + negatives; ++i) {
    c.encounters.push_back(encounter("e" + std::to_string(i), {doc("d", {{0, 1.0}})},
                                     i < positives ? CodeSet{"T"} : CodeSet{}));
  }
  return c;
}

TrainConfig small_cfg() {
  TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.fc1_dim = 8;
  cfg.fc2_dim = 8;
  cfg.fc3_dim = 8;
  cfg.max_epochs = 4;
  cfg.patience = 4;
  cfg.batch_size = 8;
  cfg.seed = 3;
  return cfg;
}

// Separable toy: positives carry feature 0, negatives feature 1.
Corpus toy_corpus(bool flipped = false) {
  Corpus c;
  c.feature_dim = 6;
  c.code_vocab = {"T"};
  for (int i = 0; i < 8; ++i) {
    const bool pos = i % 2 == 0;
    std::vector<SparseDocVector> docs = {doc("n", {{static_cast<std::uint32_t>(2 + i % 4), 1.0}})};
    docs.push_back(doc("s", {{pos != flipped ? 0u : 1u, 1.0}}));
    c.encounters.push_back(encounter("t" + std::to_string(i), docs, pos ? CodeSet{"T"} : CodeSet{}));
  }
  return c;
}

Corpus synthetic(std::uint64_t seed, std::uint32_t n = 300) {
  GenConfig g;
  g.n_encounters = n;
  g.feature_dim = 120;
  g.background_features_per_doc = 6;
  g.signal_strength = 3;
  g.codes = {{"A", 0.3, {100, 101, 102, 103}, 1},
             {"B", 0.2, {104, 105, 106, 107}, 1},
             {"C", 0.1, {108, 109, 110, 111}, 1}};
  return generate(g, seed).corpus;
}

}  // namespace

TEST_CASE("resampling keeps positives and subsamples negatives") {
  const auto c = labeled_corpus(10, 600);
  const auto set = binarize(c, "T");
  double total_negatives = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto idx = resample_epoch(set, 6.0, seed);
    std::size_t pos = 0, neg = 0;
    for (auto i : idx) (set.items[i].label == Label::kPositive ? pos : neg)++;
    CHECK(pos == 10);
    CHECK(std::abs(static_cast<double>(neg) - 60.0) <= 3.0 * std::sqrt(600 * 0.1 * 0.9));
    CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    total_negatives += static_cast<double>(neg);
  }
  // Mean over 100 epochs: standard error sqrt(54 / 100).
  CHECK(std::abs(total_negatives / 100.0 - 60.0) <= 3.0 * std::sqrt(54.0 / 100.0));
}

TEST_CASE("resampling is capped at probability one and deterministic") {
  const auto c = labeled_corpus(10, 50);
  const auto set = binarize(c, "T");
  const auto a = resample_epoch(set, 6.0, 9);
  CHECK(a.size() == 60);
  CHECK(a == resample_epoch(set, 6.0, 9));
  const auto big = binarize(labeled_corpus(20, 1000), "T");
  CHECK(resample_epoch(big, 6.0, 1) == resample_epoch(big, 6.0, 1));
  CHECK(resample_epoch(big, 6.0, 1) != resample_epoch(big, 6.0, 2));
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted != a);
}

TEST_CASE("resampling without positives fails") {
  const auto set = binarize(labeled_corpus(0, 20), "T");
  CHECK_THROWS_AS(resample_epoch(set, 6.0, 1), Error);
}

TEST_CASE("momentum recurrence") {
  const Dims dims{3, 2, 2, 2, 2};
  auto params = init_params(dims, Mode::kEldan, 1);
  const auto start = params;
  auto grads = Gradients::zeros_like(params);
  for_each_tensor(grads, [](const char*, std::span<double> s) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 0.1 * static_cast<double>(i + 1);
  });
  std::vector<std::span<const double>> g, before, after;

  SUBCASE("two constant steps move lr*g*2.9") {
    auto state = OptimizerState::zeros_like(params);
    sgd_momentum_step(params, state, grads, 0.01, 0.9);
    sgd_momentum_step(params, state, grads, 0.01, 0.9);
    for_each_tensor(grads, [&](const char*, std::span<const double> s) { g.push_back(s); });
    for_each_tensor(start, [&](const char*, std::span<const double> s) { before.push_back(s); });
    for_each_tensor(params, [&](const char*, std::span<const double> s) { after.push_back(s); });
    for (std::size_t t = 0; t < g.size(); ++t) {
      for (std::size_t i = 0; i < g[t].size(); ++i) {
        CHECK(std::abs((before[t][i] - after[t][i]) - 0.01 * g[t][i] * 2.9) <= 1e-15);
      }
    }
  }
  SUBCASE("zero momentum is plain SGD") {
    auto state = OptimizerState::zeros_like(params);
    sgd_momentum_step(params, state, grads, 0.05, 0.0);
    CHECK(params.fc4_b[1] == start.fc4_b[1] - 0.05 * grads.fc4_b[1]);
  }
  SUBCASE("zero gradient coasts on velocity") {
    auto state = OptimizerState::zeros_like(params);
    sgd_momentum_step(params, state, grads, 0.01, 0.9);
    const auto mid = params;
    const double v = state.velocity.fc1_b[0];
    sgd_momentum_step(params, state, Gradients::zeros_like(params), 0.01, 0.9);
    CHECK(params.fc1_b[0] == doctest::Approx(mid.fc1_b[0] - 0.01 * 0.9 * v).epsilon(1e-15));
  }
  SUBCASE("non-finite gradients abort") {
    auto state = OptimizerState::zeros_like(params);
    grads.fc2_b[0] = NAN;
    try {
      sgd_momentum_step(params, state, grads, 0.01, 0.9);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNumeric);
    }
  }
}

TEST_CASE("config validation and JSON") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error&) {
      return true;
    }
    return false;
  };
  CHECK(bad([](TrainConfig& c) { c.batch_size = 0; }));
  CHECK(bad([](TrainConfig& c) { c.lr = 0; }));
  CHECK(bad([](TrainConfig& c) { c.momentum = 1.0; }));
  CHECK(bad([](TrainConfig& c) { c.momentum = -0.1; }));
  CHECK(bad([](TrainConfig& c) { c.resample_ratio = 0; }));
  CHECK(bad([](TrainConfig& c) { c.max_epochs = 0; }));
  const auto again = parse_train_config(train_config_to_json(small_cfg()));
  CHECK(train_config_to_json(again) == train_config_to_json(small_cfg()));
  const auto partial = parse_train_config(R"({"lr": 0.5, "mode": "eldn"})");
  CHECK(partial.lr == 0.5);
  CHECK(partial.mode == Mode::kEldn);
  CHECK(partial.batch_size == 64);
  CHECK_THROWS_AS(parse_train_config(R"({"lr": "fast"})"), Error);
}

TEST_CASE("separable toy set is overfit") {
  const auto c = toy_corpus();
  const auto set = binarize(c, "T");
  TrainConfig cfg = small_cfg();
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.batch_size = 1;
  const auto result = train_code(set, set, cfg);
  double loss = 0.0;
  for (const auto& item : set.items) loss += nll_loss(predict(*item.encounter, result.params), item.label);
  loss /= static_cast<double>(set.size());
  CHECK(loss < 0.01);
  CHECK(result.history.epochs.back().train_loss < 0.01);
}

TEST_CASE("initial embedding is installed exactly") {
  const auto c = toy_corpus();
  TrainConfig cfg = small_cfg();
  Matrix emb(cfg.embed_dim, c.feature_dim);
  for (std::size_t i = 0; i < emb.data.size(); ++i) emb.data[i] = 0.001 * static_cast<double>(i);
  const auto p = initial_params(cfg, c.feature_dim, "T", &emb);
  CHECK(p.embedding == emb);
  const auto plain = initial_params(cfg, c.feature_dim, "T", nullptr);
  CHECK(plain == init_params(cfg.dims(c.feature_dim), cfg.mode, cfg.seed, "T"));
  Matrix wrong(cfg.embed_dim, c.feature_dim + 1);
  CHECK_THROWS_AS(initial_params(cfg, c.feature_dim, "T", &wrong), Error);
}

TEST_CASE("training is deterministic and returns the best dev snapshot") {
  const auto c = synthetic(4);
  const auto split = split_corpus(c, {0.7, 0.3, 0.0}, 1);
  const auto train = binarize(split.train, "B");
  const auto dev = binarize(split.dev, "B");
  TrainConfig cfg = small_cfg();
  cfg.max_epochs = 6;
  const auto a = train_code(train, dev, cfg);
  const auto b = train_code(train, dev, cfg);
  CHECK(a.params == b.params);
  CHECK(a.history.to_tsv() == b.history.to_tsv());
  double best = -1.0;
  for (const auto& e : a.history.epochs) best = std::max(best, e.dev_f1);
  REQUIRE(a.history.best_epoch >= 1);
  CHECK(a.history.epochs[a.history.best_epoch - 1].dev_f1 == best);
  CHECK(encounter_f1(a.params, dev).f1 == doctest::Approx(best).epsilon(1e-12));
  for (const auto& e : a.history.epochs) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(e.positives == train.positives());
  }
  CHECK(a.history.to_tsv().rfind("epoch\tloss\tdev_f1\tdev_loss\tsamples\tpositives\tbest\n", 0) == 0);
}

TEST_CASE("patience stops training early") {
  const auto c = toy_corpus();
  const auto set = binarize(c, "T");
  const auto flipped = toy_corpus(true);
  const auto dev = binarize(flipped, "T");
  TrainConfig cfg = small_cfg();
  cfg.max_epochs = 100;
  cfg.patience = 2;
  cfg.batch_size = 1;
  const auto result = train_code(set, dev, cfg);
  CHECK(result.history.epochs.size() < 100);
  CHECK(result.history.epochs.size() - result.history.best_epoch == 2);
}

TEST_CASE("train_code rejects a set without positives") {
  const auto c = labeled_corpus(0, 10);
  const auto set = binarize(c, "T");
  CHECK_THROWS_AS(train_code(set, set, small_cfg()), Error);
}

TEST_CASE("transfer sweep chains embeddings bitwise") {
  const auto c = synthetic(8);
  const auto split = split_corpus(c, {0.8, 0.2, 0.0}, 3);
  TrainConfig cfg = small_cfg();
  cfg.transfer = true;
  const std::vector<CodeId> ranked = {"A", "B", "C"};
  const auto sweep = train_all(split.train, split.dev, ranked, cfg);
  REQUIRE(sweep.size() == 3);
  for (const auto& s : sweep) REQUIRE(s.ok);
  CHECK(sweep[0].transfer_from.empty());
  CHECK(sweep[0].initial_embedding == initial_params(cfg, c.feature_dim, "A", nullptr).embedding);
  CHECK(sweep[1].transfer_from == "A");
  CHECK(sweep[1].initial_embedding == sweep[0].result->params.embedding);
  CHECK(sweep[2].transfer_from == "B");
  CHECK(sweep[2].initial_embedding == sweep[1].result->params.embedding);
}

TEST_CASE("independent sweep does not depend on order or threads") {
  const auto c = synthetic(8);
  const auto split = split_corpus(c, {0.8, 0.2, 0.0}, 3);
  TrainConfig cfg = small_cfg();
  const auto forward = train_all(split.train, split.dev, {"A", "B", "C"}, cfg, std::nullopt, 1);
  const auto backward = train_all(split.train, split.dev, {"C", "B", "A"}, cfg, std::nullopt, 3);
  REQUIRE(forward.size() == 3);
  REQUIRE(backward.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(forward[i].code == backward[2 - i].code);
    CHECK(forward[i].result->params == backward[2 - i].result->params);
  }
}

TEST_CASE("codes without train positives are skipped") {
  Corpus c = synthetic(8);
  c.code_vocab.insert("Z");
  const auto split = split_corpus(c, {0.8, 0.2, 0.0}, 3);
  for (bool transfer : {false, true}) {
    TrainConfig cfg = small_cfg();
    cfg.transfer = transfer;
    const auto sweep = train_all(split.train, split.dev, {"A", "Z", "B"}, cfg);
    REQUIRE(sweep.size() == 3);
    CHECK(sweep[0].ok);
    CHECK_FALSE(sweep[1].ok);
    CHECK(sweep[1].message.find("positive") != std::string::npos);
    CHECK(sweep[2].ok);
    if (transfer) CHECK(sweep[2].transfer_from == "A");
  }
}

TEST_CASE("sweep persists models and histories") {
  const auto c = synthetic(2, 150);
  const auto split = split_corpus(c, {0.8, 0.2, 0.0}, 3);
  const auto dir = std::filesystem::temp_directory_path() / "eldan_test_sweep";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  TrainConfig cfg = small_cfg();
  cfg.max_epochs = 2;
  cfg.transfer = true;
  const auto sweep = train_all(split.train, split.dev, {"A", "B"}, cfg, dir.string());
  CHECK(model_stem("A", Mode::kEldan, true) == "A.eldan.transfer");
  CHECK(model_stem("A", Mode::kEldn, false) == "A.eldn");
  for (const auto& s : sweep) {
    const auto stem = dir / model_stem(s.code, cfg.mode, true);
    REQUIRE(std::filesystem::exists(stem.string() + ".eldan"));
    CHECK(std::filesystem::exists(stem.string() + ".history.tsv"));
    CHECK(load_model(stem.string() + ".eldan") == s.result->params);
  }
  std::filesystem::remove_all(dir);
}
