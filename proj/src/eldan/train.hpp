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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eldan/autodiff.hpp"
#include "eldan/corpus.hpp"
#include "eldan/model.hpp"

namespace eldan {

struct TrainConfig {
  std::uint32_t batch_size = 64;
  double lr = 0.01;
  double momentum = 0.9;
  double resample_ratio = 6.0;  // negatives per positive
  std::uint32_t max_epochs = 30;
  std::uint32_t patience = 5;
  std::uint64_t seed = 0;
  Mode mode = Mode::kEldan;
  bool transfer = false;
  std::uint32_t embed_dim = 300;
  std::uint32_t fc1_dim = 300;
  std::uint32_t fc2_dim = 300;
  std::uint32_t fc3_dim = 300;

  void validate() const;
  Dims dims(std::uint32_t feature_dim) const;
};

TrainConfig parse_train_config(const std::string& json_text, TrainConfig base = {});
std::string train_config_to_json(const TrainConfig& cfg);

struct OptimizerState {
  Gradients velocity;

  static OptimizerState zeros_like(const ModelParams& params) {
    return {Gradients::zeros_like(params)};
  }
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double dev_f1 = 0.0;
  double dev_loss = 0.0;
  std::size_t samples = 0;
  std::size_t positives = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::uint32_t best_epoch = 0;

  std::string to_tsv() const;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

// Epoch seed for resampling and shuffling.
std::uint64_t epoch_seed(std::uint64_t seed, std::uint32_t epoch);

// Every positive plus each negative with probability min(1, ratio * P / N),
// shuffled. Throws when the set has no positives.
std::vector<std::size_t> resample_epoch(const BinaryLabeledSet& set, double ratio,
                                        std::uint64_t epoch_seed);

// v <- momentum * v + g; theta <- theta - lr * v.
void sgd_momentum_step(ModelParams& params, OptimizerState& state, const Gradients& grads,
                       double lr, double momentum);

// Parameters before the first optimizer step: init_params(cfg.seed), with
// W_Embedding replaced by `init_embedding` when given.
ModelParams initial_params(const TrainConfig& cfg, std::uint32_t feature_dim, const CodeId& target,
                           const Matrix* init_embedding);

TrainResult train_code(const BinaryLabeledSet& train, const BinaryLabeledSet& dev,
                       const TrainConfig& cfg, const Matrix* init_embedding = nullptr);

struct SweepEntry {
  CodeId code;
  bool ok = false;
  std::string message;  // failure reason when !ok
  std::optional<TrainResult> result;
  // The W_Embedding training started from, and the code it was taken from
  // (empty when trained from scratch).
  Matrix initial_embedding;
  CodeId transfer_from;
};

// Canonical file stem: <code>.<mode>[.transfer]
std::string model_stem(const CodeId& code, Mode mode, bool transfer);

// Trains one model per code in the given (prevalence-ranked) order. With
// cfg.transfer each model starts from the previous successful model's
// W_Embedding, so the sweep is sequential; otherwise codes are independent
// and run on up to `threads` workers. Per-code failures are recorded, not
// thrown. When `out_dir` is set, models and histories are written there.
std::vector<SweepEntry> train_all(const Corpus& train, const Corpus& dev,
                                  const std::vector<CodeId>& ranked_codes, const TrainConfig& cfg,
                                  const std::optional<std::string>& out_dir = std::nullopt,
                                  unsigned threads = 1);

}  // namespace eldan
