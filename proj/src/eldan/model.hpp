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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eldan/corpus.hpp"
#include "eldan/tensor.hpp"

namespace eldan {

enum class Mode { kEldan, kEldn };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

struct Dims {
  static constexpr std::uint32_t kClasses = 2;

  std::uint32_t feature_dim = 0;
  std::uint32_t embed_dim = 300;
  std::uint32_t fc1_dim = 300;
  std::uint32_t fc2_dim = 300;
  std::uint32_t fc3_dim = 300;

  void validate() const;

  friend bool operator==(const Dims&, const Dims&) = default;
};

// Every learnable tensor of the network. The attention branch (fc3, attention
// vector) is left empty in ELDN mode.
struct ParamTensors {
  Matrix embedding;  // embed_dim x feature_dim
  Matrix fc1_w;      // fc1 x embed
  Vector fc1_b;
  Matrix fc2_w;      // fc2 x fc1
  Vector fc2_b;
  Matrix fc3_w;      // fc3 x fc2
  Vector fc3_b;
  Vector attention;  // fc3
  Matrix fc4_w;      // 2 x fc2
  Vector fc4_b;

  friend bool operator==(const ParamTensors&, const ParamTensors&) = default;
};

// Visits the present tensors in file order as (name, span) pairs.
template <class Tensors, class Fn>
void for_each_tensor(Tensors& t, Fn&& fn) {
  auto emit = [&](const char* name, auto& storage) {
    if constexpr (requires { storage.data.data(); }) {
      if (!storage.data.empty()) fn(name, std::span(storage.data));
    } else {
      if (!storage.empty()) fn(name, std::span(storage));
    }
  };
  emit("W_Embedding", t.embedding);
  emit("W_FC1", t.fc1_w);
  emit("b_FC1", t.fc1_b);
  emit("W_FC2", t.fc2_w);
  emit("b_FC2", t.fc2_b);
  emit("W_FC3", t.fc3_w);
  emit("b_FC3", t.fc3_b);
  emit("v_attention", t.attention);
  emit("W_FC4", t.fc4_w);
  emit("b_FC4", t.fc4_b);
}

struct ModelParams : ParamTensors {
  Dims dims;
  Mode mode = Mode::kEldan;
  CodeId target;
  std::uint64_t seed = 0;

  bool has_attention() const { return mode == Mode::kEldan; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Zero tensors with the shapes implied by (dims, mode).
ParamTensors zero_tensors(const Dims& dims, Mode mode);

// Glorot-uniform weights, zero biases; v_attention uses fan_out = 1.
ModelParams init_params(const Dims& dims, Mode mode, std::uint64_t seed,
                        const CodeId& target = {});

struct DocumentTrace {
  Vector h0;
  Vector h1;
  Vector d;
  Vector u;  // empty in ELDN mode
  double score = 0.0;
  double attention = 0.0;
};

struct ForwardTrace {
  std::vector<DocumentTrace> docs;
  Vector encounter;
  std::array<double, 2> logits{};
  std::array<double, 2> probs{};

  double positive_probability() const { return probs[1]; }
  Label predicted() const { return probs[1] > probs[0] ? Label::kPositive : Label::kNegative; }
  std::vector<double> attention() const;
};

// In-place softmax with max subtraction.
void softmax_inplace(std::span<double> z);
double log_sum_exp(std::span<const double> z);

Vector embed_document(const SparseDocVector& x, const Matrix& embedding);

struct EncodedDocument {
  Vector h0;
  Vector h1;
  Vector d;
};
EncodedDocument encode_document(const SparseDocVector& x, const ModelParams& params);

struct AttentionResult {
  std::vector<Vector> u;
  std::vector<double> scores;
  std::vector<double> weights;
};
AttentionResult attention_weights(std::span<const Vector> d_list, const ModelParams& params);

Vector pool_encounter(std::span<const Vector> d_list, std::span<const double> a);

ForwardTrace predict(const Encounter& enc, const ModelParams& params);

// -log p(y), computed from the logits by log-sum-exp.
double nll_loss(const ForwardTrace& trace, Label y);

void check_compatible(const ModelParams& params, std::uint32_t feature_dim);

// Binary model file: "ELDAN\x01", u64 little-endian header length, JSON
// header, then little-endian row-major arrays in for_each_tensor order.
void save_model(const ModelParams& params, const std::string& path, int value_width = 64);
void write_model(const ModelParams& params, std::ostream& out, int value_width = 64);
ModelParams load_model(const std::string& path,
                       std::optional<std::uint32_t> expected_feature_dim = std::nullopt);
ModelParams read_model(std::istream& in,
                       std::optional<std::uint32_t> expected_feature_dim = std::nullopt);

}  // namespace eldan
