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

#include "eldan/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "eldan/error.hpp"
#include "eldan/rng.hpp"

namespace eldan {

std::string_view mode_name(Mode mode) { return mode == Mode::kEldan ? "eldan" : "eldn"; }

Mode parse_mode(std::string_view name) {
  if (name == "eldan" || name == "ELDAN") return Mode::kEldan;
  if (name == "eldn" || name == "ELDN") return Mode::kEldn;
  fail(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(name) + "' (eldan|eldn)");
}

void Dims::validate() const {
  require(feature_dim > 0 && embed_dim > 0 && fc1_dim > 0 && fc2_dim > 0 && fc3_dim > 0,
          "all model dimensions must be positive");
}

ParamTensors zero_tensors(const Dims& d, Mode mode) {
  ParamTensors t;
  t.embedding = Matrix(d.embed_dim, d.feature_dim);
  t.fc1_w = Matrix(d.fc1_dim, d.embed_dim);
  t.fc1_b.assign(d.fc1_dim, 0.0);
  t.fc2_w = Matrix(d.fc2_dim, d.fc1_dim);
  t.fc2_b.assign(d.fc2_dim, 0.0);
  if (mode == Mode::kEldan) {
    t.fc3_w = Matrix(d.fc3_dim, d.fc2_dim);
    t.fc3_b.assign(d.fc3_dim, 0.0);
    t.attention.assign(d.fc3_dim, 0.0);
  }
  t.fc4_w = Matrix(Dims::kClasses, d.fc2_dim);
  t.fc4_b.assign(Dims::kClasses, 0.0);
  return t;
}

namespace {

void glorot_fill(std::span<double> values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = rng.uniform(-limit, limit);
}

}  // namespace

ModelParams init_params(const Dims& dims, Mode mode, std::uint64_t seed, const CodeId& target) {
  dims.validate();
  ModelParams p;
  static_cast<ParamTensors&>(p) = zero_tensors(dims, mode);
  p.dims = dims;
  p.mode = mode;
  p.target = target;
  p.seed = seed;
  // One stream per tensor so the draw for one layer never depends on the
  // size of another.
  auto fill = [&](Matrix& m, std::uint64_t stream) {
    Rng rng(derive_seed(seed, stream));
    glorot_fill(m.data, m.cols, m.rows, rng);
  };
  fill(p.embedding, 0);
  fill(p.fc1_w, 1);
  fill(p.fc2_w, 2);
  if (mode == Mode::kEldan) {
    fill(p.fc3_w, 3);
    Rng rng(derive_seed(seed, 4));
    glorot_fill(p.attention, dims.fc3_dim, 1, rng);
  }
  fill(p.fc4_w, 5);
  return p;
}

std::vector<double> ForwardTrace::attention() const {
  std::vector<double> a;
  a.reserve(docs.size());
  for (const auto& d : docs) a.push_back(d.attention);
  return a;
}

void softmax_inplace(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) total += (v = std::exp(v - mx));
  for (double& v : z) v /= total;
}

double log_sum_exp(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  return mx + std::log(total);
}

Vector embed_document(const SparseDocVector& x, const Matrix& embedding) {
  Vector h0(embedding.rows, 0.0);
  for (const auto& [k, v] : x.entries) {
    if (k >= embedding.cols) {
      fail(ErrorCode::kInvalidArgument,
           "document '" + x.doc_id + "': feature id " + std::to_string(k) +
               " >= feature_dim " + std::to_string(embedding.cols));
    }
    for (std::size_t r = 0; r < embedding.rows; ++r) h0[r] += v * embedding(r, k);
  }
  return h0;
}

namespace {

void tanh_inplace(std::span<double> v) {
  for (double& x : v) x = std::tanh(x);
}

void check_finite(std::span<const double> v, const char* what, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorCode::kNumeric, std::string("non-finite ") + what + " in " + where);
  }
}

}  // namespace

EncodedDocument encode_document(const SparseDocVector& x, const ModelParams& params) {
  EncodedDocument out;
  out.h0 = embed_document(x, params.embedding);
  check_finite(out.h0, "embedding", "document '" + x.doc_id + "'");
  out.h1.resize(params.dims.fc1_dim);
  affine(params.fc1_w, out.h0, params.fc1_b, out.h1);
  tanh_inplace(out.h1);
  out.d.resize(params.dims.fc2_dim);
  affine(params.fc2_w, out.h1, params.fc2_b, out.d);
  tanh_inplace(out.d);
  check_finite(out.d, "document representation", "document '" + x.doc_id + "'");
  return out;
}

AttentionResult attention_weights(std::span<const Vector> d_list, const ModelParams& params) {
  if (d_list.empty()) fail(ErrorCode::kInvalidArgument, "attention over zero documents");
  require(params.has_attention(), "attention_weights requires an ELDAN model");
  AttentionResult r;
  r.u.reserve(d_list.size());
  for (const auto& d : d_list) {
    Vector u(params.dims.fc3_dim);
    affine(params.fc3_w, d, params.fc3_b, u);
    tanh_inplace(u);
    r.scores.push_back(dot(u, params.attention));
    r.u.push_back(std::move(u));
  }
  r.weights = r.scores;
  softmax_inplace(r.weights);
  return r;
}

Vector pool_encounter(std::span<const Vector> d_list, std::span<const double> a) {
  if (d_list.size() != a.size() || d_list.empty()) {
    fail(ErrorCode::kInvalidArgument, "pool_encounter: " + std::to_string(a.size()) +
                                          " weights for " + std::to_string(d_list.size()) +
                                          " documents");
  }
  Vector e(d_list.front().size(), 0.0);
  for (std::size_t j = 0; j < d_list.size(); ++j) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += a[j] * d_list[j][i];
  }
  return e;
}

ForwardTrace predict(const Encounter& enc, const ModelParams& params) {
  if (enc.documents.empty()) {
    fail(ErrorCode::kInvalidArgument, "encounter '" + enc.encounter_id + "' has no documents");
  }
  ForwardTrace t;
  const std::size_t m = enc.documents.size();
  t.docs.resize(m);
  std::vector<Vector> d_list;
  d_list.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto encoded = encode_document(enc.documents[j], params);
    t.docs[j].h0 = std::move(encoded.h0);
    t.docs[j].h1 = std::move(encoded.h1);
    d_list.push_back(std::move(encoded.d));
  }
  std::vector<double> a;
  if (params.has_attention()) {
    auto att = attention_weights(d_list, params);
    for (std::size_t j = 0; j < m; ++j) {
      t.docs[j].u = std::move(att.u[j]);
      t.docs[j].score = att.scores[j];
    }
    a = std::move(att.weights);
  } else {
    a.assign(m, 1.0 / static_cast<double>(m));
  }
  t.encounter = pool_encounter(d_list, a);
  for (std::size_t j = 0; j < m; ++j) {
    t.docs[j].attention = a[j];
    t.docs[j].d = std::move(d_list[j]);
  }
  affine(params.fc4_w, t.encounter, params.fc4_b, t.logits);
  check_finite(t.logits, "logits", "encounter '" + enc.encounter_id + "'");
  t.probs = t.logits;
  softmax_inplace(t.probs);
  return t;
}

double nll_loss(const ForwardTrace& trace, Label y) {
  return log_sum_exp(trace.logits) - trace.logits[class_index(y)];
}

void check_compatible(const ModelParams& params, std::uint32_t feature_dim) {
  if (params.dims.feature_dim != feature_dim) {
    fail(ErrorCode::kShapeMismatch,
         "model feature_dim " + std::to_string(params.dims.feature_dim) +
             " does not match corpus feature_dim " + std::to_string(feature_dim));
  }
}

namespace {

constexpr char kMagic[] = {'E', 'L', 'D', 'A', 'N', '\x01'};

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  auto bits = std::bit_cast<U>(value);
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) {
    fail(ErrorCode::kCorrupt, "model file truncated");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_model(const ModelParams& params, std::ostream& out, int value_width) {
  require(value_width == 64 || value_width == 32, "value width must be 32 or 64");
  nlohmann::ordered_json h;
  h["dims"] = {{"feature_dim", params.dims.feature_dim},
               {"embed_dim", params.dims.embed_dim},
               {"fc1_dim", params.dims.fc1_dim},
               {"fc2_dim", params.dims.fc2_dim},
               {"fc3_dim", params.dims.fc3_dim},
               {"n_classes", Dims::kClasses}};
  h["mode"] = mode_name(params.mode);
  h["target"] = params.target;
  h["seed"] = params.seed;
  h["value_width"] = value_width;
  const std::string header = h.dump();
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for_each_tensor(params, [&](const char*, std::span<const double> values) {
    for (double v : values) {
      if (value_width == 64) {
        put_le<double>(out, v);
      } else {
        put_le<float>(out, static_cast<float>(v));
      }
    }
  });
}

void save_model(const ModelParams& params, const std::string& path, int value_width) {
  std::ostringstream buffer;
  write_model(params, buffer, value_width);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write model '" + path + "'");
  const auto bytes = std::move(buffer).str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::kIo, "write failed for model '" + path + "'");
}

ModelParams read_model(std::istream& in, std::optional<std::uint32_t> expected_feature_dim) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic)) fail(ErrorCode::kCorrupt, "model file truncated");
  if (std::memcmp(magic, kMagic, 5) != 0) fail(ErrorCode::kCorrupt, "bad magic: not an ELDAN model file");
  if (magic[5] != kMagic[5]) {
    fail(ErrorCode::kCorrupt, "unsupported model file version " +
                                  std::to_string(static_cast<int>(magic[5])));
  }
  const auto header_len = get_le<std::uint64_t>(in);
  if (header_len > (1u << 20)) fail(ErrorCode::kCorrupt, "implausible model header length");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    fail(ErrorCode::kCorrupt, "model file truncated in header");
  }
  ModelParams p;
  int width = 64;
  try {
    const auto h = nlohmann::json::parse(header);
    const auto& d = h.at("dims");
    p.dims.feature_dim = d.at("feature_dim").get<std::uint32_t>();
    p.dims.embed_dim = d.at("embed_dim").get<std::uint32_t>();
    p.dims.fc1_dim = d.at("fc1_dim").get<std::uint32_t>();
    p.dims.fc2_dim = d.at("fc2_dim").get<std::uint32_t>();
    p.dims.fc3_dim = d.at("fc3_dim").get<std::uint32_t>();
    if (d.at("n_classes").get<std::uint32_t>() != Dims::kClasses) {
      fail(ErrorCode::kCorrupt, "model header: n_classes must be 2");
    }
    p.mode = parse_mode(h.at("mode").get<std::string>());
    p.target = h.at("target").get<std::string>();
    p.seed = h.at("seed").get<std::uint64_t>();
    width = h.at("value_width").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorrupt, std::string("model header: ") + e.what());
  }
  if (width != 32 && width != 64) fail(ErrorCode::kCorrupt, "model header: bad value_width");
  try {
    p.dims.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kCorrupt, std::string("model header: ") + e.what());
  }
  if (expected_feature_dim && *expected_feature_dim != p.dims.feature_dim) {
    fail(ErrorCode::kShapeMismatch,
         "model feature_dim " + std::to_string(p.dims.feature_dim) +
             " does not match expected feature_dim " + std::to_string(*expected_feature_dim));
  }
  static_cast<ParamTensors&>(p) = zero_tensors(p.dims, p.mode);

  // Check the payload size against the header before reading so a
  // mismatched file is reported as such instead of as a generic truncation.
  std::size_t expected_values = 0;
  for_each_tensor(p, [&](const char*, std::span<double> v) { expected_values += v.size(); });
  const auto payload_start = in.tellg();
  if (payload_start != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(payload_start);
    const auto available = static_cast<std::uint64_t>(end - payload_start);
    const std::uint64_t needed = expected_values * static_cast<std::uint64_t>(width / 8);
    if (available < needed) {
      fail(ErrorCode::kCorrupt, "model file truncated: payload has " + std::to_string(available) +
                                    " bytes, header implies " + std::to_string(needed));
    }
    if (available > needed) {
      fail(ErrorCode::kShapeMismatch, "model payload has " + std::to_string(available) +
                                          " bytes, header implies " + std::to_string(needed));
    }
  }
  for_each_tensor(p, [&](const char* name, std::span<double> values) {
    for (double& v : values) {
      v = width == 64 ? get_le<double>(in) : static_cast<double>(get_le<float>(in));
      if (!std::isfinite(v)) fail(ErrorCode::kCorrupt, std::string("non-finite value in ") + name);
    }
  });
  return p;
}

ModelParams load_model(const std::string& path, std::optional<std::uint32_t> expected_feature_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model '" + path + "'");
  try {
    return read_model(in, expected_feature_dim);
  } catch (const Error& e) {
    fail(e.code(), "model '" + path + "': " + e.what());
  }
}

}  // namespace eldan
