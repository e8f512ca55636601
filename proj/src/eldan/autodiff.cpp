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

#include "eldan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "eldan/error.hpp"
#include "eldan/rng.hpp"

namespace eldan {

void Gradients::set_zero() {
  for_each_tensor(*this, [](const char*, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
}

void Gradients::scale(double factor) {
  for_each_tensor(*this, [&](const char*, std::span<double> v) {
    for (double& x : v) x *= factor;
  });
}

bool Gradients::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](const char*, std::span<const double> v) {
    for (double x : v) ok = ok && std::isfinite(x);
  });
  return ok;
}

namespace {

void check_trace(const Encounter& enc, const ModelParams& params, const ForwardTrace& trace,
                 const Gradients& acc) {
  bool ok = trace.docs.size() == enc.documents.size() &&
            trace.encounter.size() == params.dims.fc2_dim;
  for (const auto& d : trace.docs) {
    ok = ok && d.h0.size() == params.dims.embed_dim && d.h1.size() == params.dims.fc1_dim &&
         d.d.size() == params.dims.fc2_dim &&
         d.u.size() == (params.has_attention() ? params.dims.fc3_dim : 0u);
  }
  ok = ok && acc.embedding.rows == params.embedding.rows &&
       acc.embedding.cols == params.embedding.cols && acc.fc3_w.rows == params.fc3_w.rows;
  if (!ok) fail(ErrorCode::kShapeMismatch, "backward: trace or gradient does not match params");
}

}  // namespace

void accumulate_backward(const Encounter& enc, Label y, const ModelParams& params,
                         const ForwardTrace& trace, Gradients& acc, double scale) {
  check_trace(enc, params, trace, acc);
  const std::size_t m = trace.docs.size();
  const Dims& dims = params.dims;

  // Output softmax + NLL.
  std::array<double, 2> g_logits = trace.probs;
  g_logits[class_index(y)] -= 1.0;
  add_outer(acc.fc4_w, g_logits, trace.encounter, scale);
  for (int c = 0; c < 2; ++c) acc.fc4_b[c] += scale * g_logits[c];
  Vector g_e(dims.fc2_dim, 0.0);
  add_transposed_product(params.fc4_w, g_logits, g_e);

  // Each d_j feeds the pooled sum directly and, in ELDAN mode, the attention
  // score through u_j, so both contributions are summed into g_d.
  std::vector<double> g_score(m, 0.0);
  if (params.has_attention()) {
    std::vector<double> g_a(m);
    double weighted = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      g_a[j] = dot(g_e, trace.docs[j].d);
      weighted += trace.docs[j].attention * g_a[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      g_score[j] = trace.docs[j].attention * (g_a[j] - weighted);
    }
  }

  Vector g_d(dims.fc2_dim), g_z3(dims.fc3_dim), g_z2(dims.fc2_dim);
  Vector g_h1(dims.fc1_dim), g_z1(dims.fc1_dim), g_h0(dims.embed_dim);
  for (std::size_t j = 0; j < m; ++j) {
    const DocumentTrace& doc = trace.docs[j];
    for (std::size_t i = 0; i < g_d.size(); ++i) g_d[i] = doc.attention * g_e[i];

    if (params.has_attention() && g_score[j] != 0.0) {
      for (std::size_t i = 0; i < dims.fc3_dim; ++i) {
        acc.attention[i] += scale * g_score[j] * doc.u[i];
        g_z3[i] = g_score[j] * params.attention[i] * (1.0 - doc.u[i] * doc.u[i]);
      }
      add_outer(acc.fc3_w, g_z3, doc.d, scale);
      for (std::size_t i = 0; i < dims.fc3_dim; ++i) acc.fc3_b[i] += scale * g_z3[i];
      add_transposed_product(params.fc3_w, g_z3, g_d);
    }

    for (std::size_t i = 0; i < dims.fc2_dim; ++i) g_z2[i] = g_d[i] * (1.0 - doc.d[i] * doc.d[i]);
    add_outer(acc.fc2_w, g_z2, doc.h1, scale);
    for (std::size_t i = 0; i < dims.fc2_dim; ++i) acc.fc2_b[i] += scale * g_z2[i];

    std::fill(g_h1.begin(), g_h1.end(), 0.0);
    add_transposed_product(params.fc2_w, g_z2, g_h1);
    for (std::size_t i = 0; i < dims.fc1_dim; ++i) g_z1[i] = g_h1[i] * (1.0 - doc.h1[i] * doc.h1[i]);
    add_outer(acc.fc1_w, g_z1, doc.h0, scale);
    for (std::size_t i = 0; i < dims.fc1_dim; ++i) acc.fc1_b[i] += scale * g_z1[i];

    std::fill(g_h0.begin(), g_h0.end(), 0.0);
    add_transposed_product(params.fc1_w, g_z1, g_h0);
    for (const auto& [k, v] : enc.documents[j].entries) {
      for (std::size_t r = 0; r < dims.embed_dim; ++r) acc.embedding(r, k) += scale * v * g_h0[r];
    }
  }
}

Gradients backward(const Encounter& enc, Label y, const ModelParams& params,
                   const ForwardTrace& trace) {
  Gradients g = Gradients::zeros_like(params);
  accumulate_backward(enc, y, params, trace, g);
  return g;
}

namespace {

using Wide = long double;

// Extended-precision copy of the parameters, used only by the
// finite-difference oracle. It re-implements the forward pass on its own so
// the oracle shares no arithmetic with predict()/backward().
struct WideParams {
  Dims dims;
  bool attention = false;
  std::vector<std::string> names;
  std::vector<std::vector<Wide>> tensors;

  explicit WideParams(const ModelParams& p) : dims(p.dims), attention(p.has_attention()) {
    for_each_tensor(p, [&](const char* name, std::span<const double> v) {
      names.emplace_back(name);
      tensors.emplace_back(v.begin(), v.end());
    });
  }

  const std::vector<Wide>& get(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return tensors[i];
    }
    fail(ErrorCode::kInternal, "missing tensor " + std::string(name));
  }
};

void wide_layer(const std::vector<Wide>& w, const std::vector<Wide>& b, const std::vector<Wide>& x,
                std::vector<Wide>& out) {
  out.assign(b.size(), 0.0L);
  for (std::size_t r = 0; r < b.size(); ++r) {
    Wide acc = b[r];
    for (std::size_t c = 0; c < x.size(); ++c) acc += w[r * x.size() + c] * x[c];
    out[r] = std::tanh(acc);
  }
}

Wide wide_loss(const Encounter& enc, Label y, const WideParams& p) {
  const auto& emb = p.get("W_Embedding");
  const std::size_t m = enc.documents.size();
  std::vector<std::vector<Wide>> d_list(m);
  std::vector<Wide> scores(m, 0.0L);
  std::vector<Wide> h0(p.dims.embed_dim), h1, u;
  for (std::size_t j = 0; j < m; ++j) {
    std::fill(h0.begin(), h0.end(), 0.0L);
    for (const auto& [k, v] : enc.documents[j].entries) {
      for (std::size_t r = 0; r < p.dims.embed_dim; ++r) h0[r] += v * emb[r * p.dims.feature_dim + k];
    }
    wide_layer(p.get("W_FC1"), p.get("b_FC1"), h0, h1);
    wide_layer(p.get("W_FC2"), p.get("b_FC2"), h1, d_list[j]);
    if (p.attention) {
      wide_layer(p.get("W_FC3"), p.get("b_FC3"), d_list[j], u);
      const auto& v = p.get("v_attention");
      for (std::size_t i = 0; i < u.size(); ++i) scores[j] += u[i] * v[i];
    }
  }
  const Wide top = *std::max_element(scores.begin(), scores.end());
  Wide total = 0.0L;
  std::vector<Wide> a(m);
  for (std::size_t j = 0; j < m; ++j) total += (a[j] = std::exp(scores[j] - top));
  std::vector<Wide> e(p.dims.fc2_dim, 0.0L);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += (a[j] / total) * d_list[j][i];
  }
  const auto& w4 = p.get("W_FC4");
  const auto& b4 = p.get("b_FC4");
  Wide logits[2];
  for (std::size_t c = 0; c < 2; ++c) {
    logits[c] = b4[c];
    for (std::size_t i = 0; i < e.size(); ++i) logits[c] += w4[c * e.size() + i] * e[i];
  }
  const Wide hi = std::max(logits[0], logits[1]);
  const Wide lse = hi + std::log(std::exp(logits[0] - hi) + std::exp(logits[1] - hi));
  return lse - logits[class_index(y)];
}

}  // namespace

Gradients finite_diff_grad(const Encounter& enc, Label y, const ModelParams& params, double eps) {
  require(eps > 0, "eps must be positive");
  if (enc.documents.empty()) fail(ErrorCode::kInvalidArgument, "encounter has no documents");
  for (const auto& doc : enc.documents) validate_document(doc, params.dims.feature_dim);
  WideParams probe(params);
  Gradients g = Gradients::zeros_like(params);
  std::vector<std::span<double>> grad_spans;
  for_each_tensor(g, [&](const char*, std::span<double> v) { grad_spans.push_back(v); });

  const Wide h = eps;
  auto probe_coordinate = [&](Wide& theta, double& out) {
    const Wide saved = theta;
    theta = saved + h;
    const Wide up = wide_loss(enc, y, probe);
    theta = saved - h;
    const Wide down = wide_loss(enc, y, probe);
    theta = saved;
    out = static_cast<double>((up - down) / (2.0L * h));
  };

  std::set<std::uint32_t> touched;
  for (const auto& doc : enc.documents) {
    for (const auto& e : doc.entries) touched.insert(e.index);
  }
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    auto& values = probe.tensors[t];
    auto out = grad_spans[t];
    if (probe.names[t] == "W_Embedding") {
      for (std::uint32_t k : touched) {
        for (std::size_t r = 0; r < params.dims.embed_dim; ++r) {
          const std::size_t idx = r * params.dims.feature_dim + k;
          probe_coordinate(values[idx], out[idx]);
        }
      }
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) probe_coordinate(values[i], out[i]);
    }
  }
  return g;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

std::string GradCheckReport::to_tsv() const {
  std::ostringstream out;
  out << "tensor\tmax_rel_error\ttol\tstatus\n";
  char buf[64];
  for (const auto& t : tensors) {
    std::snprintf(buf, sizeof buf, "%.6e", t.max_rel_error);
    out << t.tensor << '\t' << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.1e", tol);
    out << buf << '\t' << (t.passed ? "pass" : "FAIL") << '\n';
  }
  return out.str();
}

GradCheckReport grad_check(const GradCheckOptions& options) {
  GradCheckReport report;
  report.trials = options.n_trials;
  report.tol = options.tol;
  std::vector<std::string> order;
  std::map<std::string, double> worst;

  for (std::uint32_t trial = 0; trial < options.n_trials; ++trial) {
    Rng rng(derive_seed(options.seed, trial));
    Dims dims;
    dims.feature_dim = static_cast<std::uint32_t>(4 + rng.below(61));
    dims.embed_dim = static_cast<std::uint32_t>(2 + rng.below(7));
    dims.fc1_dim = static_cast<std::uint32_t>(2 + rng.below(7));
    dims.fc2_dim = static_cast<std::uint32_t>(2 + rng.below(7));
    dims.fc3_dim = static_cast<std::uint32_t>(2 + rng.below(7));
    ModelParams params = init_params(dims, options.mode, rng.next_u64());
    // Nonzero biases so their gradients are exercised away from the origin.
    for_each_tensor(params, [&](const char* name, std::span<double> v) {
      if (name[0] == 'b') {
        for (double& x : v) x = rng.uniform(-0.5, 0.5);
      }
    });
    if (params.has_attention()) {
      for (double& x : params.attention) x = rng.uniform(-1.5, 1.5);
    }

    Encounter enc;
    enc.encounter_id = "trial" + std::to_string(trial);
    const auto m = options.fixed_docs ? options.fixed_docs : static_cast<std::uint32_t>(1 + rng.below(4));
    for (std::uint32_t j = 0; j < m; ++j) {
      SparseDocVector doc;
      doc.doc_id = std::to_string(j);
      std::set<std::uint32_t> ids;
      const auto n_feat = std::min<std::uint64_t>(1 + rng.below(6), dims.feature_dim);
      while (ids.size() < n_feat) ids.insert(static_cast<std::uint32_t>(rng.below(dims.feature_dim)));
      for (auto k : ids) doc.entries.push_back({k, rng.uniform(-1.5, 1.5)});
      enc.documents.push_back(std::move(doc));
    }
    const Label y = rng.bernoulli(0.5) ? Label::kPositive : Label::kNegative;

    const auto trace = predict(enc, params);
    const Gradients analytic = backward(enc, y, params, trace);
    const Gradients numeric = finite_diff_grad(enc, y, params, options.eps);

    std::vector<std::pair<std::string, std::span<const double>>> a_spans, n_spans;
    for_each_tensor(analytic, [&](const char* n, std::span<const double> v) { a_spans.emplace_back(n, v); });
    for_each_tensor(numeric, [&](const char* n, std::span<const double> v) { n_spans.emplace_back(n, v); });
    for (std::size_t t = 0; t < a_spans.size(); ++t) {
      const auto& name = a_spans[t].first;
      if (!worst.contains(name)) {
        order.push_back(name);
        worst[name] = 0.0;
      }
      for (std::size_t i = 0; i < a_spans[t].second.size(); ++i) {
        const double err = relative_error(a_spans[t].second[i], n_spans[t].second[i]);
        worst[name] = std::max(worst[name], std::isnan(err) ? INFINITY : err);
      }
    }
  }
  for (const auto& name : order) {
    TensorCheck tc{name, worst[name], worst[name] <= options.tol};
    report.passed = report.passed && tc.passed;
    report.tensors.push_back(std::move(tc));
  }
  return report;
}

}  // namespace eldan
