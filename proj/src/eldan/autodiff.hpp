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

#include "eldan/model.hpp"

namespace eldan {

// One tensor per parameter tensor, same shapes.
struct Gradients : ParamTensors {
  Gradients() = default;
  explicit Gradients(ParamTensors t) : ParamTensors(std::move(t)) {}

  static Gradients zeros_like(const ModelParams& params) {
    return Gradients(zero_tensors(params.dims, params.mode));
  }

  void set_zero();
  void scale(double factor);
  bool all_finite() const;
};

// Exact gradient of nll_loss(predict(enc), y) with respect to every
// parameter. `trace` must come from predict(enc, params).
Gradients backward(const Encounter& enc, Label y, const ModelParams& params,
                   const ForwardTrace& trace);

// Adds scale * gradient into `acc` without materializing a separate
// Gradients; the embedding update only touches columns present in `enc`.
void accumulate_backward(const Encounter& enc, Label y, const ModelParams& params,
                         const ForwardTrace& trace, Gradients& acc, double scale = 1.0);

// Central differences, one coordinate at a time. The loss is evaluated by a
// separate long double forward pass so rounding in the loss does not swamp
// small coordinates. W_Embedding is only probed in the columns of features
// present in the encounter; the rest stay zero.
Gradients finite_diff_grad(const Encounter& enc, Label y, const ModelParams& params, double eps);

// Central difference of a scalar function, exposed for order-of-accuracy tests.
template <class Fn>
long double central_difference(Fn&& f, long double x, long double eps) {
  return (f(x + eps) - f(x - eps)) / (2.0L * eps);
}

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

struct TensorCheck {
  std::string tensor;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  std::uint32_t trials = 0;
  double tol = 0.0;
  bool passed = true;

  std::string to_tsv() const;
};

struct GradCheckOptions {
  Mode mode = Mode::kEldan;
  std::uint64_t seed = 0;
  std::uint32_t n_trials = 20;
  double eps = 1e-5;
  double tol = 1e-5;
  // Force every trial to use this many documents; 0 draws m from 1..4.
  std::uint32_t fixed_docs = 0;
};

// Random (params, encounter, label) draws with D <= 64, widths <= 8,
// m in 1..4. Failures are reported, never thrown.
GradCheckReport grad_check(const GradCheckOptions& options);

}  // namespace eldan
