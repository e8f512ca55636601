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

#include "eldan/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "eldan/error.hpp"
#include "eldan/eval.hpp"
#include "eldan/rng.hpp"

namespace eldan {

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch_size must be >= 1");
  require(lr > 0 && std::isfinite(lr), "lr must be positive");
  require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
  require(resample_ratio > 0, "resample_ratio must be positive");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(embed_dim > 0 && fc1_dim > 0 && fc2_dim > 0 && fc3_dim > 0,
          "layer widths must be positive");
}

Dims TrainConfig::dims(std::uint32_t feature_dim) const {
  return Dims{feature_dim, embed_dim, fc1_dim, fc2_dim, fc3_dim};
}

TrainConfig parse_train_config(const std::string& json_text, TrainConfig c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  require(j.is_object(), "train config must be a JSON object");
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.resample_ratio = j.value("resample_ratio", c.resample_ratio);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.transfer = j.value("transfer", c.transfer);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.fc1_dim = j.value("fc1_dim", c.fc1_dim);
    c.fc2_dim = j.value("fc2_dim", c.fc2_dim);
    c.fc3_dim = j.value("fc3_dim", c.fc3_dim);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["resample_ratio"] = c.resample_ratio;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["seed"] = c.seed;
  j["mode"] = mode_name(c.mode);
  j["transfer"] = c.transfer;
  j["embed_dim"] = c.embed_dim;
  j["fc1_dim"] = c.fc1_dim;
  j["fc2_dim"] = c.fc2_dim;
  j["fc3_dim"] = c.fc3_dim;
  return j.dump(2);
}

std::string TrainHistory::to_tsv() const {
  std::ostringstream out;
  out << "epoch\tloss\tdev_f1\tdev_loss\tsamples\tpositives\tbest\n";
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%u\t%.9g\t%.9g\t%.9g\t%zu\t%zu\t%d\n", e.epoch, e.train_loss,
                  e.dev_f1, e.dev_loss, e.samples, e.positives, e.epoch == best_epoch ? 1 : 0);
    out << buf;
  }
  return out.str();
}

std::uint64_t epoch_seed(std::uint64_t seed, std::uint32_t epoch) {
  return derive_seed(seed ^ 0x5eed0fe90c4ULL, epoch);
}

std::vector<std::size_t> resample_epoch(const BinaryLabeledSet& set, double ratio,
                                        std::uint64_t seed) {
  require(ratio > 0, "resample ratio must be positive");
  const std::size_t positives = set.positives();
  if (positives == 0) {
    fail(ErrorCode::kInvalidArgument,
         "code '" + set.target + "' has no positive training encounters; skip this code");
  }
  const std::size_t negatives = set.items.size() - positives;
  const double keep =
      negatives ? std::min(1.0, ratio * static_cast<double>(positives) / static_cast<double>(negatives))
                : 1.0;
  Rng rng(seed);
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    if (set.items[i].label == Label::kPositive) {
      picked.push_back(i);
    } else if (keep >= 1.0 || rng.bernoulli(keep)) {
      picked.push_back(i);
    }
  }
  rng.shuffle(std::span(picked));
  return picked;
}

void sgd_momentum_step(ModelParams& params, OptimizerState& state, const Gradients& grads,
                       double lr, double momentum) {
  if (!grads.all_finite()) fail(ErrorCode::kNumeric, "non-finite gradient");
  std::vector<std::span<double>> theta, velocity;
  std::vector<std::span<const double>> g;
  for_each_tensor(params, [&](const char*, std::span<double> v) { theta.push_back(v); });
  for_each_tensor(state.velocity, [&](const char*, std::span<double> v) { velocity.push_back(v); });
  for_each_tensor(grads, [&](const char*, std::span<const double> v) { g.push_back(v); });
  if (theta.size() != velocity.size() || theta.size() != g.size()) {
    fail(ErrorCode::kShapeMismatch, "optimizer: tensor count mismatch");
  }
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (theta[t].size() != velocity[t].size() || theta[t].size() != g[t].size()) {
      fail(ErrorCode::kShapeMismatch, "optimizer: tensor shape mismatch");
    }
    for (std::size_t i = 0; i < theta[t].size(); ++i) {
      velocity[t][i] = momentum * velocity[t][i] + g[t][i];
      theta[t][i] -= lr * velocity[t][i];
    }
  }
}

ModelParams initial_params(const TrainConfig& cfg, std::uint32_t feature_dim, const CodeId& target,
                           const Matrix* init_embedding) {
  ModelParams p = init_params(cfg.dims(feature_dim), cfg.mode, cfg.seed, target);
  if (init_embedding) {
    if (init_embedding->rows != p.embedding.rows || init_embedding->cols != p.embedding.cols) {
      fail(ErrorCode::kShapeMismatch,
           "transfer embedding is " + std::to_string(init_embedding->rows) + "x" +
               std::to_string(init_embedding->cols) + ", model needs " +
               std::to_string(p.embedding.rows) + "x" + std::to_string(p.embedding.cols));
    }
    p.embedding = *init_embedding;
  }
  return p;
}

TrainResult train_code(const BinaryLabeledSet& train, const BinaryLabeledSet& dev,
                       const TrainConfig& cfg, const Matrix* init_embedding) {
  cfg.validate();
  require(train.target == dev.target || dev.items.empty(), "train/dev target mismatch");
  if (!dev.items.empty() && dev.feature_dim != train.feature_dim) {
    fail(ErrorCode::kShapeMismatch, "train feature_dim " + std::to_string(train.feature_dim) +
                                        " != dev feature_dim " + std::to_string(dev.feature_dim));
  }
  if (train.positives() == 0) {
    fail(ErrorCode::kInvalidArgument,
         "code '" + train.target + "' has no positive training encounters");
  }

  ModelParams params = initial_params(cfg, train.feature_dim, train.target, init_embedding);
  OptimizerState state = OptimizerState::zeros_like(params);
  Gradients batch_grad = Gradients::zeros_like(params);

  TrainResult best{params, {}};
  double best_f1 = -1.0;
  double best_loss = INFINITY;
  std::uint32_t since_best = 0;
  const bool has_dev = !dev.items.empty();

  for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = resample_epoch(train, cfg.resample_ratio, epoch_seed(cfg.seed, epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.samples = order.size();
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      batch_grad.set_zero();
      for (std::size_t b = start; b < end; ++b) {
        const auto& item = train.items[order[b]];
        rec.positives += item.label == Label::kPositive;
        const auto trace = predict(*item.encounter, params);
        const double loss = nll_loss(trace, item.label);
        if (!std::isfinite(loss)) {
          fail(ErrorCode::kNumeric, "training diverged (non-finite loss) at epoch " +
                                        std::to_string(epoch) + " for code '" + train.target + "'");
        }
        loss_sum += loss;
        accumulate_backward(*item.encounter, item.label, params, trace, batch_grad, scale);
      }
      try {
        sgd_momentum_step(params, state, batch_grad, cfg.lr, cfg.momentum);
      } catch (const Error& e) {
        fail(e.code(), std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           " for code '" + train.target + "'");
      }
    }
    rec.train_loss = loss_sum / static_cast<double>(order.size());

    bool improved = true;
    if (has_dev) {
      const auto ev = evaluate_encounters(params, dev);
      rec.dev_f1 = ev.prf.f1;
      rec.dev_loss = ev.mean_loss;
      improved = rec.dev_f1 > best_f1 || (rec.dev_f1 == best_f1 && rec.dev_loss < best_loss);
    }
    best.history.epochs.push_back(rec);
    if (improved) {
      best_f1 = rec.dev_f1;
      best_loss = rec.dev_loss;
      best.params = params;
      best.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return best;
}

std::string model_stem(const CodeId& code, Mode mode, bool transfer) {
  return code + "." + std::string(mode_name(mode)) + (transfer ? ".transfer" : "");
}

namespace {

void persist(const SweepEntry& entry, const TrainConfig& cfg, const std::string& dir) {
  const auto stem = std::filesystem::path(dir) / model_stem(entry.code, cfg.mode, cfg.transfer);
  save_model(entry.result->params, stem.string() + ".eldan");
  std::ofstream hist(stem.string() + ".history.tsv", std::ios::binary | std::ios::trunc);
  if (!hist) fail(ErrorCode::kIo, "cannot write history for '" + entry.code + "'");
  hist << entry.result->history.to_tsv();
}

SweepEntry train_one(const Corpus& train, const Corpus& dev, const CodeId& code,
                     const TrainConfig& cfg, const ModelParams* donor) {
  SweepEntry entry;
  entry.code = code;
  try {
    const auto train_set = binarize(train, code);
    const auto dev_set = binarize(dev, code);
    const Matrix* init = nullptr;
    if (donor) {
      init = &donor->embedding;
      entry.transfer_from = donor->target;
    }
    entry.initial_embedding = initial_params(cfg, train.feature_dim, code, init).embedding;
    entry.result = train_code(train_set, dev_set, cfg, init);
    entry.ok = true;
  } catch (const Error& e) {
    entry.ok = false;
    entry.message = e.what();
    entry.result.reset();
  }
  return entry;
}

}  // namespace

std::vector<SweepEntry> train_all(const Corpus& train, const Corpus& dev,
                                  const std::vector<CodeId>& ranked_codes, const TrainConfig& cfg,
                                  const std::optional<std::string>& out_dir, unsigned threads) {
  cfg.validate();
  if (dev.feature_dim != train.feature_dim) {
    fail(ErrorCode::kShapeMismatch, "train feature_dim " + std::to_string(train.feature_dim) +
                                        " != dev feature_dim " + std::to_string(dev.feature_dim));
  }
  if (out_dir) std::filesystem::create_directories(*out_dir);
  std::vector<SweepEntry> entries(ranked_codes.size());

  if (cfg.transfer) {
    const ModelParams* donor = nullptr;
    for (std::size_t i = 0; i < ranked_codes.size(); ++i) {
      entries[i] = train_one(train, dev, ranked_codes[i], cfg, donor);
      if (entries[i].ok) donor = &entries[i].result->params;
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < ranked_codes.size();) {
        entries[i] = train_one(train, dev, ranked_codes[i], cfg, nullptr);
      }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(ranked_codes.size())));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
  }

  if (out_dir) {
    for (const auto& e : entries) {
      if (e.ok) persist(e, cfg, *out_dir);
    }
  }
  return entries;
}

}  // namespace eldan
