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

#include "eldan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "eldan/error.hpp"
#include "eldan/rng.hpp"

namespace eldan {

PRFReport PRFReport::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRFReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

EncounterEval evaluate_encounters(const ModelParams& params, const BinaryLabeledSet& set) {
  if (set.items.empty()) fail(ErrorCode::kInvalidArgument, "encounter_f1 on an empty set");
  check_compatible(params, set.feature_dim);
  std::size_t tp = 0, fp = 0, fn = 0, docs = 0;
  double loss = 0.0;
  for (const auto& item : set.items) {
    const auto trace = predict(*item.encounter, params);
    loss += nll_loss(trace, item.label);
    docs += item.encounter->documents.size();
    const bool predicted = trace.predicted() == Label::kPositive;
    const bool actual = item.label == Label::kPositive;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  EncounterEval out;
  out.prf = PRFReport::from_counts(tp, fp, fn);
  out.prf.n_enc = set.items.size();
  out.prf.n_doc = docs;
  out.mean_loss = loss / static_cast<double>(set.items.size());
  return out;
}

PRFReport encounter_f1(const ModelParams& params, const BinaryLabeledSet& set) {
  return evaluate_encounters(params, set).prf;
}

std::vector<std::size_t> select_source_docs(std::span<const double> a) {
  if (a.empty()) fail(ErrorCode::kInvalidArgument, "select_source_docs on an empty vector");
  const double threshold = 0.5 * *std::max_element(a.begin(), a.end());
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > threshold) out.push_back(j);
  }
  return out;
}

std::string attention_record_json(const AttentionRecord& r) {
  nlohmann::ordered_json j;
  j["encounter_id"] = r.encounter_id;
  j["code"] = r.code;
  j["attention"] = r.attention;
  j["selected"] = r.selected;
  return j.dump();
}

namespace {

std::vector<const Encounter*> restricted_encounters(const Corpus& corpus, const CodeId& code) {
  if (!corpus.code_vocab.contains(code)) fail(ErrorCode::kNotFound, "unknown code '" + code + "'");
  std::vector<const Encounter*> out;
  for (const auto& enc : corpus.encounters) {
    if (!enc.has_code(code)) continue;
    if (!enc.doc_codes) {
      fail(ErrorCode::kInvalidArgument,
           "encounter '" + enc.encounter_id + "' has no document annotations");
    }
    out.push_back(&enc);
  }
  return out;
}

}  // namespace

std::vector<AttentionRecord> attention_dump(const ModelParams& params, const Corpus& annotated,
                                            const CodeId& code) {
  check_compatible(params, annotated.feature_dim);
  std::vector<AttentionRecord> out;
  for (const Encounter* enc : restricted_encounters(annotated, code)) {
    AttentionRecord r;
    r.encounter_id = enc->encounter_id;
    r.code = code;
    r.attention = predict(*enc, params).attention();
    r.selected = select_source_docs(r.attention);
    out.push_back(std::move(r));
  }
  return out;
}

PRFReport document_f1_from_selections(const Corpus& annotated, const CodeId& code,
                                      std::span<const std::vector<std::size_t>> selections) {
  const auto encounters = restricted_encounters(annotated, code);
  if (selections.size() != encounters.size()) {
    fail(ErrorCode::kInvalidArgument, "document_f1: " + std::to_string(selections.size()) +
                                          " selections for " +
                                          std::to_string(encounters.size()) + " encounters");
  }
  std::size_t tp = 0, fp = 0, fn = 0, n_doc = 0, n_source = 0;
  for (std::size_t i = 0; i < encounters.size(); ++i) {
    const Encounter& enc = *encounters[i];
    const auto& truth = *enc.doc_codes;
    std::vector<bool> chosen(enc.documents.size(), false);
    for (auto j : selections[i]) {
      if (j >= chosen.size()) fail(ErrorCode::kInvalidArgument, "selected document out of range");
      chosen[j] = true;
    }
    n_doc += enc.documents.size();
    for (std::size_t j = 0; j < enc.documents.size(); ++j) {
      const bool is_source = truth[j].contains(code);
      n_source += is_source;
      tp += chosen[j] && is_source;
      fp += chosen[j] && !is_source;
      fn += !chosen[j] && is_source;
    }
  }
  PRFReport r = PRFReport::from_counts(tp, fp, fn);
  r.n_enc = encounters.size();
  r.n_doc = n_doc;
  r.n_source = n_source;
  r.defined = !encounters.empty();
  return r;
}

PRFReport document_f1(const ModelParams& params, const Corpus& annotated, const CodeId& code) {
  std::vector<std::vector<std::size_t>> selections;
  for (auto& rec : attention_dump(params, annotated, code)) {
    selections.push_back(std::move(rec.selected));
  }
  return document_f1_from_selections(annotated, code, selections);
}

ChanceReport chance_document_f1(const Corpus& annotated, const CodeId& code,
                                std::uint32_t runs, std::uint64_t seed, unsigned threads) {
  require(runs >= 2, "chance baseline needs at least 2 runs");
  const auto encounters = restricted_encounters(annotated, code);
  ChanceReport report;
  report.runs = runs;
  report.run_f1.assign(runs, 0.0);
  report.shape = document_f1_from_selections(
      annotated, code, std::vector<std::vector<std::size_t>>(encounters.size(), {0}));

  auto run_one = [&](std::uint32_t r) {
    Rng rng(derive_seed(seed, r));
    std::vector<std::vector<std::size_t>> selections;
    selections.reserve(encounters.size());
    std::vector<double> scores;
    for (const Encounter* enc : encounters) {
      scores.resize(enc->documents.size());
      for (double& s : scores) s = rng.uniform01();
      selections.push_back(select_source_docs(scores));
    }
    report.run_f1[r] = document_f1_from_selections(annotated, code, selections).f1;
  };

  threads = std::max(1u, std::min<unsigned>(threads, runs));
  if (threads == 1) {
    for (std::uint32_t r = 0; r < runs; ++r) run_one(r);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::uint32_t r = t; r < runs; r += threads) run_one(r);
      });
    }
  }

  double sum = 0.0;
  for (double f : report.run_f1) sum += f;
  report.mean_f1 = sum / runs;
  double ss = 0.0;
  for (double f : report.run_f1) ss += (f - report.mean_f1) * (f - report.mean_f1);
  report.std_f1 = std::sqrt(ss / (runs - 1));
  return report;
}

Significance significance(const ChanceReport& chance, double model_f1, bool two_sided) {
  require(chance.runs >= 2, "significance needs at least 2 chance runs");
  Significance s;
  const double diff = chance.mean_f1 - model_f1;
  if (chance.std_f1 == 0.0) {
    // Degenerate sample: the statistic is +-infinity or undefined.
    if (diff == 0.0) {
      s.t = 0.0;
      s.p = 1.0;
    } else {
      s.t = diff > 0 ? INFINITY : -INFINITY;
      s.p = two_sided || diff < 0 ? 0.0 : 1.0;
    }
  } else {
    s.t = diff / (chance.std_f1 / std::sqrt(static_cast<double>(chance.runs)));
    const boost::math::students_t_distribution<double> dist(chance.runs - 1);
    if (two_sided) {
      s.p = 2.0 * boost::math::cdf(dist, -std::abs(s.t));
    } else {
      s.p = boost::math::cdf(dist, s.t);
    }
  }
  s.significant = s.p < 0.05 && model_f1 > chance.mean_f1;
  return s;
}

std::string ordinal(std::size_t n) {
  const char* suffix = "th";
  if (n % 100 < 11 || n % 100 > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string percent(const std::optional<double>& v) { return v ? fixed2(100.0 * *v) : "-"; }

std::optional<double> mean_of(std::span<const CodeTableRow> rows,
                              std::optional<double> CodeTableRow::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      sum += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

std::string format_encounter_table(std::span<const CodeTableRow> rows) {
  std::ostringstream out;
  out << "CPT Codes\t#Docs\tPrevalence\tELDN\tELDAN\tELDAN+transfer\n";
  double docs = 0.0;
  for (const auto& r : rows) {
    out << r.code << '\t' << fixed2(r.mean_docs) << '\t' << fixed2(100.0 * r.prevalence) << "%\t"
        << percent(r.eldn) << '\t' << percent(r.eldan) << '\t' << percent(r.eldan_transfer)
        << '\n';
    docs += r.mean_docs;
  }
  if (!rows.empty()) {
    out << "Average\t" << fixed2(docs / static_cast<double>(rows.size())) << "\t\t"
        << percent(mean_of(rows, &CodeTableRow::eldn)) << '\t'
        << percent(mean_of(rows, &CodeTableRow::eldan)) << '\t'
        << percent(mean_of(rows, &CodeTableRow::eldan_transfer)) << '\n';
  }
  return out.str();
}

std::string format_macro_table(std::span<const CodeTableRow> rows, std::size_t group_size) {
  require(group_size > 0, "group size must be positive");
  std::ostringstream out;
  out << "Average\tPrevalence\tELDN\tELDAN\tELDAN+transfer\tΔELDAN\n";
  for (std::size_t start = 0; start < rows.size(); start += group_size) {
    const auto group = rows.subspan(start, std::min(group_size, rows.size() - start));
    double prevalence = 0.0;
    for (const auto& r : group) prevalence += r.prevalence;
    prevalence /= static_cast<double>(group.size());
    const auto eldn = mean_of(group, &CodeTableRow::eldn);
    const auto eldan = mean_of(group, &CodeTableRow::eldan);
    const auto transfer = mean_of(group, &CodeTableRow::eldan_transfer);
    std::optional<double> delta;
    if (eldan && transfer) delta = *transfer - *eldan;
    out << ordinal(start + 1) << " to " << ordinal(start + group.size()) << '\t'
        << fixed2(100.0 * prevalence) << "%\t" << percent(eldn) << '\t' << percent(eldan) << '\t'
        << percent(transfer) << '\t' << percent(delta) << '\n';
  }
  return out.str();
}

std::string format_document_table(std::span<const DocumentTableRow> rows) {
  std::ostringstream out;
  out << "CPT Codes\t#enc\t#doc\t#source\tAttention\tChance\tDiff\n";
  for (const auto& r : rows) {
    const auto attention = r.attention.defined ? std::optional<double>(r.attention.f1) : std::nullopt;
    const auto chance = r.attention.defined ? r.chance_mean : std::nullopt;
    std::optional<double> diff;
    if (attention && chance) diff = *attention - *chance;
    out << r.code << '\t' << r.attention.n_enc << '\t' << r.attention.n_doc << '\t'
        << r.attention.n_source << '\t' << percent(attention) << '\t' << percent(chance) << '\t'
        << percent(diff) << '\n';
  }
  return out.str();
}

}  // namespace eldan
