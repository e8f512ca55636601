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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eldan/eldan.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fixture(const std::string& name) {
  return std::string(ELDAN_FIXTURE_DIR) + "/" + name;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string take(char* s) {
  std::string out = s ? s : "";
  eldan_string_free(s);
  return out;
}

const char* kGen = R"({"n_encounters": 300, "feature_dim": 120, "background_features_per_doc": 6,
  "signal_strength": 3,
  "codes": [{"code": "A", "prevalence": 0.2, "signal_features": [110, 111, 112, 113]},
            {"code": "B", "prevalence": 0.1, "signal_features": [114, 115, 116, 117]}]})";

const char* kTrain = R"({"max_epochs": 4, "patience": 2, "embed_dim": 6, "fc1_dim": 5,
  "fc2_dim": 4, "fc3_dim": 3, "seed": 1})";

struct Fixture {
  eldan_corpus* corpus = nullptr;
  Fixture() { REQUIRE(eldan_corpus_generate(kGen, 7, &corpus, nullptr) == ELDAN_OK); }
  ~Fixture() { eldan_corpus_free(corpus); }
};

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::string(eldan_version()).size() > 0);
  CHECK(std::string(eldan_status_string(ELDAN_OK)) != std::string(eldan_status_string(ELDAN_ERR_IO)));
  eldan_string_free(nullptr);
  eldan_corpus_free(nullptr);
  eldan_model_free(nullptr);
}

TEST_CASE("null arguments are rejected with a message") {
  eldan_corpus* c = nullptr;
  CHECK(eldan_corpus_load(nullptr, nullptr, &c) == ELDAN_ERR_INVALID_ARGUMENT);
  CHECK(std::string(eldan_last_error()).size() > 0);
  CHECK(c == nullptr);
  CHECK(eldan_corpus_generate(kGen, 1, nullptr, nullptr) == ELDAN_ERR_INVALID_ARGUMENT);
}

TEST_CASE("corpus load, serialize and parse round-trip") {
  eldan_corpus* c = nullptr;
  REQUIRE(eldan_corpus_load(fixture("three.jsonl").c_str(), fixture("three.manifest.json").c_str(),
                            &c) == ELDAN_OK);
  CHECK(eldan_corpus_encounter_count(c) == 3);
  CHECK(eldan_corpus_document_count(c) == 6);
  CHECK(eldan_corpus_feature_dim(c) == 10);
  CHECK(eldan_corpus_has_code(c, "43239") == 1);
  CHECK(eldan_corpus_has_code(c, "99999") == 0);

  char* jsonl = nullptr;
  REQUIRE(eldan_corpus_serialize(c, &jsonl) == ELDAN_OK);
  const std::string text = take(jsonl);
  const std::string manifest = read_text(fixture("three.manifest.json"));
  eldan_corpus* again = nullptr;
  REQUIRE(eldan_corpus_parse(text.data(), text.size(), manifest.c_str(), &again) == ELDAN_OK);
  char* jsonl2 = nullptr;
  REQUIRE(eldan_corpus_serialize(again, &jsonl2) == ELDAN_OK);
  CHECK(take(jsonl2) == text);
  eldan_corpus_free(again);
  eldan_corpus_free(c);
}

TEST_CASE("parse errors and missing files map to status codes") {
  const std::string manifest = read_text(fixture("three.manifest.json"));
  const std::string bad = "{\"encounter_id\": \"x\", \"documents\": [}\n";
  eldan_corpus* c = nullptr;
  CHECK(eldan_corpus_parse(bad.data(), bad.size(), manifest.c_str(), &c) == ELDAN_ERR_PARSE);
  CHECK(c == nullptr);
  CHECK(eldan_corpus_load("/nonexistent/x.jsonl", "/nonexistent/x.manifest.json", &c) ==
        ELDAN_ERR_IO);
  eldan_model* m = nullptr;
  CHECK(eldan_model_load("/nonexistent/m.eldan", 0, &m) == ELDAN_ERR_IO);
}

TEST_CASE("split partitions the corpus") {
  Fixture f;
  eldan_corpus *tr = nullptr, *dv = nullptr, *te = nullptr;
  REQUIRE(eldan_corpus_split(f.corpus, 0.8, 0.1, 0.1, 3, &tr, &dv, &te) == ELDAN_OK);
  CHECK(eldan_corpus_encounter_count(tr) + eldan_corpus_encounter_count(dv) +
            eldan_corpus_encounter_count(te) ==
        300);
  char* ranked = nullptr;
  REQUIRE(eldan_corpus_ranked_codes(tr, &ranked) == ELDAN_OK);
  CHECK(take(ranked) == "A\nB\n");
  char* stats = nullptr;
  REQUIRE(eldan_corpus_code_stats(tr, &stats) == ELDAN_OK);
  CHECK(take(stats).rfind("code\tprevalence\tmean_docs\tcarriers\n", 0) == 0);
  eldan_corpus_free(tr);
  eldan_corpus_free(dv);
  eldan_corpus_free(te);
}

TEST_CASE("model init, info, predict and save/load") {
  Fixture f;
  eldan_model* m = nullptr;
  REQUIRE(eldan_model_init(120, 6, 5, 4, 3, ELDAN_MODE_ELDAN, 9, "A", &m) == ELDAN_OK);
  char* info = nullptr;
  REQUIRE(eldan_model_info(m, &info) == ELDAN_OK);
  const auto j = json::parse(take(info));
  CHECK(j["mode"] == "eldan");
  CHECK(j["target"] == "A");
  CHECK(j["dims"]["feature_dim"] == 120);

  double p = -1.0;
  double att[2] = {0.0, 0.0};
  std::size_t n_docs = 0;
  REQUIRE(eldan_model_predict(m, f.corpus, 0, &p, att, 2, &n_docs) == ELDAN_OK);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(n_docs >= 1);
  CHECK(eldan_model_predict(m, f.corpus, 100000, &p, nullptr, 0, nullptr) ==
        ELDAN_ERR_INVALID_ARGUMENT);

  const auto path = (fs::temp_directory_path() / "eldan_capi_model.eldan").string();
  REQUIRE(eldan_model_save(m, path.c_str(), 64) == ELDAN_OK);
  CHECK(eldan_model_save(m, path.c_str(), 16) == ELDAN_ERR_INVALID_ARGUMENT);
  eldan_model* loaded = nullptr;
  CHECK(eldan_model_load(path.c_str(), 121, &loaded) == ELDAN_ERR_SHAPE_MISMATCH);
  REQUIRE(eldan_model_load(path.c_str(), 120, &loaded) == ELDAN_OK);
  for (std::size_t i = 0; i < 50; ++i) {
    double a = 0.0, b = 0.0;
    REQUIRE(eldan_model_predict(m, f.corpus, i, &a, nullptr, 0, nullptr) == ELDAN_OK);
    REQUIRE(eldan_model_predict(loaded, f.corpus, i, &b, nullptr, 0, nullptr) == ELDAN_OK);
    CHECK(a == b);
  }
  eldan_model_free(loaded);
  eldan_model_free(m);
  fs::remove(path);
}

TEST_CASE("train, evaluate and compare with chance") {
  Fixture f;
  eldan_model* m = nullptr;
  char* history = nullptr;
  REQUIRE(eldan_train_code(f.corpus, f.corpus, "A", kTrain, nullptr, &m, &history) == ELDAN_OK);
  CHECK(take(history).rfind("epoch\t", 0) == 0);
  CHECK(eldan_train_code(f.corpus, f.corpus, "43239", kTrain, nullptr, &m, nullptr) ==
        ELDAN_ERR_NOT_FOUND);

  char* enc = nullptr;
  REQUIRE(eldan_eval_encounters(m, f.corpus, &enc) == ELDAN_OK);
  const auto ej = json::parse(take(enc));
  for (const char* key : {"tp", "fp", "fn", "precision", "recall", "f1", "n_enc", "mean_loss"}) {
    CHECK(ej.contains(key));
  }
  CHECK(ej["n_enc"] == 300);

  char* dump = nullptr;
  REQUIRE(eldan_attention_dump(m, f.corpus, &dump) == ELDAN_OK);
  CHECK(take(dump).find("\"selected\"") != std::string::npos);

  char* doc = nullptr;
  REQUIRE(eldan_document_f1(m, f.corpus, &doc) == ELDAN_OK);
  const auto dj = json::parse(take(doc));
  CHECK(dj["tp"].get<int>() + dj["fn"].get<int>() == dj["n_source"].get<int>());

  char* chance = nullptr;
  REQUIRE(eldan_chance(f.corpus, "A", 40, 2, 1, &chance) == ELDAN_OK);
  const std::string chance_json = take(chance);
  CHECK(json::parse(chance_json)["runs"] == 40);
  double t = 0.0, p = 0.0;
  int significant = -1;
  REQUIRE(eldan_significance(chance_json.c_str(), 1.0, 0, &t, &p, &significant) == ELDAN_OK);
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(significant == (p < 0.05 ? 1 : 0));
  eldan_model_free(m);
}

TEST_CASE("transfer donor must match the feature dimension") {
  Fixture f;
  eldan_model* donor = nullptr;
  REQUIRE(eldan_model_init(50, 6, 5, 4, 3, ELDAN_MODE_ELDAN, 1, "A", &donor) == ELDAN_OK);
  eldan_model* m = nullptr;
  CHECK(eldan_train_code(f.corpus, f.corpus, "A", kTrain, donor, &m, nullptr) != ELDAN_OK);
  CHECK(m == nullptr);
  eldan_model_free(donor);
}

TEST_CASE("sweep writes named models and the report reads them") {
  Fixture f;
  const auto dir = fs::temp_directory_path() / "eldan_capi_sweep";
  fs::remove_all(dir);
  char* summary = nullptr;
  REQUIRE(eldan_train_all(f.corpus, f.corpus, kTrain, dir.string().c_str(), 1, &summary) ==
          ELDAN_OK);
  const std::string s = take(summary);
  CHECK(s.find("A\tok") != std::string::npos);
  CHECK(fs::exists(dir / "A.eldan.eldan"));
  CHECK(fs::exists(dir / "B.eldan.history.tsv"));

  char *enc = nullptr, *macro = nullptr, *doc = nullptr;
  REQUIRE(eldan_report(dir.string().c_str(), f.corpus, f.corpus, 10, 10, 1, 1, &enc, &macro, &doc) ==
          ELDAN_OK);
  CHECK(take(enc).find("Average") != std::string::npos);
  CHECK(take(macro).size() > 0);
  CHECK(take(doc).size() > 0);
  CHECK(eldan_report("/nonexistent/dir", f.corpus, nullptr, 10, 0, 1, 1, &enc, nullptr, nullptr) ==
        ELDAN_ERR_IO);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck through the C interface") {
  char* tsv = nullptr;
  int passed = 0;
  REQUIRE(eldan_gradcheck(R"({"mode": "eldn", "n_trials": 5})", &tsv, &passed) == ELDAN_OK);
  CHECK(passed == 1);
  CHECK(take(tsv).find("W_FC3") == std::string::npos);
  CHECK(eldan_gradcheck("{not json", &tsv, &passed) == ELDAN_ERR_PARSE);
}
