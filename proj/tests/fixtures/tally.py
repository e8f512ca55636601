#!/usr/bin/env python3
# Copyright 2026 The ELDAN Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent tally of a corpus JSONL file.

Reads the file line by line without any project code and prints the counts
the C++ tests compare against. Output is frozen into <name>.expected.json.

    python3 tally.py three.jsonl three.manifest.json > three.expected.json
"""
import json
import sys


def main(corpus_path, manifest_path):
    manifest = json.load(open(manifest_path))
    n_enc = 0
    n_doc = 0
    n_entries = 0
    carriers = {c: 0 for c in manifest["code_vocab"]}
    carrier_docs = {c: 0 for c in manifest["code_vocab"]}
    docs_per_enc = []
    with open(corpus_path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            n_enc += 1
            m = len(rec["documents"])
            n_doc += m
            docs_per_enc.append(m)
            n_entries += sum(len(d["features"]) for d in rec["documents"])
            for c in set(rec["codes"]):
                carriers[c] += 1
                carrier_docs[c] += m
    stats = []
    for c in manifest["code_vocab"]:
        stats.append({
            "code": c,
            "carriers": carriers[c],
            "prevalence": carriers[c] / n_enc,
            "mean_docs": carrier_docs[c] / carriers[c] if carriers[c] else 0.0,
        })
    stats.sort(key=lambda s: (-s["carriers"], s["code"]))
    json.dump({
        "n_encounters": n_enc,
        "n_documents": n_doc,
        "n_feature_entries": n_entries,
        "docs_per_encounter": docs_per_enc,
        "code_stats": stats,
    }, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
