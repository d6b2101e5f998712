#!/usr/bin/env python3
# Copyright 2026 The FDML Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds a9a-layout svmlight files from the raw UCI Adult census files.

The a9a layout has 123 binary indicators, in attribute order:

  age(5) workclass(8) fnlwgt(5) education(16) education-num(5)
  marital-status(7) occupation(14) relationship(6) race(5) sex(2)
  capital-gain(2) capital-loss(2) hours-per-week(5) native-country(41)

Categorical values are one-hot in the order listed by adult.names; unknown
values ("?") set no indicator. Continuous attributes are cut at the training
set's quintiles (duplicate cut points merged), capital gain/loss split into zero and nonzero.

Usage: make_a9a.py adult.data adult.test out_train out_test
"""

import bisect
import sys

CATEGORIES = {
    "workclass": "Private, Self-emp-not-inc, Self-emp-inc, Federal-gov, Local-gov, "
                 "State-gov, Without-pay, Never-worked",
    "education": "Bachelors, Some-college, 11th, HS-grad, Prof-school, Assoc-acdm, "
                 "Assoc-voc, 9th, 7th-8th, 12th, Masters, 1st-4th, 10th, Doctorate, "
                 "5th-6th, Preschool",
    "marital-status": "Married-civ-spouse, Divorced, Never-married, Separated, Widowed, "
                      "Married-spouse-absent, Married-AF-spouse",
    "occupation": "Tech-support, Craft-repair, Other-service, Sales, Exec-managerial, "
                  "Prof-specialty, Handlers-cleaners, Machine-op-inspct, Adm-clerical, "
                  "Farming-fishing, Transport-moving, Priv-house-serv, Protective-serv, "
                  "Armed-Forces",
    "relationship": "Wife, Own-child, Husband, Not-in-family, Other-relative, Unmarried",
    "race": "White, Asian-Pac-Islander, Amer-Indian-Eskimo, Other, Black",
    "sex": "Female, Male",
    "native-country": "United-States, Cambodia, England, Puerto-Rico, Canada, Germany, "
                      "Outlying-US(Guam-USVI-etc), India, Japan, Greece, South, China, "
                      "Cuba, Iran, Honduras, Philippines, Italy, Poland, Jamaica, Vietnam, "
                      "Mexico, Portugal, Ireland, France, Dominican-Republic, Laos, "
                      "Ecuador, Taiwan, Haiti, Columbia, Hungary, Guatemala, Nicaragua, "
                      "Scotland, Thailand, Yugoslavia, El-Salvador, Trinadad&Tobago, Peru, "
                      "Hong, Holand-Netherlands",
}

COLUMNS = [
    ("age", "quintile"), ("workclass", "cat"), ("fnlwgt", "quintile"),
    ("education", "cat"), ("education-num", "quintile"), ("marital-status", "cat"),
    ("occupation", "cat"), ("relationship", "cat"), ("race", "cat"), ("sex", "cat"),
    ("capital-gain", "nonzero"), ("capital-loss", "nonzero"),
    ("hours-per-week", "quintile"), ("native-country", "cat"),
]


def read_rows(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [x.strip() for x in line.split(",")]
            label = fields[-1].rstrip(".")
            rows.append((fields[:-1], 1 if label == ">50K" else -1))
    return rows


def quintile_edges(values):
    values = sorted(values)
    n = len(values)
    return sorted({values[(n * k) // 5] for k in range(1, 5)})


def main(argv):
    if len(argv) != 5:
        sys.stderr.write(__doc__)
        return 2
    train = read_rows(argv[1])
    test = read_rows(argv[2])

    encoders = []
    offset = 1
    for col, (name, kind) in enumerate(COLUMNS):
        if kind == "cat":
            values = [v.strip() for v in CATEGORIES[name].split(",")]
            index = {v: i for i, v in enumerate(values)}
            encoders.append((offset, lambda v, index=index: index.get(v)))
            offset += len(values)
        elif kind == "nonzero":
            encoders.append((offset, lambda v: 0 if float(v) == 0.0 else 1))
            offset += 2
        else:
            edges = quintile_edges([float(r[0][col]) for r in train])
            encoders.append(
                (offset, lambda v, edges=edges: bisect.bisect_right(edges, float(v))))
            offset += 5
    assert offset - 1 == 123, offset

    for rows, path in ((train, argv[3]), (test, argv[4])):
        with open(path, "w") as out:
            for fields, label in rows:
                parts = ["+1" if label > 0 else "-1"]
                for (base, encode), value in zip(encoders, fields):
                    if value == "?":
                        continue
                    slot = encode(value)
                    if slot is not None:
                        parts.append("%d:1" % (base + slot))
                out.write(" ".join(parts) + " \n")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
