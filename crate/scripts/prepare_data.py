#!/usr/bin/env python3
"""Convert the raw UCI Adult and ProPublica COMPAS files into the CSV layout
read by `fairweigh` (header row, RFC-4180, UTF-8).

Usage: prepare_data.py RAW_DIR OUT_DIR

RAW_DIR must contain adult.data, adult.test and compas-scores-two-years.csv.

Adult: adult.data and adult.test are concatenated (48,842 rows). Fields are
whitespace-trimmed, the trailing '.' on adult.test labels is removed and '?'
is kept verbatim so the loader can count and drop incomplete rows.

COMPAS: the usual ProPublica screening filters are applied
(|days_b_screening_arrest| <= 30, is_recid != -1, c_charge_degree != 'O',
score_text != 'N/A') and a subset of columns is kept.
"""
import csv
import os
import sys

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

COMPAS_COLUMNS = [
    "sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid",
]


def adult(raw_dir, out_dir):
    rows = []
    for name in ("adult.data", "adult.test"):
        with open(os.path.join(raw_dir, name)) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("|"):
                    continue
                fields = [v.strip() for v in line.split(",")]
                if len(fields) != len(ADULT_COLUMNS):
                    continue
                fields[-1] = fields[-1].rstrip(".")
                rows.append(fields)
    with open(os.path.join(out_dir, "adult.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        w.writerows(rows)
    print(f"adult.csv: {len(rows)} rows")


def compas(raw_dir, out_dir):
    with open(os.path.join(raw_dir, "compas-scores-two-years.csv")) as f:
        reader = csv.reader(f)
        header = next(reader)
        # The raw header repeats some names; the first occurrence wins.
        index = {}
        for i, h in enumerate(header):
            index.setdefault(h, i)
        rows = []
        for r in reader:
            get = lambda c: r[index[c]]
            days = get("days_b_screening_arrest")
            if days == "" or abs(int(float(days))) > 30:
                continue
            if get("is_recid") == "-1":
                continue
            if get("c_charge_degree") == "O":
                continue
            if get("score_text") == "N/A":
                continue
            rows.append([get(c) for c in COMPAS_COLUMNS])
    with open(os.path.join(out_dir, "compas.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPAS_COLUMNS)
        w.writerows(rows)
    print(f"compas.csv: {len(rows)} rows")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    adult(sys.argv[1], sys.argv[2])
    compas(sys.argv[1], sys.argv[2])
