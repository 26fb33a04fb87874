"""Builds the 9-feature COMPAS table used by the example audit config.

Input is ProPublica's compas-scores-two-years.csv. Rows are filtered the same
way as in ProPublica's own analysis, which leaves 6172 defendants.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

FEATURES = [
    "age",
    "sex_male",
    "juv_fel_count",
    "juv_misd_count",
    "juv_other_count",
    "priors_count",
    "charge_felony",
    "age_lt_25",
    "race",
]
LABEL = "two_year_recid"

SCHEMA = {
    "feature_columns": FEATURES,
    "label_column": LABEL,
    "protected_column": "race",
    "protected_positive_values": ["African-American", "Black"],
    "protected_negative_values": ["Caucasian", "Asian", "Hispanic", "Native American", "Other"],
    "include_protected_as_feature": True,
}


def keep(row):
    days = row["days_b_screening_arrest"]
    if days == "" or not -30 <= int(float(days)) <= 30:
        return False
    return row["is_recid"] != "-1" and row["c_charge_degree"] != "O" and row["score_text"] != "N/A"


def convert(row):
    age = int(row["age"])
    return {
        "id": row["id"],
        "age": age,
        "sex_male": int(row["sex"] == "Male"),
        "juv_fel_count": int(row["juv_fel_count"]),
        "juv_misd_count": int(row["juv_misd_count"]),
        "juv_other_count": int(row["juv_other_count"]),
        "priors_count": int(row["priors_count"]),
        "charge_felony": int(row["c_charge_degree"] == "F"),
        "age_lt_25": int(age < 25),
        "race": row["race"],
        LABEL: int(row[LABEL]),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("source", type=Path, help="compas-scores-two-years.csv")
    parser.add_argument("--out", type=Path, default=Path("data/compas/compas_9f.csv"))
    args = parser.parse_args(argv)

    with args.source.open(newline="") as f:
        # The raw file repeats some column names; DictReader keeps the last,
        # which is harmless for the columns read here.
        rows = [convert(r) for r in csv.DictReader(f) if keep(r)]

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["id", *FEATURES, LABEL])
        writer.writeheader()
        writer.writerows(rows)
    args.out.with_suffix(".schema.json").write_text(json.dumps(SCHEMA, indent=2) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
