#!/usr/bin/env python3
"""Rebuild the bundled UCI raw files from locally available mirrors.

The UCI archive is not always reachable, so the three files under
crates/core/data/ were regenerated from package-bundled copies:

  processed.cleveland.data   <- Orange3  Orange/datasets/heart_disease.tab
                                (303 Cleveland rows; `num` is already binarized)
  wdbc.data                  <- scikit-learn sklearn/datasets/data/breast_cancer.csv
                                (569 rows; the original ID column is not shipped
                                there, so a 1-based row number stands in for it)
  mammographic_masses.data   <- keel_ds  data/balanced/raw/mammographic.dat
                                (830 rows; the 131 rows with missing values are
                                already removed upstream)

Usage: prepare_data.py HEART_TAB MAMMO_DAT OUT_DIR
"""
import csv
import os
import sys

import sklearn.datasets


def fmt(v):
    v = float(v)
    return repr(v)


def heart(tab_path, out):
    sex = {"male": 1, "female": 0}
    cp = {"typical ang": 1, "atypical ang": 2, "non-anginal": 3, "asymptomatic": 4}
    restecg = {"normal": 0, "ST-T abnormal": 1, "left vent hypertrophy": 2}
    slope = {"upsloping": 1, "flat": 2, "downsloping": 3}
    thal = {"normal": 3, "fixed defect": 6, "reversable defect": 7}
    rows = []
    with open(tab_path) as f:
        lines = f.read().splitlines()[3:]
    for line in lines:
        c = line.split("\t")
        if len(c) != 14:
            continue

        def num(v):
            return "?" if v == "?" else fmt(v)

        def cat(table, v):
            return "?" if v == "?" else fmt(table[v])

        rows.append(",".join([
            num(c[0]), cat(sex, c[1]), cat(cp, c[2]), num(c[3]), num(c[4]),
            num(c[5]), cat(restecg, c[6]), num(c[7]), num(c[8]), num(c[9]),
            cat(slope, c[10]), num(c[11]), cat(thal, c[12]), str(int(c[13])),
        ]))
    with open(os.path.join(out, "processed.cleveland.data"), "w") as f:
        f.write("\n".join(rows) + "\n")


def wdbc(out):
    b = sklearn.datasets.load_breast_cancer()
    with open(os.path.join(out, "wdbc.data"), "w") as f:
        for i, (x, t) in enumerate(zip(b.data, b.target)):
            diag = "M" if b.target_names[t] == "malignant" else "B"
            f.write(",".join([str(i + 1), diag] + ["%r" % float(v) for v in x]) + "\n")


def mammo(dat_path, out):
    rows = []
    with open(dat_path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            rows.append(",".join(p.strip() for p in line.split(",")))
    with open(os.path.join(out, "mammographic_masses.data"), "w") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    heart_tab, mammo_dat, out_dir = sys.argv[1:4]
    heart(heart_tab, out_dir)
    wdbc(out_dir)
    mammo(mammo_dat, out_dir)
