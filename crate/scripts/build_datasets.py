#!/usr/bin/env python3
"""Rebuild data/mushrooms.libsvm and data/australian.libsvm from their sources.

usage: build_datasets.py <agaricus-lepiota.data> <keel australian.dat> <outdir>

mushrooms: every nominal attribute except stalk-root (the one with missing
values) is one-hot expanded over the values that occur in the data, in the
order the UCI attribute description lists them. That yields 112 binary
features. Label 1 = edible, 2 = poisonous.

australian: the KEEL copy of the Statlog credit data. KEEL dropped the
decimal point from continuous values. Column 2 (age, range 13.75..80.25) is
restored exactly because only one power-of-ten reading falls in range.
Columns 3 and 7 are left as KEEL stores them. Label +1 / -1.
"""
import sys

MUSHROOM_VALUES = [
    "bcxfks", "fgys", "nbcgrpuewy", "tf", "alcyfmnps", "adfn", "cwd", "bn",
    "knbhgropuewy", "et", "bcuezr?", "fyks", "fyks", "nbcgopewy", "nbcgopewy",
    "pu", "nowy", "not", "ceflnpsz", "knbhrouwy", "acnsvy", "glmpuwd",
]
STALK_ROOT = 10


def mushrooms(src, out):
    rows = [l.strip().split(",") for l in open(src) if l.strip()]
    used = [[v for v in vals if any(r[j + 1] == v for r in rows)]
            for j, vals in enumerate(MUSHROOM_VALUES)]
    offsets, total = [], 0
    for j, vals in enumerate(used):
        offsets.append(total)
        if j != STALK_ROOT:
            total += len(vals)
    assert total == 112, total
    with open(out, "w") as f:
        for r in rows:
            label = "1" if r[0] == "e" else "2"
            idx = [offsets[j] + used[j].index(r[j + 1]) + 1
                   for j in range(22) if j != STALK_ROOT]
            f.write(label + " " + " ".join(f"{i}:1" for i in idx) + "\n")


def restore_age(v):
    if v == 0:
        return 0.0
    x = v
    while x > 80.25:
        x /= 10.0
    assert 13.75 <= x <= 80.25, v
    return x


def australian(src, out):
    rows = [[float(t) for t in l.strip().split(",")]
            for l in open(src) if l.strip() and not l.startswith("@")]
    assert len(rows) == 690
    with open(out, "w") as f:
        for r in rows:
            feats = r[:14]
            feats[1] = restore_age(feats[1])
            label = "+1" if r[14] == 1 else "-1"
            toks = [f"{k + 1}:{v:g}" for k, v in enumerate(feats) if v != 0]
            f.write(label + " " + " ".join(toks) + "\n")


if __name__ == "__main__":
    mush, aus, outdir = sys.argv[1:4]
    mushrooms(mush, f"{outdir}/mushrooms.libsvm")
    australian(aus, f"{outdir}/australian.libsvm")
