"""Regenerate the canonical dataset copies in this directory.

Sources are the data files bundled in three PyPI wheels:
  palmerpenguins 0.1.6      -> penguins.csv (verbatim)
  keel-ds 0.2.5             -> iris, tae, vowel (KEEL mirrors of UCI)
  imbalanced-databases 0.1.1 -> glass (verbatim UCI glass.data), ecoli
                               (rebuilt from the KEEL one-vs-rest files)

Usage: python3 build_datasets.py <dir-with-extracted-raw-files>
"""
import csv
import sys
from collections import Counter
from pathlib import Path

raw = Path(sys.argv[1])
out = Path(__file__).resolve().parent


def keel_rows(path):
    rows = []
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([c.strip() for c in line.split(",")])
    return rows


def write(name, header, rows):
    with open(out / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(name, len(rows), Counter(r[-1] for r in rows))


# Iris: 150 x 4, species label
write("iris.csv",
      ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"],
      keel_rows(raw / "keel_iris.dat"))

# Tae: 151 x 5, class 1..3
write("tae.csv",
      ["native_english", "instructor", "course", "semester", "class_size", "score"],
      keel_rows(raw / "keel_tae.dat"))

# Vowel: the 528-row training portion (TT flag = 0) of the 990-row vowel-context data
vowel = [r for r in keel_rows(raw / "keel_vowel.dat") if r[0] == "0"]
write("vowel.csv", [f"f{i}" for i in range(10)] + ["vowel"], [r[3:] for r in vowel])

# Glass: drop the leading row id, keep RI..Fe and the type label
glass = [l.strip().split(",") for l in open(raw / "glass.data.txt") if l.strip()]
write("glass.csv",
      ["ri", "na", "mg", "al", "si", "k", "ca", "ba", "fe", "type"],
      [r[1:] for r in glass])

# Ecoli: ecoli1 holds all 336 rows; each KEEL one-vs-rest file names the
# classes on its positive side. KEEL numbers the classes alphabetically.
names = ["cp", "im", "imL", "imS", "imU", "om", "omL", "pp"]


def values(r):
    # (mcg, gvh, aac, alm1, alm2); several mirrors drop the chg column
    vals = [v for v in r if v not in ("positive", "negative")]
    return [float(v) for v in [vals[0], vals[1]] + vals[-3:]]


def compatible(scaled, v):
    # some mirrors store "0.xy" as the digits "xy" with trailing zeros
    # stripped, so 4.0 may mean 0.4 or 0.04
    return any(abs(scaled / d - v) < 1e-9 for d in (1.0, 10.0, 100.0))


base = keel_rows(raw / "ecoli1.dat")
base_vals = [values(r) for r in base]
candidates = [set(range(8)) for _ in base]


def matches(r):
    vals = values(r)
    if all(v <= 1.0 for v in vals):
        return [i for i, b in enumerate(base_vals) if all(abs(x - y) < 1e-9 for x, y in zip(vals, b))]
    return [i for i, b in enumerate(base_vals) if all(compatible(x, y) for x, y in zip(vals, b))]


def narrow(fname, neg, pos):
    for r in keel_rows(raw / fname):
        side = pos if r[-1] == "positive" else neg
        hits = matches(r)
        if not hits:
            raise SystemExit(f"{fname}: no match for {r}")
        live = [i for i in hits if candidates[i] & side]
        if len(live) == 1:
            candidates[live[0]] &= side


everything = set(range(8))
for fname, cls in [("ecoli1.dat", 1), ("ecoli2.dat", 7), ("ecoli3.dat", 4), ("ecoli4.dat", 5)]:
    narrow(fname, everything - {cls}, {cls})
for p in sorted(raw.glob("ecoli-*_vs_*.dat")):
    if p.name == "ecoli-0_vs_1.dat":
        # this mirror marks the majority side (cp) as positive
        continue
    neg, pos = p.name[len("ecoli-"):-len(".dat")].split("_vs_")
    narrow(p.name, {int(c) for c in neg.split("-")}, {int(c) for c in pos.split("-")})

rows = []
for r, c in zip(base, candidates):
    if len(c) != 1:
        raise SystemExit(f"ambiguous ecoli row {r[:7]}: {c}")
    rows.append(r[:7] + [names[next(iter(c))]])
write("ecoli.csv", ["mcg", "gvh", "lip", "chg", "aac", "alm1", "alm2", "site"], rows)
