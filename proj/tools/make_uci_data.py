#!/usr/bin/env python3
"""Rebuild data/uci/{australian,german,heart} in LIBSVM format.

Sources (both on PyPI, used only as archives; nothing is imported):
  keel-ds 0.2.5               keel_ds/data/balanced/raw/{australian,heart}.dat
  imbalanced-databases 0.1.1  imbalanced_databases/data/german/german.data-numeric.txt

german uses the 24-attribute numeric encoding distributed with the Statlog
data. heart is copied as is.

The KEEL copy of australian lost its decimal points: 22.08 is stored as 2208
but 16 stays 16. Attribute 2 (age, 13.75..80.25 in the original) spans less
than a factor of ten, so exactly one power-of-ten divisor puts each stored
value back in range and the column is restored. Attributes 3 and 7 are
ambiguous (125 may be 1.25 or 12.5) and are left as stored.

usage: make_uci_data.py <keel_ds wheel> <imbalanced_databases wheel> <output dir>
"""

import pathlib
import sys
import zipfile

AGE_RANGE = (13.75, 80.25)


def read_member(wheel, member):
    with zipfile.ZipFile(wheel) as z:
        return z.read(member).decode()


def keel_rows(wheel, name):
    text = read_member(wheel, f"keel_ds/data/balanced/raw/{name}.dat")
    return [[t.strip() for t in line.split(",")] for line in text.splitlines() if line.strip()]


def restore_age(v):
    fits = [v / 10**k for k in range(4) if AGE_RANGE[0] <= v / 10**k <= AGE_RANGE[1]]
    if len(fits) != 1:
        raise ValueError(f"cannot restore age value {v}")
    return fits[0]


def fmt(v):
    return str(int(v)) if v == int(v) else repr(round(v, 10))


def libsvm_line(label, feats):
    return " ".join([label] + [f"{j + 1}:{fmt(v)}" for j, v in enumerate(feats) if v != 0.0])


def australian(keel):
    out = []
    for r in keel_rows(keel, "australian"):
        feats = [float(x) for x in r[:-1]]
        feats[1] = restore_age(feats[1])
        out.append(libsvm_line("+1" if r[-1] == "1" else "-1", feats))
    return out


def heart(keel):
    # 2 = presence of heart disease
    return [libsvm_line("+1" if r[-1] == "2" else "-1", [float(x) for x in r[:-1]]) for r in keel_rows(keel, "heart")]


def german(imb):
    text = read_member(imb, "imbalanced_databases/data/german/german.data-numeric.txt")
    out = []
    for line in text.splitlines():
        toks = line.split()
        if not toks:
            continue
        # 1 = good credit risk
        out.append(libsvm_line("+1" if toks[-1] == "1" else "-1", [float(x) for x in toks[:-1]]))
    return out


def main(argv):
    if len(argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    outdir = pathlib.Path(argv[3])
    outdir.mkdir(parents=True, exist_ok=True)
    for name, lines in (("australian", australian(argv[1])), ("german", german(argv[2])), ("heart", heart(argv[1]))):
        (outdir / name).write_text("\n".join(lines) + "\n")
        print(f"{name}: {len(lines)} instances")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
