#!/usr/bin/env python3
"""Build data/organic_snapshot.csv from the refractiveindex.info database copy
bundled in the `refidx` wheel (pip download refidx==1.3.0).

Tabulated pages are exported verbatim. Formula pages are sampled on a uniform
wavelength grid of FORMULA_POINTS points over their declared range, with k left
empty, mirroring the per-page CSV export of the website.

usage: make_snapshot.py PATH_TO_UNPACKED_REFIDX OUT.csv
"""
import csv
import os
import sys

import numpy as np

FORMULA_POINTS = 100


def load_formula(pkg_dir):
    sys.path.insert(0, pkg_dir)
    from refidx.core import formula  # noqa: E402
    return formula


def fmt(x):
    return repr(float(x))


def main():
    pkg_dir, out_path = sys.argv[1], sys.argv[2]
    db = np.load(os.path.join(pkg_dir, "refidx", "database.npz"), allow_pickle=True)
    organic = db["database"].item()["organic"]
    formula = load_formula(pkg_dir)

    pages = []
    for book_key in organic:
        book = book_key.split(" - ", 1)[1] if " - " in book_key else book_key
        for page in organic[book_key]:
            pages.append((book.encode(), page.encode(), book, page, organic[book_key][page]["DATA"]))
    # byte order, so the compiled file matches a sorted page-tree walk
    pages.sort(key=lambda p: (p[0], p[1]))

    rows = []
    for _, _, book, page, data in pages:
        kind = data["type"]
        if kind.startswith("tabulated"):
            lam = data["wavelengths"]
            idx = data["index"]
            for l, z in zip(lam, idx):
                z = complex(z)
                n = fmt(z.real) if kind != "tabulated k" else ""
                k = fmt(z.imag) if kind != "tabulated n" else ""
                rows.append(("organic", book, page, fmt(l), n, k))
        elif kind.startswith("formula"):
            lo, hi = data["wavelength_range"]
            grid = np.linspace(lo, hi, FORMULA_POINTS)
            n = np.real(formula(grid, np.asarray(data["coefficients"]), int(kind.split()[1])))
            for l, v in zip(grid, n):
                if np.isfinite(v):
                    rows.append(("organic", book, page, fmt(round(l, 6)), fmt(round(v, 6)), ""))

    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shelf", "book", "page", "wavelength_um", "n", "k"])
        w.writerows(rows)
    print(f"{len(rows)} rows, {len({r[1] for r in rows})} books -> {out_path}")


if __name__ == "__main__":
    main()
