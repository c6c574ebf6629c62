#!/usr/bin/env python3
"""Writes crates/core/tests/data/model_golden.json.

Values are computed with exact rational arithmetic from the bundled profile
bandwidths and rounded to float once at the end.
"""
import json
from fractions import Fraction as F
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
SIZES = [0, 2**20, 2**29]


def profile(name):
    p = json.loads((ROOT / "profiles" / f"{name}.json").read_text())
    return F(p["read_bw_bytes_per_sec"]), F(p["write_bw_bytes_per_sec"])


def case(model, prof, n, terms, **extra):
    out = {"model": model, "profile": prof, "n": n, **extra}
    out["terms"] = {k: float(v) for k, v in terms}
    out["total_seconds"] = float(sum(v for _, v in terms))
    return out


def main():
    cases = []
    for prof in ["table2-cpu", "table2-gpu"]:
        br, bw = profile(prof)
        for n in SIZES:
            cases.append(case("project", prof, n, [("read", 8 * n / br), ("write", 4 * n / bw)]))
            for sigma in ["0", "0.1", "0.5", "1"]:
                s = F(sigma)
                cases.append(case("select", prof, n,
                                  [("read", 4 * n / br), ("write", 4 * s * n / bw)],
                                  sigma=float(s)))
            for passes in [1, 4]:
                cases.append(case("sort", prof, n, [
                    ("histogram", passes * 4 * n / br),
                    ("shuffle_read", passes * 8 * n / br),
                    ("shuffle_write", passes * 8 * n / bw),
                ], passes=passes))
    out = ROOT / "crates" / "core" / "tests" / "data" / "model_golden.json"
    out.write_text(json.dumps({"cases": cases}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {out.relative_to(ROOT)}")


if __name__ == "__main__":
    main()
