#!/usr/bin/env python3
"""Fill in round-to-nearest expected values of a binary64 corpus with MPFR.

usage: corpus_expected.py {exp2,log} CORPUS [OUT]

Input lines are `<hex>` or `<hex>,<hex>`; comments are kept, any existing
expected value is replaced.
"""
import sys

import gmpy2
from gmpy2 import mpfr


def binary64():
    ctx = gmpy2.ieee(64)
    ctx.subnormalize = True
    ctx.round = gmpy2.RoundToNearest
    return ctx


def expected(fn, x):
    with binary64():
        v = gmpy2.exp2(mpfr(x)) if fn == "exp2" else gmpy2.log(mpfr(x))
        return float(v)


def fmt(v):
    if v != v:
        return "nan"
    if v in (float("inf"), float("-inf")):
        return ("-" if v < 0 else "") + "inf"
    if v == 0.0:
        return "-0x0p+0" if str(v).startswith("-") else "0x0p+0"
    return v.hex()


def main():
    fn, path = sys.argv[1], sys.argv[2]
    out = sys.argv[3] if len(sys.argv) > 3 else path
    if fn not in ("exp2", "log"):
        sys.exit("function must be exp2 or log")
    lines = []
    with open(path) as f:
        for raw in f:
            body, sep, comment = raw.rstrip("\n").partition("#")
            field = body.split(",")[0].strip()
            if not field:
                lines.append(raw.rstrip("\n"))
                continue
            x = float.fromhex(field)
            line = f"{field},{fmt(expected(fn, x))}"
            if sep:
                line += " #" + comment
            lines.append(line)
    with open(out, "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
