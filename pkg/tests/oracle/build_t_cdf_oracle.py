"""Rebuild tests/data/t_cdf_oracle.json by numerically integrating the t density.

Run from the repository root::

    python tests/oracle/build_t_cdf_oracle.py

The values come from mpmath Gauss-Legendre/tanh-sinh quadrature at 40 digits,
independent of the continued-fraction code under test.
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

DFS = [1, 2, 4, 10, 30, 100, 1000]
XS = [i / 4 for i in range(-24, 25)]
OUT = Path(__file__).resolve().parent.parent / "data" / "t_cdf_oracle.json"


def t_pdf(x, df):
    df = mp.mpf(df)
    c = mp.gamma((df + 1) / 2) / (mp.sqrt(df * mp.pi) * mp.gamma(df / 2))
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def t_cdf(x, df) -> mp.mpf:
    x = mp.mpf(x)
    if x == 0:
        return mp.mpf("0.5")
    area = mp.quad(lambda u: t_pdf(u, df), [0, abs(x)])
    return 0.5 + area if x > 0 else 0.5 - area


def main() -> None:
    grid = [{"df": df, "x": x, "cdf": mp.nstr(t_cdf(x, df), 25)} for df in DFS for x in XS]
    # worked Welch example: a = [10, 12, 14], b = [20, 22, 24] gives t = -10/sqrt(8/3), df = 4
    t = -10 / mp.sqrt(mp.mpf(8) / 3)
    welch = {"t": mp.nstr(t, 25), "df": 4, "p_two": mp.nstr(2 * t_cdf(t, 4), 25), "p_less": mp.nstr(t_cdf(t, 4), 25)}
    # one-sample example: [0.6, 0.7, 0.8, 0.9] vs mu = 0.6 gives t = 0.15/(sd/2), sd = sqrt(0.05/3), df = 3
    sd = mp.sqrt(mp.mpf("0.05") / 3)
    t1 = mp.mpf("0.15") / (sd / 2)
    one = {"t": mp.nstr(t1, 25), "df": 3, "p_greater": mp.nstr(1 - t_cdf(t1, 3), 25)}
    OUT.write_text(json.dumps({"method": "mpmath.quad of the t density, 40 digits", "grid": grid, "welch": welch, "one_sample": one}, indent=1) + "\n")
    print(f"wrote {len(grid)} grid points to {OUT}")


if __name__ == "__main__":
    main()
