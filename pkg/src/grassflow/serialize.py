"""Canonical JSON for scalars, matrices and projection series.

Exact scalars are "p/q" strings or [re, im] pairs of such strings; float
scalars are [re, im] pairs of numbers.  Series terms are listed with theta
decreasing, then by phase multi-index, then by decreasing power of t.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import linalg as la
from .errors import ValidationError
from .exppoly import ExpPolyMatrix, theta_key
from .projasym import AsymptoticSeries, SeriesTerm

SERIES_FORMAT = "grassflow-series/1"


def real_to_json(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if x is None:
        return None
    return float(x) + 0.0


def real_from_json(x, exact: bool):
    if x is None:
        return None
    return Fraction(x) if exact else float(Fraction(x) if isinstance(x, str) else x)


def scalar_to_json(z):
    if isinstance(z, la.GaussianRational):
        return z.to_json()
    z = complex(z)
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def scalar_from_json(x, exact: bool):
    return la.scalar(x) if exact else la.float_scalar(x)


def matrix_to_json(a: np.ndarray) -> list:
    a = np.asarray(a)
    return [[scalar_to_json(a[i, j]) for j in range(a.shape[1])] for i in range(a.shape[0])]


def matrix_from_json(rows, exact: bool) -> np.ndarray:
    return la.matrix([[scalar_from_json(x, exact) for x in r] for r in rows], exact)


def vector_to_json(v) -> list:
    return [scalar_to_json(x) for x in np.asarray(v).reshape(-1)]


def _monomial_order(key):
    _, alpha, s = key
    return (alpha, -s)


def _t_power(s: int) -> str:
    if s == 0:
        return ""
    if s == 1:
        return "t"
    if s > 0:
        return f"t^{s}"
    return "1/t" if s == -1 else f"1/t^{-s}"


def _phase_str(alpha) -> str:
    return "*".join(f"z{j + 1}" + (f"^{a}" if a != 1 else "") for j, a in enumerate(alpha) if a)


def _coef_str(c) -> str:
    if isinstance(c, la.GaussianRational):
        s = str(c)
        return f"({s})" if c.re and c.im else s
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:.12g}"
    return f"({c.real:.12g}{c.imag:+.12g}i)"


def _monomial_str(c, alpha, s) -> str:
    factors = [f for f in (_phase_str(alpha), _t_power(s)) if f]
    if not factors:
        return _coef_str(c)
    body = factors[0] if len(factors) == 1 else f"{factors[0]}*{factors[1]}"
    cs = _coef_str(c)
    if body.startswith("1/"):
        if cs == "1":
            return body
        if cs == "-1":
            return "-" + body
        return f"{cs}/{body[2:]}"
    if cs == "1":
        return body
    if cs == "-1":
        return "-" + body
    return f"{cs}*{body}"


def _entry_display(monos, q_trivial: bool, denom: int):
    """Readable form of one matrix entry; plain integers stay numbers."""
    if not monos:
        return 0
    if len(monos) == 1 and q_trivial:
        (alpha, s), c = monos[0]
        if s == 0 and not any(alpha):
            if isinstance(c, la.GaussianRational) and not c.im and la.to_fraction(c.re).denominator == 1:
                return int(la.to_fraction(c.re))
    parts = [_monomial_str(c, a, s) for (a, s), c in monos]
    text = " + ".join(parts).replace("+ -", "- ")
    if not q_trivial and denom:
        text = f"({text})/q" + (f"^{denom}" if denom > 1 else "")
    return text


def term_display(s: AsymptoticSeries, tm: SeriesTerm) -> list:
    q_trivial = _q_is_one(s)
    out = []
    exact = s.exact
    for i in range(s.n):
        row = []
        for j in range(s.n):
            monos = []
            for key in sorted(tm.numerator.terms, key=_monomial_order):
                c = tm.numerator.terms[key][i, j]
                if (c != 0) if exact else abs(c) > 0:
                    monos.append(((key[1], key[2]), c))
            row.append(_entry_display(monos, q_trivial, tm.denom_power))
        out.append(row)
    return out


def _q_is_one(s: AsymptoticSeries) -> bool:
    if len(s.q) != 1:
        return False
    (th, alpha, p), v = next(iter(s.q.items()))
    one = la.ONE if s.exact else 1.0
    return p == 0 and not any(alpha) and v == one


def series_to_json(s: AsymptoticSeries) -> dict:
    terms = []
    for tm in sorted(s.terms, key=lambda t: -float(t.theta)):
        mon = []
        for key in sorted(tm.numerator.terms, key=_monomial_order):
            _, alpha, p = key
            mon.append({"phase": list(alpha), "t_power": p,
                        "coefficient": matrix_to_json(tm.numerator.terms[key])})
        terms.append({"theta": real_to_json(tm.theta), "denom_power": tm.denom_power,
                      "numerator": mon, "display": term_display(s, tm)})
    q = [{"phase": list(alpha), "t_power": p, "coefficient": scalar_to_json(v)}
         for (_, alpha, p), v in sorted(s.q.items(), key=lambda kv: _monomial_order(kv[0]))]
    return {
        "format": SERIES_FORMAT,
        "mode": "exact" if s.exact else "float",
        "n": s.n,
        "phases": [real_to_json(w) for w in s.phases],
        "cutoff": real_to_json(s.cutoff),
        "next_theta": real_to_json(s.next_theta),
        "q": {"t_shift": s.q_shift, "terms": q},
        "terms": terms,
    }


def series_from_json(d: dict) -> AsymptoticSeries:
    if d.get("format") != SERIES_FORMAT:
        raise ValidationError(f"unknown series format {d.get('format')!r}")
    exact = d["mode"] == "exact"
    n = int(d["n"])
    phases = tuple(real_from_json(w, exact) for w in d["phases"])
    zero = theta_key(0, exact)
    terms = []
    for td in d["terms"]:
        entries = {}
        for m in td["numerator"]:
            key = (zero, tuple(int(a) for a in m["phase"]), int(m["t_power"]))
            entries[key] = matrix_from_json(m["coefficient"], exact)
        num = ExpPolyMatrix(entries, (n, n), phases, exact)
        terms.append(SeriesTerm(theta=theta_key(real_from_json(td["theta"], exact), exact), numerator=num,
                                denom_power=int(td["denom_power"])))
    q = {(zero, tuple(int(a) for a in m["phase"]), int(m["t_power"])): scalar_from_json(m["coefficient"], exact)
         for m in d["q"]["terms"]}
    return AsymptoticSeries(phases=phases, terms=terms, q=q, q_shift=int(d["q"]["t_shift"]),
                            cutoff=real_from_json(d["cutoff"], exact), exact=exact, n=n,
                            next_theta=real_from_json(d.get("next_theta"), exact))
