"""Matrices of exp-polynomials in t.

An entry is a finite sum of c * e^{t theta} * z^alpha * t^s where theta <= 0
is real, z_j = e^{i t w_j} for a fixed list of real frequencies w_j, alpha is
a multi-index and s an integer.  Terms are kept in a dict keyed by
(theta, alpha, s).  In exact mode theta and the frequencies are Fractions and
coefficients are Gaussian rationals; in float mode everything is complex and
theta is rounded for keying.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath
import numpy as np

from . import linalg as la
from .errors import ValidationError
from .spectral import to_mpc, to_mp_matrix

_THETA_DIGITS = 12


def theta_key(theta, exact: bool):
    if exact:
        return Fraction(theta)
    return round(float(theta), _THETA_DIGITS) + 0.0


class ExpPolyMatrix:
    __slots__ = ("terms", "shape", "phases", "exact")

    def __init__(self, terms: dict, shape, phases: tuple, exact: bool, prune: bool = True):
        self.shape = tuple(shape)
        self.phases = tuple(phases)
        self.exact = exact
        if prune:
            terms = _prune(terms, exact)
        self.terms = terms

    # construction helpers
    @classmethod
    def zero(cls, shape, phases, exact):
        return cls({}, shape, phases, exact, prune=False)

    @classmethod
    def constant(cls, c: np.ndarray, phases=(), exact=None):
        exact = la.is_exact(c) if exact is None else exact
        return cls({(theta_key(0, exact), (0,) * len(phases), 0): c}, c.shape, phases, exact)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def _zero_alpha(self):
        return (0,) * len(self.phases)

    def is_zero(self) -> bool:
        return not self.terms

    def thetas(self):
        return sorted({k[0] for k in self.terms}, reverse=True)

    def max_theta(self):
        return max(k[0] for k in self.terms) if self.terms else None

    def min_power(self):
        return min((k[2] for k in self.terms), default=0)

    def _like(self, terms, shape=None, prune=True):
        return ExpPolyMatrix(terms, shape or self.shape, self.phases, self.exact, prune)

    # arithmetic
    def __add__(self, other: "ExpPolyMatrix") -> "ExpPolyMatrix":
        _compatible(self, other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms[k] + c if k in terms else c
        return self._like(terms)

    def __neg__(self):
        return self._like({k: -c for k, c in self.terms.items()}, prune=False)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "ExpPolyMatrix":
        return self._like({k: v * c for k, v in self.terms.items()})

    def shift_power(self, k: int) -> "ExpPolyMatrix":
        """Multiply by t^k."""
        return self._like({(th, a, s + k): c for (th, a, s), c in self.terms.items()}, prune=False)

    def matmul(self, other, cutoff=None) -> "ExpPolyMatrix":
        """Product, dropping terms with theta below ``cutoff``."""
        if isinstance(other, ExpPolyMatrix):
            _compatible_phases(self, other)
            out = {}
            for (t1, a1, s1), c1 in self.terms.items():
                for (t2, a2, s2), c2 in other.terms.items():
                    th = theta_key(t1 + t2, self.exact)
                    if cutoff is not None and th < cutoff:
                        continue
                    key = (th, tuple(x + y for x, y in zip(a1, a2)), s1 + s2)
                    p = c1 @ c2
                    out[key] = out[key] + p if key in out else p
            return ExpPolyMatrix(out, (self.rows, other.cols), self.phases, self.exact)
        other = np.asarray(other)
        return ExpPolyMatrix({k: c @ other for k, c in self.terms.items()}, (self.rows, other.shape[1]),
                             self.phases, self.exact)

    def __matmul__(self, other):
        return self.matmul(other)

    def rmatmul(self, left: np.ndarray) -> "ExpPolyMatrix":
        left = np.asarray(left)
        return ExpPolyMatrix({k: left @ c for k, c in self.terms.items()}, (left.shape[0], self.cols),
                             self.phases, self.exact)

    def truncate(self, cutoff) -> "ExpPolyMatrix":
        return self._like({k: c for k, c in self.terms.items() if k[0] >= cutoff}, prune=False)

    def at_theta(self, theta) -> "ExpPolyMatrix":
        """Terms with the given theta, re-keyed to theta = 0."""
        z = theta_key(0, self.exact)
        return self._like({(z, a, s): c for (th, a, s), c in self.terms.items() if th == theta}, prune=False)

    def block(self, rows: slice, cols: slice) -> "ExpPolyMatrix":
        terms = {k: c[rows, cols] for k, c in self.terms.items()}
        shape = la.zeros(self.shape, False)[rows, cols].shape
        return self._like(terms, shape)

    def entry(self, i: int, j: int) -> dict:
        return {k: c[i, j] for k, c in self.terms.items() if _nonzero(c[i, j], self.exact)}

    @classmethod
    def from_entries(cls, entries, phases, exact):
        """Build from a 2-d list of scalar dicts {key: value}."""
        r, c = len(entries), len(entries[0]) if entries else 0
        out = {}
        for i in range(r):
            for j in range(c):
                for k, v in entries[i][j].items():
                    if k not in out:
                        out[k] = la.zeros((r, c), exact)
                    out[k][i, j] = v
        return cls(out, (r, c), phases, exact)

    def with_phases(self, phases: tuple, mapping) -> "ExpPolyMatrix":
        """Re-express over a larger phase list; ``mapping[j]`` is the new index of phase j."""
        terms = {}
        for (th, a, s), c in self.terms.items():
            b = [0] * len(phases)
            for j, x in enumerate(a):
                b[mapping[j]] += x
            terms[(th, tuple(b), s)] = c
        return ExpPolyMatrix(terms, self.shape, phases, self.exact)

    # evaluation
    def frequency(self, alpha):
        return sum((x * w for x, w in zip(alpha, self.phases)), Fraction(0) if self.exact else 0.0)

    def __call__(self, t, dps: int | None = None):
        if dps is not None:
            return self.evaluate_mp(t, dps)
        t = complex(t)
        out = np.zeros(self.shape, dtype=complex)
        for (th, a, s), c in self.terms.items():
            w = float(self.frequency(a))
            out += np.exp(t * (float(th) + 1j * w)) * t ** s * la.float_array(c)
        return out

    def evaluate_mp(self, t, dps: int):
        with mpmath.workdps(dps):
            t = mpmath.mpmathify(t)
            out = mpmath.matrix(self.rows, self.cols)
            for (th, a, s), c in self.terms.items():
                w = self.frequency(a)
                rate = _mp_real(th) + 1j * _mp_real(w)
                out += mpmath.exp(t * rate) * t ** s * to_mp_matrix(c)
            return out

    def is_identically_zero(self) -> bool:
        """Zero as a function of t (distinct keys may share a frequency)."""
        return not self.collapsed().terms

    def collapsed(self) -> "ExpPolyMatrix":
        """Merge keys with equal (theta, frequency, s) onto the lexicographically first alpha."""
        groups = {}
        for (th, a, s), c in self.terms.items():
            g = (th, theta_key(self.frequency(a), self.exact) if not self.exact else self.frequency(a), s)
            groups.setdefault(g, []).append((a, c))
        out = {}
        for (th, _, s), items in groups.items():
            items.sort(key=lambda x: x[0])
            tot = items[0][1]
            for _, c in items[1:]:
                tot = tot + c
            out[(th, items[0][0], s)] = tot
        return self._like(out)

    def __repr__(self):
        return f"ExpPolyMatrix(shape={self.shape}, terms={len(self.terms)}, thetas={self.thetas()})"


def _mp_real(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(float(x))


def _nonzero(x, exact):
    return bool(x) if exact else x != 0


def _prune(terms: dict, exact: bool) -> dict:
    if exact:
        return {k: c for k, c in terms.items() if not la.is_zero(c)}
    if not terms:
        return {}
    ref = max(float(np.max(np.abs(c))) if c.size else 0.0 for c in terms.values())
    cut = 1e-14 * ref
    out = {}
    for k, c in terms.items():
        if c.size and float(np.max(np.abs(c))) > cut:
            out[k] = c
    return out


def _compatible_phases(a, b):
    if a.phases != b.phases:
        raise ValidationError("exp-polynomials over different phase lists")


def _compatible(a, b):
    _compatible_phases(a, b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")


# -- scalar exp-polynomials as dicts ------------------------------------------------

def padd(a: dict, b: dict, exact: bool) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out[k] + v if k in out else v
    return {k: v for k, v in out.items() if _nonzero(v, exact)}


def pmul(a: dict, b: dict, exact: bool) -> dict:
    out = {}
    for (t1, a1, s1), v1 in a.items():
        for (t2, a2, s2), v2 in b.items():
            key = (theta_key(t1 + t2, exact), tuple(x + y for x, y in zip(a1, a2)), s1 + s2)
            p = v1 * v2
            out[key] = out[key] + p if key in out else p
    return {k: v for k, v in out.items() if _nonzero(v, exact)}


def pneg(a: dict) -> dict:
    return {k: -v for k, v in a.items()}


def ppow(a: dict, k: int, one: dict, exact: bool) -> dict:
    out = one
    for _ in range(k):
        out = pmul(out, a, exact)
    return out


def determinant_and_adjugate(m: ExpPolyMatrix):
    """det and adjugate of a square exp-polynomial matrix by memoised minors."""
    d = m.rows
    exact = m.exact
    ent = [[m.entry(i, j) for j in range(d)] for i in range(d)]
    memo = {}

    def minor(rows: tuple, cols: tuple) -> dict:
        if not rows:
            return {(theta_key(0, exact), (0,) * len(m.phases), 0): (la.ONE if exact else 1.0)}
        key = (rows, cols)
        if key in memo:
            return memo[key]
        r0, rest = rows[0], rows[1:]
        tot = {}
        for pos, c in enumerate(cols):
            e = ent[r0][c]
            if not e:
                continue
            sub = minor(rest, cols[:pos] + cols[pos + 1:])
            if not sub:
                continue
            p = pmul(e, sub, exact)
            tot = padd(tot, pneg(p) if pos % 2 else p, exact)
        memo[key] = tot
        return tot

    allr = tuple(range(d))
    det = minor(allr, allr)
    adj = [[None] * d for _ in range(d)]
    for i in range(d):
        for j in range(d):
            c = minor(allr[:j] + allr[j + 1:], allr[:i] + allr[i + 1:])
            adj[i][j] = pneg(c) if (i + j) % 2 else c
    return det, ExpPolyMatrix.from_entries(adj, m.phases, exact) if d else ExpPolyMatrix.zero((0, 0), m.phases, exact)


def scalar_matrix(p: dict, phases, exact) -> ExpPolyMatrix:
    return ExpPolyMatrix.from_entries([[p]], phases, exact) if p else ExpPolyMatrix.zero((1, 1), phases, exact)


def eval_scalar(p: dict, phases, t, dps: int | None = None):
    if dps is None:
        t = complex(t)
        tot = 0j
        for (th, a, s), v in p.items():
            w = sum(x * float(f) for x, f in zip(a, phases))
            tot += np.exp(t * (float(th) + 1j * w)) * t ** s * complex(v)
        return tot
    with mpmath.workdps(dps):
        t = mpmath.mpmathify(t)
        tot = mpmath.mpc(0)
        for (th, a, s), v in p.items():
            w = sum((x * f for x, f in zip(a, phases)), Fraction(0) if isinstance(th, Fraction) else 0.0)
            rate = _mp_real(th) + 1j * _mp_real(w)
            tot += mpmath.exp(t * rate) * t ** s * (to_mpc(v) if isinstance(v, la.GaussianRational) else mpmath.mpc(complex(v)))
        return tot


def iter_monomials(p: dict):
    """Keys of a scalar dict in canonical order: lex alpha, then t-power decreasing."""
    return sorted(p.items(), key=lambda kv: (kv[0][1], -kv[0][2]))


def phase_exponents(alpha) -> list:
    return list(itertools.chain(alpha))
