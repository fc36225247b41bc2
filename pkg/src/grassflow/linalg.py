"""Scalars, frames and subspaces in exact or floating mode.

Exact mode works over the Gaussian rationals Q(i) with numpy object arrays
holding :class:`GaussianRational` entries.  Float mode uses complex128 and
SVD rank decisions relative to the largest singular value.  The mode of an
array is read off its dtype; the two are never combined silently.

Subspaces carry a canonical frame.  In exact mode this is the reduced
echelon basis of the column space, so equality is plain comparison.  In float
mode the frame is orthonormal and equality is decided with the gap metric.
"""
from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .errors import AmbientMismatch, NotComplementary, NotContained, ValidationError

_MPQ = type(mpq(0))


# -- tolerances ------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    rank: float = 1e-9
    subspace_eq: float = 1e-9
    cluster: float = 1e-7
    det_floor: float = 1e-8
    # singular values within this factor above the rank cut are ambiguous
    ill_conditioned_band: float = 1e2


_TOL = contextvars.ContextVar("grassflow_tolerances", default=Tolerances())


def get_tolerances() -> Tolerances:
    return _TOL.get()


@contextlib.contextmanager
def use_tolerances(**overrides):
    """Temporarily override tolerances for the current context."""
    token = _TOL.set(replace(_TOL.get(), **overrides))
    try:
        yield _TOL.get()
    finally:
        _TOL.reset(token)


# -- Gaussian rationals ----------------------------------------------------

def _q(x):
    if type(x) is _MPQ:
        return x
    if isinstance(x, (int, np.integer)):
        return mpq(int(x))
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, str):
        s = x.strip().replace(" ", "")
        try:
            return mpq(s)
        except ValueError:
            raise ValidationError(f"not a rational number: {x!r}") from None
    if isinstance(x, (float, complex, np.floating, np.complexfloating)):
        raise TypeError("float value given where an exact rational is required")
    return mpq(x)


class GaussianRational:
    """Element re + i*im of Q(i) with both parts in lowest terms."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _q(re)
        self.im = _q(im)

    @staticmethod
    def _make(re, im):
        z = object.__new__(GaussianRational)
        z.re = re
        z.im = im
        return z

    @classmethod
    def coerce(cls, x):
        if type(x) is cls:
            return x
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise ValidationError(f"complex scalar must be [re, im], got {x!r}")
            return cls(x[0], x[1])
        return cls(x, 0)

    def _other(self, o):
        if type(o) is GaussianRational:
            return o
        if isinstance(o, (int, np.integer, Fraction, _MPQ)):
            return GaussianRational._make(_q(o), mpq(0))
        return None

    def __add__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        return GaussianRational._make(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        return GaussianRational._make(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        return GaussianRational._make(o.re - self.re, o.im - self.im)

    def __mul__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        a, b, c, d = self.re, self.im, o.re, o.im
        if not b and not d:
            return GaussianRational._make(a * c, b)
        return GaussianRational._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        c, d = o.re, o.im
        if not d:
            if not c:
                raise ZeroDivisionError("division by zero in Q(i)")
            return GaussianRational._make(self.re / c, self.im / c)
        den = c * c + d * d
        a, b = self.re, self.im
        return GaussianRational._make((a * c + b * d) / den, (b * c - a * d) / den)

    def __rtruediv__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussianRational._make(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)):
            return NotImplemented
        k = int(k)
        if k < 0:
            return ONE / self ** (-k)
        out, base = ONE, self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, o):
        o = self._other(o)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __ne__(self, o):
        r = self.__eq__(o)
        return r if r is NotImplemented else not r

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def conjugate(self):
        return GaussianRational._make(self.re, -self.im)

    def abs2(self):
        return self.re * self.re + self.im * self.im

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def is_real(self) -> bool:
        return not self.im

    def to_json(self):
        if not self.im:
            return _qstr(self.re)
        return [_qstr(self.re), _qstr(self.im)]

    def __str__(self):
        if not self.im:
            return _qstr(self.re)
        if not self.re:
            return f"{_qstr(self.im)}i"
        sign = "+" if self.im > 0 else "-"
        return f"{_qstr(self.re)}{sign}{_qstr(abs(self.im))}i"

    def __repr__(self):
        return f"GaussianRational({_qstr(self.re)!r}, {_qstr(self.im)!r})"


def _qstr(q) -> str:
    q = _q(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


ZERO = GaussianRational(0, 0)
ONE = GaussianRational(1, 0)
I_UNIT = GaussianRational(0, 1)


def scalar(x) -> GaussianRational:
    """Parse an exact scalar: int, "p/q" string, Fraction or [re, im] pair."""
    return GaussianRational.coerce(x)


def float_scalar(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValidationError(f"complex scalar must be [re, im], got {x!r}")
        return complex(_float_part(x[0]), _float_part(x[1]))
    if isinstance(x, (GaussianRational, complex, np.complexfloating)):
        return complex(x)
    return complex(_float_part(x))


def _float_part(x) -> float:
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def to_fraction(q) -> Fraction:
    q = _q(q)
    return Fraction(int(q.numerator), int(q.denominator))


# -- arrays ------------------------------------------------------------------

def is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def exact_array(a) -> np.ndarray:
    """Object array with every entry a GaussianRational."""
    a = np.asarray(a, dtype=object)
    out = np.empty(a.shape, dtype=object)
    flat_in, flat_out = a.reshape(-1), out.reshape(-1)
    for i, x in enumerate(flat_in):
        flat_out[i] = x if type(x) is GaussianRational else GaussianRational.coerce(x)
    return out


def float_array(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == object:
        out = np.empty(a.shape, dtype=complex)
        flat_in, flat_out = a.reshape(-1), out.reshape(-1)
        for i, x in enumerate(flat_in):
            flat_out[i] = complex(x)
        return out
    return a.astype(complex)


def matrix(rows, exact: bool) -> np.ndarray:
    if exact:
        m = np.empty((len(rows), len(rows[0]) if len(rows) else 0), dtype=object)
        for i, r in enumerate(rows):
            for j, x in enumerate(r):
                m[i, j] = scalar(x)
        return m
    return np.array([[float_scalar(x) for x in r] for r in rows], dtype=complex)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(ZERO)
        return out
    return np.zeros(shape, dtype=complex)


def eye(n: int, exact: bool) -> np.ndarray:
    out = zeros((n, n), exact)
    for i in range(n):
        out[i, i] = ONE if exact else 1.0
    return out


def like(a: np.ndarray, exact: bool) -> np.ndarray:
    return exact_array(a) if exact else float_array(a)


def adjoint(a: np.ndarray) -> np.ndarray:
    if is_exact(a):
        out = np.empty((a.shape[1], a.shape[0]), dtype=object)
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                out[j, i] = a[i, j].conjugate()
        return out
    return a.conj().T


def is_zero(a: np.ndarray, atol: float = 0.0) -> bool:
    if is_exact(a):
        return not any(bool(x) for x in a.flat)
    return a.size == 0 or float(np.max(np.abs(a))) <= atol


def scale_of(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(float_array(a))))


# -- exact elimination -------------------------------------------------------

def rref(a: np.ndarray):
    """Reduced row echelon form over Q(i); returns (R, pivot columns)."""
    rows = [list(r) for r in exact_array(a)]
    ncols = a.shape[1] if a.ndim == 2 else 0
    pivots = []
    r = 0
    nrows = len(rows)
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if rows[i][c]), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        piv = rows[r][c]
        if piv != ONE:
            inv = ONE / piv
            rows[r] = [x * inv if x else x for x in rows[r]]
        prow = rows[r]
        for i in range(nrows):
            if i != r:
                f = rows[i][c]
                if f:
                    row = rows[i]
                    rows[i] = [x - f * y if y else x for x, y in zip(row, prow)]
        pivots.append(c)
        r += 1
    out = np.empty((nrows, ncols), dtype=object)
    for i, row in enumerate(rows):
        out[i, :] = row
    return out, pivots


def _svd_rank(s: np.ndarray, ref: float | None = None) -> int:
    top = max(s[0] if s.size else 0.0, ref or 0.0)
    if top == 0.0:
        return 0
    return int(np.sum(s > get_tolerances().rank * top))


def rank(a: np.ndarray, ref: float | None = None) -> int:
    """Rank; in float mode ``ref`` is an absolute scale for the rank cut."""
    if a.size == 0:
        return 0
    if is_exact(a):
        return len(rref(a)[1])
    return _svd_rank(np.linalg.svd(a, compute_uv=False), ref)


def ambiguous_rank(a: np.ndarray, ref: float | None = None) -> bool:
    """True if a float matrix has a singular value just above the rank cut."""
    if is_exact(a) or a.size == 0:
        return False
    s = np.linalg.svd(a, compute_uv=False)
    top = max(s[0], ref or 0.0)
    if top == 0.0:
        return False
    tol = get_tolerances()
    rel = s / top
    return bool(np.any((rel > tol.rank) & (rel <= tol.rank * tol.ill_conditioned_band)))


def kernel_basis(m: np.ndarray, ref: float | None = None) -> np.ndarray:
    """Columns spanning {v : m v = 0}.

    In float mode the rank cut is tol_rank times the largest singular value,
    or times ``ref`` when that is larger.
    """
    n = m.shape[1]
    if is_exact(m):
        if m.shape[0] == 0:
            return eye(n, True)
        r, pivots = rref(m)
        free = [c for c in range(n) if c not in pivots]
        out = zeros((n, len(free)), True)
        for k, f in enumerate(free):
            out[f, k] = ONE
            for i, p in enumerate(pivots):
                out[p, k] = -r[i, f]
        return out
    if m.shape[0] == 0 or not np.any(m):
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(m)
    r = _svd_rank(s, ref)
    return vh[r:].conj().T.copy()


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for square invertible a."""
    if is_exact(a):
        n = a.shape[0]
        vec = b.ndim == 1
        bb = b.reshape(n, -1)
        aug = np.hstack([exact_array(a), exact_array(bb)])
        r, pivots = rref(aug)
        if pivots[:n] != list(range(n)) or (len(pivots) > n):
            raise np.linalg.LinAlgError("singular matrix")
        x = r[:n, n:]
        return x.reshape(-1) if vec else x
    return np.linalg.solve(a, b)


def inv(a: np.ndarray) -> np.ndarray:
    return solve(a, eye(a.shape[0], is_exact(a)))


def det(a: np.ndarray):
    if not is_exact(a):
        return np.linalg.det(a)
    n = a.shape[0]
    rows = [list(r) for r in exact_array(a)]
    d = ONE
    for c in range(n):
        p = next((i for i in range(c, n) if rows[i][c]), None)
        if p is None:
            return ZERO
        if p != c:
            rows[c], rows[p] = rows[p], rows[c]
            d = -d
        piv = rows[c][c]
        d = d * piv
        for i in range(c + 1, n):
            f = rows[i][c]
            if f:
                f = f / piv
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[c])]
    return d


def matrix_power(a: np.ndarray, k: int) -> np.ndarray:
    out = eye(a.shape[0], is_exact(a))
    for _ in range(k):
        out = out @ a
    return out


# -- frames and subspaces ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Frame:
    """Ordered linearly independent columns in C^n."""

    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValidationError("a frame is a 2-d array of column vectors")
        if rank(self.matrix) != self.matrix.shape[1]:
            raise ValidationError("frame columns are linearly dependent")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return self.matrix.shape[1]

    @property
    def columns(self):
        return [self.matrix[:, k] for k in range(self.rank)]


def _canonical_basis(a: np.ndarray, exact: bool, ref: float | None = None) -> np.ndarray:
    n = a.shape[0]
    if a.shape[1] == 0:
        return zeros((n, 0), exact)
    if exact:
        r, pivots = rref(a.T)
        return r[: len(pivots)].T.copy()
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, : _svd_rank(s, ref)].copy()


class Subspace:
    """A point of the Grassmannian, stored through a canonical frame.

    Build one with ``Subspace(columns)`` where ``columns`` is an n x k array
    whose columns span the subspace (they need not be independent).
    """

    __slots__ = ("basis", "exact")

    def __init__(self, columns, exact: bool | None = None, *, ref: float | None = None,
                 _canonical: bool = False):
        a = np.asarray(columns)
        if a.ndim != 2:
            raise ValidationError("subspace needs an n x k array of columns")
        if exact is None:
            exact = a.dtype == object
        a = exact_array(a) if exact else float_array(a)
        self.exact = exact
        self.basis = a if _canonical else _canonical_basis(a, exact, ref)

    @classmethod
    def from_vectors(cls, vectors, n: int | None = None, exact: bool = True) -> "Subspace":
        vectors = list(vectors)
        if not vectors:
            if n is None:
                raise ValidationError("ambient dimension needed for an empty span")
            return cls.zero(n, exact)
        cols = [np.asarray(v, dtype=object if exact else complex) for v in vectors]
        return cls(np.column_stack(cols), exact)

    @classmethod
    def zero(cls, n: int, exact: bool) -> "Subspace":
        return cls(zeros((n, 0), exact), exact, _canonical=True)

    @classmethod
    def full(cls, n: int, exact: bool) -> "Subspace":
        return cls(eye(n, exact), exact, _canonical=True)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def frame(self) -> Frame:
        return Frame(self.basis)

    def to_float(self) -> "Subspace":
        if not self.exact:
            return self
        return Subspace(float_array(self.basis), False)

    def projector(self) -> np.ndarray:
        """Orthogonal projection onto the subspace."""
        b = self.basis
        if self.dim == 0:
            return zeros((self.ambient, self.ambient), self.exact)
        if not self.exact:
            return b @ b.conj().T
        bh = adjoint(b)
        return b @ solve(bh @ b, bh)

    def contains_vector(self, v: np.ndarray) -> bool:
        v = np.asarray(v).reshape(-1, 1)
        if self.exact:
            return rank(np.hstack([self.basis, exact_array(v)])) == self.dim
        r = v - self.basis @ (self.basis.conj().T @ v)
        return float(np.linalg.norm(r)) <= get_tolerances().subspace_eq * max(1.0, float(np.linalg.norm(v)))

    def contains(self, other: "Subspace") -> bool:
        _check_ambient(self, other)
        if other.dim == 0:
            return True
        if self.exact and other.exact:
            return rank(np.hstack([self.basis, other.basis])) == self.dim
        return all(self.to_float().contains_vector(c) for c in float_array(other.basis).T)

    def intersect(self, other: "Subspace") -> "Subspace":
        _check_ambient(self, other)
        exact = self.exact and other.exact
        a, b = like(self.basis, exact), like(other.basis, exact)
        k = kernel_basis(np.hstack([a, -b]) if exact else np.hstack([a, -b]))
        return Subspace(a @ k[: self.dim], exact)

    def __add__(self, other: "Subspace") -> "Subspace":
        _check_ambient(self, other)
        exact = self.exact and other.exact
        return Subspace(np.hstack([like(self.basis, exact), like(other.basis, exact)]), exact)

    def orthogonal_basis(self) -> np.ndarray:
        """Pairwise orthogonal basis (orthonormal in float mode)."""
        if not self.exact:
            return self.basis
        return gram_schmidt(self.basis)

    def image(self, m: np.ndarray) -> "Subspace":
        return Subspace(m @ self.basis, self.exact)

    def equals(self, other: "Subspace") -> bool:
        if self.ambient != other.ambient or self.dim != other.dim:
            return False
        if self.exact and other.exact:
            return bool(np.all(self.basis == other.basis))
        return gap_distance(self, other) < get_tolerances().subspace_eq

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.equals(other)

    __hash__ = None

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"Subspace(dim={self.dim}, ambient={self.ambient}, {mode})"


def _check_ambient(s1: Subspace, s2: Subspace):
    if s1.ambient != s2.ambient:
        raise AmbientMismatch(f"ambient dimensions {s1.ambient} and {s2.ambient} differ")


def gram_schmidt(b: np.ndarray) -> np.ndarray:
    """Exact Gram-Schmidt without normalisation (norms are irrational)."""
    cols = []
    norms = []
    for k in range(b.shape[1]):
        v = b[:, k].copy()
        for u, nu in zip(cols, norms):
            c = (adjoint(u.reshape(-1, 1)) @ v.reshape(-1, 1))[0, 0] / nu
            if c:
                v = v - c * u
        cols.append(v)
        norms.append((adjoint(v.reshape(-1, 1)) @ v.reshape(-1, 1))[0, 0])
    if not cols:
        return b.copy()
    return np.column_stack(cols)


def kernel(m: np.ndarray) -> Subspace:
    """Subspace {v : m v = 0}."""
    return Subspace(kernel_basis(m), is_exact(m))


def span(columns) -> Subspace:
    return Subspace(columns)


def ortho_complement(s: Subspace, within: Subspace) -> Subspace:
    """S^perp intersected with ``within`` for the standard Hermitian product."""
    _check_ambient(s, within)
    if not within.contains(s):
        raise NotContained("subspace is not contained in the enclosing space")
    exact = s.exact and within.exact
    w = like(within.basis, exact)
    if s.dim == 0:
        return Subspace(w, exact, _canonical=True)
    g = adjoint(like(s.basis, exact)) @ w
    return Subspace(w @ kernel_basis(g), exact)


def gap_distance(s1: Subspace, s2: Subspace) -> float:
    """Operator norm of the difference of orthogonal projections."""
    _check_ambient(s1, s2)
    if s1.exact and s2.exact and s1.equals(s2):
        return 0.0
    p = float_array(s1.projector()) - float_array(s2.projector())
    if p.size == 0:
        return 0.0
    return float(np.linalg.norm(p, 2))


def project_along(phi, d: Subspace, k: Subspace):
    """Component in D of phi for the splitting C^n = D + K."""
    _check_ambient(d, k)
    n = d.ambient
    if d.dim + k.dim != n:
        raise NotComplementary(f"dimensions {d.dim} + {k.dim} do not add up to {n}")
    phi_float = isinstance(phi, np.ndarray) and phi.dtype != object
    exact = d.exact and k.exact and not phi_float
    m = np.hstack([like(d.basis, exact), like(k.basis, exact)])
    phi = like(np.asarray(phi).reshape(-1), exact)
    try:
        c = solve(m, phi)
    except np.linalg.LinAlgError:
        raise NotComplementary("D and K intersect nontrivially") from None
    if not exact and np.linalg.cond(m) > 1.0 / get_tolerances().rank:
        raise NotComplementary("D and K are numerically not complementary")
    return like(d.basis, exact) @ c[: d.dim]


def projection_along(d: Subspace, k: Subspace) -> np.ndarray:
    """Matrix of the projection onto D along K."""
    n = d.ambient
    exact = d.exact and k.exact
    m = np.hstack([like(d.basis, exact), like(k.basis, exact)])
    if d.dim + k.dim != n:
        raise NotComplementary(f"dimensions {d.dim} + {k.dim} do not add up to {n}")
    try:
        minv = inv(m)
    except np.linalg.LinAlgError:
        raise NotComplementary("D and K intersect nontrivially") from None
    return like(d.basis, exact) @ minv[: d.dim]

