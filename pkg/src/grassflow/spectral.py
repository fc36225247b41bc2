"""Generalized eigenspaces of the generator and the exponent semigroups."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from . import linalg as la
from .errors import (ClusterAmbiguous, PositiveGenerator, SpectrumHintInconsistent,
                     StripViolation, ValidationError)
from .linalg import GaussianRational


@dataclass(frozen=True, eq=False)
class EigenBlock:
    value: object            # GaussianRational or complex
    multiplicity: int
    projection: np.ndarray   # pi_lambda
    nilpotent: np.ndarray    # N pi_lambda
    basis: np.ndarray        # frame of the generalized eigenspace
    level: int               # index into SpectralDecomposition.levels
    phase: object            # Im(lambda), Fraction or float (snapped in float mode)


@dataclass(frozen=True, eq=False)
class MuLevel:
    mu: object               # Fraction or float
    projection: np.ndarray
    nilpotent: np.ndarray
    basis: np.ndarray
    members: tuple


@dataclass(frozen=True)
class BoundarySpectrumSpec:
    """Indicial data: order m and roots sigma with their Jordan chain lengths."""

    m: object
    sigmas: tuple            # of (sigma, tuple of chain lengths)
    exact: bool = True

    def __post_init__(self):
        if self.m <= 0:
            raise ValidationError("m must be positive")
        half = self.m / 2
        for sigma, chains in self.sigmas:
            im = sigma.im if isinstance(sigma, GaussianRational) else complex(sigma).imag
            if not (-half < im < half):
                raise StripViolation(f"sigma = {sigma} violates -m/2 < Im sigma < m/2")
            if not chains or any(int(c) < 1 for c in chains):
                raise ValidationError("chain lengths must be positive integers")

    @property
    def dim(self) -> int:
        return sum(sum(c) for _, c in self.sigmas)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    a: np.ndarray
    blocks: tuple
    levels: tuple
    a_prime: np.ndarray
    exact: bool
    boundary: BoundarySpectrumSpec | None = None
    phases: tuple = field(default=())      # distinct Im(lambda), increasing

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def eigenvalues(self):
        return [b.value for b in self.blocks]

    @property
    def nilpotent(self) -> np.ndarray:
        out = la.zeros(self.a.shape, self.exact)
        for b in self.blocks:
            out = out + b.nilpotent
        return out

    @property
    def mu_values(self):
        return [lv.mu for lv in self.levels]

    def theta(self, block: EigenBlock, level: int):
        """Real exponent Re(lambda) - mu for a block seen from a level."""
        return self.levels[block.level].mu - self.levels[level].mu

    def aligned(self) -> bool:
        return len(self.phases) <= 1

    def residuals(self) -> dict:
        """Size of each structural identity; all zero in exact mode."""
        n, ex = self.n, self.exact
        ident = la.eye(n, ex)
        tot = la.zeros((n, n), ex)
        semi = la.zeros((n, n), ex)
        for b in self.blocks:
            tot = tot + b.projection
            lam = b.value if ex else complex(b.value)
            semi = semi + lam * b.projection
        nil = self.nilpotent
        out = {
            "sum_projections": la.scale_of(tot - ident),
            "reconstruction": la.scale_of(semi + nil - self.a),
            "idempotent": max((la.scale_of(b.projection @ b.projection - b.projection)
                               for b in self.blocks), default=0.0),
            "orthogonal": 0.0,
            "commute": max((la.scale_of(b.projection @ self.a - self.a @ b.projection)
                            for b in self.blocks), default=0.0),
            "nilpotent": max((la.scale_of(la.matrix_power(b.nilpotent, b.multiplicity))
                              for b in self.blocks), default=0.0),
        }
        for i, b in enumerate(self.blocks):
            for c in self.blocks[i + 1:]:
                out["orthogonal"] = max(out["orthogonal"], la.scale_of(b.projection @ c.projection))
        return out


# -- construction -------------------------------------------------------------

def _re(z, exact):
    return la.to_fraction(z.re) if exact else float(complex(z).real)


def _im(z, exact):
    return la.to_fraction(z.im) if exact else float(complex(z).imag)


def _cluster_values(values, tol):
    """Group reals whose chain-linked distance is <= tol; returns snapped means."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    groups, cur = [], [order[0]] if order else []
    for prev, i in zip(order, order[1:]):
        if values[i] - values[prev] <= tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if cur:
        groups.append(cur)
    snap = [0.0] * len(values)
    for g in groups:
        mean = float(np.mean([values[i] for i in g]))
        for i in g:
            snap[i] = mean
    return snap


def _assemble(a, groups, exact, boundary=None) -> SpectralDecomposition:
    """groups: list of (lambda, basis of the generalized eigenspace)."""
    n = a.shape[0]
    s = np.hstack([b for _, b in groups]) if groups else la.zeros((n, 0), exact)
    if s.shape[1] != n:
        raise SpectrumHintInconsistent(f"generalized eigenspaces have total dimension {s.shape[1]}, expected {n}")
    try:
        sinv = la.inv(s)
    except np.linalg.LinAlgError:
        raise SpectrumHintInconsistent("generalized eigenspaces are not independent") from None
    if not exact and np.linalg.cond(s) > 1e10:
        raise ClusterAmbiguous("generalized eigenspaces are numerically dependent")

    projections, off = [], 0
    for lam, b in groups:
        k = b.shape[1]
        projections.append(s[:, off:off + k] @ sinv[off:off + k, :])
        off += k
    semi = la.zeros((n, n), exact)
    for (lam, _), p in zip(groups, projections):
        semi = semi + (lam if exact else complex(lam)) * p
    nil = a - semi

    tol = la.get_tolerances()
    anorm = max(la.scale_of(a), 1.0)
    res = [_re(lam, exact) for lam, _ in groups]
    ims = [_im(lam, exact) for lam, _ in groups]
    if not exact:
        res = _cluster_values(res, tol.cluster * anorm)
        ims = _cluster_values(ims, tol.cluster * anorm)
        ims = [0.0 if abs(v) <= tol.cluster * anorm else v for v in ims]

    mus = sorted(set(res), reverse=True)
    phases = tuple(sorted(set(ims)))
    blocks = []
    for (lam, b), p, r, ph in zip(groups, projections, res, ims):
        nl = nil @ p
        if not exact and la.scale_of(la.matrix_power(nl, b.shape[1])) > 1e-6 * anorm ** b.shape[1]:
            raise ClusterAmbiguous(f"nilpotent part at {complex(lam):.6g} is not nilpotent")
        if exact and not la.is_zero(la.matrix_power(nl, b.shape[1])):
            raise SpectrumHintInconsistent(f"{lam} does not give a nilpotent part")
        blocks.append(EigenBlock(value=lam, multiplicity=b.shape[1], projection=p, nilpotent=nl,
                                 basis=b, level=mus.index(r), phase=ph))
    levels = []
    for li, mu in enumerate(mus):
        members = tuple(i for i, bl in enumerate(blocks) if bl.level == li)
        proj = la.zeros((n, n), exact)
        for i in members:
            proj = proj + blocks[i].projection
        levels.append(MuLevel(mu=mu, projection=proj, nilpotent=nil @ proj,
                              basis=np.hstack([blocks[i].basis for i in members]), members=members))
    a_prime = la.zeros((n, n), exact)
    for bl in blocks:
        coef = GaussianRational(0, bl.phase) if exact else 1j * bl.phase
        a_prime = a_prime + coef * bl.projection
    return SpectralDecomposition(a=a, blocks=tuple(blocks), levels=tuple(levels), a_prime=a_prime,
                                 exact=exact, boundary=boundary, phases=phases)


def _is_triangular(a) -> bool:
    n = a.shape[0]
    upper = all(not a[i, j] for i in range(n) for j in range(i))
    lower = all(not a[i, j] for i in range(n) for j in range(i + 1, n))
    return upper or lower


def spectral_decompose(a: np.ndarray, hint: Sequence | None = None) -> SpectralDecomposition:
    """Split C^n into generalized eigenspaces of ``a``.

    Parameters
    ----------
    a : (n, n) array
        Object dtype selects exact mode, otherwise complex floats.
    hint : sequence of (eigenvalue, multiplicity), optional
        Required in exact mode unless ``a`` is triangular.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("generator must be a square matrix")
    n = a.shape[0]
    exact = la.is_exact(a)
    if exact:
        a = la.exact_array(a)
        if hint is None:
            if not _is_triangular(a):
                raise SpectrumHintInconsistent("exact mode needs the spectrum unless the matrix is triangular")
            counts = {}
            for i in range(n):
                counts[a[i, i]] = counts.get(a[i, i], 0) + 1
            hint = list(counts.items())
        hint = [(la.scalar(lam), int(k)) for lam, k in hint]
        if sum(k for _, k in hint) != n:
            raise SpectrumHintInconsistent("multiplicities do not sum to the dimension")
        if len({lam for lam, _ in hint}) != len(hint):
            raise SpectrumHintInconsistent("repeated eigenvalue in hint")
        groups = []
        ident = la.eye(n, True)
        for lam, k in hint:
            b = la.kernel_basis(la.matrix_power(a - lam * ident, k))
            if b.shape[1] != k:
                raise SpectrumHintInconsistent(f"{lam} has algebraic multiplicity {b.shape[1]}, hint says {k}")
            groups.append((lam, la.Subspace(b, True).basis))
        return _assemble(a, groups, True)

    a = la.float_array(a)
    if hint is not None:
        ev = []
        for lam, k in hint:
            ev.extend([la.float_scalar(lam)] * int(k))
        ev = np.array(ev, dtype=complex)
        if ev.size != n:
            raise SpectrumHintInconsistent("multiplicities do not sum to the dimension")
    else:
        ev = np.linalg.eigvals(a) if n else np.zeros(0, complex)
    anorm = float(np.linalg.norm(a, 2)) if n else 0.0
    tol = la.get_tolerances().cluster * max(anorm, 1e-300)
    clusters = _complex_clusters(ev, tol)
    centers = [complex(np.mean(ev[c])) for c in clusters]
    for i, ci in enumerate(centers):
        for cj in centers[i + 1:]:
            if abs(ci - cj) <= 100 * tol:
                raise ClusterAmbiguous(f"eigenvalue clusters at {ci:.6g} and {cj:.6g} are too close to separate")
    groups = []
    for c, lam in zip(clusters, centers):
        k = len(c)
        m = np.linalg.matrix_power(a - lam * np.eye(n), k)
        _, s, vh = np.linalg.svd(m)
        b = vh[n - k:].conj().T
        groups.append((lam, b))
    return _assemble(a, groups, False)


def _complex_clusters(ev: np.ndarray, tol: float):
    n = len(ev)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(ev[i] - ev[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = sorted(groups.values(), key=lambda g: (-float(np.mean(ev[g].real)), float(np.mean(ev[g].imag))))
    return out


def from_chains(entries, exact: bool = True, boundary=None) -> SpectralDecomposition:
    """Generator with prescribed Jordan chains.

    ``entries`` is a list of ``(lambda, chains)``; each chain is a list of
    vectors v_1, ..., v_k with (a - lambda) v_1 = 0 and (a - lambda) v_{i+1} = v_i.
    """
    cols, diag, sup = [], [], []
    for lam, chains in entries:
        lam = la.scalar(lam) if exact else la.float_scalar(lam)
        for chain in chains:
            for i, v in enumerate(chain):
                cols.append(v)
                diag.append(lam)
                sup.append(i > 0)
    n = len(cols)
    if n == 0:
        raise ValidationError("empty spectrum")
    s = la.matrix([list(c) for c in cols], exact).T.copy()
    if s.shape != (n, n):
        raise ValidationError("chain vectors must have length equal to the number of vectors")
    j = la.zeros((n, n), exact)
    for i in range(n):
        j[i, i] = diag[i]
        if sup[i]:
            j[i - 1, i] = la.ONE if exact else 1.0
    try:
        a = s @ j @ la.inv(s)
    except np.linalg.LinAlgError:
        raise ValidationError("chain vectors are linearly dependent") from None
    groups = []
    off = 0
    for lam, chains in entries:
        k = sum(len(c) for c in chains)
        lam = la.scalar(lam) if exact else la.float_scalar(lam)
        groups.append((lam, s[:, off:off + k]))
        off += k
    return _assemble(a, groups, exact, boundary)


def jordan_chains(lengths: Sequence[int], offset: int, n: int, exact: bool):
    """Standard-basis chains of the given lengths starting at coordinate ``offset``."""
    chains = []
    for k in lengths:
        chain = []
        for i in range(k):
            v = [0] * n
            v[offset + i] = 1
            chain.append(v)
        offset += k
        chains.append(chain)
    return chains, offset


def boundary_eigenvalue(sigma, m):
    """lambda = -i sigma - m/2."""
    if isinstance(sigma, GaussianRational):
        return GaussianRational(0, -1) * sigma - GaussianRational(Fraction(m) / 2)
    return -1j * complex(sigma) - float(m) / 2


def boundary_sigma(lam, m):
    """Inverse of :func:`boundary_eigenvalue`: sigma = i (lambda + m/2)."""
    if isinstance(lam, GaussianRational):
        return GaussianRational(0, 1) * (lam + GaussianRational(Fraction(m) / 2))
    return 1j * (complex(lam) + float(m) / 2)


def from_boundary_spectrum(spec: BoundarySpectrumSpec) -> SpectralDecomposition:
    n = spec.dim
    entries, off = [], 0
    for sigma, lengths in spec.sigmas:
        chains, off = jordan_chains(lengths, off, n, spec.exact)
        entries.append((boundary_eigenvalue(sigma, spec.m), chains))
    return from_chains(entries, spec.exact, boundary=spec)


# -- the flow -----------------------------------------------------------------

def nilpotent_exp(nil: np.ndarray, t) -> np.ndarray:
    """Finite sum of t^k N^k / k!."""
    n = nil.shape[0]
    exact = la.is_exact(nil)
    out = la.eye(n, exact)
    term = la.eye(n, exact)
    for k in range(1, n + 1):
        term = (term @ nil) * (t / k if not exact else t * GaussianRational(Fraction(1, k)))
        if la.is_zero(term):
            break
        out = out + term
    return out


def flow_terms(sd: SpectralDecomposition):
    """Symbolic flow: list of (block index, k, C) with e^{t a} = sum e^{t lambda} t^k C."""
    out = []
    for i, b in enumerate(sd.blocks):
        term = b.projection
        for k in range(b.multiplicity):
            if la.is_zero(term):
                break
            out.append((i, k, term))
            term = (b.nilpotent @ term) * (GaussianRational(Fraction(1, k + 1)) if sd.exact else 1.0 / (k + 1))
    return out


def exp_flow(sd: SpectralDecomposition, t, dps: int | None = None):
    """e^{t a} as a complex array, or an mpmath matrix when ``dps`` is given."""
    if dps is None:
        t = complex(t)
        out = np.zeros((sd.n, sd.n), dtype=complex)
        for i, k, c in flow_terms(sd):
            lam = complex(sd.blocks[i].value)
            out += np.exp(t * lam) * t ** k * la.float_array(c)
        return out
    with mpmath.workdps(dps):
        t = mpmath.mpmathify(t)
        out = mpmath.zeros(sd.n, sd.n)
        for i, k, c in flow_terms(sd):
            lam = to_mpc(sd.blocks[i].value)
            out += mpmath.exp(t * lam) * t ** k * to_mp_matrix(c)
        return out


def to_mpc(z):
    if isinstance(z, GaussianRational):
        return mpmath.mpc(mpmath.mpf(int(z.re.numerator)) / int(z.re.denominator),
                          mpmath.mpf(int(z.im.numerator)) / int(z.im.denominator))
    return mpmath.mpc(complex(z))


def to_mp_matrix(a: np.ndarray):
    out = mpmath.matrix(a.shape[0], a.shape[1])
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            x = a[i, j]
            if isinstance(x, GaussianRational):
                if x:
                    out[i, j] = to_mpc(x)
            elif x != 0:
                out[i, j] = mpmath.mpc(complex(x))
    return out


# -- semigroups -----------------------------------------------------------------

def _exact_number(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if type(x) is type(la._q(0)):
        return la.to_fraction(x)
    return None


def enumerate_real_semigroup(generators, cutoff, include_neg_integers: bool = False) -> list:
    """Elements >= cutoff of the additive semigroup generated by ``generators``.

    Sorted decreasing; 0 (the empty sum) is always present.
    """
    gens = list(generators)
    exact_vals = [_exact_number(g) for g in gens] + [_exact_number(cutoff)]
    exact = all(v is not None for v in exact_vals)
    conv = _exact_number if exact else float
    gens = [conv(g) for g in gens]
    cutoff = conv(cutoff)
    if cutoff >= 0:
        raise ValidationError("cutoff must be negative")
    for g in gens:
        if g > 0:
            raise PositiveGenerator(f"generator {g} is positive")
    if include_neg_integers:
        gens.append(conv(-1))
    step = sorted({g for g in gens if g != 0}, reverse=True)

    def key(x):
        return x if exact else round(x, 10)

    seen = {key(conv(0)): conv(0)}
    frontier = [conv(0)]
    while frontier:
        nxt = []
        for x in frontier:
            for g in step:
                y = x + g
                if y < cutoff and not (not exact and math.isclose(y, cutoff, abs_tol=1e-12)):
                    continue
                k = key(y)
                if k not in seen:
                    seen[k] = y
                    nxt.append(y)
        frontier = nxt
    return sorted(seen.values(), reverse=True)


def real_semigroup_generators(sd: SpectralDecomposition) -> list:
    """Real parts Re(lambda - lambda') with Re lambda <= Re lambda', zero dropped."""
    mus = sd.mu_values
    return sorted({a - b for a in mus for b in mus if a < b}, reverse=True)


def _sigma_parts(spec: BoundarySpectrumSpec):
    out = []
    for sigma, _ in spec.sigmas:
        if isinstance(sigma, GaussianRational):
            out.append((la.to_fraction(sigma.re), la.to_fraction(sigma.im)))
        else:
            z = complex(sigma)
            out.append((z.real, z.imag))
    return out


def phase_set(spec: BoundarySpectrumSpec) -> list:
    """Distinct values Re(sigma)/m, increasing."""
    m = Fraction(spec.m) if spec.exact else float(spec.m)
    return sorted({re / m for re, _ in _sigma_parts(spec)})


def exponent_generators(spec: BoundarySpectrumSpec) -> list:
    """Im(sigma - sigma') over pairs with Im sigma <= Im sigma'."""
    parts = _sigma_parts(spec)
    return sorted({a[1] - b[1] for a in parts for b in parts if a[1] <= b[1]}, reverse=True)


def trace_exponents(spec: BoundarySpectrumSpec, ell: int, cutoff) -> list:
    """Pairs (nu, nu/m) with nu in the exponent semigroup and cutoff <= nu <= -ell*m."""
    m = Fraction(spec.m) if spec.exact else float(spec.m)
    gens = exponent_generators(spec)
    elems = enumerate_real_semigroup(gens, cutoff, include_neg_integers=True)
    top = -ell * m
    return [(nu, nu / m) for nu in elems if nu <= top]
