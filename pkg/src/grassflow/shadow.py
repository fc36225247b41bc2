"""Limiting subspace of e^{t a} D and explicit frame curves.

The construction runs level by level over the distinct real parts of the
spectrum.  On one level the nilpotent part acts on the projected space W and
the induction in :func:`basic_lemma` produces Laurent polynomial maps P(t)
whose leading coefficients G(t^n) span independent images.  Normalising by
t^{-n} and lifting back into D gives frame curves whose limits span D_inf.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import (AmbientMismatch, IllConditionedInstance, InternalInvariantViolation, NoOrder, NotNilpotent,
                     ValidationError, ZeroSubspace)
from .linalg import Subspace
from .spectral import SpectralDecomposition


class LaurentPolyMap:
    """Finite sum over integer s of t^s C_s with matrix coefficients C_s."""

    __slots__ = ("terms", "shape", "exact")
    __array_ufunc__ = None    # let ndarray @ LaurentPolyMap reach __rmatmul__

    def __init__(self, terms: dict, shape, exact: bool):
        self.shape = tuple(shape)
        self.exact = exact
        self.terms = {}
        for s, c in terms.items():
            if not la.is_zero(c):
                self.terms[int(s)] = c

    @classmethod
    def constant(cls, c: np.ndarray) -> "LaurentPolyMap":
        return cls({0: c}, c.shape, la.is_exact(c))

    @classmethod
    def zero(cls, shape, exact: bool) -> "LaurentPolyMap":
        return cls({}, shape, exact)

    def _ref(self) -> float:
        return max((la.scale_of(c) for c in self.terms.values()), default=0.0)

    def _live(self):
        """Powers whose coefficient is nonzero (relative cut in float mode)."""
        if self.exact:
            return sorted(self.terms)
        ref = self._ref()
        cut = la.get_tolerances().rank * ref
        return sorted(s for s, c in self.terms.items() if la.scale_of(c) > cut)

    def is_zero(self) -> bool:
        return not self._live()

    def ord(self) -> int:
        live = self._live()
        if not live:
            raise NoOrder("the zero Laurent polynomial has no order")
        return live[-1]

    def low(self) -> int:
        live = self._live()
        if not live:
            raise NoOrder("the zero Laurent polynomial has no order")
        return live[0]

    def coeff(self, s: int) -> np.ndarray:
        c = self.terms.get(int(s))
        return la.zeros(self.shape, self.exact) if c is None else c

    def shift(self, k: int) -> "LaurentPolyMap":
        """Multiply by t^k."""
        return LaurentPolyMap({s + k: c for s, c in self.terms.items()}, self.shape, self.exact)

    def __add__(self, other: "LaurentPolyMap") -> "LaurentPolyMap":
        terms = dict(self.terms)
        for s, c in other.terms.items():
            terms[s] = terms[s] + c if s in terms else c
        return LaurentPolyMap(terms, self.shape, self.exact)

    def __neg__(self):
        return LaurentPolyMap({s: -c for s, c in self.terms.items()}, self.shape, self.exact)

    def __sub__(self, other):
        return self + (-other)

    def __matmul__(self, other):
        if isinstance(other, LaurentPolyMap):
            terms = {}
            for s, a in self.terms.items():
                for r, b in other.terms.items():
                    c = a @ b
                    terms[s + r] = terms[s + r] + c if s + r in terms else c
            return LaurentPolyMap(terms, (self.shape[0], other.shape[1]), self.exact)
        other = np.asarray(other)
        if other.ndim == 1:
            other = other.reshape(-1, 1)
        return LaurentPolyMap({s: c @ other for s, c in self.terms.items()},
                              (self.shape[0], other.shape[1]), self.exact)

    def __rmatmul__(self, other):
        other = np.asarray(other)
        return LaurentPolyMap({s: other @ c for s, c in self.terms.items()},
                              (other.shape[0], self.shape[1]), self.exact)

    def __call__(self, t) -> np.ndarray:
        out = np.zeros(self.shape, dtype=complex)
        for s, c in self.terms.items():
            out += complex(t) ** s * la.float_array(c)
        return out

    def __repr__(self):
        return f"LaurentPolyMap(powers={sorted(self.terms)}, shape={self.shape})"


def nilpotent_series(nil: np.ndarray) -> LaurentPolyMap:
    """e^{tN} as a polynomial in t."""
    n = nil.shape[0]
    exact = la.is_exact(nil)
    terms, term = {}, la.eye(n, exact)
    for k in range(n + 1):
        if la.is_zero(term):
            break
        terms[k] = term
        term = (term @ nil) * (la.GaussianRational(1, 0) / (k + 1) if exact else 1.0 / (k + 1))
    return LaurentPolyMap(terms, (n, n), exact)


# -- one level -----------------------------------------------------------------

@dataclass(eq=False)
class BlockStep:
    """Data attached to the pair (j, m) of the induction."""

    j: int
    m: int
    W_jm: Subspace            # W_{j,m}
    P: LaurentPolyMap         # P^m_j, ambient, vanishing off W_{j,m}
    n: int                    # n^m_j = ord e^{tN} P^m_j
    G: np.ndarray             # coeff_n(e^{tN} P^m_j)
    W: Subspace               # W^m_j = W_{j,m} minus W_{j,m+1}
    basis: np.ndarray         # chosen orthogonal basis of W^m_j
    V: Subspace               # G(W^m_j)
    corrections: dict = field(default_factory=dict)   # (j', m') -> F^{m', m}_{j', j}


@dataclass(eq=False)
class GradedDecomposition:
    W: Subspace
    nilpotent: np.ndarray
    degrees: list
    steps: dict               # (j, m) -> BlockStep, in construction order
    mu: object = None

    def keys(self):
        return list(self.steps)

    def block_lengths(self):
        out = {}
        for j, m in self.steps:
            out[j] = max(out.get(j, 0), m + 1)
        return out


def _float_ref(*mats) -> float | None:
    vals = [la.scale_of(m) for m in mats if not la.is_exact(m)]
    return max(vals) if vals else None


def _check_conditioning(m: np.ndarray, ref=None):
    if la.ambiguous_rank(m, ref):
        raise IllConditionedInstance("a rank decision inside the induction is numerically ambiguous")


def _coordinates(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x with a x = b for a of full column rank (b in the range of a)."""
    if la.is_exact(a):
        ah = la.adjoint(a)
        x = la.solve(ah @ a, ah @ b)
        if not la.is_zero(a @ x - b):
            raise InternalInvariantViolation("vector expected in the span is not")
        return x
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x


def _pinv(b: np.ndarray) -> np.ndarray:
    """Left inverse of a full-column-rank frame that vanishes on its complement."""
    bh = la.adjoint(b)
    return la.solve(bh @ b, bh)


def basic_lemma(W: Subspace, nil: np.ndarray) -> GradedDecomposition:
    """Orthogonal block decomposition of W adapted to e^{tN}.

    Parameters
    ----------
    W : Subspace
        Nonzero subspace of the generalized eigenspace on which ``nil`` acts.
    nil : (n, n) array
        Nilpotent matrix, ambient coordinates.

    Returns
    -------
    GradedDecomposition
        Steps keyed by (j, m).  For every step, G^m_j restricted to W^m_j is
        injective and the images V^m_j over all steps form a direct sum.
    """
    if W.dim == 0:
        raise ZeroSubspace("the induction needs a nonzero subspace")
    exact = W.exact
    n = W.ambient
    N = la.like(nil, exact)
    nref = _float_ref(N)
    top = la.matrix_power(N, n)
    if not la.is_zero(top, atol=1e-9 * max(1.0, nref or 0.0) ** n):
        raise NotNilpotent("matrix is not nilpotent")
    expN = nilpotent_series(N)
    d = W.dim
    B = W.basis

    # distinct degrees of e^{tN} w over w in W
    degrees, filtration = [], []
    prev = 0
    power = la.eye(n, exact)
    for k in range(n + 1):
        power = power @ N
        m = power @ B
        ref = None if exact else (nref ** (k + 1) if nref else None)
        if not exact:
            _check_conditioning(m, ref)
        sk = Subspace(B @ la.kernel_basis(m, ref), exact)
        if sk.dim > prev:
            degrees.append(k)
            filtration.append(sk)
            prev = sk.dim
        if sk.dim == d:
            break
    if prev != d:
        raise InternalInvariantViolation("degree filtration does not exhaust W")

    steps = {}
    earlier = []              # ((j, m), basis of W^m_j, V basis = G basis) in order
    for j, s in enumerate(degrees):
        W_jm = filtration[0] if j == 0 else la.ortho_complement(filtration[j - 1], filtration[j])
        P = LaurentPolyMap.constant(W_jm.projector())
        corrections = {}
        prev_n = None
        for m in range(d + 2):
            if m == d + 1:
                raise InternalInvariantViolation("block induction did not terminate")
            Q = expN @ P
            nm = Q.ord()
            G = Q.coeff(nm)
            if m == 0 and nm != s:
                raise InternalInvariantViolation(f"n^0_{j} = {nm} but degree is {s}")
            if prev_n is not None and not (0 <= nm < prev_n):
                raise InternalInvariantViolation("orders n^m_j are not strictly decreasing and nonnegative")
            bm = W_jm.basis
            gb = G @ bm
            if earlier:
                A = np.hstack([vb for _, _, vb in earlier])
            else:
                A = la.zeros((n, 0), exact)
            M = np.hstack([gb, -A])
            ref = _float_ref(gb, A)
            if not exact:
                _check_conditioning(M, ref)
            ker = la.kernel_basis(M, ref)
            W_next = Subspace(bm @ ker[: bm.shape[1]], exact)
            W_here = la.ortho_complement(W_next, W_jm)
            basis = W_here.orthogonal_basis()
            vb = G @ basis
            step = BlockStep(j=j, m=m, W_jm=W_jm, P=P, n=nm, G=G, W=W_here, basis=basis,
                             V=Subspace(vb, exact), corrections=corrections)
            steps[(j, m)] = step
            if W_next.dim == 0:
                earlier.append(((j, m), basis, vb))
                break

            # corrections F^{m', m+1}: G w = sum of v^{key}, F^{key} w = -(G^{key})^{-1} v^{key}
            bn = W_next.basis
            x = _coordinates(A, G @ bn)
            left = _pinv(bn)
            new_corr = {}
            P_next = P @ W_next.projector()
            off = 0
            for key, kb, kvb in earlier:
                w = kb.shape[1]
                F = -(kb @ x[off:off + w]) @ left
                off += w
                new_corr[key] = F
                k_step = steps[key]
                P_next = P_next + (k_step.P @ F).shift(nm - k_step.n)
            identity = G @ W_next.projector()
            for key, F in new_corr.items():
                identity = identity + steps[key].G @ F
            if not la.is_zero(identity, atol=1e-10 * max(1.0, la.scale_of(G))):
                raise InternalInvariantViolation("recursion identity for the corrections fails")
            earlier.append(((j, m), basis, vb))
            P, corrections, W_jm, prev_n = P_next, new_corr, W_next, nm

    allv = np.hstack([vb for _, _, vb in earlier])
    if la.rank(allv) != d:
        raise InternalInvariantViolation("images of the blocks are not independent")
    return GradedDecomposition(W=W, nilpotent=N, degrees=degrees, steps=steps)


# -- levels and frame curves -------------------------------------------------------

@dataclass(eq=False)
class LevelPiece:
    level: int                # index into sd.levels
    mu: object
    D_mu: Subspace


def level_split(D: Subspace, sd: SpectralDecomposition) -> list:
    """Split D into pieces seen first at successively lower real parts."""
    if D.dim == 0:
        raise ZeroSubspace("D must be nonzero")
    exact = D.exact and sd.exact
    cur = D if exact else D.to_float()
    out = []
    while cur.dim > 0:
        for li, lv in enumerate(sd.levels):
            proj = la.like(lv.projection, exact)
            img = proj @ cur.basis
            ref = None if exact else la.scale_of(proj)
            if la.rank(img, ref) > 0:
                break
        else:
            raise InternalInvariantViolation("projections do not detect a nonzero subspace")
        if not exact:
            _check_conditioning(img, ref)
        nxt = Subspace(cur.basis @ la.kernel_basis(img, ref), exact)
        out.append(LevelPiece(level=li, mu=lv.mu, D_mu=la.ortho_complement(nxt, cur)))
        cur = nxt
    return out


@dataclass(eq=False)
class FrameCurve:
    """v(t) = sum over the level of e^{it Im lambda} pi_lambda g(t) plus decaying tails."""

    piece: int                # index into FrameCurveSet.pieces
    level: int                # index into sd.levels
    mu: object
    key: tuple                # (j, m, k)
    order: int                # n^m_j
    g: LaurentPolyMap         # column, powers <= 0
    g_inf: np.ndarray         # (n,) vector
    lift: LaurentPolyMap      # p(t) in D_mu
    tails: tuple              # (block index, theta, LaurentPolyMap) for Re lambda < mu


@dataclass(eq=False)
class FrameCurveSet:
    sd: SpectralDecomposition
    D: Subspace
    pieces: list
    decompositions: list      # GradedDecomposition per piece
    curves: list
    D_inf: Subspace

    @property
    def exact(self) -> bool:
        return self.D_inf.exact

    def g_matrix(self) -> np.ndarray:
        return np.column_stack([c.g_inf for c in self.curves])

    def curve_value(self, c: FrameCurve, t) -> np.ndarray:
        t = complex(t)
        sd = self.sd
        g = c.g(t)
        out = np.zeros(sd.n, dtype=complex)
        for bi in sd.levels[c.level].members:
            b = sd.blocks[bi]
            out += np.exp(1j * t * float(b.phase)) * (la.float_array(b.projection) @ g).reshape(-1)
        for bi, theta, hat in c.tails:
            b = sd.blocks[bi]
            rate = float(theta) + 1j * float(b.phase)
            out += np.exp(t * rate) * hat(t).reshape(-1)
        return out

    def frame(self, t) -> np.ndarray:
        """Columns v_k(t); they span e^{t a} D for large Re t."""
        return np.column_stack([self.curve_value(c, t) for c in self.curves])

    def limit_frame(self, t) -> np.ndarray:
        """Columns e^{t a'} g_inf,k."""
        out = []
        for c in self.curves:
            col = np.zeros(self.sd.n, dtype=complex)
            for b in self.sd.blocks:
                col += np.exp(1j * complex(t) * float(b.phase)) * (la.float_array(b.projection) @ la.float_array(c.g_inf))
            out.append(col)
        return np.column_stack(out)


def _lift_map(D_mu: Subspace, proj: np.ndarray) -> np.ndarray:
    """Inverse of proj restricted to D_mu, as an ambient map vanishing off the image."""
    bd = D_mu.basis
    pb = proj @ bd
    return bd @ _pinv(pb)


def shadow(D: Subspace, sd: SpectralDecomposition) -> FrameCurveSet:
    """Frame curves for e^{t a} D and the limiting subspace D_inf."""
    if D.dim == 0:
        raise ZeroSubspace("D must be nonzero")
    if D.ambient != sd.n:
        raise AmbientMismatch(f"D lives in C^{D.ambient}, generator acts on C^{sd.n}")
    exact = D.exact and sd.exact
    pieces = level_split(D, sd)
    decomps, curves = [], []
    for pi, piece in enumerate(pieces):
        lv = sd.levels[piece.level]
        proj = la.like(lv.projection, exact)
        nil = la.like(lv.nilpotent, exact)
        W = Subspace(proj @ piece.D_mu.basis, exact)
        gd = basic_lemma(W, nil)
        gd.mu = piece.mu
        decomps.append(gd)
        lift = _lift_map(piece.D_mu, proj)
        expN = nilpotent_series(nil)
        for (j, m), st in gd.steps.items():
            for k in range(st.basis.shape[1]):
                w = st.basis[:, k].reshape(-1, 1)
                ptilde = (st.P @ w).shift(-st.n)
                g = expN @ ptilde
                if g.ord() != 0:
                    raise InternalInvariantViolation("normalised frame curve does not have order 0")
                g_inf = g.coeff(0)
                if not la.is_zero(g_inf - st.G @ w, atol=1e-9 * max(1.0, la.scale_of(g_inf))):
                    raise InternalInvariantViolation("limit vector differs from the leading map")
                p = lift @ ptilde
                tails = []
                for bi, b in enumerate(sd.blocks):
                    theta = sd.theta(b, piece.level)
                    pb = la.like(b.projection, exact) @ p
                    if theta > 0:
                        if not pb.is_zero():
                            raise InternalInvariantViolation("lift has a component above its level")
                        continue
                    if theta == 0:
                        continue
                    if pb.is_zero():
                        continue
                    hat = nilpotent_series(la.like(b.nilpotent, exact)) @ pb
                    if not hat.is_zero():
                        tails.append((bi, theta, hat))
                curves.append(FrameCurve(piece=pi, level=piece.level, mu=piece.mu, key=(j, m, k),
                                         order=st.n, g=g, g_inf=g_inf.reshape(-1), lift=p,
                                         tails=tuple(tails)))
    gmat = np.column_stack([c.g_inf for c in curves])
    if la.rank(gmat) != D.dim:
        raise InternalInvariantViolation("limit vectors are dependent")
    return FrameCurveSet(sd=sd, D=D, pieces=pieces, decompositions=decomps, curves=curves,
                         D_inf=Subspace(gmat, exact))


# -- verification --------------------------------------------------------------------

@dataclass
class ShadowReport:
    samples: list             # (t, gap)
    exponent: float
    constant: float
    passed: bool
    increases: list = field(default_factory=list)


def fitted_exponent(ts, gaps, floor: float = 1e-13) -> float:
    """Least-squares slope of -log gap against log Re t over gaps above ``floor``."""
    pts = [(math.log(complex(t).real), math.log(g)) for t, g in zip(ts, gaps) if g > floor]
    if len(pts) < 2:
        return math.inf
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) == 0:
        return math.inf
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def verify_shadow(fcs: FrameCurveSet, sd: SpectralDecomposition, theta: float, t_samples,
                  floor: float = 1e-10, slack: float = 0.05, constant_factor: float = 2.0) -> ShadowReport:
    """Compare e^{t a} D (high precision) with e^{t a'} D_inf at the samples.

    Passes when, along each horizontal line of samples, the gaps never grow
    by more than ``slack`` and stay below C / Re t, where C is
    ``constant_factor`` times gap * Re t at the first sample.  Gaps below
    ``floor`` count as converged.
    """
    from . import oracle

    t_samples = [complex(t) for t in t_samples]
    for t in t_samples:
        if abs(t.imag) > theta + 1e-12:
            raise ValidationError(f"sample {t} lies outside the strip |Im t| <= {theta}")
    samples = []
    for t in t_samples:
        gap = oracle.flow_gap(sd, fcs.D, fcs.limit_frame(t), t)
        samples.append((t, gap))
    increases = []
    by_im = {}
    for t, g in samples:
        by_im.setdefault(round(t.imag, 12), []).append((t, g))
    ok = True
    constant = 0.0
    exps = []
    for rows in by_im.values():
        rows.sort(key=lambda r: r[0].real)
        c0 = max(rows[0][1], floor) * rows[0][0].real * constant_factor
        constant = max(constant, c0)
        for (t0, g0), (t1, g1) in zip(rows, rows[1:]):
            if g1 > (1 + slack) * g0 + floor:
                increases.append((t0, t1, g0, g1))
                ok = False
        for t, g in rows:
            if g > c0 / t.real + floor:
                ok = False
        exps.append(fitted_exponent([r[0] for r in rows], [r[1] for r in rows], floor))
    return ShadowReport(samples=samples, exponent=min(exps) if exps else math.inf, constant=constant,
                        passed=ok, increases=increases)
