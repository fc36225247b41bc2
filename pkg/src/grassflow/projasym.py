"""Asymptotic expansion of the projection onto e^{t a} D along K.

Frame curves v_k(t) are written in the basis [G U] (limit vectors, then a
basis of K) as [v(t) U] = [G U] [[alpha, 0], [beta, I]].  alpha splits into
its non-decaying part alpha0 and a decaying remainder; inverting alpha with
the adjugate of alpha0 and a Neumann series gives

    pi(t) = sum over theta of e^{t theta} numerator_theta(z, t) / q(z, t)^{n_theta}

with z_j = e^{i t w_j} the oscillating phases and q = t^k det alpha0.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import linalg as la
from .errors import (AmbientMismatch, ConventionMismatch, CutoffUnreachable, DenominatorTooSmall,
                     DimensionMismatch, IllConditionedInstance, NotTransversal, OutsideSector, SectorMismatch,
                     ShadowNotTransversalToK, ValidationError)
from .exppoly import ExpPolyMatrix, determinant_and_adjugate, eval_scalar, ppow, scalar_matrix, theta_key
from .linalg import Subspace
from .shadow import FrameCurveSet

DEFAULT_CUTOFF = -3
NEUMANN_CAP = 12


# -- transition matrices ---------------------------------------------------------------

def _curve_phase(fcs: FrameCurveSet, c):
    """The common phase of every component of a curve, or None if they differ."""
    sd = fcs.sd
    seen = set()
    for bi in sd.levels[c.level].members:
        seen.add(sd.blocks[bi].phase)
    for bi, _, _ in c.tails:
        seen.add(sd.blocks[bi].phase)
    return seen.pop() if len(seen) == 1 else None


def curve_phases(fcs: FrameCurveSet):
    """Phase list of the expansion and the phase factored out of each curve.

    A curve all of whose components oscillate with the same frequency is
    divided by that oscillation; this leaves the spanned subspace unchanged.
    """
    sd = fcs.sd
    common = [_curve_phase(fcs, c) for c in fcs.curves]
    used = set()
    for c, ph in zip(fcs.curves, common):
        if ph is not None:
            continue
        for bi in sd.levels[c.level].members:
            used.add(sd.blocks[bi].phase)
        for bi, _, _ in c.tails:
            used.add(sd.blocks[bi].phase)
    phases = tuple(sorted(p for p in used if p != 0))
    return phases, common


def curve_exppoly(fcs: FrameCurveSet, c, phases: tuple, shift) -> ExpPolyMatrix:
    """v(t) e^{-i t shift} as an n x 1 exp-polynomial column."""
    sd = fcs.sd
    exact = fcs.exact
    zero_theta = theta_key(0, exact)
    terms = {}

    def alpha_of(ph):
        if shift is not None:
            return (0,) * len(phases)
        a = [0] * len(phases)
        if ph != 0:
            a[phases.index(ph)] = 1
        return tuple(a)

    def put(key, col):
        terms[key] = terms[key] + col if key in terms else col

    for bi in sd.levels[c.level].members:
        b = sd.blocks[bi]
        proj = la.like(b.projection, exact)
        for s, coef in c.g.terms.items():
            put((zero_theta, alpha_of(b.phase), s), proj @ coef)
    for bi, theta, hat in c.tails:
        b = sd.blocks[bi]
        for s, coef in hat.terms.items():
            put((theta_key(theta, exact), alpha_of(b.phase), s), coef)
    return ExpPolyMatrix(terms, (sd.n, 1), phases, exact)


def _hstack(cols, phases, exact) -> ExpPolyMatrix:
    n = cols[0].rows
    terms = {}
    for k, col in enumerate(cols):
        for key, c in col.terms.items():
            if key not in terms:
                terms[key] = la.zeros((n, len(cols)), exact)
            terms[key][:, k] = c[:, 0]
    return ExpPolyMatrix(terms, (n, len(cols)), phases, exact)


@dataclass(eq=False)
class Transition:
    alpha: ExpPolyMatrix
    beta: ExpPolyMatrix
    V: ExpPolyMatrix          # frame curves (phase-normalised)
    G: np.ndarray             # limit vectors
    U: np.ndarray             # basis of K
    C: np.ndarray             # inverse of [G U]
    phases: tuple
    shifts: list


def transition(fcs: FrameCurveSet, K: Subspace) -> Transition:
    exact = fcs.exact and K.exact
    if not exact and fcs.exact:
        raise ValidationError("K must be exact when the frame curves are exact")
    n = fcs.sd.n
    if K.ambient != n:
        raise AmbientMismatch(f"K lives in C^{K.ambient}, generator acts on C^{n}")
    d = fcs.D_inf.dim
    if K.dim != n - d:
        raise DimensionMismatch(f"K has dimension {K.dim}, expected {n - d}")
    G = la.like(fcs.g_matrix(), exact)
    U = la.like(K.basis, exact)
    GU = np.hstack([G, U])
    if la.rank(GU) < n:
        raise ShadowNotTransversalToK("the limit subspace meets K; no expansion basis")
    if not exact and la.ambiguous_rank(GU):
        raise IllConditionedInstance("[G U] is numerically close to singular")
    C = la.inv(GU)
    phases, shifts = curve_phases(fcs)
    V = _hstack([curve_exppoly(fcs, c, phases, sh) for c, sh in zip(fcs.curves, shifts)], phases, exact)
    coords = V.rmatmul(C)
    alpha = coords.block(slice(0, d), slice(None))
    beta = coords.block(slice(d, n), slice(None))
    return Transition(alpha=alpha, beta=beta, V=V, G=G, U=U, C=C, phases=phases, shifts=shifts)


def transition_matrices(fcs: FrameCurveSet, K: Subspace):
    """(alpha, beta) with [v(t) U] = [G U] [[alpha, 0], [beta, I]]."""
    tr = transition(fcs, K)
    return tr.alpha, tr.beta


def reconstruction_error(tr: Transition, t) -> float:
    """|| [v(t) U] - [G U] [[alpha, 0], [beta, I]] || at one t."""
    d = tr.alpha.rows
    k = tr.U.shape[1]
    v = tr.V(t)
    u = la.float_array(tr.U)
    left = np.hstack([v, u])
    blk = np.block([[tr.alpha(t), np.zeros((d, k))], [tr.beta(t), np.eye(k)]])
    right = np.hstack([la.float_array(tr.G), u]) @ blk
    return float(np.linalg.norm(left - right, 2))


def split_alpha(alpha: ExpPolyMatrix):
    """(alpha0, alpha_tilde): terms with theta = 0 and theta < 0."""
    z = theta_key(0, alpha.exact)
    a0 = {k: c for k, c in alpha.terms.items() if k[0] == z}
    at = {k: c for k, c in alpha.terms.items() if k[0] != z}
    if any(k[0] > z for k in at):
        raise ValidationError("exp-polynomial has a growing term")
    return (ExpPolyMatrix(a0, alpha.shape, alpha.phases, alpha.exact, prune=False),
            ExpPolyMatrix(at, alpha.shape, alpha.phases, alpha.exact, prune=False))


# -- the series ---------------------------------------------------------------------

@dataclass(eq=False)
class SeriesTerm:
    theta: object
    numerator: ExpPolyMatrix  # keys carry theta = 0
    denom_power: int


@dataclass(eq=False)
class AsymptoticSeries:
    phases: tuple
    terms: list               # SeriesTerm, theta strictly decreasing
    q: dict                   # scalar exp-polynomial, powers of t >= 0
    q_shift: int              # k with q = t^k det alpha0
    cutoff: object
    exact: bool
    n: int
    next_theta: object = None          # largest dropped theta, if any was seen
    boundary: object = None
    q_floor_estimate: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def thetas(self):
        return [tm.theta for tm in self.terms]

    def truncated(self, cutoff) -> "AsymptoticSeries":
        kept = [tm for tm in self.terms if tm.theta >= cutoff]
        dropped = [tm.theta for tm in self.terms if tm.theta < cutoff]
        nxt = max(dropped) if dropped else self.next_theta
        return AsymptoticSeries(phases=self.phases, terms=kept, q=self.q, q_shift=self.q_shift,
                                cutoff=cutoff, exact=self.exact, n=self.n, next_theta=nxt,
                                boundary=self.boundary, q_floor_estimate=self.q_floor_estimate)

    def q_value(self, t, dps=None):
        return eval_scalar(self.q, self.phases, t, dps)

    def det_alpha0(self, t) -> complex:
        return self.q_value(t) / complex(t) ** self.q_shift

    def term_value(self, term: SeriesTerm, t) -> np.ndarray:
        t = complex(t)
        q = self.q_value(t)
        return np.exp(t * float(term.theta)) * term.numerator(t) / q ** term.denom_power

    def phase_monomials(self, term: SeriesTerm):
        """Distinct phase multi-indices of a term, in lexicographic order."""
        return sorted({a for (_, a, _) in term.numerator.terms})


def _neumann_order(theta_max, cutoff) -> int:
    """Largest l with l * theta_max >= cutoff (theta_max < 0)."""
    if theta_max is None:
        return 0
    r = cutoff / theta_max
    return int(math.floor(float(r) + 1e-12))


def projection_series(fcs: FrameCurveSet, K: Subspace, cutoff=DEFAULT_CUTOFF,
                      neumann_cap: int = NEUMANN_CAP) -> AsymptoticSeries:
    """Series for pi_{e^{t a} D, K}, terms with theta >= ``cutoff``."""
    exact = fcs.exact and K.exact
    cutoff = Fraction(cutoff) if exact else float(cutoff)
    if cutoff >= 0:
        raise ValidationError("cutoff must be negative")
    tr = transition(fcs, K)
    phases = tr.phases
    n = fcs.sd.n
    d = tr.alpha.rows
    a0, at = split_alpha(tr.alpha)
    det, adj = determinant_and_adjugate(a0)
    if not det or scalar_matrix(det, phases, exact).is_identically_zero():
        raise NotTransversal("det alpha0 vanishes identically")
    k = max(0, -min(key[2] for key in det))
    q = {(th, a, s + k): v for (th, a, s), v in det.items()}
    adj = adj.shift_power(k)
    one = {(theta_key(0, exact), (0,) * len(phases), 0): (la.ONE if exact else 1.0)}

    theta_max = at.max_theta()
    order = _neumann_order(theta_max, cutoff)
    if order > neumann_cap:
        raise CutoffUnreachable(f"cutoff {cutoff} needs {order} Neumann terms, cap is {neumann_cap}")

    # beta alpha^{-1} = beta adj sum_l (-1)^l (at adj)^l / q^{l+1}
    R = at.matmul(adj, cutoff=cutoff)
    X = tr.beta.matmul(adj, cutoff=cutoff)
    parts = {}                # theta -> list of (l, ExpPolyMatrix at theta)
    for ell in range(order + 1):
        if X.is_zero():
            break
        sgn = X if ell % 2 == 0 else -X
        for th in X.thetas():
            parts.setdefault(th, []).append((ell, sgn.at_theta(th)))
        X = X.matmul(R, cutoff=cutoff)
    next_theta = _first_omitted(tr.beta.matmul(adj).thetas(), at.matmul(adj).thetas(), cutoff)

    C1 = tr.C[:d, :]
    U = tr.U
    zero = theta_key(0, exact)
    terms = []
    thetas = set(parts)
    thetas.add(zero)
    for th in sorted(thetas, reverse=True):
        items = parts.get(th, [])
        n_th = max((ell + 1 for ell, _ in items), default=0)
        num = ExpPolyMatrix.zero((n, n), phases, exact)
        for ell, m in items:
            num = num + _scalar_times(ppow(q, n_th - ell - 1, one, exact), m).rmatmul(U).matmul(C1)
        if th == zero:
            qn = ppow(q, n_th, one, exact)
            num = num + _scalar_times(qn, ExpPolyMatrix.constant(tr.G @ C1, phases, exact))
        num = num.collapsed()
        if num.is_zero():
            continue
        terms.append(SeriesTerm(theta=th, numerator=num, denom_power=n_th))
    series = AsymptoticSeries(phases=phases, terms=terms, q=q, q_shift=k, cutoff=cutoff, exact=exact,
                              n=n, next_theta=next_theta,
                              boundary=fcs.sd.boundary)
    series.meta["neumann_order"] = order
    return series


def _first_omitted(beta_thetas, r_thetas, cutoff):
    """Largest theta below the cutoff reachable as beta theta plus a sum of R thetas."""
    gens = [r for r in r_thetas if r < 0]
    seen = set(beta_thetas)
    frontier = [b for b in beta_thetas if b >= cutoff]
    below = [b for b in beta_thetas if b < cutoff]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = x + g
                if y < cutoff:
                    below.append(y)
                elif y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return max(below) if below else None


def _scalar_times(p: dict, m: ExpPolyMatrix) -> ExpPolyMatrix:
    """Scalar exp-polynomial times a matrix one."""
    exact = m.exact
    out = {}
    for (t1, a1, s1), v in p.items():
        for (t2, a2, s2), c in m.terms.items():
            key = (theta_key(t1 + t2, exact), tuple(x + y for x, y in zip(a1, a2)), s1 + s2)
            prod = c * v
            out[key] = out[key] + prod if key in out else prod
    return ExpPolyMatrix(out, m.shape, m.phases, exact)


# -- evaluation -------------------------------------------------------------------------

def evaluate_series(s: AsymptoticSeries, t, dps: int | None = None, check_floor: bool = True):
    """Numeric value of the retained terms at t.

    With ``dps`` the sum is formed in mpmath and an mpmath matrix is returned.
    """
    floor = la.get_tolerances().det_floor
    if dps is None:
        t = complex(t)
        q = s.q_value(t)
        if check_floor and abs(q) / abs(t) ** s.q_shift <= floor:
            raise DenominatorTooSmall(f"|det alpha0({t})| = {abs(q) / abs(t) ** s.q_shift:.3g}")
        out = np.zeros((s.n, s.n), dtype=complex)
        for tm in s.terms:
            out += cmath.exp(t * float(tm.theta)) * tm.numerator(t) / q ** tm.denom_power
        return out
    with mpmath.workdps(dps):
        tt = mpmath.mpmathify(t)
        q = s.q_value(tt, dps)
        if check_floor and abs(q) / abs(tt) ** s.q_shift <= floor:
            raise DenominatorTooSmall(f"|det alpha0({t})| below floor")
        out = mpmath.matrix(s.n, s.n)
        for tm in s.terms:
            th = tm.theta
            thv = mpmath.mpf(th.numerator) / th.denominator if isinstance(th, Fraction) else mpmath.mpf(float(th))
            out += mpmath.exp(tt * thv) * tm.numerator.evaluate_mp(tt, dps) / q ** tm.denom_power
        return out


def next_order_bound(s: AsymptoticSeries, t) -> float:
    """e^{Re t * theta_next}: the size of the first omitted order (polynomial factors dropped)."""
    if s.next_theta is None:
        return 0.0
    return math.exp(complex(t).real * float(s.next_theta))


def q_floor(s: AsymptoticSeries, ts) -> float:
    """Smallest |det alpha0| over sample points; recorded on the series."""
    vals = [abs(s.det_alpha0(t)) for t in ts]
    s.q_floor_estimate = min(vals) if vals else None
    return s.q_floor_estimate


# -- zeta convention ---------------------------------------------------------------------

@dataclass(eq=False)
class ZetaTerm:
    exponent: object          # real power of zeta: theta / m
    monomials: list           # (sigma exponents, L power, coefficient matrix); L = log(zeta) / m
    denom_power: int


@dataclass(eq=False)
class ZetaSeries:
    """pi = sum zeta^{exponent} numerator(w, L) / qz(w, L)^{denom_power}.

    w_k = zeta^{i Re(sigma_k) / m} for the listed Re(sigma_k); monomials may
    carry negative powers of w and L.
    """
    m: object
    sector: tuple             # (lambda0, half-angle)
    sigma_re: tuple
    terms: list
    q: list                   # (sigma exponents, L power, scalar)
    aligned: bool
    series: AsymptoticSeries

    def _root_parts(self, zeta):
        zeta = complex(zeta)
        if zeta == 0:
            raise ValidationError("zeta must be nonzero")
        half = float(self.sector[1])
        if abs(cmath.phase(zeta)) > half + 1e-12:
            raise OutsideSector(f"arg zeta = {cmath.phase(zeta):.4g} exceeds {half:.4g}")
        return cmath.log(zeta)

    def _mono(self, log_zeta, ex, lp):
        m = float(self.m)
        val = (log_zeta / m) ** lp
        for e, sr in zip(ex, self.sigma_re):
            val *= cmath.exp(1j * float(sr) / m * log_zeta * e)
        return val

    def evaluate(self, zeta) -> np.ndarray:
        lz = self._root_parts(zeta)
        n = self.series.n
        q = sum(complex(c) * self._mono(lz, ex, lp) for ex, lp, c in self.q)
        out = np.zeros((n, n), dtype=complex)
        for tm in self.terms:
            num = np.zeros((n, n), dtype=complex)
            for ex, lp, c in tm.monomials:
                num += self._mono(lz, ex, lp) * la.float_array(c)
            out += cmath.exp(float(tm.exponent) * lz) * num / q ** tm.denom_power
        return out

    def exponents(self):
        return [tm.exponent for tm in self.terms]


def _zeta_monomials(p: ExpPolyMatrix | dict, phases, sigma_re, scalar=False):
    out = []
    items = p.items() if scalar else p.terms.items()
    for (_, a, s), c in sorted(items, key=lambda kv: (kv[0][1], -kv[0][2])):
        ex = [0] * len(sigma_re)
        for j, x in enumerate(a):
            ex[sigma_re.index(-phases[j])] -= x
        out.append((tuple(ex), s, c))
    return out


def to_zeta_convention(s: AsymptoticSeries, m, sector) -> ZetaSeries:
    """Relabel the series in the variable zeta = e^{m t}.

    e^{t theta} becomes zeta^{theta/m}, t becomes log(zeta)/m and the phase
    e^{i t Im(lambda)} becomes zeta^{-i Re(sigma)/m} for lambda = -i sigma - m/2.
    """
    spec = s.boundary
    if spec is None:
        raise ConventionMismatch("series was not built from boundary-spectrum data")
    if Fraction(m) != Fraction(spec.m) if spec.exact else not math.isclose(float(m), float(spec.m)):
        raise ConventionMismatch(f"m = {m} differs from the boundary spectrum's m = {spec.m}")
    lam0, half = sector
    if complex(lam0) == 0 or not (0 < float(half) < math.pi):
        raise SectorMismatch("sector needs lambda0 != 0 and half-angle in (0, pi)")
    mm = Fraction(spec.m) if s.exact else float(spec.m)
    sigma_re = tuple(sorted({-ph for ph in s.phases}))
    terms = [ZetaTerm(exponent=tm.theta / mm, monomials=_zeta_monomials(tm.numerator, s.phases, sigma_re),
                      denom_power=tm.denom_power) for tm in s.terms]
    q = _zeta_monomials(s.q, s.phases, sigma_re, scalar=True)
    return ZetaSeries(m=mm, sector=(lam0, half), sigma_re=sigma_re, terms=terms, q=q,
                      aligned=not sigma_re, series=s)


def alpha0_determinant(fcs: FrameCurveSet, K: Subspace):
    """(det alpha0 as a scalar exp-polynomial, phase list).

    Curves whose components share one phase have it divided out, which only
    multiplies the determinant by a nowhere-vanishing exponential.
    """
    tr = transition(fcs, K)
    a0, _ = split_alpha(tr.alpha)
    det, _ = determinant_and_adjugate(a0)
    return det, tr.phases


def oracle_residual(s: AsymptoticSeries, sd, D: Subspace, K: Subspace, t) -> float:
    """Natural log of ||series(t) - pi(t)|| against the high-precision oracle.

    Enough digits are carried to resolve residuals far below double range.
    """
    from . import oracle

    t = complex(t)
    lead = float(s.next_theta) if s.next_theta is not None else float(s.cutoff)
    extra = int(abs(t.real * lead) / math.log(10)) + 25
    dps = oracle.required_dps(sd, t, extra)
    exact_pi = oracle.projection(sd, D, K, t, extra_digits=extra, as_mp=True)
    approx = evaluate_series(s, t, dps=dps)
    return oracle.mp_residual_log(approx, exact_pi, dps)
