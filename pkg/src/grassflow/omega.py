"""Limit sets of e^{t a} D in the Grassmannian and transversality to K.

The orbit of the limiting subspace under the bounded flow e^{t a'} lies in
the orbit of the torus T = {sum_k e^{i u_k} pi_k} (one angle per distinct
imaginary part).  Its closure is the image of the smallest rational
subspace containing the frequency vector, modulo the stabiliser of D_inf.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import linalg as sla
from scipy import optimize

from . import linalg as la
from .errors import (AmbientMismatch, DimensionMismatch, NotComplementary, ShadowNotTransversalToK,
                     StripViolation, ValidationError)
from .exppoly import eval_scalar
from .linalg import Subspace
from .shadow import FrameCurveSet, shadow
from .spectral import SpectralDecomposition

TORUS_FLOOR = 1e-6
GRID_POINTS = 32
GRID_RANGE = (10.0, 1e4)


def _phase_projections(sd: SpectralDecomposition):
    """Distinct imaginary parts and the sums of the block projections sharing each."""
    groups = {}
    for b in sd.blocks:
        groups.setdefault(b.phase, []).append(b.projection)
    phases = tuple(sorted(groups))
    projs = [reduce(lambda x, y: x + y, groups[p]) for p in phases]
    return phases, projs


def _exact_real_kernel(m: np.ndarray) -> list:
    """Rational kernel (list of Fraction vectors) of a matrix of Fractions."""
    k = la.kernel_basis(la.exact_array(m.tolist()))
    return [[la.to_fraction(x.re) for x in k[:, j]] for j in range(k.shape[1])]


def _integer_vector(v) -> list:
    den = reduce(math.lcm, (Fraction(x).denominator for x in v), 1)
    ints = [int(Fraction(x) * den) for x in v]
    g = reduce(math.gcd, (abs(x) for x in ints), 0) or 1
    return [x // g for x in ints]


def _rank_real(m: np.ndarray, exact: bool) -> int:
    if m.size == 0:
        return 0
    if exact:
        return la.rank(la.exact_array(m.tolist()))
    return la.rank(np.asarray(m, dtype=float))


@dataclass(eq=False)
class TorusModel:
    D_inf: Subspace
    sd: SpectralDecomposition
    imag_parts: tuple
    projections: list
    stabilizer: np.ndarray           # real basis of the stabiliser algebra, columns
    stabilizer_relations: np.ndarray  # integer rows r with sum r_k w_k = 0
    torus_dim: int
    directions: np.ndarray           # integer columns spanning the closure directions
    generic: bool = False
    period: object = None            # t-period of the orbit when it is a circle
    declared: np.ndarray | None = None

    @property
    def exact(self) -> bool:
        return self.sd.exact and self.D_inf.exact

    def _frame(self, angles, y=0.0) -> np.ndarray:
        g = la.float_array(self.D_inf.basis)
        out = np.zeros_like(g, dtype=complex)
        for u, w, p in zip(angles, self.imag_parts, self.projections):
            out += np.exp(1j * u - y * float(w)) * (la.float_array(p) @ g)
        return out

    def sample(self, t) -> np.ndarray:
        """Basis of e^{t a'} D_inf."""
        t = complex(t)
        return self._frame([t.real * float(w) for w in self.imag_parts], t.imag)

    def point(self, s, y=0.0) -> np.ndarray:
        """Basis of the torus point with coordinates s along ``directions``."""
        s = np.asarray(s, dtype=float).reshape(-1)
        u = self.directions.astype(float) @ s if self.directions.size else np.zeros(len(self.imag_parts))
        return self._frame(u, y)

    def distance(self, basis: np.ndarray, samples: int = 256, y: float = 0.0) -> float:
        """Gap from span(basis) to the torus at imaginary shift ``y``."""
        target = sla.orth(np.asarray(basis, dtype=complex))
        pt = target @ target.conj().T

        def gap(s):
            q = sla.orth(self.point(s, y))
            return float(np.linalg.norm(q @ q.conj().T - pt, 2))

        r = self.directions.shape[1] if self.directions.size else 0
        if r == 0:
            return gap(np.zeros(0))
        return _minimise_periodic(gap, r, samples)

    def orbit_variation(self, ts) -> float:
        """Largest gap between e^{t a'} D_inf over ``ts`` and D_inf."""
        q0 = sla.orth(la.float_array(self.D_inf.basis))
        p0 = q0 @ q0.conj().T
        worst = 0.0
        for t in ts:
            q = sla.orth(self.sample(t))
            worst = max(worst, float(np.linalg.norm(q @ q.conj().T - p0, 2)))
        return worst


def _minimise_periodic(f, r: int, samples: int, rng_seed: int = 0) -> float:
    """Global minimum of f over [0, 2 pi)^r by a grid (or random points) and local polish."""
    if r == 1:
        pts = [np.array([x]) for x in np.linspace(0, 2 * math.pi, samples, endpoint=False)]
    elif r == 2:
        m = max(8, int(math.sqrt(samples * 8)))
        g = np.linspace(0, 2 * math.pi, m, endpoint=False)
        pts = [np.array([a, b]) for a in g for b in g]
    else:
        rng = np.random.default_rng(rng_seed)
        pts = list(rng.uniform(0, 2 * math.pi, size=(samples * 16, r)))
    vals = [f(p) for p in pts]
    order = np.argsort(vals)[:4]
    best = min(vals)
    for i in order:
        res = optimize.minimize(f, pts[i], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400 * r})
        best = min(best, float(res.fun))
    return best


def _validate_relations(relations, phases, exact: bool) -> np.ndarray:
    if relations is None or len(relations) == 0:
        return np.zeros((0, len(phases)), dtype=np.int64)
    rel = np.array(relations, dtype=np.int64).reshape(-1, len(phases)) if len(phases) else np.zeros((0, 0), dtype=np.int64)
    for r in rel:
        tot = sum(int(x) * (Fraction(w) if exact else float(w)) for x, w in zip(r, phases))
        if (tot != 0) if exact else abs(tot) > 1e-9 * max(1.0, max(abs(float(w)) for w in phases)):
            raise ValidationError(f"declared relation {list(map(int, r))} does not annihilate the imaginary parts")
    return rel


def _stabilizer(D_inf: Subspace, projs, exact: bool) -> np.ndarray:
    """Real kernel of u -> (I - P) sum_k u_k pi_k G."""
    n = D_inf.ambient
    g = D_inf.basis if exact else la.float_array(D_inf.basis)
    p = D_inf.projector() if exact else la.float_array(D_inf.to_float().projector())
    off = la.eye(n, exact) - p
    cols = []
    for pk in projs:
        v = (off @ (la.like(pk, exact) @ g)).reshape(-1)
        if exact:
            cols.append([la.to_fraction(x.re) for x in v] + [la.to_fraction(x.im) for x in v])
        else:
            cols.append(list(v.real) + list(v.imag))
    m = np.array(cols, dtype=object if exact else float).T
    if exact:
        ker = _exact_real_kernel(m)
        return np.array(ker, dtype=object).T.reshape(len(projs), len(ker))
    scale = max(1.0, la.scale_of(m))
    _, s, vh = np.linalg.svd(m) if m.size else (None, np.zeros(0), np.eye(len(projs)))
    r = int(np.sum(s > la.get_tolerances().rank * scale))
    return vh[r:].conj().T


def _complement_real(basis: np.ndarray, k: int, exact: bool) -> np.ndarray:
    if basis.size == 0:
        return np.eye(k, dtype=object if exact else float) if not exact else \
            np.array([[Fraction(int(i == j)) for j in range(k)] for i in range(k)], dtype=object)
    if exact:
        ker = _exact_real_kernel(basis.T)
        return np.array(ker, dtype=object).T.reshape(k, len(ker))
    _, s, vh = np.linalg.svd(basis.T)
    r = int(np.sum(s > 1e-9 * max(1.0, s.max() if s.size else 0.0)))
    return vh[r:].conj().T


def omega_limit(D: Subspace, sd: SpectralDecomposition, theta: float = 0.0, relations=None,
                fcs: FrameCurveSet | None = None) -> TorusModel:
    """D_inf and the torus swept out by e^{t a'} D_inf.

    ``relations`` are integer vectors r (indexed by the distinct imaginary
    parts, increasing) with sum r_k Im(lambda_k) = 0.  In float mode these are
    the only dependencies used besides a zero imaginary part; exact mode uses
    all rational relations.
    """
    fcs = fcs or shadow(D, sd)
    exact = fcs.exact
    phases, projs = _phase_projections(sd)
    k = len(phases)
    declared = _validate_relations(relations, phases, exact)
    S = _stabilizer(fcs.D_inf, projs, exact)
    if exact:
        rel = _exact_real_kernel(np.array([[Fraction(w) for w in phases]], dtype=object)) if k else []
        R = np.array([_integer_vector(v) for v in rel], dtype=np.int64).reshape(-1, k)
    else:
        auto = [[int(i == j) for i in range(k)] for j, w in enumerate(phases) if w == 0]
        R = np.array(list(declared.tolist()) + auto, dtype=np.int64).reshape(-1, k)
    S_perp = _complement_real(S, k, exact)
    rR = _rank_real(R.T.astype(object) if exact else R.T.astype(float), exact) if R.size else 0
    stacked = np.hstack([S_perp, R.T.astype(object if exact else float)]) if S_perp.size or R.size else np.zeros((k, 0))
    dim = _rank_real(stacked, exact) - rR
    if R.size:
        dirs_q = _exact_real_kernel(np.array([[Fraction(int(x)) for x in r] for r in R], dtype=object))
    else:
        dirs_q = [[Fraction(int(i == j)) for i in range(k)] for j in range(k)]
    dirs = np.array([_integer_vector(v) for v in dirs_q], dtype=np.int64).T.reshape(k, len(dirs_q))
    period = None
    if exact and dim == 1:
        nz = [Fraction(w) for w in phases if w != 0]
        ints = _integer_vector([Fraction(w) for w in phases])
        c = next(Fraction(w) / x for w, x in zip(phases, ints) if x != 0)
        period = 2 * math.pi / abs(float(c)) if nz else None
    return TorusModel(D_inf=fcs.D_inf, sd=sd, imag_parts=phases, projections=projs, stabilizer=S,
                      stabilizer_relations=R, torus_dim=int(dim), directions=dirs,
                      generic=(not exact and declared.size == 0), period=period, declared=declared)


def variety_membership(S: Subspace, K: Subspace) -> bool:
    """True iff S meets K nontrivially (complementary dimensions)."""
    if S.ambient != K.ambient:
        raise AmbientMismatch("subspaces live in different spaces")
    if S.dim + K.dim != S.ambient:
        raise DimensionMismatch(f"dim S + dim K = {S.dim + K.dim}, ambient {S.ambient}")
    if S.exact and K.exact:
        return la.rank(np.hstack([S.basis, K.basis])) < S.ambient
    a = sla.orth(la.float_array(S.basis)) if S.dim else np.zeros((S.ambient, 0))
    b = sla.orth(la.float_array(K.basis)) if K.dim else np.zeros((S.ambient, 0))
    s = np.linalg.svd(np.hstack([a, b]), compute_uv=False)
    return bool(s.min() < la.get_tolerances().rank) if s.size else False


def transversality_margin(a: np.ndarray, k_orth: np.ndarray) -> float:
    """Smallest singular value of [orth(a), orth(K)]; zero iff span(a) meets K."""
    q = sla.orth(a)
    if q.shape[1] < a.shape[1]:
        return 0.0
    return float(np.linalg.svd(np.hstack([q, k_orth]), compute_uv=False).min())


# -- the two signals -------------------------------------------------------------------

@dataclass
class TransversalityVerdict:
    transversal: bool
    inf_abs_det: float
    sup_proj_norm: float
    witnesses: list                   # (t, |det alpha0(t)|), worst first
    det_signal: bool = True
    torus_signal: bool = True
    torus_margin: float = 0.0
    sup_proj_norm_first_half: float = 0.0
    bounded: bool = True
    notes: list = field(default_factory=list)

    @property
    def agree(self) -> bool:
        return self.det_signal == self.torus_signal


def default_grid(theta: float, points: int = GRID_POINTS, lo: float = GRID_RANGE[0],
                 hi: float = GRID_RANGE[1]) -> list:
    ims = [0.0] if theta == 0 else [-theta, 0.0, theta]
    return [complex(x, y) for y in ims for x in np.logspace(math.log10(lo), math.log10(hi), points)]


def _window(phases) -> float:
    nz = [abs(float(w)) for w in phases if w != 0]
    if not nz:
        return 1.0
    fr = [Fraction(w).limit_denominator(10 ** 6) for w in phases if w != 0]
    if all(abs(float(f) - float(w)) < 1e-12 for f, w in zip(fr, [w for w in phases if w != 0])):
        den = reduce(math.lcm, (f.denominator for f in fr), 1)
        g = reduce(math.gcd, (abs(int(f * den)) for f in fr), 0)
        c = g / den
        return 2 * math.pi / c
    return 4 * math.pi / min(nz)


def _det_signal(det: dict, phases, grid, theta: float, floor: float):
    f = lambda t: eval_scalar(det, phases, t)   # noqa: E731
    width = min(_window(phases), 200.0)
    found = []
    for t0 in grid:
        xs = t0.real + np.linspace(0, width, 24, endpoint=False)
        vals = [abs(f(complex(x, t0.imag))) for x in xs]
        i = int(np.argmin(vals))
        x0 = xs[i]

        def obj(p):
            return abs(f(complex(p[0], p[1]))) ** 2

        bounds = [(t0.real, t0.real + width), (-theta, theta)]
        res = optimize.minimize(obj, np.array([x0, t0.imag]), method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-30, "gtol": 1e-20, "maxiter": 200})
        tb = complex(res.x[0], res.x[1])
        found.append((t0, abs(f(t0))))
        found.append((tb, math.sqrt(max(res.fun, 0.0))))
    found.sort(key=lambda r: r[1])
    return found


def _torus_signal(model: TorusModel, K: Subspace, theta: float, samples: int = 256) -> float:
    k_orth = sla.orth(la.float_array(K.basis)) if K.dim else np.zeros((K.ambient, 0))
    r = model.directions.shape[1] if model.directions.size else 0
    ys = [0.0] if theta == 0 else list(np.linspace(-theta, theta, 5))

    def h(p):
        s, y = p[:r], (float(np.clip(p[r], -theta, theta)) if theta else 0.0)
        return transversality_margin(model.point(s, y), k_orth)

    best = math.inf
    for y in ys:
        if r == 0:
            best = min(best, h(np.array([y])))
            continue
        g = lambda s, y=y: h(np.concatenate([s, [y]]))   # noqa: E731
        best = min(best, _minimise_periodic(g, r, samples))
    return best


def _proj_norm(sd, D, K, t) -> float:
    from . import oracle
    try:
        return float(np.linalg.norm(oracle.projection(sd, D, K, t), 2))
    except ZeroDivisionError:
        return math.inf


def minimal_growth_check(D: Subspace, K: Subspace, sd: SpectralDecomposition, theta: float = 0.5,
                         grid=None, relations=None, fcs: FrameCurveSet | None = None,
                         det_floor: float | None = None, torus_floor: float = TORUS_FLOOR,
                         oracle_norms: bool = True, oracle_stride: int = 1,
                         executor=None) -> TransversalityVerdict:
    """Sample the determinant and torus criteria for transversality.

    ``grid`` is a list of complex t in the strip |Im t| <= theta.  The
    determinant signal minimises |det alpha0| locally around every grid
    point and judges the minima with Re t >= sqrt(T0 T1), the later half of
    a log-spaced grid; zeros before that are transient and only noted.  The
    torus signal minimises the margin between the torus through D_inf and K.
    Projection norms come from the high-precision oracle.
    """
    from .projasym import alpha0_determinant

    if D.ambient != K.ambient:
        raise AmbientMismatch("D and K live in different spaces")
    if D.dim + K.dim != D.ambient:
        raise NotComplementary(f"dim D + dim K = {D.dim + K.dim}, ambient {D.ambient}")
    det_floor = la.get_tolerances().det_floor if det_floor is None else det_floor
    grid = default_grid(theta) if grid is None else [complex(t) for t in grid]
    for t in grid:
        if abs(t.imag) > theta + 1e-12:
            raise StripViolation(f"grid point {t} outside |Im t| <= {theta}")
    fcs = fcs or shadow(D, sd)
    notes = []
    try:
        det, phases = alpha0_determinant(fcs, K)
        found = _det_signal(det, phases, grid, theta, det_floor)
        res = [t.real for t in grid]
        tail_from = math.sqrt(min(res) * max(res)) if min(res) > 0 else min(res)
        tail = [w for w in found if w[0].real >= tail_from]
        early = [w for w in found if w[0].real < tail_from and w[1] <= det_floor]
        if early:
            notes.append(f"det alpha0 vanishes near Re t = {early[0][0].real:.6g}, before the tail Re t >= "
                         f"{tail_from:.6g}")
        inf_det = tail[0][1] if tail else found[0][1]
        witnesses = []
        for w in tail or found:
            if all(abs(w[0] - u[0]) > 1e-9 * max(1.0, abs(w[0])) for u in witnesses):
                witnesses.append(w)
        witnesses = witnesses[:5]
    except ShadowNotTransversalToK:
        inf_det, witnesses = 0.0, []
        notes.append("limit subspace meets K")
    model = omega_limit(D, sd, theta, relations, fcs)
    margin = _torus_signal(model, K, theta)
    det_ok = inf_det > det_floor
    torus_ok = margin > torus_floor
    sup_all = sup_first = 0.0
    if oracle_norms:
        pts = grid[::max(1, oracle_stride)] + [w[0] for w in witnesses[:2]]
        mapper = executor.map if executor is not None else map
        norms = list(mapper(lambda t: _proj_norm(sd, D, K, t), pts))
        sup_all = max(norms, default=0.0)
        mid = 0.5 * (min(t.real for t in grid) + max(t.real for t in grid))
        first = [v for t, v in zip(pts[:len(pts) - len(witnesses[:2])], norms) if t.real <= mid]
        sup_first = max(first, default=0.0)
    bounded = (not oracle_norms) or (math.isfinite(sup_all) and sup_all <= 10 * max(sup_first, 1e-300))
    if det_ok != torus_ok:
        notes.append("signals disagree; the grid may be under-resolved")
    return TransversalityVerdict(transversal=det_ok and torus_ok, inf_abs_det=float(inf_det),
                                 sup_proj_norm=float(sup_all), witnesses=witnesses, det_signal=det_ok,
                                 torus_signal=torus_ok, torus_margin=float(margin),
                                 sup_proj_norm_first_half=float(sup_first), bounded=bounded, notes=notes)
