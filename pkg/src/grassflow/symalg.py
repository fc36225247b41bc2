"""Symbols built from powers, oscillating phases and logarithms of lambda.

A component is

    s(lambda) = lambda^{nu/m} p(w, L, phi) / q(w, L),   w_k = lambda^{i mu_k},  L = log lambda,

where phi = arg lambda.  The numerator is a Laurent polynomial in w and L
with matrix coefficients that may depend on the direction through finitely
many Fourier modes e^{i k phi}; the denominator is a scalar polynomial with
constant coefficients.  Logarithms use the branch whose cut is the ray
opposite the sector axis.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import linalg as la
from .errors import (DenominatorTooSmall, NotHolomorphic, OutsideSector, SectorMismatch,
                     ShapeMismatch, ValidationError)


@dataclass(frozen=True)
class Sector:
    """{lambda : |arg(lambda) - axis| <= half_angle}."""

    axis: float = 0.0
    half_angle: float = math.pi / 2

    def __post_init__(self):
        if not 0 < self.half_angle < math.pi:
            raise ValidationError("half-angle must lie in (0, pi)")

    @classmethod
    def from_lambda0(cls, lambda0, half_angle) -> "Sector":
        lam = complex(lambda0)
        if lam == 0:
            raise ValidationError("lambda0 must be nonzero")
        return cls(cmath.phase(lam), float(half_angle))

    def angle(self, lam) -> float:
        """arg lambda on the branch continuous across the sector."""
        rel = cmath.phase(complex(lam) * cmath.exp(-1j * self.axis))
        return self.axis + rel

    def contains(self, lam) -> bool:
        lam = complex(lam)
        if lam == 0:
            return False
        return abs(self.angle(lam) - self.axis) <= self.half_angle + 1e-12

    def log(self, lam) -> complex:
        lam = complex(lam)
        return complex(math.log(abs(lam)), self.angle(lam))

    def same(self, other: "Sector") -> bool:
        return math.isclose(self.axis, other.axis, abs_tol=1e-12) and \
            math.isclose(self.half_angle, other.half_angle, abs_tol=1e-12)


# -- Laurent polynomials keyed by (alpha, L power, Fourier mode) ------------------------

def _add_into(out: dict, key, val):
    out[key] = out[key] + val if key in out else val


def _prune(p: dict) -> dict:
    return {k: v for k, v in p.items() if np.any(np.abs(v) > 0)}


def _mul(p1: dict, p2: dict, op) -> dict:
    out = {}
    for (a1, s1, k1), c1 in p1.items():
        for (a2, s2, k2), c2 in p2.items():
            key = (tuple(x + y for x, y in zip(a1, a2)), s1 + s2, k1 + k2)
            _add_into(out, key, op(c1, c2))
    return _prune(out)


def _add(p1: dict, p2: dict) -> dict:
    out = dict(p1)
    for k, v in p2.items():
        _add_into(out, k, v)
    return _prune(out)


def _scale(p: dict, c) -> dict:
    return _prune({k: v * c for k, v in p.items()})


def _reindex(p: dict, mapping, n: int) -> dict:
    out = {}
    for (a, s, k), c in p.items():
        b = [0] * n
        for j, x in enumerate(a):
            b[mapping[j]] += x
        _add_into(out, (tuple(b), s, k), c)
    return out


def _log_derivative(p: dict, phases) -> dict:
    """lambda d/dlambda of the holomorphic dependence (w and L), plus -i/2 d/dphi."""
    out = {}
    for (a, s, k), c in p.items():
        f = sum(1j * float(mu) * x for mu, x in zip(phases, a))
        if f != 0:
            _add_into(out, (a, s, k), c * f)
        if s != 0:
            _add_into(out, (a, s - 1, k), c * s)
        if k != 0:
            _add_into(out, (a, s, k), c * (-0.5j * 1j * k))
    return _prune(out)


def _antiholo_derivative(p: dict) -> dict:
    """conj(lambda) d/dconj(lambda): only the direction dependence contributes (i/2 d/dphi)."""
    out = {}
    for (a, s, k), c in p.items():
        if k != 0:
            _add_into(out, (a, s, k), c * (0.5j * 1j * k))
    return _prune(out)


def _eval_poly(p: dict, logl: complex, phases, shape=None):
    phi = logl.imag
    tot = np.zeros(shape, dtype=complex) if shape is not None else 0j
    for (a, s, k), c in p.items():
        v = logl ** s * cmath.exp(1j * k * phi)
        for mu, x in zip(phases, a):
            if x:
                v *= cmath.exp(1j * float(mu) * x * logl)
        tot = tot + v * c
    return tot


@dataclass(frozen=True)
class DirectionCoefficient:
    """A degree-0 coefficient a(phi) = sum_k c_k e^{i k phi}."""

    modes: dict

    @classmethod
    def constant(cls, c) -> "DirectionCoefficient":
        return cls({0: np.asarray(c, dtype=complex)})

    @classmethod
    def from_samples(cls, phis, values, max_mode: int = 4) -> "DirectionCoefficient":
        """Least-squares Fourier fit of tabulated values on a direction grid."""
        phis = np.asarray(phis, dtype=float)
        vals = np.asarray(values, dtype=complex)
        shape = vals.shape[1:]
        ks = list(range(-max_mode, max_mode + 1))
        basis = np.exp(1j * np.outer(phis, ks))
        coef, *_ = np.linalg.lstsq(basis, vals.reshape(len(phis), -1), rcond=None)
        modes = {}
        for k, c in zip(ks, coef):
            c = c.reshape(shape)
            if np.max(np.abs(c), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(vals), initial=0.0)):
                modes[k] = c
        return cls(modes or {0: np.zeros(shape, dtype=complex)})

    def __call__(self, phi):
        return sum(c * cmath.exp(1j * k * phi) for k, c in self.modes.items())

    def is_constant(self) -> bool:
        return set(self.modes) <= {0}


# -- components ------------------------------------------------------------------------

def _num(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return x


@dataclass(frozen=True, eq=False)
class SymbolComponent:
    m: object
    order: object
    phases: tuple
    p: dict                     # (alpha, L power, mode) -> matrix
    q: dict                     # (alpha, L power, 0) -> scalar
    shape: tuple
    sector: Sector = field(default_factory=Sector)
    holomorphic: bool = True
    q_floor: float | None = None

    def __post_init__(self):
        for k in self.q:
            if k[2] != 0:
                raise ValidationError("denominator coefficients must be constant")
        for (a, _, _), c in self.p.items():
            if len(a) != len(self.phases) or np.shape(c) != self.shape:
                raise ShapeMismatch("numerator key or coefficient shape is inconsistent")

    @classmethod
    def monomial(cls, order, coefficient, m=1, sector=None, phases=(), alpha=None, log_power: int = 0,
                 q=None) -> "SymbolComponent":
        c = np.atleast_2d(np.asarray(coefficient, dtype=complex))
        alpha = tuple(alpha) if alpha is not None else (0,) * len(phases)
        qq = {(tuple(a), s, 0): complex(v) for (a, s), v in (q or {((0,) * len(phases), 0): 1}).items()}
        return cls(m=_num(m), order=_num(order), phases=tuple(phases), p={(alpha, log_power, 0): c}, q=qq,
                   shape=c.shape, sector=sector or Sector())

    @classmethod
    def zero(cls, shape, m=1, sector=None, phases=()) -> "SymbolComponent":
        return cls(m=_num(m), order=0, phases=tuple(phases), p={}, q={((0,) * len(phases), 0, 0): 1 + 0j},
                   shape=tuple(shape), sector=sector or Sector())

    @property
    def has_direction_dependence(self) -> bool:
        return any(k[2] != 0 for k in self.p)

    def is_zero(self) -> bool:
        return not self.p

    def with_phases(self, phases: tuple) -> "SymbolComponent":
        """Same component over a larger phase list containing the current one."""
        mapping = [phases.index(mu) for mu in self.phases]
        n = len(phases)
        return replace(self, phases=tuple(phases), p=_reindex(self.p, mapping, n), q=_reindex(self.q, mapping, n))

    def q_value(self, lam) -> complex:
        return _eval_poly(self.q, self.sector.log(lam), self.phases)

    def __call__(self, lam) -> np.ndarray:
        return evaluate_symbol(self, lam)

    def __neg__(self):
        return replace(self, p=_scale(self.p, -1))

    def scaled(self, c) -> "SymbolComponent":
        return replace(self, p=_scale(self.p, c))


def _union(a: tuple, b: tuple) -> tuple:
    out = list(a)
    for mu in b:
        if not any(_same_phase(mu, x) for x in out):
            out.append(mu)
    return tuple(sorted(out, key=float))


def _same_phase(x, y) -> bool:
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return x == y
    return math.isclose(float(x), float(y), rel_tol=0, abs_tol=1e-12)


def _canonical_phases(ph: tuple, ref: tuple) -> tuple:
    return tuple(next(x for x in ref if _same_phase(x, mu)) for mu in ph)


def _align(a: SymbolComponent, b: SymbolComponent):
    if not a.sector.same(b.sector):
        raise SectorMismatch("components live on different sectors")
    if a.m != b.m and not math.isclose(float(a.m), float(b.m)):
        raise SectorMismatch(f"anisotropies differ: {a.m} vs {b.m}")
    ph = _union(a.phases, b.phases)
    a = replace(a, phases=_canonical_phases(a.phases, ph))
    b = replace(b, phases=_canonical_phases(b.phases, ph))
    return a.with_phases(ph), b.with_phases(ph), ph


def compose(a: SymbolComponent, b: SymbolComponent) -> SymbolComponent:
    """Pointwise product a(lambda) b(lambda); orders add."""
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot compose {a.shape} with {b.shape}")
    a2, b2, ph = _align(a, b)
    p = _mul(a2.p, b2.p, lambda x, y: x @ y)
    q = _mul(a2.q, b2.q, lambda x, y: x * y)
    return SymbolComponent(m=a.m, order=a.order + b.order, phases=ph, p=p, q=q,
                           shape=(a.shape[0], b.shape[1]), sector=a.sector,
                           holomorphic=a.holomorphic and b.holomorphic)


def add_same_order(a: SymbolComponent, b: SymbolComponent) -> SymbolComponent:
    """a + b for components of equal order, over the common denominator q_a q_b."""
    if a.order != b.order and not math.isclose(float(a.order), float(b.order), abs_tol=1e-12):
        raise ValidationError("components of different orders cannot be merged")
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    a2, b2, ph = _align(a, b)
    if a2.q == b2.q:
        p, q = _add(a2.p, b2.p), a2.q
    else:
        p = _add(_mul(a2.p, b2.q, lambda x, y: x * y), _mul(b2.p, a2.q, lambda x, y: x * y))
        q = _mul(a2.q, b2.q, lambda x, y: x * y)
    return SymbolComponent(m=a.m, order=a.order, phases=ph, p=p, q=q, shape=a.shape, sector=a.sector,
                           holomorphic=a.holomorphic and b.holomorphic)


@dataclass(frozen=True, eq=False)
class SymbolExpansion:
    components: tuple
    radii: tuple = ()

    def __post_init__(self):
        orders = [float(c.order) for c in self.components]
        if any(x <= y for x, y in zip(orders, orders[1:])):
            raise ValidationError("component orders must be strictly decreasing")
        if self.radii and len(self.radii) != len(self.components):
            raise ValidationError("one excision radius per component")

    @property
    def orders(self):
        return [c.order for c in self.components]

    def radius(self, j: int) -> float:
        return self.radii[j] if self.radii else 0.0

    def __call__(self, lam, truncation: int | None = None):
        return evaluate_symbol(self, lam, truncation)


def _single(c: SymbolComponent) -> SymbolExpansion:
    return SymbolExpansion(components=() if c.is_zero() else (c,))


def differentiate(a: SymbolComponent, order=(1, 0)) -> SymbolExpansion:
    """d^alpha/dlambda^alpha d^beta/dconj(lambda)^beta of a component."""
    alpha, beta = order
    if alpha < 0 or beta < 0:
        raise ValidationError("derivative orders must be nonnegative")
    if beta > 0 and (a.holomorphic or not a.has_direction_dependence):
        return SymbolExpansion(components=())
    cur = a
    for _ in range(alpha):
        cur = _d_lambda(cur)
        if cur.is_zero():
            return SymbolExpansion(components=())
    for _ in range(beta):
        cur = _d_lambda_bar(cur)
        if cur.is_zero():
            return SymbolExpansion(components=())
    return _single(cur)


def _d_lambda(a: SymbolComponent) -> SymbolComponent:
    nu_m = a.order / a.m
    dp = _log_derivative(a.p, a.phases)
    dq = _log_derivative(a.q, a.phases)
    smul = lambda x, y: x * y    # noqa: E731
    num = _add(_add(_scale(_mul(a.p, a.q, smul), nu_m if not isinstance(nu_m, Fraction) else float(nu_m)),
                    _mul(dp, a.q, smul)),
               _scale(_mul(a.p, dq, smul), -1))
    q = _mul(a.q, a.q, smul)
    return replace(a, order=a.order - a.m, p=num, q=q)


def _d_lambda_bar(a: SymbolComponent) -> SymbolComponent:
    # conj(lambda)^{-1} = lambda^{-1} e^{2 i phi}
    dp = _antiholo_derivative(a.p)
    shifted = {(al, s, k + 2): c for (al, s, k), c in dp.items()}
    return replace(a, order=a.order - a.m, p=shifted)


def evaluate_symbol(a, lam, truncation: int | None = None, floor: float | None = None) -> np.ndarray:
    """Numeric value at lambda; for expansions, the first ``truncation`` components."""
    floor = la.get_tolerances().det_floor if floor is None else floor
    if isinstance(a, SymbolExpansion):
        comps = a.components if truncation is None else a.components[:truncation]
        if not comps:
            return 0.0
        out = None
        for j, c in enumerate(comps):
            if abs(complex(lam)) < a.radius(j):
                v = np.zeros(c.shape, dtype=complex)
            else:
                v = evaluate_symbol(c, lam, floor=floor)
            out = v if out is None else out + v
        return out
    lam = complex(lam)
    if not a.sector.contains(lam):
        raise OutsideSector(f"{lam} is outside the sector")
    logl = a.sector.log(lam)
    q = _eval_poly(a.q, logl, a.phases)
    if abs(q) <= floor:
        raise DenominatorTooSmall(f"|q({lam})| = {abs(q):.3g}")
    p = _eval_poly(a.p, logl, a.phases, a.shape)
    return cmath.exp(float(a.order) / float(a.m) * logl) * p / q


def sample_points(sector: Sector, count: int = 256, r_min: float = 1e2, r_max: float = 1e12,
                  rays: int = 3) -> list:
    """Log-spaced radii on a few rays of the sector; dense in the phase torus for generic phases."""
    angles = [sector.axis] if rays == 1 else list(np.linspace(sector.axis - 0.5 * sector.half_angle,
                                                              sector.axis + 0.5 * sector.half_angle, rays))
    per = max(1, count // len(angles))
    return [r * cmath.exp(1j * th) for th in angles for r in np.logspace(math.log10(r_min), math.log10(r_max), per)]


def vanishing_test(a: SymbolComponent, epsilon: float = 1e-8, samples=None) -> bool:
    """True iff sup ||a(lambda)|| |lambda|^{-nu/m} over the samples is below epsilon."""
    if a.is_zero():
        return True
    pts = sample_points(a.sector) if samples is None or isinstance(samples, int) else list(samples)
    if isinstance(samples, int):
        pts = sample_points(a.sector, samples)
    nu_m = float(a.order) / float(a.m)
    sup = 0.0
    for lam in pts:
        try:
            v = evaluate_symbol(a, lam)
        except DenominatorTooSmall:
            continue
        sup = max(sup, float(np.linalg.norm(np.atleast_2d(v), 2)) * abs(lam) ** (-nu_m))
    return sup < epsilon


def freeze_coefficients(a: SymbolComponent, lambda0) -> SymbolComponent:
    """Replace direction-dependent coefficients by their values in the direction of lambda0."""
    if not a.holomorphic:
        raise NotHolomorphic("only holomorphic components have constant coefficients")
    if a.shape != (1, 1):
        raise ShapeMismatch("freezing applies to scalar components")
    phi0 = a.sector.angle(lambda0)
    out = {}
    for (al, s, k), c in a.p.items():
        _add_into(out, (al, s, 0), c * cmath.exp(1j * k * phi0))
    return replace(a, p=_prune(out))


def with_direction_coefficient(a: SymbolComponent, coef: DirectionCoefficient, key=None) -> SymbolComponent:
    """Multiply the monomial ``key`` (default: all of p) by a direction coefficient."""
    out = {}
    for (al, s, k), c in a.p.items():
        if key is not None and (al, s) != tuple(key):
            _add_into(out, (al, s, k), c)
            continue
        for k2, c2 in coef.modes.items():
            _add_into(out, (al, s, k + k2), c @ c2 if np.ndim(c2) == 2 and c.shape[1] == c2.shape[0] else c * c2)
    return replace(a, p=_prune(out))


def asymptotic_sum(parts) -> SymbolExpansion:
    """Merge expansions, adding components of equal order."""
    comps = [c for e in parts for c in (e.components if isinstance(e, SymbolExpansion) else (e,))]
    if not comps:
        return SymbolExpansion(components=())
    sec = comps[0].sector
    for c in comps:
        if not c.sector.same(sec):
            raise SectorMismatch("expansions live on different sectors")
    radii = {}
    for e in parts:
        if isinstance(e, SymbolExpansion) and e.radii:
            for c, r in zip(e.components, e.radii):
                radii[float(c.order)] = max(radii.get(float(c.order), 0.0), r)
    by_order = {}
    for c in comps:
        key = next((k for k in by_order if math.isclose(float(k), float(c.order), abs_tol=1e-12)), c.order)
        by_order[key] = c if key not in by_order else add_same_order(by_order[key], c)
    orders = sorted(by_order, key=float, reverse=True)
    out = tuple(by_order[o] for o in orders)
    r = tuple(radii.get(float(o), 0.0) for o in orders) if radii else ()
    return SymbolExpansion(components=out, radii=r)


def from_zeta_series(zs) -> SymbolExpansion:
    """Components of the projection expansion in the variable zeta.

    Order nu = m * exponent; phases Re(sigma_k)/m; L^s/m^s from (log zeta / m)^s.
    Negative log powers are cleared by multiplying numerator and denominator.
    """
    m = zs.m
    sector = Sector(0.0, float(zs.sector[1]))
    phases = tuple(Fraction(s) / m if isinstance(m, Fraction) else float(s) / float(m) for s in zs.sigma_re)
    mf = float(m)
    qz = {}
    for ex, lp, c in zs.q:
        _add_into(qz, (tuple(ex), lp, 0), complex(c) / mf ** lp)
    comps = []
    for tm in zs.terms:
        p = {}
        for ex, lp, c in tm.monomials:
            _add_into(p, (tuple(ex), lp, 0), la.float_array(c) / mf ** lp)
        q = {((0,) * len(phases), 0, 0): 1 + 0j}
        for _ in range(tm.denom_power):
            q = _mul(q, qz, lambda x, y: x * y)
        low = min([k[1] for k in p] + [k[1] for k in q] + [0])
        if low < 0:
            p = {(a, s - low, k): c for (a, s, k), c in p.items()}
            q = {(a, s - low, k): c for (a, s, k), c in q.items()}
        order = tm.exponent * m
        comps.append(SymbolComponent(m=m, order=order, phases=phases, p=_prune(p), q=q,
                                     shape=(zs.series.n, zs.series.n), sector=sector))
    comps = [c for c in comps if not c.is_zero()]
    return SymbolExpansion(components=tuple(comps))
