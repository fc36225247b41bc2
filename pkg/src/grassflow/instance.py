"""JSON instance files (schema 1).

Rationals are written as strings "p/q" (or integers), complex numbers as
[re, im] pairs.  Exactly one generator form is allowed: ``matrix``,
``spectral`` or ``boundary_spectrum``; exact mode needs one of the last two.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import linalg as la
from .errors import ValidationError
from .linalg import Subspace
from .spectral import (BoundarySpectrumSpec, SpectralDecomposition, from_boundary_spectrum, from_chains,
                       spectral_decompose)

SCHEMA_VERSION = 1
GENERATOR_FORMS = ("matrix", "spectral", "boundary_spectrum")
DEFAULT_VERIFY_TIMES = (20, 40, 80, 160)


class InstanceError(ValidationError):
    """Validation failure with the JSON location that caused it."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(eq=False)
class Instance:
    name: str
    exact: bool
    sd: SpectralDecomposition
    D: Subspace
    K: Subspace | None
    relations: list | None
    theta: float
    sector: tuple | None          # (lambda0, half-angle)
    grid: list
    verify_times: list
    cutoff: object
    neumann_cap: int
    tolerances: dict
    ell: int | None
    trace_cutoff: object
    boundary: BoundarySpectrumSpec | None
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def mode(self) -> str:
        return "exact" if self.exact else "float"

    @property
    def digest(self) -> str:
        return instance_digest(self.raw)


def instance_digest(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _scalar(x, exact: bool, where: str):
    try:
        return la.scalar(x) if exact else la.float_scalar(x)
    except (TypeError, ValueError) as e:
        raise InstanceError(where, str(e) or f"bad number {x!r}") from None


def _real(x, exact: bool, where: str):
    if isinstance(x, bool):
        raise InstanceError(where, f"expected a number, got {x!r}")
    if exact:
        if isinstance(x, float):
            raise InstanceError(where, "floats are not allowed in exact mode; write \"p/q\"")
        try:
            return Fraction(x) if not isinstance(x, str) else Fraction(x.strip())
        except (TypeError, ValueError):
            raise InstanceError(where, f"not a rational number: {x!r}") from None
    try:
        return float(Fraction(x)) if isinstance(x, str) else float(x)
    except (TypeError, ValueError):
        raise InstanceError(where, f"not a real number: {x!r}") from None


def _vectors(vs, n: int, exact: bool, where: str) -> Subspace:
    if not isinstance(vs, list):
        raise InstanceError(where, "expected a list of vectors")
    if not vs:
        return Subspace.zero(n, exact)
    rows = []
    for i, v in enumerate(vs):
        if not isinstance(v, list) or len(v) != n:
            raise InstanceError(f"{where}[{i}]", f"vector must have {n} entries")
        rows.append([_scalar(x, exact, f"{where}[{i}][{j}]") for j, x in enumerate(v)])
    cols = la.matrix(rows, exact).T.copy()
    sub = Subspace(cols, exact)
    if sub.dim != len(vs):
        raise InstanceError(where, "vectors are linearly dependent")
    return sub


def _generator(gen: dict, exact: bool):
    if not isinstance(gen, dict):
        raise InstanceError("generator", "expected an object")
    forms = [f for f in GENERATOR_FORMS if f in gen]
    if len(forms) != 1:
        raise InstanceError("generator", f"exactly one of {', '.join(GENERATOR_FORMS)} is required")
    form = forms[0]
    if form == "matrix":
        if exact:
            raise InstanceError("generator.matrix", "exact mode needs the spectral or boundary_spectrum form")
        rows = gen["matrix"]
        if not isinstance(rows, list) or not rows or any(not isinstance(r, list) or len(r) != len(rows) for r in rows):
            raise InstanceError("generator.matrix", "expected a square list of rows")
        a = la.matrix([[_scalar(x, False, f"generator.matrix[{i}][{j}]") for j, x in enumerate(r)]
                       for i, r in enumerate(rows)], False)
        return spectral_decompose(a), None
    if form == "spectral":
        entries = []
        for i, e in enumerate(gen["spectral"]):
            w = f"generator.spectral[{i}]"
            if not isinstance(e, dict) or "eigenvalue" not in e or "chains" not in e:
                raise InstanceError(w, "needs 'eigenvalue' and 'chains'")
            lam = _scalar(e["eigenvalue"], exact, f"{w}.eigenvalue")
            chains = []
            for c, chain in enumerate(e["chains"]):
                if not isinstance(chain, list) or not chain:
                    raise InstanceError(f"{w}.chains[{c}]", "a chain is a nonempty list of vectors")
                chains.append([[_scalar(x, exact, f"{w}.chains[{c}][{k}][{j}]") for j, x in enumerate(v)]
                               for k, v in enumerate(chain)])
            entries.append((lam, chains))
        return from_chains(entries, exact=exact), None
    bs = gen["boundary_spectrum"]
    w = "generator.boundary_spectrum"
    if not isinstance(bs, dict) or "m" not in bs or "sigmas" not in bs:
        raise InstanceError(w, "needs 'm' and 'sigmas'")
    m = _real(bs["m"], exact, f"{w}.m")
    sigmas = []
    for i, s in enumerate(bs["sigmas"]):
        if not isinstance(s, dict) or "sigma" not in s:
            raise InstanceError(f"{w}.sigmas[{i}]", "needs 'sigma'")
        sig = _scalar(s["sigma"], exact, f"{w}.sigmas[{i}].sigma")
        chains = s.get("chains", [1])
        if not isinstance(chains, list) or any(not isinstance(c, int) or c < 1 for c in chains):
            raise InstanceError(f"{w}.sigmas[{i}].chains", "chain lengths must be positive integers")
        sigmas.append((sig, tuple(chains)))
    spec = BoundarySpectrumSpec(m=m, sigmas=tuple(sigmas), exact=exact)
    return from_boundary_spectrum(spec), spec


def _grid(g, theta: float) -> list:
    from .omega import default_grid
    if g is None:
        return default_grid(theta)
    if not isinstance(g, dict):
        raise InstanceError("grid", "expected an object")
    lo = float(g.get("T0", 10.0))
    hi = float(g.get("T1", 1e4))
    count = int(g.get("count", 32))
    if not (0 < lo < hi) or count < 2:
        raise InstanceError("grid", "need 0 < T0 < T1 and count >= 2")
    ims = g.get("im_levels")
    ims = ([0.0] if theta == 0 else [-theta, 0.0, theta]) if ims is None else [float(y) for y in ims]
    for y in ims:
        if abs(y) > theta + 1e-12:
            raise InstanceError("grid.im_levels", f"level {y} is outside the strip |Im t| <= {theta}")
    return [complex(x, y) for y in ims for x in _logspace(lo, hi, count)]


def _logspace(lo, hi, count):
    a, b = math.log10(lo), math.log10(hi)
    return [10 ** (a + (b - a) * i / (count - 1)) for i in range(count)]


def parse_instance(raw: dict) -> Instance:
    if not isinstance(raw, dict):
        raise InstanceError("$", "instance must be a JSON object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise InstanceError("schema", f"expected schema {SCHEMA_VERSION}, got {raw.get('schema')!r}")
    mode = raw.get("mode", "exact")
    if mode not in ("exact", "float"):
        raise InstanceError("mode", "must be 'exact' or 'float'")
    exact = mode == "exact"
    tolerances = raw.get("tolerances", {}) or {}
    if not isinstance(tolerances, dict):
        raise InstanceError("tolerances", "expected an object")
    with la.use_tolerances(**{k: float(v) for k, v in tolerances.items()}):
        sd, spec = _generator(raw.get("generator"), exact)
    n = sd.n
    if "subspace_D" not in raw:
        raise InstanceError("subspace_D", "required")
    D = _vectors(raw["subspace_D"], n, exact, "subspace_D")
    if D.dim == 0:
        raise InstanceError("subspace_D", "D must be nonzero")
    K = _vectors(raw["subspace_K"], n, exact, "subspace_K") if "subspace_K" in raw else None
    if K is not None and D.dim + K.dim != n:
        raise InstanceError("subspace_K", f"dim D + dim K must be {n}")
    rel = raw.get("declared_relations")
    if rel is not None and (not isinstance(rel, list) or any(not isinstance(r, list) for r in rel)):
        raise InstanceError("declared_relations", "expected a list of integer vectors")
    sector = None
    if "sector" in raw:
        s = raw["sector"]
        if not isinstance(s, dict) or "lambda0" not in s or "half_angle" not in s:
            raise InstanceError("sector", "needs 'lambda0' and 'half_angle'")
        lam0 = la.float_scalar(s["lambda0"])
        half = float(Fraction(s["half_angle"]) if isinstance(s["half_angle"], str) else s["half_angle"])
        if lam0 == 0 or not 0 < half < math.pi:
            raise InstanceError("sector", "lambda0 must be nonzero and 0 < half_angle < pi")
        sector = (lam0, half)
    if "strip_theta" in raw:
        theta = float(_real(raw["strip_theta"], False, "strip_theta"))
    elif sector is not None:
        m = float(spec.m) if spec is not None else 1.0
        theta = sector[1] / m
    else:
        theta = 0.0
    if theta < 0:
        raise InstanceError("strip_theta", "must be nonnegative")
    cutoff = _real(raw.get("cutoff", -3), exact, "cutoff")
    if cutoff >= 0:
        raise InstanceError("cutoff", "must be negative")
    vt = raw.get("verify_times", list(DEFAULT_VERIFY_TIMES))
    verify_times = [la.float_scalar(t) for t in vt]
    ell = raw.get("ell")
    trace_cutoff = _real(raw["trace_cutoff"], exact, "trace_cutoff") if "trace_cutoff" in raw else None
    return Instance(name=str(raw.get("name", "unnamed")), exact=exact, sd=sd, D=D, K=K, relations=rel,
                    theta=theta, sector=sector, grid=_grid(raw.get("grid"), theta), verify_times=verify_times,
                    cutoff=cutoff, neumann_cap=int(raw.get("neumann_cap", 12)), tolerances=tolerances,
                    ell=int(ell) if ell is not None else None, trace_cutoff=trace_cutoff, boundary=spec, raw=raw)


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise InstanceError(str(path), f"cannot read file ({e.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError(f"{path}:{e.lineno}:{e.colno}", e.msg) from None
    return parse_instance(raw)


def shipped_instances() -> dict:
    """Name -> path of the instance files bundled with the package."""
    root = Path(__file__).parent / "data"
    return {p.stem: p for p in sorted(root.glob("*.json"))}
