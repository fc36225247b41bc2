"""Brute-force reference values computed in high precision.

Nothing here uses the shadow construction or the series: e^{t a} comes from
the spectral projections and scalar exponentials, subspaces are
orthonormalised with modified Gram-Schmidt at enough digits to survive the
exponential spread of the flow, and projections are solved directly.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np

from .linalg import Subspace
from .spectral import SpectralDecomposition, exp_flow, to_mp_matrix

BASE_DIGITS = 30


def required_dps(sd: SpectralDecomposition, t, extra_digits: int = 0) -> int:
    """Digits needed so that e^{t a} keeps every eigen-direction resolved."""
    t = complex(t)
    mus = [float(m) for m in sd.mu_values]
    phases = [float(b.phase) for b in sd.blocks]
    spread = abs(t.real) * (max(mus) - min(mus)) + abs(t.imag) * (max(phases) - min(phases))
    poly = sd.n * math.log10(abs(t) + 2.0)
    return int(BASE_DIGITS + extra_digits + spread / math.log(10) + poly)


def _mgs(cols, dps):
    with mpmath.workdps(dps):
        out = []
        for v in cols:
            for _ in range(2):
                for q in out:
                    c = sum((mpmath.conj(q[i]) * v[i] for i in range(len(v))), mpmath.mpc(0))
                    v = [v[i] - c * q[i] for i in range(len(v))]
            nrm = mpmath.sqrt(sum((abs(x) ** 2 for x in v), mpmath.mpf(0)))
            out.append([x / nrm for x in v])
        return out


def flow_frame(sd: SpectralDecomposition, basis: np.ndarray, t, dps: int):
    """Columns of e^{t a} basis as an mpmath matrix at ``dps`` digits."""
    with mpmath.workdps(dps):
        e = exp_flow(sd, t, dps=dps)
        return e * to_mp_matrix(basis)


def flow_subspace(sd: SpectralDecomposition, d: Subspace, t) -> np.ndarray:
    """Orthonormal complex128 basis of e^{t a} D."""
    dps = required_dps(sd, t)
    with mpmath.workdps(dps):
        v = flow_frame(sd, d.basis, t, dps)
        cols = [[v[i, k] for i in range(v.rows)] for k in range(v.cols)]
        q = _mgs(cols, dps)
        return np.array([[complex(x) for x in col] for col in q], dtype=complex).T.reshape(sd.n, d.dim)


def flow_gap(sd: SpectralDecomposition, d: Subspace, target: np.ndarray, t) -> float:
    """Gap between e^{t a} D and the span of the columns of ``target``."""
    q = flow_subspace(sd, d, t)
    s = Subspace(np.asarray(target, dtype=complex), False)
    p = q @ q.conj().T - s.basis @ s.basis.conj().T
    return float(np.linalg.norm(p, 2))


def projection(sd: SpectralDecomposition, d: Subspace, k: Subspace, t, extra_digits: int = 0,
               as_mp: bool = False):
    """Projection onto e^{t a} D along K, solved directly.

    Returns a complex array, or an mpmath matrix (at the working precision
    used) when ``as_mp`` is set, so that very small residuals can be measured.
    """
    dps = required_dps(sd, t, extra_digits)
    with mpmath.workdps(dps):
        v = flow_frame(sd, d.basis, t, dps)
        u = to_mp_matrix(k.basis)
        n, dd = sd.n, d.dim
        m = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(dd):
                m[i, j] = v[i, j]
            for j in range(k.dim):
                m[i, dd + j] = u[i, j]
        minv = mpmath.inverse(m)
        top = mpmath.matrix(dd, n)
        for i in range(dd):
            for j in range(n):
                top[i, j] = minv[i, j]
        p = v * top
        if as_mp:
            return p
        return mp_to_complex(p)


def mp_to_complex(a) -> np.ndarray:
    return np.array([[complex(a[i, j]) for j in range(a.cols)] for i in range(a.rows)], dtype=complex)


def mp_norm(a) -> float:
    """Spectral norm of an mpmath matrix whose entries may be far below 1e-308."""
    top = max((abs(a[i, j]) for i in range(a.rows) for j in range(a.cols)), default=mpmath.mpf(0))
    if top == 0:
        return 0.0
    return float(top) * float(np.linalg.norm(mp_to_complex(a / top), 2))


def mp_log_norm(a) -> float:
    """Natural log of the spectral norm; usable for residuals below double range."""
    top = max((abs(a[i, j]) for i in range(a.rows) for j in range(a.cols)), default=mpmath.mpf(0))
    if top == 0:
        return -math.inf
    scaled = mp_to_complex(a / top)
    return math.log(float(np.linalg.norm(scaled, 2))) + float(mpmath.log(top))


def mp_residual_log(a, b, dps: int) -> float:
    """Natural log of ||a - b|| with the difference formed at ``dps`` digits."""
    with mpmath.workdps(dps):
        return mp_log_norm(a - b)
