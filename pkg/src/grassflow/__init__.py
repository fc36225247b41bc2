"""Asymptotics of linear flows on Grassmannians.

For a matrix a and a subspace D, the subspace e^{t a} D settles onto an
oscillating limit; this package computes that limit, the torus it sweeps
out, whether it stays away from a complement K, and the asymptotic series of
the projection onto e^{t a} D along K.  Exact mode works over Gaussian
rationals; float mode uses complex128 with rank decisions by SVD.
"""
from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    "GaussianRational": "linalg",
    "Subspace": "linalg",
    "gap_distance": "linalg",
    "project_along": "linalg",
    "projection_along": "linalg",
    "spectral_decompose": "spectral",
    "from_chains": "spectral",
    "from_boundary_spectrum": "spectral",
    "BoundarySpectrumSpec": "spectral",
    "exp_flow": "spectral",
    "trace_exponents": "spectral",
    "basic_lemma": "shadow",
    "shadow": "shadow",
    "verify_shadow": "shadow",
    "omega_limit": "omega",
    "variety_membership": "omega",
    "minimal_growth_check": "omega",
    "projection_series": "projasym",
    "evaluate_series": "projasym",
    "to_zeta_convention": "projasym",
    "SymbolComponent": "symalg",
    "SymbolExpansion": "symalg",
    "compose": "symalg",
    "differentiate": "symalg",
    "evaluate_symbol": "symalg",
    "vanishing_test": "symalg",
    "asymptotic_sum": "symalg",
    "load_instance": "instance",
    "series_to_json": "serialize",
    "series_from_json": "serialize",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'grassflow' has no attribute {name!r}")
    value = getattr(import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
