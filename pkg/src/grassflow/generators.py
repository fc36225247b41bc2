"""Pseudo-random exact instances for tests and acceptance runs."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg as la
from .linalg import Subspace
from .spectral import SpectralDecomposition, from_chains

REAL_PARTS = (Fraction(0), Fraction(-1, 2), Fraction(-1), Fraction(-3, 2))
IMAG_PARTS = (Fraction(0), Fraction(1), Fraction(-1), Fraction(2))


@dataclass
class RandomInstance:
    sd: SpectralDecomposition
    D: Subspace
    K: Subspace
    entries: list            # (lambda, chains) as fed to from_chains
    seed: int


def unimodular(rng: np.random.Generator, n: int, rounds: int = 2, bound: int = 1) -> np.ndarray:
    """Integer matrix with determinant 1 and small entries."""
    s = np.eye(n, dtype=np.int64)
    for _ in range(rounds):
        lower = np.tril(rng.integers(-bound, bound + 1, size=(n, n)), -1) + np.eye(n, dtype=np.int64)
        upper = np.triu(rng.integers(-bound, bound + 1, size=(n, n)), 1) + np.eye(n, dtype=np.int64)
        s = s @ lower @ upper
    return s


def random_spectrum(rng, n: int, real_parts=REAL_PARTS, imag_parts=IMAG_PARTS, max_chain: int = 3):
    """List of (eigenvalue, chain lengths) with total size n."""
    out = {}
    left = n
    while left:
        lam = (real_parts[rng.integers(len(real_parts))], imag_parts[rng.integers(len(imag_parts))])
        k = int(rng.integers(1, min(max_chain, left) + 1))
        out.setdefault(lam, []).append(k)
        left -= k
    return [(la.GaussianRational(re, im), lengths) for (re, im), lengths in out.items()]


def chains_in_basis(spectrum, s: np.ndarray):
    """Jordan chains whose vectors are the columns of ``s`` taken in order."""
    entries, col = [], 0
    for lam, lengths in spectrum:
        chains = []
        for k in lengths:
            chains.append([[int(x) for x in s[:, col + i]] for i in range(k)])
            col += k
        entries.append((lam, chains))
    return entries


def random_subspace(rng, n: int, d: int, bound: int = 2) -> Subspace:
    while True:
        m = rng.integers(-bound, bound + 1, size=(n, d))
        sub = Subspace(la.exact_array(m.tolist()), True)
        if sub.dim == d:
            return sub


def random_instance(seed: int, n_min: int = 2, n_max: int = 8, d: int | None = None,
                    real_parts=REAL_PARTS, imag_parts=IMAG_PARTS, max_chain: int = 3,
                    spectral_coordinates: bool = False) -> RandomInstance:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    spectrum = random_spectrum(rng, n, real_parts, imag_parts, max_chain)
    s = np.eye(n, dtype=np.int64) if spectral_coordinates else unimodular(rng, n)
    entries = chains_in_basis(spectrum, s)
    sd = from_chains(entries, exact=True)
    if d is None:
        d = int(rng.integers(1, n)) if n > 1 else 1
    D = random_subspace(rng, n, d)
    K = random_subspace(rng, n, n - d) if n - d > 0 else Subspace.zero(n, True)
    return RandomInstance(sd=sd, D=D, K=K, entries=entries, seed=seed)
