import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grassflow import linalg as la
from grassflow import spectral as sp
from grassflow.errors import NotNilpotent, ZeroSubspace
from grassflow.generators import random_instance
from grassflow.linalg import GaussianRational as GR, Subspace
from grassflow.shadow import (LaurentPolyMap, basic_lemma, level_split, nilpotent_series, shadow,
                              verify_shadow)


def ex(rows):
    return la.matrix(rows, True)


def span(*vecs):
    return Subspace(la.matrix([list(v) for v in vecs], True).T.copy(), True)


def shift(k):
    n = np.zeros((k, k), dtype=int)
    for i in range(k - 1):
        n[i, i + 1] = 1
    return ex(n.tolist())


def e6(i):
    v = [0] * 6
    v[i] = 1
    return v


# -- Laurent polynomial maps

def test_zero_map_has_no_order():
    z = LaurentPolyMap.zero((2, 2), True)
    assert z.is_zero()
    with pytest.raises(ValueError):
        z.ord()


def test_nilpotent_series_is_exponential():
    e = nilpotent_series(shift(3))
    assert e.ord() == 2
    assert la.is_zero(e.coeff(2) - ex([[0, 0, GR("1/2")], [0, 0, 0], [0, 0, 0]]))


# -- basic lemma

def test_single_chain_block():
    gd = basic_lemma(span((0, 1, 0)), shift(3))
    ((j, m), step), = gd.steps.items()
    assert (j, m) == (0, 0) and gd.degrees == [1]
    assert step.n == 1
    assert la.is_zero(step.P.coeff(0) @ step.basis - step.basis)
    assert la.is_zero(step.G @ step.basis - ex([[1], [0], [0]]))
    assert step.V == span((1, 0, 0))


def test_example_two_chains():
    W = span(e6(1), e6(5), [0, 0, 1, 0, 1, 0])
    nil = la.zeros((6, 6), True)
    nil[:3, :3] = shift(3)
    nil[3:, 3:] = shift(3)
    gd = basic_lemma(W, nil)
    assert gd.degrees == [1, 2]
    st11 = gd.steps[(1, 1)]
    assert st11.W == span([0, 0, 1, 0, 1, 0])
    w = st11.basis
    assert st11.n == 1
    assert la.is_zero(st11.corrections[(0, 0)] @ w - ex([[0], [GR("-1/2")], [0], [0], [0], [0]]))
    assert la.is_zero(st11.P.coeff(1) @ w - ex([[0], [GR("-1/2")], [0], [0], [0], [0]]))
    assert la.is_zero(st11.G @ w - ex([[0], [GR("1/2")], [0], [1], [0], [0]]))


def test_zero_nilpotent():
    gd = basic_lemma(span((1, 2, 0), (0, 0, 1)), la.zeros((3, 3), True))
    ((key, step),) = gd.steps.items()
    assert key == (0, 0) and gd.degrees == [0] and step.n == 0
    assert la.is_zero(step.G @ step.basis - step.basis)


def test_basic_lemma_errors():
    with pytest.raises(ZeroSubspace):
        basic_lemma(Subspace.zero(2, True), shift(2))
    with pytest.raises(NotNilpotent):
        basic_lemma(span((1, 0)), la.eye(2, True))


@pytest.mark.parametrize("seed", range(12))
def test_lemma_invariants_random(seed):
    inst = random_instance(seed)
    fcs = shadow(inst.D, inst.sd)
    for gd in fcs.decompositions:
        for j in range(len(gd.degrees)):
            ns = [gd.steps[(jj, m)].n for (jj, m) in gd.steps if jj == j]
            assert ns[0] == gd.degrees[j]
            assert all(a > b >= 0 for a, b in zip(ns, ns[1:]))
        for step in gd.steps.values():
            q = nilpotent_series(gd.nilpotent) @ step.P
            assert q.ord() == step.n
            assert la.is_zero(q.coeff(step.n) - step.G)
        images = np.hstack([s.G @ s.basis for s in gd.steps.values()])
        assert la.rank(images) == gd.W.dim
    assert fcs.D_inf.dim == inst.D.dim


# -- levels

def test_level_split_one_level():
    sd = sp.spectral_decompose(ex([[1, 0], [0, 0]]))
    (piece,) = level_split(span((1, 1)), sd)
    assert piece.mu == 1 and piece.D_mu == span((1, 1))


def test_level_split_two_levels():
    sd = sp.spectral_decompose(ex([[1, 0], [0, 0]]))
    pieces = level_split(span((1, 0), (0, 1)), sd)
    assert [p.mu for p in pieces] == [1, 0]
    assert pieces[0].D_mu == span((1, 0)) and pieces[1].D_mu == span((0, 1))


# -- frame curves

def test_shadow_nilpotent():
    sd = sp.spectral_decompose(shift(2))
    fcs = shadow(span((0, 1)), sd)
    (c,) = fcs.curves
    assert c.order == 1
    assert la.is_zero(c.g.coeff(0) - ex([[1], [0]]))
    assert la.is_zero(c.g.coeff(-1) - ex([[0], [1]]))
    assert fcs.D_inf == span((1, 0))
    assert np.allclose(fcs.frame(10.0), [[1], [0.1]])


def test_shadow_eigenvectors():
    sd = sp.spectral_decompose(ex([[2, 0, 0], [0, [0, 1], 0], [0, 0, -1]]))
    D = span((1, 0, 0), (0, 1, 0))
    fcs = shadow(D, sd)
    assert fcs.D_inf == D
    assert all(not c.tails and c.g.ord() == 0 and c.g.low() == 0 for c in fcs.curves)


def test_shadow_full_space():
    inst = random_instance(5)
    fcs = shadow(Subspace.full(inst.sd.n, True), inst.sd)
    assert fcs.D_inf.dim == inst.sd.n


@pytest.mark.parametrize("seed", range(8))
def test_frame_spans_flow(seed):
    from grassflow import oracle
    inst = random_instance(seed)
    fcs = shadow(inst.D, inst.sd)
    for t in (20.0, complex(20, 0.5)):
        assert oracle.flow_gap(inst.sd, inst.D, fcs.frame(t), t) <= 1e-8


def test_verify_shadow_eigenvector():
    sd = sp.spectral_decompose(ex([[[0, 1], 0], [0, -1]]))
    D = span((1, 0))
    rep = verify_shadow(shadow(D, sd), sd, 0.0, [10, 100, 1000])
    assert rep.passed and max(g for _, g in rep.samples) <= 1e-15


@pytest.mark.parametrize("im", [0.0, 1.0])
def test_verify_shadow_nilpotent_rate(im):
    sd = sp.spectral_decompose(shift(2))
    ts = [complex(x, im) for x in (10, 100, 1000)]
    rep = verify_shadow(shadow(span((0, 1)), sd), sd, 1.0, ts)
    assert rep.passed
    gaps = [g for _, g in rep.samples]
    for t, g in zip(ts, gaps):
        assert g == pytest.approx(1 / abs(math.sqrt(1 + abs(t) ** 2)), rel=1e-3)
    assert gaps[0] / gaps[1] == pytest.approx(10, rel=0.02)
    assert rep.exponent == pytest.approx(1.0, abs=0.02)


@given(st.integers(0, 200))
def test_dim_preserved(seed):
    inst = random_instance(seed, n_max=6)
    assert shadow(inst.D, inst.sd).D_inf.dim == inst.D.dim
