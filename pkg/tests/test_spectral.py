import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grassflow import linalg as la
from grassflow import spectral as sp
from grassflow.errors import PositiveGenerator, SpectrumHintInconsistent, StripViolation
from grassflow.generators import random_instance
from grassflow.linalg import GaussianRational as GR


def ex(rows):
    return la.matrix(rows, True)


def test_diag_float():
    sd = sp.spectral_decompose(np.diag([1.0, 2.0]))
    assert sorted(complex(v).real for v in sd.eigenvalues) == [1.0, 2.0]
    assert la.is_zero(sd.nilpotent)
    assert la.is_zero(sd.a_prime)
    for b in sd.blocks:
        k = int(round(complex(b.value).real)) - 1
        expect = np.zeros((2, 2))
        expect[k, k] = 1
        assert np.allclose(la.float_array(b.projection), expect)


def test_nilpotent_exact():
    a = ex([[0, 1], [0, 0]])
    sd = sp.spectral_decompose(a)
    (b,) = sd.blocks
    assert b.value == la.ZERO
    assert la.is_zero(b.projection - la.eye(2, True))
    assert la.is_zero(b.nilpotent - a)
    assert la.is_zero(sd.a_prime)


def test_triangular_with_imaginary_block():
    a = ex([[[0, 1], 1, 0], [0, [0, 1], 0], [0, 0, -1]])
    sd = sp.spectral_decompose(a)
    by = {str(b.value): b for b in sd.blocks}
    assert set(by) == {"1i", "-1"}
    assert la.is_zero(by["1i"].projection - ex([[1, 0, 0], [0, 1, 0], [0, 0, 0]]))
    assert la.is_zero(by["1i"].nilpotent - ex([[0, 1, 0], [0, 0, 0], [0, 0, 0]]))
    assert la.is_zero(sd.a_prime - ex([[[0, 1], 0, 0], [0, [0, 1], 0], [0, 0, 0]]))


def test_bad_hint():
    with pytest.raises(SpectrumHintInconsistent):
        sp.spectral_decompose(ex([[1, 1], [0, 2]]) + ex([[0, 0], [1, 0]]), hint=[(GR(5), 2)])


@pytest.mark.parametrize("m, sigma, chains, value", [
    (2, GR(0), (1,), GR(-1)),
    (2, GR(0, "1/2"), (1,), GR("-1/2")),
    (1, GR("1/4"), (2,), GR("-1/2", "-1/4")),
])
def test_boundary_eigenvalues(m, sigma, chains, value):
    spec = sp.BoundarySpectrumSpec(m=Fraction(m), sigmas=((sigma, chains),))
    sd = sp.from_boundary_spectrum(spec)
    assert sd.eigenvalues == [value]
    assert sd.blocks[0].multiplicity == sum(chains)
    assert sp.boundary_sigma(value, Fraction(m)) == sigma


def test_boundary_chain_is_copied():
    spec = sp.BoundarySpectrumSpec(m=Fraction(1), sigmas=((GR("1/4"), (2,)),))
    sd = sp.from_boundary_spectrum(spec)
    assert la.is_zero(sd.nilpotent - ex([[0, 1], [0, 0]]))


def test_strip_violation():
    with pytest.raises(StripViolation):
        sp.BoundarySpectrumSpec(m=Fraction(2), sigmas=((GR(0, 1), (1,)),))


def test_boundary_skew_part_spectrum():
    spec = sp.BoundarySpectrumSpec(m=Fraction(2), sigmas=((GR(1, "1/4"), (1,)), (GR(-3, 0), (2,))))
    sd = sp.from_boundary_spectrum(spec)
    diag = sorted(sd.a_prime[i, i].im for i in range(sd.n))
    assert diag == sorted([Fraction(-1), Fraction(3), Fraction(3)])


def test_exp_flow_identity_at_zero():
    sd = random_instance(3).sd
    assert np.allclose(sp.exp_flow(sd, 0), np.eye(sd.n))


def test_exp_flow_nilpotent():
    sd = sp.spectral_decompose(ex([[0, 1], [0, 0]]))
    assert np.allclose(sp.exp_flow(sd, 2.5), [[1, 2.5], [0, 1]])


def test_exp_flow_diag():
    sd = sp.spectral_decompose(np.diag([1j, -1.0]))
    assert np.allclose(sp.exp_flow(sd, math.pi), np.diag([-1, math.exp(-math.pi)]))


@pytest.mark.parametrize("seed", range(5))
def test_reconstruction_exact(seed):
    sd = random_instance(seed).sd
    res = sd.residuals()
    assert all(v == 0 for v in res.values()), res


@pytest.mark.parametrize("seed", range(5))
def test_float_decomposition_matches_exact(seed):
    # float eigenvalues of long Jordan chains split by eps^(1/k); keep chains short
    sd = random_instance(seed, n_max=6, max_chain=1).sd
    fl = sp.spectral_decompose(la.float_array(sd.a))
    res = fl.residuals()
    assert res["reconstruction"] <= 1e-10 * max(1.0, la.scale_of(sd.a)) * 10
    assert len(fl.blocks) == len(sd.blocks)


def test_float_two_chain_is_clustered():
    a = la.float_array(ex([[2, 1, 0], [0, 2, 0], [0, 0, -1]]))
    sd = sp.spectral_decompose(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]]) @ a @ np.linalg.inv(
        np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=float)))
    assert sorted(b.multiplicity for b in sd.blocks) == [1, 2]
    assert sd.residuals()["reconstruction"] <= 1e-9


@given(st.integers(0, 40), st.floats(-3, 3), st.floats(-3, 3), st.floats(-0.5, 0.5))
def test_group_law(seed, s, t, y):
    sd = random_instance(seed, n_max=5).sd
    lhs = sp.exp_flow(sd, complex(s + t, y))
    rhs = sp.exp_flow(sd, s) @ sp.exp_flow(sd, complex(t, y))
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(1.0, np.linalg.norm(lhs))


@given(st.integers(0, 40), st.floats(-2, 2))
def test_projections_commute_with_flow(seed, t):
    sd = random_instance(seed, n_max=5).sd
    e = sp.exp_flow(sd, t)
    for b in sd.blocks:
        p = la.float_array(b.projection)
        assert np.allclose(p @ e, e @ p, atol=1e-9 * max(1.0, np.abs(e).max()))


def test_semigroup_examples():
    assert sp.enumerate_real_semigroup([], Fraction(-3)) == [0]
    assert sp.enumerate_real_semigroup([Fraction(-1), Fraction(-1, 2)], Fraction(-2)) == \
        [0, Fraction(-1, 2), -1, Fraction(-3, 2), -2]
    assert sp.enumerate_real_semigroup([Fraction(-1)], Fraction(-2), include_neg_integers=True) == [0, -1, -2]


def test_semigroup_rejects_positive():
    with pytest.raises(PositiveGenerator):
        sp.enumerate_real_semigroup([Fraction(1, 2)], Fraction(-1))


@given(st.lists(st.fractions(Fraction(-3), Fraction(-1, 4), max_denominator=4), max_size=3),
       st.fractions(Fraction(-4), Fraction(-1, 2), max_denominator=2))
def test_semigroup_closed(gens, cutoff):
    out = sp.enumerate_real_semigroup(gens, cutoff)
    assert out == sorted(set(out), reverse=True)
    s = set(out)
    for a in out:
        for b in out:
            if a + b >= cutoff:
                assert a + b in s


def spec(m, sigmas):
    return sp.BoundarySpectrumSpec(m=Fraction(m), sigmas=tuple((la.scalar(s), (1,)) for s in sigmas))


def test_phase_sets():
    assert sp.phase_set(spec(2, [["0", "1/4"], ["0", "-1/4"]])) == [0]
    assert sp.phase_set(spec(2, [1, [1, "1/4"]])) == [Fraction(1, 2)]
    assert sp.phase_set(spec(1, [0, 1])) == [0, 1]


def test_trace_exponents_single_root():
    out = sp.trace_exponents(spec(1, [0]), 0, Fraction(-3))
    assert [nu for nu, _ in out] == [0, -1, -2, -3]


def test_trace_exponent_generators_pairing():
    assert sp.exponent_generators(spec(2, [1, ["0", "1/4"]])) == [0, Fraction(-1, 4)]
