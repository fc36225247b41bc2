import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from grassflow import linalg as la
from grassflow import oracle
from grassflow.errors import (ConventionMismatch, CutoffUnreachable, DenominatorTooSmall, GrassflowError,
                              ShadowNotTransversalToK, ValidationError)
from grassflow.exppoly import ExpPolyMatrix
from grassflow.generators import random_instance
from grassflow.linalg import GaussianRational as GR, Subspace
from grassflow.projasym import (evaluate_series, oracle_residual, projection_series, reconstruction_error,
                                split_alpha, to_zeta_convention, transition)
from grassflow.serialize import series_from_json, series_to_json
from grassflow.shadow import shadow
from grassflow.spectral import BoundarySpectrumSpec, from_boundary_spectrum, from_chains


def span(*vecs):
    return Subspace(la.matrix([list(v) for v in vecs], True).T.copy(), True)


I = GR(0, 1)


def diag(*lams):
    n = len(lams)
    eye = [[int(i == j) for j in range(n)] for i in range(n)]
    return from_chains([(la.scalar(lam), [[eye[k]]]) for k, lam in enumerate(lams)])


def nilpotent2():
    return from_chains([(GR(0), [[[1, 0], [0, 1]]])])


def eigenvector_case():
    sd = diag(GR(-1, 1), 0, -2)
    return sd, span((1, 0, 0)), span((0, 1, 1), (0, 0, 1))


def series_for(sd, D, K, **kw):
    return projection_series(shadow(D, sd), K, **kw)


def proj_along(D, K):
    b = np.hstack([la.float_array(D.basis), la.float_array(K.basis)])
    p = np.zeros((b.shape[0], b.shape[0]))
    p[:D.dim, :D.dim] = np.eye(D.dim)
    return b @ p @ np.linalg.inv(b)


# -- transition matrices

def test_transition_of_eigenvector_is_constant():
    sd, D, K = eigenvector_case()
    tr = transition(shadow(D, sd), K)
    assert tr.beta.is_zero()
    assert set(tr.alpha.terms) == {(0, (), 0)} or all(k[0] == 0 and k[2] == 0 for k in tr.alpha.terms)


def test_transition_of_nilpotent_chain():
    sd = nilpotent2()
    tr = transition(shadow(span((0, 1)), sd), span((0, 1)))
    a0, at = split_alpha(tr.alpha)
    assert at.is_zero()
    assert a0(7.0) == pytest.approx(np.array([[1.0]]))
    assert tr.beta(4.0) == pytest.approx(np.array([[0.25]]))


@pytest.mark.parametrize("t", [1.0, 3.5, 10 + 2j])
def test_transition_reconstructs_frame(t):
    sd = diag(I, 0)
    tr = transition(shadow(span((1, 1)), sd), span((1, -1)))
    assert reconstruction_error(tr, t) < 1e-12


def test_split_alpha_separates_decay():
    c = la.matrix([[1]], True)
    m = ExpPolyMatrix({(Fraction(0), (), 0): c, (Fraction(-1), (), 2): c}, (1, 1), (), True)
    a0, at = split_alpha(m)
    assert a0(5.0)[0, 0] == pytest.approx(1.0)
    assert at(5.0)[0, 0] == pytest.approx(25 * math.exp(-5))


def test_split_alpha_rejects_growth():
    c = la.matrix([[1]], True)
    m = ExpPolyMatrix({(Fraction(1), (), 0): c}, (1, 1), (), True)
    with pytest.raises(ValidationError):
        split_alpha(m)


# -- series on small examples

def test_eigenvector_series_is_the_static_projection():
    sd, D, K = eigenvector_case()
    s = series_for(sd, D, K)
    assert len(s.terms) == 1 and s.terms[0].theta == 0
    for t in (1.0, 20.0, 5 + 1j):
        assert np.allclose(evaluate_series(s, t), proj_along(D, K), atol=1e-14)


def test_nilpotent_series():
    s = series_for(nilpotent2(), span((0, 1)), span((0, 1)))
    assert s.thetas == [0]
    assert np.allclose(evaluate_series(s, 10.0), [[1, 0], [0.1, 0]], atol=1e-15)
    assert series_to_json(s)["terms"][0]["display"] == [[1, 0], ["1/t", 0]]


def test_diagonal_series_orders_and_oracle():
    sd = diag(I, 0, -1)
    D, K = span((1, 1, 1), (0, 1, 0)), span((1, 2, 3))
    s = series_for(sd, D, K)
    assert s.thetas == [0, -1, -2, -3]
    assert s.next_theta == -4
    for t in (20.0, 40 + 0.5j):
        assert oracle_residual(s, sd, D, K, t) < -4 * t.real + 5 * math.log(abs(t)) + 5


def test_phases_in_numerator_and_denominator():
    # D spanned by (1,1,0), e3 only sees theta = 0, with the phase in both parts
    sd = diag(I, 0, -1)
    s = series_for(sd, span((1, 1, 0), (0, 0, 1)), span((1, 2, 3)))
    assert s.thetas == [0] and s.next_theta is None
    assert any(any(a) for (_, a, _) in s.q)
    assert any(any(a) for (_, a, _) in s.terms[0].numerator.terms)
    t = 30 + 0.3j
    assert np.allclose(evaluate_series(s, t), oracle.projection(sd, span((1, 1, 0), (0, 0, 1)), span((1, 2, 3)), t),
                       atol=1e-12)


def test_stationary_subspace_gives_one_constant_term():
    sd = from_chains([(GR(-1), [[[1, 0, 0], [0, 1, 0]]]), (GR(0, 1), [[[0, 0, 1]]])])
    D = span((1, 0, 0), (0, 0, 1))
    s = series_for(sd, D, span((0, 1, 1)))
    assert len(s.terms) == 1
    (tm,) = s.terms
    assert tm.theta == 0 and tm.denom_power == 0
    assert set(tm.numerator.terms) == {(0, tuple(0 for _ in s.phases), 0)}


def test_denominator_floor():
    s = series_for(diag(I, 0), span((1, 1)), span((1, -1)))
    with pytest.raises(DenominatorTooSmall):
        evaluate_series(s, math.pi)
    evaluate_series(s, math.pi / 2)


def test_cutoff_unreachable():
    sd = diag(I, 0, -1)
    with pytest.raises(CutoffUnreachable):
        series_for(sd, span((1, 1, 1), (0, 1, 0)), span((1, 2, 3)), cutoff=-10, neumann_cap=2)


def test_cutoff_must_be_negative():
    sd = diag(I, 0, -1)
    with pytest.raises(ValidationError):
        series_for(sd, span((1, 1, 1), (0, 1, 0)), span((1, 2, 3)), cutoff=0)


def test_shadow_meeting_k():
    with pytest.raises(ShadowNotTransversalToK):
        series_for(diag(0, -1), span((1, 1)), span((1, 0)))


def test_truncation_drops_low_orders():
    s = series_for(diag(I, 0, -1), span((1, 1, 1), (0, 1, 0)), span((1, 2, 3)))
    tr = s.truncated(Fraction(-3, 2))
    assert tr.thetas == [0, -1] and tr.next_theta == -2


# -- zeta convention

def boundary(m, *sigmas):
    return BoundarySpectrumSpec(m=Fraction(m), sigmas=tuple((la.scalar(s), (1,)) for s in sigmas))


def test_zeta_needs_boundary_data():
    s = series_for(diag(I, 0), span((1, 1)), span((1, -1)))
    with pytest.raises(ConventionMismatch):
        to_zeta_convention(s, 1, (1, 0.5))


def test_zeta_rejects_wrong_m():
    sd = from_boundary_spectrum(boundary(2, GR(0, '1/2'), GR(0, '-1/2')))
    s = series_for(sd, span((1, 1)), span((0, 1)))
    with pytest.raises(ConventionMismatch):
        to_zeta_convention(s, 3, (1, 0.5))


def test_zeta_exponents_are_theta_over_m():
    # sigma = i/2, -i/2 with m = 2 gives eigenvalues -1/2 and -3/2
    sd = from_boundary_spectrum(boundary(2, GR(0, '1/2'), GR(0, '-1/2')))
    s = series_for(sd, span((1, 1)), span((0, 1)))
    z = to_zeta_convention(s, 2, (1, 0.5))
    assert z.exponents() == [0, Fraction(-1, 2)]
    assert z.aligned


@pytest.mark.parametrize("arg", [-0.4, 0.0, 0.4])
@pytest.mark.parametrize("radius", [1e3, 1e6, 1e12])
def test_zeta_evaluation_matches_t(arg, radius):
    sd = from_boundary_spectrum(boundary(2, GR(0, '1/2'), GR(0, '-1/2')))
    s = series_for(sd, span((1, 1)), span((0, 1)))
    z = to_zeta_convention(s, 2, (1, 0.5))
    zeta = radius * complex(math.cos(arg), math.sin(arg))
    t = complex(math.log(radius), arg) / 2
    assert np.allclose(z.evaluate(zeta), evaluate_series(s, t), rtol=0, atol=1e-12)


# -- serialisation

@pytest.mark.parametrize("seed", [1, 2, 11])
def test_json_round_trip(seed):
    ri = random_instance(seed)
    s = series_for(ri.sd, ri.D, ri.K)
    back = series_from_json(json.loads(json.dumps(series_to_json(s))))
    assert back.thetas == s.thetas and back.next_theta == s.next_theta
    for t in (40.0, 41 + 0.7j):
        a, b = evaluate_series(s, t), evaluate_series(back, t)
        assert np.linalg.norm(a - b) <= 1e-12 * max(1.0, np.linalg.norm(a))


def test_json_is_canonical():
    ri = random_instance(2)
    s = series_for(ri.sd, ri.D, ri.K)
    first = json.dumps(series_to_json(s), sort_keys=True)
    again = json.dumps(series_to_json(series_for(ri.sd, ri.D, ri.K)), sort_keys=True)
    assert first == again
    thetas = [Fraction(t["theta"]) for t in series_to_json(s)["terms"]]
    assert thetas == sorted(thetas, reverse=True)


# -- random instances against the oracle

def transversal(seed, n_max=5):
    ri = random_instance(seed, n_max=n_max)
    try:
        return ri, series_for(ri.sd, ri.D, ri.K)
    except GrassflowError:
        return ri, None


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_series_matches_oracle(seed):
    ri, s = transversal(seed)
    assume(s is not None)
    for t in (40.0, 80 + 0.5j):
        try:
            assert oracle_residual(s, ri.sd, ri.D, ri.K, t) <= math.log(1e-6)
        except DenominatorTooSmall:
            pass


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_series_is_nearly_idempotent(seed):
    ri, s = transversal(seed)
    assume(s is not None)
    try:
        p = evaluate_series(s, 60.0)
    except DenominatorTooSmall:
        assume(False)
    scale = max(1.0, np.linalg.norm(p, 2)) ** 2
    assert np.linalg.norm(p @ p - p, 2) <= 1e-8 * scale
    # range contains the flowed D
    flowed = oracle.flow_subspace(ri.sd, ri.D, 60.0)
    assert np.linalg.norm(p @ flowed - flowed, 2) <= 1e-8 * scale


@pytest.mark.parametrize("seed", [0, 1, 5, 11])
def test_residual_slope_tracks_next_order(seed):
    ri = random_instance(seed)
    s = series_for(ri.sd, ri.D, ri.K, cutoff=-2)
    logs = [oracle_residual(s, ri.sd, ri.D, ri.K, t) for t in (20.0, 40.0, 80.0)]
    slope = np.polyfit([20, 40, 80], logs, 1)[0]
    assert abs(slope / float(s.next_theta) - 1) <= 0.1


# -- ordering of the terms

def diag_instance():
    return diag(I, 0, -1), span((1, 1, 1), (0, 1, 0)), span((1, 2, 3))


def test_two_level_transition_reconstructs():
    sd = diag(I, 0)
    tr = transition(shadow(span((1, 1)), sd), span((0, 1)))
    for t in (2.0, 7.5 + 0.3j):
        assert reconstruction_error(tr, t) < 1e-12


def test_example_alpha0_is_lower_triangular(shipped):
    inst = shipped("example_basic_lemma")
    tr = transition(shadow(inst.D, inst.sd), inst.K)
    a0, at = split_alpha(tr.alpha)
    assert at.is_zero()
    for (th, alpha, s), c in a0.terms.items():
        assert s <= 0
        assert all(c[i, j] == 0 for i in range(c.shape[0]) for j in range(i + 1, c.shape[1]))
        if s == 0:
            assert la.is_zero(c - la.eye(c.shape[0], True))
    assert any(s < 0 for (_, _, s) in a0.terms)


def test_three_term_truncation_at_fifty():
    sd, D, K = diag_instance()
    s = series_for(sd, D, K).truncated(-2)
    assert len(s.terms) == 3 and s.next_theta == -3
    assert oracle_residual(s, sd, D, K, 50.0) <= -150 + 4 * math.log(50) + 3


def test_residual_ratio_follows_cutoff_gap():
    sd, D, K = diag_instance()
    full = series_for(sd, D, K)
    shallow = full.truncated(-1)
    for t in (20.0, 40.0, 80.0):
        gap = oracle_residual(shallow, sd, D, K, t) - oracle_residual(full, sd, D, K, t)
        assert abs(gap - 2 * t) <= math.log(10)


def test_every_retained_term_is_present():
    # lower orders removed via the oracle, the remainder still has size e^{t theta}
    sd, D, K = diag_instance()
    s = series_for(sd, D, K)
    ts = [20 + 2 * math.pi * k / 64 for k in range(64)]
    dps = 120
    exact = [oracle.projection(sd, D, K, t, extra_digits=80, as_mp=True) for t in ts]
    for j, tm in enumerate(s.terms):
        higher = s.truncated(tm.theta) if j == 0 else s.truncated(s.terms[j - 1].theta)
        sup = 0.0
        for t, pi in zip(ts, exact):
            rest = pi - evaluate_series(higher, t, dps=dps) if j else pi
            sup = max(sup, oracle.mp_norm(rest) * math.exp(-t * float(tm.theta)))
        assert sup > 1e-3
