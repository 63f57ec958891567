import math

import numpy as np
import pytest

from fieldnewton import geometry as G
from fieldnewton.bundles import (
    BundleTangent,
    Covelocity,
    K2Velocity,
    KVelocity,
    interior_coupling,
    inverse_iso,
    liouville_eval,
    metric_iso,
    pairing,
    polysymplectic_eval,
)
from fieldnewton.errors import DimensionError, ValidationError


def tangent(sigma, dq, dp):
    return BundleTangent(sigma, np.asarray(dq, float), np.asarray(dp, float))


def test_kvelocity_validation():
    X = KVelocity([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]])
    assert X.n == 2 and X.k == 2
    with pytest.raises((DimensionError, ValidationError)):
        KVelocity([1.0, 2.0], [[1.0, 0.0, 3.0]])
    with pytest.raises(ValidationError):
        KVelocity([np.nan, 2.0], [[1.0], [0.0]])
    with pytest.raises(ValueError):
        X.qdot[0, 0] = 5.0


def test_k2velocity_symmetry_required():
    qdd = np.zeros((1, 2, 2))
    qdd[0, 0, 1] = 1.0
    with pytest.raises(ValidationError):
        K2Velocity([0.0], [[1.0, 1.0]], qdd)
    qdd[0, 1, 0] = 1.0
    assert K2Velocity([0.0], [[1.0, 1.0]], qdd).project() == KVelocity([0.0], [[1.0, 1.0]])


def test_metric_iso_examples():
    X = KVelocity([0.2, 0.1], [[1.0, -2.0], [3.0, 0.5]])
    assert np.array_equal(metric_iso(G.flat(2), X).p, X.qdot)
    X = KVelocity([math.pi / 3, 0.0], [[0.0], [2.0]])
    assert metric_iso(G.sphere2(), X).p[1, 0] == pytest.approx(1.5, abs=1e-15)


def test_iso_roundtrip():
    rng = np.random.default_rng(0)
    for g, q in [(G.sphere2(), [1.0, 0.3]), (G.hyperbolic2(), [0.0, 1.4]), (G.minkowski(3), [0, 0, 0])]:
        for _ in range(50):
            X = KVelocity(q, rng.normal(size=(g.n, 3)))
            assert np.abs(inverse_iso(g, metric_iso(g, X)).qdot - X.qdot).max() <= 1e-12


def test_interior_coupling_examples():
    I = np.eye(2)
    assert np.array_equal(interior_coupling(KVelocity([0, 0], I), Covelocity([0, 0], I)), I)
    assert not interior_coupling(KVelocity([0, 0], np.zeros((2, 2))), Covelocity([0, 0], I)).any()
    M = interior_coupling(KVelocity([0.0], [[1.0, 2.0]]), Covelocity([0.0], [[3.0, 4.0]]))
    assert np.array_equal(M, [[3.0, 6.0], [4.0, 8.0]])


def test_pairing_examples():
    assert pairing(Covelocity([0.0], [[3.0, 4.0]]), KVelocity([0.0], [[1.0, 2.0]])) == 11.0
    assert pairing(Covelocity([0, 0], np.eye(2)), KVelocity([0, 0], np.eye(2))) == 2.0
    assert pairing(Covelocity([0, 0], np.zeros((2, 2))), KVelocity([0, 0], np.eye(2))) == 0.0


def test_base_point_mismatch():
    with pytest.raises(ValidationError):
        interior_coupling(KVelocity([0.0], [[1.0]]), Covelocity([1.0], [[1.0]]))


def test_pairing_symmetric_through_metric():
    rng = np.random.default_rng(1)
    g = G.sphere2()
    q = [1.2, 0.4]
    for k in (1, 3):
        X, Y = KVelocity(q, rng.normal(size=(2, k))), KVelocity(q, rng.normal(size=(2, k)))
        a = pairing(metric_iso(g, X), Y)
        b = pairing(metric_iso(g, Y), X)
        assert a == pytest.approx(b, rel=1e-14)
        gm = g.matrix(q)
        assert a == pytest.approx(sum(X.qdot[:, c] @ gm @ Y.qdot[:, c] for c in range(k)), rel=1e-14)


def test_liouville_examples():
    sigma = Covelocity([0.0, 0.0], [[5.0], [7.0]])
    assert not liouville_eval(sigma, tangent(sigma, [0, 0], [[1.0], [2.0]])).any()
    assert liouville_eval(sigma, tangent(sigma, [1, 1], [[0.0], [0.0]]))[0] == 12.0
    rng = np.random.default_rng(2)
    base = liouville_eval(sigma, tangent(sigma, [0.3, -0.2], [[0.0], [0.0]]))
    for _ in range(5):
        assert np.array_equal(liouville_eval(sigma, tangent(sigma, [0.3, -0.2], rng.normal(size=(2, 1)))), base)


def test_polysymplectic_sign_and_algebra():
    s = Covelocity([0.0], [[0.0]])
    assert polysymplectic_eval(s, tangent(s, [1.0], [[0.0]]), tangent(s, [0.0], [[1.0]]))[0] == -1.0
    rng = np.random.default_rng(3)
    sigma = Covelocity([0.1, 0.2], rng.normal(size=(2, 3)))
    D1 = tangent(sigma, rng.normal(size=2), rng.normal(size=(2, 3)))
    D2 = tangent(sigma, rng.normal(size=2), rng.normal(size=(2, 3)))
    D3 = tangent(sigma, rng.normal(size=2), rng.normal(size=(2, 3)))
    assert not polysymplectic_eval(sigma, D1, D1).any()
    assert np.allclose(polysymplectic_eval(sigma, D1, D2), -polysymplectic_eval(sigma, D2, D1), atol=0)
    assert np.allclose(polysymplectic_eval(sigma, D1.scaled(2.0), D2), 2 * polysymplectic_eval(sigma, D1, D2), rtol=1e-15)
    lin = tangent(sigma, D2.dq + D3.dq, D2.dp + D3.dp)
    assert np.allclose(
        polysymplectic_eval(sigma, D1, lin), polysymplectic_eval(sigma, D1, D2) + polysymplectic_eval(sigma, D1, D3), rtol=1e-14, atol=1e-14
    )


def test_tangent_pushforward_matches_finite_difference():
    g = G.sphere2()
    rng = np.random.default_rng(4)
    X = KVelocity([1.0, 0.3], rng.normal(size=(2, 2)))
    dq, dqdot = rng.normal(size=2), rng.normal(size=(2, 2))
    D = BundleTangent.from_velocity_tangent(g, X, dq, dqdot)
    h = 1e-6

    def p(s):
        return metric_iso(g, KVelocity(X.q + s * dq, X.qdot + s * dqdot)).p

    assert np.abs(D.dp - (p(h) - p(-h)) / (2 * h)).max() <= 1e-8
    assert np.array_equal(D.base.p, metric_iso(g, X).p)


def test_k1_reduces_to_cotangent_formulas():
    sigma = Covelocity([0.0, 0.0], [[2.0], [-1.0]])
    D1 = tangent(sigma, [1.0, 0.5], [[0.3], [0.2]])
    D2 = tangent(sigma, [0.0, 2.0], [[1.0], [-1.0]])
    # dp ^ dq on (D1, D2): sum_i dp1_i dq2_i - dp2_i dq1_i
    expected = (0.3 * 0.0 + 0.2 * 2.0) - (1.0 * 1.0 + -1.0 * 0.5)
    assert polysymplectic_eval(sigma, D1, D2)[0] == pytest.approx(expected)
    assert liouville_eval(sigma, D1)[0] == 2.0 * 1.0 - 1.0 * 0.5
