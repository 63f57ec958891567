import numpy as np
import pytest

from fieldnewton import dynamics as D
from fieldnewton import geometry as G
from fieldnewton.bundles import KVelocity
from fieldnewton.errors import ValidationError

from .helpers import CATALOG, random_symmetric_force, sample_point


def test_geodesic_flat_is_zero():
    X = KVelocity([1.0, 2.0, 3.0], np.arange(6.0).reshape(3, 2))
    assert not D.geodesic_sopde(G.flat(3), 2).coefficients(X).any()


def test_geodesic_k1_is_classical_spray():
    g = G.sphere2()
    X = KVelocity([1.0, 0.5], [[0.3], [-0.4]])
    A = D.geodesic_sopde(g, 1).coefficients(X)
    assert np.allclose(A[:, 0, 0], G.geodesic_acceleration(g, X.q, X.qdot[:, 0]), rtol=1e-15)


def test_coefficients_symmetric_in_slots():
    rng = np.random.default_rng(0)
    g = G.hyperbolic2()
    X = KVelocity([0.1, 1.2], rng.normal(size=(2, 3)))
    A = D.geodesic_sopde(g, 3).coefficients(X)
    assert np.array_equal(A, A.transpose(0, 2, 1))


def test_oracle_flat():
    X = KVelocity([0.5, -0.5], [[1.0, 2.0], [0.3, -0.7]])
    assert np.abs(D.geodesic_oracle(G.flat(2), X, 1e-3)).max() <= 1e-10


def test_oracle_sphere_matches_formula():
    g = G.sphere2()
    rng = np.random.default_rng(1)
    for _ in range(5):
        X = KVelocity([rng.uniform(0.6, 2.5), rng.uniform(-1, 1)], rng.uniform(-0.8, 0.8, (2, 2)))
        A = D.geodesic_sopde(g, 2).coefficients(X)
        assert np.abs(D.geodesic_oracle(g, X, 1e-3) - A).max() <= 1e-5


def test_oracle_rank1_scales_with_lambda():
    g = G.sphere2()
    w = np.array([0.4, 0.9])
    lam = np.array([1.0, -0.5])
    X = KVelocity([1.0, 0.2], np.outer(w, lam))
    acc = G.geodesic_acceleration(g, X.q, w)
    oracle = D.geodesic_oracle(g, X, 1e-3)
    assert np.abs(oracle - np.einsum("i,a,b->iab", acc, lam, lam)).max() <= 1e-5


def test_calT_zero_velocity():
    X = KVelocity([1.0, 0.4], np.zeros((2, 2)))
    assert D.calT(G.sphere2(), X).max_abs() == 0.0


def test_calT_flat_explicit():
    # flat metric: a = 0, b[j, c, a, b] = 1/2 (v^j_a d_{cb} - v^j_b d_{ca})... evaluated from the closed form
    rng = np.random.default_rng(2)
    v = rng.normal(size=(2, 2))
    X = KVelocity([0.0, 0.0], v)
    T = D.calT(G.flat(2), X)
    assert not T.a.any()
    for j in range(2):
        for c in range(2):
            for a in range(2):
                for b in range(2):
                    # d(1/2 v_a.v_b) + 1/2 (v_a dv_b - v_b dv_a) collapses to v^j_a on the (c=b) slot
                    expected = v[j, a] if c == b else 0.0
                    assert T.b[j, c, a, b] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("name", list(CATALOG))
@pytest.mark.parametrize("k", [1, 2, 3])
def test_closed_form_and_trace(name, k):
    g, sampler = CATALOG[name]
    rng = np.random.default_rng(3)
    for _ in range(10):
        X = sample_point(g, sampler, k, rng)
        T = D.calT(g, X)
        assert (D.calT_closed_form(g, X) - T).max_abs() <= 1e-9
        ta, tb = T.trace()
        dq, dv = D.kinetic_differential(g, X)
        assert np.abs(ta - dq).max() <= 1e-10 and np.abs(tb - dv).max() <= 1e-10


@pytest.mark.parametrize("name", list(CATALOG))
def test_identity_geodesic_and_newton(name):
    g, sampler = CATALOG[name]
    rng = np.random.default_rng(4)
    for k in (1, 2):
        F = random_symmetric_force(g, k, rng)
        for Dk, Fk in ((D.geodesic_sopde(g, k), None), (D.newton_sopde(g, F), F)):
            for _ in range(5):
                X = sample_point(g, sampler, k, rng)
                assert D.newton_identity_check(g, Dk, Fk, X).max_abs() <= 1e-9


def test_contraction_paths_agree_for_arbitrary_sopde():
    g = G.sphere2()
    rule = [[["theta*qd(1,1)", "1"], ["1", "phi^2"]], [["qd(2,2)", "0"], ["0", "sin(theta)"]]]
    Dc = D.custom_sopde(g, rule, 2)
    X = KVelocity([1.0, 0.3], [[0.2, -0.4], [0.9, 0.1]])
    diff = D.contraction_via_tangents(g, Dc, X) - D.contraction_coordinates(g, Dc, X)
    assert diff.max_abs() <= 1e-13


def test_perturbing_A_shifts_residual_by_metric_entry():
    g = G.flat(2)
    rule = [[["1", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]]
    X = KVelocity([0.1, 0.2], [[1.0, 0.5], [-0.3, 2.0]])
    base = D.newton_identity_check(g, D.geodesic_sopde(g, 2), None, X)
    pert = D.newton_identity_check(g, D.custom_sopde(g, rule, 2), None, X)
    delta = pert - base
    assert delta.a[0, 0, 0] == 1.0
    delta.a[0, 0, 0] = 0.0
    assert delta.max_abs() == 0.0


def test_newton_sopde_examples():
    g = G.flat(2)
    X = KVelocity([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    F0 = D.ForceField.zero(g.chart.names, 2)
    assert np.array_equal(D.newton_sopde(g, F0).coefficients(X), D.geodesic_sopde(g, 2).coefficients(X))
    c = 2.5
    vals = np.zeros((2, 2, 2))
    vals[:, 0, 0] = c
    A = D.newton_sopde(g, D.ForceField.constant(g.chart.names, vals)).coefficients(X)
    assert np.array_equal(A, vals)


def test_force_from_sopde_examples():
    g = G.sphere2()
    X = KVelocity([1.0, 0.3], [[0.2, -0.4], [0.9, 0.1]])
    assert np.abs(D.force_from_sopde(g, D.geodesic_sopde(g, 2), X)).max() == 0.0
    flat = G.flat(3)
    w = ["1", "-2", "0.5"]
    rule = [[[w[i], "0"], ["0", w[i]]] for i in range(3)]
    Xf = KVelocity([0, 0, 0], np.ones((3, 2)))
    F = D.force_from_sopde(flat, D.custom_sopde(flat, rule, 2), Xf)
    assert np.array_equal(F, np.einsum("i,ab->iab", [1.0, -2.0, 0.5], np.eye(2)))


@pytest.mark.parametrize("name", list(CATALOG))
def test_roundtrips(name):
    g, sampler = CATALOG[name]
    rng = np.random.default_rng(5)
    F = random_symmetric_force(g, 2, rng)
    Dn = D.newton_sopde(g, F)
    for _ in range(10):
        X = sample_point(g, sampler, 2, rng)
        assert np.abs(D.force_from_sopde(g, Dn, X) - F.evaluate(X)).max() <= 1e-12
        A = Dn.coefficients(X)
        back = D.sopde_from_force_values(g, D.force_from_sopde(g, Dn, X), X)
        assert np.abs(back - A).max() <= 1e-12


def test_verticality_of_sopde_difference():
    g = G.hyperbolic2()
    rng = np.random.default_rng(6)
    F = random_symmetric_force(g, 2, rng)
    X = KVelocity([0.2, 1.1], rng.normal(size=(2, 2)))
    for a in range(2):
        dq1, _ = D.geodesic_sopde(g, 2).field(X, a)
        dq2, _ = D.newton_sopde(g, F).field(X, a)
        assert np.array_equal(dq1, dq2) and np.array_equal(dq1, X.qdot[:, a])


def test_directional_matches_finite_difference():
    g = G.sphere2()
    F = D.ForceField(g.chart.names, [[["theta*qd(1,2)", "1"], ["1", "0"]], [["0", "phi"], ["phi", "qd(2,1)^2"]]], 2)
    Dn = D.newton_sopde(g, F)
    rng = np.random.default_rng(7)
    X = KVelocity([1.0, 0.4], rng.normal(size=(2, 2)))
    dq, dv = rng.normal(size=2), rng.normal(size=(2, 2))
    h = 1e-6
    fd = (Dn.coefficients(KVelocity(X.q + h * dq, X.qdot + h * dv)) - Dn.coefficients(KVelocity(X.q - h * dq, X.qdot - h * dv))) / (2 * h)
    assert np.abs(Dn.directional(X, dq, dv) - fd).max() <= 1e-7


def test_asymmetric_force_rejected():
    with pytest.raises(ValidationError, match=r"not symmetric in \(α,β\)"):
        D.ForceField(("x", "y"), [[["0", "x"], ["y", "0"]], [["0", "0"], ["0", "0"]]], 2)
    # symmetric after parse even though trees differ
    D.ForceField(("x", "y"), [[["0", "x*y"], ["y*x", "0"]], [["0", "0"], ["0", "0"]]], 2)


def test_classical_law_k1():
    rng = np.random.default_rng(8)
    for name, (g, sampler) in CATALOG.items():
        F = random_symmetric_force(g, 1, rng)
        X = sample_point(g, sampler, 1, rng)
        rq, rv = D.classical_newton_residual(g, D.newton_sopde(g, F), F, X)
        assert np.abs(rq).max() <= 1e-10 and np.abs(rv).max() <= 1e-10
        T = D.calT(g, X)
        dq, dv = D.kinetic_differential(g, X)
        assert np.abs(T.a[:, 0, 0] - dq).max() <= 1e-10
        assert np.abs(T.b[:, :, 0, 0] - dv).max() <= 1e-10
