"""The ten acceptance criteria, one test each, at their stated tolerances."""

import time

import numpy as np
import pytest

from fieldnewton import dynamics as D
from fieldnewton import geometry as G
from fieldnewton import solve as S
from fieldnewton import variational as V
from fieldnewton.bundles import KVelocity
from fieldnewton.jets import TruncatedPolynomial as TP
from fieldnewton.jets import iterated_prolong, jet_size, mu_embed, prolong2

from .helpers import CATALOG, random_symmetric_force, sample_point

POINTS = 100


def square(lo, hi, n, k=2):
    return [(lo, hi)] * k, [n] * k


@pytest.fixture(scope="module")
def identity_sample():
    rng = np.random.default_rng(2024)
    return {(name, k): [sample_point(g, sampler, k, rng) for _ in range(POINTS)] for name, (g, sampler) in CATALOG.items() for k in (1, 2, 3)}


def test_c01_example_reproduction(criterion):
    with criterion(1, "flat example (affine vs harmonic sheet)") as c:
        start = time.perf_counter()
        g = G.flat(2)
        affine = S.flat_newton_sheet(np.zeros((2, 2, 2)), [1.0, -0.5], [[1.0, 2.0], [0.5, -1.0]], *square(-1, 1, 9))
        harmonic = S.Sheet.from_function(lambda t: [t[0] ** 2 - t[1] ** 2, 0.0], *square(-1, 1, 9))
        ra = V.newton_vs_ddw_report(g, None, affine)
        rh = V.newton_vs_ddw_report(g, None, harmonic)
        took = time.perf_counter() - start
        c.detail = (
            f"affine newton={ra.newton_max:.1e} ddw={ra.ddw_max:.1e}; "
            f"harmonic newton={rh.newton_max:.10g} ddw={rh.ddw_max:.1e}; runtime {took:.2f} s"
        )
        assert ra.newton_max <= 1e-10 and ra.ddw_max <= 1e-8
        assert rh.ddw_max <= 1e-8 and abs(rh.newton_max - 2.0) <= 1e-8
        assert took < 1.0


def test_c02_defining_identity(criterion, identity_sample):
    with criterion(2, "defining identity of the inertial form") as c:
        start = time.perf_counter()
        worst = 0.0
        for (name, k), pts in identity_sample.items():
            g = CATALOG[name][0]
            Dg = D.geodesic_sopde(g, k)
            for X in pts:
                worst = max(worst, D.newton_identity_check(g, Dg, None, X).max_abs())
        took = time.perf_counter() - start
        c.detail = f"max residual {worst:.2e} over {POINTS} points x 5 metrics x k=1..3; runtime {took:.2f} s"
        assert worst <= 1e-9 and took < 10.0


def test_c03_closed_form(criterion, identity_sample):
    with criterion(3, "closed form vs definition") as c:
        worst = 0.0
        for (name, k), pts in identity_sample.items():
            g = CATALOG[name][0]
            for X in pts:
                worst = max(worst, (D.calT_closed_form(g, X) - D.calT(g, X)).max_abs())
        c.detail = f"max componentwise difference {worst:.2e}"
        assert worst <= 1e-9


def test_c04_newton_correspondence(criterion):
    with criterion(4, "force <-> SOPDE roundtrips") as c:
        rng = np.random.default_rng(4)
        f_err = a_err = 0.0
        for name, (g, sampler) in CATALOG.items():
            for k in (1, 2, 3):
                F = random_symmetric_force(g, k, rng)
                Dn = D.newton_sopde(g, F)
                for _ in range(10):
                    X = sample_point(g, sampler, k, rng)
                    f_err = max(f_err, float(np.abs(D.force_from_sopde(g, Dn, X) - F.evaluate(X)).max()))
                    A = Dn.coefficients(X)
                    back = D.sopde_from_force_values(g, D.force_from_sopde(g, Dn, X), X)
                    a_err = max(a_err, float(np.abs(back - A).max()))
        c.detail = f"F->D->F {f_err:.2e}, D->F->D {a_err:.2e}"
        assert f_err <= 1e-12 and a_err <= 1e-12


def test_c05_geodesic_oracle(criterion):
    with criterion(5, "geodesic coefficients vs exponential-map oracle") as c:
        rng = np.random.default_rng(5)
        worst = {}
        for name in ("sphere", "hyperbolic"):
            g, sampler = CATALOG[name]
            err = 0.0
            for _ in range(20):
                k = int(rng.integers(1, 4))
                X = KVelocity(sampler(rng), rng.uniform(-0.8, 0.8, (g.n, k)))
                A = D.geodesic_sopde(g, k).coefficients(X)
                err = max(err, float(np.abs(D.geodesic_oracle(g, X, 1e-3, 1e-3) - A).max()))
            worst[name] = err
        c.detail = ", ".join(f"{n} {e:.2e}" for n, e in worst.items()) + " (20 points each, h=1e-3)"
        assert max(worst.values()) <= 1e-5


def test_c06_trace_law(criterion, identity_sample):
    with criterion(6, "trace law and the one-slot classical law") as c:
        worst = classical = 0.0
        rng = np.random.default_rng(6)
        for (name, k), pts in identity_sample.items():
            g = CATALOG[name][0]
            for X in pts:
                ta, tb = D.calT(g, X).trace()
                dq, dv = D.kinetic_differential(g, X)
                worst = max(worst, float(np.abs(ta - dq).max()), float(np.abs(tb - dv).max()))
            if k == 1:
                F = random_symmetric_force(g, 1, rng)
                Dn = D.newton_sopde(g, F)
                for X in pts[:20]:
                    rq, rv = D.classical_newton_residual(g, Dn, F, X)
                    classical = max(classical, float(np.abs(rq).max()), float(np.abs(rv).max()))
        c.detail = f"trace defect {worst:.2e}, classical (k=1) defect {classical:.2e}"
        assert worst <= 1e-10 and classical <= 1e-10


def test_c07_hamilton_noether(criterion):
    with criterion(7, "Hamilton-Noether identity") as c:
        rng = np.random.default_rng(7)
        worst = 0.0
        count = 0
        for name, (g, sampler) in CATALOG.items():
            names = g.chart.names
            for k in (1, 2, 3):
                F = random_symmetric_force(g, k, rng)
                coeffs = rng.integers(-3, 4, size=(g.n, 3))
                v = V.ProlongedVector(
                    names, [f"{c0} + {c1}*{names[(i + 1) % g.n]} + {c2}*{names[i]}*{names[(i + 1) % g.n]}" for i, (c0, c1, c2) in enumerate(coeffs)]
                )
                for _ in range(5):
                    X = sample_point(g, sampler, k, rng)
                    lhs, rhs = V.hamilton_noether_check(g, F, None, v, X)
                    worst = max(worst, abs(lhs - rhs))
                    count += 1
        c.detail = f"max |lhs - rhs| {worst:.2e} over {count} cases"
        assert worst <= 1e-9


def test_c08_noether_conservation(criterion):
    with criterion(8, "Noether current conservation") as c:
        g = G.flat(2)
        rot = V.ProlongedVector(g.chart.names, ["-q2", "q1"])
        flat_worst = 0.0
        rng = np.random.default_rng(8)
        for _ in range(5):
            sheet = S.flat_newton_sheet(np.zeros((2, 2, 2)), rng.normal(size=2), rng.normal(size=(2, 2)), *square(-1, 1, 9))
            flat_worst = max(flat_worst, V.noether_divergence(g, rot, sheet).max)
        gs = G.sphere2()
        X = KVelocity([1.2, 0.1], np.outer([0.3, 0.8], [1.0, 0.5]))
        sheet = S.rank1_sheet(gs, X.q, X, *square(-0.2, 0.2, 41))
        assert np.allclose(sheet.spacing, 0.01)
        sphere = V.noether_divergence(gs, V.ProlongedVector(gs.chart.names, ["0", "1"]), sheet).max
        c.detail = f"flat rotation {flat_worst:.2e}, sphere rank-1 {sphere:.2e} (h=1e-2)"
        assert flat_worst <= 1e-8 and sphere <= 1e-5


def _dyadic(rng, k, order):
    return TP(k, order, rng.integers(-64, 65, size=jet_size(k, order)) / 16.0)


def test_c09_immersion(criterion):
    with criterion(9, "mu ring morphism and iterated prolongation") as c:
        rng = np.random.default_rng(9)
        bad = 0
        for i in range(1000):
            k = 1 + i % 3
            a, b = _dyadic(rng, k, 2), _dyadic(rng, k, 2)
            bad += mu_embed(a * b) != mu_embed(a) * mu_embed(b)
            bad += mu_embed(a + b) != mu_embed(a) + mu_embed(b)
        mismatch = 0
        for _ in range(20):
            C = rng.integers(-4, 5, size=(2, 6)) / 4.0

            def gamma(t, C=C):
                return [C[i, 0] + C[i, 1] * t[0] + C[i, 2] * t[1] + C[i, 3] * t[0] * t[1] + C[i, 4] * t[0] ** 2 + C[i, 5] * t[1] ** 3 for i in range(2)]

            t = list(rng.integers(-4, 5, size=2) / 4.0)
            Y = prolong2(gamma, t)
            for i, m in enumerate(iterated_prolong(gamma, t)):
                mismatch += not np.array_equal(m.m[1:, 1:], Y.qddot[i])
                mismatch += not np.array_equal(m.m[1:, 0], Y.qdot[i]) or not np.array_equal(m.m[0, 1:], Y.qdot[i])
        c.detail = f"{bad} morphism failures in 1000 pairs, {mismatch} prolongation mismatches in 20 maps"
        assert bad == 0 and mismatch == 0


def test_c10_order_of_accuracy(criterion):
    with criterion(10, "second-order convergence of sheet residuals") as c:
        g = G.sphere2()
        X = KVelocity([1.2, 0.1], np.outer([0.3, 0.8], [1.0, 0.5]))
        r = [S.newton_residual(g, None, S.rank1_sheet(g, X.q, X, *square(-0.4, 0.4, n))).max for n in (11, 21, 41)]
        ratios = [r[0] / r[1], r[1] / r[2]]
        c.detail = f"residuals {', '.join(f'{x:.2e}' for x in r)}; ratios {ratios[0]:.3f}, {ratios[1]:.3f}"
        assert all(3.5 <= q <= 4.5 for q in ratios)
