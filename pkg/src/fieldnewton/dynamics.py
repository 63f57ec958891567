"""Second-order PDE fields on Q_k^1, the geodesic k-field, the inertial form and forces.

A SOPDE is stored through its coefficients ``A[i, a, b]`` (the prescribed
second derivative of ``q^i`` in slots ``a, b``).  The vector field ``D_a`` on
Q_k^1 moves ``q`` along ``qdot[:, a]`` and ``qdot[:, b]`` along ``A[:, a, b]``.

End(R^k)-valued 1-forms on Q_k^1 are stored as :class:`EndValuedOneForm`
with one component per ordered slot pair ``(a, b)``: the form sending input
slot ``a`` to output slot ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang
from .bundles import BundleTangent, KVelocity, polysymplectic_eval
from .errors import DimensionError, DomainError, ValidationError
from .geometry import (
    MetricField,
    _checked_inverse,
    christoffel,
    christoffel_directional,
    k_kinetic_energy_generic,
)
from .jets import directional_derivative, gradient

FORCE_SYMMETRY_TOL = 1e-12


# -- End(R^k)-valued 1-forms --------------------------------------------------


@dataclass(frozen=True, eq=False)
class EndValuedOneForm:
    """``a[i, a, b]`` multiplies ``dq^i``; ``b[j, c, a, b]`` multiplies ``dqdot^j_c``."""

    a: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros(cls, n: int, k: int) -> "EndValuedOneForm":
        return cls(np.zeros((n, k, k)), np.zeros((n, k, k, k)))

    @classmethod
    def horizontal(cls, coeffs: np.ndarray) -> "EndValuedOneForm":
        coeffs = np.asarray(coeffs, dtype=float)
        n, k, _ = coeffs.shape
        return cls(coeffs, np.zeros((n, k, k, k)))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def k(self) -> int:
        return self.a.shape[1]

    def __add__(self, other: "EndValuedOneForm") -> "EndValuedOneForm":
        return EndValuedOneForm(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "EndValuedOneForm") -> "EndValuedOneForm":
        return EndValuedOneForm(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "EndValuedOneForm":
        return EndValuedOneForm(-self.a, -self.b)

    def evaluate(self, dq, dqdot) -> np.ndarray:
        """The k x k matrix ``[a, b]`` obtained by feeding a tangent ``(dq, dqdot)``."""
        dq = np.asarray(dq, dtype=float).reshape(self.n)
        dqdot = np.asarray(dqdot, dtype=float).reshape(self.n, self.k)
        return np.einsum("iab,i->ab", self.a, dq) + np.einsum("jcab,jc->ab", self.b, dqdot)

    def trace(self) -> tuple[np.ndarray, np.ndarray]:
        """Sum over ``a = b``: the ordinary 1-form as ``(dq part, dqdot part)``."""
        return np.einsum("iaa->i", self.a), np.einsum("jcaa->jc", self.b)

    def is_horizontal(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.b).max(initial=0.0) <= tol)

    def max_abs(self) -> float:
        return float(max(np.abs(self.a).max(initial=0.0), np.abs(self.b).max(initial=0.0)))


# -- forces -------------------------------------------------------------------


def _parse_slot_array(entries, names, n, k, allow_velocity, what):
    arr = np.asarray(entries, dtype=object)
    if arr.shape != (n, k, k):
        raise DimensionError(f"{what} must have shape {(n, k, k)}, got {arr.shape}")
    out = np.empty((n, k, k), dtype=object)
    for idx in np.ndindex(n, k, k):
        e = arr[idx]
        if isinstance(e, str):
            e = exprlang.parse(e, names, (n, k) if allow_velocity else None)
        elif isinstance(e, (int, float, np.floating, np.integer)):
            e = exprlang.Num(float(e))
        out[idx] = e
    return out


def _symmetry_samples(n, k, count=4, seed=12345):
    rng = np.random.default_rng(seed)
    return [(rng.uniform(0.6, 1.4, n), rng.uniform(-1.0, 1.0, (n, k))) for _ in range(count)]


class _SlotExprArray:
    """n x k x k expressions in the chart coordinates and (optionally) velocities."""

    def __init__(self, exprs: np.ndarray, names: tuple[str, ...], what: str):
        self.exprs = exprs
        self.names = names
        self.n, self.k, _ = exprs.shape
        self.compiled = np.empty(exprs.shape, dtype=object)
        for idx in np.ndindex(exprs.shape):
            self.compiled[idx] = exprlang.compile_expr(exprs[idx])
        self.uses_velocity = any(exprlang.uses_velocity(e) for e in exprs.flat)
        self._check_symmetry(what)

    def _env(self, q, qdot) -> dict:
        env = dict(zip(self.names, q))
        if self.uses_velocity:
            for i in range(self.n):
                for a in range(self.k):
                    env[exprlang.vel_name(i + 1, a + 1)] = qdot[i][a]
        return env

    def values(self, q, qdot) -> list:
        """Generic evaluation: nested n x k x k list of scalar-likes (symmetric by construction)."""
        env = self._env(q, qdot)
        n, k = self.n, self.k
        out = [[[None] * k for _ in range(k)] for _ in range(n)]
        for i in range(n):
            for a in range(k):
                for b in range(a, k):
                    v = self.compiled[i, a, b](env)
                    out[i][a][b] = out[i][b][a] = v
        return out

    def _check_symmetry(self, what):
        bad = [
            (i, a, b)
            for i in range(self.n)
            for a in range(self.k)
            for b in range(a + 1, self.k)
            if self.exprs[i, a, b] != self.exprs[i, b, a]
        ]
        if not bad:
            return
        for q, qdot in _symmetry_samples(self.n, self.k):
            env = self._env(q, qdot.tolist())
            for i, a, b in bad:
                try:
                    x = float(self.compiled[i, a, b](env))
                    y = float(self.compiled[i, b, a](env))
                except DomainError:
                    continue
                if abs(x - y) > FORCE_SYMMETRY_TOL * max(1.0, abs(x), abs(y)):
                    raise ValidationError(
                        f"{what} not symmetric in (α,β): entry [{i + 1}][{a + 1}][{b + 1}] "
                        f"differs from [{i + 1}][{b + 1}][{a + 1}]"
                    )


class ForceField:
    """Horizontal End(R^k)-valued 1-form ``F[i, a, b] dq^i``, symmetric in ``(a, b)``."""

    def __init__(self, names: Sequence[str], entries, k: int, name: str = "custom"):
        names = tuple(names)
        n = len(names)
        exprs = _parse_slot_array(entries, names, n, k, True, "force")
        self._rule = _SlotExprArray(exprs, names, "force")
        self.names = names
        self.name = name

    @classmethod
    def zero(cls, names: Sequence[str], k: int) -> "ForceField":
        n = len(tuple(names))
        return cls(names, np.zeros((n, k, k)), k, name="zero")

    @classmethod
    def constant(cls, names: Sequence[str], values) -> "ForceField":
        values = np.asarray(values, dtype=float)
        return cls(names, values, values.shape[1], name="constant")

    @property
    def n(self) -> int:
        return self._rule.n

    @property
    def k(self) -> int:
        return self._rule.k

    @property
    def depends_on_velocity(self) -> bool:
        return self._rule.uses_velocity

    @property
    def exprs(self) -> np.ndarray:
        return self._rule.exprs

    def is_constant(self) -> bool:
        return all(exprlang.is_constant(e) for e in self._rule.exprs.flat)

    def generic(self, q, qdot):
        return self._rule.values(q, qdot)

    def evaluate(self, X: KVelocity) -> np.ndarray:
        _check_shape(X, self.n, self.k)
        return np.array(self.generic(list(X.q), X.qdot.tolist()), dtype=float)

    def directional(self, X: KVelocity, dq, dqdot) -> np.ndarray:
        """Derivative of the coefficients along a tangent of Q_k^1."""
        return _directional_slot(self._rule, X, dq, dqdot)

    def form(self, X: KVelocity) -> EndValuedOneForm:
        return EndValuedOneForm.horizontal(self.evaluate(X))


def _mirror(A: np.ndarray) -> np.ndarray:
    """Copy the upper slot triangle onto the lower one (removes rounding asymmetry)."""
    iu = np.triu_indices(A.shape[1], 1)
    A[:, iu[1], iu[0]] = A[:, iu[0], iu[1]]
    return A


def _check_shape(X: KVelocity, n: int, k: int):
    if X.n != n or X.k != k:
        raise DimensionError(f"expected a k-velocity with n={n}, k={k}; got n={X.n}, k={X.k}")


def _flat(X: KVelocity) -> list[float]:
    return list(X.q) + list(X.qdot.reshape(-1))


def _unflat(vals, n, k):
    q = vals[:n]
    rest = vals[n:]
    qdot = [rest[i * k : (i + 1) * k] for i in range(n)]
    return q, qdot


def _directional_slot(rule: _SlotExprArray, X: KVelocity, dq, dqdot) -> np.ndarray:
    n, k = rule.n, rule.k
    direction = list(np.asarray(dq, dtype=float).reshape(n)) + list(np.asarray(dqdot, dtype=float).reshape(-1))

    def f(vals):
        q, qdot = _unflat(vals, n, k)
        nested = rule.values(q, qdot)
        return [nested[i][a][b] for i in range(n) for a in range(k) for b in range(k)]

    _, der = directional_derivative(f, _flat(X), direction)
    return der.reshape(n, k, k)


# -- SOPDEs -------------------------------------------------------------------


class SOPDE:
    """Second-order PDE field over a metric: coefficients ``A[i, a, b]`` on Q_k^1.

    ``kind`` is ``"geodesic"``, ``"newton"`` (with ``force``) or ``"custom"``.
    """

    def __init__(self, metric: MetricField, k: int, kind: str, force: ForceField | None = None, rule: _SlotExprArray | None = None):
        if kind not in ("geodesic", "newton", "custom"):
            raise ValidationError(f"unknown SOPDE kind {kind!r}")
        self.metric = metric
        self.k = k
        self.kind = kind
        self.force = force
        self._rule = rule

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def provenance(self) -> str:
        if self.kind == "newton":
            return f"newton({self.force.name})"
        return self.kind

    def __repr__(self):
        return f"SOPDE({self.provenance}, metric={self.metric.name}, k={self.k})"

    def coefficients(self, X: KVelocity) -> np.ndarray:
        _check_shape(X, self.n, self.k)
        if self.kind == "custom":
            return np.array(self._rule.values(list(X.q), X.qdot.tolist()), dtype=float)
        gamma = christoffel(self.metric, X.q)
        A = -np.einsum("ijk,ja,kb->iab", gamma, X.qdot, X.qdot)
        if self.kind == "newton":
            _, ginv = self.metric.evaluate(X.q)
            A = A + np.einsum("ij,jab->iab", ginv, self.force.evaluate(X))
        return _mirror(A)

    def directional(self, X: KVelocity, dq, dqdot) -> np.ndarray:
        """Derivative of ``A`` along the tangent ``(dq, dqdot)`` of Q_k^1."""
        _check_shape(X, self.n, self.k)
        dq = np.asarray(dq, dtype=float).reshape(self.n)
        dqdot = np.asarray(dqdot, dtype=float).reshape(self.n, self.k)
        if self.kind == "custom":
            return _directional_slot(self._rule, X, dq, dqdot)
        gamma, dgamma = christoffel_directional(self.metric, X.q, dq)
        v = X.qdot
        dA = -np.einsum("ijk,ja,kb->iab", dgamma, v, v)
        dA -= np.einsum("ijk,ja,kb->iab", gamma, dqdot, v)
        dA -= np.einsum("ijk,ja,kb->iab", gamma, v, dqdot)
        if self.kind == "newton":
            g, dg = self.metric.derivatives(X.q)
            ginv = _checked_inverse(g)
            dginv = -ginv @ np.einsum("ijm,m->ij", dg, dq) @ ginv
            F = self.force.evaluate(X)
            dF = self.force.directional(X, dq, dqdot)
            dA += np.einsum("ij,jab->iab", dginv, F) + np.einsum("ij,jab->iab", ginv, dF)
        return _mirror(dA)

    def field(self, X: KVelocity, a: int) -> tuple[np.ndarray, np.ndarray]:
        """Components ``(dq, dqdot)`` of ``D_a`` at ``X``."""
        A = self.coefficients(X)
        return X.qdot[:, a].copy(), A[:, a, :].copy()

    def derivative_along(self, fun, X: KVelocity, a: int) -> float:
        """``D_a`` applied to a scalar function ``fun(q, qdot)`` of scalar-likes."""
        dq, dqdot = self.field(X, a)
        n, k = X.n, X.k

        def f(vals):
            q, qdot = _unflat(vals, n, k)
            return fun(q, qdot)

        _, d = directional_derivative(f, _flat(X), list(dq) + list(dqdot.reshape(-1)))
        return d


def geodesic_sopde(g: MetricField, k: int) -> SOPDE:
    return SOPDE(g, k, "geodesic")


def newton_sopde(g: MetricField, F: ForceField) -> SOPDE:
    if F.n != g.n:
        raise DimensionError(f"force has n={F.n}, metric has n={g.n}")
    return SOPDE(g, F.k, "newton", force=F)


def custom_sopde(g: MetricField, entries, k: int) -> SOPDE:
    exprs = _parse_slot_array(entries, g.chart.names, g.n, k, True, "SOPDE coefficients")
    return SOPDE(g, k, "custom", rule=_SlotExprArray(exprs, g.chart.names, "SOPDE coefficients"))


def force_from_sopde(g: MetricField, D: SOPDE, X: KVelocity) -> np.ndarray:
    """``F[i, a, b] = g_ij (A^j_ab - A_geo^j_ab)`` at ``X``."""
    A = D.coefficients(X)
    gm, _ = g.evaluate(X.q)
    A_geo = geodesic_sopde(g, X.k).coefficients(X)
    return np.einsum("ij,jab->iab", gm, A - A_geo)


def sopde_from_force_values(g: MetricField, F_values: np.ndarray, X: KVelocity) -> np.ndarray:
    """Pointwise inverse of :func:`force_from_sopde`: ``A = A_geo + g^{-1} F``."""
    _, ginv = g.evaluate(X.q)
    return geodesic_sopde(g, X.k).coefficients(X) + np.einsum("ij,jab->iab", ginv, F_values)


# -- inertial form ------------------------------------------------------------


def _basis_tangents(n: int, k: int):
    for h in range(n):
        dq = np.zeros(n)
        dq[h] = 1.0
        yield ("q", h, None), dq, np.zeros((n, k))
    for j in range(n):
        for c in range(k):
            dqdot = np.zeros((n, k))
            dqdot[j, c] = 1.0
            yield ("qdot", j, c), np.zeros(n), dqdot


def contraction_via_tangents(g: MetricField, D: SOPDE, X: KVelocity) -> EndValuedOneForm:
    """``iota_{D_a} dtheta^b`` assembled by evaluating dtheta on coordinate tangents."""
    n, k = X.n, X.k
    A = D.coefficients(X)
    out = EndValuedOneForm.zeros(n, k)
    a_arr, b_arr = out.a.copy(), out.b.copy()
    D_tangents = [BundleTangent.from_velocity_tangent(g, X, X.qdot[:, al], A[:, al, :]) for al in range(k)]
    sigma = D_tangents[0].base
    for (kind, j, c), dq, dqdot in _basis_tangents(n, k):
        W = BundleTangent.from_velocity_tangent(g, X, dq, dqdot)
        for al in range(k):
            vals = polysymplectic_eval(sigma, D_tangents[al], W)  # indexed by output slot
            if kind == "q":
                a_arr[j, al, :] = vals
            else:
                b_arr[j, c, al, :] = vals
    return EndValuedOneForm(a_arr, b_arr)


def contraction_coordinates(g: MetricField, D: SOPDE, X: KVelocity) -> EndValuedOneForm:
    """``iota_{D_a} dtheta^b`` from the coordinate expansion of ``dp ^ dq`` with ``p = g qdot``."""
    n, k = X.n, X.k
    A = D.coefficients(X)
    gm, dg = g.derivatives(X.q)
    v = X.qdot
    # D_a p_h^b = d_m g_hj v^j_b v^m_a + g_hj A^j_ab
    Dp = np.einsum("hjm,jb,ma->hab", dg, v, v) + np.einsum("hj,jab->hab", gm, A)
    # the dq^h part of dp_i^b times D_a q^i
    a_arr = Dp - np.einsum("ijh,jb,ia->hab", dg, v, v)
    b_arr = np.zeros((n, k, k, k))
    gv = np.einsum("im,ia->ma", gm, v)  # sum_i g_im v^i_a
    for b in range(k):
        b_arr[:, b, :, b] = -gv
    return EndValuedOneForm(a_arr, b_arr)


def calT(g: MetricField, X: KVelocity) -> EndValuedOneForm:
    """The inertial form, defined by ``iota_{D_G} dtheta + T = 0``."""
    return -contraction_via_tangents(g, geodesic_sopde(g, X.k), X)


def calT_closed_form(g: MetricField, X: KVelocity) -> EndValuedOneForm:
    """Independent evaluation of the inertial form from its explicit coordinate expansion."""
    n, k = X.n, X.k
    gm, dg = g.derivatives(X.q)
    v = X.qdot
    a_arr = np.zeros((n, k, k))
    b_arr = np.zeros((n, k, k, k))
    for al in range(k):
        for be in range(k):

            def half_gvv(vals, al=al, be=be):
                q, qdot = _unflat(vals, n, k)
                comps = g.components(q)
                s = 0.0
                for j in range(n):
                    for h in range(n):
                        s = s + comps[j][h] * qdot[j][al] * qdot[h][be]
                return s * 0.5

            _, grad = gradient(half_gvv, _flat(X))
            a_arr[:, al, be] = grad[:n]
            b_arr[:, :, al, be] = grad[n:].reshape(n, k)
    # 1/2 (d_h g_ij - d_j g_ih) v^j_a v^h_b dq^i
    a_arr += 0.5 * (np.einsum("ijh,ja,hb->iab", dg, v, v) - np.einsum("ihj,ja,hb->iab", dg, v, v))
    # 1/2 g_jh (v^j_a dqdot^h_b - v^j_b dqdot^h_a)
    gv = np.einsum("jh,ja->ha", gm, v)
    for al in range(k):
        for be in range(k):
            b_arr[:, be, al, be] += 0.5 * gv[:, al]
            b_arr[:, al, al, be] -= 0.5 * gv[:, be]
    return EndValuedOneForm(a_arr, b_arr)


def kinetic_differential(g: MetricField, X: KVelocity) -> tuple[np.ndarray, np.ndarray]:
    """``dT`` at ``X`` as ``(dT/dq (n,), dT/dqdot (n, k))`` by jet evaluation."""
    n, k = X.n, X.k

    def T(vals):
        q, qdot = _unflat(vals, n, k)
        return k_kinetic_energy_generic(g, q, qdot)

    _, grad = gradient(T, _flat(X))
    return grad[:n], grad[n:].reshape(n, k)


def newton_identity_check(g: MetricField, D: SOPDE, F: ForceField | None, X: KVelocity) -> EndValuedOneForm:
    """Residual of ``iota_D dtheta + T - F`` at ``X`` (zero force when ``F`` is None)."""
    res = contraction_coordinates(g, D, X) + calT(g, X)
    if F is not None:
        res = res - F.form(X)
    return res


def classical_newton_residual(g: MetricField, D: SOPDE, F: ForceField | None, X: KVelocity) -> tuple[np.ndarray, np.ndarray]:
    """k = 1 check of ``iota_D dtheta + dT = F`` with ``dT`` from jets; returns (dq, dqdot) parts."""
    if X.k != 1:
        raise DimensionError("the classical law is the k = 1 case")
    iota = contraction_coordinates(g, D, X)
    dTq, dTv = kinetic_differential(g, X)
    rq = iota.a[:, 0, 0] + dTq
    rv = iota.b[:, :, 0, 0] + dTv
    if F is not None:
        rq = rq - F.evaluate(X)[:, 0, 0]
    return rq, rv


def geodesic_oracle(g: MetricField, X: KVelocity, h: float = 1e-3, dt: float | None = None) -> np.ndarray:
    """Second central differences of ``t -> exp_q(t^a X_a)`` at 0.

    ``dt`` is the integrator step measured in the same parameter as ``h``
    (defaults to ``h``).  Returns ``qddot[i, a, b]``.
    """
    from .solve import exp_map

    dt = h if dt is None else dt
    steps = max(1, int(np.ceil(h / dt - 1e-12)))
    n, k = X.n, X.k
    q0 = X.q
    out = np.zeros((n, k, k))

    def ex(v):
        return exp_map(g, q0, h * v, steps)

    for a in range(k):
        Xa = X.qdot[:, a]
        out[:, a, a] = (ex(Xa) - 2.0 * q0 + ex(-Xa)) / (h * h)
        for b in range(a + 1, k):
            Xb = X.qdot[:, b]
            mixed = (ex(Xa + Xb) - ex(Xa - Xb) - ex(-Xa + Xb) + ex(-Xa - Xb)) / (4.0 * h * h)
            out[:, a, b] = out[:, b, a] = mixed
    return out


def check_symmetric_force_values(F_values: np.ndarray, tol: float = FORCE_SYMMETRY_TOL) -> None:
    F_values = np.asarray(F_values, dtype=float)
    if not np.allclose(F_values, F_values.transpose(0, 2, 1), rtol=0, atol=tol * max(1.0, np.abs(F_values).max(initial=0))):
        raise ValidationError("force not symmetric in (α,β)")
