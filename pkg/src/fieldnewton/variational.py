"""Lagrangian/Hamiltonian scalars, traced canonical equations and Noether laws.

Momenta are ``p_i^a = g_ij qdot^j_a``; slot indices are raised with the
euclidean metric on R^k, so ``H = 1/2 g^ij p_i^a p_j^a + U``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprlang
from .bundles import KVelocity
from .dynamics import SOPDE, ForceField, newton_sopde
from .errors import DimensionError, ValidationError
from .geometry import MetricField, inverse_generic, k_kinetic_energy, k_kinetic_energy_generic
from .jets import directional_derivative, gradient
from .solve import Residual, Sheet, boundary_count, difference_first, newton_residual

CONSERVATIVE_TOL = 1e-10
BOUNDARY_TOL = 1e-12


class Potential:
    """Scalar ``U(q)`` given as an expression in the chart names."""

    def __init__(self, names: Sequence[str], expr="0"):
        self.names = tuple(names)
        if isinstance(expr, (int, float)):
            expr = exprlang.Num(float(expr))
        self.expr = exprlang.parse(expr, self.names) if isinstance(expr, str) else expr
        unknown = exprlang.free_variables(self.expr) - set(self.names)
        if unknown:
            raise ValidationError(f"potential uses unknown names {sorted(unknown)}")
        self._fn = exprlang.compile_expr(self.expr)

    @classmethod
    def zero(cls, names) -> "Potential":
        return cls(names, "0")

    def generic(self, q):
        return self._fn(dict(zip(self.names, q)))

    def __call__(self, q) -> float:
        return float(self.generic([float(x) for x in q]))

    def gradient(self, q) -> np.ndarray:
        return gradient(self.generic, q)[1]


class ProlongedVector:
    """Vector field ``v^i(q)`` with its first prolongation ``vdot^i_a = qdot^j_a d_j v^i``."""

    def __init__(self, names: Sequence[str], entries):
        self.names = tuple(names)
        if len(entries) != len(self.names):
            raise DimensionError(f"vector field needs {len(self.names)} components, got {len(entries)}")
        exprs = []
        for e in entries:
            if isinstance(e, (int, float)):
                e = exprlang.Num(float(e))
            elif isinstance(e, str):
                e = exprlang.parse(e, self.names)
            exprs.append(e)
        self.exprs = tuple(exprs)
        self._fns = [exprlang.compile_expr(e) for e in self.exprs]

    @property
    def n(self) -> int:
        return len(self.names)

    def generic(self, q) -> list:
        env = dict(zip(self.names, q))
        return [f(env) for f in self._fns]

    def __call__(self, q) -> np.ndarray:
        return np.array([float(x) for x in self.generic([float(x) for x in q])])

    def prolong(self, X: KVelocity) -> tuple[np.ndarray, np.ndarray]:
        """``(v, vdot)`` at ``X``; ``vdot[i, a]`` is the derivative of ``v^i`` along ``X_a``."""
        if X.n != self.n:
            raise DimensionError(f"vector field has n={self.n}, k-velocity has n={X.n}")
        v = self(X.q)
        vdot = np.empty((self.n, X.k))
        for a in range(X.k):
            vdot[:, a] = directional_derivative(self.generic, X.q, X.qdot[:, a])[1]
        return v, vdot

    def scaled(self, c: float) -> "ProlongedVector":
        return ProlongedVector(self.names, [exprlang.BinOp("*", exprlang.Num(float(c)), e) for e in self.exprs])


def _potential(g: MetricField, U) -> Potential:
    if U is None:
        return Potential.zero(g.chart.names)
    if isinstance(U, Potential):
        return U
    return Potential(g.chart.names, U)


def hamiltonian(g: MetricField, U, X: KVelocity) -> float:
    return k_kinetic_energy(g, X) + _potential(g, U)(X.q)


def lagrangian(g: MetricField, U, X: KVelocity) -> float:
    return k_kinetic_energy(g, X) - _potential(g, U)(X.q)


def hamiltonian_covelocity_generic(g: MetricField, U: Potential, q, p):
    """``H(q, p)`` over scalar-likes; ``p[i][a]``."""
    ginv = inverse_generic(g.components(q))
    n, k = len(q), len(p[0])
    total = 0.0
    for i in range(n):
        for j in range(n):
            s = 0.0
            for a in range(k):
                s = s + p[i][a] * p[j][a]
            total = total + ginv[i][j] * s
    return 0.5 * total + U.generic(q)


def _lagrangian_generic(g, U: Potential, q, qdot):
    return k_kinetic_energy_generic(g, q, qdot) - U.generic(q)


def _flat(q, qdot) -> list[float]:
    return list(np.asarray(q, dtype=float)) + list(np.asarray(qdot, dtype=float).reshape(-1))


def _split(vals, n, k):
    return vals[:n], [vals[n + i * k : n + (i + 1) * k] for i in range(n)]


def delta_lagrangian(g: MetricField, U, v: ProlongedVector, X: KVelocity) -> float:
    """``delta_v L`` at ``X``: derivative of ``L`` along the prolonged field."""
    U = _potential(g, U)
    vv, vdot = v.prolong(X)
    n, k = X.n, X.k
    return directional_derivative(
        lambda vals: _lagrangian_generic(g, U, *_split(vals, n, k)), _flat(X.q, X.qdot), _flat(vv, vdot)
    )[1]


def delta_kinetic(g: MetricField, v: ProlongedVector, X: KVelocity) -> float:
    vv, vdot = v.prolong(X)
    n, k = X.n, X.k
    return directional_derivative(
        lambda vals: k_kinetic_energy_generic(g, *_split(vals, n, k)), _flat(X.q, X.qdot), _flat(vv, vdot)
    )[1]


def symmetry_defect(g: MetricField, U, v: ProlongedVector, samples: Sequence[KVelocity]) -> float:
    return max((abs(delta_lagrangian(g, U, v, X)) for X in samples), default=0.0)


def hamilton_noether_check(g: MetricField, F: ForceField | None, D: SOPDE | None, v: ProlongedVector, X: KVelocity) -> tuple[float, float]:
    """Both sides of ``D_a <theta^a, delta> = <dT + F^a_a, delta>`` at ``X``."""
    if D is None:
        if F is None:
            raise ValidationError("need a force or a SOPDE")
        D = newton_sopde(g, F)

    def pairing(a):
        def f(q, qdot):
            comps = g.components(q)
            vq = v.generic(q)
            s = 0.0
            for i in range(len(q)):
                for j in range(len(q)):
                    s = s + comps[i][j] * qdot[j][a] * vq[i]
            return s

        return f

    lhs = sum(D.derivative_along(pairing(a), X, a) for a in range(X.k))
    rhs = delta_kinetic(g, v, X)
    if F is not None:
        Fv = F.evaluate(X)
        rhs += float(np.einsum("jaa,j->", Fv, v(X.q)))
    return float(lhs), float(rhs)


def conservativity_defect(g: MetricField, F: ForceField | None, U, samples: Sequence[KVelocity]) -> float:
    """max |F^a_a + dU| over samples (zero force counts as trace 0)."""
    U = _potential(g, U)
    worst = 0.0
    for X in samples:
        tr = np.einsum("jaa->j", F.evaluate(X)) if F is not None else np.zeros(X.n)
        worst = max(worst, float(np.abs(tr + U.gradient(X.q)).max()))
    return worst


# -- sheet checks ---------------------------------------------------------------


@dataclass
class DDWResidual:
    r_q: np.ndarray
    r_p: np.ndarray
    margin: int
    skipped: int

    @property
    def max(self) -> float:
        a = float(np.abs(self.r_q).max(initial=0.0))
        b = float(np.abs(self.r_p).max(initial=0.0))
        return max(a, b)


def _momenta(g: MetricField, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    p = np.empty_like(qdot)
    for idx in np.ndindex(*q.shape[:-1]):
        p[idx] = g.matrix(q[idx]) @ qdot[idx]
    return p


def _trim(arr, k, m):
    return arr[tuple(slice(m, s - m) for s in arr.shape[:k])]


def ddw_residual(g: MetricField, U, sheet: Sheet) -> DDWResidual:
    """Residuals of the traced canonical equations on the sheet's interior (margin 2)."""
    if sheet.n != g.n:
        raise DimensionError(f"sheet has n={sheet.n}, metric has n={g.n}")
    U = _potential(g, U)
    k, n = sheet.k, sheet.n
    if min(sheet.counts) < 5:
        raise ValidationError("ddw_residual needs at least 5 nodes per axis")
    h = sheet.spacing
    qdot1 = difference_first(sheet.values, h, 1)
    q1 = _trim(sheet.values, k, 1)
    p1 = _momenta(g, q1, qdot1)
    dp = difference_first(p1, h, 1)  # (*, n, k, k) last index is the derivative slot
    divp = np.einsum("...iaa->...i", dp)
    q2, qdot2, p2 = _trim(q1, k, 1), _trim(qdot1, k, 1), _trim(p1, k, 1)
    r_q = np.empty(qdot2.shape)
    r_p = np.empty(q2.shape)
    m = n + n * k
    for idx in np.ndindex(*q2.shape[:-1]):
        x = _flat(q2[idx], p2[idx])
        _, grad = gradient(lambda vals: hamiltonian_covelocity_generic(g, U, *_split(vals, n, k)), x)
        dHdq, dHdp = grad[:n], grad[n:m].reshape(n, k)
        r_q[idx] = qdot2[idx] - dHdp
        r_p[idx] = divp[idx] + dHdq
    return DDWResidual(r_q, r_p, 2, boundary_count(sheet, 2))


def _sample_velocities(sheet: Sheet, count: int, seed: int) -> list[KVelocity]:
    rng = np.random.default_rng(seed)
    flat = sheet.values.reshape(-1, sheet.n)
    picks = rng.choice(flat.shape[0], size=min(count, flat.shape[0]), replace=False)
    return [KVelocity(flat[i], rng.normal(size=(sheet.n, sheet.k))) for i in sorted(picks)]


@dataclass
class NewtonDDWReport:
    newton: Residual
    ddw: DDWResidual
    conservativity: float
    extra: dict = field(default_factory=dict)

    @property
    def newton_max(self) -> float:
        return self.newton.max

    @property
    def ddw_max(self) -> float:
        return self.ddw.max


def newton_vs_ddw_report(g: MetricField, F: ForceField | None, sheet: Sheet, U=None, seed: int = 0, samples: int = 16) -> NewtonDDWReport:
    """Newton residual and traced-equation residual of the same sheet.

    The force trace must be exact (``F^a_a = -dU``); this is checked at
    randomized points before the Hamiltonian is built.
    """
    U = _potential(g, U)
    cons = conservativity_defect(g, F, U, _sample_velocities(sheet, samples, seed))
    if cons > CONSERVATIVE_TOL:
        raise ValidationError(f"force trace is not -dU for the supplied potential (defect {cons:.3e})")
    return NewtonDDWReport(newton_residual(g, F, sheet), ddw_residual(g, U, sheet), cons)


def noether_current(g: MetricField, v: ProlongedVector, sheet: Sheet) -> np.ndarray:
    """``J[*, a] = sum_i p_i^a v^i`` at nodes with a central first-difference stencil."""
    h = sheet.spacing
    qdot = difference_first(sheet.values, h, 1)
    q = _trim(sheet.values, sheet.k, 1)
    p = _momenta(g, q, qdot)
    J = np.empty(q.shape[:-1] + (sheet.k,))
    for idx in np.ndindex(*q.shape[:-1]):
        J[idx] = v(q[idx]) @ p[idx]
    return J


def noether_divergence(g: MetricField, v: ProlongedVector, sheet: Sheet) -> Residual:
    """Central-difference divergence of the Noether current (margin 2)."""
    J = noether_current(g, v, sheet)
    dJ = difference_first(J, sheet.spacing, 1)
    return Residual(np.einsum("...aa->...", dJ), 2, boundary_count(sheet, 2))


def _trapezoid_weights(sheet: Sheet) -> np.ndarray:
    w = np.ones(sheet.counts)
    for a, (c, h) in enumerate(zip(sheet.counts, sheet.spacing)):
        wa = np.full(c, h)
        wa[0] = wa[-1] = h / 2
        shape = [1] * sheet.k
        shape[a] = c
        w = w * wa.reshape(shape)
    return w


def hamilton_principle_defect(g: MetricField, U, sheet: Sheet, v: ProlongedVector, bump) -> float:
    """Trapezoid integral of ``delta L`` for the variation ``w(t) = bump(t) v(q(t))``.

    ``bump`` is an expression in ``t1..tk`` that must vanish on the grid
    boundary.  Sheet derivatives use second-order differences, one-sided at
    the edges.
    """
    U = _potential(g, U)
    k, n = sheet.k, sheet.n
    tnames = tuple(f"t{a + 1}" for a in range(k))
    if isinstance(bump, str):
        bump = exprlang.parse(bump, tnames)
    bfn = exprlang.compile_expr(bump)

    def b_generic(t):
        return bfn(dict(zip(tnames, t)))

    grads = np.gradient(sheet.values, *sheet.spacing, axis=tuple(range(k)), edge_order=2)
    if k == 1:
        grads = [grads]
    qdot = np.stack(grads, axis=-1)  # (*counts, n, k)
    total = np.zeros(sheet.counts)
    for idx in np.ndindex(*sheet.counts):
        t = sheet.point(idx)
        on_edge = any(i in (0, c - 1) for i, c in zip(idx, sheet.counts))
        bval, bgrad = gradient(b_generic, t)
        if on_edge and abs(bval) > BOUNDARY_TOL:
            raise ValidationError(f"bump factor is {bval:.3e} at boundary node {idx}; it must vanish there")
        X = KVelocity(sheet.values[idx], qdot[idx])
        vv, vdot = v.prolong(X)
        w = bval * vv
        wdot = np.outer(vv, bgrad) + bval * vdot
        total[idx] = directional_derivative(
            lambda vals: _lagrangian_generic(g, U, *_split(vals, n, k)), _flat(X.q, X.qdot), _flat(w, wdot)
        )[1]
    return float(np.sum(total * _trapezoid_weights(sheet)))
