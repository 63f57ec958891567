"""k-velocities, k-covelocities and the canonical forms on the covelocity bundle.

Index conventions used throughout the package:

* ``KVelocity.qdot[i, a]`` is the component ``qdot^i_a`` (point ``i``, slot ``a``).
* ``Covelocity.p[i, a]`` is ``p_i^a``.
* Greek slot indices are raised and lowered with the Kronecker delta, so
  ``qdot^{i a}`` and ``qdot^i_a`` are the same number.
* ``dtheta`` evaluated on an ordered pair of tangents returns, for each slot
  ``a``, ``sum_i (d1 p_i^a * d2 q^i - d2 p_i^a * d1 q^i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

BASE_TOL = 1e-12


def _frozen(a, shape=None, name="array"):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class KVelocity:
    """Point of Q_k^1: a base point and k tangent vectors (the columns of ``qdot``)."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, name="q").reshape(-1)
        qdot = np.array(self.qdot, dtype=float)
        if qdot.ndim == 1:
            qdot = qdot.reshape(-1, 1)
        qdot = _frozen(qdot, (q.size, qdot.shape[1]) if qdot.ndim == 2 else None, "qdot")
        if qdot.shape[1] < 1:
            raise DimensionError("k must be at least 1")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def k(self) -> int:
        return self.qdot.shape[1]

    def column(self, a: int) -> np.ndarray:
        return self.qdot[:, a]

    def permuted(self, perm) -> "KVelocity":
        return KVelocity(self.q, self.qdot[:, list(perm)])

    def __eq__(self, other):
        if not isinstance(other, KVelocity):
            return NotImplemented
        return np.array_equal(self.q, other.q) and np.array_equal(self.qdot, other.qdot)


@dataclass(frozen=True, eq=False)
class K2Velocity:
    """Point of Q_k^2; ``qddot[i, a, b]`` is symmetric in ``(a, b)``."""

    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray

    def __post_init__(self):
        first = KVelocity(self.q, self.qdot)
        n, k = first.n, first.k
        qddot = _frozen(self.qddot, (n, k, k), "qddot")
        if not np.allclose(qddot, qddot.transpose(0, 2, 1), rtol=0, atol=BASE_TOL * max(1.0, np.abs(qddot).max(initial=0))):
            raise ValidationError("second-order coordinates must be symmetric in the slot indices")
        object.__setattr__(self, "q", first.q)
        object.__setattr__(self, "qdot", first.qdot)
        object.__setattr__(self, "qddot", qddot)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def k(self) -> int:
        return self.qdot.shape[1]

    def project(self) -> KVelocity:
        return KVelocity(self.q, self.qdot)


@dataclass(frozen=True, eq=False)
class Covelocity:
    """Point of (Q_k^1)*: ``p[i, a] = p_i^a``."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, name="q").reshape(-1)
        p = np.array(self.p, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        p = _frozen(p, (q.size, p.shape[1]), "p")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def k(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True, eq=False)
class BundleTangent:
    """Tangent vector to (Q_k^1)* at ``base``: components ``dq`` (n) and ``dp`` (n x k)."""

    base: Covelocity
    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        n, k = self.base.n, self.base.k
        object.__setattr__(self, "dq", _frozen(np.reshape(self.dq, -1), (n,), "dq"))
        object.__setattr__(self, "dp", _frozen(np.reshape(self.dp, (n, k)), (n, k), "dp"))

    @classmethod
    def from_velocity_tangent(cls, metric, X: KVelocity, dq, dqdot) -> "BundleTangent":
        """Push a tangent ``(dq, dqdot)`` of Q_k^1 through ``p = g qdot``.

        ``dp_i^b = d_h g_ij qdot^{j b} dq^h + g_ij dqdot^{j b}``.
        """
        g, dg = metric.derivatives(X.q)
        dq = np.asarray(dq, dtype=float).reshape(-1)
        dqdot = np.asarray(dqdot, dtype=float).reshape(X.n, X.k)
        dp = np.einsum("ijh,jb,h->ib", dg, X.qdot, dq) + g @ dqdot
        sigma = Covelocity(X.q, g @ X.qdot)
        return cls(sigma, dq, dp)

    def scaled(self, c: float) -> "BundleTangent":
        return BundleTangent(self.base, c * self.dq, c * self.dp)


def _check_pair(X: KVelocity, sigma: Covelocity):
    if X.q.shape != sigma.q.shape or not np.allclose(X.q, sigma.q, rtol=0, atol=BASE_TOL * max(1.0, np.abs(X.q).max())):
        raise ValidationError("velocity and covelocity are based at different points")
    if X.k != sigma.k:
        raise DimensionError(f"k mismatch: {X.k} vs {sigma.k}")


def metric_iso(metric, X: KVelocity) -> Covelocity:
    """Lower the point index with g: ``p_i^a = g_ij qdot^{j a}``."""
    g, _ = metric.evaluate(X.q)
    return Covelocity(X.q, g @ X.qdot)


def inverse_iso(metric, sigma: Covelocity) -> KVelocity:
    _, ginv = metric.evaluate(sigma.q)
    return KVelocity(sigma.q, ginv @ sigma.p)


def interior_coupling(X: KVelocity, sigma: Covelocity) -> np.ndarray:
    """End(R^k) matrix ``M[a, b] = sum_i p_i^a qdot^i_b`` (maps input slot b to output slot a)."""
    _check_pair(X, sigma)
    return sigma.p.T @ X.qdot


def pairing(sigma: Covelocity, X: KVelocity) -> float:
    return float(np.trace(interior_coupling(X, sigma)))


def liouville_eval(sigma: Covelocity, D: BundleTangent) -> np.ndarray:
    """theta^a(D) = sum_i p_i^a dq^i.  Ignores ``D.dp``."""
    _check_base(sigma, D)
    return sigma.p.T @ D.dq


def polysymplectic_eval(sigma: Covelocity, D1: BundleTangent, D2: BundleTangent) -> np.ndarray:
    """dtheta^a(D1, D2) = sum_i (D1.dp_i^a D2.dq^i - D2.dp_i^a D1.dq^i)."""
    _check_base(sigma, D1)
    _check_base(sigma, D2)
    return D1.dp.T @ D2.dq - D2.dp.T @ D1.dq


def _check_base(sigma: Covelocity, D: BundleTangent):
    b = D.base
    if b.q.shape != sigma.q.shape or b.p.shape != sigma.p.shape:
        raise DimensionError("tangent is based on a covelocity of different shape")
    scale = max(1.0, np.abs(sigma.q).max(initial=0), np.abs(sigma.p).max(initial=0))
    if not (np.allclose(b.q, sigma.q, rtol=0, atol=BASE_TOL * scale) and np.allclose(b.p, sigma.p, rtol=0, atol=BASE_TOL * scale)):
        raise ValidationError("tangent vector is not based at the given covelocity")
