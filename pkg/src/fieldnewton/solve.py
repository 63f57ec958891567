"""Geodesic integration, solution sheets and finite-difference residuals.

A :class:`Sheet` samples a map from a rectangle of R^k into the chart on a
uniform grid.  Residuals use second-order central stencils and skip every
node without a full stencil; the number skipped is reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bundles import K2Velocity, KVelocity
from .dynamics import SOPDE, ForceField, geodesic_sopde, newton_sopde
from .errors import DimensionError, StencilError, ValidationError
from .geometry import MetricField, geodesic_acceleration

MIN_NODES = 5
RANK_TOL = 1e-12


# -- sheets -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sheet:
    """Grid samples ``values[idx] = q(t_idx)`` with ``values.shape == (*counts, n)``."""

    axes: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        counts = tuple(a.size for a in axes)
        if values.ndim != len(axes) + 1 or values.shape[:-1] != counts:
            raise DimensionError(f"values shape {values.shape} does not match grid {counts} + (n,)")
        for a in axes:
            if a.size < MIN_NODES:
                raise StencilError(f"each axis needs at least {MIN_NODES} nodes, got {a.size}")
            d = np.diff(a)
            if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                raise ValidationError("grid axes must be increasing and uniformly spaced")
        if not np.all(np.isfinite(values)):
            raise ValidationError("sheet has non-finite values")
        for a in axes:
            a.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(a[-1] - a[0]) / (a.size - 1) for a in self.axes])

    def point(self, idx) -> np.ndarray:
        return np.array([self.axes[a][i] for a, i in enumerate(idx)])

    @classmethod
    def from_function(cls, fun: Callable, extents: Sequence[tuple[float, float]], counts: Sequence[int]) -> "Sheet":
        axes = grid_axes(extents, counts)
        shape = tuple(a.size for a in axes)
        first = np.asarray(fun(np.array([a[0] for a in axes])), dtype=float).reshape(-1)
        values = np.empty(shape + (first.size,))
        for idx in np.ndindex(*shape):
            t = np.array([axes[a][i] for a, i in enumerate(idx)])
            values[idx] = np.asarray(fun(t), dtype=float).reshape(-1)
        return cls(axes, values)


def grid_axes(extents: Sequence[tuple[float, float]], counts: Sequence[int]) -> tuple[np.ndarray, ...]:
    if len(extents) != len(counts):
        raise DimensionError("extents and counts must have one entry per parameter")
    axes = []
    for (lo, hi), c in zip(extents, counts):
        if c < MIN_NODES:
            raise StencilError(f"each axis needs at least {MIN_NODES} nodes, got {c}")
        if not hi > lo:
            raise ValidationError(f"empty extent [{lo}, {hi}]")
        axes.append(np.linspace(float(lo), float(hi), int(c)))
    return tuple(axes)


def _shift(arr: np.ndarray, axis: int, offset: int, margin: int, k: int) -> np.ndarray:
    """View of the first ``k`` (grid) axes of ``arr`` over the interior, displaced along ``axis``."""
    sl = []
    for a in range(k):
        size = arr.shape[a]
        off = offset if a == axis else 0
        sl.append(slice(margin + off, size - margin + off))
    return arr[tuple(sl)]


def _shift2(arr, a1, o1, a2, o2, margin, k):
    sl = []
    for a in range(k):
        size = arr.shape[a]
        off = (o1 if a == a1 else 0) + (o2 if a == a2 else 0)
        sl.append(slice(margin + off, size - margin + off))
    return arr[tuple(sl)]


def difference_first(arr: np.ndarray, h: Sequence[float], margin: int = 1) -> np.ndarray:
    """Central first differences of a gridded field ``arr[*grid, ...]`` on the interior.

    Returns ``out[*interior, ..., a]``.
    """
    k = len(h)
    parts = [(_shift(arr, a, 1, margin, k) - _shift(arr, a, -1, margin, k)) / (2.0 * h[a]) for a in range(k)]
    return np.stack(parts, axis=-1)


def difference_second(arr: np.ndarray, h: Sequence[float], margin: int = 1) -> np.ndarray:
    """Compact central second differences; ``out[*interior, ..., a, b]``."""
    k = len(h)
    inner = _shift(arr, 0, 0, margin, k)
    out = np.empty(inner.shape + (k, k))
    for a in range(k):
        out[..., a, a] = (_shift(arr, a, 1, margin, k) - 2.0 * inner + _shift(arr, a, -1, margin, k)) / (h[a] * h[a])
        for b in range(a + 1, k):
            m = (
                _shift2(arr, a, 1, b, 1, margin, k)
                - _shift2(arr, a, 1, b, -1, margin, k)
                - _shift2(arr, a, -1, b, 1, margin, k)
                + _shift2(arr, a, -1, b, -1, margin, k)
            ) / (4.0 * h[a] * h[b])
            out[..., a, b] = out[..., b, a] = m
    return out


def interior_shape(sheet: Sheet, margin: int) -> tuple[int, ...]:
    return tuple(c - 2 * margin for c in sheet.counts)


def boundary_count(sheet: Sheet, margin: int) -> int:
    return int(np.prod(sheet.counts) - np.prod(interior_shape(sheet, margin)))


def sheet_prolong(sheet: Sheet, node: Sequence[int]) -> tuple[KVelocity, K2Velocity]:
    """Central-difference first and second prolongation at a grid node with a full stencil."""
    node = tuple(int(i) for i in node)
    if len(node) != sheet.k:
        raise DimensionError(f"node index needs {sheet.k} entries")
    for i, c in zip(node, sheet.counts):
        if not 1 <= i <= c - 2:
            raise StencilError(f"node {node} lies on the boundary; no central stencil")
    h = sheet.spacing
    # a 3^k neighbourhood keeps the stencil helpers unchanged
    sl = tuple(slice(i - 1, i + 2) for i in node)
    block = sheet.values[sl]
    qdot = difference_first(block, h)[(0,) * sheet.k]  # (n, k)
    qddot = difference_second(block, h)[(0,) * sheet.k]  # (n, k, k)
    q = sheet.values[node]
    return KVelocity(q, qdot), K2Velocity(q, qdot, qddot)


# -- geodesics ----------------------------------------------------------------


def _rk4_step(g: MetricField, x: np.ndarray, v: np.ndarray, ds: float):
    def acc(xx, vv):
        return geodesic_acceleration(g, xx, vv)

    k1x, k1v = v, acc(x, v)
    k2x, k2v = v + 0.5 * ds * k1v, acc(x + 0.5 * ds * k1x, v + 0.5 * ds * k1v)
    k3x, k3v = v + 0.5 * ds * k2v, acc(x + 0.5 * ds * k2x, v + 0.5 * ds * k2v)
    k4x, k4v = v + ds * k3v, acc(x + ds * k3x, v + ds * k3v)
    x = x + ds / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v = v + ds / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x, v


def exp_map(g: MetricField, q, v, steps: int = 1000) -> np.ndarray:
    """Endpoint at parameter 1 of the geodesic through ``q`` with velocity ``v`` (fixed-step RK4)."""
    if steps < 1:
        raise ValidationError("steps must be positive")
    x = np.asarray(q, dtype=float).reshape(-1).copy()
    vel = np.asarray(v, dtype=float).reshape(-1).copy()
    if not np.any(vel):
        return x
    ds = 1.0 / steps
    for _ in range(steps):
        x, vel = _rk4_step(g, x, vel, ds)
    return x


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    s: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    step: float
    method: str = "rk4"

    def energies(self, g: MetricField) -> np.ndarray:
        return np.array([0.5 * v @ g.matrix(x) @ v for x, v in zip(self.q, self.qdot)])


def geodesic_path(g: MetricField, q, v, length: float = 1.0, step: float = 1e-3, sample_every: int = 1) -> GeodesicPath:
    x = np.asarray(q, dtype=float).reshape(-1).copy()
    vel = np.asarray(v, dtype=float).reshape(-1).copy()
    steps = max(1, int(math.ceil(length / step - 1e-12)))
    ds = length / steps
    S, Q, V = [0.0], [x], [vel]
    for i in range(1, steps + 1):
        x, vel = _rk4_step(g, x, vel, ds)
        if i % sample_every == 0 or i == steps:
            S.append(i * ds)
            Q.append(x)
            V.append(vel)
    return GeodesicPath(np.array(S), np.array(Q), np.array(V), ds)


def geodesic_samples(g: MetricField, q, w, targets: np.ndarray, dt: float = 1e-3) -> np.ndarray:
    """Positions ``c(s)`` for every ``s`` in ``targets`` along the geodesic ``c(0)=q, c'(0)=w``.

    Integration marches outward from 0 in both directions, landing exactly on
    each target with uniform substeps no longer than ``dt``.
    """
    targets = np.asarray(targets, dtype=float)
    out = np.empty((targets.size, np.size(q)))
    q = np.asarray(q, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    for sign in (1.0, -1.0):
        idx = np.where(targets * sign >= 0)[0]
        order = idx[np.argsort(targets[idx] * sign)]
        x, vel, s = q.copy(), sign * w, 0.0
        for j in order:
            goal = abs(targets[j])
            if goal > s:
                nsub = max(1, int(math.ceil((goal - s) / dt - 1e-12)))
                ds = (goal - s) / nsub
                for _ in range(nsub):
                    x, vel = _rk4_step(g, x, vel, ds)
                s = goal
            out[j] = x
    return out


def rank1_decomposition(X: KVelocity) -> tuple[np.ndarray, np.ndarray]:
    """``(w, lam)`` with ``X.qdot[:, a] == lam[a] * w``; raises if the rank exceeds 1."""
    cols = X.qdot
    norms = np.linalg.norm(cols, axis=0)
    j = int(np.argmax(norms))
    if norms[j] == 0:
        return np.zeros(X.n), np.zeros(X.k)
    w = cols[:, j].copy()
    lam = cols.T @ w / (w @ w)
    err = np.abs(cols - np.outer(w, lam)).max()
    if err > RANK_TOL * max(1.0, norms[j]):
        raise ValidationError(f"k-velocity has rank > 1 (deviation {err:.3e})")
    lam[j] = 1.0
    return w, lam


def rank1_sheet(g: MetricField, q, X: KVelocity, extents, counts, dt: float = 1e-3) -> Sheet:
    """Sheet ``t -> c(lam . t)`` for ``X_a = lam_a w`` and the geodesic ``c`` through ``(q, w)``."""
    w, lam = rank1_decomposition(X)
    axes = grid_axes(extents, counts)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    s = mesh @ lam
    uniq, inverse = np.unique(s.reshape(-1), return_inverse=True)
    pts = geodesic_samples(g, q, w, uniq, dt)
    values = pts[inverse].reshape(s.shape + (np.size(q),))
    return Sheet(axes, values)


def flat_newton_sheet(F, a, b, extents, counts) -> Sheet:
    """Exact solution ``q = a + b t + 1/2 F t t`` of the flat-metric law with constant force."""
    if isinstance(F, ForceField):
        if not F.is_constant():
            raise ValidationError("flat_newton_sheet needs a constant force")
        F = F.evaluate(KVelocity(np.zeros(F.n), np.zeros((F.n, F.k))))
    F = np.asarray(F, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float)
    n = a.size
    k = b.shape[1]
    if F.shape != (n, k, k) or b.shape != (n, k):
        raise DimensionError(f"need F of shape {(n, k, k)} and b of shape {(n, k)}")
    if not np.array_equal(F, F.transpose(0, 2, 1)):
        raise ValidationError("force not symmetric in (α,β)")

    def fun(t):
        return a + b @ t + 0.5 * np.einsum("iab,a,b->i", F, t, t)

    return Sheet.from_function(fun, extents, counts)


# -- residuals ----------------------------------------------------------------


@dataclass
class Residual:
    """Per-interior-node residual array plus bookkeeping."""

    values: np.ndarray
    margin: int
    skipped: int
    extra: dict = field(default_factory=dict)

    @property
    def max(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


def _nodes(shape):
    return np.ndindex(*shape)


def newton_residual(g: MetricField, F: ForceField | None, sheet: Sheet, sopde: SOPDE | None = None) -> Residual:
    """Second differences of the sheet minus the prescribed ``A(q, qdot)`` at interior nodes."""
    if sheet.n != g.n:
        raise DimensionError(f"sheet has n={sheet.n}, metric has n={g.n}")
    if sopde is None:
        sopde = geodesic_sopde(g, sheet.k) if F is None else newton_sopde(g, F)
    h = sheet.spacing
    qdot = difference_first(sheet.values, h)
    qddot = difference_second(sheet.values, h)
    q = _shift(sheet.values, 0, 0, 1, sheet.k)
    res = np.empty(qddot.shape)
    for idx in _nodes(q.shape[:-1]):
        X = KVelocity(q[idx], qdot[idx])
        res[idx] = qddot[idx] - sopde.coefficients(X)
    return Residual(res, 1, boundary_count(sheet, 1))


def compatibility_defect(D: SOPDE, X: KVelocity) -> float:
    """max |D_a A^i_bc - D_b A^i_ac|: failure of the third derivatives to commute."""
    k = X.k
    A = D.coefficients(X)
    DA = [D.directional(X, X.qdot[:, a], A[:, a, :]) for a in range(k)]
    worst = 0.0
    for a in range(k):
        for b in range(a + 1, k):
            worst = max(worst, float(np.abs(DA[a][:, b, :] - DA[b][:, a, :]).max()))
    return worst


# -- CSV ------------------------------------------------------------------------


def emit_sheet(sheet: Sheet, path, overwrite: bool = False) -> Path:
    """Write ``t1..tk,q1..qn`` rows, last grid axis fastest, 17 significant digits."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"refusing to overwrite existing file {path} (pass overwrite=True)")
    header = [f"t{a + 1}" for a in range(sheet.k)] + [f"q{i + 1}" for i in range(sheet.n)]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for idx in np.ndindex(*sheet.counts):
                row = [sheet.axes[a][i] for a, i in enumerate(idx)] + list(sheet.values[idx])
                w.writerow([format(float(x), ".17g") for x in row])
    except OSError as exc:
        raise OSError(f"could not write sheet to {path}: {exc}") from exc
    return path


def read_sheet(path) -> Sheet:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    k = sum(1 for h in header if h.startswith("t"))
    n = len(header) - k
    data = np.array([[float(x) for x in r] for r in body])
    axes = [np.unique(data[:, a]) for a in range(k)]
    counts = tuple(a.size for a in axes)
    if data.shape[0] != int(np.prod(counts)):
        raise ValidationError(f"{path}: row count does not match a full rectangular grid")
    values = data[:, k:].reshape(counts + (n,))
    return Sheet(tuple(axes), values)
