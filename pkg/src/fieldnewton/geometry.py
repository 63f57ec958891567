"""Charts, pseudo-Riemannian metrics and Levi-Civita connection coefficients.

Metric components are expression trees; their derivatives come from evaluating
them on jets, never from finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang
from .bundles import KVelocity
from .errors import DegenerateMetricError, DimensionError, ValidationError
from .jets import TruncatedPolynomial, is_jet

DEGENERACY_TOL = 1e-12
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Chart:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) < 1:
            raise ValidationError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValidationError(f"coordinate names must be distinct: {names}")
        object.__setattr__(self, "names", names)

    @classmethod
    def standard(cls, n: int) -> "Chart":
        return cls(tuple(f"q{i + 1}" for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.names)

    def env(self, q: Sequence) -> dict:
        if len(q) != self.n:
            raise DimensionError(f"point has {len(q)} coordinates, chart has {self.n}")
        return dict(zip(self.names, q))


class MetricField:
    """Symmetric n x n array of expressions over a chart."""

    def __init__(self, chart: Chart, entries, name: str = "custom"):
        n = chart.n
        rows = [list(r) for r in entries]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise DimensionError(f"metric must be {n}x{n}")
        parsed = [
            [exprlang.parse(e, chart.names) if isinstance(e, str) else _as_expr(e) for e in r] for r in rows
        ]
        for r in parsed:
            for e in r:
                if exprlang.uses_velocity(e):
                    raise ValidationError("metric components may not depend on velocities")
        self.chart = chart
        self.entries = tuple(tuple(r) for r in parsed)
        self.name = name
        # off-diagonal pairs whose trees differ are compared numerically on every evaluation
        self._asym_pairs = [
            (i, j) for i in range(n) for j in range(i + 1, n) if self.entries[i][j] != self.entries[j][i]
        ]
        self._compiled = [[exprlang.compile_expr(e) for e in r] for r in self.entries]
        self._is_const = [[exprlang.is_constant(e) for e in r] for r in self.entries]

    def is_constant(self) -> bool:
        return all(all(r) for r in self._is_const)

    @property
    def n(self) -> int:
        return self.chart.n

    def __repr__(self):
        return f"MetricField({self.name!r}, n={self.n})"

    # -- generic evaluation ---------------------------------------------------

    def components(self, q: Sequence) -> list[list]:
        """Upper triangle evaluated on ``q`` (floats or jets), mirrored to a full nested list."""
        env = self.chart.env(q)
        n = self.n
        out = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                v = self._compiled[i][j](env)
                out[i][j] = out[j][i] = v
        for i, j in self._asym_pairs:
            other = self._compiled[j][i](env)
            a, b = _const(out[i][j]), _const(other)
            if abs(a - b) > SYMMETRY_TOL * max(1.0, abs(a), abs(b)):
                raise ValidationError(f"metric is not symmetric: g[{i + 1}][{j + 1}]={a!r}, g[{j + 1}][{i + 1}]={b!r}")
        return out

    def matrix(self, q) -> np.ndarray:
        q = [float(v) for v in np.asarray(q, dtype=float).reshape(-1)]
        return np.array(self.components(q), dtype=float)

    def evaluate(self, q) -> tuple[np.ndarray, np.ndarray]:
        """Matrix and inverse at ``q``; raises DegenerateMetricError when singular."""
        g = self.matrix(q)
        return g, _checked_inverse(g)

    def derivatives(self, q) -> tuple[np.ndarray, np.ndarray]:
        """``(g, dg)`` with ``dg[i, j, m] = d g_ij / d q^m``."""
        n = self.n
        q = np.asarray(q, dtype=float).reshape(-1)
        jets = [TruncatedPolynomial.generator(n, 1, m, q[m]) for m in range(n)]
        comps = self.components(jets)
        g = np.empty((n, n))
        dg = np.zeros((n, n, n))
        for i in range(n):
            for j in range(i, n):
                v = comps[i][j]
                if is_jet(v):
                    g[i, j] = g[j, i] = v.coeffs[0]
                    dg[i, j] = dg[j, i] = v.coeffs[1 : 1 + n]
                else:
                    g[i, j] = g[j, i] = v
        return g, dg

    def second_derivatives(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(g, dg, ddg)`` with ``ddg[i, j, m, h] = d^2 g_ij / dq^m dq^h``."""
        n = self.n
        q = np.asarray(q, dtype=float).reshape(-1)
        jets = [TruncatedPolynomial.generator(n, 2, m, q[m]) for m in range(n)]
        comps = self.components(jets)
        g = np.empty((n, n))
        dg = np.zeros((n, n, n))
        ddg = np.zeros((n, n, n, n))
        for i in range(n):
            for j in range(i, n):
                v = comps[i][j]
                if is_jet(v):
                    g[i, j] = g[j, i] = v.coeffs[0]
                    dg[i, j] = dg[j, i] = v.coeffs[1 : 1 + n]
                    ddg[i, j] = ddg[j, i] = v.hessian()
                else:
                    g[i, j] = g[j, i] = v
        return g, dg, ddg


def _as_expr(e):
    if isinstance(e, (int, float)):
        return exprlang.Num(float(e))
    return e


def _const(v) -> float:
    return v.value if is_jet(v) else float(v)


def _checked_inverse(g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    scale = np.abs(g).max(initial=0.0)
    det = np.linalg.det(g) if n > 1 else g[0, 0]
    if scale == 0 or abs(det) <= DEGENERACY_TOL * scale**n:
        raise DegenerateMetricError(f"metric is degenerate (det={det:.3e}, scale={scale:.3e})")
    return np.linalg.inv(g)


def metric_eval(g: MetricField, q) -> tuple[np.ndarray, np.ndarray]:
    return g.evaluate(q)


# -- connection ---------------------------------------------------------------


def _gamma_from(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("lm,mij->lij", ginv, _first_kind(dg))


def _first_kind(dg: np.ndarray) -> np.ndarray:
    # S[m, i, j] = d_i g_jm + d_j g_im - d_m g_ij, with dg[a, b, c] = d_c g_ab
    return np.einsum("jmi->mij", dg) + np.einsum("imj->mij", dg) - np.einsum("ijm->mij", dg)


def christoffel(g: MetricField, q) -> np.ndarray:
    """``Gamma[l, i, j]``, symmetric in ``(i, j)``."""
    gm, dg = g.derivatives(q)
    return _gamma_from(_checked_inverse(gm), dg)


def christoffel_directional(g: MetricField, q, dq) -> tuple[np.ndarray, np.ndarray]:
    """Christoffel symbols and their derivative along ``dq``."""
    gm, dg, ddg = g.second_derivatives(q)
    ginv = _checked_inverse(gm)
    dq = np.asarray(dq, dtype=float).reshape(-1)
    dg_dir = np.einsum("ijm,m->ij", dg, dq)
    ddg_dir = np.einsum("ijmh,h->ijm", ddg, dq)
    dginv = -ginv @ dg_dir @ ginv
    s = _first_kind(dg)
    ds = _first_kind(ddg_dir)
    gamma = 0.5 * np.einsum("lm,mij->lij", ginv, s)
    dgamma = 0.5 * (np.einsum("lm,mij->lij", dginv, s) + np.einsum("lm,mij->lij", ginv, ds))
    return gamma, dgamma


def geodesic_acceleration(g: MetricField, q, v) -> np.ndarray:
    gamma = christoffel(g, q)
    return -np.einsum("lij,i,j->l", gamma, v, v)


# -- kinetic energy -----------------------------------------------------------


def kinetic_energy(g: MetricField, X: KVelocity) -> float:
    """Half of g(v, v) for a single tangent vector (k = 1)."""
    if X.k != 1:
        raise DimensionError("kinetic_energy is defined for k = 1; use k_kinetic_energy")
    return k_kinetic_energy(g, X)


def k_kinetic_energy(g: MetricField, X: KVelocity) -> float:
    """Half the sum over slots of g(X_a, X_a)."""
    gm = g.matrix(X.q)
    return 0.5 * float(np.einsum("ij,ia,ja->", gm, X.qdot, X.qdot))


def k_kinetic_energy_generic(g: MetricField, q: Sequence, qdot: Sequence[Sequence]):
    """Same as :func:`k_kinetic_energy` over arbitrary scalar-likes; ``qdot[i][a]``."""
    comps = g.components(q)
    n = len(q)
    k = len(qdot[0])
    total = 0.0
    for i in range(n):
        for j in range(n):
            gij = comps[i][j]
            if not is_jet(gij) and gij == 0:
                continue
            s = 0.0
            for a in range(k):
                s = s + qdot[i][a] * qdot[j][a]
            total = total + gij * s
    return total * 0.5


def inverse_generic(m: list[list]) -> list[list]:
    """Gauss-Jordan inverse of a small matrix of floats or jets (pivoting on constant terms)."""
    n = len(m)
    a = [list(r) + [1.0 if i == j else 0.0 for j in range(n)] for i, r in enumerate(m)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(_const(a[r][col])))
        if _const(a[piv][col]) == 0:
            raise DegenerateMetricError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        inv_p = 1.0 / a[col][col] if not is_jet(a[col][col]) else a[col][col].reciprocal()
        a[col] = [x * inv_p for x in a[col]]
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            if not is_jet(f) and f == 0:
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


# -- catalog ------------------------------------------------------------------


def flat(n: int) -> MetricField:
    chart = Chart.standard(n)
    return MetricField(chart, [["1" if i == j else "0" for j in range(n)] for i in range(n)], name=f"flat({n})")


def minkowski(n: int) -> MetricField:
    if n < 2:
        raise ValidationError("minkowski needs n >= 2")
    chart = Chart.standard(n)
    diag = ["-1"] + ["1"] * (n - 1)
    return MetricField(chart, [[diag[i] if i == j else "0" for j in range(n)] for i in range(n)], name=f"minkowski({n})")


def sphere2(radius: float = 1.0) -> MetricField:
    """Round sphere in (theta, phi); degenerate where sin(theta) = 0."""
    r2 = repr(float(radius) ** 2)
    chart = Chart(("theta", "phi"))
    return MetricField(chart, [[r2, "0"], ["0", f"{r2}*sin(theta)^2"]], name="sphere2")


def hyperbolic2() -> MetricField:
    """Poincare upper half-plane in (x, y), y > 0."""
    chart = Chart(("x", "y"))
    return MetricField(chart, [["1/y^2", "0"], ["0", "1/y^2"]], name="hyperbolic2")


def product(*factors: MetricField) -> MetricField:
    """Block-diagonal product; clashing coordinate names get a ``_<factor>`` suffix."""
    if not factors:
        raise ValidationError("product needs at least one factor")
    names: list[str] = []
    blocks = []
    for f_idx, f in enumerate(factors):
        rename = {}
        for nm in f.chart.names:
            new = nm if nm not in names else f"{nm}_{f_idx + 1}"
            rename[nm] = new
            names.append(new)
        blocks.append((f, rename))
    n = len(names)
    entries = [[exprlang.Num(0.0)] * n for _ in range(n)]
    off = 0
    for f, rename in blocks:
        for i in range(f.n):
            for j in range(f.n):
                entries[off + i][off + j] = _rename(f.entries[i][j], rename)
        off += f.n
    return MetricField(Chart(tuple(names)), entries, name="product(" + ",".join(f.name for f in factors) + ")")


def _rename(e, mapping):
    E = exprlang
    if isinstance(e, E.Var):
        return E.Var(mapping.get(e.name, e.name))
    if isinstance(e, (E.Num, E.Vel)):
        return e
    if isinstance(e, E.Neg):
        return E.Neg(_rename(e.operand, mapping))
    if isinstance(e, E.BinOp):
        return E.BinOp(e.op, _rename(e.left, mapping), _rename(e.right, mapping))
    if isinstance(e, E.Pow):
        return E.Pow(_rename(e.base, mapping), e.exponent)
    if isinstance(e, E.Call):
        return E.Call(e.name, _rename(e.arg, mapping))
    raise TypeError(e)


CATALOG = ("flat", "minkowski", "sphere2", "hyperbolic2", "product")


def from_catalog(name: str, **params) -> MetricField:
    if name == "flat":
        return flat(int(params.get("n", 2)))
    if name == "minkowski":
        return minkowski(int(params.get("n", 2)))
    if name == "sphere2":
        return sphere2(float(params.get("radius", 1.0)))
    if name == "hyperbolic2":
        return hyperbolic2()
    if name == "product":
        factors = params.get("factors")
        if not factors:
            raise ValidationError("product metric needs a non-empty 'factors' list")
        built = []
        for f in factors:
            f = dict(f)
            built.append(from_catalog(f.pop("name"), **f))
        return product(*built)
    raise ValidationError(f"unknown catalog metric '{name}' (known: {', '.join(CATALOG)})")
