"""Truncated polynomial algebras R_k^l (l = 1, 2) and jet prolongation.

An element of R_k^l is a polynomial in k nilpotent generators e^1..e^k with
every monomial of total degree > l discarded.  Evaluating a smooth map on
``t + e`` yields its Taylor data at ``t``, which is how every derivative in
this package is obtained.

Storage is dense.  Index 0 holds the constant term, indices ``1..k`` the
coefficients of the generators, and (for l = 2) the remaining slots hold the
coefficients of ``e^a e^b`` for ``a <= b`` in ``numpy.triu_indices`` order.
Those are the literal polynomial coefficients, so for a map evaluated at
``t + e`` the diagonal slot holds half the second partial derivative and an
off-diagonal slot holds the full mixed partial.  ``hessian()`` undoes that.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError

MAX_GENERATORS = 8

LIFTABLE = frozenset(
    {"sin", "cos", "exp", "log", "sqrt", "pow", "reciprocal", "sinh", "cosh", "tan"}
)


@lru_cache(maxsize=None)
def _layout(k: int):
    rows, cols = np.triu_indices(k)
    diag = rows == cols
    pair = np.full((k, k), -1, dtype=int)
    for pos, (a, b) in enumerate(zip(rows, cols)):
        pair[a, b] = pair[b, a] = 1 + k + pos
    return rows, cols, diag, pair


def jet_size(k: int, order: int) -> int:
    if order == 1:
        return 1 + k
    return 1 + k + k * (k + 1) // 2


def multi_indices(k: int, order: int) -> list[tuple[int, ...]]:
    """Exponent tuples in storage order."""
    out = [(0,) * k]
    for a in range(k):
        e = [0] * k
        e[a] = 1
        out.append(tuple(e))
    if order == 2:
        rows, cols, _, _ = _layout(k)
        for a, b in zip(rows, cols):
            e = [0] * k
            e[a] += 1
            e[b] += 1
            out.append(tuple(e))
    return out


class TruncatedPolynomial:
    """Element of R_k^l with l in {1, 2}.  Immutable."""

    __slots__ = ("k", "order", "coeffs")

    def __init__(self, k: int, order: int, coeffs=None):
        if order not in (1, 2):
            raise DimensionError(f"only orders 1 and 2 are supported, got {order}")
        if not 1 <= k <= MAX_GENERATORS:
            raise DimensionError(f"number of generators must be in 1..{MAX_GENERATORS}, got {k}")
        size = jet_size(k, order)
        if coeffs is None:
            c = np.zeros(size)
        else:
            c = np.array(coeffs, dtype=float)
            if c.shape != (size,):
                raise DimensionError(f"expected {size} coefficients for k={k}, order={order}, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedPolynomial is immutable")

    @classmethod
    def _raw(cls, k: int, order: int, c: np.ndarray) -> "TruncatedPolynomial":
        obj = object.__new__(cls)
        c.flags.writeable = False
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "order", order)
        object.__setattr__(obj, "coeffs", c)
        return obj

    @classmethod
    def constant(cls, k: int, order: int, value: float) -> "TruncatedPolynomial":
        c = np.zeros(jet_size(k, order))
        c[0] = value
        return cls(k, order, c)

    @classmethod
    def generator(cls, k: int, order: int, index: int, value: float = 0.0) -> "TruncatedPolynomial":
        """``value + e^(index+1)``; ``index`` is 0-based."""
        if not 0 <= index < k:
            raise DimensionError(f"generator index {index} out of range for k={k}")
        c = np.zeros(jet_size(k, order))
        c[0] = value
        c[1 + index] = 1.0
        return cls(k, order, c)

    @classmethod
    def from_multi_index(cls, k: int, order: int, terms: dict) -> "TruncatedPolynomial":
        index = {m: i for i, m in enumerate(multi_indices(k, order))}
        c = np.zeros(jet_size(k, order))
        for m, v in terms.items():
            m = tuple(m)
            if len(m) != k or any(e < 0 for e in m):
                raise DimensionError(f"bad multi-index {m} for k={k}")
            if sum(m) > order:
                continue
            c[index[m]] += v
        return cls(k, order, c)

    # -- accessors ---------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    @property
    def linear(self) -> np.ndarray:
        return self.coeffs[1 : 1 + self.k]

    def coefficient(self, multi_index: Sequence[int]) -> float:
        m = tuple(multi_index)
        if len(m) != self.k:
            raise DimensionError(f"multi-index {m} has wrong length for k={self.k}")
        deg = sum(m)
        if deg > self.order:
            return 0.0
        if deg == 0:
            return float(self.coeffs[0])
        nz = [a for a, e in enumerate(m) for _ in range(e)]
        if deg == 1:
            return float(self.coeffs[1 + nz[0]])
        _, _, _, pair = _layout(self.k)
        return float(self.coeffs[pair[nz[0], nz[1]]])

    def gradient(self) -> np.ndarray:
        return self.linear.copy()

    def hessian(self) -> np.ndarray:
        """Second partial derivatives recovered from the degree-2 coefficients."""
        if self.order < 2:
            raise DimensionError("hessian needs an order-2 jet")
        k = self.k
        rows, cols, diag, _ = _layout(k)
        q = self.coeffs[1 + k :]
        h = np.zeros((k, k))
        h[rows, cols] = q
        h[cols, rows] = q
        h[np.diag_indices(k)] *= 2.0
        return h

    def nilpotent(self) -> "TruncatedPolynomial":
        c = self.coeffs.copy()
        c[0] = 0.0
        return TruncatedPolynomial._raw(self.k, self.order, c)

    def truncate(self, order: int) -> "TruncatedPolynomial":
        if order > self.order:
            raise DimensionError("cannot raise the truncation order")
        return TruncatedPolynomial._raw(self.k, order, self.coeffs[: jet_size(self.k, order)].copy())

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "TruncatedPolynomial"):
        if other.k != self.k or other.order != self.order:
            raise DimensionError(
                f"mismatched jets: (k={self.k}, order={self.order}) vs (k={other.k}, order={other.order})"
            )

    def __add__(self, other):
        if isinstance(other, TruncatedPolynomial):
            self._check(other)
            return TruncatedPolynomial._raw(self.k, self.order, self.coeffs + other.coeffs)
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = self.coeffs.copy()
            c[0] += other
            return TruncatedPolynomial._raw(self.k, self.order, c)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPolynomial._raw(self.k, self.order, -self.coeffs)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, TruncatedPolynomial):
            self._check(other)
            return TruncatedPolynomial._raw(self.k, self.order, self.coeffs - other.coeffs)
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = self.coeffs.copy()
            c[0] -= other
            return TruncatedPolynomial._raw(self.k, self.order, c)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = -self.coeffs
            c[0] += other
            return TruncatedPolynomial._raw(self.k, self.order, c)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, TruncatedPolynomial):
            self._check(other)
            return jet_mul(self, other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return TruncatedPolynomial._raw(self.k, self.order, self.coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self) -> "TruncatedPolynomial":
        return lift_function("reciprocal", self)

    def __truediv__(self, other):
        if isinstance(other, TruncatedPolynomial):
            return _with_constant(self * other.reciprocal(), self.value / other.value)
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                raise DomainError("division by zero")
            return TruncatedPolynomial._raw(self.k, self.order, self.coeffs / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return _with_constant(self.reciprocal() * other, other / self.value)
        return NotImplemented

    def __pow__(self, n):
        return _int_power(self, n)

    def __eq__(self, other):
        if not isinstance(other, TruncatedPolynomial):
            return NotImplemented
        return self.k == other.k and self.order == other.order and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.k, self.order, self.coeffs.tobytes()))

    def __repr__(self) -> str:
        terms = []
        for m, c in zip(multi_indices(self.k, self.order), self.coeffs):
            if c == 0 and any(m):
                continue
            mono = "*".join(
                (f"e{a + 1}" if e == 1 else f"e{a + 1}^{e}") for a, e in enumerate(m) if e
            )
            terms.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Jet[k={self.k},l={self.order}](" + " + ".join(terms) + ")"


def jet_add(a: TruncatedPolynomial, b: TruncatedPolynomial) -> TruncatedPolynomial:
    a._check(b)
    return a + b


def jet_mul(a: TruncatedPolynomial, b: TruncatedPolynomial) -> TruncatedPolynomial:
    """Product in R_k^l: coefficient convolution with degree > l dropped."""
    a._check(b)
    k = a.k
    x, y = a.coeffs, b.coeffs
    x0, y0 = x[0], y[0]
    c = x0 * y + y0 * x
    c[0] = x0 * y0
    if a.order == 2:
        rows, cols, diag, _ = _layout(k)
        x1, y1 = x[1 : 1 + k], y[1 : 1 + k]
        cross = x1[rows] * y1[cols] + x1[cols] * y1[rows]
        cross[diag] *= 0.5
        c[1 + k :] += cross
    return TruncatedPolynomial._raw(k, a.order, c)


def _with_constant(x, value: float):
    """Replace the constant term so it matches the plain floating-point operation bit for bit."""
    if isinstance(x, TruncatedPolynomial):
        c = x.coeffs.copy()
        c[0] = value
        return TruncatedPolynomial._raw(x.k, x.order, c)
    m = x.m.copy()
    m[0, 0] = value
    return TensorJet._raw(x.k, m)


def _int_power(a, n):
    if isinstance(n, float) and n.is_integer():
        n = int(n)
    if not isinstance(n, (int, np.integer)):
        raise DomainError("jet powers must have integer exponents")
    n = int(n)
    if n < 0:
        if a.value == 0:
            raise DomainError("negative power of a jet with zero constant term")
        return _with_constant(_int_power(a.reciprocal(), -n), a.value**n)
    if n > 1:
        return _with_constant(_int_power_raw(a, n), a.value**n)
    return _int_power_raw(a, n)


def _int_power_raw(a, n):
    result = None
    base = a
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    if result is None:
        return a * 0.0 + 1.0
    return result


# -- univariate Taylor lifting ---------------------------------------------


def taylor_data(name: str, x: float, exponent: float | None = None) -> tuple[float, float, float]:
    """Value, first and second derivative of the named function at ``x``."""
    if name == "sin":
        s, c = math.sin(x), math.cos(x)
        return s, c, -s
    if name == "cos":
        s, c = math.sin(x), math.cos(x)
        return c, -s, -c
    if name == "exp":
        e = math.exp(x)
        return e, e, e
    if name == "log":
        if x <= 0:
            raise DomainError(f"log of non-positive value {x!r}")
        return math.log(x), 1.0 / x, -1.0 / (x * x)
    if name == "sqrt":
        if x <= 0:
            raise DomainError(f"sqrt needs a positive argument for differentiation, got {x!r}")
        r = math.sqrt(x)
        return r, 0.5 / r, -0.25 / (r * x)
    if name == "reciprocal":
        if x == 0:
            raise DomainError("reciprocal of a value with zero constant term")
        r = 1.0 / x
        return r, -r * r, 2.0 * r * r * r
    if name == "sinh":
        return math.sinh(x), math.cosh(x), math.sinh(x)
    if name == "cosh":
        return math.cosh(x), math.sinh(x), math.cosh(x)
    if name == "tan":
        c = math.cos(x)
        if c == 0:
            raise DomainError(f"tan has a pole at {x!r}")
        t = math.tan(x)
        sec2 = 1.0 + t * t
        return t, sec2, 2.0 * t * sec2
    if name == "pow":
        if exponent is None:
            raise DomainError("pow needs an exponent")
        p = exponent
        if float(p).is_integer():
            p = int(p)
            if p < 0 and x == 0:
                raise DomainError("negative power of zero")
            f0 = x**p
            f1 = p * x ** (p - 1) if p != 0 else 0.0
            f2 = p * (p - 1) * x ** (p - 2) if p not in (0, 1) else 0.0
            return float(f0), float(f1), float(f2)
        if x <= 0:
            raise DomainError(f"non-integer power of non-positive value {x!r}")
        return x**p, p * x ** (p - 1), p * (p - 1) * x ** (p - 2)
    raise DomainError(f"function '{name}' cannot be lifted")


def lift_function(name: str, a, exponent: float | None = None):
    """f(a0) + f'(a0)*abar + f''(a0)/2 * abar**2, exact in any algebra whose maximal ideal cubes to zero."""
    if name not in LIFTABLE:
        raise DomainError(f"function '{name}' is not in the liftable set")
    f0, f1, f2 = taylor_data(name, a.value, exponent)
    bar = a.nilpotent()
    out = bar * f1 + f0
    if getattr(a, "order", 2) >= 2:
        out = out + (bar * bar) * (0.5 * f2)
    return out


# -- R_k^1 (x) R_k^1 ---------------------------------------------------------


class TensorJet:
    """Element of R_k^1 (x) R_k^1 as a (1+k) x (1+k) coefficient matrix.

    ``m[a, b]`` multiplies ``u_a (x) u_b`` with ``u_0 = 1`` and ``u_a = e^a``.
    """

    __slots__ = ("k", "m")
    order = 2  # its maximal ideal cubes to zero

    def __init__(self, k: int, m=None):
        if not 1 <= k <= MAX_GENERATORS:
            raise DimensionError(f"number of generators must be in 1..{MAX_GENERATORS}, got {k}")
        arr = np.zeros((1 + k, 1 + k)) if m is None else np.array(m, dtype=float)
        if arr.shape != (1 + k, 1 + k):
            raise DimensionError(f"expected a {(1 + k, 1 + k)} coefficient matrix, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "m", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TensorJet is immutable")

    @classmethod
    def _raw(cls, k, arr):
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "k", k)
        object.__setattr__(obj, "m", arr)
        return obj

    @classmethod
    def diagonal_generator(cls, k: int, index: int, value: float = 0.0) -> "TensorJet":
        """``value + e^a (x) 1 + 1 (x) e^a``, the image of a shifted generator."""
        arr = np.zeros((1 + k, 1 + k))
        arr[0, 0] = value
        arr[1 + index, 0] = 1.0
        arr[0, 1 + index] = 1.0
        return cls(k, arr)

    @property
    def value(self) -> float:
        return float(self.m[0, 0])

    def nilpotent(self) -> "TensorJet":
        arr = self.m.copy()
        arr[0, 0] = 0.0
        return TensorJet._raw(self.k, arr)

    def _check(self, other):
        if other.k != self.k:
            raise DimensionError(f"mismatched tensor jets: k={self.k} vs k={other.k}")

    def __add__(self, other):
        if isinstance(other, TensorJet):
            self._check(other)
            return TensorJet._raw(self.k, self.m + other.m)
        if isinstance(other, (int, float, np.floating, np.integer)):
            arr = self.m.copy()
            arr[0, 0] += other
            return TensorJet._raw(self.k, arr)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return TensorJet._raw(self.k, -self.m)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TensorJet):
            self._check(other)
            a, b = self.m, other.m
            c = a[0, 0] * b + b[0, 0] * a
            c[0, 0] = a[0, 0] * b[0, 0]
            c[1:, 1:] += np.outer(a[1:, 0], b[0, 1:]) + np.outer(b[1:, 0], a[0, 1:])
            return TensorJet._raw(self.k, c)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return TensorJet._raw(self.k, self.m * other)
        return NotImplemented

    __rmul__ = __mul__

    def reciprocal(self):
        return lift_function("reciprocal", self)

    def __truediv__(self, other):
        if isinstance(other, TensorJet):
            return _with_constant(self * other.reciprocal(), self.value / other.value)
        if isinstance(other, (int, float, np.floating, np.integer)):
            if other == 0:
                raise DomainError("division by zero")
            return TensorJet._raw(self.k, self.m / other)
        return NotImplemented

    def __rtruediv__(self, other):
        return _with_constant(self.reciprocal() * other, other / self.value)

    def __pow__(self, n):
        return _int_power(self, n)

    def __eq__(self, other):
        if not isinstance(other, TensorJet):
            return NotImplemented
        return self.k == other.k and bool(np.array_equal(self.m, other.m))

    def __hash__(self):
        return hash((self.k, self.m.tobytes()))

    def __repr__(self):
        return f"TensorJet(k={self.k}, m={self.m.tolist()})"


def mu_embed(s: TruncatedPolynomial) -> TensorJet:
    """The algebra morphism R_k^2 -> R_k^1 (x) R_k^1 sending e^a to e^a(x)1 + 1(x)e^a."""
    if s.order != 2:
        raise DimensionError("mu_embed needs an order-2 jet")
    k = s.k
    c = s.coeffs
    rows, cols, diag, _ = _layout(k)
    arr = np.zeros((1 + k, 1 + k))
    arr[0, 0] = c[0]
    arr[1:, 0] = c[1 : 1 + k]
    arr[0, 1:] = c[1 : 1 + k]
    quad = c[1 + k :]
    # e^a e^b -> e^a(x)e^b + e^b(x)e^a ; (e^a)^2 -> 2 e^a(x)e^a
    arr[1 + rows, 1 + cols] += quad
    arr[1 + cols, 1 + rows] += quad
    return TensorJet(k, arr)


# -- helpers shared with other modules ---------------------------------------


def is_jet(x) -> bool:
    return isinstance(x, (TruncatedPolynomial, TensorJet))


def constant_term(x) -> float:
    return x.value if is_jet(x) else float(x)


def _coerce(x, k: int, order: int) -> TruncatedPolynomial:
    if isinstance(x, TruncatedPolynomial):
        return x
    return TruncatedPolynomial.constant(k, order, float(x))


def prolong1(gamma: Callable, t: Sequence[float]):
    """First prolongation of ``gamma`` at ``t``: position and first partials."""
    from .bundles import KVelocity

    t = [float(v) for v in t]
    k = len(t)
    out = [_coerce(v, k, 1) for v in gamma([TruncatedPolynomial.generator(k, 1, a, t[a]) for a in range(k)])]
    q = np.array([o.value for o in out])
    qdot = np.array([o.linear for o in out]).reshape(len(out), k)
    return KVelocity(q, qdot)


def prolong2(gamma: Callable, t: Sequence[float]):
    """Second prolongation: position, first partials and the (symmetric) Hessian per component."""
    from .bundles import K2Velocity

    t = [float(v) for v in t]
    k = len(t)
    out = [_coerce(v, k, 2) for v in gamma([TruncatedPolynomial.generator(k, 2, a, t[a]) for a in range(k)])]
    q = np.array([o.value for o in out])
    qdot = np.array([o.linear for o in out]).reshape(len(out), k)
    qddot = np.array([o.hessian() for o in out]).reshape(len(out), k, k)
    return K2Velocity(q, qdot, qddot)


def iterated_prolong(gamma: Callable, t: Sequence[float]) -> list[TensorJet]:
    """Evaluate ``gamma`` on ``t^a + e^a(x)1 + 1(x)e^a``: a point of the iterated velocity bundle.

    For each output component the matrix entry ``[1+a, 1+b]`` is the coordinate
    ``(qdot_b)_a``.
    """
    t = [float(v) for v in t]
    k = len(t)
    args = [TensorJet.diagonal_generator(k, a, t[a]) for a in range(k)]
    res = []
    for v in gamma(args):
        if not isinstance(v, TensorJet):
            arr = np.zeros((1 + k, 1 + k))
            arr[0, 0] = float(v)
            v = TensorJet(k, arr)
        res.append(v)
    return res


def gradient(fun: Callable, x: Sequence[float]) -> tuple[float, np.ndarray]:
    """Value and exact gradient of a scalar function of many variables.

    ``fun`` receives a list of scalar-likes.  Variables are seeded in chunks of
    at most ``MAX_GENERATORS`` order-1 generators, the rest held constant.
    """
    x = [float(v) for v in x]
    m = len(x)
    grad = np.zeros(m)
    value = None
    for start in range(0, m, MAX_GENERATORS):
        stop = min(m, start + MAX_GENERATORS)
        k = stop - start
        args = list(x)
        for a in range(k):
            args[start + a] = TruncatedPolynomial.generator(k, 1, a, x[start + a])
        out = fun(args)
        if isinstance(out, TruncatedPolynomial):
            value = out.value
            grad[start:stop] = out.linear
        else:
            value = float(out)
    if value is None:
        value = float(fun(x))
    return value, grad


def directional_derivative(fun: Callable, x: Sequence[float], direction: Sequence[float]):
    """Value and derivative of ``fun`` along ``direction`` (one generator).

    ``fun`` may return a scalar-like or a flat sequence of them; the result
    mirrors that shape as floats / numpy arrays.
    """
    args = [TruncatedPolynomial.constant(1, 1, float(v)) + float(d) * TruncatedPolynomial.generator(1, 1, 0) for v, d in zip(x, direction)]
    out = fun(args)
    if isinstance(out, (list, tuple, np.ndarray)):
        vals = np.array([constant_term(o) for o in out])
        ders = np.array([o.linear[0] if isinstance(o, TruncatedPolynomial) else 0.0 for o in out])
        return vals, ders
    if isinstance(out, TruncatedPolynomial):
        return out.value, float(out.linear[0])
    return float(out), 0.0
