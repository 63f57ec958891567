"""Shared fixtures: the metric catalog with in-domain samplers and random forces."""

import numpy as np

from fieldnewton import geometry as G
from fieldnewton.bundles import KVelocity
from fieldnewton.dynamics import ForceField


def _sphere(r):
    return np.array([r.uniform(0.4, 2.7), r.uniform(-3.0, 3.0)])


def _half_plane(r):
    return np.array([r.uniform(-2.0, 2.0), r.uniform(0.5, 3.0)])


CATALOG = {
    "flat": (G.flat(3), lambda r: r.uniform(-2, 2, 3)),
    "minkowski": (G.minkowski(3), lambda r: r.uniform(-2, 2, 3)),
    "sphere": (G.sphere2(), _sphere),
    "hyperbolic": (G.hyperbolic2(), _half_plane),
    "product": (G.product(G.sphere2(), G.hyperbolic2()), lambda r: np.concatenate([_sphere(r), _half_plane(r)])),
}


def sample_point(g, sampler, k, rng, scale=1.0) -> KVelocity:
    return KVelocity(sampler(rng), scale * rng.normal(size=(g.n, k)))


def random_symmetric_force(g, k, rng) -> ForceField:
    """Polynomial force with random coefficients, depending on q and qdot, symmetric in slots."""
    names = g.chart.names
    n = g.n
    entries = [[[None] * k for _ in range(k)] for _ in range(n)]
    for i in range(n):
        for a in range(k):
            for b in range(a, k):
                c = rng.integers(-3, 4, size=3)
                x = names[(i + a) % n]
                e = f"{c[0]} + {c[1]}*{x}^2 + {c[2]}*{x}*qd({i + 1},{b + 1})"
                entries[i][a][b] = entries[i][b][a] = e
    return ForceField(names, entries, k)
