"""Synthetic hub networks, their precision matrices and Gaussian samples.

Mechanisms
----------
``"i"``    super hubs: ``floor(p/25)`` hubs wired with probability 0.8, plus
           background edges with probability 0.01.
``"ii"``   as ``"i"`` with hub wiring probability 0.3.
``"iii"``  two ``p/2`` blocks built like ``"i"`` with background 0.04, and
           cross-block edges with probability 0.01.
``"iv"``   scale-free tree by linear preferential attachment (one edge per
           new node). No hubs are planted.

Every random draw comes from a generator keyed on ``(seed, replicate, tag)``
so replicates are independent of call order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .exceptions import DataError
from .two_step import HubSet

MECHANISMS = ("i", "ii", "iii", "iv")
HUB_PROB = {"i": 0.8, "ii": 0.3, "iii": 0.8}
BACKGROUND_PROB = 0.01
BLOCK_BACKGROUND_PROB = 0.04
CROSS_BLOCK_PROB = 0.01
MIN_EIGENVALUE = 0.1

_TAGS = {"adjacency": 1, "precision": 2, "sample": 3}


def rng_for(seed, *keys) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *keys)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def _hub_adjacency(p, rng, hub_prob, background_prob):
    n_hubs = p // 25
    if n_hubs < 1:
        raise DataError(f"p={p} gives no hubs; need p >= 25")
    hubs = np.sort(rng.choice(p, size=n_hubs, replace=False))
    a = np.zeros((p, p), dtype=np.int8)
    for h in hubs:
        link = rng.random(p) < hub_prob
        link[h] = False
        a[h, link] = 1
        a[link, h] = 1
    iu = np.triu_indices(p, 1)
    bg = rng.random(iu[0].size) < background_prob
    a[iu[0][bg], iu[1][bg]] = 1
    a[iu[1][bg], iu[0][bg]] = 1
    return a, hubs


def gen_adjacency_i(p: int, seed) -> tuple[np.ndarray, HubSet]:
    a, hubs = _hub_adjacency(p, rng_for(seed), HUB_PROB["i"], BACKGROUND_PROB)
    return a, HubSet(tuple(hubs.tolist()), "planted")


def gen_adjacency_ii(p: int, seed) -> tuple[np.ndarray, HubSet]:
    a, hubs = _hub_adjacency(p, rng_for(seed), HUB_PROB["ii"], BACKGROUND_PROB)
    return a, HubSet(tuple(hubs.tolist()), "planted")


def gen_adjacency_iii(p: int, seed) -> tuple[np.ndarray, HubSet]:
    if p % 2:
        raise DataError(f"mechanism iii needs an even p, got {p}")
    half = p // 2
    if half < 25:
        raise DataError(f"mechanism iii needs p/2 >= 25, got p={p}")
    rng = rng_for(seed)
    a1, h1 = _hub_adjacency(half, rng, HUB_PROB["iii"], BLOCK_BACKGROUND_PROB)
    a2, h2 = _hub_adjacency(half, rng, HUB_PROB["iii"], BLOCK_BACKGROUND_PROB)
    b = (rng.random((half, half)) < CROSS_BLOCK_PROB).astype(np.int8)
    a = np.block([[a1, b], [b.T, a2]])
    hubs = np.concatenate([h1, h2 + half])
    return a, HubSet(tuple(hubs.tolist()), "planted")


def gen_scale_free(p: int, seed, power: float = 1.0) -> tuple[np.ndarray, HubSet]:
    """Preferential-attachment tree: node ``v`` links to one earlier node with
    probability proportional to ``degree ** power``."""
    if p < 3:
        raise DataError("scale-free generator needs p >= 3")
    rng = rng_for(seed)
    a = np.zeros((p, p), dtype=np.int8)
    deg = np.zeros(p)
    a[0, 1] = a[1, 0] = 1
    deg[:2] = 1
    for v in range(2, p):
        w = deg[:v] ** power
        target = rng.choice(v, p=w / w.sum())
        a[v, target] = a[target, v] = 1
        deg[v] += 1
        deg[target] += 1
    return a, HubSet((), "none")


GENERATORS = {"i": gen_adjacency_i, "ii": gen_adjacency_ii, "iii": gen_adjacency_iii, "iv": gen_scale_free}


def adjacency_to_precision(adjacency, seed) -> np.ndarray:
    """Precision matrix supported on ``adjacency``.

    Edge values are uniform on ``[-0.8, -0.5] U [0.5, 0.8]``; the diagonal is
    shifted so the smallest eigenvalue is exactly 0.1.
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or np.any(np.diag(a) != 0):
        raise DataError("adjacency must be square with zero diagonal")
    if not np.array_equal(a, a.T):
        raise DataError("adjacency must be symmetric")
    rng = rng_for(seed)
    p = a.shape[0]
    iu = np.triu_indices(p, 1)
    mag = rng.uniform(0.5, 0.8, iu[0].size)
    sign = np.where(rng.random(iu[0].size) < 0.5, -1.0, 1.0)
    omega = np.zeros((p, p))
    vals = np.where(a[iu] != 0, sign * mag, 0.0)
    omega[iu] = vals
    omega = omega + omega.T
    lo, _ = linalg.eigen_extremes(omega)
    return linalg.symmetrize(omega + (MIN_EIGENVALUE - lo) * np.eye(p))


def sample_gaussian(theta0, n: int, seed) -> np.ndarray:
    """``n`` draws from ``N(0, theta0^{-1})`` as rows of an ``n x p`` matrix."""
    _, sigma = linalg.chol_logdet_inverse(theta0)
    chol = np.linalg.cholesky(sigma)
    z = rng_for(seed).standard_normal((n, sigma.shape[0]))
    return z @ chol.T


@dataclass
class NetworkSpec:
    mechanism: str
    p: int
    adjacency: np.ndarray
    hubs: HubSet
    theta0: np.ndarray
    seed: int | None = None
    replicate: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def support(self) -> set:
        iu, ju = np.nonzero(np.triu(self.theta0, 1))
        return set(zip(iu.tolist(), ju.tolist()))

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        linalg.write_matrix_csv(d / "adjacency.csv", self.adjacency)
        linalg.write_matrix_csv(d / "theta0.csv", self.theta0)
        (d / "hubs.json").write_text(self.hubs.to_json() + "\n")
        (d / "seed.json").write_text(json.dumps(
            {"mechanism": self.mechanism, "p": self.p, "seed": self.seed, "replicate": self.replicate, **self.meta},
            indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> NetworkSpec:
        d = Path(directory)
        adjacency, _ = linalg.read_matrix_csv(d / "adjacency.csv")
        theta0, _ = linalg.read_matrix_csv(d / "theta0.csv", symmetric=True)
        hubs = HubSet.from_json((d / "hubs.json").read_text())
        meta = json.loads((d / "seed.json").read_text())
        return cls(meta.pop("mechanism"), int(meta.pop("p")), adjacency.astype(np.int8), hubs, theta0,
                   meta.pop("seed"), int(meta.pop("replicate", 0)), meta)


def generate_network(mechanism: str, p: int, seed: int, replicate: int = 0) -> NetworkSpec:
    if mechanism not in GENERATORS:
        raise DataError(f"unknown mechanism {mechanism!r}; choose from {MECHANISMS}")
    adjacency, hubs = GENERATORS[mechanism](p, rng_for(seed, replicate, _TAGS["adjacency"]))
    theta0 = adjacency_to_precision(adjacency, rng_for(seed, replicate, _TAGS["precision"]))
    return NetworkSpec(mechanism, p, adjacency, hubs, theta0, seed, replicate)


def sample_replicate(spec: NetworkSpec, n: int) -> np.ndarray:
    return sample_gaussian(spec.theta0, n, rng_for(spec.seed, spec.replicate, _TAGS["sample"]))
