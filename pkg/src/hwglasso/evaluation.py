"""Recovery metrics against a known precision matrix, and graph statistics."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .config import TOLERANCES
from .exceptions import DataError
from .two_step import HubSet, identify_hubs_threshold


def _pair(theta_hat, theta0):
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta0, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def _nz(m, tol):
    return np.abs(m) > tol


@dataclass
class MetricsReport:
    tpr: float
    tnr: float
    hub_edge_pct: float
    hub_node_pct: float
    nonhub_node_pct: float
    edge_count: int
    frobenius_measure: float
    frobenius_full: float = float("nan")
    flags: tuple = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


def confusion_metrics(theta_hat, theta0, tol: float = TOLERANCES.nonzero):
    """True positive rate (pairs ``i <= j``), true negative rate (``i < j``), and edge count.

    Returns ``(tpr, tnr, edge_count, flags)``; an empty denominator gives a
    rate of 1 and a flag naming it.
    """
    a, b = _pair(theta_hat, theta0)
    p = a.shape[0]
    est, true = _nz(a, tol), _nz(b, 0.0)
    upper_incl = np.triu(np.ones((p, p), dtype=bool))
    upper = np.triu(np.ones((p, p), dtype=bool), 1)
    flags = []
    pos = np.sum(true & upper_incl)
    if pos:
        tpr = float(np.sum(est & true & upper_incl) / pos)
    else:
        tpr, _ = 1.0, flags.append("tpr_undefined")
    neg = np.sum(~true & upper)
    if neg:
        tnr = float(np.sum(~est & ~true & upper) / neg)
    else:
        tnr, _ = 1.0, flags.append("tnr_undefined")
    edges = int(np.sum(est & upper))
    return tpr, tnr, edges, tuple(flags)


def hub_metrics(theta_hat, theta0, true_hubs, k_percent: float = 10.0, tol: float = TOLERANCES.nonzero):
    """Hub-edge, hub-node and non-hub-node recovery percentages.

    Estimated hubs come from the degree threshold rule applied to
    ``theta_hat``. Returns ``(hub_edge_pct, hub_node_pct, nonhub_node_pct, flags)``;
    undefined percentages are ``nan`` and flagged.
    """
    a, b = _pair(theta_hat, theta0)
    p = a.shape[0]
    h = (true_hubs if isinstance(true_hubs, HubSet) else HubSet(tuple(true_hubs))).mask(p)
    est, true = _nz(a, tol), _nz(b, 0.0)
    off = ~np.eye(p, dtype=bool)
    rows = h[:, None] & off
    flags = []
    denom = np.sum(rows & true)
    if denom:
        hub_edge = 100.0 * np.sum(rows & true & est) / denom
    else:
        hub_edge = np.nan
        flags.append("hub_edge_undefined")
    est_h = identify_hubs_threshold(a, k_percent, tol=tol).mask(p)
    if h.any():
        hub_node = 100.0 * np.sum(est_h & h) / np.sum(h)
    else:
        hub_node = np.nan
        flags.append("hub_node_undefined")
    if (~h).any():
        nonhub_node = 100.0 * np.sum(~est_h & ~h) / np.sum(~h)
    else:
        nonhub_node = np.nan
        flags.append("nonhub_node_undefined")
    return float(hub_edge), float(hub_node), float(nonhub_node), tuple(flags)


def frobenius_measure(theta_hat, theta0) -> float:
    """``(1/p) * sum_{i != j} (a_ij - b_ij)^2``; the diagonal is left out."""
    a, b = _pair(theta_hat, theta0)
    d = a - b
    np.fill_diagonal(d, 0.0)
    return float(np.sum(d * d) / a.shape[0])


def frobenius_full(theta_hat, theta0) -> float:
    """``||a - b||_F^2 / p`` including the diagonal."""
    a, b = _pair(theta_hat, theta0)
    d = a - b
    return float(np.sum(d * d) / a.shape[0])


def evaluate(theta_hat, theta0, true_hubs, k_percent: float = 10.0, tol: float = TOLERANCES.nonzero) -> MetricsReport:
    tpr, tnr, edges, f1 = confusion_metrics(theta_hat, theta0, tol)
    he, hn, nh, f2 = hub_metrics(theta_hat, theta0, true_hubs, k_percent, tol)
    return MetricsReport(tpr, tnr, he, hn, nh, edges, frobenius_measure(theta_hat, theta0),
                         frobenius_full(theta_hat, theta0), f1 + f2)


@dataclass
class GraphStats:
    density: float
    global_clustering: float
    betweenness: np.ndarray
    avg_path_length: float
    degree_centrality: np.ndarray
    flags: tuple = ()

    def scalar(self, name: str) -> float:
        if name == "mean_betweenness":
            return float(np.mean(self.betweenness))
        return float(getattr(self, name))


def adjacency_from_theta(theta, tol: float = TOLERANCES.nonzero) -> np.ndarray:
    a = (np.abs(np.asarray(theta)) > tol).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def _bfs_counts(nbrs, s, p):
    # Brandes single-source phase: stack order, predecessors, path counts.
    sigma = np.zeros(p)
    dist = np.full(p, -1)
    preds = [[] for _ in range(p)]
    sigma[s] = 1.0
    dist[s] = 0
    order = []
    q = deque([s])
    while q:
        v = q.popleft()
        order.append(v)
        for w in nbrs[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                q.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, preds, sigma, dist


def graph_stats(adjacency) -> GraphStats:
    """Density, global clustering, normalised betweenness, average path length, degree centrality.

    Average path length is over connected pairs only; an ``apl_excludes_disconnected``
    flag is set when some pairs are unreachable and ``apl_undefined`` when no
    pair is connected (the value is then ``nan``).
    """
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError("adjacency must be square")
    if np.any(np.diag(a) != 0):
        raise DataError("adjacency must have a zero diagonal")
    a = (a != 0).astype(float)
    if not np.array_equal(a, a.T):
        raise DataError("adjacency must be symmetric")
    p = a.shape[0]
    deg = a.sum(axis=1)
    n_edges = deg.sum() / 2
    density = float(2 * n_edges / (p * (p - 1))) if p > 1 else 0.0

    triangles = np.trace(a @ a @ a) / 6.0
    triples = float(np.sum(deg * (deg - 1) / 2))
    clustering = float(3 * triangles / triples) if triples else 0.0

    nbrs = [np.flatnonzero(a[i]) for i in range(p)]
    bc = np.zeros(p)
    dist_sum = 0.0
    pairs = 0
    for s in range(p):
        order, preds, sigma, dist = _bfs_counts(nbrs, s, p)
        reach = dist > 0
        dist_sum += dist[reach].sum()
        pairs += reach.sum()
        delta = np.zeros(p)
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    bc /= 2.0  # each unordered pair was counted from both ends
    if p > 2:
        bc /= (p - 1) * (p - 2) / 2.0

    flags = []
    total_pairs = p * (p - 1)
    if pairs:
        apl = float(dist_sum / pairs)
        if pairs < total_pairs:
            flags.append("apl_excludes_disconnected")
    else:
        apl = float("nan")
        flags.append("apl_undefined")
    centrality = deg / (p - 1) if p > 1 else np.zeros(p)
    return GraphStats(density, clustering, bc, apl, centrality, tuple(flags))
