"""Shared planted-truth generators and independent oracles for the tests.

Planted models live inside the forecaster's model class, so a least-squares
fit on noiseless data must reproduce them to roundoff.  The feeder oracles
reimplement subtree sums and device grouping by recursive walks, independent
of the package's stack-based traversals.  Loads drawn for random trees are
dyadic (multiples of 1/8), so plain summation is exact and oracle totals can
be compared with ==.
"""

from __future__ import annotations

import math

import numpy as np

from feederload import ArxModel, LoadHistory, VectorArxModel

HOURS = 24

# Planted scalar total model: stable (|a| sums to 0.75) with a visible
# temperature response and intercept.
TOTAL_TRUE = ArxModel(a=[0.55, 0.2], b=[0.8, -0.3, 0.15], intercept=20.0)

_DIURNAL = -np.cos(2.0 * np.pi * (np.arange(HOURS) - 3.0) / HOURS)


def build_vec_true() -> VectorArxModel:
    """Planted shape-space vector model with a contractive diagonal lag.

    The exogenous blocks are dense random matrices drawn once from a fixed
    seed, small enough that the planted recursion stays bounded.
    """
    rng = np.random.default_rng(4000)
    c1 = 0.9 * np.eye(HOURS)
    h0 = rng.normal(0.0, 0.02, (HOURS, HOURS))
    h1 = rng.normal(0.0, 0.01, (HOURS, HOURS))
    return VectorArxModel(c=[c1], h=[h0, h1], intercept=np.zeros(HOURS))


def make_temps_iid(n_days: int, rng, sd: float = 4.0) -> np.ndarray:
    """Temperatures with independent daily means.

    Independent days keep consecutive regressor columns well conditioned,
    unlike a smooth seasonal arc whose neighbouring days are collinear.
    """
    tbar = 14.0 + rng.normal(0.0, sd, n_days + 1)
    return (tbar[:, None] + 4.0 * _DIURNAL[None, :]
            + rng.normal(0.0, 1.0, (n_days + 1, HOURS)))


def plant_total_history(model: ArxModel, n_days: int, rng,
                        noise_sd: float = 0.0) -> tuple:
    """Simulate daily totals from the model; returns (history, totals).

    Process noise (when any) is injected inside the recursion, so the fitted
    regression sees it as a genuine innovation.  The hourly loads spread each
    total uniformly; the shape is irrelevant for the total model.
    """
    temps = make_temps_iid(n_days, rng)
    tbar = temps.mean(axis=1)
    k = model.k
    p = np.empty(n_days)
    p[:k] = 100.0 + rng.normal(0.0, 5.0, k)
    for d in range(k, n_days):
        p[d] = model.predict(p[d - k:d], tbar[d - k:d + 1])
        if noise_sd:
            p[d] += rng.normal(0.0, noise_sd)
    loads = p[:, None] / HOURS * np.ones(HOURS)
    return LoadHistory(loads=loads, temps=temps), p


def plant_vector_sequence(model: VectorArxModel, n_days: int, rng,
                          noise_sd: float = 0.0) -> tuple:
    """Simulate a 24-vector sequence from the model; returns (seq, temps).

    Hourly temperatures are fully independent so all (k+1) * 24 exogenous
    columns stay well conditioned.  The noise block is drawn up front to keep
    the noiseless and noisy paths on the same stream.
    """
    temps = rng.normal(14.0, 3.0, (n_days + 1, HOURS))
    k = model.k
    s = np.empty((n_days, HOURS))
    s[:k] = rng.normal(1.0, 0.1, (k, HOURS))
    noise = rng.normal(0.0, 1.0, (n_days, HOURS))
    for d in range(k, n_days):
        s[d] = model.predict(s[d - k:d], temps[d - k:d + 1])
        if noise_sd:
            s[d] += noise_sd * noise[d]
    return s, temps


# ---------------------------------------------------------------------------
# Random feeder trees and brute-force oracles


def random_tree_edges(rng, n_vertices: int) -> tuple:
    """Random parent-pointer tree; returns (edges, root_load).

    Vertex i attaches under a uniformly drawn earlier vertex, so every shape
    from a path to a star occurs.  Loads are multiples of 1/8 (exact in
    binary), devices are absent/fuse/switch with fixed odds.
    """
    edges = []
    for i in range(1, n_vertices):
        parent = int(rng.integers(0, i))
        r = rng.random()
        device = None if r < 0.6 else ("fuse" if r < 0.85 else "switch")
        load = float(rng.integers(0, 64)) / 8.0
        edges.append((f"v{parent}", f"v{i}", device, load))
    root_load = float(rng.integers(0, 64)) / 8.0
    return edges, root_load


def _edge_maps(edges, root_load: float) -> tuple:
    children: dict = {"v0": []}
    parent: dict = {}
    loads: dict = {"v0": root_load}
    devices: dict = {}
    for p, c, device, load in edges:
        children.setdefault(p, []).append(c)
        children.setdefault(c, [])
        parent[c] = p
        loads[c] = load
        if device is not None:
            devices[c] = device
    return children, parent, loads, devices


def brute_subtree_load(edges, root_load: float, vertex: str) -> float:
    """Recursive subtree sum, independent of the package traversal."""
    children, _, loads, _ = _edge_maps(edges, root_load)

    def walk(v: str) -> float:
        return loads[v] + sum(walk(c) for c in children[v])

    return walk(vertex)


def brute_groups(edges, root_load: float) -> dict:
    """Nearest-device partition by walking each vertex's path to the root.

    Returns {owner_child_vertex_or_None: (vertex set, plain-sum total)}.
    """
    children, parent, loads, devices = _edge_maps(edges, root_load)
    members: dict = {}
    for v in children:
        owner = None
        w = v
        while w in parent:
            if w in devices:
                owner = w
                break
            w = parent[w]
        members.setdefault(owner, set()).add(v)
    return {
        owner: (vs, math.fsum(loads[v] for v in vs))
        for owner, vs in members.items()
    }
