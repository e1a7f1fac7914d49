"""Radial feeder trees: vertex loads, edge devices, device-group totals.

A feeder is a rooted tree.  Vertices carry daily energy (kWh); an edge may
carry a protective device (a fuse or a sectionalizing switch).  Metering
happens per device: every vertex belongs to the group of the nearest device
on its path up to the root, and vertices with no device above them form the
root residual group.  Group totals are the quantities the tail model is
fitted to.

Edges are keyed by their child vertex (each vertex has one parent, so the
key is unique).  Totals use math.fsum so that group energies and their grand
total agree exactly whenever the inputs are exactly representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError, TreeStructureError, UnknownEdgeError

__all__ = [
    "DEVICE_KINDS",
    "FeederTree",
    "DeviceGroup",
    "downstream_load",
    "group_by_device",
    "edge_label",
]

DEVICE_KINDS = ("fuse", "switch")


@dataclass(frozen=True)
class FeederTree:
    """Immutable rooted tree with per-vertex loads and per-edge devices."""

    root: str
    parent: dict          # child vertex -> parent vertex
    children: dict        # vertex -> tuple of child vertices (insertion order)
    loads: dict           # vertex -> load in kWh
    devices: dict         # child vertex -> device kind on edge (parent, child)

    @classmethod
    def from_edges(cls, edges, root_load: float = 0.0) -> "FeederTree":
        """Build a tree from (parent, child, device, child_load) tuples.

        device is "fuse", "switch", None or "" (no device).  The root is the
        unique vertex that never appears as a child; its load defaults to
        root_load since edge rows cannot carry it.
        """
        parent: dict = {}
        children: dict = {}
        loads: dict = {}
        devices: dict = {}
        for row in edges:
            p, c, device, load = row
            p, c = str(p), str(c)
            if p == c:
                raise TreeStructureError(f"self-loop at vertex {p!r}")
            if c in parent:
                raise TreeStructureError(f"vertex {c!r} has two parent edges")
            load = float(load)
            if not math.isfinite(load) or load < 0.0:
                raise InvalidParameterError(
                    f"load for vertex {c!r} must be finite and >= 0, got {load}"
                )
            parent[c] = p
            children.setdefault(p, []).append(c)
            children.setdefault(c, [])
            loads[c] = load
            if device not in (None, ""):
                if device not in DEVICE_KINDS:
                    raise InvalidParameterError(
                        f"unknown device kind {device!r} on edge {p!r}->{c!r}"
                    )
                devices[c] = device
        if not parent:
            raise TreeStructureError("edge list is empty")

        roots = [v for v in children if v not in parent]
        if not roots:
            raise TreeStructureError("no root vertex: edge list contains a cycle")
        if len(roots) > 1:
            raise TreeStructureError(
                f"multiple root candidates {sorted(roots)!r}: not a single tree"
            )
        root = roots[0]
        if not math.isfinite(root_load) or root_load < 0.0:
            raise InvalidParameterError(
                f"root load must be finite and >= 0, got {root_load}"
            )
        loads[root] = float(root_load)

        # Reachability check: every vertex must hang below the root.
        seen = {root}
        stack = [root]
        while stack:
            for c in children[stack.pop()]:
                if c in seen:
                    raise TreeStructureError(f"cycle through vertex {c!r}")
                seen.add(c)
                stack.append(c)
        if len(seen) != len(children):
            missing = sorted(set(children) - seen)
            raise TreeStructureError(
                f"vertices not reachable from root {root!r}: {missing!r}"
            )

        return cls(
            root=root,
            parent=dict(parent),
            children={v: tuple(cs) for v, cs in children.items()},
            loads=dict(loads),
            devices=dict(devices),
        )

    def to_edges(self) -> list:
        """Edge rows (parent, child, device, child_load) in DFS preorder."""
        rows = []
        stack = [self.root]
        while stack:
            v = stack.pop()
            for c in reversed(self.children[v]):
                stack.append(c)
            if v != self.root:
                rows.append((self.parent[v], v, self.devices.get(v), self.loads[v]))
        return rows

    @property
    def vertices(self) -> tuple:
        return tuple(self.children)

    def subtree_vertices(self, vertex: str) -> tuple:
        """All vertices in the subtree rooted at vertex, preorder."""
        if vertex not in self.children:
            raise TreeStructureError(f"unknown vertex {vertex!r}")
        out = []
        stack = [vertex]
        while stack:
            v = stack.pop()
            out.append(v)
            for c in reversed(self.children[v]):
                stack.append(c)
        return tuple(out)

    def subtree_load(self, vertex: str) -> float:
        """Exact total load of the subtree rooted at vertex (math.fsum)."""
        return math.fsum(self.loads[v] for v in self.subtree_vertices(vertex))

    def total_load(self) -> float:
        return self.subtree_load(self.root)


@dataclass(frozen=True)
class DeviceGroup:
    """Vertices metered by one device (or by none: the root residual group)."""

    edge: tuple | None        # (parent, child) carrying the device; None = residual
    device: str | None        # "fuse", "switch", or None for the residual group
    vertices: tuple
    total_load_kwh: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


def edge_label(edge: tuple | None) -> str:
    """Stable text key for a group edge; the residual group is 'root'."""
    if edge is None:
        return "root"
    return f"{edge[0]}->{edge[1]}"


def downstream_load(tree: FeederTree, edge: tuple) -> float:
    """Total load that edge (parent, child) can disconnect: its child subtree.

    Raises UnknownEdgeError when no such edge exists in the tree.
    """
    parent, child = str(edge[0]), str(edge[1])
    if tree.parent.get(child) != parent:
        raise UnknownEdgeError(f"no edge {parent!r}->{child!r} in the tree")
    return tree.subtree_load(child)


def group_by_device(tree: FeederTree) -> list:
    """Partition vertices by nearest device on the path to the root.

    Each device edge owns the vertices of its subtree that have no further
    device below it; vertices with no device anywhere above them fall into
    the residual group.  Groups are ordered by edge label, residual last.
    Group totals use math.fsum, so together with total_load() conservation
    holds exactly for exactly representable loads.
    """
    assignment: dict = {}
    members: dict = {None: []}
    for child in tree.devices:
        members[child] = []
    stack = [(tree.root, None)]
    while stack:
        vertex, owner = stack.pop()
        if vertex in tree.devices:
            owner = vertex
        members[owner].append(vertex)
        assignment[vertex] = owner
        for c in reversed(tree.children[vertex]):
            stack.append((c, owner))

    groups = []
    for owner in sorted(tree.devices, key=lambda v: edge_label((tree.parent[v], v))):
        vs = tuple(members[owner])
        groups.append(
            DeviceGroup(
                edge=(tree.parent[owner], owner),
                device=tree.devices[owner],
                vertices=vs,
                total_load_kwh=math.fsum(tree.loads[v] for v in vs),
            )
        )
    residual = tuple(members[None])
    groups.append(
        DeviceGroup(
            edge=None,
            device=None,
            vertices=residual,
            total_load_kwh=math.fsum(tree.loads[v] for v in residual),
        )
    )
    return groups
