"""Navigation-graph environment: viewpoint graph, geodesic distances, and view geometry.

The environment is an undirected graph of navigable viewpoints with 3D
positions in meters. Edge weights are full 3D Euclidean distances; bearings
and field-of-view gating use the horizontal (x, y) components only, since
the action spaces have no look-up/down.

Angle conventions used throughout the package:
  * absolute bearings are compass degrees in [0, 360): 0 = +y axis,
    increasing clockwise;
  * relative angles are wrapped to (-180, 180]: negative = left of the
    current heading, positive = right.
"""

from __future__ import annotations

import heapq
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

GRAPH_FORMAT_VERSION = "navgraph/v1"


class GraphError(ValueError):
    """Malformed graph input, or an operation on nodes the graph lacks."""


class UnreachableError(GraphError):
    """No path exists between the requested nodes."""

    def __init__(self, a: str, b: str):
        super().__init__(f"no path between {a!r} and {b!r}")
        self.pair = (a, b)


@dataclass(frozen=True)
class Position3D:
    """Viewpoint position in meters; z is the vertical axis."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise GraphError(f"non-finite coordinate in ({self.x}, {self.y}, {self.z})")


@dataclass(frozen=True)
class FovConfig:
    """Camera geometry: vertical field of view plus image resolution."""

    vfov_deg: float
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if not 0.0 < self.vfov_deg < 180.0:
            raise ValueError(f"vfov_deg must be in (0, 180), got {self.vfov_deg}")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")

    def to_dict(self) -> dict:
        return {
            "vfov_deg": self.vfov_deg,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }


class NavGraph:
    """Undirected viewpoint graph, immutable after construction.

    Nodes map string ids to :class:`Position3D`; edges are unordered pairs
    with no self-loops. Instances may be shared freely across concurrent
    episodes: all queries are read-only and the per-source distance memo is
    guarded by a lock (a duplicated Dijkstra run under a race is harmless).
    """

    def __init__(
        self,
        nodes: Mapping[str, Position3D],
        edges: Iterable[tuple[str, str]],
        scan_id: str = "",
    ):
        self._nodes: dict[str, Position3D] = dict(nodes)
        adj: dict[str, set[str]] = {n: set() for n in self._nodes}
        edge_set: set[tuple[str, str]] = set()
        for a, b in edges:
            if a == b:
                raise GraphError(f"self-loop on {a!r}")
            if a not in self._nodes or b not in self._nodes:
                raise GraphError(f"edge ({a!r}, {b!r}) references an unknown node")
            edge_set.add((a, b) if a <= b else (b, a))
            adj[a].add(b)
            adj[b].add(a)
        self._edges = frozenset(edge_set)
        # Sorted adjacency keeps every iteration order deterministic.
        self._adj = {n: tuple(sorted(vs)) for n, vs in adj.items()}
        self._lengths = {e: self._euclidean(*e) for e in self._edges}
        self.scan_id = scan_id
        self._dist_cache: dict[str, dict[str, float]] = {}
        self._cache_lock = threading.Lock()

    def _euclidean(self, a: str, b: str) -> float:
        pa, pb = self._nodes[a], self._nodes[b]
        return math.dist((pa.x, pa.y, pa.z), (pb.x, pb.y, pb.z))

    # -- read-only views ---------------------------------------------------

    @property
    def nodes(self) -> dict[str, Position3D]:
        return dict(self._nodes)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return self._edges

    def node_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._nodes))

    def __contains__(self, node: str) -> bool:
        return node in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def position(self, node: str) -> Position3D:
        try:
            return self._nodes[node]
        except KeyError:
            raise GraphError(f"unknown node {node!r}") from None

    def neighbors(self, node: str) -> tuple[str, ...]:
        try:
            return self._adj[node]
        except KeyError:
            raise GraphError(f"unknown node {node!r}") from None

    def has_edge(self, a: str, b: str) -> bool:
        return ((a, b) if a <= b else (b, a)) in self._edges

    def edge_length(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        try:
            return self._lengths[key]
        except KeyError:
            raise GraphError(f"no edge between {a!r} and {b!r}") from None

    def straight_line(self, a: str, b: str) -> float:
        """3D Euclidean distance between two nodes, ignoring the graph."""
        self.position(a), self.position(b)
        return self._euclidean(a, b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NavGraph):
            return NotImplemented
        return (
            self.scan_id == other.scan_id
            and self._nodes == other._nodes
            and self._edges == other._edges
        )

    # -- geodesics ---------------------------------------------------------

    def distances_from(self, source: str) -> dict[str, float]:
        """All geodesic distances from ``source`` (single-source Dijkstra, memoized)."""
        if source not in self._nodes:
            raise GraphError(f"unknown node {source!r}")
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0.0}
        settled: set[str] = set()
        heap: list[tuple[float, str]] = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in settled:
                continue
            settled.add(u)
            for v in self._adj[u]:
                nd = d + self.edge_length(u, v)
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        with self._cache_lock:
            self._dist_cache.setdefault(source, dist)
            return self._dist_cache[source]

    def geodesic(self, a: str, b: str) -> float:
        """Shortest walkable distance between two nodes (meters).

        Raises :class:`UnreachableError` for disconnected pairs rather than
        returning a sentinel value.
        """
        if b not in self._nodes:
            raise GraphError(f"unknown node {b!r}")
        d = self.distances_from(a).get(b)
        if d is None:
            raise UnreachableError(a, b)
        return d

    def shortest_path(self, a: str, b: str) -> list[str]:
        """A shortest path from a to b; ties broken by lexicographic node sequence."""
        dist = self.distances_from(b)
        if a not in self._nodes:
            raise GraphError(f"unknown node {a!r}")
        if a not in dist:
            raise UnreachableError(a, b)
        path = [a]
        node = a
        while node != b:
            remaining = dist[node]
            step = None
            for nb in self._adj[node]:  # sorted, so the first hit is lexicographic min
                d = dist.get(nb)
                if d is None:
                    continue
                if abs(d + self.edge_length(node, nb) - remaining) <= 1e-9:
                    step = nb
                    break
            if step is None:  # pragma: no cover - dist table guarantees a descent
                raise UnreachableError(node, b)
            path.append(step)
            node = step
        return path

    def path_length(self, path: Iterable[str]) -> float:
        """Sum of edge lengths along a node walk; every hop must be an edge."""
        total = 0.0
        prev = None
        for node in path:
            if prev is not None:
                total += self.edge_length(prev, node)
            prev = node
        return total

    # -- serialization -----------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "format_version": GRAPH_FORMAT_VERSION,
            "scan_id": self.scan_id,
            "nodes": {
                n: [p.x, p.y, p.z] for n, p in sorted(self._nodes.items())
            },
            "edges": sorted(list(e) for e in self._edges),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_doc(cls, doc: Mapping) -> "NavGraph":
        version = doc.get("format_version")
        if version != GRAPH_FORMAT_VERSION:
            raise GraphError(f"unsupported graph format {version!r}")
        nodes = {n: Position3D(*xyz) for n, xyz in doc["nodes"].items()}
        edges = [tuple(e) for e in doc["edges"]]
        return cls(nodes, edges, scan_id=doc.get("scan_id", ""))


def wrap_angle(deg: float) -> float:
    """Wrap an angle in degrees to (-180, 180]; positive = clockwise/right."""
    if not math.isfinite(deg):
        raise ValueError(f"non-finite angle {deg}")
    r = deg % 360.0
    if r > 180.0:
        r -= 360.0
    return r


def bearing(graph: NavGraph, frm: str, to: str) -> float:
    """Compass bearing from one node toward another, in [0, 360).

    Computed from the horizontal displacement only; raises
    :class:`GraphError` when the two nodes share an (x, y) position.
    """
    pa, pb = graph.position(frm), graph.position(to)
    dx, dy = pb.x - pa.x, pb.y - pa.y
    if dx == 0.0 and dy == 0.0:
        raise GraphError(f"coincident horizontal position of {frm!r} and {to!r}")
    return math.degrees(math.atan2(dx, dy)) % 360.0


def hfov_from_vfov(cfg: FovConfig) -> float:
    """Horizontal FOV in degrees implied by the vertical FOV and aspect ratio."""
    aspect = cfg.image_width / cfg.image_height
    half_v = math.radians(cfg.vfov_deg) / 2.0
    return math.degrees(2.0 * math.atan(aspect * math.tan(half_v)))


def load_connectivity(
    source: Union[str, Path, list], scan_id: Optional[str] = None
) -> NavGraph:
    """Build a NavGraph from a per-scan connectivity document.

    The document is a JSON array with one entry per viewpoint:
    a node identifier, a 4x4 row-major pose matrix (translation at flat
    indices 3, 7, 11), an inclusion flag, and a boolean adjacency array
    over entry order. Only included nodes are kept; an edge exists iff
    both endpoints are included and either adjacency direction is true.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise GraphError(f"cannot read connectivity document {path}: {e}") from e
        if scan_id is None:
            scan_id = path.name.removesuffix("_connectivity.json")
    else:
        doc = source
    if not isinstance(doc, list):
        raise GraphError("connectivity document must be a JSON array of entries")
    count = len(doc)
    ids: list[str] = []
    included: list[bool] = []
    adjacency: list[list[bool]] = []
    positions: list[Position3D] = []
    seen: set[str] = set()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise GraphError(f"entry {i} is not an object")
        try:
            node_id = entry["image_id"]
            pose = entry["pose"]
            inc = bool(entry["included"])
            unob = entry["unobstructed"]
        except KeyError as e:
            raise GraphError(f"entry {i} is missing field {e.args[0]!r}") from None
        if not isinstance(node_id, str):
            raise GraphError(f"entry {i} has a non-string node identifier")
        if node_id in seen:
            raise GraphError(f"duplicate node identifier {node_id!r}")
        seen.add(node_id)
        if not isinstance(pose, list) or len(pose) != 16:
            raise GraphError(f"entry {i} pose must be a flat 4x4 matrix")
        if not isinstance(unob, list) or len(unob) != count:
            raise GraphError(
                f"entry {i} adjacency array has length {len(unob) if isinstance(unob, list) else 'n/a'},"
                f" expected {count}"
            )
        ids.append(node_id)
        included.append(inc)
        adjacency.append([bool(v) for v in unob])
        positions.append(Position3D(float(pose[3]), float(pose[7]), float(pose[11])))
    nodes = {ids[i]: positions[i] for i in range(count) if included[i]}
    edges = []
    for i in range(count):
        if not included[i]:
            continue
        for j in range(i + 1, count):
            if not included[j]:
                continue
            if adjacency[i][j] or adjacency[j][i]:
                edges.append((ids[i], ids[j]))
    return NavGraph(nodes, edges, scan_id=scan_id or "")
