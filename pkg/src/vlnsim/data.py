"""Dataset ingestion and generation: R2R-style splits, seeded synthetic
worlds, and behavior-cloning dataset export.

Synthetic worlds are desk-scale substitutes for real building scans: a
random geometric graph in a square, with episodes whose ground-truth path
is the (lexicographically tie-broken) shortest path between sampled
endpoints. Generation is a pure function of the parameter seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .expert import ExpertError, expert_actions, low_level_expert, uncapped
from .navgraph import NavGraph, Position3D, bearing, load_connectivity
from .prompts import render_state_prompt
from .simulator import (
    ADJUST,
    SPACE_PANO,
    EpisodeSpec,
    VariantConfig,
    initial_state,
    observe,
    step,
)

WORLD_FORMAT_VERSION = "synthetic_world/v1"
BC_FORMAT_VERSION = "bc_dataset/v1"

R2R_SPLITS = ("train", "val_seen", "val_unseen", "test")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class R2REpisode:
    """One trajectory entry from an R2R-style split file."""

    path_id: int
    scan: str
    path: tuple[str, ...]
    heading_deg: float  # dataset stores radians; converted once on load
    distance_m: float
    instructions: tuple[str, str, str]


def _read_r2r_entries(split_file: Union[str, Path]) -> list[R2REpisode]:
    path = Path(split_file)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read split file {path}: {e}") from e
    if not isinstance(doc, list):
        raise DataError(f"split file {path} must be a JSON array")
    episodes = []
    for entry in doc:
        try:
            path_id = int(entry["path_id"])
            scan = entry["scan"]
            nodes = tuple(entry["path"])
            heading_rad = float(entry["heading"])
            distance = float(entry.get("distance", 0.0))
            instructions = tuple(entry["instructions"])
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed split entry in {path}: {e}") from e
        if len(instructions) != 3:
            raise DataError(
                f"path_id {path_id}: expected exactly 3 instructions,"
                f" got {len(instructions)}"
            )
        episodes.append(
            R2REpisode(
                path_id=path_id,
                scan=scan,
                path=nodes,
                heading_deg=math.degrees(heading_rad) % 360.0,
                distance_m=distance,
                instructions=instructions,  # type: ignore[arg-type]
            )
        )
    return episodes


class ConnectivityCache:
    """Per-scan connectivity loader with memoization."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._graphs: dict[str, NavGraph] = {}

    def graph(self, scan: str) -> NavGraph:
        if scan not in self._graphs:
            path = self.root / f"{scan}_connectivity.json"
            if not path.exists():
                raise DataError(f"unknown scan {scan!r}: no connectivity at {path}")
            self._graphs[scan] = load_connectivity(path, scan_id=scan)
        return self._graphs[scan]


def load_r2r(
    split_file: Union[str, Path],
    connectivity_root: Union[str, Path],
    space: str = SPACE_PANO,
    variant: Optional[VariantConfig] = None,
    instruction_index: Optional[int] = None,
    cache: Optional[ConnectivityCache] = None,
) -> list[EpisodeSpec]:
    """Load an R2R split as episode specs, one per (trajectory, instruction).

    Every consecutive path pair is validated against the scan's graph;
    ``instruction_index`` keeps a single instruction per trajectory (index 2
    is the conventional offline-evaluation choice).
    """
    variant = variant or VariantConfig()
    cache = cache or ConnectivityCache(connectivity_root)
    specs: list[EpisodeSpec] = []
    for ep in _read_r2r_entries(split_file):
        graph = cache.graph(ep.scan)
        for a, b in zip(ep.path, ep.path[1:]):
            if not graph.has_edge(a, b):
                raise DataError(
                    f"path_id {ep.path_id}: broken path edge ({a!r}, {b!r})"
                )
        for idx, instruction in enumerate(ep.instructions):
            if instruction_index is not None and idx != instruction_index:
                continue
            specs.append(
                EpisodeSpec(
                    graph=graph,
                    start=ep.path[0],
                    start_heading_deg=ep.heading_deg,
                    goal=ep.path[-1],
                    instruction=instruction,
                    gt_path=ep.path,
                    space=space,
                    variant=variant,
                    episode_id=str(ep.path_id),
                    instruction_index=idx,
                )
            )
    return specs


@dataclass(frozen=True)
class SyntheticWorldParams:
    """Knobs for seeded synthetic world generation; the seed fully
    determines the output."""

    node_count: int = 60
    area_side_m: float = 30.0
    connect_radius_m: float = 6.0
    min_geodesic_m: float = 6.0
    max_geodesic_m: float = 18.0
    seed: int = 0
    episode_count: int = 100
    split_name: str = "synthetic"

    def __post_init__(self):
        if self.connect_radius_m <= 0:
            raise DataError("connect_radius_m must be positive")
        if self.node_count < 2 or self.episode_count < 1:
            raise DataError("need at least 2 nodes and 1 episode")
        if self.min_geodesic_m > self.max_geodesic_m:
            raise DataError("min geodesic length exceeds max")

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "area_side_m": self.area_side_m,
            "connect_radius_m": self.connect_radius_m,
            "min_geodesic_m": self.min_geodesic_m,
            "max_geodesic_m": self.max_geodesic_m,
            "seed": self.seed,
            "episode_count": self.episode_count,
            "split_name": self.split_name,
        }


def _largest_component(nodes: dict[str, Position3D], edges: list[tuple[str, str]]):
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen: set[str] = set()
    best: set[str] = set()
    for start in sorted(nodes):
        if start in seen:
            continue
        component = {start}
        frontier = [start]
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in component:
                    component.add(v)
                    frontier.append(v)
        seen |= component
        if len(component) > len(best):
            best = component
    kept_nodes = {n: p for n, p in nodes.items() if n in best}
    kept_edges = [e for e in edges if e[0] in best and e[1] in best]
    return kept_nodes, kept_edges


def _hop_description(graph: NavGraph, a: str, b: str) -> str:
    brg = int(round(bearing(graph, a, b)))
    dist = graph.edge_length(a, b)
    return f"head {brg} degrees for {dist:.1f} meters"


def _template_instruction(graph: NavGraph, path: Sequence[str]) -> str:
    if len(path) < 2:
        return "Stay where you are and stop."
    hops = [_hop_description(graph, a, b) for a, b in zip(path, path[1:])]
    return "From the start, " + ", then ".join(hops) + ", then stop."


def _episode_navigable(spec: EpisodeSpec) -> bool:
    # Reject start/goal pairs the low-level expert cannot serve under either
    # adjust variant; random geometry can make a node impossible to center.
    for auto_adjust in (True, False):
        candidate = replace(
            spec, variant=replace(spec.variant, auto_adjust=auto_adjust)
        )
        try:
            low_level_expert(candidate)
        except ExpertError:
            return False
    return True


def gen_synthetic(
    params: SyntheticWorldParams,
    space: str = SPACE_PANO,
    variant: Optional[VariantConfig] = None,
) -> tuple[NavGraph, list[EpisodeSpec]]:
    """Generate a random geometric world plus episodes, reproducibly.

    Nodes are uniform in a square (z = 0), connected within the radius; the
    largest connected component is kept. Each episode samples start/goal
    with geodesic separation inside the requested range and uses the
    shortest path (lexicographic tie-break) as ground truth, with a
    mechanical instruction describing the hop sequence.
    """
    variant = variant or VariantConfig()
    rng = random.Random(params.seed)
    width = len(str(max(params.node_count - 1, 1)))
    nodes = {
        f"n{i:0{max(width, 3)}d}": Position3D(
            rng.uniform(0.0, params.area_side_m),
            rng.uniform(0.0, params.area_side_m),
            0.0,
        )
        for i in range(params.node_count)
    }
    ids = sorted(nodes)
    edges = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            pa, pb = nodes[a], nodes[b]
            if math.dist((pa.x, pa.y, pa.z), (pb.x, pb.y, pb.z)) <= params.connect_radius_m:
                edges.append((a, b))
    kept_nodes, kept_edges = _largest_component(nodes, edges)
    if len(kept_nodes) < 2:
        raise DataError("synthetic graph collapsed to fewer than 2 nodes")
    graph = NavGraph(kept_nodes, kept_edges, scan_id=f"synthetic-{params.seed}")
    pool = sorted(kept_nodes)
    episodes: list[EpisodeSpec] = []
    attempts_per_episode = 500
    for i in range(params.episode_count):
        spec = None
        for _ in range(attempts_per_episode):
            start = rng.choice(pool)
            goal = rng.choice(pool)
            heading = rng.uniform(0.0, 360.0)
            if start == goal:
                continue
            length = graph.geodesic(start, goal)
            if not params.min_geodesic_m <= length <= params.max_geodesic_m:
                continue
            path = tuple(graph.shortest_path(start, goal))
            candidate = EpisodeSpec(
                graph=graph,
                start=start,
                start_heading_deg=heading,
                goal=goal,
                instruction=_template_instruction(graph, path),
                gt_path=path,
                space=space,
                variant=variant,
                episode_id=f"ep{i:03d}",
                instruction_index=0,
            )
            if _episode_navigable(candidate):
                spec = candidate
                break
        if spec is None:
            raise DataError(
                f"could not sample episode {i} within the geodesic range"
                f" [{params.min_geodesic_m}, {params.max_geodesic_m}]"
                f" after {attempts_per_episode} attempts"
            )
        episodes.append(spec)
    return graph, episodes


def world_to_doc(
    graph: NavGraph, episodes: Sequence[EpisodeSpec], params: SyntheticWorldParams
) -> dict:
    return {
        "format_version": WORLD_FORMAT_VERSION,
        "split": params.split_name,
        "params": params.to_dict(),
        "graph": graph.to_doc(),
        "episodes": [
            {
                "episode_id": ep.episode_id,
                "start": ep.start,
                "start_heading_deg": ep.start_heading_deg,
                "goal": ep.goal,
                "gt_path": list(ep.gt_path),
                "instruction": ep.instruction,
                "geodesic_m": graph.geodesic(ep.start, ep.goal),
            }
            for ep in episodes
        ],
    }


def save_world(
    path: Union[str, Path],
    graph: NavGraph,
    episodes: Sequence[EpisodeSpec],
    params: SyntheticWorldParams,
):
    doc = world_to_doc(graph, episodes, params)
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_world(
    path: Union[str, Path],
    space: str = SPACE_PANO,
    variant: Optional[VariantConfig] = None,
    instruction_index: Optional[int] = None,
) -> tuple[NavGraph, list[EpisodeSpec], str]:
    """Load a serialized synthetic world; returns (graph, episodes, split name)."""
    variant = variant or VariantConfig()
    p = Path(path)
    try:
        doc = json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read world file {p}: {e}") from e
    if doc.get("format_version") != WORLD_FORMAT_VERSION:
        raise DataError(f"unsupported world format {doc.get('format_version')!r}")
    graph = NavGraph.from_doc(doc["graph"])
    episodes = []
    for entry in doc["episodes"]:
        if instruction_index is not None and instruction_index != 0:
            continue  # synthetic episodes carry a single instruction (index 0)
        episodes.append(
            EpisodeSpec(
                graph=graph,
                start=entry["start"],
                start_heading_deg=entry["start_heading_deg"],
                goal=entry["goal"],
                instruction=entry["instruction"],
                gt_path=tuple(entry["gt_path"]),
                space=space,
                variant=variant,
                episode_id=entry["episode_id"],
                instruction_index=0,
            )
        )
    return graph, episodes, doc.get("split", "synthetic")


def export_bc_lines(
    specs: Sequence[EpisodeSpec],
    space: str,
    variant: Optional[VariantConfig] = None,
) -> list[str]:
    """Render the behavior-cloning dataset, one JSON line per learnable step.

    Each line pairs the canonical prompt document with the expert target
    token. Adjust steps are never targets, but once an adjusted move
    executes, the inserted history entries appear inside later prompts.
    Line order is episode order then step order; output is byte-deterministic.
    """
    lines: list[str] = []
    for spec in specs:
        target_spec = replace(spec, space=space, variant=variant or spec.variant)
        try:
            actions = expert_actions(target_spec)
        except ExpertError as e:
            raise DataError(
                f"expert generation failed for episode {spec.episode_id!r}: {e}"
            ) from e
        walk_spec = uncapped(target_spec)
        state = initial_state(walk_spec)
        for token in actions:
            assert token != ADJUST
            obs = observe(state, walk_spec)
            prompt = render_state_prompt(state, obs, walk_spec)
            line = {
                "schema_version": BC_FORMAT_VERSION,
                "episode_id": target_spec.episode_id,
                "instruction_index": target_spec.instruction_index,
                "step": state.step,
                "prompt": prompt.to_doc(),
                "target_token": token,
            }
            lines.append(json.dumps(line, sort_keys=True, separators=(",", ":")))
            step(state, walk_spec, token)
    return lines


def export_bc(
    specs: Sequence[EpisodeSpec],
    space: str,
    variant: Optional[VariantConfig],
    out: Union[str, Path],
) -> int:
    """Write the JSONL behavior-cloning dataset; returns the line count."""
    lines = export_bc_lines(specs, space, variant)
    Path(out).write_text("\n".join(lines) + ("\n" if lines else ""))
    return len(lines)
