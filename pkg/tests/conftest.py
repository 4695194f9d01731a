import math

import pytest

from vlnsim.navgraph import NavGraph, Position3D
from vlnsim.simulator import EpisodeSpec, VariantConfig


def make_graph(positions, edges, scan_id="test"):
    nodes = {n: Position3D(*xyz) for n, xyz in positions.items()}
    return NavGraph(nodes, edges, scan_id=scan_id)


def fan_graph(center_neighbors, center="C", scan_id="fan"):
    """Star graph: center node at origin, neighbors placed by (bearing, distance).

    bearing is compass degrees (0 = +y, clockwise); distance in meters.
    """
    positions = {center: (0.0, 0.0, 0.0)}
    edges = []
    for name, (bearing_deg, dist) in center_neighbors.items():
        rad = math.radians(bearing_deg)
        positions[name] = (dist * math.sin(rad), dist * math.cos(rad), 0.0)
        edges.append((center, name))
    return make_graph(positions, edges, scan_id=scan_id)


def spec_for(graph, path, heading=0.0, space="low", variant=None, **kw):
    return EpisodeSpec(
        graph=graph,
        start=path[0],
        start_heading_deg=heading,
        goal=path[-1],
        instruction="test instruction",
        gt_path=tuple(path),
        space=space,
        variant=variant or VariantConfig(),
        episode_id=kw.pop("episode_id", "t0"),
        instruction_index=kw.pop("instruction_index", 0),
    )


@pytest.fixture(scope="session")
def synthetic_world():
    from vlnsim.data import SyntheticWorldParams, gen_synthetic

    params = SyntheticWorldParams(node_count=60, seed=42, episode_count=30)
    graph, episodes = gen_synthetic(params)
    return params, graph, episodes


@pytest.fixture
def triangle_graph():
    # A(0,0) - B(3,0) - C(3,4); straight-line A-C = 5, walkable = 7
    return make_graph(
        {"A": (0, 0, 0), "B": (3, 0, 0), "C": (3, 4, 0)},
        [("A", "B"), ("B", "C")],
    )
