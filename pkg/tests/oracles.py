"""Independent reference implementations used only for checking.

These deliberately avoid the package's own graph/metric code: distances
come from networkx, CLS/SPL are direct closed-form evaluations, and macro
F1 is built from an explicit confusion matrix.
"""

import math
from collections import Counter

import networkx as nx


def nx_graph(graph):
    g = nx.Graph()
    for n, p in graph.nodes.items():
        g.add_node(n, pos=(p.x, p.y, p.z))
    for a, b in graph.edges:
        pa, pb = graph.nodes[a], graph.nodes[b]
        w = math.dist((pa.x, pa.y, pa.z), (pb.x, pb.y, pb.z))
        g.add_edge(a, b, weight=w)
    return g


def nx_geodesic(graph, a, b):
    return nx.dijkstra_path_length(nx_graph(graph), a, b, weight="weight")


def nx_all_distances(graph):
    return dict(nx.all_pairs_dijkstra_path_length(nx_graph(graph), weight="weight"))


def walk_length(graph, path):
    total = 0.0
    for a, b in zip(path, path[1:]):
        pa, pb = graph.nodes[a], graph.nodes[b]
        total += math.dist((pa.x, pa.y, pa.z), (pb.x, pb.y, pb.z))
    return total


def spl_formula(success: bool, optimal_m: float, traveled_m: float) -> float:
    if not success:
        return 0.0
    if optimal_m == 0.0:
        return 1.0
    return optimal_m / max(traveled_m, optimal_m)


def cls_formula(graph, pred, ref, threshold=3.0, dist_table=None):
    """Direct evaluation of CLS = coverage * length-score."""
    d = dist_table or nx_all_distances(graph)
    coverage = sum(
        math.exp(-min(d[r][v] for v in pred) / threshold) for r in ref
    ) / len(ref)
    expected = coverage * walk_length(graph, ref)
    pl_pred = walk_length(graph, pred)
    if expected == 0.0:
        score = 1.0 if pl_pred == 0.0 else 0.0
    else:
        score = expected / (expected + abs(expected - pl_pred))
    return coverage * score


def confusion_macro_f1(gold, pred):
    """Macro F1 from an explicit confusion matrix."""
    classes = sorted(set(gold) | set(pred))
    matrix = Counter(zip(gold, pred))
    f1s = []
    for c in classes:
        tp = matrix[(c, c)]
        fp = sum(matrix[(g, c)] for g in classes if g != c)
        fn = sum(matrix[(c, p)] for p in classes if p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0.0:
            f1s.append(0.0)
        else:
            f1s.append(2 * precision * recall / (precision + recall))
    return sum(f1s) / len(f1s)


def random_world(rng, n_nodes=9, side=12.0, radius=5.0):
    """Small random geometric graph (largest component) for oracle runs."""
    from vlnsim.navgraph import NavGraph, Position3D

    pts = {
        f"v{i}": Position3D(rng.uniform(0, side), rng.uniform(0, side), 0.0)
        for i in range(n_nodes)
    }
    ids = sorted(pts)
    edges = []
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            pa, pb = pts[a], pts[b]
            if math.dist((pa.x, pa.y), (pb.x, pb.y)) <= radius:
                edges.append((a, b))
    g = nx.Graph(edges)
    g.add_nodes_from(ids)
    component = max(nx.connected_components(g), key=lambda c: (len(c), sorted(c)[0]))
    nodes = {n: pts[n] for n in component}
    kept = [e for e in edges if e[0] in component and e[1] in component]
    return NavGraph(nodes, kept, scan_id="oracle")


def random_walk(rng, graph, max_len=6):
    ids = sorted(graph.node_ids())
    node = rng.choice(ids)
    walk = [node]
    for _ in range(rng.randint(0, max_len)):
        nbs = graph.neighbors(node)
        if not nbs:
            break
        node = rng.choice(list(nbs))
        walk.append(node)
    return walk
