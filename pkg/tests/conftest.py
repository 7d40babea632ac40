"""Shared fixtures: deterministic random graphs and worlds."""

from __future__ import annotations

import random

import pytest

from ursa.roadgraph import RoadEdge, RoadGraph, RoadType, RoadVertex, Vec2


def random_graph(
    rng: random.Random,
    n_vertices: int,
    extent: float = 500.0,
    extra_edge_factor: float = 0.25,
    major_bias: float = 0.75,
) -> RoadGraph:
    """Connected-ish random graph: spanning tree plus a few chords.

    Positions are continuous so path lengths never tie exactly.
    """
    types = list(RoadType)
    vertices = []
    for i in range(n_vertices):
        road_type = RoadType.MAJOR if rng.random() < major_bias else rng.choice(types)
        vertices.append(
            RoadVertex(i, Vec2(rng.uniform(0, extent), rng.uniform(0, extent)), road_type)
        )
    edges = set()
    order = list(range(n_vertices))
    rng.shuffle(order)
    for prev, cur in zip(order, order[1:]):
        edges.add((min(prev, cur), max(prev, cur)))
    for _ in range(int(n_vertices * extra_edge_factor)):
        a, b = rng.randrange(n_vertices), rng.randrange(n_vertices)
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return RoadGraph(vertices, [RoadEdge(a, b) for a, b in sorted(edges)])


def chain_graph(
    n: int, spacing: float = 10.0, road_type: RoadType = RoadType.MAJOR
) -> RoadGraph:
    vertices = [RoadVertex(i, Vec2(i * spacing, 0.0), road_type) for i in range(n)]
    edges = [RoadEdge(i, i + 1) for i in range(n - 1)]
    return RoadGraph(vertices, edges)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20260810)
