"""Problem instances: depots, targets, landmark candidates and edge coverage.

Vertices are indexed globally with depots first (0 .. p-1) followed by
targets (p .. p+q-1). The edge set contains every depot-target and
target-target pair but no depot-depot pairs. An edge is *covered* by a
candidate landmark when the whole segment between its endpoints stays
within sensing range of the candidate; because the sensing disk is convex
this holds exactly when both endpoints are in range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Point:
    """A position on the plane, in grid units."""

    x: float
    y: float

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class Instance:
    """One problem instance.

    depots and targets must be pairwise distinct points; landmark
    candidates may coincide with anything. ``lm_cost`` is the weight of
    one placed landmark in the objective (unit cost by default).
    """

    depots: list[Point]
    targets: list[Point]
    landmark_candidates: list[Point]
    sensing_range: float
    lm_cost: float = 1.0
    seed: int | None = None

    @property
    def n_depots(self) -> int:
        return len(self.depots)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def n_vertices(self) -> int:
        return len(self.depots) + len(self.targets)

    @property
    def n_candidates(self) -> int:
        return len(self.landmark_candidates)

    def vertex(self, idx: int) -> Point:
        """Vertex by global index, depots first."""
        p = len(self.depots)
        if 0 <= idx < p:
            return self.depots[idx]
        if p <= idx < self.n_vertices:
            return self.targets[idx - p]
        raise IndexError(f"vertex index {idx} out of range")

    def is_depot(self, idx: int) -> bool:
        return 0 <= idx < len(self.depots)

    def vertex_array(self) -> np.ndarray:
        """(n_vertices, 2) coordinate array, depots first."""
        pts = self.depots + self.targets
        return np.array([[pt.x, pt.y] for pt in pts], dtype=float)

    def candidate_array(self) -> np.ndarray:
        pts = self.landmark_candidates
        return np.array([[pt.x, pt.y] for pt in pts], dtype=float).reshape(len(pts), 2)


def edges(instance: Instance) -> list[tuple[int, int]]:
    """Canonical edge list: pairs (u, v) with u < v, no depot-depot pairs.

    Every module that indexes edge variables relies on this ordering.
    """
    p = instance.n_depots
    n = instance.n_vertices
    out = []
    for u in range(n):
        for v in range(u + 1, n):
            if u < p and v < p:
                continue
            out.append((u, v))
    return out


def validate_edge(instance: Instance, e: tuple[int, int]) -> tuple[int, int]:
    """Normalize an edge to (min, max) order and reject invalid ids."""
    u, v = e
    if u == v:
        raise ValueError(f"self-loop edge ({u}, {v}) is not a valid edge")
    u, v = (u, v) if u < v else (v, u)
    n = instance.n_vertices
    if not (0 <= u < n and 0 <= v < n):
        raise ValueError(f"edge ({u}, {v}) references vertices outside 0..{n - 1}")
    if v < instance.n_depots:
        raise ValueError(f"edge ({u}, {v}) joins two depots")
    return u, v


def edge_cost(instance: Instance, e: tuple[int, int]) -> float:
    """Euclidean travel cost of an edge."""
    u, v = validate_edge(instance, e)
    return instance.vertex(u).distance_to(instance.vertex(v))


@dataclass
class CoverageSets:
    """For each edge, the candidate landmarks covering the whole segment."""

    edge_list: list[tuple[int, int]]
    sets: list[list[int]]
    _index: dict[tuple[int, int], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._index:
            self._index = {e: i for i, e in enumerate(self.edge_list)}

    def for_edge(self, e: tuple[int, int]) -> list[int]:
        u, v = e if e[0] < e[1] else (e[1], e[0])
        return self.sets[self._index[(u, v)]]


def build_coverage_sets(instance: Instance) -> CoverageSets:
    """Compute the covering candidate set of every edge.

    Candidate k covers edge (u, v) iff both endpoints lie within
    sensing_range of k (closed comparison), which by convexity of the
    disk is equivalent to the whole segment being within range.
    """
    edge_list = edges(instance)
    verts = instance.vertex_array()
    cands = instance.candidate_array()
    if instance.n_candidates == 0:
        return CoverageSets(edge_list, [[] for _ in edge_list])
    # (n_candidates, n_vertices) boolean in-range matrix
    d2 = ((cands[:, None, :] - verts[None, :, :]) ** 2).sum(axis=2)
    in_range = d2 <= instance.sensing_range**2 + 0.0
    sets = []
    for u, v in edge_list:
        both = in_range[:, u] & in_range[:, v]
        sets.append([int(k) for k in np.flatnonzero(both)])
    return CoverageSets(edge_list, sets)


def generate_instance(
    n_depots: int,
    n_vertices: int,
    grid: float,
    lm_factor: int,
    sensing_range: float,
    seed: int,
) -> Instance:
    """Draw a random instance on the [0, grid]^2 square.

    ``n_vertices`` counts depots and targets together; ``lm_factor *
    n_vertices`` candidate landmark locations are drawn after the
    vertices from the same stream, so (parameters, seed) fully determine
    the instance.
    """
    if n_depots < 1:
        raise ValueError("need at least one depot")
    if n_vertices <= n_depots:
        raise ValueError("n_vertices must exceed n_depots (no targets otherwise)")
    if grid <= 0:
        raise ValueError("grid side must be positive")
    if lm_factor < 0:
        raise ValueError("lm_factor must be non-negative")
    if sensing_range <= 0:
        raise ValueError("sensing_range must be positive")

    rng = np.random.default_rng(seed)
    while True:
        coords = rng.uniform(0.0, grid, size=(n_vertices, 2))
        # ties between vertex points have probability zero but would break
        # the distinctness invariant; redraw if one ever occurs
        if len({(float(x), float(y)) for x, y in coords}) == n_vertices:
            break
    cand = rng.uniform(0.0, grid, size=(lm_factor * n_vertices, 2))
    pts = [Point(float(x), float(y)) for x, y in coords]
    return Instance(
        depots=pts[:n_depots],
        targets=pts[n_depots:],
        landmark_candidates=[Point(float(x), float(y)) for x, y in cand],
        sensing_range=float(sensing_range),
        seed=int(seed),
    )


def validate_instance(instance: Instance) -> list[str]:
    """Collect invariant violations; empty list means the instance is valid."""
    bad = []
    if instance.n_depots < 1:
        bad.append("depots: need at least one depot")
    if instance.n_targets < 1:
        bad.append("targets: need at least one target")
    if not instance.sensing_range > 0:
        bad.append(f"sensing_range: must be positive, got {instance.sensing_range}")
    pts = instance.depots + instance.targets
    for i, pt in enumerate(pts):
        if not (math.isfinite(pt.x) and math.isfinite(pt.y)):
            bad.append(f"vertex {i}: non-finite coordinates ({pt.x}, {pt.y})")
    for pt in instance.landmark_candidates:
        if not (math.isfinite(pt.x) and math.isfinite(pt.y)):
            bad.append(f"landmark candidate: non-finite coordinates ({pt.x}, {pt.y})")
    seen: dict[tuple[float, float], int] = {}
    for i, pt in enumerate(pts):
        key = (pt.x, pt.y)
        if key in seen:
            kind = "depot" if instance.is_depot(i) else "target"
            bad.append(f"{kind} at vertex {i}: duplicates vertex {seen[key]} at {key}")
        else:
            seen[key] = i
    return bad


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------

_INSTANCE_KEYS = {"depots", "targets", "landmarks", "sensing_range", "lm_cost", "seed"}
_REQUIRED_KEYS = {"depots", "targets", "landmarks", "sensing_range"}


def instance_to_dict(instance: Instance) -> dict:
    d = {
        "depots": [[pt.x, pt.y] for pt in instance.depots],
        "targets": [[pt.x, pt.y] for pt in instance.targets],
        "landmarks": [[pt.x, pt.y] for pt in instance.landmark_candidates],
        "sensing_range": instance.sensing_range,
        "lm_cost": instance.lm_cost,
    }
    if instance.seed is not None:
        d["seed"] = instance.seed
    return d


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise ValueError("instance JSON must be an object")
    unknown = set(data) - _INSTANCE_KEYS
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(data)
    if missing:
        raise ValueError(f"missing instance keys: {sorted(missing)}")

    def points(key: str) -> list[Point]:
        raw = data[key]
        if not isinstance(raw, list):
            raise ValueError(f"{key} must be an array of [x, y] pairs")
        out = []
        for item in raw:
            if not (isinstance(item, (list, tuple)) and len(item) == 2):
                raise ValueError(f"{key} entries must be [x, y] pairs, got {item!r}")
            out.append(Point(float(item[0]), float(item[1])))
        return out

    seed = data.get("seed")
    return Instance(
        depots=points("depots"),
        targets=points("targets"),
        landmark_candidates=points("landmarks"),
        sensing_range=float(data["sensing_range"]),
        lm_cost=float(data.get("lm_cost", 1.0)),
        seed=None if seed is None else int(seed),
    )


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(instance_to_dict(instance), indent=2, sort_keys=True) + "\n"
    )


def load_instance(path: str | Path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))
