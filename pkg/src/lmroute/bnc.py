"""Branch-and-cut solver for joint routing and landmark placement.

The model minimizes total edge cost plus (weighted) landmark count,
subject to: degree two at every target, optionally degree two at every
depot, and per-edge localization rows requiring the placed landmarks
covering a traversed edge to number at least twice its edge variable.
Edge variables are integers in {0, 1} between targets and {0, 1, 2} on
depot edges (2 encodes a return trip); landmark variables are binary.

Disconnectivity and depot-to-depot path constraints are separated lazily:
nodes are explored best-first by LP bound, every violated cut found is
kept in a global pool applied to all later node solves, and a candidate
incumbent is accepted only once it is integral and both separators come
back empty. Branching picks the variable with fractional part closest to
one half (ties to the lowest variable index, so edge variables win over
landmark variables).
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lp as lp_mod
from .instance import CoverageSets, Instance, build_coverage_sets, edge_cost, edges
from .lp import ConstraintRow, LinearProgram, row
from .separation import separate_path_elim, separate_subtour


@dataclass
class SolverConfig:
    """Tolerances, limits and formulation switches."""

    time_limit_s: float = 600.0
    node_limit: int = 1_000_000_000
    eps_int: float = 1e-6
    eps_cut: float = 1e-6
    depot_degree: bool = True
    localization: str = "literal"  # or "two-per-edge"

    def __post_init__(self):
        if self.time_limit_s <= 0 or self.node_limit <= 0:
            raise ValueError("limits must be positive")
        if self.localization not in ("literal", "two-per-edge"):
            raise ValueError("localization must be 'literal' or 'two-per-edge'")


@dataclass
class Model:
    """The static MILP: variables, bounds, objective and standing rows.

    Variable layout: one x per edge in canonical order, then (in
    two-per-edge mode) one auxiliary usage binary per depot edge, then one
    d per candidate landmark.
    """

    instance: Instance
    coverage: CoverageSets
    edge_list: list[tuple[int, int]]
    n_edges: int
    n_aux: int
    n_candidates: int
    lp: LinearProgram

    @property
    def n_vars(self) -> int:
        return self.n_edges + self.n_aux + self.n_candidates

    def d_index(self, k: int) -> int:
        return self.n_edges + self.n_aux + k


@dataclass
class Node:
    """A subproblem: bound overrides tightened by branching."""

    bound_overrides: dict[int, tuple[float, float]] = field(default_factory=dict)
    lp_bound: float = -math.inf
    warm: lp_mod.Basis | None = None


@dataclass
class Stats:
    subtour_cuts: int = 0
    path_cuts: int = 0
    nodes: int = 0
    time_s: float = 0.0


@dataclass
class Solution:
    """Routes (one closed walk per depot), placed landmarks and objective."""

    status: str  # "optimal" | "infeasible" | "limit"
    objective: float | None
    routes: list[list[int]]
    landmarks: list[int]
    stats: Stats


def build_model(
    instance: Instance,
    coverage: CoverageSets | None = None,
    config: SolverConfig | None = None,
) -> Model:
    """Assemble the static rows: degree, optional depot degree, localization."""
    config = config or SolverConfig()
    coverage = coverage if coverage is not None else build_coverage_sets(instance)
    edge_list = edges(instance)
    n_edges = len(edge_list)
    p = instance.n_depots
    two_per_edge = config.localization == "two-per-edge"
    depot_edge_pos = [k for k, (u, v) in enumerate(edge_list) if u < p]
    aux_of_edge = {}
    if two_per_edge:
        for a, k in enumerate(depot_edge_pos):
            aux_of_edge[k] = n_edges + a
    n_aux = len(aux_of_edge)
    n_cand = instance.n_candidates

    n_vars = n_edges + n_aux + n_cand
    obj = np.zeros(n_vars)
    lower = np.zeros(n_vars)
    upper = np.ones(n_vars)
    for k, e in enumerate(edge_list):
        obj[k] = edge_cost(instance, e)
        if e[0] < p:
            upper[k] = 2.0
    for k in range(n_cand):
        obj[n_edges + n_aux + k] = instance.lm_cost

    rows: list[ConstraintRow] = []
    # degree rows: every target is entered and left exactly once
    incident: dict[int, list[int]] = {v: [] for v in range(instance.n_vertices)}
    for k, (u, v) in enumerate(edge_list):
        incident[u].append(k)
        incident[v].append(k)
    for j in range(p, instance.n_vertices):
        rows.append(row([(k, 1.0) for k in incident[j]], "=", 2.0))
    if config.depot_degree:
        for i in range(p):
            rows.append(row([(k, 1.0) for k in incident[i]], "=", 2.0))
    # localization rows: covering landmarks must number >= 2 x_e, or in
    # two-per-edge mode >= 2 per use of a depot edge via a usage binary
    for k in range(n_edges):
        cover = [(n_edges + n_aux + c, 1.0) for c in coverage.sets[k]]
        if k in aux_of_edge:
            a = aux_of_edge[k]
            rows.append(row(cover + [(a, -2.0)], ">=", 0.0))
            rows.append(row([(a, 2.0), (k, -1.0)], ">=", 0.0))
        else:
            rows.append(row(cover + [(k, -2.0)], ">=", 0.0))

    program = lp_mod.make_program(obj, rows, lower, upper)
    return Model(instance, coverage, edge_list, n_edges, n_aux, n_cand, program)


def check_feasible(
    x_edges: np.ndarray,
    d: np.ndarray,
    instance: Instance,
    eps_int: float = 1e-6,
    eps_cut: float = 1e-6,
) -> tuple[bool, list[ConstraintRow]]:
    """Integrality plus empty separation on the rounded point.

    Returns (feasible, violated_rows); the rows are expressed over edge
    variables and come from separation run on the rounded vector.
    """
    frac = np.abs(x_edges - np.round(x_edges))
    if np.any(frac > eps_int) or np.any(np.abs(d - np.round(d)) > eps_int):
        return False, []
    rounded = np.round(x_edges)
    rows = separate_subtour(rounded, instance, eps_cut)
    rows += separate_path_elim(rounded, instance, eps_cut)
    return (not rows), rows


def branch(node: Node, x: np.ndarray, eps_int: float = 1e-6) -> tuple[Node, Node]:
    """Split on the variable with fractional part closest to one half."""
    frac = np.abs(x - np.round(x))
    if not np.any(frac > eps_int):
        raise ValueError("branch called on an integral point")
    dist = np.abs(x - np.floor(x) - 0.5)
    dist[frac <= eps_int] = np.inf
    j = int(np.argmin(dist))
    lo_j = math.floor(x[j])
    down = Node(dict(node.bound_overrides), node.lp_bound)
    up = Node(dict(node.bound_overrides), node.lp_bound)
    prev = node.bound_overrides.get(j)
    lo_prev = prev[0] if prev else None
    up_prev = prev[1] if prev else None
    down.bound_overrides[j] = (
        lo_prev if lo_prev is not None else -math.inf,
        float(lo_j),
    )
    up.bound_overrides[j] = (
        float(lo_j + 1),
        up_prev if up_prev is not None else math.inf,
    )
    return down, up


def extract_routes(x_edges: np.ndarray, instance: Instance) -> list[list[int]]:
    """Walk the integral edge multiset into one walk per depot.

    Depot edges at value 2 contribute two copies (a return trip). With
    depot-degree rows on (the default) every walk is a closed cycle
    through its depot. Without them the printed constraint system also
    admits depot-to-depot chains, in which case a walk may end at another
    depot; unused depots yield the bare walk ``[depot]``.
    """
    p = instance.n_depots
    edge_list = edges(instance)
    remaining: dict[int, dict[int, int]] = {
        v: {} for v in range(instance.n_vertices)
    }
    for val, (u, v) in zip(np.round(x_edges).astype(int), edge_list):
        if val > 0:
            remaining[u][v] = remaining[u].get(v, 0) + int(val)
            remaining[v][u] = remaining[v].get(u, 0) + int(val)

    def take(u: int) -> int | None:
        for v in sorted(remaining[u]):
            if remaining[u][v] > 0:
                remaining[u][v] -= 1
                remaining[v][u] -= 1
                return v
        return None

    routes = []
    for depot in range(p):
        walk = [depot]
        while True:
            nxt = take(walk[-1])
            if nxt is None:
                break
            walk.append(nxt)
            # keep walking until we are back home with nothing left there
            if nxt == depot and not any(c > 0 for c in remaining[depot].values()):
                break
        routes.append(walk)
    if any(c > 0 for adj in remaining.values() for c in adj.values()):
        raise ValueError("positive edges remain outside all depot walks")
    return routes


def routes_to_edge_vector(routes: list[list[int]], instance: Instance) -> np.ndarray:
    """Re-encode walks as the canonical edge-count vector."""
    edge_list = edges(instance)
    idx = {e: k for k, e in enumerate(edge_list)}
    x = np.zeros(len(edge_list))
    for walk in routes:
        for a, b in zip(walk, walk[1:]):
            x[idx[(min(a, b), max(a, b))]] += 1.0
    return x


def solve(instance: Instance, config: SolverConfig | None = None) -> Solution:
    """Best-first branch-and-cut over the LP relaxation."""
    config = config or SolverConfig()
    started = time.monotonic()
    stats = Stats()
    model = build_model(instance, config=config)
    pool: list[ConstraintRow] = []
    pool_keys: set = set()

    incumbent: Solution | None = None
    best_obj = math.inf

    counter = 0
    heap: list[tuple[float, int, Node]] = []
    heapq.heappush(heap, (-math.inf, counter, Node()))

    def out_of_budget() -> bool:
        return (
            time.monotonic() - started > config.time_limit_s
            or stats.nodes >= config.node_limit
        )

    def add_cuts(rows: list[ConstraintRow]) -> int:
        added = 0
        for r in rows:
            key = (r.coeffs, r.sense, r.rhs)
            if key in pool_keys:
                continue
            pool_keys.add(key)
            pool.append(r)
            if r.sense == ">=":
                stats.subtour_cuts += 1
            else:
                stats.path_cuts += 1
            added += 1
        return added

    hit_limit = False
    while heap:
        if out_of_budget():
            hit_limit = True
            break
        bound, _, node = heapq.heappop(heap)
        if bound >= best_obj - 1e-6:
            continue
        stats.nodes += 1

        program = lp_mod.append_rows(model.lp, pool)
        for j, (lo, up) in node.bound_overrides.items():
            program.lower[j] = max(program.lower[j], lo)
            program.upper[j] = min(program.upper[j], up)

        warm = node.warm
        while True:
            result = lp_mod.solve_lp(program, warm=warm, want_basis=True)
            warm = result.basis
            if result.status != "optimal":
                break
            alpha = result.objective
            if alpha < node.lp_bound - 1e-6:
                raise ArithmeticError("LP bound decreased along the tree")
            node.lp_bound = alpha
            if alpha >= best_obj - 1e-6:
                break
            x = result.x[: model.n_edges]
            d = result.x[model.n_edges + model.n_aux :]
            all_integral = not np.any(
                np.abs(result.x - np.round(result.x)) > config.eps_int
            )
            if all_integral:
                feasible, violated = check_feasible(
                    x, d, instance, config.eps_int, config.eps_cut
                )
                if feasible:
                    x_int = np.round(x)
                    d_int = np.round(d)
                    routes = extract_routes(x_int, instance)
                    placed = [int(k) for k in np.flatnonzero(d_int > 0.5)]
                    obj = float(
                        sum(
                            edge_cost(instance, e) * x_int[k]
                            for k, e in enumerate(model.edge_list)
                        )
                        + instance.lm_cost * len(placed)
                    )
                    if obj < best_obj - 1e-6:
                        best_obj = obj
                        incumbent = Solution("optimal", obj, routes, placed, stats)
                    break
                if not violated:
                    raise ArithmeticError("integral point neither feasible nor cut")
                add_cuts(violated)
                program = lp_mod.append_rows(program, violated)
                continue
            # fractional point: try to cut it, branch once nothing separates
            cuts = separate_subtour(x, instance, config.eps_cut)
            cuts += separate_path_elim(x, instance, config.eps_cut)
            fresh = [r for r in cuts if (r.coeffs, r.sense, r.rhs) not in pool_keys]
            if fresh:
                add_cuts(fresh)
                program = lp_mod.append_rows(program, fresh)
                continue
            down, up_node = branch(node, result.x, config.eps_int)
            down.warm = result.basis
            up_node.warm = result.basis
            counter += 1
            heapq.heappush(heap, (alpha, counter, down))
            counter += 1
            heapq.heappush(heap, (alpha, counter, up_node))
            break

    stats.time_s = time.monotonic() - started
    if incumbent is not None:
        status = "limit" if hit_limit and heap else "optimal"
        incumbent.status = status
        incumbent.stats = stats
        return incumbent
    if hit_limit:
        return Solution("limit", None, [], [], stats)
    return Solution("infeasible", None, [], [], stats)


def verify_solution(instance: Instance, solution: Solution) -> list[str]:
    """Independent feasibility audit of a solution against its instance.

    Recomputes everything from the routes: depot anchoring, exactly-once
    target coverage, landmark validity, the two-landmarks-per-edge-use
    coverage requirement on every traversed edge, and the objective.
    Returns human-readable violations; empty means the solution checks out.
    """
    bad: list[str] = []
    if solution.status == "infeasible":
        return bad
    p = instance.n_depots
    if len(solution.routes) != p:
        bad.append(f"expected {p} routes (one per depot), got {len(solution.routes)}")
        return bad
    for i, walk in enumerate(solution.routes):
        if not walk or walk[0] != i:
            bad.append(f"route {i} does not start at depot {i}: {walk}")
        elif len(walk) > 1 and walk[-1] != i:
            bad.append(f"route {i} does not return to depot {i}: {walk}")
    visits: dict[int, int] = {}
    for walk in solution.routes:
        for v in walk:
            if v >= p:
                visits[v] = visits.get(v, 0) + 1
    for j in range(p, instance.n_vertices):
        got = visits.get(j, 0)
        if got != 1:
            bad.append(f"target {j} visited {got} times (must be exactly once)")
    for k in solution.landmarks:
        if not (0 <= k < instance.n_candidates):
            bad.append(f"landmark index {k} out of range")
    placed = set(solution.landmarks)
    coverage = build_coverage_sets(instance)
    x = routes_to_edge_vector(solution.routes, instance)
    cost = 0.0
    for k, e in enumerate(edges(instance)):
        if x[k] <= 0:
            continue
        cost += edge_cost(instance, e) * x[k]
        covering = sum(1 for c in coverage.sets[k] if c in placed)
        if covering < 2 * x[k]:
            bad.append(
                f"edge {e} used {int(x[k])}x has only {covering} covering "
                f"landmarks (needs {int(2 * x[k])})"
            )
    cost += instance.lm_cost * len(solution.landmarks)
    if solution.objective is None or abs(cost - solution.objective) > 1e-6:
        bad.append(
            f"objective {solution.objective} does not match recomputed {cost:.9f}"
        )
    return bad


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------


def solution_to_dict(solution: Solution) -> dict:
    return {
        "objective": solution.objective,
        "routes": [list(map(int, walk)) for walk in solution.routes],
        "landmarks": [int(k) for k in solution.landmarks],
        "stats": {
            "subtour_cuts": solution.stats.subtour_cuts,
            "path_cuts": solution.stats.path_cuts,
            "nodes": solution.stats.nodes,
            "time_s": solution.stats.time_s,
        },
        "status": solution.status,
    }


def solution_from_dict(data: dict) -> Solution:
    if not isinstance(data, dict):
        raise ValueError("solution JSON must be an object")
    missing = {"objective", "routes", "landmarks", "stats", "status"} - set(data)
    if missing:
        raise ValueError(f"missing solution keys: {sorted(missing)}")
    st = data["stats"]
    stats = Stats(
        subtour_cuts=int(st.get("subtour_cuts", 0)),
        path_cuts=int(st.get("path_cuts", 0)),
        nodes=int(st.get("nodes", 0)),
        time_s=float(st.get("time_s", 0.0)),
    )
    obj = data["objective"]
    return Solution(
        status=str(data["status"]),
        objective=None if obj is None else float(obj),
        routes=[[int(v) for v in walk] for walk in data["routes"]],
        landmarks=[int(k) for k in data["landmarks"]],
        stats=stats,
    )


def save_solution(solution: Solution, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(solution_to_dict(solution), indent=2, sort_keys=True) + "\n"
    )


def load_solution(path: str | Path) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text()))
