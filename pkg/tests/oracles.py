"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately naive: exhaustive enumeration over route
configurations, landmark subsets, cut subsets and constraint tuples. None
of it shares code paths with the solver it checks.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from lmroute.instance import Instance, build_coverage_sets, edge_cost, edges


def route_configs(p: int, q: int, require_all_depots: bool = True):
    """Yield every assignment of targets to per-depot ordered tours.

    Targets are global indices p .. p+q-1. Each configuration is a list of
    walks, one per depot: [depot, t1, .., tk, depot], or [depot] when the
    depot serves nothing (only allowed if require_all_depots is False).
    Tours are enumerated up to rotation and reflection.
    """
    targets = list(range(p, p + q))
    for assignment in itertools.product(range(p), repeat=q):
        groups = [[] for _ in range(p)]
        for t, dep in zip(targets, assignment):
            groups[dep].append(t)
        if require_all_depots and any(not g for g in groups):
            continue
        per_depot_tours = []
        for dep, group in enumerate(groups):
            tours = []
            if not group:
                tours.append([dep])
            elif len(group) == 1:
                tours.append([dep, group[0], dep])
            else:
                # the depot anchors the cycle, so only reflection is a
                # symmetry: dedup by ordering the endpoints
                for perm in itertools.permutations(group):
                    if perm[0] > perm[-1]:
                        continue
                    tours.append([dep, *perm, dep])
            per_depot_tours.append(tours)
        for combo in itertools.product(*per_depot_tours):
            yield [list(w) for w in combo]


def config_edge_usage(config: list[list[int]]) -> dict[tuple[int, int], int]:
    usage: dict[tuple[int, int], int] = {}
    for walk in config:
        for a, b in zip(walk, walk[1:]):
            e = (min(a, b), max(a, b))
            usage[e] = usage.get(e, 0) + 1
    return usage


def config_route_cost(instance: Instance, config: list[list[int]]) -> float:
    return sum(
        edge_cost(instance, e) * n for e, n in config_edge_usage(config).items()
    )


def min_landmark_count(
    requirements: tuple[tuple[frozenset, int], ...]
) -> int | None:
    """Smallest candidate subset meeting every (coverage set, count) need.

    Exhaustive over subset sizes of the union pool; None when impossible.
    """
    if not requirements:
        return 0
    pool = sorted(set().union(*(s for s, _ in requirements)))
    for covers, need in requirements:
        if len(covers) < need:
            return None
    lo = max(need for _, need in requirements)
    for size in range(lo, len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            chosen = set(combo)
            if all(len(covers & chosen) >= need for covers, need in requirements):
                return size
    return None


class _LandmarkMemo:
    def __init__(self, instance: Instance):
        self.coverage = build_coverage_sets(instance)
        self.index = {e: k for k, e in enumerate(edges(instance))}
        self.cache: dict = {}

    def min_count(self, usage: dict[tuple[int, int], int]) -> int | None:
        reqs = tuple(
            sorted(
                (frozenset(self.coverage.sets[self.index[e]]), 2 * n)
                for e, n in usage.items()
            )
        )
        if reqs not in self.cache:
            self.cache[reqs] = min_landmark_count(reqs)
        return self.cache[reqs]


def brute_force_optimum(
    instance: Instance, require_all_depots: bool = True
) -> tuple[float, list[list[int]]] | None:
    """Exhaustive optimum over per-depot tours x landmark subsets.

    Returns (objective, best routes) or None when no configuration admits
    a feasible landmark placement. Configurations whose route cost alone
    already exceeds the best total are skipped; landmark cost is
    non-negative, so this prunes nothing optimal.
    """
    memo = _LandmarkMemo(instance)
    p, q = instance.n_depots, instance.n_targets
    best: tuple[float, list[list[int]]] | None = None
    configs = sorted(
        route_configs(p, q, require_all_depots),
        key=lambda cfg: config_route_cost(instance, cfg),
    )
    for config in configs:
        route_cost = config_route_cost(instance, config)
        if best is not None and route_cost >= best[0] - 1e-12:
            break  # configs are sorted by route cost
        count = memo.min_count(config_edge_usage(config))
        if count is None:
            continue
        total = route_cost + instance.lm_cost * count
        if best is None or total < best[0] - 1e-12:
            best = (total, config)
    return best


def exhaustive_min_cut(vertices, weights) -> float:
    """Minimum over all 2^(n-1)-1 proper bipartitions."""
    vs = sorted(vertices)
    best = math.inf
    for r in range(1, len(vs)):
        for sub in itertools.combinations(vs[1:], r):
            s = set(sub)
            val = sum(w for (u, v), w in weights.items() if (u in s) != (v in s))
            best = min(best, val)
    # sides containing vs[0] are the complements of the above
    return best


def exhaustive_subtour_violations(
    x_edges: np.ndarray, instance: Instance, eps: float = 1e-6
) -> list[set[int]]:
    """All target subsets S, 2 <= |S| <= q-1, with x(delta(S)) < 2 - eps."""
    p, q = instance.n_depots, instance.n_targets
    edge_list = edges(instance)
    out = []
    targets = list(range(p, p + q))
    for r in range(2, q):
        for sub in itertools.combinations(targets, r):
            s = set(sub)
            val = sum(
                v
                for v, (a, b) in zip(x_edges, edge_list)
                if (a in s) != (b in s)
            )
            if val < 2.0 - eps:
                out.append(s)
    return out


def exhaustive_path_violations(
    x_edges: np.ndarray, instance: Instance, eps: float = 1e-6
) -> list[tuple]:
    """All violated (j, l, S, I') tuples of the two path constraint forms."""
    p, q = instance.n_depots, instance.n_targets
    edge_list = edges(instance)
    idx = {e: k for k, e in enumerate(edge_list)}

    def val(a: int, b: int) -> float:
        return float(x_edges[idx[(min(a, b), max(a, b))]])

    targets = list(range(p, p + q))
    depot_subsets = [
        set(c)
        for r in range(1, p)
        for c in itertools.combinations(range(p), r)
    ]
    out = []
    for j, l in itertools.permutations(targets, 2):
        rest = [t for t in targets if t not in (j, l)]
        for r in range(0, len(rest) + 1):
            for sub in itertools.combinations(rest, r):
                s = set(sub)
                for i_prime in depot_subsets:
                    lhs = sum(val(i, j) for i in i_prime)
                    lhs += sum(val(k, l) for k in range(p) if k not in i_prime)
                    if s:
                        inner = s | {j, l}
                        lhs += 2.0 * sum(
                            val(a, b)
                            for a, b in itertools.combinations(sorted(inner), 2)
                        )
                        rhs = 2.0 * len(s) + 3.0
                    else:
                        lhs += 3.0 * val(j, l)
                        rhs = 4.0
                    if lhs > rhs + eps:
                        out.append((j, l, frozenset(s), frozenset(i_prime)))
    return out
