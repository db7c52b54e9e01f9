"""Separation routines for the lazily generated constraint families.

Two families are separated against a (possibly fractional) edge-variable
vector: disconnectivity cuts x(delta(S)) >= 2 over proper target subsets,
and path constraints that forbid routes running from one depot to another.
Subtour separation inspects the connected components of the target-only
support graph and, when that graph is connected, falls back to a global
minimum cut over targets plus a merged depot vertex (so the cut value
accounts for depot edges exactly). Path separation shrinks unit-weight
target-target edges into paths and tests each shrunk path linked to more
than one depot; on integer points this detection is exact.

Emitted rows index variables by the canonical edge ordering of
``instance.edges``; they never reference landmark variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import Instance, edges
from .lp import ConstraintRow, row

EPS_CUT = 1e-6
_SUPPORT_EPS = 1e-9
_UNIT_TOL = 1e-9


@dataclass
class SupportGraph:
    """Positive-weight edges of a solution restricted to a vertex set."""

    vertices: list[int]
    weights: dict[tuple[int, int], float]

    def adjacency(self) -> dict[int, dict[int, float]]:
        adj: dict[int, dict[int, float]] = {v: {} for v in self.vertices}
        for (u, v), w in self.weights.items():
            adj[u][v] = w
            adj[v][u] = w
        return adj


@dataclass
class Cut:
    subset: set[int]
    value: float


def build_support_graph(
    x_edges: np.ndarray, instance: Instance, targets_only: bool
) -> SupportGraph:
    """Support graph of an edge vector, optionally dropping depot vertices."""
    p = instance.n_depots
    verts = (
        list(range(p, instance.n_vertices))
        if targets_only
        else list(range(instance.n_vertices))
    )
    weights = {}
    for val, (u, v) in zip(x_edges, edges(instance)):
        if val <= _SUPPORT_EPS:
            continue
        if targets_only and u < p:
            continue
        weights[(u, v)] = float(val)
    return SupportGraph(verts, weights)


def connected_components(g: SupportGraph) -> list[set[int]]:
    """Partition of the vertices into components, sorted by least member."""
    adj = g.adjacency()
    seen: set[int] = set()
    comps = []
    for start in sorted(g.vertices):
        if start in seen:
            continue
        stack, comp = [start], {start}
        seen.add(start)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    seen.add(v)
                    stack.append(v)
        comps.append(comp)
    return comps


def global_min_cut(g: SupportGraph) -> Cut:
    """Stoer-Wagner global minimum cut on a connected weighted graph.

    Deterministic: phases start from the smallest active vertex and ties in
    the most-tightly-connected choice go to the smallest vertex id.
    """
    verts = sorted(g.vertices)
    n = len(verts)
    if n < 2:
        raise ValueError("min cut needs at least two vertices")
    if len(connected_components(g)) != 1:
        raise ValueError("min cut requires a connected graph")
    idx = {v: i for i, v in enumerate(verts)}
    W = np.zeros((n, n))
    for (u, v), w in g.weights.items():
        W[idx[u], idx[v]] += w
        W[idx[v], idx[u]] += w

    members = [{v} for v in verts]
    active = list(range(n))
    best_value, best_side = np.inf, set()
    while len(active) > 1:
        a = [active[0]]
        in_a = {active[0]}
        conn = {v: W[active[0], v] for v in active[1:]}
        while len(a) < len(active):
            # most tightly connected next; ties to lowest original index
            nxt = max(sorted(conn), key=lambda v: conn[v])
            a.append(nxt)
            in_a.add(nxt)
            del conn[nxt]
            for v in conn:
                conn[v] += W[nxt, v]
        s, t = a[-2], a[-1]
        cut_value = float(sum(W[t, v] for v in active if v != t))
        if cut_value < best_value - 1e-12:
            best_value = cut_value
            best_side = set(members[t])
        members[s] = members[s] | members[t]
        W[s, :] += W[t, :]
        W[:, s] += W[:, t]
        W[s, s] = 0.0
        active.remove(t)
    return Cut(best_side, best_value)


def _delta_row(instance: Instance, subset: set[int]) -> ConstraintRow:
    """x(delta(subset)) >= 2 in canonical edge indexing."""
    coeffs = []
    for k, (u, v) in enumerate(edges(instance)):
        if (u in subset) != (v in subset):
            coeffs.append((k, 1.0))
    return row(coeffs, ">=", 2.0)


def _delta_value(x_edges: np.ndarray, instance: Instance, subset: set[int]) -> float:
    total = 0.0
    for val, (u, v) in zip(x_edges, edges(instance)):
        if (u in subset) != (v in subset):
            total += val
    return float(total)


def separate_subtour(
    x_edges: np.ndarray, instance: Instance, eps_cut: float = EPS_CUT
) -> list[ConstraintRow]:
    """Violated x(delta(S)) >= 2 rows for proper target subsets S.

    Component cuts are emitted when the target-only support graph is
    disconnected; otherwise the single most violated cut found by a global
    minimum cut over targets plus a merged depot vertex, if below 2.
    Single-target subsets are implied by the degree rows and skipped.
    """
    p, q = instance.n_depots, instance.n_targets
    if q < 2:
        return []
    target_graph = build_support_graph(x_edges, instance, targets_only=True)
    comps = connected_components(target_graph)
    if len(comps) > 1:
        out = []
        for comp in comps:
            if len(comp) < 2:
                continue
            if _delta_value(x_edges, instance, comp) < 2.0 - eps_cut:
                out.append(_delta_row(instance, comp))
        return out

    # connected: merge all depots into one super vertex so the cut value
    # equals x(delta(S)) over the full edge set
    depot_super = -1
    weights = dict(target_graph.weights)
    depot_mass: dict[int, float] = {}
    for val, (u, v) in zip(x_edges, edges(instance)):
        if val > _SUPPORT_EPS and u < p:
            depot_mass[v] = depot_mass.get(v, 0.0) + float(val)
    for v, w in depot_mass.items():
        weights[(depot_super, v)] = w
    merged = SupportGraph([depot_super] + list(range(p, p + q)), weights)
    if not depot_mass:
        # no depot edges at all: cut within the target graph alone
        merged = target_graph
    if len(merged.vertices) < 2 or len(connected_components(merged)) != 1:
        return []
    cut = global_min_cut(merged)
    subset = cut.subset - {depot_super}
    if depot_super in cut.subset:
        subset = set(merged.vertices) - cut.subset - {depot_super}
    if 2 <= len(subset) <= q - 1 and cut.value < 2.0 - eps_cut:
        return [_delta_row(instance, subset)]
    return []


def shrink_support_graph(
    g: SupportGraph,
) -> tuple[SupportGraph, dict[int, list[int]]]:
    """Contract unit-weight edges of ``g`` into path supervertices.

    Callers separate depot vertices out beforehand, so every unit edge
    seen here joins two targets. Returns the shrunk graph and, per
    surviving vertex, the original path it represents in end-to-end
    order. An edge that would close a path into a cycle is left alone;
    subtour separation owns those structures.
    """
    paths: dict[int, list[int]] = {v: [v] for v in g.vertices}
    rep: dict[int, int] = {v: v for v in g.vertices}

    def find(v: int) -> int:
        while rep[v] != v:
            rep[v] = rep[rep[v]]
            v = rep[v]
        return v

    unit_edges = sorted(
        (u, v)
        for (u, v), w in g.weights.items()
        if abs(w - 1.0) <= _UNIT_TOL
    )
    for u, v in unit_edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            continue  # closing edge of a unit cycle
        pu, pv = paths[ru], paths[rv]
        # valid contractions join two path extremes
        if u not in (pu[0], pu[-1]) or v not in (pv[0], pv[-1]):
            continue
        if pu[-1] != u:
            pu.reverse()
        if pv[0] != v:
            pv.reverse()
        target = min(ru, rv)
        other = max(ru, rv)
        paths[target] = pu + pv
        del paths[other]
        rep[other] = target
        rep[ru] = target
        rep[rv] = target

    new_weights: dict[tuple[int, int], float] = {}
    for (u, v), w in g.weights.items():
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        key = (min(ru, rv), max(ru, rv))
        new_weights[key] = new_weights.get(key, 0.0) + w
    return SupportGraph(sorted(paths), new_weights), paths


def _gamma_row_coeffs(instance: Instance, inner: set[int]) -> list[tuple[int, float]]:
    """Coefficient list of 2*x(gamma(inner)) over target-target edges."""
    p = instance.n_depots
    coeffs = []
    for k, (u, v) in enumerate(edges(instance)):
        if u >= p and u in inner and v in inner:
            coeffs.append((k, 2.0))
    return coeffs


def separate_path_elim(
    x_edges: np.ndarray, instance: Instance, eps_cut: float = EPS_CUT
) -> list[ConstraintRow]:
    """Violated path constraints found by the edge-shrinking heuristic.

    Each shrunk target path with extremes j, l that is linked to more than
    one depot is tested with the depot subset I' = {depots adjacent to j};
    a row is emitted when the constraint is violated by more than eps_cut.
    All discovered violations are returned.
    """
    p = instance.n_depots
    if p < 2:
        return []
    edge_list = edges(instance)
    edge_idx = {e: k for k, e in enumerate(edge_list)}
    x = {e: float(val) for val, e in zip(x_edges, edge_list)}

    full = build_support_graph(x_edges, instance, targets_only=False)
    target_part = SupportGraph(
        [v for v in full.vertices if v >= p],
        {e: w for e, w in full.weights.items() if e[0] >= p},
    )
    _, paths = shrink_support_graph(target_part)

    def depot_weight(i: int, j: int) -> float:
        return x.get((min(i, j), max(i, j)), 0.0)

    out: list[ConstraintRow] = []
    seen: set[tuple] = set()
    for path in paths.values():
        j, l = path[0], path[-1]
        if j == l:
            continue
        linked = [i for i in range(p) if depot_weight(i, j) > _SUPPORT_EPS
                  or depot_weight(i, l) > _SUPPORT_EPS]
        if len(linked) < 2:
            continue
        i_prime = [i for i in range(p) if depot_weight(i, j) > _SUPPORT_EPS]
        if not i_prime or len(i_prime) == p:
            continue
        inner = set(path[1:-1])
        coeffs = [(edge_idx[(i, j)], 1.0) for i in i_prime]
        if inner:
            # sum_{i in I'} x_ij + 2 x(gamma(S+{j,l})) + sum_{k not in I'} x_kl
            #   <= 2|S| + 3
            coeffs += _gamma_row_coeffs(instance, inner | {j, l})
            rhs = 2.0 * len(inner) + 3.0
        else:
            # adjacent extremes: the middle term is 3 x_jl and the bound 4
            coeffs.append((edge_idx[(min(j, l), max(j, l))], 3.0))
            rhs = 4.0
        for k in range(p):
            if k not in i_prime:
                coeffs.append((edge_idx[(k, l)], 1.0))
        lhs = sum(a * x_edges[k] for k, a in coeffs)
        if lhs > rhs + eps_cut:
            key = (tuple(sorted(coeffs)), rhs)
            if key not in seen:
                seen.add(key)
                out.append(row(coeffs, "<=", rhs))
    return out
