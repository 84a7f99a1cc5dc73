"""Admissible forest graphs on clusters plus external points.

Vertices are numbered clusters first (in order, points in canonical order)
and then the external points.  A forest is stored as a sorted tuple of
edges (a, b) with a < b over that numbering.

Admissibility, for a forest on eta_1..eta_m and gamma:

* acyclic, and no edge inside a cluster;
* every tree holds a cluster point; among the clusters it meets, the one
  nearest to eta_1 in the collapsed tree (see the last clause) contributes
  exactly one point, the root.  When clusters are indexed by that distance
  this is the lowest index present;
* walking away from the root along an edge u -> v with u in eta_i:
  if v is in eta_j then u is the only point of eta_i adjacent to eta_j in
  the whole forest; if v is external then u is its only neighbour in eta_i;
* collapsing every cluster to one vertex gives a tree on m + n vertices.

The enumeration follows the Q recursion: the base point of the current
first cluster picks its neighbours, the touched clusters are merged into
the first cluster, and the rest is solved recursively.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import chain, combinations, product
from math import prod

import numpy as np

from .combinatorics import forest_count_formula
from .errors import DomainError, ResourceCapError, StructuralError

VERTEX_CAP = 10


@dataclass(frozen=True)
class Vertex:
    cluster: int | None  # None for an external point
    index: int  # position inside its cluster, or inside gamma


@dataclass(frozen=True)
class ForestGraph:
    registry: tuple
    edges: tuple
    roots: tuple = ()

    def to_json(self):
        return {
            "vertices": [
                {"cluster": v.cluster, "index": v.index} if v.cluster is not None
                else {"external": v.index}
                for v in self.registry
            ],
            "edges": [list(e) for e in self.edges],
            "roots": list(self.roots),
        }


def make_registry(sizes, n):
    reg = [Vertex(i, k) for i, s in enumerate(sizes) for k in range(s)]
    reg += [Vertex(None, k) for k in range(n)]
    return tuple(reg)


def _labels(sizes, n):
    out, start = [], 0
    for s in sizes:
        out.append(tuple(range(start, start + s)))
        start += s
    return tuple(out), tuple(range(start, start + n))


def _subsets(seq):
    return chain.from_iterable(combinations(seq, k) for k in range(len(seq) + 1))


def _nonempty(seq):
    return chain.from_iterable(combinations(seq, k) for k in range(1, len(seq) + 1))


# ---------------------------------------------------------------- enumeration

def _count(first, others, gamma, memo):
    key = (len(first), tuple(len(o) for o in others), len(gamma))
    if key in memo:
        return memo[key]
    if not first:
        val = 1 if not others and not gamma else 0
    else:
        val = 0
        rest = first[1:]
        for xi in _subsets(gamma):
            g = tuple(y for y in gamma if y not in xi)
            for I in _subsets(range(len(others))):
                merged = rest + xi + tuple(p for i in I for p in others[i])
                left = tuple(o for i, o in enumerate(others) if i not in I)
                val += prod(2 ** len(others[i]) - 1 for i in I) * _count(merged, left, g, memo)
    memo[key] = val
    return val


class _Enumerator:
    """Recursive edge-set generator with caching of small sub-results."""

    def __init__(self, base="lowest", cache_limit=50_000):
        self.base = base
        self.cache_limit = cache_limit
        self.cache = {}
        self.counts = {}

    def pick(self, first):
        return min(first) if self.base == "lowest" else max(first)

    def run(self, first, others, gamma):
        first = tuple(sorted(first))
        key = (first, others, gamma)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if _count(first, others, gamma, self.counts) <= self.cache_limit:
            res = list(self._gen(first, others, gamma))
            self.cache[key] = res
            return res
        return self._gen(first, others, gamma)

    def _gen(self, first, others, gamma):
        if not first:
            if not others and not gamma:
                yield ()
            return
        x = self.pick(first)
        rest = tuple(p for p in first if p != x)
        for xi in _subsets(gamma):
            g = tuple(y for y in gamma if y not in xi)
            head = tuple((x, y) for y in xi)
            for I in _subsets(range(len(others))):
                merged = rest + xi + tuple(p for i in I for p in others[i])
                left = tuple(o for i, o in enumerate(others) if i not in I)
                if not merged and (left or g):
                    continue
                fans = [[tuple((x, p) for p in s) for s in _nonempty(others[i])] for i in I]
                sub = self.run(merged, left, g)
                if not isinstance(sub, list):
                    # large: regenerate per fan choice
                    for combo in product(*fans):
                        h = head + tuple(chain.from_iterable(combo))
                        for s in self.run(merged, left, g):
                            yield h + s
                    continue
                for combo in product(*fans):
                    h = head + tuple(chain.from_iterable(combo))
                    for s in sub:
                        yield h + s


def forest_edge_sets(sizes, n, base="lowest"):
    """Raw edge tuples (unsorted) of every admissible forest, label level."""
    sizes = tuple(sizes)
    if any(s < 0 for s in sizes) or n < 0:
        raise DomainError("sizes and n must be non-negative")
    clusters, gamma = _labels(sizes, n)
    if len(sizes) > 1 and any(s == 0 for s in sizes):
        return iter(())
    en = _Enumerator(base)
    return iter(en.run(clusters[0], clusters[1:], gamma))


def count_forests(sizes, n, cap=None) -> int:
    """Number of forests found by exhaustive enumeration."""
    if cap is not None and sum(sizes) + n > cap:
        raise ResourceCapError(f"vertex count {sum(sizes) + n} exceeds vertex cap {cap}")
    return sum(1 for _ in forest_edge_sets(sizes, n))


def canonical(edges):
    return tuple(sorted((a, b) if a < b else (b, a) for a, b in edges))


def _sizes_of(family, gamma):
    sizes = family.sizes if hasattr(family, "sizes") else tuple(family)
    n = gamma if isinstance(gamma, int) else len(gamma)
    return tuple(sizes), n


def enumerate_forests(family, gamma, cap=VERTEX_CAP, base="lowest"):
    """Stream of ForestGraph for a cluster family (or size tuple) and gamma."""
    sizes, n = _sizes_of(family, gamma)
    if sum(sizes) + n > cap:
        raise ResourceCapError(f"vertex count {sum(sizes) + n} exceeds vertex cap {cap}")
    reg = make_registry(sizes, n)
    owner = _owners(sizes, n)
    for edges in forest_edge_sets(sizes, n, base):
        e = canonical(edges)
        yield ForestGraph(reg, e, _roots(e, owner, len(reg)))


# ---------------------------------------------------------------- admissibility

def _owners(sizes, n):
    return [i for i, s in enumerate(sizes) for _ in range(s)] + [-1] * n


def _components(edges, V):
    adj = defaultdict(list)
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * V
    comps = []
    for v in range(V):
        if seen[v]:
            continue
        stack, comp = [v], []
        seen[v] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps, adj


def _roots(edges, owner, V):
    """Root of each tree: its point in the cluster nearest to eta_1."""
    m = max(owner) + 1
    comps, _ = _components(edges, V)
    node = [o if o >= 0 else m + v for v, o in enumerate(owner)]
    cadj = defaultdict(set)
    for a, b in edges:
        cadj[node[a]].add(node[b])
        cadj[node[b]].add(node[a])
    depth, stack = {0: 0}, [0]
    while stack:
        u = stack.pop()
        for w in cadj[u]:
            if w not in depth:
                depth[w] = depth[u] + 1
                stack.append(w)
    roots = []
    for comp in comps:
        cl = [owner[v] for v in comp if owner[v] >= 0]
        if cl:
            low = min(cl, key=lambda c: (depth.get(c, V), c))
            roots.append(min(v for v in comp if owner[v] == low))
    return tuple(sorted(roots))


def admissibility_report(edges, sizes, n, reading="collapsed"):
    """None if admissible, otherwise the name of the first violated clause.

    ``reading`` selects how the definition is read.  "collapsed" (default)
    roots each tree in the cluster nearest to eta_1 and applies the path
    condition against every edge of the forest.  "global" roots each tree
    in its lowest cluster index instead; "tree" does that and also applies
    the path condition only inside the current tree.  Only the default
    agrees with the recursion and with the counting formula.
    """
    sizes = tuple(sizes)
    V = sum(sizes) + n
    owner = _owners(sizes, n)
    m = len(sizes)
    seen = set()
    for a, b in edges:
        if not (0 <= a < V and 0 <= b < V):
            raise StructuralError(f"edge ({a}, {b}) uses an unregistered vertex")
        if a == b:
            return "acyclic: self loop"
        key = (min(a, b), max(a, b))
        if key in seen:
            return "acyclic: repeated edge"
        seen.add(key)
        if owner[a] >= 0 and owner[a] == owner[b]:
            return f"intra-cluster edge ({a}, {b})"
    # acyclic
    parent = list(range(V))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return "acyclic: cycle"
        parent[ra] = rb
    comps, adj = _components(edges, V)
    comp_of = {}
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    # collapse: clusters become single nodes, external points stay
    node = [owner[v] if owner[v] >= 0 else m + (v - sum(sizes)) for v in range(V)]
    cedges = {(min(node[a], node[b]), max(node[a], node[b])) for a, b in edges}
    N = m + n
    collapse_error = None
    depth = None
    if len(cedges) != N - 1:
        collapse_error = "collapse: reduced graph is not a tree"
    else:
        cadj = defaultdict(list)
        for a, b in cedges:
            cadj[a].append(b)
            cadj[b].append(a)
        depth = {0: 0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in cadj[u]:
                if w not in depth:
                    depth[w] = depth[u] + 1
                    stack.append(w)
        if len(depth) != N:
            collapse_error = "collapse: reduced graph is not connected"
    if reading == "collapsed" and collapse_error:
        return collapse_error
    roots = []
    for comp in comps:
        cl = [owner[v] for v in comp if owner[v] >= 0]
        if not cl:
            return f"tree {comp} has no cluster point"
        if reading == "collapsed":
            low = min(set(node[v] for v in comp), key=lambda c: depth[c])
            if low >= m:
                return f"root: tree {comp} is entered through an external point"
        else:
            low = min(cl)
        pts = [v for v in comp if owner[v] == low]
        if len(pts) != 1:
            return f"root: tree {comp} has {len(pts)} points of cluster {low}"
        roots.append(pts[0])
    # cluster-to-cluster adjacency, optionally per tree
    touching = defaultdict(set)  # (tree or None, i, j) -> points of eta_i adjacent to eta_j
    for a, b in edges:
        for u, v in ((a, b), (b, a)):
            if owner[u] >= 0 and owner[v] >= 0:
                scope = comp_of[u] if reading == "tree" else None
                touching[(scope, owner[u], owner[v])].add(u)
    for root in roots:
        stack, prev = [root], {root: None}
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v == prev[u]:
                    continue
                prev[v] = u
                stack.append(v)
                if owner[u] < 0:
                    continue
                if owner[v] >= 0:
                    scope = comp_of[u] if reading == "tree" else None
                    if touching[(scope, owner[u], owner[v])] != {u}:
                        return f"path: {u} is not the only point of cluster {owner[u]} joined to cluster {owner[v]}"
                else:
                    if sum(1 for w in adj[v] if owner[w] == owner[u]) != 1:
                        return f"path: external {v} has several neighbours in cluster {owner[u]}"
    return collapse_error


def is_admissible(f: ForestGraph, family=None, gamma=None, reading="collapsed"):
    """(ok, report) for a ForestGraph; sizes come from its registry."""
    reg = f.registry
    if family is not None:
        sizes, n = _sizes_of(family, gamma if gamma is not None else 0)
        if reg != make_registry(sizes, n):
            raise StructuralError("vertex registry does not match the cluster family and gamma")
    else:
        m = max((v.cluster for v in reg if v.cluster is not None), default=-1) + 1
        sizes = tuple(sum(1 for v in reg if v.cluster == i) for i in range(m))
        n = sum(1 for v in reg if v.cluster is None)
    report = admissibility_report(f.edges, sizes, n, reading)
    return report is None, report


def brute_force_forests(sizes, n, reading="collapsed"):
    """All admissible edge sets, found by filtering every acyclic subgraph."""
    sizes = tuple(sizes)
    V = sum(sizes) + n
    owner = _owners(sizes, n)
    allowed = [(a, b) for a, b in combinations(range(V), 2) if owner[a] < 0 or owner[a] != owner[b]]
    out = []
    for k in range(V):
        for edges in combinations(allowed, k):
            if admissibility_report(edges, sizes, n, reading) is None:
                out.append(edges)
    return out


# ---------------------------------------------------------------- contributions

def _coords(family, gamma):
    pts = [p for c in family.clusters for p in c.points] + list(gamma.points if hasattr(gamma, "points") else gamma)
    return np.array(pts, dtype=float).reshape(len(pts), -1)


def contribution_G_nu(f: ForestGraph, family, gamma, h, nu) -> float:
    """h^(l+n) times the product of nu over the forest's edges."""
    P = _coords(family, gamma)
    val = float(h) ** len(P)
    for a, b in f.edges:
        val *= float(nu(P[a] - P[b]))
    return val


def sum_contributions(family, gamma, h, nu, cap=VERTEX_CAP) -> float:
    P = _coords(family, gamma)
    sizes, n = _sizes_of(family, gamma)
    if sum(sizes) + n > cap:
        raise ResourceCapError(f"vertex count {sum(sizes) + n} exceeds vertex cap {cap}")
    V = len(P)
    nu_m = np.zeros((V, V))
    for a, b in combinations(range(V), 2):
        nu_m[a, b] = nu_m[b, a] = float(nu(P[a] - P[b]))
    total = 0.0
    for edges in forest_edge_sets(sizes, n):
        total += prod(nu_m[a, b] for a, b in edges)
    return float(h) ** V * total


def gamma_degrees_at_least_two(edges, sizes, n) -> bool:
    start = sum(sizes)
    deg = [0] * n
    for a, b in edges:
        for v in (a, b):
            if v >= start:
                deg[v - start] += 1
    return all(x >= 2 for x in deg)


def expected_count(sizes, n) -> int:
    return forest_count_formula(sizes, n)
