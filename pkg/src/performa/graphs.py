"""Acyclic directed mixed graphs (ADMGs) and d-separation queries.

An ADMG carries directed edges ``a -> b`` and bidirected edges ``a <-> b``
over a fixed vertex set.  Separation queries are answered by replacing each
bidirected edge with a fresh latent common parent and running a standard
linear-time reachability ("Bayes-ball") pass on the resulting DAG; this is
equivalent to handling the bidirected edges natively but lets one routine
serve every query.

Vertices are opaque strings.  Insertion order is preserved everywhere so
that serialised output is reproducible.  All values are immutable after
construction and safe to query concurrently.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Admg",
    "SeparationQuery",
    "d_separated",
    "latent_project",
    "merge_vertices",
    "forecast_invariant",
    "graph_to_json",
    "graph_from_json",
]


@dataclass(frozen=True)
class Admg:
    """Mixed graph with directed and bidirected edges and no directed cycle.

    Parameters
    ----------
    vertices : sequence of str
        Vertex names in insertion order; duplicates are rejected.
    directed : iterable of (tail, head) pairs
    bidirected : iterable of unordered pairs

    Raises
    ------
    ValueError
        On unknown endpoints, self-loops, or a directed cycle.
    """

    vertices: tuple
    directed: tuple
    bidirected: tuple

    def __init__(self, vertices, directed=(), bidirected=()):
        vertices = tuple(vertices)
        if len(set(vertices)) != len(vertices):
            raise ValueError("duplicate vertex names")
        index = {v: i for i, v in enumerate(vertices)}

        def check(v):
            if v not in index:
                raise ValueError(f"unknown vertex {v!r}")
            return v

        dir_edges = set()
        for tail, head in directed:
            check(tail), check(head)
            if tail == head:
                raise ValueError(f"self-loop on {tail!r}")
            dir_edges.add((tail, head))
        bi_edges = set()
        for u, v in bidirected:
            check(u), check(v)
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            bi_edges.add((u, v) if index[u] < index[v] else (v, u))

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(
            self, "directed",
            tuple(sorted(dir_edges, key=lambda e: (index[e[0]], index[e[1]]))))
        object.__setattr__(
            self, "bidirected",
            tuple(sorted(bi_edges, key=lambda e: (index[e[0]], index[e[1]]))))
        self._assert_acyclic()

    def _assert_acyclic(self):
        indeg = {v: 0 for v in self.vertices}
        children = {v: [] for v in self.vertices}
        for tail, head in self.directed:
            indeg[head] += 1
            children[tail].append(head)
        queue = deque(v for v in self.vertices if indeg[v] == 0)
        seen = 0
        while queue:
            v = queue.popleft()
            seen += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if seen != len(self.vertices):
            raise ValueError("directed part contains a cycle")

    def parents(self, v) -> tuple:
        return tuple(t for t, h in self.directed if h == v)

    def children(self, v) -> tuple:
        return tuple(h for t, h in self.directed if t == v)

    def has_vertex(self, v) -> bool:
        return v in set(self.vertices)


@dataclass(frozen=True)
class SeparationQuery:
    """Query ``set_a independent of set_b given conditioning``.

    The three sets must be pairwise disjoint; membership in the graph is
    checked by :func:`d_separated`.
    """

    set_a: frozenset
    set_b: frozenset
    conditioning: frozenset

    def __init__(self, set_a, set_b, conditioning=()):
        set_a, set_b, cond = frozenset(set_a), frozenset(set_b), frozenset(conditioning)
        if not set_a or not set_b:
            raise ValueError("query sets must be nonempty")
        if set_a & set_b or set_a & cond or set_b & cond:
            raise ValueError("query sets must be pairwise disjoint")
        object.__setattr__(self, "set_a", set_a)
        object.__setattr__(self, "set_b", set_b)
        object.__setattr__(self, "conditioning", cond)


def _augment_latents(g: Admg):
    """Return (vertices, parents-map) of the DAG with one fresh latent parent
    per bidirected edge."""
    parents = {v: list(g.parents(v)) for v in g.vertices}
    vertices = list(g.vertices)
    taken = set(vertices)
    for i, (u, v) in enumerate(g.bidirected):
        name = f"__latent_{i}"
        while name in taken:
            name = "_" + name
        taken.add(name)
        vertices.append(name)
        parents[name] = []
        parents[u].append(name)
        parents[v].append(name)
    return vertices, parents


def d_separated(g: Admg, query: SeparationQuery) -> bool:
    """Decide whether ``query.set_a`` and ``query.set_b`` are d-separated
    given ``query.conditioning`` in ``g``.

    A path is blocked when some non-collider on it is conditioned on, or when
    some collider on it is not an ancestor of the conditioning set.  The
    implementation walks the latent-augmented DAG with the usual two-state
    (from-child / from-parent) reachability rules, which is linear in the
    size of the graph.
    """
    known = set(g.vertices)
    for v in query.set_a | query.set_b | query.conditioning:
        if v not in known:
            raise ValueError(f"unknown vertex {v!r}")

    vertices, parents = _augment_latents(g)
    children = {v: [] for v in vertices}
    for v, ps in parents.items():
        for p in ps:
            children[p].append(v)

    # Ancestors of the conditioning set (inclusive): colliders in this set
    # leave a path open.
    cond = set(query.conditioning)
    anc_cond = set(cond)
    stack = list(cond)
    while stack:
        v = stack.pop()
        for p in parents[v]:
            if p not in anc_cond:
                anc_cond.add(p)
                stack.append(p)

    UP, DOWN = 0, 1  # UP: arrived from a child (or a source), DOWN: from a parent
    frontier = deque((a, UP) for a in query.set_a)
    visited = set()
    reachable = set()
    while frontier:
        v, direction = frontier.popleft()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v not in cond:
            reachable.add(v)
            if v in query.set_b:
                return False
        if direction == UP and v not in cond:
            for p in parents[v]:
                frontier.append((p, UP))
            for c in children[v]:
                frontier.append((c, DOWN))
        elif direction == DOWN:
            if v not in cond:
                for c in children[v]:
                    frontier.append((c, DOWN))
            if v in anc_cond:
                for p in parents[v]:
                    frontier.append((p, UP))
    return True


def latent_project(g: Admg, keep: Iterable) -> Admg:
    """Project ``g`` onto the vertex set ``keep``.

    Kept vertices ``a``, ``b`` get a directed edge ``a -> b`` whenever some
    directed path from ``a`` to ``b`` runs through dropped vertices only, and
    a bidirected edge whenever a dropped vertex has directed dropped-interior
    paths into both.
    """
    keep_set = set(keep)
    if not keep_set:
        raise ValueError("keep set must be nonempty")
    for v in keep_set:
        if not g.has_vertex(v):
            raise ValueError(f"unknown vertex {v!r}")
    keep_order = tuple(v for v in g.vertices if v in keep_set)

    vertices, parents = _augment_latents(g)
    children = {v: [] for v in vertices}
    for v, ps in parents.items():
        for p in ps:
            children[p].append(v)
    dropped = [v for v in vertices if v not in keep_set]

    def kept_reach(start) -> set:
        # Kept vertices reachable from `start` along directed paths whose
        # interior vertices are all dropped.
        out = set()
        stack = list(children[start])
        seen = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            if v in keep_set:
                out.add(v)
            else:
                stack.extend(children[v])
        return out

    new_directed = set()
    for a in keep_order:
        for b in kept_reach(a):
            if b != a:
                new_directed.add((a, b))
    new_bidirected = set()
    for d in dropped:
        targets = sorted(kept_reach(d), key=keep_order.index)
        for i, u in enumerate(targets):
            for v in targets[i + 1:]:
                new_bidirected.add((u, v))
    return Admg(keep_order, new_directed, new_bidirected)


def merge_vertices(g: Admg, group: Iterable, new_name) -> Admg:
    """Collapse ``group`` into a single vertex named ``new_name``.

    The merged vertex inherits the union of incident edge types of the
    group's members; edges internal to the group are dropped.  A merge that
    would introduce a directed cycle is rejected.
    """
    group = set(group)
    if not group:
        raise ValueError("group must be nonempty")
    for v in group:
        if not g.has_vertex(v):
            raise ValueError(f"unknown vertex {v!r}")
    if new_name in set(g.vertices) - group:
        raise ValueError(f"vertex name {new_name!r} already in use")

    placed = False
    vertices = []
    for v in g.vertices:
        if v in group:
            if not placed:
                vertices.append(new_name)
                placed = True
        else:
            vertices.append(v)

    def rename(v):
        return new_name if v in group else v

    directed = set()
    for tail, head in g.directed:
        t, h = rename(tail), rename(head)
        if t != h:
            directed.add((t, h))
    bidirected = set()
    for u, v in g.bidirected:
        ru, rv = rename(u), rename(v)
        if ru != rv:
            bidirected.add((ru, rv))
    return Admg(vertices, directed, bidirected)


def forecast_invariant(g: Admg, forecast, target, conditioners=()) -> bool:
    """True when the target is separated from the forecast vertex given the
    conditioning set, i.e. when announcing any forecast cannot move the
    conditional target distribution."""
    return d_separated(g, SeparationQuery({target}, {forecast}, conditioners))


def graph_to_json(g: Admg) -> str:
    payload = {
        "vertices": list(g.vertices),
        "directed": [list(e) for e in g.directed],
        "bidirected": [list(e) for e in g.bidirected],
    }
    return json.dumps(payload, indent=2)


def graph_from_json(text: str) -> Admg:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid graph JSON: {exc}") from exc
    if not isinstance(payload, Mapping) or "vertices" not in payload:
        raise ValueError("graph JSON must be an object with a 'vertices' key")
    return Admg(
        payload["vertices"],
        [tuple(e) for e in payload.get("directed", [])],
        [tuple(e) for e in payload.get("bidirected", [])],
    )
