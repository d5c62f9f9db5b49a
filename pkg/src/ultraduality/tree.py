"""Finite rooted trees whose leaves form an ultrametric boundary.

Leaves are the boundary points.  An ultrametric element assigns a positive
radius to every interior vertex, strictly decreasing away from the root, and
induces the metric ``d(xi, eta) = phi(xi ^ eta)`` on the leaves.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import gmpy2

from ._rational import ONE, Q, ZERO, as_rational, format_rational


class TreeError(ValueError):
    """Raised for malformed tree descriptions."""


class UltrametricError(ValueError):
    """Raised when a distance matrix is not an ultrametric.

    ``triple`` holds the offending point labels when the ultrametric
    inequality fails.
    """

    def __init__(self, message: str, triple: tuple | None = None):
        super().__init__(message)
        self.triple = triple


@dataclass(frozen=True, eq=False)
class Tree:
    """Immutable rooted tree on the vertex ids ``0 .. n-1``.

    Use :func:`build_tree` (or :meth:`from_children`) rather than the raw
    constructor; it runs the structural checks.
    """

    root: int
    parent: tuple  # parent[v], None at the root
    children: tuple  # children[v] as a tuple, input order kept
    allow_degree_one: bool = False

    @classmethod
    def from_children(cls, root: int, children: Mapping[int, Sequence[int]],
                      allow_degree_one: bool = False) -> "Tree":
        return build_tree({"root": root, "children": children},
                          allow_degree_one=allow_degree_one)

    @property
    def n_vertices(self) -> int:
        return len(self.parent)

    @cached_property
    def leaves(self) -> tuple:
        return tuple(v for v in self.bfs_order if not self.children[v])

    @cached_property
    def interior(self) -> tuple:
        return tuple(v for v in self.bfs_order if self.children[v])

    @cached_property
    def bfs_order(self) -> tuple:
        order = [self.root]
        for v in order:
            order.extend(self.children[v])
        return tuple(order)

    @cached_property
    def depth(self) -> tuple:
        d = [0] * self.n_vertices
        for v in self.bfs_order[1:]:
            d[v] = d[self.parent[v]] + 1
        return tuple(d)

    @cached_property
    def edges(self) -> tuple:
        """Edges ``(x-, x)`` in BFS order of the lower endpoint."""
        return tuple((self.parent[v], v) for v in self.bfs_order[1:])

    @cached_property
    def leaf_index(self) -> dict:
        return {leaf: i for i, leaf in enumerate(self.leaves)}

    @cached_property
    def leaves_below(self) -> tuple:
        """``leaves_below[v]``: the leaves of the branch ``T_v`` in leaf order."""
        below: list = [None] * self.n_vertices
        for v in reversed(self.bfs_order):
            if self.children[v]:
                below[v] = tuple(itertools.chain.from_iterable(
                    below[c] for c in self.children[v]))
            else:
                below[v] = (v,)
        # keep the global leaf order inside every branch
        idx = self.leaf_index
        return tuple(tuple(sorted(b, key=idx.__getitem__)) for b in below)

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def neighbours(self, v: int) -> tuple:
        p = self.parent[v]
        return self.children[v] if p is None else (p,) + self.children[v]

    def path_to_root(self, v: int) -> list:
        path = [v]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path

    def lca(self, u: int, v: int) -> int:
        """Lowest common ancestor with respect to the root."""
        du, dv = self.depth[u], self.depth[v]
        while du > dv:
            u, du = self.parent[u], du - 1
        while dv > du:
            v, dv = self.parent[v], dv - 1
        while u != v:
            u, v = self.parent[u], self.parent[v]
        return u

    def geodesic(self, u: int, v: int) -> list:
        """The vertex sequence of the geodesic ``pi(u, v)``."""
        w = self.lca(u, v)
        up = []
        while u != w:
            up.append(u)
            u = self.parent[u]
        down = []
        while v != w:
            down.append(v)
            v = self.parent[v]
        return up + [w] + down[::-1]

    def is_descendant(self, v: int, ancestor: int) -> bool:
        """True when ``v`` lies in the branch ``T_ancestor``."""
        dv, da = self.depth[v], self.depth[ancestor]
        while dv > da:
            v, dv = self.parent[v], dv - 1
        return v == ancestor

    def _check_vertex(self, *vs: int) -> None:
        for v in vs:
            if not (isinstance(v, int) and 0 <= v < self.n_vertices):
                raise TreeError(f"unknown vertex {v!r}")

    def to_json(self) -> dict:
        return {"root": self.root,
                "children": {str(v): list(self.children[v])
                             for v in self.bfs_order if self.children[v]}}


def build_tree(description: Mapping, allow_degree_one: bool = False) -> Tree:
    """Validate a ``{"root": id, "children": {id: [ids]}}`` record.

    Vertex ids must be the contiguous integers ``0 .. n-1`` (keys may be
    strings, as in JSON).  Vertices absent from ``children`` are leaves.
    """
    try:
        root = int(description["root"])
        raw = description.get("children", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise TreeError(f"malformed tree description: {exc}") from None
    kids: dict = {}
    for key, lst in raw.items():
        try:
            v = int(key)
            kids[v] = tuple(int(c) for c in lst)
        except (TypeError, ValueError):
            raise TreeError(f"non-integer vertex id near {key!r}") from None
    ids = {root} | set(kids) | {c for cs in kids.values() for c in cs}
    n = len(ids)
    if ids != set(range(n)):
        raise TreeError("vertex ids must be the contiguous range 0..n-1")

    parent: list = [None] * n
    for v, cs in kids.items():
        if len(set(cs)) != len(cs):
            raise TreeError(f"vertex {v} lists a child twice")
        for c in cs:
            if c == root:
                raise TreeError(f"cycle detected: root {root} appears as a child of {v}")
            if parent[c] is not None:
                raise TreeError(f"vertex {c} has two parents ({parent[c]} and {v})")
            parent[c] = v
    orphans = [v for v in range(n) if v != root and parent[v] is None]
    if orphans:
        raise TreeError(f"multiple roots: {[root] + orphans}")

    children = tuple(kids.get(v, ()) for v in range(n))
    seen = {root}
    queue = deque([root])
    while queue:
        for c in children[queue.popleft()]:
            seen.add(c)
            queue.append(c)
    if len(seen) != n:
        raise TreeError(f"cycle detected among vertices {sorted(set(range(n)) - seen)}")

    if not children[root]:
        raise TreeError("the root must be an interior vertex")
    if not allow_degree_one:
        for v in range(n):
            if len(children[v]) == 1:
                raise TreeError(f"interior vertex {v} has a single child "
                                "(pass allow_degree_one to permit)")
    tree = Tree(root, tuple(parent), children, allow_degree_one)
    if len(tree.leaves) < 2:
        raise TreeError("a tree needs at least 2 leaves")
    return tree


def generate_regular_tree(branching: int, depth: int) -> Tree:
    """Complete tree with ``branching**depth`` leaves, ids in BFS order."""
    if branching < 2 or depth < 1:
        raise TreeError("need branching >= 2 and depth >= 1")
    children = {}
    level, nxt = [0], 1
    for _ in range(depth):
        new_level = []
        for v in level:
            children[v] = list(range(nxt, nxt + branching))
            new_level.extend(children[v])
            nxt += branching
        level = new_level
    return build_tree({"root": 0, "children": children})


def random_tree(rng: random.Random, max_vertices: int = 200,
                max_branching: int = 4) -> Tree:
    """Random tree with interior forward degrees in ``[2, max_branching]``.

    Grown by repeatedly splitting a uniformly chosen leaf; the vertex count
    stays at most ``max_vertices``.
    """
    if max_vertices < 3:
        raise TreeError("max_vertices must be at least 3")
    target = rng.randint(3, max_vertices)
    children: dict = {}
    leaves = [0]
    n = 1
    while True:
        k = rng.randint(2, max_branching)
        if n + k > target:
            if n + 2 > target:
                break
            k = target - n
        v = leaves.pop(rng.randrange(len(leaves)))
        children[v] = list(range(n, n + k))
        leaves.extend(children[v])
        n += k
    return relabel_bfs(build_tree({"root": 0, "children": children}))


def relabel_bfs(tree: Tree) -> Tree:
    """Renumber vertices in BFS order (root 0)."""
    new = {v: i for i, v in enumerate(tree.bfs_order)}
    return build_tree({"root": 0,
                       "children": {new[v]: [new[c] for c in tree.children[v]]
                                    for v in tree.bfs_order if tree.children[v]}},
                      allow_degree_one=tree.allow_degree_one)


def confluent(tree: Tree, u: int, v: int, base: int) -> int:
    """Last common vertex of the geodesics ``pi(base, u)`` and ``pi(base, v)``.

    In a tree this is the median of ``base``, ``u`` and ``v``: the deepest of
    the three pairwise root-LCAs.
    """
    tree._check_vertex(u, v, base)
    cands = (tree.lca(u, v), tree.lca(u, base), tree.lca(v, base))
    return max(cands, key=tree.depth.__getitem__)


@dataclass(frozen=True, eq=False)
class UltrametricElement(Mapping):
    """Positive radii on interior vertices, strictly decreasing downwards."""

    tree: Tree
    values: dict = field(repr=False)

    def __post_init__(self):
        vals = {}
        for v in self.tree.interior:
            if v not in self.values:
                raise ValueError(f"ultrametric element missing interior vertex {v}")
            r = self.values[v]
            vals[v] = float(r) if isinstance(r, float) else as_rational(r)
        if len({type(r) for r in vals.values()}) > 1:
            raise ValueError("ultrametric element mixes float and exact values")
        extra = set(self.values) - set(vals)
        if extra:
            raise ValueError(f"ultrametric element defined on non-interior vertices {sorted(extra)}")
        for v, r in vals.items():
            if r <= 0:
                raise ValueError(f"phi({v}) = {r} is not positive")
            p = self.tree.parent[v]
            if p is not None and not vals[v] < vals[p]:
                raise ValueError(f"phi is not decreasing on edge ({p}, {v}): "
                                 f"phi({v}) = {vals[v]} >= phi({p}) = {vals[p]}")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, v):
        return self.values[v]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    @property
    def exact(self) -> bool:
        return not isinstance(self.values[self.tree.root], float)

    @property
    def diameter(self) -> gmpy2.mpq:
        return self.values[self.tree.root]

    def value_set(self) -> list:
        """The distinct distances ``Lambda_phi`` in increasing order."""
        return sorted(set(self.values.values()))

    def scaled(self, c) -> "UltrametricElement":
        c = as_rational(c)
        return UltrametricElement(self.tree, {v: c * r for v, r in self.values.items()})

    def to_json(self) -> dict:
        if not self.exact:
            return {str(v): r for v, r in self.values.items()}
        return {str(v): format_rational(r) for v, r in self.values.items()}


@dataclass(frozen=True)
class UltrametricSpace:
    """Finite point set with a rational ultrametric distance matrix."""

    points: tuple
    dist: tuple  # tuple of row tuples of mpq

    def __init__(self, points: Sequence, dist: Sequence[Sequence]):
        pts = tuple(points)
        rows = tuple(tuple(as_rational(x) for x in row) for row in dist)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dist", rows)
        self._validate()

    def _validate(self) -> None:
        n = len(self.points)
        if n < 2:
            raise UltrametricError("an ultrametric space needs at least 2 points")
        if len(set(self.points)) != n:
            raise UltrametricError("point labels must be distinct")
        d = self.dist
        if len(d) != n or any(len(row) != n for row in d):
            raise UltrametricError(f"distance matrix must be {n}x{n}")
        for i in range(n):
            if d[i][i] != 0:
                raise UltrametricError(f"nonzero diagonal at {self.points[i]!r}")
            for j in range(i + 1, n):
                if d[i][j] != d[j][i]:
                    raise UltrametricError(
                        f"asymmetric distance between {self.points[i]!r} and {self.points[j]!r}")
                if d[i][j] < 0:
                    raise UltrametricError(
                        f"negative distance between {self.points[i]!r} and {self.points[j]!r}")
                if d[i][j] == 0:
                    raise UltrametricError(
                        f"duplicate points {self.points[i]!r} and {self.points[j]!r} (distance 0)")
        if not _reproduces(d):
            for i, j, k in itertools.combinations(range(n), 3):
                # every triangle must be isosceles with the two largest sides equal
                a, b, c = sorted((d[i][j], d[j][k], d[i][k]))
                if b != c:
                    trip = (self.points[i], self.points[j], self.points[k])
                    raise UltrametricError(
                        f"ultrametric inequality violated on triple {trip}", triple=trip)
            raise UltrametricError("distance matrix is not an ultrametric")


def _ball_tree(d) -> tuple:
    """Nested-ball decomposition of the index set of ``d``.

    Returns ``(children, radius, point_of_leaf)`` with vertex ids in BFS
    order.  Only meaningful when ``d`` is an ultrametric.
    """
    n = len(d)
    children: dict = {}
    radius: dict = {}
    point: dict = {}
    queue = deque([(0, list(range(n)))])
    nxt = 1
    while queue:
        v, members = queue.popleft()
        if len(members) == 1:
            point[v] = members[0]
            continue
        diam = max(d[i][j] for i in members for j in members)
        radius[v] = diam
        # the maximal proper sub-balls: classes of the relation d < diam
        groups: list = []
        for i in members:
            for g in groups:
                if d[g[0]][i] < diam:
                    g.append(i)
                    break
            else:
                groups.append([i])
        children[v] = []
        for g in groups:
            children[v].append(nxt)
            queue.append((nxt, g))
            nxt += 1
    return children, radius, point


def _reproduces(d) -> bool:
    """True iff the ball decomposition of ``d`` gives back ``d`` exactly,
    which holds precisely for ultrametrics."""
    children, radius, point = _ball_tree(d)
    n_vert = 1 + sum(len(c) for c in children.values())
    parent = [None] * n_vert
    for v, cs in children.items():
        if len(cs) < 2:
            return False
        for c in cs:
            parent[c] = v
            if c in radius and not radius[c] < radius[v]:
                return False
    depth = [0] * n_vert
    for v in range(1, n_vert):
        depth[v] = depth[parent[v]] + 1
    leaf_of = {i: v for v, i in point.items()}
    n = len(d)
    for i in range(n):
        for j in range(i + 1, n):
            u, v = leaf_of[i], leaf_of[j]
            while depth[u] > depth[v]:
                u = parent[u]
            while depth[v] > depth[u]:
                v = parent[v]
            while u != v:
                u, v = parent[u], parent[v]
            if radius[u] != d[i][j]:
                return False
    return True


def boundary_distance(tree: Tree, phi: UltrametricElement, xi: int, eta: int) -> gmpy2.mpq:
    """``d_phi(xi, eta) = phi(xi ^ eta)`` for distinct leaves, 0 on the diagonal."""
    tree._check_vertex(xi, eta)
    if not (tree.is_leaf(xi) and tree.is_leaf(eta)):
        raise TreeError(f"boundary_distance needs leaves, got {xi}, {eta}")
    if xi == eta:
        return Q(0)
    return phi[tree.lca(xi, eta)]


def boundary_metric(tree: Tree, phi: UltrametricElement) -> list:
    """Full leaf-by-leaf distance matrix in ``tree.leaves`` order."""
    return [[boundary_distance(tree, phi, x, y) for y in tree.leaves] for x in tree.leaves]


def ball(tree: Tree, phi: UltrametricElement, xi: int, r) -> int:
    """Vertex ``x`` on ``pi(root, xi)`` whose leaves form the closed ball ``B(xi, r)``.

    That is the vertex with ``phi(x) <= r < phi(x-)``; when ``r`` is below
    ``phi(parent(xi))`` the ball is the single point and ``xi`` is returned.
    """
    if not isinstance(r, float):
        r = as_rational(r)
    if not r > 0:
        raise ValueError("ball radius must be positive")
    if not tree.is_leaf(xi):
        raise TreeError(f"ball centre {xi} is not a leaf")
    x = xi
    p = tree.parent[x]
    while p is not None and phi[p] <= r:
        x, p = p, tree.parent[p]
    return x


def tree_from_ultrametric(space: UltrametricSpace) -> tuple:
    """Build the tree of closed balls of a finite ultrametric space.

    Returns ``(tree, phi, labels)`` where ``labels`` maps each leaf vertex to
    its point label.  Interior vertices are the balls with at least two
    points, ``phi`` is the ball diameter; ids are assigned in BFS order.
    """
    children, radius, point = _ball_tree(space.dist)
    tree = build_tree({"root": 0, "children": children})
    labels = {v: space.points[i] for v, i in point.items()}
    return tree, UltrametricElement(tree, radius), labels


def canonical_form(tree: Tree, phi: UltrametricElement | None = None,
                   labels: Mapping | None = None, v: int | None = None):
    """Hashable isomorphism invariant of the rooted (labelled) tree.

    Two trees have equal canonical forms iff they are isomorphic as rooted
    trees, with equal ``phi`` values and equal leaf labels when given.
    """
    if v is None:
        v = tree.root
    if tree.is_leaf(v):
        return ("leaf", None if labels is None else labels[v])
    kids = sorted((canonical_form(tree, phi, labels, c) for c in tree.children[v]), key=repr)
    return (None if phi is None else phi[v], tuple(kids))


def validate_measure(tree: Tree, weights: Mapping) -> dict:
    """Check a fully supported probability measure on the leaves.

    Returns ``{leaf: mass}`` in leaf order with exact values.
    """
    out = {}
    for key, val in weights.items():
        v = int(key)
        if not (0 <= v < tree.n_vertices) or not tree.is_leaf(v):
            raise ValueError(f"measure has mass on non-leaf {key!r}")
        out[v] = as_rational(val)
    missing = [l for l in tree.leaves if l not in out]
    if missing:
        raise ValueError(f"measure missing leaves {missing}")
    for l in tree.leaves:
        if out[l] <= 0:
            raise ValueError(f"measure must be fully supported; mass {out[l]} at leaf {l}")
    total = sum(out.values(), ZERO)
    if total != ONE:
        raise ValueError(f"measure total is {format_rational(total)}, not 1")
    return {l: out[l] for l in tree.leaves}


def branch_masses(tree: Tree, mu: Mapping) -> list:
    """``mu(boundary of T_v)`` for every vertex ``v``."""
    mass = [None] * tree.n_vertices
    for v in reversed(tree.bfs_order):
        if tree.is_leaf(v):
            mass[v] = mu[v]
        else:
            mass[v] = sum((mass[c] for c in tree.children[v]), type(mu[tree.leaves[0]])(0))
    return mass
