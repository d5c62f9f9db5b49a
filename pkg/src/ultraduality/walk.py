"""Nearest-neighbour random walks with absorbing leaves.

Everything here is exact.  Hitting probabilities ``F`` on edges come from two
linear-time sweeps over the tree; every other kernel is assembled from them:

    G(x, y) = F(x, y) G(y, y)
    G(x, x) = 1 / (1 - U(x, x)),   U(x, x) = sum_y p(x, y) F(y, x)
    F(x, y) = F(x, z) F(z, y)      for z on the geodesic pi(x, y)
"""

from __future__ import annotations

import random
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property

import gmpy2

from ._rational import ONE, Q, ZERO, as_rational, format_rational
from .tree import Tree, TreeError


class WalkError(ValueError):
    """Raised when transition probabilities do not define a valid walk."""


@dataclass(frozen=True, eq=False)
class Walk:
    """Validated transition probabilities ``p[(x, y)]`` for interior ``x``."""

    tree: Tree
    p: dict

    def row(self, x: int) -> dict:
        return {y: self.p[(x, y)] for y in self.tree.neighbours(x)} if not self.tree.is_leaf(x) else {}

    def apply(self, f) -> dict:
        """``(P f)(x)`` at interior vertices; ``f`` is indexable by vertex."""
        t = self.tree
        return {x: sum((self.p[(x, y)] * f[y] for y in t.neighbours(x)), ZERO)
                for x in t.interior}

    def to_json(self) -> dict:
        t = self.tree
        return {"p": {str(x): {str(y): format_rational(self.p[(x, y)]) for y in t.neighbours(x)}
                      for x in t.interior}}


def validate_walk(tree: Tree, p) -> Walk:
    """Check and freeze transition probabilities.

    ``p`` is either a mapping ``(x, y) -> prob`` or a nested mapping
    ``x -> {y: prob}`` (keys may be strings, as in JSON).
    """
    flat: dict = {}
    items = p.items()
    for key, val in items:
        if isinstance(key, tuple):
            flat[(int(key[0]), int(key[1]))] = val
        else:
            if not isinstance(val, Mapping):
                raise WalkError(f"row for vertex {key!r} is not a mapping")
            for y, pr in val.items():
                flat[(int(key), int(y))] = pr
    n = tree.n_vertices
    out: dict = {}
    for (x, y), val in flat.items():
        if not (0 <= x < n and 0 <= y < n):
            raise WalkError(f"probability on unknown vertices ({x}, {y})")
        if tree.is_leaf(x):
            raise WalkError(f"leaf {x} has outgoing probability to {y}; leaves are absorbing")
        if y not in tree.neighbours(x):
            raise WalkError(f"probability on non-edge ({x}, {y})")
        try:
            q = as_rational(val)
        except (TypeError, ValueError) as exc:
            raise WalkError(f"bad probability at ({x}, {y}): {exc}") from None
        if q <= 0:
            raise WalkError(f"non-positive probability {q} on edge ({x}, {y})")
        out[(x, y)] = q
    for x in tree.interior:
        total = ZERO
        for y in tree.neighbours(x):
            if (x, y) not in out:
                raise WalkError(f"missing probability on edge ({x}, {y})")
            total += out[(x, y)]
        if total != 1:
            raise WalkError(f"row sum at vertex {x} is {format_rational(total)}, not 1")
    return Walk(tree, out)


def simple_random_walk(tree: Tree) -> Walk:
    return validate_walk(tree, {(x, y): Q(1, len(tree.neighbours(x)))
                                for x in tree.interior for y in tree.neighbours(x)})


def random_walk(tree: Tree, rng: random.Random, max_weight: int = 9) -> Walk:
    """Random rational walk: integer edge weights in ``[1, max_weight]``, normalized per row."""
    p = {}
    for x in tree.interior:
        nb = tree.neighbours(x)
        w = [rng.randint(1, max_weight) for _ in nb]
        s = sum(w)
        for y, wy in zip(nb, w):
            p[(x, y)] = Q(wy, s)
    return validate_walk(tree, p)


def compute_F(walk: Walk) -> dict:
    """Hitting probabilities ``F(x, y)`` for every directed edge.

    Upward sweep (leaves to root) for ``F(x, x-)``, then a downward sweep for
    ``F(x-, x)``.  Both denominators are bounded below by a positive
    transition probability, so no division by zero can occur.
    """
    t, p = walk.tree, walk.p
    F: dict = {}
    for x in reversed(t.bfs_order[1:]):
        up = t.parent[x]
        if t.is_leaf(x):
            F[(x, up)] = ZERO
            continue
        s = sum((p[(x, y)] * F[(y, x)] for y in t.children[x]), ZERO)
        F[(x, up)] = p[(x, up)] / (1 - s)
    for x in t.bfs_order[1:]:
        up = t.parent[x]
        s = sum((p[(up, z)] * F[(z, up)] for z in t.neighbours(up) if z != x), ZERO)
        F[(up, x)] = p[(up, x)] / (1 - s)
    return F


@dataclass(frozen=True, eq=False)
class WalkKernels:
    """All kernels of a walk.  ``F`` and ``G`` are evaluated lazily on pairs."""

    walk: Walk
    F_edge: dict
    U: dict
    G_diag: dict
    m: dict
    a: dict

    @property
    def tree(self) -> Tree:
        return self.walk.tree

    def F(self, x: int, y: int) -> gmpy2.mpq:
        if x == y:
            return ONE
        path = self.tree.geodesic(x, y)
        out = ONE
        for u, v in zip(path, path[1:]):
            out *= self.F_edge[(u, v)]
            if not out:
                break
        return out

    def G(self, x: int, y: int) -> gmpy2.mpq:
        return self.F(x, y) * self.G_diag[y]

    @cached_property
    def F_from_root(self) -> list:
        """``F(root, v)`` for every vertex."""
        t = self.tree
        out = [None] * t.n_vertices
        out[t.root] = ONE
        for v in t.bfs_order[1:]:
            out[v] = out[t.parent[v]] * self.F_edge[(t.parent[v], v)]
        return out

    @cached_property
    def F_to_root(self) -> list:
        """``F(v, root)`` for every vertex."""
        t = self.tree
        out = [None] * t.n_vertices
        out[t.root] = ONE
        for v in t.bfs_order[1:]:
            out[v] = self.F_edge[(v, t.parent[v])] * out[t.parent[v]]
        return out

    def F_row(self, x: int) -> list:
        """``F(x, v)`` for every vertex ``v`` in one tree traversal."""
        t = self.tree
        out = [None] * t.n_vertices
        out[x] = ONE
        stack = [x]
        while stack:
            u = stack.pop()
            for v in t.neighbours(u):
                if out[v] is None:
                    out[v] = out[u] * self.F_edge[(u, v)]
                    stack.append(v)
        return out

    def F_column(self, y: int) -> list:
        """``F(v, y)`` for every vertex ``v``."""
        t = self.tree
        out = [None] * t.n_vertices
        out[y] = ONE
        stack = [y]
        while stack:
            u = stack.pop()
            for v in t.neighbours(u):
                if out[v] is None:
                    out[v] = self.F_edge[(v, u)] * out[u]
                    stack.append(v)
        return out

    def G_column(self, y: int) -> list:
        g = self.G_diag[y]
        return [f * g for f in self.F_column(y)]

    def nu(self, x: int) -> dict:
        """Limit distribution ``nu_x`` as ``{leaf: mass}``; ``nu_x({l}) = F(x, l)``."""
        row = self.F_row(x)
        return {l: row[l] for l in self.tree.leaves}

    def to_json(self) -> dict:
        t = self.tree
        fr = format_rational
        return {
            "F": {f"{x},{y}": fr(v) for (x, y), v in sorted(self.F_edge.items())},
            "U": {str(x): fr(v) for x, v in self.U.items()},
            "G_diag": {str(x): fr(v) for x, v in self.G_diag.items()},
            "G_root_column": {str(x): fr(v) for x, v in enumerate(self.G_column(t.root))},
            "m": {str(x): fr(v) for x, v in self.m.items()},
            "a": {f"{x},{y}": fr(v) for (x, y), v in self.a.items()},
            "nu_root": {str(l): fr(v) for l, v in self.nu(t.root).items()},
        }


def compute_UG(walk: Walk, F: dict) -> tuple:
    """Return ``(U, G_diag)``; leaves get ``U = 0`` and ``G = 1``."""
    t, p = walk.tree, walk.p
    U: dict = {}
    Gd: dict = {}
    for x in t.bfs_order:
        if t.is_leaf(x):
            U[x], Gd[x] = ZERO, ONE
            continue
        u = sum((p[(x, y)] * F[(y, x)] for y in t.neighbours(x)), ZERO)
        if u >= 1:
            raise AssertionError(f"return probability U({x},{x}) = {u} in an absorbing walk")
        U[x] = u
        Gd[x] = 1 / (1 - u)
    return U, Gd


def reversible_measure(walk: Walk) -> tuple:
    """Return ``(m, a)``: the reversible measure with ``m(root) = 1`` on
    interior vertices, and conductances ``a[(x-, x)] = m(x-) p(x-, x)``
    on every edge (for interior ``x`` this equals ``m(x) p(x, x-)``)."""
    t, p = walk.tree, walk.p
    m = {t.root: ONE}
    a = {}
    for up, x in t.edges:
        a[(up, x)] = m[up] * p[(up, x)]
        if not t.is_leaf(x):
            m[x] = a[(up, x)] / p[(x, up)]
    return m, a


def compute_kernels(walk: Walk) -> WalkKernels:
    F = compute_F(walk)
    U, Gd = compute_UG(walk, F)
    m, a = reversible_measure(walk)
    return WalkKernels(walk, F, U, Gd, m, a)


def limit_distribution(kernels: WalkKernels, x: int) -> dict:
    return kernels.nu(x)


def branch_mass_formula(kernels: WalkKernels, x: int, y: int) -> gmpy2.mpq:
    """``nu_x(T_y boundary)`` by the two-case closed formula in terms of edge F values."""
    t = kernels.tree
    if y == t.root:
        return ONE
    up = t.parent[y]
    Fyu = kernels.F_edge[(y, up)]
    Fuy = kernels.F_edge[(up, y)]
    denom = 1 - Fuy * Fyu
    if x != y and t.is_descendant(x, y):
        return 1 - kernels.F(x, y) * (Fyu - Fuy * Fyu) / denom
    return kernels.F(x, y) * (1 - Fyu) / denom


def poisson_transform(kernels: WalkKernels, u) -> list:
    """Harmonic extension ``h(x) = sum_l u(l) nu_x({l})`` as a list over vertices.

    Computed as ``h(x) = sum_l u(l) F(x, l)`` through the branch decomposition:
    ``h(x)`` collects the leaves below ``x`` directly and everything else via
    ``F(x, x-)``.
    """
    t = kernels.tree
    Fe = kernels.F_edge
    u = {l: as_rational(u[l]) for l in t.leaves}
    # down[x] = sum over leaves l below x of u(l) F(x, l)
    down = [None] * t.n_vertices
    for x in reversed(t.bfs_order):
        if t.is_leaf(x):
            down[x] = u[x]
        else:
            down[x] = sum((Fe[(x, c)] * down[c] for c in t.children[x]), ZERO)
    # reaching the outside of T_x requires passing x-; from x- the leaves
    # outside T_x contribute h(x-) - F(x-, x) down[x]
    h = [None] * t.n_vertices
    h[t.root] = down[t.root]
    for x in t.bfs_order[1:]:
        if t.is_leaf(x):
            h[x] = u[x]
            continue
        up = t.parent[x]
        outside = h[up] - Fe[(up, x)] * down[x]
        h[x] = down[x] + Fe[(x, up)] * outside
    return h


def dirichlet_form_tree(f, g, a: Mapping) -> gmpy2.mpq:
    """Edge sum ``sum (f(x)-f(x-)) (g(x)-g(x-)) a(x-, x)``."""
    return sum(((f[x] - f[up]) * (g[x] - g[up]) * c for (up, x), c in a.items()), ZERO)


def green_function_column(kernels: WalkKernels, x0: int) -> list:
    """``g(x) = G(x, x0)`` for an interior ``x0``."""
    if kernels.tree.is_leaf(x0):
        raise TreeError(f"Green column at leaf {x0} is degenerate")
    return kernels.G_column(x0)


# ---------------------------------------------------------------------------
# identity report


@dataclass
class Check:
    identity: str
    location: tuple
    lhs: object
    rhs: object

    @property
    def passed(self) -> bool:
        return self.lhs == self.rhs

    def to_json(self) -> dict:
        def fmt(v):
            return format_rational(v) if not isinstance(v, float) else v
        return {"identity": self.identity, "location": list(self.location),
                "lhs": fmt(self.lhs), "rhs": fmt(self.rhs), "pass": self.passed}


def check_kernel_identities(kernels: WalkKernels) -> list:
    """Exact check of the hitting/Green identities on every vertex and edge.

    Returns a list of :class:`Check` records, one per identity instance.
    """
    t = kernels.tree
    p = kernels.walk.p
    Fe = kernels.F_edge
    Gd = kernels.G_diag
    U = kernels.U
    m = kernels.m
    out: list = []
    root = t.root
    g_root = kernels.G_column(root)
    f_root = kernels.F_column(root)

    for x in t.bfs_order:
        out.append(Check("FF", (x, x), kernels.F(x, x), ONE))
        if t.is_leaf(x):
            # absorption: no return, nothing reachable
            out.append(Check("FG", (x, root), kernels.G(x, root), ZERO))
            continue
        out.append(Check("GU", (x,), Gd[x], 1 / (1 - U[x])))
        out.append(Check("UF", (x,), U[x],
                         sum((p[(x, y)] * Fe[(y, x)] for y in t.neighbours(x)), ZERO)))
        out.append(Check("FG", (x, root), g_root[x], f_root[x] * Gd[root]))
        rhs = ONE
        for y in t.neighbours(x):
            ff = Fe[(x, y)] * Fe[(y, x)]
            rhs += ff / (1 - ff)
            out.append(Check("G-edge", (x, y), Gd[x] * p[(x, y)], Fe[(x, y)] / (1 - ff)))
        out.append(Check("G-sum", (x,), Gd[x], rhs))

    # F multiplicativity through the root, and along each root path
    for x in t.bfs_order[1:]:
        up = t.parent[x]
        out.append(Check("FF", (root, up, x), kernels.F_from_root[x],
                         kernels.F_from_root[up] * Fe[(up, x)]))
        if t.is_leaf(x):
            continue
        out.append(Check("F<1", (x, up), Fe[(x, up)] < 1, True))
        nu_branch = sum((kernels.F_from_root[l] for l in t.leaves_below[x]), ZERO)
        # downward F from the limit distribution at the root
        q = nu_branch / kernels.F_from_root[up]
        out.append(Check("F-down", (up, x), Fe[(up, x)],
                         q / (1 - Fe[(x, up)] + Fe[(x, up)] * q)))
        # nu_x(branch at x) = 1 - p(x, x-) (G(x, x) - G(x-, x))
        nu_x = kernels.nu(x)
        lhs = sum((nu_x[l] for l in t.leaves_below[x]), ZERO)
        out.append(Check("nu_branch", (x,), lhs,
                         1 - p[(x, up)] * (Gd[x] - kernels.G(up, x))))
        out.append(Check("nu_formula", (x, x), lhs, branch_mass_formula(kernels, x, x)))

    # m-reversibility of G over all interior pairs
    interior = t.interior
    cols = {y: kernels.G_column(y) for y in interior}
    for i, x in enumerate(interior):
        for y in interior[i + 1:]:
            out.append(Check("reversible", (x, y), m[x] * cols[y][x], m[y] * cols[x][y]))
    return out


# ---------------------------------------------------------------------------
# independent dense oracle


def _solve_dense(A: list, B: list) -> list:
    """Gauss-Jordan solve ``A X = B`` over the rationals; rows are lists.

    Zero entries are skipped, so sparse systems stay cheap when their
    unknowns are ordered to limit fill-in.
    """
    n = len(A)
    A = [row[:] for row in A]
    B = [row[:] for row in B]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        A[col], A[piv] = A[piv], A[col]
        B[col], B[piv] = B[piv], B[col]
        inv = 1 / A[col][col]
        arow = [v * inv if v else v for v in A[col]]
        brow = [v * inv if v else v for v in B[col]]
        A[col], B[col] = arow, brow
        nz_a = [j for j, v in enumerate(arow) if v]
        nz_b = [j for j, v in enumerate(brow) if v]
        for r in range(n):
            f = A[r][col]
            if r == col or not f:
                continue
            ar, br = A[r], B[r]
            for j in nz_a:
                ar[j] -= f * arow[j]
            for j in nz_b:
                br[j] -= f * brow[j]
    return B


@dataclass(frozen=True, eq=False)
class OracleResult:
    interior: tuple
    leaves: tuple
    N: list  # fundamental matrix on interior x interior
    absorption: list  # interior x leaves

    @cached_property
    def _idx(self) -> dict:
        return {v: i for i, v in enumerate(self.interior)}

    @cached_property
    def _lidx(self) -> dict:
        return {v: i for i, v in enumerate(self.leaves)}

    def G(self, x, y) -> gmpy2.mpq:
        i = self._idx[x]
        if y in self._lidx:
            return self.absorption[i][self._lidx[y]]
        return self.N[i][self._idx[y]]

    def F(self, x, y) -> gmpy2.mpq:
        if x == y:
            return ONE
        if y in self._lidx:
            return self.G(x, y)
        return self.G(x, y) / self.G(y, y)


def dense_oracle(walk: Walk) -> OracleResult:
    """Fundamental matrix ``N = (I - Q)^-1`` and absorption matrix ``N R``.

    ``Q`` is the interior-to-interior block of the transition matrix and
    ``R`` the interior-to-leaf block.  Interior vertices are ordered deepest
    first, which keeps elimination on a tree free of fill-in.
    """
    t = walk.tree
    interior = tuple(sorted(t.interior, key=lambda v: -t.depth[v]))
    leaves = t.leaves
    idx = {v: i for i, v in enumerate(interior)}
    lidx = {v: i for i, v in enumerate(leaves)}
    k = len(interior)
    A = [[ZERO] * k for _ in range(k)]
    R = [[ZERO] * len(leaves) for _ in range(k)]
    for x in interior:
        A[idx[x]][idx[x]] = ONE
        for y in t.neighbours(x):
            if y in idx:
                A[idx[x]][idx[y]] -= walk.p[(x, y)]
            else:
                R[idx[x]][lidx[y]] = walk.p[(x, y)]
    eye = [[ONE if i == j else ZERO for j in range(k)] for i in range(k)]
    N = _solve_dense(A, eye)
    NR = _solve_dense(A, R)
    return OracleResult(interior, leaves, N, NR)


def first_step_hitting(walk: Walk, target: int) -> list:
    """``F(x, target)`` for all ``x`` from the first-step equations
    ``h(x) = sum_y p(x, y) h(y)``, ``h(target) = 1``, ``h(leaf) = 0``."""
    t = walk.tree
    unknowns = [v for v in t.interior if v != target]
    idx = {v: i for i, v in enumerate(unknowns)}
    k = len(unknowns)
    A = [[ZERO] * k for _ in range(k)]
    b = [[ZERO] for _ in range(k)]
    for x in unknowns:
        A[idx[x]][idx[x]] = ONE
        for y in t.neighbours(x):
            if y == target:
                b[idx[x]][0] += walk.p[(x, y)]
            elif y in idx:
                A[idx[x]][idx[y]] -= walk.p[(x, y)]
    sol = _solve_dense(A, b) if k else []
    h = [ZERO] * t.n_vertices
    h[target] = ONE
    for v, i in idx.items():
        h[v] = sol[i][0]
    return h
