"""Duality between walks on a tree and standard jump processes on its leaves.

``walk_to_process`` reads off ``phi = G(., root)`` and ``mu = nu_root``;
``process_to_walk`` rebuilds the unique walk (and scaling constant ``C``) from
``(phi, mu)``.  The ``check_*`` functions verify the boundary formulas for
the Dirichlet form of harmonic extensions exactly.
"""

from __future__ import annotations

import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import gmpy2

from ._rational import ONE, Q, ZERO, as_rational, format_rational
from .boundary import j_cumulative
from .tree import Tree, UltrametricElement, branch_masses, confluent, validate_measure
from .walk import (Check, Walk, WalkKernels, compute_kernels, dirichlet_form_tree,
                   poisson_transform, validate_walk)


class ReconstructionError(RuntimeError):
    """An internal postcondition of the walk reconstruction failed.

    The construction is forced at every step, so this signals a bug rather
    than bad input.
    """


@dataclass(frozen=True, eq=False)
class DualityResult:
    phi: UltrametricElement
    mu: dict
    direction: str = "walk-to-process"

    def to_json(self) -> dict:
        return {"direction": self.direction, "phi": self.phi.to_json(),
                "mu": {str(l): format_rational(v) for l, v in self.mu.items()}}


@dataclass(frozen=True, eq=False)
class ReconstructionTrace:
    C: gmpy2.mpq
    wtF: dict
    wtG_diag: dict
    walk: Walk
    checks: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"C": format_rational(self.C), "walk": self.walk.to_json()["p"]}


def walk_to_process(kernels: WalkKernels) -> DualityResult:
    """``phi(x) = G(x, root)`` on interior vertices and ``mu = nu_root``."""
    t = kernels.tree
    g = kernels.G_column(t.root)
    phi = UltrametricElement(t, {x: g[x] for x in t.interior})
    return DualityResult(phi, kernels.nu(t.root))


def process_to_walk(phi: UltrametricElement, mu: Mapping) -> ReconstructionTrace:
    """Reconstruct ``C`` and the walk whose boundary process is the standard
    ``(C * phi, mu)``-process with ``nu_root = mu``.

    Raises ``ValueError`` for invalid ``(phi, mu)`` and
    :class:`ReconstructionError` if a postcondition fails.
    """
    t = phi.tree
    if not phi.exact:
        raise ValueError("process_to_walk needs an exact ultrametric element")
    mu = validate_measure(t, mu)
    mass = branch_masses(t, mu)
    root = t.root
    checks: list = []

    wtF: dict = {}
    for x in t.bfs_order[1:]:
        up = t.parent[x]
        wtF[(x, up)] = ZERO if t.is_leaf(x) else phi[x] / phi[up]

    Fo = {root: ONE}  # would-be F(root, x)
    for x in t.bfs_order[1:]:
        up = t.parent[x]
        back = wtF[(x, up)]
        q = mass[x] / Fo[up]
        fwd = q / (1 - back + back * q)
        wtF[(up, x)] = fwd
        Fo[x] = Fo[up] * fwd
        checks.append(Check("re-mu", (x,), mass[x],
                            Fo[up] * fwd * (1 - back) / (1 - back * fwd)))
        checks.append(Check("re-mu-bound", (x,), mass[x] <= Fo[x] <= 1 and 0 < fwd <= 1, True))

    phi_o = phi[root]
    C = 1 / phi_o + sum(((phi[x] / phi_o) / (phi_o - phi[x]) * mass[x]
                         for x in t.children[root] if not t.is_leaf(x)), ZERO)

    wtG: dict = {}
    for x in t.interior:
        s = ONE
        for y in t.neighbours(x):
            ff = wtF[(x, y)] * wtF[(y, x)]
            s += ff / (1 - ff)
        wtG[x] = s
    checks.append(Check("C", (root,), C * phi_o, wtG[root]))

    p: dict = {}
    for x in t.interior:
        for y in t.neighbours(x):
            p[(x, y)] = wtF[(x, y)] / (1 - wtF[(x, y)] * wtF[(y, x)]) / wtG[x]
        checks.append(Check("stochastic", (x,),
                            sum((p[(x, y)] for y in t.neighbours(x)), ZERO), ONE))
    _raise_on_failure(checks, "reconstruction")

    walk = validate_walk(t, p)
    kernels = compute_kernels(walk)
    g_root = kernels.G_column(root)
    for x in t.interior:
        checks.append(Check("green-column", (x,), g_root[x], C * phi[x]))
    nu = kernels.nu(root)
    for l in t.leaves:
        checks.append(Check("limit-measure", (l,), nu[l], mu[l]))
    for e, v in wtF.items():
        checks.append(Check("hitting", e, kernels.F_edge[e], v))
    _raise_on_failure(checks, "reconstruction")
    return ReconstructionTrace(C, wtF, wtG, walk, checks)


def _raise_on_failure(checks: Sequence[Check], what: str) -> None:
    bad = [c for c in checks if not c.passed]
    if bad:
        c = bad[0]
        raise ReconstructionError(f"{what}: {c.identity} failed at {c.location}: "
                                  f"{c.lhs} != {c.rhs} ({len(bad)} failures)")


def green_equation_check(trace: ReconstructionTrace, x0: int) -> list:
    """``P g = g - 1_{x0}`` at interior vertices, for ``g = wtG(., x0)``."""
    t = trace.walk.tree
    g = [None] * t.n_vertices
    # wtG(x, x0) = wtF(x, x0) wtG(x0, x0), with wtF multiplicative on geodesics
    g[x0] = trace.wtG_diag[x0]
    stack = [x0]
    while stack:
        u = stack.pop()
        for v in t.neighbours(u):
            if g[v] is None:
                g[v] = trace.wtF[(v, u)] * g[u]
                stack.append(v)
    Pg = trace.walk.apply(g)
    return [Check("green-equation", (x0, x), Pg[x], g[x] - (1 if x == x0 else 0)) for x in t.interior]


# ---------------------------------------------------------------------------
# Naim kernel and the HD form


def naim_kernel(kernels: WalkKernels, base: int, xi: int, eta: int) -> gmpy2.mpq:
    """``m(base) / (G(base, base) F(base, c) F(c, base))`` with ``c = xi ^_base eta``."""
    t = kernels.tree
    if xi == eta:
        raise ValueError("the Naim kernel is infinite on the diagonal")
    if t.is_leaf(base):
        raise ValueError(f"base point {base} must be interior")
    c = confluent(t, xi, eta, base)
    return kernels.m[base] / (kernels.G_diag[base] * kernels.F(base, c) * kernels.F(c, base))


def naim_vertex_values(kernels: WalkKernels, base: int) -> list:
    """``theta[c] = m(base) / (G(base, base) F(base, c) F(c, base))`` for interior ``c``."""
    t = kernels.tree
    frow = kernels.F_row(base)
    fcol = kernels.F_column(base)
    top = kernels.m[base] / kernels.G_diag[base]
    return [top / (frow[c] * fcol[c]) if not t.is_leaf(c) else None
            for c in range(t.n_vertices)]


def naim_matrix(kernels: WalkKernels, base: int | None = None) -> dict:
    """``{(xi, eta): Theta_base(xi, eta)}`` over ordered off-diagonal leaf pairs."""
    t = kernels.tree
    base = t.root if base is None else base
    theta = naim_vertex_values(kernels, base)
    L = t.leaves
    out = {}
    for i, x in enumerate(L):
        for y in L[i + 1:]:
            out[(x, y)] = out[(y, x)] = theta[confluent(t, x, y, base)]
    return out


def hd_form(kernels: WalkKernels, u: Mapping, v: Mapping) -> gmpy2.mpq:
    """Tree Dirichlet form of the Poisson transforms of ``u`` and ``v``."""
    hu = poisson_transform(kernels, u)
    hv = poisson_transform(kernels, v)
    return dirichlet_form_tree(hu, hv, kernels.a)


def naim_double_sum(kernels: WalkKernels, u: Mapping, v: Mapping, base: int | None = None):
    """Half the ``Theta_base nu_base nu_base``-weighted double sum over leaf pairs."""
    from .boundary import boundary_dirichlet_form
    t = kernels.tree
    base = t.root if base is None else base
    return boundary_dirichlet_form(u, v, naim_matrix(kernels, base), kernels.nu(base))


# ---------------------------------------------------------------------------
# bulk verification


def hd_gram_matrix(kernels: WalkKernels) -> list:
    """``M[i][j] = hd_form(1_{l_i}, 1_{l_j})`` for leaves in tree order.

    Evaluated as ``H^T (L H)`` where ``L`` is the weighted tree Laplacian of
    the edge sum and ``H[x][j] = nu_x({l_j})``.  Zero rows of ``L H`` are
    skipped.
    """
    t = kernels.tree
    L = t.leaves
    k = len(L)
    n = t.n_vertices
    H = [[None] * k for _ in range(n)]
    for j, l in enumerate(L):
        col = kernels.F_column(l)
        for x in range(n):
            H[x][j] = col[x]
    LH = [[ZERO] * k for _ in range(n)]
    for (up, x), c in kernels.a.items():
        hx, hu = H[x], H[up]
        rx, ru = LH[x], LH[up]
        for j in range(k):
            d = c * (hx[j] - hu[j])
            if d:
                rx[j] += d
                ru[j] -= d
    M = [[ZERO] * k for _ in range(k)]
    for x in range(n):
        row = LH[x]
        if not any(row):
            continue
        hx = H[x]
        for i in range(k):
            if hx[i]:
                Mi = M[i]
                f = hx[i]
                for j in range(k):
                    Mi[j] += f * row[j]
    return M


def naim_gram_matrix(kernels: WalkKernels, base: int | None = None) -> list:
    """``M[i][j]`` of the ``Theta nu nu`` double sum on leaf indicators."""
    t = kernels.tree
    L = t.leaves
    theta = naim_matrix(kernels, base)
    nu = kernels.nu(t.root if base is None else base)
    k = len(L)
    M = [[ZERO] * k for _ in range(k)]
    for i, x in enumerate(L):
        for j, y in enumerate(L):
            if i != j:
                w = theta[(x, y)] * nu[x] * nu[y]
                M[i][j] -= w
                M[i][i] += w
    return M


def _branch_gram(tree: Tree, M: list) -> dict:
    """``{(w, z): S_w^T M S_z}`` for the branch indicators ``S_w``."""
    idx = tree.leaf_index
    k = len(tree.leaves)
    rows = [None] * tree.n_vertices
    for v in reversed(tree.bfs_order):
        if tree.is_leaf(v):
            rows[v] = list(M[idx[v]])
        else:
            acc = [ZERO] * k
            for c in tree.children[v]:
                rc = rows[c]
                for j in range(k):
                    acc[j] += rc[j]
            rows[v] = acc
    out = {}
    for w in range(tree.n_vertices):
        # column sums over leaves below z, built up the tree
        col = [None] * tree.n_vertices
        rw = rows[w]
        for z in reversed(tree.bfs_order):
            if tree.is_leaf(z):
                col[z] = rw[idx[z]]
            else:
                col[z] = sum((col[c] for c in tree.children[z]), ZERO)
        for z in range(tree.n_vertices):
            out[(w, z)] = col[z]
    return out


class _NaimAggregate:
    """The root-based Naim double sum evaluated through subtree sums.

    ``(1/2) sum_{i != j} w_ij (u_i - u_j)(v_i - v_j)`` with
    ``w_ij = Theta(c_ij) nu_i nu_j`` splits into a diagonal part
    ``sum_i u_i v_i nu_i R_i`` (``R_i = sum_{j != i} Theta(c_ij) nu_j``) and a
    cross part collected at each confluent from its children's sums.
    """

    def __init__(self, kernels: WalkKernels):
        t = self.tree = kernels.tree
        self.theta = naim_vertex_values(kernels, t.root)
        self.nu = kernels.nu(t.root)
        mass = [ZERO] * t.n_vertices
        for x in reversed(t.bfs_order):
            mass[x] = self.nu[x] if t.is_leaf(x) else sum((mass[c] for c in t.children[x]), ZERO)
        self.R = {}
        for l in t.leaves:
            r, a = ZERO, l
            while a != t.root:
                c = t.parent[a]
                r += self.theta[c] * (mass[c] - mass[a])
                a = c
            self.R[l] = r

    def _sums(self, u: Mapping) -> list:
        t = self.tree
        s = [None] * t.n_vertices
        for x in reversed(t.bfs_order):
            s[x] = (self.nu[x] * as_rational(u[x]) if t.is_leaf(x)
                    else sum((s[c] for c in t.children[x]), ZERO))
        return s

    def form(self, u: Mapping, v: Mapping, su: list | None = None, sv: list | None = None):
        """Pass precomputed ``_sums`` as ``su``/``sv`` when evaluating many pairs."""
        t = self.tree
        su = self._sums(u) if su is None else su
        sv = self._sums(v) if sv is None else sv
        # su[l] = nu_l u_l at leaves
        total = sum((su[l] * as_rational(v[l]) * self.R[l] for l in t.leaves), ZERO)
        for c in t.interior:
            cross = su[c] * sv[c]
            for a in t.children[c]:
                cross -= su[a] * sv[a]
            total -= self.theta[c] * cross
        return total


def random_boundary_functions(tree: Tree, rng: random.Random, count: int = 20,
                              max_num: int = 9, max_den: int = 7) -> list:
    """Random rational leaf functions ``{leaf: value}``."""
    return [{l: Q(rng.randint(-max_num, max_num), rng.randint(1, max_den)) for l in tree.leaves}
            for _ in range(count)]


@dataclass
class Report:
    name: str
    instances: int = 0
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def add(self, checks) -> None:
        for c in checks:
            self.checked += 1
            if not c.passed:
                self.failures.append(c.to_json())

    def merge(self, other: "Report") -> None:
        self.instances += other.instances
        self.checked += other.checked
        self.failures.extend(other.failures)

    def to_json(self) -> dict:
        return {"name": self.name, "instances": self.instances,
                "checked": self.checked, "failures": self.failures}


def check_doob_naim(kernels: WalkKernels, test_functions: Sequence[Mapping] = (),
                    pairwise: bool = False) -> Report:
    """Compare the HD form with the Naim double sum.

    Always covers every pair of branch indicators ``(1_{T_w}, 1_{T_z})`` and
    every pair of the supplied test functions.  With ``pairwise`` each pair
    is also evaluated directly (edge sum against double sum), which is slow
    on large trees.
    """
    t = kernels.tree
    rep = Report("doob-naim", instances=1)
    Mt = hd_gram_matrix(kernels)
    Mb = naim_gram_matrix(kernels)
    gt = _branch_gram(t, Mt)
    gb = _branch_gram(t, Mb)
    rep.add(Check("doob-naim/indicator", key, gt[key], gb[key]) for key in gt)
    # random functions: edge sums of Poisson transforms against the double
    # sum aggregated over confluents, O(n) per pair
    hs = [poisson_transform(kernels, f) for f in test_functions]
    naim = _NaimAggregate(kernels)
    sums = [naim._sums(f) for f in test_functions]
    for i, hu in enumerate(hs):
        for j in range(i, len(hs)):
            rep.add([Check("doob-naim/random", (i, j),
                           dirichlet_form_tree(hu, hs[j], kernels.a),
                           naim.form(test_functions[i], test_functions[j], sums[i], sums[j]))])
    if pairwise:
        funcs = [{l: ONE if l in set(t.leaves_below[w]) else ZERO for l in t.leaves}
                 for w in range(t.n_vertices)] + list(test_functions)
        for i, u in enumerate(funcs):
            for v in funcs[i:]:
                rep.add([Check("doob-naim/direct", (i,), hd_form(kernels, u, v),
                               naim_double_sum(kernels, u, v))])
    return rep


def check_j_equals_theta(kernels: WalkKernels) -> Report:
    """``J_{G(., root), nu_root}(xi, eta) == Theta_root(xi, eta)`` on all leaf pairs."""
    t = kernels.tree
    rep = Report("j-theta", instances=1)
    dual = walk_to_process(kernels)
    j = j_cumulative(t, dual.phi, dual.mu)
    theta = naim_vertex_values(kernels, t.root)
    L = t.leaves
    for x in L:
        for y in L:
            if x != y:
                c = t.lca(x, y)
                rep.add([Check("J=Theta", (x, y), j[c], theta[c])])
    return rep


def check_base_point_invariance(kernels: WalkKernels) -> Report:
    """``Theta_x nu_x nu_x`` agrees with ``Theta_root nu_root nu_root`` for
    every interior base ``x``; also the Martin kernel ratio ``nu_x / nu_root``."""
    t = kernels.tree
    rep = Report("invariance", instances=1)
    L = t.leaves
    root = t.root
    lca = {(x, y): t.lca(x, y) for i, x in enumerate(L) for y in L[i + 1:]}
    theta_o = naim_vertex_values(kernels, root)
    nu_o = kernels.nu(root)
    ref = {(x, y): theta_o[c] * nu_o[x] * nu_o[y] for (x, y), c in lca.items()}
    for base in t.interior:
        if base == root:
            continue
        theta = naim_vertex_values(kernels, base)
        nu = kernels.nu(base)
        anc = {l: t.lca(base, l) for l in L}
        depth = t.depth
        for (x, y), c in lca.items():
            # confluent w.r.t. base: deepest of the three root-LCAs
            cb = max((c, anc[x], anc[y]), key=depth.__getitem__)
            lhs = theta[cb] * nu[x] * nu[y]
            rep.checked += 1
            if lhs != ref[(x, y)]:
                rep.failures.append(Check("invariance", (base, x, y), lhs, ref[(x, y)]).to_json())
        # Martin kernel: nu_x(l) / nu_o(l) = G(x, x ^ l) / G(o, x ^ l)
        frow_b = kernels.F_row(base)
        f_root = kernels.F_from_root
        for l in L:
            w = anc[l]
            gd = kernels.G_diag[w]
            rep.add([Check("martin", (base, l), nu[l] / nu_o[l],
                           (frow_b[w] * gd) / (f_root[w] * gd))])
    return rep


def roundtrip(walk: Walk) -> Report:
    """walk -> (phi, mu) -> (C, walk') must give ``C = 1`` and ``walk' == walk``."""
    rep = Report("roundtrip", instances=1)
    k = compute_kernels(walk)
    dual = walk_to_process(k)
    trace = process_to_walk(dual.phi, dual.mu)
    rep.add([Check("C", (), trace.C, ONE)])
    rep.add(Check("p", e, trace.walk.p[e], walk.p[e]) for e in walk.p)
    return rep


def roundtrip_process(phi: UltrametricElement, mu: Mapping) -> Report:
    """(phi, mu) -> walk -> (phi', mu') must give ``phi' = C phi`` and ``mu' = mu``."""
    rep = Report("roundtrip-process", instances=1)
    trace = process_to_walk(phi, mu)
    dual = walk_to_process(compute_kernels(trace.walk))
    rep.add(Check("phi", (x,), dual.phi[x], trace.C * phi[x]) for x in phi)
    rep.add(Check("mu", (l,), dual.mu[l], as_rational(mu[l])) for l in dual.mu)
    return rep


def check_scaling(phi: UltrametricElement, mu: Mapping, c) -> Report:
    """Scaling ``phi`` by ``c`` divides ``C`` by ``c`` and leaves the walk unchanged."""
    c = as_rational(c)
    rep = Report("scaling", instances=1)
    a = process_to_walk(phi, mu)
    b = process_to_walk(phi.scaled(c), mu)
    rep.add([Check("C", (), b.C, a.C / c)])
    rep.add(Check("p", e, b.walk.p[e], a.walk.p[e]) for e in a.walk.p)
    return rep


def random_ultrametric_element(tree: Tree, rng: random.Random) -> UltrametricElement:
    """Random exact element: each child radius is a random fraction of its parent's."""
    phi = {tree.root: Q(rng.randint(1, 20), rng.randint(1, 5))}
    for x in tree.bfs_order[1:]:
        if not tree.is_leaf(x):
            phi[x] = phi[tree.parent[x]] * Q(rng.randint(1, 8), 9)
    return UltrametricElement(tree, phi)


def random_measure(tree: Tree, rng: random.Random, max_weight: int = 9) -> dict:
    w = {l: rng.randint(1, max_weight) for l in tree.leaves}
    s = sum(w.values())
    return {l: Q(v, s) for l, v in w.items()}
