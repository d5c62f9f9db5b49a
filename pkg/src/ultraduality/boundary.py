"""Isotropic jump processes on the leaf boundary of a tree.

A process is specified by an ultrametric element ``phi``, a fully supported
measure ``mu`` on the leaves and a radius distribution ``sigma``.  One step
draws a radius ``r ~ sigma`` and jumps to a ``mu``-random point of the closed
ball ``B(xi, r)``.  Because balls are branches of the tree, every operator is
a finite mixture of branch averages.
"""

from __future__ import annotations

import bisect
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import gmpy2
import numpy as np

from ._rational import ONE, ZERO, as_rational, format_rational
from .tree import Tree, UltrametricElement, ball, branch_masses, validate_measure


class SigmaError(ValueError):
    """Raised when a radius distribution is incompatible with ``phi``."""


def _is_exact(v) -> bool:
    return not isinstance(v, float)


@dataclass(frozen=True)
class SigmaMeasure:
    """Distribution of the jump radius, through its CDF ``F(r) = sigma([0, r))``.

    ``kind="standard"`` is the inverse exponential law with ``F(r) = exp(-1/r)``.
    ``kind="table"`` holds pairs ``(r_i, F(r_i))`` with increasing thresholds.
    The table is interpolated as a left-continuous step function: ``F`` equals
    the value of the first threshold ``>= r``, is ``0`` below ``r_1 / 2`` and
    ``1`` above the last threshold.  The corresponding measure has atoms at
    ``r_1 / 2`` and at each threshold.
    """

    kind: str = "standard"
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "standard":
            if self.table:
                raise SigmaError("the standard distribution takes no table")
            return
        if self.kind != "table":
            raise SigmaError(f"unknown sigma kind {self.kind!r}")
        rows = []
        for r, v in self.table:
            r = as_rational(r) if not isinstance(r, float) else r
            v = as_rational(v) if not isinstance(v, float) else v
            rows.append((r, v))
        rows.sort(key=lambda rv: rv[0])
        if not rows:
            raise SigmaError("empty sigma table")
        for (r0, v0), (r1, v1) in zip(rows, rows[1:]):
            if r0 == r1:
                raise SigmaError(f"duplicate threshold {r0} in sigma table")
            if v1 < v0:
                raise SigmaError(f"sigma CDF decreases between r={r0} and r={r1}")
        for r, v in rows:
            if r <= 0:
                raise SigmaError("sigma thresholds must be positive")
            if not (0 <= v <= 1):
                raise SigmaError(f"sigma CDF value {v} outside [0, 1]")
        object.__setattr__(self, "table", tuple(rows))

    @classmethod
    def standard(cls) -> "SigmaMeasure":
        return cls("standard")

    @classmethod
    def tabulated(cls, pairs: Sequence) -> "SigmaMeasure":
        return cls("table", tuple(pairs))

    @property
    def exact(self) -> bool:
        return self.kind == "table" and all(_is_exact(v) for _, v in self.table)

    def cdf(self, r):
        if self.kind == "standard":
            return math.exp(-1.0 / float(r))
        thresholds = [t for t, _ in self.table]
        i = bisect.bisect_left(thresholds, r)
        if i == len(thresholds):
            return ONE if self.exact else 1.0
        if i == 0 and r <= thresholds[0] / 2:
            return ZERO if self.exact else 0.0
        return self.table[i][1]

    def cdf_power(self, r, t):
        """``F(r)**t``: the CDF of ``sigma^t``.  Exact for integer ``t`` on an exact table."""
        v = self.cdf(r)
        if _is_exact(v) and _is_integral(t):
            return v ** int(t)
        return float(v) ** float(t)

    def atoms(self) -> list:
        """``(position, cumulative mass through position)`` for the table measure."""
        out = []
        prev_r, prev_v = None, ZERO
        for i, (r, v) in enumerate(self.table):
            pos = r / 2 if i == 0 else prev_r
            if v > prev_v or i == 0:
                out.append((pos, v))
            prev_r, prev_v = r, v
        out.append((prev_r, ONE))
        return out

    def sample_radius(self, u: float) -> float:
        """Inverse-CDF draw for ``u`` uniform in ``(0, 1)``."""
        if self.kind == "standard":
            return -1.0 / math.log(u)
        for pos, cum in self.atoms():
            if u < float(cum):
                return float(pos)
        return float(self.table[-1][0])

    def validate(self, phi: UltrametricElement, strict: bool = True) -> None:
        """Check the admissibility conditions against ``phi``.

        Always: ``F(phi(root)) < 1``.  With ``strict``: ``F`` positive at every
        interior radius and strictly increasing along every root-to-leaf path.
        """
        tree = phi.tree
        top = self.cdf(phi[tree.root])
        if not top < 1:
            raise SigmaError(f"F_sigma(phi(root)) = {_fmt(top)} must be < 1")
        if not strict or self.kind == "standard":
            # exp(-1/r) is positive and strictly increasing even where it underflows
            return
        for x in tree.interior:
            fx = self.cdf(phi[x])
            if not fx > 0:
                raise SigmaError(f"F_sigma(phi({x})) = {_fmt(fx)} must be > 0")
            up = tree.parent[x]
            if up is not None and not fx < self.cdf(phi[up]):
                raise SigmaError(
                    f"F_sigma not strictly increasing between phi({x}) and phi({up})")

    def to_json(self) -> dict:
        if self.kind == "standard":
            return {"kind": "standard"}
        return {"kind": "table", "cdf": [[_fmt(r), _fmt(v)] for r, v in self.table]}


def _is_integral(t) -> bool:
    if isinstance(t, float):
        return False
    return as_rational(t).denominator == 1


def _fmt(v):
    return format_rational(v) if _is_exact(v) else v


@dataclass(frozen=True, eq=False)
class JumpProcessSpec:
    """The data ``(phi, mu, sigma)`` of an isotropic jump process."""

    phi: UltrametricElement
    mu: dict
    sigma: SigmaMeasure
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mu", validate_measure(self.phi.tree, self.mu))
        self.sigma.validate(self.phi, strict=self.strict)

    @property
    def tree(self) -> Tree:
        return self.phi.tree

    def branch_averages(self, exact: bool) -> np.ndarray:
        key = "_avg_exact" if exact else "_avg_float"
        if key not in self.__dict__:
            object.__setattr__(self, key, branch_average_matrix(self.tree, self.mu, exact))
        return self.__dict__[key]


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Leaf-indexed matrix; ``dtype=object`` holds exact rationals."""

    leaves: tuple
    matrix: np.ndarray

    @property
    def exact(self) -> bool:
        return self.matrix.dtype == object

    def row(self, leaf: int) -> np.ndarray:
        return self.matrix[self.leaves.index(leaf)]

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def self_adjoint_defect(self, mu: Mapping):
        """``max |mu(xi) M[xi, eta] - mu(eta) M[eta, xi]|``."""
        w = np.array([mu[l] for l in self.leaves], dtype=self.matrix.dtype)
        D = w[:, None] * self.matrix
        return abs(D - D.T).max()

    def to_float(self) -> "BoundaryOperator":
        return BoundaryOperator(self.leaves, self.matrix.astype(float))

    def to_json(self) -> dict:
        rows = self.matrix.tolist()
        if self.exact:
            rows = [[format_rational(v) for v in row] for row in rows]
        return {"leaves": list(self.leaves), "matrix": rows}


def branch_average_matrix(tree: Tree, mu: Mapping, exact: bool = True) -> np.ndarray:
    """Row ``x``: ``mu`` conditioned on the leaves below ``x`` (vertex x leaf matrix)."""
    mass = branch_masses(tree, mu)
    idx = tree.leaf_index
    if exact:
        A = np.empty((tree.n_vertices, len(tree.leaves)), dtype=object)
        A[:] = ZERO
    else:
        A = np.zeros((tree.n_vertices, len(tree.leaves)))
    for x in range(tree.n_vertices):
        for l in tree.leaves_below[x]:
            A[x, idx[l]] = mu[l] / mass[x] if exact else float(mu[l]) / float(mass[x])
    return A


def averaging_operator(tree: Tree, phi: UltrametricElement, mu: Mapping, r) -> BoundaryOperator:
    """``P_r``: each row is ``mu`` conditioned on the ball ``B(xi, r)``."""
    mu = validate_measure(tree, mu)
    A = branch_average_matrix(tree, mu)
    rows = [A[ball(tree, phi, xi, r)] for xi in tree.leaves]
    return BoundaryOperator(tree.leaves, np.array(rows, dtype=object))


def semigroup_coefficients(spec: JumpProcessSpec, xi: int, t) -> list:
    """``[(vertex, weight)]`` along ``pi(root, xi)``; the weights sum to one.

    The root ball gets ``1 - F(phi(root))^t``, the ball at ``x_n`` gets
    ``F(phi(x_{n-1}))^t - F(phi(x_n))^t`` (radii in ``[phi(x_n), phi(x_{n-1}))``)
    and the singleton ``{xi}`` gets ``F(phi(parent(xi)))^t``.
    """
    tree, phi, sigma = spec.tree, spec.phi, spec.sigma
    path = tree.path_to_root(xi)[::-1]
    powers = [sigma.cdf_power(phi[x], t) for x in path[:-1]]
    out = [(path[0], 1 - powers[0])]
    for n in range(1, len(path) - 1):
        out.append((path[n], powers[n - 1] - powers[n]))
    out.append((xi, powers[-1]))
    return out


def semigroup_operator(spec: JumpProcessSpec, t, exact: bool = False) -> BoundaryOperator:
    """``P^t`` as a leaf-by-leaf matrix.

    ``exact=True`` needs a rational sigma table and an integer ``t``;
    otherwise the matrix is binary64.
    """
    tree = spec.tree
    if exact and not (spec.sigma.exact and spec.phi.exact and _is_integral(t)):
        raise ValueError("exact semigroup needs a rational sigma table, exact phi and integer t")
    if not exact and not isinstance(t, float):
        t = float(t)
    if not t > 0:
        raise ValueError("t must be positive")
    A = spec.branch_averages(exact)
    if exact:
        # rows are short mixtures; avoid a dense object-dtype product
        rows = [sum((c * A[x] for x, c in semigroup_coefficients(spec, xi, t)),
                    np.full(len(tree.leaves), ZERO, dtype=object))
                for xi in tree.leaves]
        return BoundaryOperator(tree.leaves, np.array(rows, dtype=object))
    C = np.zeros((len(tree.leaves), tree.n_vertices))
    for i, xi in enumerate(tree.leaves):
        for x, c in semigroup_coefficients(spec, xi, t):
            C[i, x] = float(c)
    return BoundaryOperator(tree.leaves, C @ A)


def standardize(phi: UltrametricElement, sigma: SigmaMeasure) -> UltrametricElement:
    """``phi_*(x) = -1 / log F_sigma(phi(x))``: the element under which the
    same process uses the standard radius law."""
    if sigma.kind == "standard":
        return phi
    sigma.validate(phi, strict=True)
    return UltrametricElement(phi.tree, {x: -1.0 / math.log(float(sigma.cdf(r)))
                                         for x, r in phi.items()})


def sigma_for_phi(phi_target: UltrametricElement, kernels) -> SigmaMeasure:
    """Radius law that turns the walk's boundary process into the
    ``(phi_target, nu_root, sigma)``-process.

    Requires ``phi_target`` to be a strictly increasing function of
    ``G(., root)`` on interior vertices: ``F(phi_target(x)) = exp(-1/G(x, root))``.
    """
    tree = kernels.tree
    if phi_target.tree is not tree and phi_target.tree.children != tree.children:
        raise SigmaError("phi_target lives on a different tree")
    g = kernels.G_column(tree.root)
    pairs = sorted(((phi_target[x], g[x], x) for x in tree.interior), key=lambda z: (z[0], z[1]))
    for (r0, g0, x0), (r1, g1, x1) in zip(pairs, pairs[1:]):
        if g0 == g1 and r0 != r1:
            raise SigmaError(f"equipotential violation: G({x0},root) = G({x1},root) "
                             f"but phi_target differs at vertices {x0}, {x1}")
        if r0 == r1 and g0 != g1:
            raise SigmaError(f"phi_target({x0}) = phi_target({x1}) but G({x0},root) != G({x1},root)")
        if r0 < r1 and not g0 < g1:
            raise SigmaError(f"phi_target ordering incompatible with G at vertices {x0}, {x1}")
    table = {}
    for r, gx, _ in pairs:
        table[r] = math.exp(-1.0 / float(gx))
    return SigmaMeasure.tabulated(sorted(table.items()))


# ---------------------------------------------------------------------------
# jump kernel, Dirichlet form and generator


def j_cumulative(tree: Tree, phi: UltrametricElement, mu: Mapping) -> list:
    """``J`` as a function of the confluent: ``J(xi, eta) = j[xi ^ eta]``.

    ``j[root] = 1/phi(root)`` and ``j[x] = j[x-] + (1/phi(x) - 1/phi(x-)) / mu(T_x)``.
    """
    mass = branch_masses(tree, mu)
    j = [None] * tree.n_vertices
    j[tree.root] = 1 / phi[tree.root]
    for x in tree.bfs_order[1:]:
        if tree.is_leaf(x):
            continue
        up = tree.parent[x]
        j[x] = j[up] + (1 / phi[x] - 1 / phi[up]) / mass[x]
    return j


def j_kernel(tree: Tree, phi: UltrametricElement, mu: Mapping, xi: int, eta: int):
    """Jump kernel of the standard ``(phi, mu)``-process for ``xi != eta``.

    The integrand ``1/mu(B(xi, 1/s))`` is constant between consecutive values
    ``1/phi``, so the integral over ``s`` in ``(0, 1/phi(xi ^ eta))`` is a
    finite sum along the root path of the confluent.
    """
    if xi == eta:
        raise ValueError("the jump kernel is infinite on the diagonal")
    if not (tree.is_leaf(xi) and tree.is_leaf(eta)):
        raise ValueError("j_kernel needs leaves")
    w = tree.lca(xi, eta)
    path = tree.path_to_root(w)[::-1]
    mass = branch_masses(tree, mu)
    total = 1 / phi[path[0]]
    for up, x in zip(path, path[1:]):
        total += (1 / phi[x] - 1 / phi[up]) / mass[x]
    return total


def j_matrix(tree: Tree, phi: UltrametricElement, mu: Mapping) -> dict:
    """``{(xi, eta): J(xi, eta)}`` over ordered off-diagonal leaf pairs."""
    j = j_cumulative(tree, phi, mu)
    L = tree.leaves
    return {(x, y): j[tree.lca(x, y)] for x in L for y in L if x != y}


def boundary_dirichlet_form(u: Mapping, v: Mapping, J: Mapping, mu: Mapping):
    """Half the double sum of ``(u(x)-u(y)) (v(x)-v(y)) J(x, y) mu(x) mu(y)``."""
    total = ZERO
    for (x, y), jxy in J.items():
        du = u[x] - u[y]
        if du:
            dv = v[x] - v[y]
            if dv:
                total += du * dv * jxy * mu[x] * mu[y]
    return total / 2


def generator_matrix(J: Mapping, mu: Mapping, leaves: Sequence) -> np.ndarray:
    """``Lambda`` with ``(Lambda u)(x) = sum_y (u(x) - u(y)) J(x, y) mu(y)``."""
    k = len(leaves)
    idx = {l: i for i, l in enumerate(leaves)}
    L = np.empty((k, k), dtype=object)
    L[:] = ZERO
    for (x, y), jxy in J.items():
        w = jxy * mu[y]
        L[idx[x], idx[y]] -= w
        L[idx[x], idx[x]] += w
    return L


def quadratic_form_from_generator(L: np.ndarray, u: Sequence, mu: Sequence):
    """``sum_x u(x) (Lambda u)(x) mu(x)`` in leaf order."""
    Lu = L.dot(np.array(u, dtype=object))
    return sum((ui * lui * mi for ui, lui, mi in zip(u, Lu, mu)), ZERO)
