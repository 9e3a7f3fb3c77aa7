"""Orthonormal Legendre bases, multi-index sets, quadrature and triple products.

Everything in this module is normalized against the uniform probability
density on [-1, 1] (1/2 per dimension): basis functions are orthonormal in
that inner product and quadrature weights sum to one, so expansion
coefficients are plain expectations.  Multi-index sets use a fixed graded
lexicographic order, which makes coefficient layouts identical across runs
and makes the order-N0 index set a prefix of the order-N one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "MultiIndex",
    "QuadratureRule",
    "TripleProductTensor",
    "legendre",
    "orthonormal_legendre",
    "legendre_table",
    "tensor_basis_eval",
    "basis_matrix",
    "gauss_legendre",
    "multi_index_set",
    "triple_products",
]


@dataclass(frozen=True)
class MultiIndex:
    """Address of one tensor-product basis function: one degree per dimension."""

    entries: tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if len(entries) < 1:
            raise ValueError("multi-index needs at least one dimension")
        if any(e < 0 for e in entries):
            raise ValueError(f"multi-index entries must be nonnegative, got {entries}")
        object.__setattr__(self, "entries", entries)

    @property
    def degree(self) -> int:
        return sum(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, d: int) -> int:
        return self.entries[d]


def as_multi_index(i) -> MultiIndex:
    """Coerce a MultiIndex, tuple or int sequence into a MultiIndex."""
    if isinstance(i, MultiIndex):
        return i
    if isinstance(i, int):
        return MultiIndex((i,))
    return MultiIndex(tuple(i))


def legendre(n: int, x):
    """Unnormalized Legendre polynomial P_n(x) via the three-term recurrence.

    `x` may be a scalar or an ndarray; the result has the same shape.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    arr = np.asarray(x, dtype=float)
    p_prev = np.ones_like(arr)
    if n == 0:
        return p_prev if arr.ndim else float(p_prev)
    p = arr.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * arr * p - k * p_prev) / (k + 1), p
    return p if arr.ndim else float(p)


def orthonormal_legendre(n: int, x):
    """Legendre polynomial scaled to unit norm under the uniform density: sqrt(2n+1) P_n."""
    return math.sqrt(2 * n + 1) * legendre(n, x)


def legendre_table(nmax: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Legendre values for all degrees 0..nmax at once.

    Returns an array of shape ``(len(x), nmax + 1)`` whose column k is the
    orthonormal polynomial of degree k evaluated at the points.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    table = np.ones((x.size, nmax + 1))
    if nmax >= 1:
        table[:, 1] = x
        for k in range(1, nmax):
            table[:, k + 1] = ((2 * k + 1) * x * table[:, k] - k * table[:, k - 1]) / (k + 1)
    table *= np.sqrt(2.0 * np.arange(nmax + 1) + 1.0)
    return table


def tensor_basis_eval(i, x) -> float:
    """Tensor-product orthonormal basis function at a point of matching dimension."""
    idx = as_multi_index(i)
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.size != idx.dim:
        raise ValueError(f"point dimension {pt.size} does not match index dimension {idx.dim}")
    out = 1.0
    for d, n in enumerate(idx):
        out *= orthonormal_legendre(n, pt[d])
    return float(out)


def basis_matrix(indices: Sequence[MultiIndex], points: np.ndarray) -> np.ndarray:
    """Evaluate a set of tensor basis functions on many points.

    ``points`` has shape (npts, d); the result has shape (npts, len(indices)).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    idx_arr = np.array([tuple(i) for i in indices], dtype=int)
    if idx_arr.shape[1] != d:
        raise ValueError(f"index dimension {idx_arr.shape[1]} does not match points dimension {d}")
    nmax = int(idx_arr.max()) if idx_arr.size else 0
    tables = [legendre_table(nmax, pts[:, j]) for j in range(d)]
    out = np.ones((pts.shape[0], idx_arr.shape[0]))
    for j in range(d):
        out *= tables[j][:, idx_arr[:, j]]
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes strictly inside (-1, 1) with positive weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape:
            raise ValueError("node and weight counts differ")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size


@lru_cache(maxsize=None)
def gauss_legendre(q: int) -> QuadratureRule:
    """Gauss-Legendre rule with q nodes, weights rescaled to sum to one.

    Nodes are the roots of P_q found by Newton iteration on the recurrence
    (tolerance 1e-15); the rule integrates polynomials of degree <= 2q-1
    exactly against the uniform density on [-1, 1].
    """
    if q < 1:
        raise ValueError("node count must be at least one")
    k = np.arange(q)
    x = np.cos(np.pi * (4 * k + 3) / (4 * q + 2))
    for _ in range(100):
        p = legendre(q, x)
        p_prev = legendre(q - 1, x)
        dp = q * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # symmetrize so that mirrored nodes cancel exactly
    x = 0.5 * (x - x[::-1])
    p_prev = legendre(q - 1, x)
    dp = q * (x * legendre(q, x) - p_prev) / (x * x - 1.0)
    w = 1.0 / ((1.0 - x * x) * dp * dp)
    w = 0.5 * (w + w[::-1])
    w /= w.sum()
    order = np.argsort(x)
    return QuadratureRule(x[order], w[order])


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of `parts` nonnegative ints summing to `total`, ascending tuple order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_index_set(d: int, n_max: int) -> tuple[MultiIndex, ...]:
    """All multi-indices of total degree <= n_max in graded lexicographic order.

    The count is C(n_max + d, d), and the set for a lower maximum degree is
    always a prefix of the set for a higher one.
    """
    if d < 1:
        raise ValueError("dimension must be at least one")
    if n_max < 0:
        raise ValueError("maximum degree must be nonnegative")
    out = []
    for deg in range(n_max + 1):
        for entries in _compositions(deg, d):
            out.append(MultiIndex(entries))
    return tuple(out)


@dataclass(frozen=True)
class TripleProductTensor:
    """Expectations of basis-function triples, e_{ijk} = E[Phi_i Phi_j Phi_k].

    ``dense[a, b, c]`` is the entry for the a-th, b-th, c-th members of
    ``multi_index_set(dim, order)``; ``nonzeros`` gives the sparse view keyed
    by multi-index triples.
    """

    dim: int
    order: int
    dense: np.ndarray

    def __post_init__(self):
        dense = np.asarray(self.dense, dtype=float)
        dense.setflags(write=False)
        object.__setattr__(self, "dense", dense)

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return multi_index_set(self.dim, self.order)

    def entry(self, i, j, k) -> float:
        pos = {idx: a for a, idx in enumerate(self.indices)}
        return float(self.dense[pos[as_multi_index(i)], pos[as_multi_index(j)], pos[as_multi_index(k)]])

    def nonzeros(self, cutoff: float = 1e-13) -> dict:
        idx = self.indices
        out = {}
        for (a, b, c), v in np.ndenumerate(self.dense):
            if abs(v) > cutoff:
                out[(idx[a], idx[b], idx[c])] = float(v)
        return out


@lru_cache(maxsize=None)
def triple_products(d: int, n_max: int) -> TripleProductTensor:
    """Triple-product tensor over all indices of degree <= n_max.

    One-dimensional entries come from a Gauss rule with at least
    ceil((3*n_max + 1) / 2) nodes, which integrates the degree-3n integrands
    exactly; multi-dimensional entries are products of the per-dimension ones.
    """
    nq = max(1, math.ceil((3 * n_max + 1) / 2))
    rule = gauss_legendre(nq)
    table = legendre_table(n_max, rule.nodes)
    one_d = np.einsum("qa,qb,qc,q->abc", table, table, table, rule.weights)
    indices = multi_index_set(d, n_max)
    if d == 1:
        dense = one_d
    else:
        entry_arr = np.array([tuple(i) for i in indices], dtype=int)
        n = len(indices)
        dense = np.ones((n, n, n))
        for dim in range(d):
            e = entry_arr[:, dim]
            dense *= one_d[e[:, None, None], e[None, :, None], e[None, None, :]]
    return TripleProductTensor(d, n_max, dense)
