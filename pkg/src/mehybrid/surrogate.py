"""Element-local polynomial-chaos expansions and multi-element surrogates.

Expansions are built non-intrusively by pseudo-spectral projection on a
tensor Gauss grid: each coefficient is the quadrature estimate of
E[g Phi_i] over the element, which is exact whenever g restricted to the
element is a polynomial of degree <= 2q - 1 - N.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ModelEvaluationError
from .polybasis import MultiIndex, as_multi_index, basis_matrix, gauss_legendre, multi_index_set
from .randomspace import (
    Decomposition,
    Element,
    locate_many,
    sample_uniform,
    to_global_many,
    to_local_many,
)

__all__ = [
    "LimitStateModel",
    "CallableModel",
    "GpcExpansion",
    "MultiElementSurrogate",
    "build_collocation",
    "eval_expansion",
    "eval_expansion_many",
    "eval_me_surrogate",
    "eval_me_surrogate_many",
    "local_variance",
    "lp_error",
    "gamma_bound",
    "as_evaluable",
    "surrogate_to_json",
    "surrogate_from_json",
    "tensor_grid",
]


class LimitStateModel:
    """Exact limit-state function g(z); failure is the event {g < 0}.

    Subclasses implement `_g_one` (and may override `_g_many` with a
    vectorized version).  Every exact evaluation is counted.
    """

    dim: int = 1

    def __init__(self):
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def evaluate(self, z) -> float:
        pt = np.atleast_1d(np.asarray(z, dtype=float))
        self._calls += 1
        return float(self._g_one(pt))

    def evaluate_many(self, Z: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(Z, dtype=float))
        self._calls += pts.shape[0]
        return np.asarray(self._g_many(pts), dtype=float)

    def _g_one(self, z: np.ndarray) -> float:
        raise NotImplementedError

    def _g_many(self, Z: np.ndarray) -> np.ndarray:
        return np.array([self._g_one(row) for row in Z])


class CallableModel(LimitStateModel):
    """Adapter turning a plain function (and optional vectorized form) into a model."""

    def __init__(self, fn: Callable, dim: int = 1, fn_many: Callable | None = None):
        super().__init__()
        self.dim = dim
        self._fn = fn
        self._fn_many = fn_many

    def _g_one(self, z):
        return self._fn(z if self.dim > 1 else float(z[0]))

    def _g_many(self, Z):
        if self._fn_many is not None:
            return self._fn_many(Z if self.dim > 1 else Z[:, 0])
        return super()._g_many(Z)


@dataclass(frozen=True)
class GpcExpansion:
    """Orthonormal expansion of g on one element, coefficients in graded-lex order."""

    element: Element
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        expected = len(multi_index_set(self.element.dim, self.order))
        if c.shape != (expected,):
            raise ValueError(f"expected {expected} coefficients for order {self.order}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def indices(self) -> tuple[MultiIndex, ...]:
        return multi_index_set(self.element.dim, self.order)

    def coeff(self, i) -> float:
        idx = as_multi_index(i)
        return float(self.coeffs[self.indices.index(idx)])

    def coeff_map(self) -> dict[MultiIndex, float]:
        return {idx: float(c) for idx, c in zip(self.indices, self.coeffs)}

    def eval_many(self, Z: np.ndarray) -> np.ndarray:
        return eval_expansion_many(self, Z)


@dataclass(frozen=True)
class MultiElementSurrogate:
    """One expansion per element of a decomposition, in matching order."""

    decomposition: Decomposition
    expansions: tuple[GpcExpansion, ...]
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "expansions", tuple(self.expansions))
        if len(self.expansions) != len(self.decomposition):
            raise ValueError("one expansion per element is required")
        for e, exp in zip(self.decomposition, self.expansions):
            if e != exp.element:
                raise ValueError("expansion order does not match decomposition order")

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    def __len__(self) -> int:
        return len(self.expansions)

    def eval_many(self, Z: np.ndarray) -> np.ndarray:
        return eval_me_surrogate_many(self, Z)


def tensor_grid(q: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Reference tensor Gauss grid: q^d points and matching product weights."""
    rule = gauss_legendre(q)
    if d == 1:
        return rule.nodes[:, None], rule.weights.copy()
    grids = np.meshgrid(*([rule.nodes] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = rule.weights
    weights = w
    for _ in range(d - 1):
        weights = np.multiply.outer(weights, w)
    return pts, weights.ravel()


def build_collocation(model: LimitStateModel, e: Element, order: int, q: int | None = None) -> GpcExpansion:
    """Project the exact model onto the element basis using a tensor Gauss grid.

    Costs exactly q^d exact-model calls.  The default q = order + 2 slightly
    over-integrates to damp aliasing.
    """
    if q is None:
        q = order + 2
    if q < order + 1:
        raise ValueError(f"need at least order+1 = {order + 1} nodes per dimension, got {q}")
    d = e.dim
    ref_pts, weights = tensor_grid(q, d)
    nodes = to_global_many(e, ref_pts)
    try:
        values = model.evaluate_many(nodes)
    except Exception as exc:
        raise ModelEvaluationError(
            f"exact model failed on a collocation grid over [{e.lower}, {e.upper}): {exc}",
            point=nodes,
        ) from exc
    phi = basis_matrix(multi_index_set(d, order), ref_pts)
    coeffs = phi.T @ (weights * values)
    return GpcExpansion(e, order, coeffs)


def _points_for(dim: int, Z) -> np.ndarray:
    """Normalize sample input to shape (npts, dim); flat arrays are point lists when dim == 1."""
    arr = np.asarray(Z, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.ndim == 1:
        arr = arr[:, None] if dim == 1 else arr[None, :]
    return arr


def eval_expansion(exp: GpcExpansion, z) -> float:
    """Value of the expansion at one global point inside its element."""
    pt = np.atleast_1d(np.asarray(z, dtype=float))
    return float(eval_expansion_many(exp, pt[None, :])[0])


def eval_expansion_many(exp: GpcExpansion, Z: np.ndarray) -> np.ndarray:
    pts = _points_for(exp.element.dim, Z)
    local = to_local_many(exp.element, pts)
    return _eval_local(exp, local)


def _eval_local(exp: GpcExpansion, local: np.ndarray) -> np.ndarray:
    return basis_matrix(exp.indices, local) @ exp.coeffs


def eval_me_surrogate(s: MultiElementSurrogate, z) -> float:
    pt = np.atleast_1d(np.asarray(z, dtype=float))
    return float(eval_me_surrogate_many(s, pt[None, :])[0])


def eval_me_surrogate_many(s: MultiElementSurrogate, Z: np.ndarray) -> np.ndarray:
    """Locate each point, then evaluate the owning element's expansion."""
    pts = _points_for(s.dim, Z)
    owners = locate_many(s.decomposition, pts)
    out = np.empty(pts.shape[0])
    for k, exp in enumerate(s.expansions):
        rows = owners == k
        if not np.any(rows):
            continue
        out[rows] = _eval_local(exp, to_local_many(exp.element, pts[rows]))
    return out


def local_variance(exp: GpcExpansion) -> float:
    """Variance of the expansion under the element's conditional density."""
    return float(np.sum(exp.coeffs[1:] ** 2))


def lp_error(surrogate, model: LimitStateModel, p: float, m: int, seed: int) -> float:
    """Monte Carlo estimate of the L^p distance between surrogate and exact model.

    Diagnostic only: costs m exact-model calls on a fresh sample set that is
    independent of any estimation samples.
    """
    if p < 1:
        raise ValueError("norm order must be at least one")
    if m < 1:
        raise ValueError("sample count must be at least one")
    if isinstance(surrogate, GpcExpansion):
        dim = surrogate.element.dim
    else:
        dim = getattr(surrogate, "dim", model.dim)
    pts = sample_uniform(m, dim, seed).points
    exact = model.evaluate_many(pts)
    approx = as_evaluable(surrogate)(pts)
    return float(np.mean(np.abs(exact - approx) ** p) ** (1.0 / p))


def as_evaluable(surrogate) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(surrogate, GpcExpansion):
        return lambda Z: eval_expansion_many(surrogate, Z)
    if isinstance(surrogate, MultiElementSurrogate):
        return lambda Z: eval_me_surrogate_many(surrogate, Z)
    if hasattr(surrogate, "eval_many"):
        return surrogate.eval_many
    if callable(surrogate):
        return lambda Z: np.asarray(surrogate(Z), dtype=float)
    raise TypeError(f"cannot evaluate surrogate of type {type(surrogate)!r}")


def gamma_bound(eps_p: float, eps: float, p: float) -> float:
    """Smallest admissible replacement threshold for a target accuracy eps."""
    if eps <= 0:
        raise ValueError("accuracy target must be positive")
    if eps_p < 0:
        raise ValueError("surrogate error must be nonnegative")
    if p < 1:
        raise ValueError("norm order must be at least one")
    return eps_p / eps ** (1.0 / p)


def surrogate_to_json(s: MultiElementSurrogate) -> str:
    payload = {
        "dim": s.dim,
        "order": s.expansions[0].order if s.expansions else 0,
        "truncated": s.truncated,
        "elements": [
            {
                "lower": list(exp.element.lower),
                "upper": list(exp.element.upper),
                "prob": exp.element.prob,
                "order": exp.order,
                "coeffs": exp.coeffs.tolist(),
            }
            for exp in s.expansions
        ],
    }
    return json.dumps(payload, indent=2)


def surrogate_from_json(text: str) -> MultiElementSurrogate:
    payload = json.loads(text)
    expansions = []
    elements = []
    for item in payload["elements"]:
        e = Element(tuple(item["lower"]), tuple(item["upper"]), float(item["prob"]))
        elements.append(e)
        expansions.append(GpcExpansion(e, int(item["order"]), np.array(item["coeffs"])))
    return MultiElementSurrogate(
        Decomposition(tuple(elements)), tuple(expansions), bool(payload.get("truncated", False))
    )
