"""Hypercube decomposition of the random domain [-1, 1]^d.

Elements are half-open boxes; the right boundary of the global domain is
closed so that a sample landing exactly on 1 still belongs to an element.
Sampling uses the Philox counter-based generator, keyed per 65536-sample
chunk with ``seed XOR chunk_index``, so regeneration (serial or parallel by
chunk) is bit-exact for a given (m, d, seed).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "DOMAIN_LO",
    "DOMAIN_HI",
    "Element",
    "Decomposition",
    "SampleSet",
    "element_probability",
    "to_local",
    "to_global",
    "to_local_many",
    "to_global_many",
    "split_element",
    "locate",
    "locate_many",
    "sample_uniform",
    "check_partition",
    "decomposition_to_json",
    "decomposition_from_json",
]

DOMAIN_LO = -1.0
DOMAIN_HI = 1.0

_SAMPLE_CHUNK = 1 << 16


@dataclass(frozen=True)
class Element:
    """Axis-aligned box [lower, upper) with its probability mass under the uniform density."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    prob: float

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "Element":
        lo = tuple(float(a) for a in lower)
        hi = tuple(float(b) for b in upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower and upper bounds must have the same nonzero dimension")
        if any(not (DOMAIN_LO <= a < b <= DOMAIN_HI) for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box inside [-1,1]^d: lower={lo} upper={hi}")
        prob = 1.0
        for a, b in zip(lo, hi):
            prob *= (b - a) / 2.0
        return cls(lo, hi, prob)

    @property
    def dim(self) -> int:
        return len(self.lower)


def element_probability(e: Element) -> float:
    """Probability mass of the box under the uniform density: prod (b-a)/2."""
    prob = 1.0
    for a, b in zip(e.lower, e.upper):
        if not b > a:
            raise ValueError(f"degenerate box: [{a}, {b})")
        prob *= (b - a) / 2.0
    return prob


def _inside_closed(e: Element, z: np.ndarray) -> bool:
    return all(a <= v <= b for a, b, v in zip(e.lower, e.upper, z))


def to_local(e: Element, z) -> np.ndarray:
    """Map a global point in the element onto the reference cube [-1, 1]^d."""
    pt = np.atleast_1d(np.asarray(z, dtype=float))
    if pt.size != e.dim:
        raise ValueError(f"point dimension {pt.size} does not match element dimension {e.dim}")
    if not _inside_closed(e, pt):
        raise DomainError(f"point {pt.tolist()} outside element [{e.lower}, {e.upper})")
    lo = np.array(e.lower)
    hi = np.array(e.upper)
    # rounding may overshoot the reference cube by one ulp on boundary points
    return np.clip((2.0 * pt - (lo + hi)) / (hi - lo), -1.0, 1.0)


def to_global(e: Element, x) -> np.ndarray:
    """Inverse of `to_local`: map a reference point into the element."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.size != e.dim:
        raise ValueError(f"point dimension {pt.size} does not match element dimension {e.dim}")
    if np.any(np.abs(pt) > 1.0):
        raise DomainError(f"reference point {pt.tolist()} outside [-1,1]^d")
    lo = np.array(e.lower)
    hi = np.array(e.upper)
    return (lo + hi) / 2.0 + pt * (hi - lo) / 2.0


def to_local_many(e: Element, Z: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(Z, dtype=float))
    lo = np.array(e.lower)
    hi = np.array(e.upper)
    if np.any(pts < lo) or np.any(pts > hi):
        raise DomainError("points outside element")
    return np.clip((2.0 * pts - (lo + hi)) / (hi - lo), -1.0, 1.0)


def to_global_many(e: Element, X: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(X, dtype=float))
    lo = np.array(e.lower)
    hi = np.array(e.upper)
    return (lo + hi) / 2.0 + pts * (hi - lo) / 2.0


def split_element(e: Element, dims: Iterable[int]) -> list[Element]:
    """Bisect the element along each requested dimension.

    Returns 2^len(dims) children in a fixed binary order.  Child probabilities
    are set to parent.prob / 2^len(dims) exactly, so partition sums are
    preserved bit-for-bit across refinements.
    """
    dim_list = sorted(set(int(d) for d in dims))
    if not dim_list:
        raise ValueError("at least one split dimension is required")
    if any(d < 0 or d >= e.dim for d in dim_list):
        raise ValueError(f"split dimensions {dim_list} out of range for dimension {e.dim}")
    mids = {d: (e.lower[d] + e.upper[d]) / 2.0 for d in dim_list}
    child_prob = e.prob / (2 ** len(dim_list))
    children = []
    for mask in range(2 ** len(dim_list)):
        lo = list(e.lower)
        hi = list(e.upper)
        for bit, d in enumerate(dim_list):
            if (mask >> bit) & 1:
                lo[d] = mids[d]
            else:
                hi[d] = mids[d]
        children.append(Element(tuple(lo), tuple(hi), child_prob))
    return children


@dataclass(frozen=True)
class Decomposition:
    """Ordered, pairwise-disjoint elements covering the whole domain."""

    elements: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValueError("decomposition needs at least one element")

    @classmethod
    def whole_domain(cls, d: int) -> "Decomposition":
        return cls((Element.box([DOMAIN_LO] * d, [DOMAIN_HI] * d),))

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


def _member_mask(e: Element, pts: np.ndarray) -> np.ndarray:
    """Half-open membership with the global right edge closed."""
    mask = np.ones(pts.shape[0], dtype=bool)
    for d in range(e.dim):
        col = pts[:, d]
        hi = e.upper[d]
        below = (col < hi) | ((hi == DOMAIN_HI) & (col == hi))
        mask &= (col >= e.lower[d]) & below
    return mask


def locate(dec: Decomposition, z) -> int:
    """Index of the unique element containing the point."""
    pt = np.atleast_2d(np.asarray(z, dtype=float))
    if np.any(pt < DOMAIN_LO) or np.any(pt > DOMAIN_HI):
        raise DomainError(f"point {np.asarray(z).tolist()} outside [-1,1]^d")
    for k, e in enumerate(dec.elements):
        if _member_mask(e, pt)[0]:
            return k
    raise DomainError(f"point {np.asarray(z).tolist()} not covered by the decomposition")


def locate_many(dec: Decomposition, Z: np.ndarray) -> np.ndarray:
    """Vectorized `locate`; returns one element index per row of Z."""
    pts = np.atleast_2d(np.asarray(Z, dtype=float))
    if np.any(pts < DOMAIN_LO) or np.any(pts > DOMAIN_HI):
        raise DomainError("points outside [-1,1]^d")
    out = np.full(pts.shape[0], -1, dtype=np.int64)
    for k, e in enumerate(dec.elements):
        unassigned = out < 0
        if not np.any(unassigned):
            break
        hit = _member_mask(e, pts[unassigned])
        idx = np.flatnonzero(unassigned)[hit]
        out[idx] = k
    if np.any(out < 0):
        raise DomainError("points not covered by the decomposition")
    return out


@dataclass(frozen=True)
class SampleSet:
    """Uniform sample points on [-1, 1]^d together with the seed that made them."""

    points: np.ndarray
    seed: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def sample_uniform(m: int, d: int, seed: int) -> SampleSet:
    """Draw m i.i.d. uniform points on [-1, 1]^d, reproducibly.

    Philox streams keyed with ``seed ^ chunk_index`` generate 65536 samples
    each, so the same (m, d, seed) always yields the identical array and
    chunks can be produced independently.
    """
    if m < 1:
        raise ValueError("sample count must be at least one")
    if d < 1:
        raise ValueError("dimension must be at least one")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    out = np.empty((m, d))
    for chunk in range((m + _SAMPLE_CHUNK - 1) // _SAMPLE_CHUNK):
        gen = np.random.Generator(np.random.Philox(key=seed ^ chunk))
        start = chunk * _SAMPLE_CHUNK
        stop = min(start + _SAMPLE_CHUNK, m)
        out[start:stop] = gen.uniform(DOMAIN_LO, DOMAIN_HI, size=(stop - start, d))
    return SampleSet(out, seed)


def check_partition(dec: Decomposition, n_probe: int = 4096, seed: int = 0) -> list[str]:
    """Partition-of-unity and disjointness diagnostics; returns human-readable issues."""
    issues = []
    total = sum(e.prob for e in dec.elements)
    if abs(total - 1.0) > 1e-12:
        issues.append(f"element probabilities sum to {total!r}, not 1")
    for k, e in enumerate(dec.elements):
        try:
            recomputed = element_probability(e)
        except ValueError:
            issues.append(f"element {k} is degenerate")
            continue
        if abs(recomputed - e.prob) > 1e-12:
            issues.append(f"element {k} stores prob {e.prob!r} but bounds give {recomputed!r}")
    pts = sample_uniform(n_probe, dec.dim, seed).points
    counts = np.zeros(n_probe, dtype=int)
    owners = np.full(n_probe, -1, dtype=int)
    for k, e in enumerate(dec.elements):
        hit = _member_mask(e, pts)
        overlap = hit & (counts > 0)
        if np.any(overlap):
            first = int(np.flatnonzero(overlap)[0])
            issues.append(f"elements {owners[first]} and {k} overlap near {pts[first].tolist()}")
        counts += hit
        owners[hit] = k
    if np.any(counts == 0):
        miss = pts[counts == 0][0]
        issues.append(f"uncovered region near {miss.tolist()}")
    return issues


def decomposition_to_json(dec: Decomposition) -> str:
    payload = {
        "dim": dec.dim,
        "elements": [
            {"lower": list(e.lower), "upper": list(e.upper), "prob": e.prob} for e in dec.elements
        ],
    }
    return json.dumps(payload, indent=2)


def decomposition_from_json(text: str) -> Decomposition:
    payload = json.loads(text)
    elements = tuple(
        Element(tuple(item["lower"]), tuple(item["upper"]), float(item["prob"]))
        for item in payload["elements"]
    )
    return Decomposition(elements)
