"""Failure-probability estimators with exact-call accounting.

All iterative variants keep an integer count of samples currently
classified as failing; the reported probability is that count divided by
the total sample size.  This makes the conservation property exact: when
the iteration replaces every surrogate value by an exact one, the estimate
equals the plain Monte Carlo estimate on the same samples bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .randomspace import SampleSet, locate_many
from .surrogate import LimitStateModel, MultiElementSurrogate, as_evaluable

__all__ = [
    "HybridConfig",
    "Estimate",
    "TraceRecord",
    "HybridTrace",
    "mc_estimate",
    "mc_stddev",
    "direct_hybrid",
    "iterative_hybrid",
    "me_gha",
    "me_lha",
    "relative_error",
]


@dataclass
class HybridConfig:
    """Iteration controls: block size, stopping tolerance, optional call cap."""

    delta_m: int
    eta_stop: float = 0.0
    max_exact: int | None = None
    m: int | None = None

    def __post_init__(self):
        if self.delta_m < 1:
            raise ValueError("step size delta_m must be at least one")
        if self.eta_stop < 0:
            raise ValueError("stopping tolerance must be nonnegative")
        if self.m is not None and self.delta_m > self.m:
            raise ValueError("step size cannot exceed the sample count")
        if self.max_exact is not None and self.max_exact < 1:
            raise ValueError("max_exact must be at least one when given")


@dataclass(frozen=True)
class Estimate:
    """Final estimate with its cost accounting."""

    p_f: float
    n_exact: int
    n_surrogate: int
    stddev: float

    def __post_init__(self):
        if not 0.0 <= self.p_f <= 1.0:
            raise ValueError(f"estimate {self.p_f} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {"p_f": self.p_f, "n_exact": self.n_exact, "n_surrogate": self.n_surrogate, "stddev": self.stddev}
        )


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    estimate: float
    n_exact: int
    element: int | None = None


@dataclass
class HybridTrace:
    """Per-iteration history of an iterative hybrid run."""

    records: list[TraceRecord] = field(default_factory=list)

    def append(self, iteration: int, estimate: float, n_exact: int, element: int | None = None) -> None:
        self.records.append(TraceRecord(iteration, estimate, n_exact, element))

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "estimate", "n_exact", "element"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.estimate), r.n_exact, "" if r.element is None else r.element])

    def to_json(self) -> str:
        return json.dumps(
            [
                {"iteration": r.iteration, "estimate": r.estimate, "n_exact": r.n_exact, "element": r.element}
                for r in self.records
            ]
        )


def _points(samples) -> np.ndarray:
    if isinstance(samples, SampleSet):
        return samples.points
    return np.atleast_2d(np.asarray(samples, dtype=float))


def mc_stddev(p: float, m: int) -> float:
    """Standard deviation of the Monte Carlo estimator: sqrt(p (1 - p) / m)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    if m < 1:
        raise ValueError("sample count must be at least one")
    return math.sqrt(p * (1.0 - p) / m)


def mc_estimate(model: LimitStateModel, samples) -> Estimate:
    """Plain Monte Carlo: fraction of samples with a negative exact value."""
    pts = _points(samples)
    if pts.shape[0] < 1:
        raise ValueError("at least one sample is required")
    values = model.evaluate_many(pts)
    m = pts.shape[0]
    fails = int(np.count_nonzero(values < 0.0))
    p = fails / m
    return Estimate(p, m, 0, mc_stddev(p, m))


def direct_hybrid(model: LimitStateModel, surrogate, samples, gamma: float) -> Estimate:
    """Hybrid estimate with a fixed replacement band of half-width gamma.

    Samples with surrogate value below -gamma count as failures outright;
    samples inside the band are settled by the exact model; the rest are
    taken as safe.
    """
    if gamma < 0:
        raise ValueError("replacement threshold gamma must be nonnegative")
    pts = _points(samples)
    m = pts.shape[0]
    approx = as_evaluable(surrogate)(pts)
    band = np.abs(approx) <= gamma
    fails = int(np.count_nonzero(approx < -gamma))
    n_exact = int(np.count_nonzero(band))
    if n_exact:
        exact = model.evaluate_many(pts[band])
        fails += int(np.count_nonzero(exact < 0.0))
    p = fails / m
    return Estimate(p, n_exact, m, mc_stddev(p, m))


def _iterate_block_loop(
    model: LimitStateModel,
    pts: np.ndarray,
    surr_neg: np.ndarray,
    order: np.ndarray,
    m_total: int,
    base_fails: int,
    cfg: HybridConfig,
    trace: HybridTrace,
    exact_before: int,
    element: int | None = None,
) -> tuple[int, int]:
    """Run the block-replacement iteration over samples listed in `order`.

    ``surr_neg`` are surrogate-failure flags for all samples, ``base_fails``
    the failing count the iteration starts from (already normalized by the
    global m_total elsewhere).  Returns the corrected count and the number of
    exact calls spent here.
    """
    fails = base_fails
    pos = 0
    n_here = order.size
    n_exact = 0
    iteration = 0
    while pos < n_here:
        take = cfg.delta_m
        if cfg.max_exact is not None:
            take = min(take, cfg.max_exact - (exact_before + n_exact))
            if take <= 0:
                break
        block = order[pos : pos + take]
        iteration += 1
        exact_vals = model.evaluate_many(pts[block])
        delta = int(np.count_nonzero(exact_vals < 0.0)) - int(np.count_nonzero(surr_neg[block]))
        fails += delta
        pos += block.size
        n_exact += block.size
        trace.append(iteration, fails / m_total, exact_before + n_exact, element)
        if abs(delta) / m_total <= cfg.eta_stop:
            break
        if cfg.max_exact is not None and exact_before + n_exact >= cfg.max_exact:
            break
    return fails, n_exact


def iterative_hybrid(model: LimitStateModel, surrogate, samples, cfg: HybridConfig) -> tuple[Estimate, HybridTrace]:
    """Iterative hybrid estimation: replace surrogate calls by exact ones in
    blocks of delta_m, walking samples in ascending surrogate magnitude.

    The starting point is the surrogate's own failure count; each block
    swaps surrogate classifications for exact ones, and iteration stops once
    a block changes the estimate by at most eta_stop (or samples / the call
    budget run out).
    """
    pts = _points(samples)
    m = pts.shape[0]
    if cfg.m is not None and cfg.m != m:
        raise ValueError(f"config expects m = {cfg.m}, got {m} samples")
    if cfg.delta_m > m:
        raise ValueError("step size cannot exceed the sample count")
    approx = np.asarray(as_evaluable(surrogate)(pts), dtype=float)
    surr_neg = approx < 0.0
    base = int(np.count_nonzero(surr_neg))
    order = np.argsort(np.abs(approx), kind="stable")
    trace = HybridTrace()
    trace.append(0, base / m, 0, None)
    fails, n_exact = _iterate_block_loop(model, pts, surr_neg, order, m, base, cfg, trace, 0)
    p = fails / m
    return Estimate(p, n_exact, m, mc_stddev(p, m)), trace


def me_gha(model: LimitStateModel, s: MultiElementSurrogate, samples, cfg: HybridConfig) -> tuple[Estimate, HybridTrace]:
    """Global hybrid over a multi-element surrogate: one sorted pass over all samples."""
    return iterative_hybrid(model, s, samples, cfg)


def me_lha(model: LimitStateModel, s: MultiElementSurrogate, samples, cfg: HybridConfig) -> tuple[Estimate, HybridTrace]:
    """Local hybrid: run the iteration inside every element and sum the contributions.

    Counts stay normalized by the global sample size, elements without
    samples contribute nothing, and every nonempty element performs at least
    one block of exact evaluations.
    """
    pts = _points(samples)
    m = pts.shape[0]
    if cfg.m is not None and cfg.m != m:
        raise ValueError(f"config expects m = {cfg.m}, got {m} samples")
    approx = np.asarray(s.eval_many(pts), dtype=float)
    surr_neg = approx < 0.0
    owners = locate_many(s.decomposition, pts)
    abs_approx = np.abs(approx)
    trace = HybridTrace()
    total_fails = 0
    total_exact = 0
    for k in range(len(s.decomposition.elements)):
        members = np.flatnonzero(owners == k)
        if members.size == 0:
            continue
        local_order = members[np.argsort(abs_approx[members], kind="stable")]
        base = int(np.count_nonzero(surr_neg[members]))
        trace.append(0, base / m, total_exact, k)
        fails, n_exact = _iterate_block_loop(
            model, pts, surr_neg, local_order, m, base, cfg, trace, total_exact, element=k
        )
        total_fails += fails
        total_exact += n_exact
        if cfg.max_exact is not None and total_exact >= cfg.max_exact:
            # remaining elements keep their surrogate classification
            seen = owners <= k
            rest = int(np.count_nonzero(surr_neg[~seen]))
            total_fails += rest
            break
    p = total_fails / m
    return Estimate(p, total_exact, m, mc_stddev(p, m)), trace


def relative_error(p_hat: float, p_ref: float) -> float:
    """Absolute relative deviation from a reference probability."""
    if p_ref <= 0:
        raise ValueError("reference probability must be positive")
    return abs(p_hat - p_ref) / p_ref
