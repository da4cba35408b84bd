"""Weight-space posteriors, weight boxes and exact posterior box integrals."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .net import ShapeError


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """Diagonal-Gaussian posterior over the flat weight vector."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float).reshape(-1)
        v = np.asarray(self.variance, dtype=float).reshape(-1)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "variance", v)
        if m.shape != v.shape:
            raise ShapeError("mean and variance lengths differ")
        if np.any(v <= 0):
            raise ValueError("variance entries must be strictly positive")

    @property
    def n_weights(self) -> int:
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class SamplePosterior:
    """Discrete posterior given by weighted weight-vector atoms (e.g. HMC)."""

    samples: np.ndarray
    weights: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "samples", s)
        if s.shape[0] < 1:
            raise ValueError("need at least one sample")
        w = self.weights
        if w is None:
            w = np.full(s.shape[0], 1.0 / s.shape[0])
        else:
            w = np.asarray(w, dtype=float).reshape(-1)
        object.__setattr__(self, "weights", w)
        if w.shape[0] != s.shape[0]:
            raise ShapeError("one weight per sample required")
        if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0):
            raise ValueError("sample weights must be a probability vector")

    @property
    def n_weights(self) -> int:
        return self.samples.shape[1]


Posterior = GaussianPosterior | SamplePosterior


@dataclass(frozen=True, eq=False)
class WeightBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != hi.shape:
            raise ShapeError("box bounds must have equal length")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def intersect(self, other: "WeightBox") -> "WeightBox | None":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if np.any(lo > hi):
            return None
        return WeightBox(lower=lo, upper=hi)

    def overlaps(self, other: "WeightBox") -> bool:
        return bool(np.all(np.maximum(self.lower, other.lower)
                           <= np.minimum(self.upper, other.upper)))


def sample(posterior: Posterior, rng_seed) -> np.ndarray:
    """Draw one weight vector; the seed fully determines the draw."""
    rng = np.random.default_rng(rng_seed)
    if isinstance(posterior, GaussianPosterior):
        return posterior.mean + posterior.std * rng.standard_normal(posterior.n_weights)
    idx = rng.choice(posterior.samples.shape[0], p=posterior.weights)
    return posterior.samples[idx].copy()


def make_box(w: np.ndarray, gamma: float, posterior: Posterior,
             margin_scale: str = "std") -> WeightBox:
    """Axis-aligned box of half-width gamma (in posterior scale) around w.

    margin_scale 'std' uses gamma standard deviations per weight, 'var' uses
    gamma times the variance. Sample-based posteriors always get zero-width
    boxes, so the box probability is the atom's own mass.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    w = np.asarray(w, dtype=float).reshape(-1)
    if isinstance(posterior, SamplePosterior):
        return WeightBox(lower=w, upper=w)
    if margin_scale == "std":
        hw = gamma * posterior.std
    elif margin_scale == "var":
        hw = gamma * posterior.variance
    else:
        raise ValueError(f"unknown margin scale {margin_scale!r}")
    return WeightBox(lower=w - hw, upper=w + hw)


def box_mass(posterior: Posterior, box: WeightBox) -> float:
    """Exact posterior probability of an axis-aligned weight box.

    Gaussian: product of per-dimension erf differences, accumulated in log
    space so very high-dimensional products do not underflow. Sample-based:
    summed weight of atoms inside the closed box.
    """
    if isinstance(posterior, SamplePosterior):
        inside = np.all((posterior.samples >= box.lower[None, :])
                        & (posterior.samples <= box.upper[None, :]), axis=1)
        return float(np.clip(posterior.weights[inside].sum(), 0.0, 1.0))
    if box.lower.shape[0] != posterior.n_weights:
        raise ShapeError("box dimensionality differs from posterior")
    denom = np.sqrt(2.0 * posterior.variance)
    per_dim = 0.5 * (erf((posterior.mean - box.lower) / denom)
                     - erf((posterior.mean - box.upper) / denom))
    per_dim = np.clip(per_dim, 0.0, 1.0)
    if np.any(per_dim == 0.0):
        return 0.0
    return float(np.clip(np.exp(np.log(per_dim).sum()), 0.0, 1.0))


def _intersect_all(boxes: list[WeightBox]) -> WeightBox | None:
    lo = np.maximum.reduce([b.lower for b in boxes])
    hi = np.minimum.reduce([b.upper for b in boxes])
    if np.any(lo > hi):
        return None
    return WeightBox(lower=lo, upper=hi)


def bonferroni_bounds(boxes: list[WeightBox], posterior: Posterior,
                      depth_lower: int = 2, depth_upper: int = 1) -> tuple[float, float]:
    """Two-sided bounds on the posterior mass of a union of (possibly
    overlapping) boxes via truncated inclusion-exclusion.

    The j-th partial sum S_j adds the masses of all j-wise intersections,
    each itself an axis-aligned box. Truncating the alternating series at an
    even depth under-counts (lower bound), at an odd depth over-counts
    (upper bound). Cost is O(N^depth).
    """
    if not boxes:
        return 0.0, 0.0
    if depth_lower % 2 != 0 or depth_lower < 2:
        raise ValueError("depth_lower must be an even integer >= 2")
    if depth_upper % 2 != 1 or depth_upper < 1:
        raise ValueError("depth_upper must be an odd integer >= 1")
    n = len(boxes)
    max_depth = min(max(depth_lower, depth_upper), n)
    partial = {}
    for j in range(1, max_depth + 1):
        s = 0.0
        for combo in itertools.combinations(range(n), j):
            inter = _intersect_all([boxes[i] for i in combo])
            if inter is not None:
                s += box_mass(posterior, inter)
        partial[j] = s

    def truncated(depth):
        depth = min(depth, n)
        return sum((-1) ** (j + 1) * partial[j] for j in range(1, depth + 1))

    lower = truncated(depth_lower)
    upper = truncated(depth_upper)
    if min(depth_lower, n) == n and min(depth_upper, n) == n:
        upper = lower = truncated(n)
    return float(np.clip(lower, 0.0, 1.0)), float(np.clip(upper, 0.0, 1.0))


def disjointify(boxes: list[WeightBox]) -> list[WeightBox]:
    """Greedy pairwise-disjoint subset: keep each box unless it intersects an
    already-kept one. Earlier boxes win, so results are order-dependent but
    deterministic."""
    kept: list[WeightBox] = []
    for b in boxes:
        if not any(b.overlaps(k) for k in kept):
            kept.append(b)
    return kept
