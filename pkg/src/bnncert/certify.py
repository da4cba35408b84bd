"""Bound algorithms for probabilistic and decision robustness.

Four certificates are produced: lower/upper bounds on the posterior
probability of safety, and lower/upper bounds on the posterior-predictive
decision (softmax mean for classification, output mean for regression).
All of them share the same loop: sample weight boxes from the posterior,
propagate the input region jointly with each box, and integrate posterior
mass exactly over the boxes that pass the relevant check.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import attack as attack_mod
from .net import Network, forward, softmax
from .posterior import (Posterior, SamplePosterior, WeightBox, bonferroni_bounds,
                        box_mass, disjointify, make_box, sample, _intersect_all)
from .propagate import propagate
from .spec import InputBox, OutputSpec, contains, excludes


@dataclass
class CertifyConfig:
    num_samples: int = 5
    gamma: float = 2.5
    method: str = "ibp"
    margin_scale: str = "std"
    bonferroni: tuple[int, int] | None = None   # (depth_lower, depth_upper)
    rng_seed: int = 0
    threads: int = 1
    # Finite co-domain bounds for regression decision robustness; softmax
    # classification always uses [0, 1].
    sigma_floor: float | None = None
    sigma_ceil: float | None = None
    attack: attack_mod.AttackConfig | None = None

    def __post_init__(self):
        if self.num_samples < 0:
            raise ValueError("num_samples must be >= 0")
        if self.method not in ("ibp", "lbp"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class Certificate:
    property: str              # "psafe" | "dsafe"
    direction: str             # "lower" | "upper"
    value: float
    covered_mass: float
    boxes_used: int
    boxes_kept: int
    wall_time: float
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _config_echo(cfg: CertifyConfig) -> dict:
    d = asdict(cfg)
    d.pop("attack", None)
    return d


def _sample_boxes(posterior: Posterior, cfg: CertifyConfig) -> list[WeightBox]:
    """One box per sample index, each with its own deterministic seed so a
    longer run extends a shorter one instead of reshuffling it."""
    boxes = []
    for i in range(cfg.num_samples):
        w = sample(posterior, (cfg.rng_seed, i))
        boxes.append(make_box(w, cfg.gamma, posterior, cfg.margin_scale))
    return boxes


def _prepare_boxes(posterior: Posterior, cfg: CertifyConfig):
    boxes = _sample_boxes(posterior, cfg)
    used = len(boxes)
    if cfg.bonferroni is None:
        boxes = disjointify(boxes)
    return boxes, used


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _union_mass(boxes: list[WeightBox], posterior: Posterior,
                cfg: CertifyConfig, want_lower: bool) -> float:
    """Posterior mass of a family of boxes: exact sum when disjoint, the
    appropriate Bonferroni side when overlaps are allowed."""
    if not boxes:
        return 0.0
    if cfg.bonferroni is None:
        return float(sum(box_mass(posterior, b) for b in boxes))
    lo, up = bonferroni_bounds(boxes, posterior, *cfg.bonferroni)
    return lo if want_lower else up


def psafe_lower(net: Network, posterior: Posterior, T: InputBox, S: OutputSpec,
                cfg: CertifyConfig) -> Certificate:
    """Sound lower bound: mass of sampled weight boxes whose propagated
    output box lies entirely inside S."""
    t0 = time.perf_counter()
    boxes, used = _prepare_boxes(posterior, cfg)

    def is_safe(box):
        yL, yU = propagate(net, T, box, cfg.method)
        return contains(S, yL, yU)

    flags = _map(is_safe, boxes, cfg.threads)
    safe = [b for b, ok in zip(boxes, flags) if ok]
    value = min(_union_mass(safe, posterior, cfg, want_lower=True), 1.0)
    covered = min(_union_mass(boxes, posterior, cfg, want_lower=True), 1.0)
    return Certificate(property="psafe", direction="lower", value=value,
                       covered_mass=covered, boxes_used=used,
                       boxes_kept=len(safe), wall_time=time.perf_counter() - t0,
                       config=_config_echo(cfg))


def psafe_upper(net: Network, posterior: Posterior, T: InputBox, S: OutputSpec,
                cfg: CertifyConfig) -> Certificate:
    """Sound upper bound: 1 minus the mass of boxes certified unsafe.

    Each box's center weight is attacked over T; the found point is then
    propagated jointly with the whole weight box, and the box counts as
    unsafe only if every weight in it maps that point outside S. A failed
    attack merely skips the box, which keeps the bound sound (if loose).
    """
    t0 = time.perf_counter()
    boxes, used = _prepare_boxes(posterior, cfg)
    acfg = cfg.attack or attack_mod.AttackConfig()

    def is_unsafe(box):
        a = attack_mod.AttackConfig(
            iterations=acfg.iterations, step_size=acfg.step_size,
            restarts=acfg.restarts,
            objective=acfg.objective or attack_mod.SpecViolation(S),
            seed=acfg.seed)
        x_adv = attack_mod.pgd(net, box.center, T, a)
        yL, yU = propagate(net, InputBox.point(x_adv), box, cfg.method)
        return excludes(S, yL, yU)

    flags = _map(is_unsafe, boxes, cfg.threads)
    unsafe = [b for b, ok in zip(boxes, flags) if ok]
    unsafe_mass = min(_union_mass(unsafe, posterior, cfg, want_lower=True), 1.0)
    covered = min(_union_mass(boxes, posterior, cfg, want_lower=True), 1.0)
    return Certificate(property="psafe", direction="upper",
                       value=float(1.0 - unsafe_mass), covered_mass=covered,
                       boxes_used=used, boxes_kept=len(unsafe),
                       wall_time=time.perf_counter() - t0,
                       config=_config_echo(cfg))


# ---------------------------------------------------------------------------
# Decision robustness


def output_worst(yL: np.ndarray, yU: np.ndarray, c: int) -> float:
    """Sound lower bound on softmax_c over a logit box: own lower logit
    against every other class's upper logit, evaluated in log space."""
    yL = np.asarray(yL, dtype=float)
    yU = np.asarray(yU, dtype=float)
    others = np.delete(yU, c)
    m = max(float(yL[c]), float(others.max())) if others.size else float(yL[c])
    denom = np.exp(yL[c] - m) + np.exp(others - m).sum()
    return float(np.exp(yL[c] - m) / denom)


def output_best(yL: np.ndarray, yU: np.ndarray, c: int) -> float:
    """Mirror of output_worst: own upper logit against other lower logits."""
    yL = np.asarray(yL, dtype=float)
    yU = np.asarray(yU, dtype=float)
    others = np.delete(yL, c)
    m = max(float(yU[c]), float(others.max())) if others.size else float(yU[c])
    denom = np.exp(yU[c] - m) + np.exp(others - m).sum()
    return float(np.exp(yU[c] - m) / denom)


@dataclass(frozen=True)
class Task:
    kind: str                   # "classification" | "regression"
    class_index: int = 0

    @staticmethod
    def classification(c: int) -> "Task":
        return Task(kind="classification", class_index=c)

    @staticmethod
    def regression(index: int = 0) -> "Task":
        return Task(kind="regression", class_index=index)


def _sigma_range(task: Task, cfg: CertifyConfig):
    if task.kind == "classification":
        return 0.0, 1.0
    if cfg.sigma_floor is None or cfg.sigma_ceil is None:
        raise ValueError("regression decision bounds need explicit "
                         "sigma_floor/sigma_ceil output-range limits")
    return float(cfg.sigma_floor), float(cfg.sigma_ceil)


def _propagated_boxes(net, posterior, T, cfg):
    boxes, used = _prepare_boxes(posterior, cfg)

    def run(box):
        yL, yU = propagate(net, T, box, cfg.method)
        return box, yL, yU, box_mass(posterior, box)

    return _map(run, boxes, cfg.threads), used


def _dsafe_value(entries, posterior, cfg, psi_fn, sigma_bound, want_lower):
    """Assemble a decision bound from per-box output boxes.

    entries: list of (box, yL, yU, mass). psi_fn maps (yL, yU) to the sound
    per-box output bound. The posterior mass not covered by any box is
    charged at the co-domain bound sigma_bound.
    """
    if cfg.bonferroni is None:
        total = sum(m for _, _, _, m in entries)
        acc = sum(m * psi_fn(yL, yU) for _, yL, yU, m in entries)
    else:
        boxes = [b for b, _, _, _ in entries]
        psis = [psi_fn(yL, yU) for _, yL, yU, _ in entries]
        acc, total = _bonferroni_weighted(boxes, psis, posterior,
                                          cfg.bonferroni, want_lower)
    total = min(total, 1.0)
    return float(acc + sigma_bound * (1.0 - total)), float(total)


def _bonferroni_weighted(boxes, psis, posterior, depths, want_lower):
    """Truncated inclusion-exclusion for the mass-weighted output sum over
    overlapping boxes. Every correction term prices its intersection at the
    most conservative of the participating per-box bounds (max of lower
    bounds when lower-bounding, min of upper bounds when upper-bounding)."""
    depth_lower, depth_upper = depths
    depth = min(depth_lower if want_lower else depth_upper, len(boxes))
    pick = max if want_lower else min
    acc = 0.0
    mass = 0.0
    for j in range(1, depth + 1):
        sign = (-1.0) ** (j + 1)
        for combo in itertools.combinations(range(len(boxes)), j):
            inter = _intersect_all([boxes[i] for i in combo])
            if inter is None:
                continue
            m = box_mass(posterior, inter)
            acc += sign * m * pick(psis[i] for i in combo)
            mass += sign * m
    return acc, max(mass, 0.0)


def dsafe_lower(net: Network, posterior: Posterior, T: InputBox,
                cfg: CertifyConfig, task: Task) -> Certificate:
    """Sound lower bound on the posterior-predictive decision for one output."""
    t0 = time.perf_counter()
    sigma_lo, _ = _sigma_range(task, cfg)
    entries, used = _propagated_boxes(net, posterior, T, cfg)
    if task.kind == "classification":
        psi = lambda yL, yU: output_worst(yL, yU, task.class_index)
    else:
        psi = lambda yL, yU: max(float(yL[task.class_index]), sigma_lo)
    value, covered = _dsafe_value(entries, posterior, cfg, psi, sigma_lo,
                                  want_lower=True)
    return Certificate(property="dsafe", direction="lower", value=value,
                       covered_mass=covered, boxes_used=used,
                       boxes_kept=len(entries),
                       wall_time=time.perf_counter() - t0,
                       config=_config_echo(cfg),
                       extra={"task": task.kind, "index": task.class_index})


def dsafe_upper(net: Network, posterior: Posterior, T: InputBox,
                cfg: CertifyConfig, task: Task) -> Certificate:
    """Sound upper bound on the posterior-predictive decision for one output."""
    t0 = time.perf_counter()
    _, sigma_hi = _sigma_range(task, cfg)
    entries, used = _propagated_boxes(net, posterior, T, cfg)
    if task.kind == "classification":
        psi = lambda yL, yU: output_best(yL, yU, task.class_index)
    else:
        psi = lambda yL, yU: min(float(yU[task.class_index]), sigma_hi)
    value, covered = _dsafe_value(entries, posterior, cfg, psi, sigma_hi,
                                  want_lower=False)
    return Certificate(property="dsafe", direction="upper", value=value,
                       covered_mass=covered, boxes_used=used,
                       boxes_kept=len(entries),
                       wall_time=time.perf_counter() - t0,
                       config=_config_echo(cfg),
                       extra={"task": task.kind, "index": task.class_index})


def dsafe_bounds_all_classes(net: Network, posterior: Posterior, T: InputBox,
                             cfg: CertifyConfig):
    """Per-class decision bounds sharing one propagation pass.

    Returns (lowers, uppers) arrays of length output_dim.
    """
    entries, _ = _propagated_boxes(net, posterior, T, cfg)
    n = net.output_dim
    lowers, uppers = np.zeros(n), np.zeros(n)
    for c in range(n):
        lowers[c], _ = _dsafe_value(entries, posterior, cfg,
                                    lambda yL, yU: output_worst(yL, yU, c),
                                    0.0, want_lower=True)
        uppers[c], _ = _dsafe_value(entries, posterior, cfg,
                                    lambda yL, yU: output_best(yL, yU, c),
                                    1.0, want_lower=False)
    return lowers, uppers


def decision_robust(net: Network, posterior: Posterior, T: InputBox,
                    true_class: int, cfg: CertifyConfig) -> str:
    """Tri-state decision certificate over the predictive softmax mean.

    'certified-robust' when the true class's lower bound beats every other
    class's upper bound (or exceeds 0.5 outright), 'certified-wrong' when
    some other class certifiably dominates, 'unknown' otherwise. Ties are
    not certified.
    """
    lowers, uppers = dsafe_bounds_all_classes(net, posterior, T, cfg)
    others = [j for j in range(net.output_dim) if j != true_class]
    if lowers[true_class] > 0.5:
        return "certified-robust"
    if others and lowers[true_class] > max(uppers[j] for j in others):
        return "certified-robust"
    if any(lowers[j] > uppers[true_class] for j in others):
        return "certified-wrong"
    return "unknown"


def uncertainty_check(net: Network, posterior: Posterior, T: InputBox,
                      tau_uncertain: float, cfg: CertifyConfig) -> bool:
    """True iff no class's predictive mean can reach tau_uncertain on T."""
    if not 0.0 < tau_uncertain < 1.0:
        raise ValueError("tau_uncertain must lie in (0, 1)")
    _, uppers = dsafe_bounds_all_classes(net, posterior, T, cfg)
    return bool(np.all(uppers < tau_uncertain))


def median_bounds(entries) -> tuple[float, float]:
    """Bounds on the posterior-predictive median from per-box output boxes.

    entries: iterable of (yL, yU, mass) for pairwise-disjoint weight boxes.
    The uncaptured mass (1 - sum of masses) could sit anywhere, so it is
    pushed below the lowest box for the lower bound and above the highest
    for the upper bound; the bound is the output endpoint where the shifted
    cumulative mass crosses one half.
    """
    entries = [(float(a), float(b), float(m)) for a, b, m in entries]
    eta = 1.0 - sum(m for _, _, m in entries)
    if eta >= 0.5 - 1e-15:
        raise ValueError("captured mass must exceed one half to bound the median")
    lo_sorted = sorted(entries, key=lambda e: e[0])
    cum = eta
    median_lower = lo_sorted[-1][0]
    for yL, _, m in lo_sorted:
        cum += m
        if cum >= 0.5:
            median_lower = yL
            break
    hi_sorted = sorted(entries, key=lambda e: e[1], reverse=True)
    cum = eta
    median_upper = hi_sorted[-1][1]
    for _, yU, m in hi_sorted:
        cum += m
        if cum >= 0.5:
            median_upper = yU
            break
    return median_lower, median_upper


def k0_decision_check(lower_bounds, penalties) -> int | None:
    """Certified class under class-weighted penalties.

    Class i is certified when its decision lower bound clears the threshold
    K_i / sum(K). Several classes clearing at once means the penalty vector
    is inconsistent with the bounds, which is an error.
    """
    lower_bounds = np.asarray(lower_bounds, dtype=float)
    K = np.asarray(penalties, dtype=float)
    if K.shape != lower_bounds.shape:
        raise ValueError("one penalty per class required")
    if np.any(K <= 0):
        raise ValueError("penalties must be positive")
    thresholds = K / K.sum()
    cleared = np.flatnonzero(lower_bounds >= thresholds)
    if cleared.size > 1:
        raise ValueError(f"classes {cleared.tolist()} all clear their "
                         "thresholds; penalties are inconsistent")
    return int(cleared[0]) if cleared.size == 1 else None
