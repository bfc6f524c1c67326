"""Monte Carlo oracle for the analytical model.

Each trial samples a base-station field on a finite disc, assigns every link
a LoS/NLoS state, draws unit-mean exponential fading, associates the user at
the origin with a serving station, and records the resulting SIR. Two
blockage modes are available:

* ``probabilistic`` draws each link's state as an independent Bernoulli with
  the analytical LoS probability; this mirrors the independence assumption
  of the closed-form analysis exactly.
* ``geometric`` samples an actual rectangle field shared by all links and
  tests occlusion per segment; the gap between the two modes measures the
  error of the independence assumption (per-link marginals agree in both).

Determinism: every trial owns a generator seeded from
(master_seed, trial_index), so results are bit-identical regardless of how
trials are partitioned across processes. Aggregation concatenates per-chunk
arrays in trial order before reducing.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .geometry import TAU, ParameterError, default_region_radius, segments_intersect_rectangles
from .pathloss import LinkKind, LinkState, NetworkParams, los_probability

__all__ = [
    "BlockageMode",
    "AssociationRule",
    "TrialConfig",
    "SirSample",
    "TrialBatch",
    "SimulationSummary",
    "run_trial",
    "run_batch",
    "associate_table1",
    "associate_argmax",
    "estimate_coverage",
    "estimate_rate",
    "estimate_association",
    "summarize",
    "estimate_laplace",
    "sample_sir_forced_k",
    "link_blockage_stats",
    "resolve_workers",
]

WORKERS_ENV = "SMALLCELL_WORKERS"
_CHUNK = 512  # fixed chunking keeps aggregation independent of worker count
_N_LOS_BINS = 12


class BlockageMode(enum.Enum):
    GEOMETRIC = "geometric"
    PROBABILISTIC = "probabilistic"


class AssociationRule(enum.Enum):
    TABLE1 = "table1"
    ARGMAX_NO_FADING = "argmax_no_fading"
    ARGMAX_WITH_FADING = "argmax_with_fading"


@dataclass(frozen=True)
class TrialConfig:
    params: NetworkParams
    trials: int = 10_000
    master_seed: int = 0
    blockage_mode: BlockageMode = BlockageMode.PROBABILISTIC
    association: AssociationRule = AssociationRule.TABLE1
    region_radius: float | None = None
    k_track: int = 8
    uniform_orientation: bool = False  # simulator-only extension of the model

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.k_track < 1:
            raise ParameterError("k_track must be at least 1")
        if not self.params.bs_intensity > 0.0:
            raise ParameterError("simulation needs a positive bs_intensity")

    @property
    def resolved_region_radius(self) -> float:
        if self.region_radius is not None:
            return float(self.region_radius)
        return default_region_radius(self.params.bs_intensity)


@dataclass(frozen=True)
class SirSample:
    sir_linear: float
    serving_k: int
    serving_state: LinkState


@dataclass
class TrialBatch:
    """Raw per-trial outcomes plus pooled per-link LoS statistics."""

    sir: np.ndarray
    serving_k: np.ndarray
    serving_los: np.ndarray
    disagree: np.ndarray
    resamples: int
    fallbacks: int
    bin_edges: np.ndarray
    bin_total: np.ndarray
    bin_los: np.ndarray
    bin_pred: np.ndarray

    @property
    def trials(self) -> int:
        return self.sir.size

    @staticmethod
    def merge(parts: list["TrialBatch"]) -> "TrialBatch":
        first = parts[0]
        return TrialBatch(
            sir=np.concatenate([p.sir for p in parts]),
            serving_k=np.concatenate([p.serving_k for p in parts]),
            serving_los=np.concatenate([p.serving_los for p in parts]),
            disagree=np.concatenate([p.disagree for p in parts]),
            resamples=sum(p.resamples for p in parts),
            fallbacks=sum(p.fallbacks for p in parts),
            bin_edges=first.bin_edges,
            bin_total=np.sum([p.bin_total for p in parts], axis=0),
            bin_los=np.sum([p.bin_los for p in parts], axis=0),
            bin_pred=np.sum([p.bin_pred for p in parts], axis=0),
        )


@dataclass
class SimulationSummary:
    coverage_at_threshold: float
    coverage_half_width: float
    mean_rate: float
    rate_half_width: float
    association_hist: np.ndarray
    los_frequency_by_bin: list[tuple[float, float, float, float, int]]
    disagreement_rate: float
    resample_rate: float
    trials: int


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, trial_index)))


# --- association rules --------------------------------------------------------

def _first_peak(powers: np.ndarray) -> tuple[int, bool]:
    """First index whose power is >= the next one; argmax fallback if none."""
    ge = powers[:-1] >= powers[1:]
    if ge.any():
        return int(np.argmax(ge)), False
    return int(np.argmax(powers)), True


def associate_table1(links) -> int:
    """Serving index (1-based) for the sequential power-peak rule.

    ``links`` is an ordered-by-distance sequence of (distance, exponent)
    pairs. The first station whose fading-free power beats its successor is
    selected; a fully ascending sequence (possible only in a finite window)
    falls back to the global argmax.
    """
    arr = np.asarray([[r, a] for r, a in links], dtype=float)
    if arr.shape[0] < 2:
        raise ParameterError("need at least two links")
    powers = arr[:, 0] ** (-arr[:, 1])
    idx, _ = _first_peak(powers)
    return idx + 1


def associate_argmax(links, fading=None) -> int:
    """Serving index (1-based) that maximizes received power."""
    arr = np.asarray([[r, a] for r, a in links], dtype=float)
    powers = arr[:, 0] ** (-arr[:, 1])
    if fading is not None:
        powers = powers * np.asarray(fading, dtype=float)
    return int(np.argmax(powers)) + 1


# --- one trial ------------------------------------------------------------------

def _draw_stations(cfg: TrialConfig, rng, minimum: int = 2):
    radius = cfg.resolved_region_radius
    mean = cfg.params.bs_intensity * math.pi * radius * radius
    resamples = 0
    while True:
        n = rng.poisson(mean)
        if n < minimum:
            resamples += 1
            continue
        r = radius * np.sqrt(rng.random(n))
        theta = TAU * rng.random(n)
        order = np.argsort(r, kind="stable")
        r = r[order]
        if np.any(np.diff(r) == 0.0):
            resamples += 1
            continue
        return r, theta[order], resamples


def _blockage_field(cfg: TrialConfig, rng):
    p = cfg.params
    half_diag = 0.5 * math.hypot(p.blockage_length, p.blockage_width)
    radius = cfg.resolved_region_radius + half_diag
    n = rng.poisson(p.blockage_intensity * math.pi * radius * radius)
    rr = radius * np.sqrt(rng.random(n))
    tt = TAU * rng.random(n)
    xy = np.column_stack([rr * np.cos(tt), rr * np.sin(tt)])
    if cfg.uniform_orientation:
        phi = TAU * rng.random(n)
    else:
        phi = np.full(n, p.blockage_orientation)
    return xy, phi


class _CellGrid:
    """Hash of blockage centers on square cells for segment queries.

    Cell size is at least the rectangle half diagonal, so every rectangle
    that can touch a segment lies within one cell of the segment's path.
    """

    def __init__(self, xy: np.ndarray, cell: float):
        self.cell = cell
        self.xy = xy
        ix = np.floor(xy[:, 0] / cell).astype(np.int64)
        iy = np.floor(xy[:, 1] / cell).astype(np.int64)
        self.offset = int(min(ix.min(initial=0), iy.min(initial=0))) - 1
        self.span = int(max(ix.max(initial=0), iy.max(initial=0))) - self.offset + 2
        keys = (ix - self.offset) * self.span + (iy - self.offset)
        self.order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[self.order]

    def candidates(self, ax, ay, bx, by) -> np.ndarray:
        seg_len = math.hypot(bx - ax, by - ay)
        steps = max(2, int(seg_len / (0.5 * self.cell)) + 2)
        t = np.linspace(0.0, 1.0, steps)
        px = ax + t * (bx - ax)
        py = ay + t * (by - ay)
        ix = np.floor(px / self.cell).astype(np.int64)
        iy = np.floor(py / self.cell).astype(np.int64)
        cells = np.unique(ix * (1 << 32) + iy)
        ix = cells >> 32
        iy = cells - (ix << 32)
        neigh = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                neigh.append((ix + dx - self.offset) * self.span + (iy + dy - self.offset))
        keys = np.unique(np.concatenate(neigh))
        lo = np.searchsorted(self.sorted_keys, keys, side="left")
        hi = np.searchsorted(self.sorted_keys, keys, side="right")
        picks = [self.order[a:b] for a, b in zip(lo, hi) if b > a]
        if not picks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(picks)


def _geometric_los(cfg: TrialConfig, r, theta, rng) -> np.ndarray:
    p = cfg.params
    xy, phi = _blockage_field(cfg, rng)
    n_links = r.size
    if xy.shape[0] == 0:
        return np.ones(n_links, dtype=bool)
    half_diag = 0.5 * math.hypot(p.blockage_length, p.blockage_width)
    grid = _CellGrid(xy, cell=max(p.blockage_length, p.blockage_width, 2.0 * half_diag))
    los = np.empty(n_links, dtype=bool)
    bx = r * np.cos(theta)
    by = r * np.sin(theta)
    for i in range(n_links):
        cand = grid.candidates(0.0, 0.0, bx[i], by[i])
        if cand.size == 0:
            los[i] = True
            continue
        hit = segments_intersect_rectangles(
            0.0, 0.0, bx[i], by[i],
            xy[cand, 0], xy[cand, 1],
            p.blockage_length, p.blockage_width, phi[cand],
        )
        los[i] = not bool(hit.any())
    return los


def _simulate_one(cfg: TrialConfig, trial_index: int) -> dict:
    """One network draw; the generator call order is part of the contract."""
    p = cfg.params
    rng = _trial_rng(cfg.master_seed, trial_index)
    r, theta, resamples = _draw_stations(cfg, rng)
    if cfg.blockage_mode is BlockageMode.PROBABILISTIC:
        los = rng.random(r.size) < np.asarray(los_probability(r, theta, p))
    else:
        los = _geometric_los(cfg, r, theta, rng)
    h = rng.exponential(1.0, r.size)

    alpha = np.where(los, p.alpha_los, p.alpha_nlos)
    power = r ** (-alpha)
    table1_idx, fallback = _first_peak(power)
    argmax_idx = int(np.argmax(power))
    if cfg.association is AssociationRule.TABLE1:
        serve = table1_idx
    elif cfg.association is AssociationRule.ARGMAX_NO_FADING:
        serve = argmax_idx
    else:
        serve = int(np.argmax(power * h))

    received = power * h
    interference = float(received.sum() - received[serve])
    sir = float(received[serve] / interference)
    return {
        "sir": sir,
        "serving_k": serve + 1,
        "serving_los": bool(los[serve]),
        "disagree": table1_idx != argmax_idx,
        "resamples": resamples,
        "fallback": fallback,
        "r": r,
        "theta": theta,
        "los": los,
        "h": h,
        "power": power,
    }


def run_trial(cfg: TrialConfig, trial_index: int) -> SirSample:
    """Run a single trial; bit-identical for fixed (master_seed, trial_index)."""
    if trial_index >= cfg.trials:
        raise ParameterError("trial_index out of range")
    out = _simulate_one(cfg, trial_index)
    kind = LinkKind.LOS if out["serving_los"] else LinkKind.NLOS
    p = cfg.params
    exponent = p.alpha_los if out["serving_los"] else p.alpha_nlos
    r_serve = float(out["r"][out["serving_k"] - 1])
    state = LinkState(kind, exponent, r_serve ** (-exponent))
    return SirSample(out["sir"], out["serving_k"], state)


def _run_chunk(cfg: TrialConfig, start: int, stop: int) -> TrialBatch:
    n = stop - start
    sir = np.empty(n)
    serving_k = np.empty(n, dtype=np.int64)
    serving_los = np.empty(n, dtype=bool)
    disagree = np.empty(n, dtype=bool)
    resamples = 0
    fallbacks = 0
    edges = np.linspace(0.0, cfg.resolved_region_radius, _N_LOS_BINS + 1)
    bin_total = np.zeros(_N_LOS_BINS, dtype=np.int64)
    bin_los = np.zeros(_N_LOS_BINS, dtype=np.int64)
    bin_pred = np.zeros(_N_LOS_BINS)
    for i, idx in enumerate(range(start, stop)):
        out = _simulate_one(cfg, idx)
        sir[i] = out["sir"]
        serving_k[i] = out["serving_k"]
        serving_los[i] = out["serving_los"]
        disagree[i] = out["disagree"]
        resamples += out["resamples"]
        fallbacks += out["fallback"]
        which = np.clip(np.digitize(out["r"], edges) - 1, 0, _N_LOS_BINS - 1)
        np.add.at(bin_total, which, 1)
        np.add.at(bin_los, which, out["los"].astype(np.int64))
        np.add.at(bin_pred, which, np.asarray(los_probability(out["r"], out["theta"], cfg.params)))
    return TrialBatch(
        sir, serving_k, serving_los, disagree, resamples, fallbacks,
        edges, bin_total, bin_los, bin_pred,
    )


def _run_chunk_star(args) -> TrialBatch:
    return _run_chunk(*args)


def run_batch(cfg: TrialConfig, workers: int | None = 1) -> TrialBatch:
    """All trials of ``cfg``, optionally across processes.

    The chunking is fixed, each trial has its own seed, and chunks are merged
    in order, so the result does not depend on the worker count.
    """
    n_workers = resolve_workers(workers)
    bounds = [(s, min(s + _CHUNK, cfg.trials)) for s in range(0, cfg.trials, _CHUNK)]
    if n_workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(cfg, a, b) for a, b in bounds]
    else:
        jobs = [(cfg, a, b) for a, b in bounds]
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_run_chunk_star, jobs))
    return TrialBatch.merge(parts)


# --- estimators -----------------------------------------------------------------

def _mean_half_width(x: np.ndarray) -> tuple[float, float]:
    mean = float(x.mean())
    if x.size < 2:
        return mean, float("inf")
    return mean, float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def _binomial_half_width(p: float, n: int) -> float:
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else float("inf")


@dataclass
class CoverageEstimate:
    threshold: float
    probability: float
    half_width: float
    per_k: dict
    trials: int


def estimate_coverage(
    cfg: TrialConfig,
    threshold: float,
    batch: TrialBatch | None = None,
    workers: int | None = 1,
) -> CoverageEstimate:
    """Empirical P(SIR > threshold), overall and split by serving order."""
    if batch is None:
        batch = run_batch(cfg, workers)
    covered = batch.sir > threshold
    p = float(covered.mean())
    per_k = {}
    for k in range(1, cfg.k_track + 1):
        mask = batch.serving_k == k
        n_k = int(mask.sum())
        if n_k:
            pk = float(covered[mask].mean())
            per_k[k] = (pk, _binomial_half_width(pk, n_k), n_k)
    return CoverageEstimate(
        threshold, p, _binomial_half_width(p, batch.trials), per_k, batch.trials
    )


def estimate_rate(
    cfg: TrialConfig,
    batch: TrialBatch | None = None,
    workers: int | None = 1,
) -> tuple[float, float]:
    """Sample mean of log2(1 + SIR) with a 95% half-width."""
    if batch is None:
        batch = run_batch(cfg, workers)
    return _mean_half_width(np.log2(1.0 + batch.sir))


@dataclass
class AssociationSummary:
    frequencies: np.ndarray  # index k-1 for k = 1..k_track, last slot = beyond
    half_widths: np.ndarray
    disagreement_rate: float
    fallback_rate: float
    resample_rate: float
    trials: int


def estimate_association(
    cfg: TrialConfig,
    batch: TrialBatch | None = None,
    workers: int | None = 1,
) -> AssociationSummary:
    if batch is None:
        batch = run_batch(cfg, workers)
    n = batch.trials
    freqs = np.empty(cfg.k_track + 1)
    for k in range(1, cfg.k_track + 1):
        freqs[k - 1] = float((batch.serving_k == k).mean())
    freqs[-1] = float((batch.serving_k > cfg.k_track).mean())
    hw = np.array([_binomial_half_width(f, n) for f in freqs])
    return AssociationSummary(
        freqs,
        hw,
        float(batch.disagree.mean()),
        batch.fallbacks / n,
        batch.resamples / max(n + batch.resamples, 1),
        n,
    )


def summarize(
    cfg: TrialConfig,
    threshold: float | None = None,
    workers: int | None = 1,
) -> SimulationSummary:
    """One batch, all aggregate statistics."""
    t = cfg.params.sir_threshold if threshold is None else threshold
    batch = run_batch(cfg, workers)
    cov = estimate_coverage(cfg, t, batch)
    rate, rate_hw = estimate_rate(cfg, batch)
    assoc = estimate_association(cfg, batch)
    bins = []
    for i in range(_N_LOS_BINS):
        total = int(batch.bin_total[i])
        if total == 0:
            continue
        bins.append(
            (
                float(batch.bin_edges[i]),
                float(batch.bin_edges[i + 1]),
                batch.bin_los[i] / total,
                batch.bin_pred[i] / total,
                total,
            )
        )
    return SimulationSummary(
        cov.probability,
        cov.half_width,
        rate,
        rate_hw,
        assoc.frequencies,
        bins,
        assoc.disagreement_rate,
        assoc.resample_rate,
        batch.trials,
    )


# --- targeted estimators for cross-validation ------------------------------------

def estimate_laplace(
    params: NetworkParams,
    s: float,
    r_k: float,
    trials: int,
    master_seed: int = 0,
    region_radius: float | None = None,
) -> tuple[float, float]:
    """MC estimate of E[exp(-s I)] with interferers beyond r_k.

    Samples the PPP on the annulus (r_k, region], assigns independent link
    states, sums Rayleigh-faded powers. Returns (mean, standard error).
    """
    radius = region_radius if region_radius is not None else default_region_radius(
        params.bs_intensity
    )
    if not radius > r_k:
        raise ParameterError("region radius must exceed r_k")
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, 0x1A9)))
    area = math.pi * (radius * radius - r_k * r_k)
    counts = rng.poisson(params.bs_intensity * area, size=trials)
    total = int(counts.sum())
    r = np.sqrt(r_k * r_k + (radius * radius - r_k * r_k) * rng.random(total))
    theta = TAU * rng.random(total)
    los = rng.random(total) < np.asarray(los_probability(r, theta, params))
    alpha = np.where(los, params.alpha_los, params.alpha_nlos)
    contrib = r ** (-alpha) * rng.exponential(1.0, total)
    ids = np.repeat(np.arange(trials), counts)
    interference = np.bincount(ids, weights=contrib, minlength=trials)
    vals = np.exp(-s * interference)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials))


def sample_sir_forced_k(
    params: NetworkParams,
    k: int,
    trials: int,
    master_seed: int = 0,
    blockage_mode: BlockageMode = BlockageMode.PROBABILISTIC,
    region_radius: float | None = None,
    workers: int | None = 1,
) -> np.ndarray:
    """SIR samples with the serving station forced to the k-th nearest.

    This is the empirical counterpart of the order-conditioned coverage
    formula; interference comes from every other station in the region,
    including the k-1 closer ones that the analytical transform omits.
    """
    cfg = TrialConfig(
        params=params,
        trials=trials,
        master_seed=master_seed,
        blockage_mode=blockage_mode,
        region_radius=region_radius,
    )
    n_workers = resolve_workers(workers)
    bounds = [(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]
    jobs = [(cfg, k, a, b) for a, b in bounds]
    if n_workers == 1 or len(bounds) == 1:
        parts = [_forced_chunk(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_forced_chunk_star, jobs))
    return np.concatenate(parts)


def _forced_chunk(cfg: TrialConfig, k: int, start: int, stop: int) -> np.ndarray:
    p = cfg.params
    out = np.empty(stop - start)
    for i, idx in enumerate(range(start, stop)):
        rng = _trial_rng(cfg.master_seed, idx)
        r, theta, _ = _draw_stations(cfg, rng, minimum=k + 1)
        if cfg.blockage_mode is BlockageMode.PROBABILISTIC:
            los = rng.random(r.size) < np.asarray(los_probability(r, theta, p))
        else:
            los = _geometric_los(cfg, r, theta, rng)
        h = rng.exponential(1.0, r.size)
        alpha = np.where(los, p.alpha_los, p.alpha_nlos)
        received = r ** (-alpha) * h
        serve = k - 1
        out[i] = received[serve] / (received.sum() - received[serve])
    return out


def _forced_chunk_star(args) -> np.ndarray:
    return _forced_chunk(*args)


def link_blockage_stats(
    r: float,
    theta: float,
    params: NetworkParams,
    draws: int,
    master_seed: int = 0,
    uniform_orientation: bool = False,
) -> np.ndarray:
    """Blocking-rectangle counts for one link over independent field draws.

    The field is sampled only where it can matter: a box around the segment
    inflated by the rectangle half diagonal (in the segment frame, using the
    rotation equivariance of the intersection test). Returns the counts; LoS
    frequency is ``(counts == 0).mean()``.
    """
    if not r > 0.0:
        raise ParameterError("link length must be positive")
    p = params
    half_diag = 0.5 * math.hypot(p.blockage_length, p.blockage_width)
    margin = half_diag * (1.0 + 1e-12) + 1e-9
    area = (r + 2.0 * margin) * (2.0 * margin)
    rng = np.random.default_rng(np.random.SeedSequence((master_seed, 0xB10C)))
    counts = rng.poisson(p.blockage_intensity * area, size=draws)
    total = int(counts.sum())
    cx = -margin + (r + 2.0 * margin) * rng.random(total)
    cy = -margin + 2.0 * margin * rng.random(total)
    if uniform_orientation:
        phi = TAU * rng.random(total)
    else:
        # segment frame: the relative angle is all that matters
        phi = np.full(total, p.blockage_orientation - theta)
    hits = segments_intersect_rectangles(
        0.0, 0.0, r, 0.0, cx, cy, p.blockage_length, p.blockage_width, phi
    )
    ids = np.repeat(np.arange(draws), counts)
    return np.bincount(ids, weights=hits.astype(float), minlength=draws).astype(np.int64)
