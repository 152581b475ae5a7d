"""Numerical checks of the max-over-centroids gap and of grid-based universal
approximation for normalized negative-exponential RBF readouts.

All functions here work on frozen readouts (fixed locations and values) since
both properties are statements about the output layer alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .rbvf import (
    CentroidReadout,
    RbvfModel,
    centroid_readout,
    grid_max,
    q_at_centroids,
    rbf_interpolate,
)
from .nn import ParamStore

# Weights smaller than exp(-TRUNCATION_LOGIT) times the nearest centroid's
# weight are dropped by the windowed evaluator.
TRUNCATION_LOGIT = 50.0


@dataclass
class GapReport:
    beta: float
    grid_max: float
    centroid_max: float
    gap: float
    resolution: int
    dims: int
    n_centroids: int
    tolerance: float

    def row(self) -> dict:
        return {
            "dims": self.dims,
            "N": self.n_centroids,
            "beta": self.beta,
            "resolution": self.resolution,
            "grid_max": self.grid_max,
            "centroid_max": self.centroid_max,
            "gap": self.gap,
            "tolerance": self.tolerance,
        }


GAP_CSV_COLUMNS = ["dims", "N", "beta", "resolution", "grid_max", "centroid_max", "gap", "tolerance"]


def lipschitz_bound(values, beta: float) -> float:
    """A Lipschitz constant of the normalized RBF interpolant (L2 norm)."""
    values = np.asarray(values, dtype=np.float64)
    return float(beta * (values.max() - values.min()))


def readout_gap(locations, values, beta: float, low, high, resolution: int,
                refine: bool = True) -> GapReport:
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    gm = grid_max(locations, values, beta, low, high, resolution, refine=refine)
    cmax = float(q_at_centroids(locations[None], values[None], beta)[0].max())
    return GapReport(
        beta=float(beta),
        grid_max=gm.value,
        centroid_max=cmax,
        gap=gm.value - cmax,
        resolution=int(resolution),
        dims=locations.shape[1],
        n_centroids=len(values),
        tolerance=lipschitz_bound(values, beta) * gm.spacing,
    )


def verify_gap_1d(readout: CentroidReadout, low, high, resolution: int = 100_000) -> GapReport:
    """In one dimension the best centroid is a global maximizer; the reported
    gap should vanish up to ``tolerance``."""
    if readout.locations.shape[1] != 1:
        raise ValueError("verify_gap_1d needs a one-dimensional action space")
    if not (np.isfinite(readout.beta) and readout.beta > 0):
        raise ValueError("beta must be positive and finite")
    return readout_gap(readout.locations, readout.values, readout.beta, low, high, resolution)


def model_gap(model: RbvfModel, params: ParamStore, s, resolution: int) -> GapReport:
    r = centroid_readout(model, params, s)
    return readout_gap(r.locations, r.values, model.beta, model.action_low, model.action_high, resolution)


def plateau_deviation(locations, values, beta: float, offsets=(1.0, 10.0)) -> float:
    """Largest |Q(a) - Q(end centroid)| for queries beyond either end (1-D)."""
    loc = np.asarray(locations, dtype=np.float64).reshape(-1, 1)
    lo, hi = loc.min(), loc.max()
    offsets = np.asarray(offsets, dtype=np.float64)
    left = rbf_interpolate(loc, values, np.concatenate([[lo], lo - offsets])[:, None], beta)
    right = rbf_interpolate(loc, values, np.concatenate([[hi], hi + offsets])[:, None], beta)
    return float(max(np.abs(left[1:] - left[0]).max(), np.abs(right[1:] - right[0]).max()))


def gap_vs_beta(locations, values, betas, low, high, resolution: int = 400) -> list[GapReport]:
    return [readout_gap(locations, values, b, low, high, resolution) for b in betas]


def gap_upper_bound(locations, values, beta: float) -> float:
    """Delta * sum_{i != best} 1 / (1 + exp(beta * ||a_best - a_i||)).

    ``best`` is the centroid with the largest value and Delta the spread of
    the values.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    best = int(np.argmax(values))
    delta = values[best] - values.min()
    dist = np.linalg.norm(locations - locations[best], axis=1)
    others = np.delete(dist, best)
    return float(delta * np.sum(0.5 * (1.0 - np.tanh(0.5 * beta * others))))


@dataclass
class GapDecay:
    nonnegative: bool
    non_increasing: bool
    slope: float | None  # least-squares slope of log(gap) vs beta, or None
    n_fit: int


def analyze_gap_decay(reports: list[GapReport]) -> GapDecay:
    reports = sorted(reports, key=lambda r: r.beta)
    nonneg = all(r.gap >= -r.tolerance for r in reports)
    non_inc = all(b.gap <= a.gap + a.tolerance + b.tolerance for a, b in zip(reports, reports[1:]))
    fit = [r for r in reports if r.gap > 10.0 * r.tolerance]
    slope = None
    if len(fit) >= 2:
        slope = float(np.polyfit([r.beta for r in fit], np.log([r.gap for r in fit]), 1)[0])
    return GapDecay(nonneg, non_inc, slope, len(fit))


class GridTooLarge(ValueError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"construction needs {required} centroids, cap is {cap}")
        self.required = required
        self.cap = cap


@dataclass
class UfaConstruction:
    target: Callable
    low: np.ndarray
    high: np.ndarray
    lipschitz: float
    lipschitz_estimated: bool
    epsilon: float
    grid_shape: tuple[int, ...]
    spacing: np.ndarray
    centroids: np.ndarray
    values: np.ndarray
    radius: float
    sup_abs: float
    mu: float
    mu_analytic: float
    mu_method: str
    beta0: float
    notes: list = field(default_factory=list)

    @property
    def n_centroids(self) -> int:
        return len(self.values)

    def __call__(self, queries, beta: float) -> np.ndarray:
        return grid_interpolate(self, queries, beta)


def _grid_points(low, high, n_intervals) -> np.ndarray:
    axes = [np.linspace(lo, hi, n + 1) for lo, hi, n in zip(low, high, n_intervals)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def estimate_lipschitz(target: Callable, low, high, resolution: int | None = None) -> float:
    """Largest finite-difference gradient norm over the cells of a dense grid.

    Each cell's gradient uses forward differences from its lower corner, so a
    linear target is recovered exactly.
    """
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    d = len(low)
    if resolution is None:
        resolution = {1: 20000, 2: 600}.get(d, 40)
    pts = _grid_points(low, high, [resolution] * d)
    f = np.asarray(target(pts), dtype=np.float64).reshape((resolution + 1,) * d)
    h = (high - low) / resolution
    corner = tuple(slice(None, -1) for _ in range(d))
    sq = np.zeros((resolution,) * d)
    for k in range(d):
        ahead = tuple(slice(1, None) if j == k else slice(None, -1) for j in range(d))
        sq += ((f[ahead] - f[corner]) / h[k]) ** 2
    return float(np.sqrt(sq.max()))


def _ring_offsets(d: int, radius: int = 2) -> np.ndarray:
    offs = [o for o in product(range(-radius, radius + 1), repeat=d) if max(map(abs, o)) == radius]
    return np.array(offs, dtype=np.int64)


def _nearest_index(c: UfaConstruction, q: np.ndarray) -> np.ndarray:
    idx = np.rint((q - c.low) / c.spacing).astype(np.int64)
    return np.clip(idx, 0, np.asarray(c.grid_shape) - 1)


def _flat_index(c: UfaConstruction, idx: np.ndarray) -> np.ndarray:
    return np.ravel_multi_index(tuple(idx.T), c.grid_shape)


def _sampled_mu(c: UfaConstruction, n_samples: int, rng: np.random.Generator) -> float:
    """min over sampled queries of (distance to nearest far centroid - distance
    to own centroid). On a regular grid the closest far centroid always lies on
    the ring at Chebyshev index distance 2 around the query's own cell."""
    d = len(c.low)
    q = rng.uniform(c.low, c.high, size=(n_samples, d))
    own = _nearest_index(c, q)
    own_dist = np.linalg.norm(q - c.centroids[_flat_index(c, own)], axis=1)
    best = np.full(n_samples, np.inf)
    shape = np.asarray(c.grid_shape)
    for off in _ring_offsets(d):
        j = own + off
        ok = np.all((j >= 0) & (j < shape), axis=1)
        if not ok.any():
            continue
        dist = np.linalg.norm(q[ok] - c.centroids[_flat_index(c, j[ok])], axis=1)
        best[ok] = np.minimum(best[ok], dist)
    diff = best - own_dist
    diff = diff[np.isfinite(diff) & (diff > 0)]
    return float(diff.min()) if diff.size else np.inf


def build_ufa_approximator(target: Callable, low, high, epsilon: float, lipschitz: float | None = None,
                           max_centroids: int = 250_000, mu_method: str = "sampled",
                           mu_samples: int = 50_000, sup_resolution: int | None = None,
                           seed: int = 0) -> UfaConstruction:
    """Grid of centroids whose Voronoi cells have radius <= epsilon / (4L),
    with centroid values equal to the target, plus the smoothing threshold
    beta0 = -(1/mu) log(epsilon / (8 N sup|target|))."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if mu_method not in ("sampled", "analytic"):
        raise ValueError("mu_method must be 'sampled' or 'analytic'")
    low = np.atleast_1d(np.asarray(low, dtype=np.float64))
    high = np.atleast_1d(np.asarray(high, dtype=np.float64))
    if not np.all(low < high):
        raise ValueError("low must be strictly below high")
    d = len(low)
    estimated = lipschitz is None
    if estimated:
        lipschitz = estimate_lipschitz(target, low, high)
    if lipschitz < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    width = high - low
    if lipschitz == 0:
        n_intervals = np.ones(d, dtype=np.int64)
    else:
        # half-diagonal of a grid cell sqrt(d) * h / 2 must not exceed eps / (4L)
        h_max = epsilon / (2.0 * np.sqrt(d) * lipschitz)
        n_intervals = np.ceil(width / h_max * (1.0 - 1e-12)).astype(np.int64)
        n_intervals = np.maximum(n_intervals, 1)
    grid_shape = tuple(int(n) + 1 for n in n_intervals)
    required = int(np.prod(grid_shape))
    if required > max_centroids:
        raise GridTooLarge(required, max_centroids)
    spacing = width / n_intervals
    centroids = _grid_points(low, high, n_intervals)
    values = np.asarray(target(centroids), dtype=np.float64).reshape(-1)
    sup_res = sup_resolution or {1: 20000, 2: 400}.get(d, 30)
    dense = np.asarray(target(_grid_points(low, high, [sup_res] * d)), dtype=np.float64)
    sup_abs = float(max(np.abs(values).max(), np.abs(dense).max()))
    mu_analytic = float(1.5 * spacing.min() - 0.5 * np.linalg.norm(spacing))
    c = UfaConstruction(
        target=target, low=low, high=high, lipschitz=float(lipschitz), lipschitz_estimated=estimated,
        epsilon=float(epsilon), grid_shape=grid_shape, spacing=spacing, centroids=centroids,
        values=values, radius=float(0.5 * np.linalg.norm(spacing)), sup_abs=sup_abs,
        mu=np.nan, mu_analytic=mu_analytic, mu_method=mu_method, beta0=np.nan,
    )
    if mu_method == "sampled":
        c.mu = _sampled_mu(c, mu_samples, np.random.default_rng(seed))
    else:
        if mu_analytic <= 0:
            raise ValueError("grid spacing too anisotropic for the analytic margin")
        c.mu = mu_analytic
    c.beta0 = ufa_beta0(c.epsilon, c.n_centroids, c.sup_abs, c.mu)
    if estimated:
        c.notes.append("Lipschitz constant estimated by dense sampling")
    return c


def ufa_beta0(epsilon: float, n_centroids: int, sup_abs: float, mu: float) -> float:
    if sup_abs == 0 or not np.isfinite(mu):
        return 0.0  # the far-cell term vanishes
    return float(-np.log(epsilon / (8.0 * n_centroids * sup_abs)) / mu)


def grid_interpolate(c: UfaConstruction, queries, beta: float) -> np.ndarray:
    """Normalized RBF interpolant of a grid construction.

    For large beta only centroids within an index window around the query's
    own cell are summed; the window is wide enough that every dropped weight
    is below exp(-TRUNCATION_LOGIT) times the nearest centroid's weight.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    d = len(c.low)
    h_min = float(c.spacing.min())
    if beta > 0:
        k = int(np.ceil(TRUNCATION_LOGIT / (beta * h_min) + c.radius / h_min)) + 1
    else:
        k = None
    if k is None or (2 * k + 1) ** d >= c.n_centroids:
        return rbf_interpolate(c.centroids, c.values, queries, beta)
    offsets = np.array(list(product(range(-k, k + 1), repeat=d)), dtype=np.int64)
    shape = np.asarray(c.grid_shape)
    out = np.empty(len(queries))
    step = max(1, (1 << 20) // len(offsets))
    for start in range(0, len(queries), step):
        q = queries[start:start + step]
        idx = _nearest_index(c, q)[:, None, :] + offsets[None]
        ok = np.all((idx >= 0) & (idx < shape), axis=2)
        flat = np.ravel_multi_index(tuple(np.clip(idx, 0, shape - 1).transpose(2, 0, 1)), c.grid_shape)
        dist = np.linalg.norm(q[:, None, :] - c.centroids[flat], axis=2)
        logits = np.where(ok, -beta * dist, -np.inf)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        out[start:start + step] = np.sum(w * c.values[flat], axis=1) / w.sum(axis=1)
    return out


def evaluation_grid(low, high, resolution: int) -> np.ndarray:
    """``resolution`` points per dimension, endpoints included."""
    return _grid_points(low, high, [resolution - 1] * len(low))


def ufa_error(c: UfaConstruction, beta: float, eval_resolution: int = 201) -> float:
    """Sup over a dense evaluation grid of |target - interpolant|."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    pts = evaluation_grid(c.low, c.high, eval_resolution)
    truth = np.asarray(c.target(pts), dtype=np.float64).reshape(-1)
    return float(np.abs(truth - grid_interpolate(c, pts, beta)).max())
