"""Fixture sets and runners for the numerical theorem checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rbvf import CentroidReadout
from .regression import target_function
from .theory import (
    GapDecay,
    GapReport,
    analyze_gap_decay,
    build_ufa_approximator,
    gap_vs_beta,
    plateau_deviation,
    ufa_error,
    verify_gap_1d,
)

BOX_1D = (-2.0, 2.0)


def random_1d_fixtures(count: int = 50, seed: int = 0) -> list[CentroidReadout]:
    """Frozen 1-D readouts: N in [2, 20], beta in [0.1, 3], locations and
    values uniform in [-2, 2]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 21))
        out.append(CentroidReadout(rng.uniform(*BOX_1D, size=(n, 1)), rng.uniform(-2.0, 2.0, size=n),
                                   float(rng.uniform(0.1, 3.0))))
    return out


def check_gap_1d(fixtures, resolution: int = 100_000) -> list[GapReport]:
    return [verify_gap_1d(r, [BOX_1D[0]], [BOX_1D[1]], resolution) for r in fixtures]


def check_plateau(fixtures, offsets=(1.0, 10.0)) -> list[float]:
    return [plateau_deviation(r.locations, r.values, r.beta, offsets) for r in fixtures]


# Two close centroids with nearly equal values and a low third one: at small
# beta the interpolant peaks between the pair, above either centroid value.
GAP_DECAY_LOCATIONS = np.array([[-1.0, 0.5], [1.0, 0.5], [0.0, 1.5]])
GAP_DECAY_VALUES = np.array([1.0, 0.9, -1.0])
GAP_DECAY_BOX = ((-3.0, -3.0), (3.0, 3.0))
GAP_DECAY_BETAS = (0.25, 1.0, 1.5, 2.0, 4.0, 8.0)


def check_gap_decay(resolution: int = 400, betas=GAP_DECAY_BETAS) -> tuple[list[GapReport], GapDecay]:
    reports = gap_vs_beta(GAP_DECAY_LOCATIONS, GAP_DECAY_VALUES, betas, *GAP_DECAY_BOX, resolution)
    return reports, analyze_gap_decay(reports)


UFA_BOX = ((-3.0, -3.0), (3.0, 3.0))


def _constant(a):
    return np.full(len(np.atleast_2d(a)), 1.5)


def _linear(a):
    a = np.atleast_2d(a)
    return 0.5 * a[:, 0] - 0.3 * a[:, 1] + 0.2


UFA_TARGETS = {
    "constant": (_constant, 0.0),
    "linear": (_linear, float(np.hypot(0.5, 0.3))),
    "regression": (target_function, None),  # Lipschitz constant estimated
}


@dataclass
class UfaRow:
    target: str
    epsilon: float
    n_centroids: int
    lipschitz: float
    mu: float
    beta0: float
    beta: float
    sup_error: float

    @property
    def passed(self) -> bool:
        return self.sup_error <= self.epsilon

    def row(self) -> dict:
        return {"target": self.target, "epsilon": self.epsilon, "N": self.n_centroids,
                "lipschitz": self.lipschitz, "mu": self.mu, "beta0": self.beta0, "beta": self.beta,
                "sup_error": self.sup_error, "passed": int(self.passed)}


UFA_COLUMNS = ["target", "epsilon", "N", "lipschitz", "mu", "beta0", "beta", "sup_error", "passed"]


def check_ufa(targets=tuple(UFA_TARGETS), epsilons=(0.5, 0.25), multipliers=(1.0, 2.0, 4.0),
              eval_resolution: int = 201) -> list[UfaRow]:
    rows = []
    for name in targets:
        fn, lip = UFA_TARGETS[name]
        for eps in epsilons:
            c = build_ufa_approximator(fn, *UFA_BOX, eps, lipschitz=lip)
            for m in multipliers:
                beta = m * c.beta0
                rows.append(UfaRow(name, eps, c.n_centroids, c.lipschitz, c.mu, c.beta0, beta,
                                   ufa_error(c, beta, eval_resolution)))
    return rows
