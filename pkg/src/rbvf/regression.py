"""Supervised fit of a state-free RBVF to r(a) = ||a|| (sin a0 + sin a1) / 2."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import NonFiniteError, ParamStore, RMSProp
from .rbvf import RbvfModel, rbf_interpolate
from .theory import evaluation_grid


def target_function(a) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    return np.linalg.norm(a, axis=1) * (np.sin(a[:, 0]) + np.sin(a[:, 1])) / 2.0


@dataclass
class RegressionTask:
    sample_count: int = 500
    low: tuple = (-3.0, -3.0)
    high: tuple = (3.0, 3.0)
    n_centroids: int = 20
    beta: float = 1.0
    test_fraction: float = 0.2
    steps: int = 2000
    learning_rate: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 2:
            raise ValueError("need at least two samples")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    train: np.ndarray  # indices
    test: np.ndarray


def generate_dataset(task: RegressionTask, target=target_function) -> Dataset:
    rng = np.random.default_rng(task.seed)
    a = rng.uniform(task.low, task.high, size=(task.sample_count, len(task.low)))
    y = np.asarray(target(a), dtype=np.float64)
    order = rng.permutation(task.sample_count)
    n_test = max(1, int(round(task.test_fraction * task.sample_count)))
    return Dataset(a, y, np.sort(order[n_test:]), np.sort(order[:n_test]))


@dataclass
class RegressionResult:
    task: RegressionTask
    model: RbvfModel
    params: ParamStore
    dataset: Dataset
    train_mse: list = field(default_factory=list)
    test_mse: list = field(default_factory=list)

    def readout(self):
        locations, values, _ = self.model.readout(self.params, DUMMY_STATE)
        return locations[0], values[0]

    def predict(self, a) -> np.ndarray:
        locations, values = self.readout()
        return rbf_interpolate(locations, values, np.atleast_2d(a), self.model.beta)

    def best_centroid(self) -> tuple[float, np.ndarray]:
        best, action, _ = self.model.max_over_centroids(self.params, DUMMY_STATE)
        return float(best[0]), action[0]


# The regression readout does not depend on a state; a constant input of 1
# with no hidden layers turns the network weights into free centroid
# locations and values.
DUMMY_STATE = np.ones((1, 1))


def make_regression_model(task: RegressionTask) -> RbvfModel:
    return RbvfModel(1, len(task.low), task.n_centroids, task.beta, task.low, task.high,
                     value_hidden=(), centroid_hidden=())


def _mse(model, params, a, y) -> tuple[float, object, np.ndarray]:
    q, cache = model.q_values(params, np.ones((len(a), 1)), a)
    err = q - y
    return float(np.mean(err * err)), cache, err


def fit_regression(task: RegressionTask, target=target_function) -> RegressionResult:
    data = generate_dataset(task, target)
    model = make_regression_model(task)
    params = model.init_params(np.random.default_rng(task.seed + 1))
    opt = RMSProp(task.learning_rate)
    a_tr, y_tr = data.inputs[data.train], data.targets[data.train]
    a_te, y_te = data.inputs[data.test], data.targets[data.test]
    result = RegressionResult(task, model, params, data)
    for _ in range(task.steps):
        loss, cache, err = _mse(model, params, a_tr, y_tr)
        if not np.isfinite(loss):
            raise NonFiniteError("regression loss diverged")
        result.train_mse.append(loss)
        result.test_mse.append(_mse(model, params, a_te, y_te)[0])
        params.zero_grad()
        model.backward(params, cache, 2.0 * err / len(err))
        opt.step(params)
    result.train_mse.append(_mse(model, params, a_tr, y_tr)[0])
    result.test_mse.append(_mse(model, params, a_te, y_te)[0])
    return result


def surface_rows(result: RegressionResult, resolution: int = 61, target=target_function) -> list[dict]:
    pts = evaluation_grid(result.task.low, result.task.high, resolution)
    truth = target(pts)
    pred = result.predict(pts)
    return [
        {"a0": p[0], "a1": p[1], "target": t, "prediction": q}
        for p, t, q in zip(pts, truth, pred)
    ]


SURFACE_COLUMNS = ["a0", "a1", "target", "prediction"]


def dense_target_max(task: RegressionTask, resolution: int = 601, target=target_function) -> float:
    return float(np.max(target(evaluation_grid(task.low, task.high, resolution))))
