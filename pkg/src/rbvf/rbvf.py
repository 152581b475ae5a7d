"""Deep radial-basis value functions.

Q(s, a) = sum_i w_i(a) v_i(s) with w_i = softmax_i(-beta * ||a - a_i(s)||),
where the centroid locations a_i(s) and centroid values v_i(s) come from two
dense networks over the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Mlp, MlpSpec, ParamStore

NORM_FLOOR = 1e-8
_CHUNK = 1 << 16


def _softmax_neg_dist(dist: np.ndarray, beta: float) -> np.ndarray:
    logits = -beta * dist
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def _check_beta(beta: float):
    if not np.isfinite(beta) or beta < 0:
        raise ValueError(f"beta must be finite and nonnegative, got {beta}")


def rbf_weights(locations, a, beta: float) -> np.ndarray:
    """Normalized negative-exponential weights of each centroid for query ``a``.

    ``locations`` has shape (..., N, d) and ``a`` shape (..., d); leading
    dimensions broadcast. Returns shape (..., N).
    """
    _check_beta(beta)
    locations = np.asarray(locations, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (np.all(np.isfinite(locations)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite centroid location or query")
    dist = np.sqrt(np.sum((a[..., None, :] - locations) ** 2, axis=-1))
    return _softmax_neg_dist(dist, beta)


def rbf_interpolate(locations, values, queries, beta: float) -> np.ndarray:
    """Normalized RBF interpolant of one readout at many queries.

    locations (N, d), values (N,), queries (M, d) -> (M,).
    """
    _check_beta(beta)
    locations = np.asarray(locations, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    out = np.empty(len(queries))
    step = max(1, _CHUNK * 16 // max(1, locations.shape[0]))
    for start in range(0, len(queries), step):
        q = queries[start:start + step]
        dist = np.sqrt(np.sum((q[:, None, :] - locations[None]) ** 2, axis=-1))
        out[start:start + step] = _softmax_neg_dist(dist, beta) @ values
    return out


def unnormalized_rbf(locations, values, queries, beta: float) -> np.ndarray:
    """Plain RBF layer sum_i exp(-beta ||a - a_i||) v_i (reference only)."""
    locations = np.asarray(locations, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    dist = np.sqrt(np.sum((queries[:, None, :] - locations[None]) ** 2, axis=-1))
    return np.exp(-beta * dist) @ np.asarray(values, dtype=np.float64)


def q_at_centroids(locations, values, beta: float) -> np.ndarray:
    """Q evaluated at every centroid of each readout.

    locations (B, N, d), values (B, N) -> (B, N). Note this differs from
    ``values`` for finite beta because the other centroids carry weight.
    """
    diff = locations[:, :, None, :] - locations[:, None, :, :]
    if diff.shape[-1] == 1:
        dist = np.abs(diff[..., 0])
    else:
        dist = np.sqrt(np.einsum("bijk,bijk->bij", diff, diff))
    # the self-distance is exactly zero, so the largest logit is already 0
    w = np.exp(-beta * dist)
    # centring on the row max keeps equal values exactly equal, so ties
    # resolve to the lowest index
    top = values.max(axis=1, keepdims=True)
    return top + np.einsum("bij,bj->bi", w, values - top) / w.sum(axis=-1)


@dataclass
class RbfLayerCache:
    diff: np.ndarray
    dist: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    q: np.ndarray


def rbf_layer_forward(locations, values, actions, beta: float) -> tuple[np.ndarray, RbfLayerCache]:
    """Batched output layer: (B, N, d), (B, N), (B, d) -> q of shape (B,)."""
    diff = actions[:, None, :] - locations
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    w = _softmax_neg_dist(dist, beta)
    q = np.sum(w * values, axis=-1)
    return q, RbfLayerCache(diff, dist, w, values, q)


def rbf_layer_backward(cache: RbfLayerCache, grad_q, beta: float):
    """Gradients w.r.t. (locations, values, actions) given dL/dq of shape (B,)."""
    g = np.asarray(grad_q, dtype=np.float64)[:, None]
    w = cache.weights
    grad_values = g * w
    # d q / d logit_i = w_i (v_i - q); logit_i = -beta * dist_i
    grad_dist = -beta * g * w * (cache.values - cache.q[:, None])
    unit = cache.diff / np.maximum(cache.dist, NORM_FLOOR)[..., None]
    grad_diff = grad_dist[..., None] * unit
    grad_actions = grad_diff.sum(axis=1)
    grad_locations = -grad_diff
    return grad_locations, grad_values, grad_actions


@dataclass
class CentroidReadout:
    """Centroid locations (N, d) and raw centroid values (N,) for one state."""

    locations: np.ndarray
    values: np.ndarray
    beta: float

    def weights(self, a) -> np.ndarray:
        return rbf_weights(self.locations, a, self.beta)

    def q(self, a) -> float:
        return float(self.weights(a) @ self.values)

    def q_at_centroids(self) -> np.ndarray:
        return q_at_centroids(self.locations[None], self.values[None], self.beta)[0]


@dataclass
class RbvfCache:
    value_cache: object
    centroid_cache: object
    squashed: np.ndarray
    layer: RbfLayerCache | None = None


class RbvfModel:
    """Centroid-location network + centroid-value network + RBF output layer.

    The location network ends in tanh which is affinely mapped onto the action
    box, so every centroid is an executable action.
    """

    def __init__(self, state_dim: int, action_dim: int, n_centroids: int, beta: float,
                 action_low, action_high, value_hidden=(512, 512, 512),
                 centroid_hidden=(512,), hidden_activation: str = "relu"):
        _check_beta(beta)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.n_centroids = int(n_centroids)
        if self.n_centroids <= 0:
            raise ValueError("number of centroids must be positive")
        self.beta = float(beta)
        self.action_low = np.broadcast_to(np.asarray(action_low, dtype=np.float64), (self.action_dim,)).copy()
        self.action_high = np.broadcast_to(np.asarray(action_high, dtype=np.float64), (self.action_dim,)).copy()
        if not np.all(self.action_low < self.action_high):
            raise ValueError("action_low must be strictly below action_high")
        self.value_net = Mlp(
            MlpSpec(self.state_dim, tuple(value_hidden), self.n_centroids, hidden_activation, "identity"),
            "value",
        )
        self.centroid_net = Mlp(
            MlpSpec(self.state_dim, tuple(centroid_hidden), self.n_centroids * self.action_dim,
                    hidden_activation, "tanh"),
            "centroid",
        )

    @property
    def box_mid(self) -> np.ndarray:
        return 0.5 * (self.action_low + self.action_high)

    @property
    def box_half(self) -> np.ndarray:
        return 0.5 * (self.action_high - self.action_low)

    def describe(self) -> dict:
        return {
            "kind": "rbvf",
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "n_centroids": self.n_centroids,
            "beta": self.beta,
            "action_low": self.action_low.tolist(),
            "action_high": self.action_high.tolist(),
            "value_net": self.value_net.spec.to_dict(),
            "centroid_net": self.centroid_net.spec.to_dict(),
        }

    @classmethod
    def from_description(cls, info: dict) -> "RbvfModel":
        if info.get("kind") != "rbvf":
            raise ValueError(f"not an rbvf model description: kind={info.get('kind')!r}")
        v, c = info["value_net"], info["centroid_net"]
        return cls(info["state_dim"], info["action_dim"], info["n_centroids"], info["beta"],
                   info["action_low"], info["action_high"], tuple(v["hidden"]), tuple(c["hidden"]),
                   v["hidden_activation"])

    def init_params(self, rng: np.random.Generator, params: ParamStore | None = None) -> ParamStore:
        params = ParamStore() if params is None else params
        self.value_net.init_params(params, rng)
        self.centroid_net.init_params(params, rng)
        return params

    def _states(self, states) -> np.ndarray:
        s = np.asarray(states, dtype=np.float64)
        return s[None, :] if s.ndim == 1 else s

    def readout(self, params: ParamStore, states) -> tuple[np.ndarray, np.ndarray, RbvfCache]:
        """Locations (B, N, d) and values (B, N) for a batch of states."""
        s = self._states(states)
        values, vcache = self.value_net.forward(params, s)
        squashed, ccache = self.centroid_net.forward(params, s)
        squashed = squashed.reshape(len(s), self.n_centroids, self.action_dim)
        locations = self.box_mid + self.box_half * squashed
        return locations, values, RbvfCache(vcache, ccache, squashed)

    def q_values(self, params: ParamStore, states, actions) -> tuple[np.ndarray, RbvfCache]:
        locations, values, cache = self.readout(params, states)
        a = np.asarray(actions, dtype=np.float64).reshape(len(locations), self.action_dim)
        q, cache.layer = rbf_layer_forward(locations, values, a, self.beta)
        return q, cache

    def backward(self, params: ParamStore, cache: RbvfCache, grad_q) -> np.ndarray:
        """Accumulate dL/dtheta from dL/dq; returns dL/d(actions) of shape (B, d)."""
        if cache is None or cache.layer is None:
            raise RuntimeError("backward called without a recorded forward pass")
        g_loc, g_val, g_act = rbf_layer_backward(cache.layer, grad_q, self.beta)
        self.value_net.backward(params, cache.value_cache, g_val)
        g_squash = (g_loc * self.box_half).reshape(len(g_loc), -1)
        self.centroid_net.backward(params, cache.centroid_cache, g_squash)
        return g_act

    def max_over_centroids(self, params: ParamStore, states):
        """Best centroid per state: (best_value (B,), best_action (B, d), index (B,))."""
        locations, values, _ = self.readout(params, states)
        q = q_at_centroids(locations, values, self.beta)
        idx = np.argmax(q, axis=1)
        rows = np.arange(len(idx))
        return q[rows, idx], locations[rows, idx], idx


def rbvf_forward(model: RbvfModel, params: ParamStore, s, a) -> float:
    q, _ = model.q_values(params, np.asarray(s, dtype=np.float64)[None], np.asarray(a, dtype=np.float64)[None])
    return float(q[0])


def centroid_readout(model: RbvfModel, params: ParamStore, s) -> CentroidReadout:
    locations, values, _ = model.readout(params, np.asarray(s, dtype=np.float64)[None])
    return CentroidReadout(locations[0], values[0], model.beta)


def max_over_centroids(model: RbvfModel, params: ParamStore, s) -> tuple[float, np.ndarray, int]:
    best, action, idx = model.max_over_centroids(params, np.asarray(s, dtype=np.float64)[None])
    return float(best[0]), action[0], int(idx[0])


@dataclass
class GridMax:
    value: float
    argmax: np.ndarray
    spacing: float  # spacing of the finest grid that produced ``value``


def _grid_axes(low, high, intervals: int):
    return [np.linspace(lo, hi, intervals + 1) for lo, hi in zip(low, high)]


def _grid_search(locations, values, beta, axes) -> tuple[float, np.ndarray]:
    shape = tuple(len(ax) for ax in axes)
    total = int(np.prod(shape))
    step = max(1, _CHUNK * 16 // max(1, len(values)))
    best, best_point = -np.inf, None
    for start in range(0, total, step):
        flat = np.arange(start, min(total, start + step))
        idx = np.unravel_index(flat, shape)
        pts = np.stack([ax[i] for ax, i in zip(axes, idx)], axis=1)
        q = rbf_interpolate(locations, values, pts, beta)
        k = int(np.argmax(q))
        if q[k] > best:
            best, best_point = float(q[k]), pts[k]
    return best, best_point


def grid_max(locations, values, beta: float, low, high, resolution: int,
             refine: bool = True, refine_factor: int = 10) -> GridMax:
    """Brute-force max of a readout over the action box.

    The coarse grid has ``resolution`` intervals per dimension (resolution + 1
    points), so doubling the resolution nests the previous grid. With
    ``refine``, the +-1 cell neighbourhood of the coarse argmax is searched
    again with ``refine_factor * resolution`` intervals per dimension. The
    reported spacing is then the refined one, which bounds the error only
    when the maximizer lies inside that neighbourhood.
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    low = np.asarray(low, dtype=np.float64).reshape(-1)
    high = np.asarray(high, dtype=np.float64).reshape(-1)
    d = locations.shape[1]
    if d > 3:
        raise ValueError(f"grid oracle supports at most 3 action dimensions, got {d}")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    h = (high - low) / resolution
    best, point = _grid_search(locations, values, beta, _grid_axes(low, high, resolution))
    spacing = float(h.max())
    if refine:
        lo = np.maximum(low, point - h)
        hi = np.minimum(high, point + h)
        fine = refine_factor * resolution
        fbest, fpoint = _grid_search(locations, values, beta, _grid_axes(lo, hi, fine))
        if fbest >= best:
            best, point = fbest, fpoint
        spacing = float(((hi - lo) / fine).max())
    return GridMax(best, point, spacing)


def grid_max_oracle(model: RbvfModel, params: ParamStore, s, resolution: int, refine: bool = True) -> float:
    r = centroid_readout(model, params, s)
    return grid_max(r.locations, r.values, model.beta, model.action_low, model.action_high,
                    resolution, refine=refine).value
