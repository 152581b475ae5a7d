"""Dense networks in float64 numpy with hand-written backward passes.

Every layer records what it needs during ``forward`` in a cache object and
``backward`` consumes that cache, accumulating parameter gradients into the
:class:`ParamStore` and returning the gradient with respect to the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


class NonFiniteError(FloatingPointError):
    """Raised when a loss, gradient or parameter becomes NaN or infinite."""


class ParamStore:
    """Named float64 arrays with paired gradient buffers."""

    def __init__(self):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self.values:
            raise KeyError(f"parameter {name!r} already defined")
        value = np.array(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.values[name]
        except KeyError:
            raise KeyError(f"missing parameter entry {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.values.items()}

    def size(self) -> int:
        return sum(v.size for v in self.values.values())

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParamStore":
        """Deep copy of values; gradients start at zero."""
        out = ParamStore()
        for k, v in self.values.items():
            out.add(k, v.copy())
        return out

    def assign(self, other: "ParamStore"):
        """Copy values from ``other`` in place (shapes must agree)."""
        check_same_layout(self, other)
        for k, v in other.values.items():
            self.values[k][...] = v

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.values.values())

    def flat(self) -> np.ndarray:
        if not self.values:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self.values.values()])


def check_same_layout(a: ParamStore, b: ParamStore):
    if a.shapes() != b.shapes():
        raise ValueError("parameter stores have different names or shapes")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(int(d) != d or d <= 0 for d in dims):
            raise ValueError(f"layer sizes must be positive integers, got {dims}")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "output_dim": self.output_dim,
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
        }


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activate_backward(name: str, z: np.ndarray, out: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "relu":
        return g * (z > 0.0)
    if name == "tanh":
        return g * (1.0 - out * out)
    return g


@dataclass
class MlpCache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


class Mlp:
    """A fully connected network whose weights live in a shared ParamStore.

    Parameters are stored as ``{prefix}.W{k}`` with shape ``(fan_in, fan_out)``
    and ``{prefix}.b{k}`` with shape ``(fan_out,)``.
    """

    def __init__(self, spec: MlpSpec, prefix: str):
        self.spec = spec
        self.prefix = prefix

    def weight_names(self, k: int) -> tuple[str, str]:
        return f"{self.prefix}.W{k}", f"{self.prefix}.b{k}"

    def param_names(self) -> list[str]:
        return [n for k in range(len(self.spec.layer_dims)) for n in self.weight_names(k)]

    def init_params(self, params: ParamStore, rng: np.random.Generator):
        # Glorot-uniform weights, zero biases.
        for k, (fan_in, fan_out) in enumerate(self.spec.layer_dims):
            w_name, b_name = self.weight_names(k)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.add(w_name, rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            params.add(b_name, np.zeros(fan_out))

    def _activation(self, k: int) -> str:
        if k == len(self.spec.layer_dims) - 1:
            return self.spec.output_activation
        return self.spec.hidden_activation

    def forward(self, params: ParamStore, x) -> tuple[np.ndarray, MlpCache]:
        """Evaluate on a batch ``x`` of shape (B, input_dim) or a single vector."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.ndim != 2 or h.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"{self.prefix}: expected input of width {self.spec.input_dim}, got shape {x.shape}"
            )
        cache = MlpCache()
        for k in range(len(self.spec.layer_dims)):
            w_name, b_name = self.weight_names(k)
            z = h @ params[w_name] + params[b_name]
            out = _activate(self._activation(k), z)
            cache.inputs.append(h)
            cache.pre.append(z)
            cache.post.append(out)
            h = out
        return (h[0] if single else h), cache

    def backward(self, params: ParamStore, cache: MlpCache | None, grad_out) -> np.ndarray:
        """Accumulate parameter gradients and return d(loss)/d(input)."""
        if cache is None or not cache.inputs:
            raise RuntimeError(f"{self.prefix}: backward called without a recorded forward pass")
        g = np.asarray(grad_out, dtype=np.float64)
        single = g.ndim == 1
        if single:
            g = g[None, :]
        for k in reversed(range(len(self.spec.layer_dims))):
            w_name, b_name = self.weight_names(k)
            g = _activate_backward(self._activation(k), cache.pre[k], cache.post[k], g)
            params.grads[w_name] += cache.inputs[k].T @ g
            params.grads[b_name] += g.sum(axis=0)
            g = g @ params[w_name].T
        return g[0] if single else g


def mlp_forward(spec: MlpSpec, params: ParamStore, x, prefix: str = "mlp") -> np.ndarray:
    return Mlp(spec, prefix).forward(params, x)[0]


class RMSProp:
    """acc <- rho*acc + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(acc)+eps)."""

    def __init__(self, learning_rate: float, decay: float = 0.99, epsilon: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.learning_rate = float(learning_rate)
        self.decay = float(decay)
        self.epsilon = float(epsilon)
        self.accumulators: dict[str, np.ndarray] = {}

    def step(self, params: ParamStore):
        for name, g in params.grads.items():
            # a NaN or inf anywhere propagates into the sum
            if not np.isfinite(g.sum()):
                params.zero_grad()
                raise NonFiniteError(f"non-finite gradient for {name!r}; step rejected")
        updated = {}
        for name, g in params.grads.items():
            acc = self.accumulators.get(name)
            if acc is None:
                acc = np.zeros_like(g)
            acc = self.decay * acc + (1.0 - self.decay) * g * g
            new = params.values[name] - self.learning_rate * g / (np.sqrt(acc) + self.epsilon)
            if not np.isfinite(new.sum()):
                params.zero_grad()
                raise NonFiniteError(f"step produced non-finite values for {name!r}")
            updated[name] = (new, acc)
        for name, (new, acc) in updated.items():
            params.values[name][...] = new
            self.accumulators[name] = acc
        params.zero_grad()


def numeric_gradient(f: Callable[[], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f`` w.r.t. the array ``x`` (perturbed in place)."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Max elementwise |a - n| / (|a| + |n|), with the denominator floored.

    Central differences at h = 1e-5 carry roundoff near 1e-11, so entries whose
    true gradient is zero (the flat tails of an RBVF, for one) need the floor.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(floor, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(params: ParamStore, loss_fn: Callable[[ParamStore, bool], float], h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    ``loss_fn(params, backward)`` returns the scalar loss; when ``backward`` is
    true it must also accumulate gradients into ``params.grads``.
    """
    params.zero_grad()
    loss_fn(params, True)
    analytic = {k: g.copy() for k, g in params.grads.items()}
    params.zero_grad()
    worst = 0.0
    for name, value in params.values.items():
        numeric = numeric_gradient(lambda: loss_fn(params, False), value, h)
        worst = max(worst, relative_error(analytic[name], numeric))
    return worst


def polyak_update(target: ParamStore, online: ParamStore, rate: float):
    """target <- (1 - rate) * target + rate * online, elementwise."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    check_same_layout(target, online)
    for name, v in online.values.items():
        t = target.values[name]
        if rate == 1.0:
            t[...] = v
        elif rate > 0.0:
            t *= 1.0 - rate
            t += rate * v
