"""Minimal dense-network core: MLP forward/backward in double precision,
bias-corrected Adam, a diagonal Gaussian policy head, soft target updates,
and bit-exact parameter checkpoints.

Inputs may be single vectors (d,) or batches (n, d); batched backward sums
gradients over rows, so upstream gradients carry any 1/n factor.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ValidationError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

_ACTIVATIONS = ("relu", "tanh", "linear")


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "linear":
        return z
    raise ValidationError(f"unknown activation {kind!r}")


def _act_deriv(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "linear":
        return np.ones_like(z)
    raise ValidationError(f"unknown activation {kind!r}")


@dataclass
class MlpParams:
    weights: list  # [(d_in, d_out), ...]
    biases: list   # [(d_out,), ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         self.hidden_activation, self.output_activation)


def init_mlp(dims, rng: np.random.Generator, hidden_activation: str = "relu",
             output_activation: str = "linear") -> MlpParams:
    """dims = [input, hidden..., output]; weights uniform in +-1/sqrt(fan_in),
    biases zero."""
    if len(dims) < 2:
        raise ValidationError("an MLP needs at least input and output dims")
    if hidden_activation not in _ACTIVATIONS or output_activation not in _ACTIVATIONS:
        raise ValidationError("unsupported activation")
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpParams(weights, biases, hidden_activation, output_activation)


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, dict]:
    """Affine + activation chain; the cache retains per-layer inputs and
    pre-activations for the backward pass."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.input_dim:
        raise ContractViolation(
            f"input dim {h.shape[1]} does not match net ({params.input_dim})")
    inputs, preacts, acts = [], [], []
    n = params.n_layers
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        kind = params.output_activation if i == n - 1 else params.hidden_activation
        inputs.append(h)
        z = h @ w + b
        h = _act(z, kind)
        preacts.append(z)
        acts.append(h)
    cache = {"inputs": inputs, "preacts": preacts, "acts": acts, "single": single}
    return (h[0] if single else h), cache


@dataclass
class MlpGrads:
    weights: list
    biases: list
    input: np.ndarray


def mlp_backward(params: MlpParams, cache: dict, upstream) -> MlpGrads:
    """Exact reverse-mode gradients of sum(output * upstream) w.r.t. every
    parameter and the input. For batches, parameter gradients sum over rows."""
    upstream = np.asarray(upstream, dtype=float)
    single = cache["single"]
    g = upstream[None, :] if single else upstream
    n = params.n_layers
    if len(cache["acts"]) != n or g.shape != cache["acts"][-1].shape:
        raise ContractViolation("cache/upstream do not match this network")
    for i, w in enumerate(params.weights):
        if (cache["inputs"][i].shape[-1] != w.shape[0]
                or cache["preacts"][i].shape[-1] != w.shape[1]):
            raise ContractViolation("cache does not belong to this network")
    grad_w = [None] * n
    grad_b = [None] * n
    for i in range(n - 1, -1, -1):
        kind = params.output_activation if i == n - 1 else params.hidden_activation
        delta = g * _act_deriv(cache["preacts"][i], cache["acts"][i], kind)
        grad_w[i] = cache["inputs"][i].T @ delta
        grad_b[i] = np.sum(delta, axis=0)
        g = delta @ params.weights[i].T
    return MlpGrads(weights=grad_w, biases=grad_b, input=(g[0] if single else g))


def zeros_like_params(params: MlpParams) -> MlpGrads:
    return MlpGrads([np.zeros_like(w) for w in params.weights],
                    [np.zeros_like(b) for b in params.biases],
                    np.zeros(params.input_dim))


def add_grads(a: MlpGrads, b: MlpGrads) -> MlpGrads:
    return MlpGrads([x + y for x, y in zip(a.weights, b.weights)],
                    [x + y for x, y in zip(a.biases, b.biases)],
                    a.input)


def scale_grads(g: MlpGrads, c: float) -> MlpGrads:
    return MlpGrads([c * w for w in g.weights], [c * b for b in g.biases],
                    c * g.input)


def grad_global_norm(grads_list) -> float:
    """L2 norm over every array in a list of MlpGrads / ndarrays."""
    total = 0.0
    for g in grads_list:
        arrays = (g.weights + g.biases) if isinstance(g, MlpGrads) else [g]
        for a in arrays:
            total += float(np.sum(a * a))
    return float(np.sqrt(total))


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8


def init_adam(params: MlpParams, beta1: float = 0.9, beta2: float = 0.999,
              eps_adam: float = 1e-8) -> AdamState:
    return AdamState(m_w=[np.zeros_like(w) for w in params.weights],
                     v_w=[np.zeros_like(w) for w in params.weights],
                     m_b=[np.zeros_like(b) for b in params.biases],
                     v_b=[np.zeros_like(b) for b in params.biases],
                     t=0, beta1=beta1, beta2=beta2, eps_adam=eps_adam)


def adam_step(opt: AdamState, params: MlpParams, grads: MlpGrads,
              lr: float) -> tuple[MlpParams, AdamState]:
    """Bias-corrected Adam descent step on the given gradients (negate the
    gradients for ascent). Pure: returns fresh parameter and state values."""
    t = opt.t + 1
    b1, b2, eps = opt.beta1, opt.beta2, opt.eps_adam
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_w, new_b = [], []
    m_w, v_w, m_b, v_b = [], [], [], []
    for w, gw, m, v in zip(params.weights, grads.weights, opt.m_w, opt.v_w):
        m = b1 * m + (1 - b1) * gw
        v = b2 * v + (1 - b2) * gw * gw
        new_w.append(w - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        m_w.append(m)
        v_w.append(v)
    for b, gb, m, v in zip(params.biases, grads.biases, opt.m_b, opt.v_b):
        m = b1 * m + (1 - b1) * gb
        v = b2 * v + (1 - b2) * gb * gb
        new_b.append(b - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        m_b.append(m)
        v_b.append(v)
    return (MlpParams(new_w, new_b, params.hidden_activation, params.output_activation),
            AdamState(m_w, v_w, m_b, v_b, t, b1, b2, eps))


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak blend theta' <- tau*theta + (1-tau)*theta'."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError("tau must lie in [0,1]")
    return MlpParams([tau * wo + (1 - tau) * wt
                      for wt, wo in zip(target.weights, online.weights)],
                     [tau * bo + (1 - tau) * bt
                      for bt, bo in zip(target.biases, online.biases)],
                     target.hidden_activation, target.output_activation)


@dataclass
class GaussianPolicy:
    """Stochastic policy: state-dependent mean in [0,1] (tanh head mapped by
    (x+1)/2) with a state-independent log standard deviation."""
    mean_net: MlpParams
    log_std: np.ndarray

    def __post_init__(self):
        self.log_std = np.clip(np.asarray(self.log_std, dtype=float),
                               LOG_STD_MIN, LOG_STD_MAX)


def policy_mean(policy: GaussianPolicy, state) -> tuple[np.ndarray, dict]:
    out, cache = mlp_forward(policy.mean_net, state)
    return (out + 1.0) / 2.0, cache


def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray,
                      actions: np.ndarray) -> np.ndarray:
    """Sum of per-dimension Gaussian log densities."""
    std = np.exp(log_std)
    z = (actions - mean) / std
    return np.sum(-log_std - 0.5 * np.log(2.0 * np.pi) - 0.5 * z * z, axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * np.log(2.0 * np.pi * np.e)))


def gaussian_sample(policy: GaussianPolicy, state, rng: np.random.Generator
                    ) -> tuple[np.ndarray, float]:
    """Reparameterized draw a = mean + std*xi with its log density."""
    mean, _ = policy_mean(policy, state)
    xi = rng.standard_normal(mean.shape)
    action = mean + np.exp(policy.log_std) * xi
    return action, float(gaussian_log_prob(mean, policy.log_std, action))


CHECKPOINT_VERSION = 1


def save_params(path: str, items: dict) -> None:
    """Checkpoint a mapping of names to MlpParams / ndarrays; float64 values
    round-trip bit-exactly through the npz container."""
    arrays = {"__version__": np.array(CHECKPOINT_VERSION)}
    meta = {}
    for name, item in items.items():
        if isinstance(item, MlpParams):
            meta[name] = {"kind": "mlp", "n_layers": item.n_layers,
                          "hidden_activation": item.hidden_activation,
                          "output_activation": item.output_activation}
            for i, (w, b) in enumerate(zip(item.weights, item.biases)):
                arrays[f"{name}.w{i}"] = w
                arrays[f"{name}.b{i}"] = b
        else:
            meta[name] = {"kind": "array"}
            arrays[name] = np.asarray(item)
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_params(path: str) -> dict:
    with np.load(path) as data:
        version = int(data["__version__"])
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {version}")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        out = {}
        for name, desc in meta.items():
            if desc["kind"] == "mlp":
                weights = [data[f"{name}.w{i}"] for i in range(desc["n_layers"])]
                biases = [data[f"{name}.b{i}"] for i in range(desc["n_layers"])]
                out[name] = MlpParams(weights, biases, desc["hidden_activation"],
                                      desc["output_activation"])
            else:
                out[name] = data[name]
    return out
