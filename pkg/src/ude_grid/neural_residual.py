"""Residual network: a small tanh MLP over (time, battery state).

Default shape 2 -> 16 -> 16 -> 1: two tanh hidden layers and a linear
output neuron. Inputs are scaled by a :class:`InputNormalizer` before
entering the first layer. Parameters live in one flat vector, laid out
layer-major, each layer weights-then-bias, weights row-major (output
neuron major); gradients use the same layout.

Gradients are hand-derived reverse-mode for this fixed architecture,
which keeps the solver-level reverse sweep transparent and free of any
autodiff dependency. ``forward`` and ``backward`` accept a scalar state
or a batch of states sharing one time value; in the batched case
``backward`` returns the parameter gradient summed over the batch and
the state gradient per sample (standard vector-Jacobian semantics).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LAYER_SIZES = (2, 16, 16, 1)


def param_count(layer_sizes) -> int:
    return sum(n_out * n_in + n_out for n_in, n_out in zip(layer_sizes, layer_sizes[1:]))


def _validate_layer_sizes(layer_sizes) -> tuple[int, ...]:
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output layer")
    if sizes[0] != 2:
        raise ValueError(f"first layer must take the 2 inputs (t, e), got {sizes[0]}")
    if sizes[-1] != 1:
        raise ValueError(f"last layer must emit 1 output, got {sizes[-1]}")
    if any(n < 1 for n in sizes):
        raise ValueError("all layer sizes must be >= 1")
    return sizes


@dataclass
class MlpParams:
    """Flat parameter vector plus the layer shapes that interpret it."""

    layer_sizes: tuple[int, ...] = DEFAULT_LAYER_SIZES
    theta: np.ndarray = field(default_factory=lambda: np.zeros(param_count(DEFAULT_LAYER_SIZES)))

    def __post_init__(self):
        self.layer_sizes = _validate_layer_sizes(self.layer_sizes)
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        expected = param_count(self.layer_sizes)
        if len(self.theta) != expected:
            raise ValueError(
                f"theta has {len(self.theta)} entries, layout {self.layer_sizes} needs {expected}"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta contains non-finite entries")


@dataclass
class InputNormalizer:
    """Input scales: the network sees (t / t_scale, e / e_scale)."""

    t_scale: float = 240.0
    e_scale: float = 50.0

    def __post_init__(self):
        if self.t_scale <= 0.0 or self.e_scale <= 0.0:
            raise ValueError("normalizer scales must be strictly positive")


def layer_views(flat: np.ndarray, layer_sizes) -> list[tuple[np.ndarray, np.ndarray]]:
    """Carve (W, b) views per layer out of a flat vector, without copying."""
    views = []
    offset = 0
    for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
        w = flat[offset : offset + n_out * n_in].reshape(n_out, n_in)
        offset += n_out * n_in
        b = flat[offset : offset + n_out]
        offset += n_out
        views.append((w, b))
    return views


def flatten_layers(layers) -> np.ndarray:
    """Inverse of :func:`layer_views`: concatenate (W, b) pairs into one vector."""
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=float).ravel())
        parts.append(np.asarray(b, dtype=float).ravel())
    return np.concatenate(parts)


def init_params(seed: int, layer_sizes=DEFAULT_LAYER_SIZES) -> MlpParams:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    sizes = _validate_layer_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        b = np.zeros(n_out)
        layers.append((w, b))
    return MlpParams(layer_sizes=sizes, theta=flatten_layers(layers))


def _input_batch(norm: InputNormalizer, t: float, e: np.ndarray) -> np.ndarray:
    x = np.empty((len(e), 2))
    x[:, 0] = t / norm.t_scale
    x[:, 1] = e / norm.e_scale
    return x


def _forward_layers(layers, norm: InputNormalizer, t: float, e: np.ndarray) -> np.ndarray:
    """Hot-path forward over a state batch at one time; no validation."""
    a = _input_batch(norm, t, e)
    for w, b in layers[:-1]:
        a = np.tanh(a @ w.T + b)
    w, b = layers[-1]
    return (a @ w.T + b)[:, 0]


def _backward_layers(
    layers,
    grad_layers,
    norm: InputNormalizer,
    t: float,
    e: np.ndarray,
    upstream: np.ndarray,
) -> np.ndarray:
    """Fused forward + reverse pass over a state batch at one time.

    Accumulates the parameter gradient (summed over the batch) into
    ``grad_layers`` in place and returns the per-sample gradient with
    respect to ``e``.
    """
    acts = [_input_batch(norm, t, e)]
    a = acts[0]
    for w, b in layers[:-1]:
        a = np.tanh(a @ w.T + b)
        acts.append(a)

    d = upstream[:, None]  # adjoint of the last layer's output
    for (w, _), (gw, gb), below in zip(layers[::-1], grad_layers[::-1], acts[::-1]):
        gw += d.T @ below
        gb += d.sum(axis=0)
        d = d @ w
        if below is not acts[0]:
            d = d * (1.0 - below * below)  # tanh' = 1 - tanh^2
    return d[:, 1] / norm.e_scale


def forward(params: MlpParams, norm: InputNormalizer, t: float, e) -> float | np.ndarray:
    """Evaluate the residual network at time ``t`` and state(s) ``e``.

    Scalar ``e`` yields a float; an array yields one output per entry.
    """
    t = float(t)
    e_arr = np.atleast_1d(np.asarray(e, dtype=float))
    if not math.isfinite(t) or not np.all(np.isfinite(e_arr)):
        raise ValueError("forward requires finite inputs")
    out = _forward_layers(layer_views(params.theta, params.layer_sizes), norm, t, e_arr)
    return float(out[0]) if np.isscalar(e) or np.ndim(e) == 0 else out


def backward(
    params: MlpParams,
    norm: InputNormalizer,
    t: float,
    e,
    upstream,
) -> tuple[np.ndarray, float | np.ndarray]:
    """Reverse-mode gradients of ``upstream * forward(t, e)``.

    Returns ``(grad_theta, grad_e)``: the gradient with respect to the flat
    parameter vector (same layout as ``theta``; summed over the batch when
    ``e`` is an array) and the gradient with respect to ``e`` (per sample,
    including the 1/e_scale normalization factor). The gradient with respect
    to ``t`` is not computed: time is not a state, so no consumer needs it.
    """
    t = float(t)
    scalar_in = np.isscalar(e) or np.ndim(e) == 0
    e_arr = np.atleast_1d(np.asarray(e, dtype=float))
    up_arr = np.atleast_1d(np.asarray(upstream, dtype=float))
    if up_arr.shape != e_arr.shape:
        if up_arr.size == 1:
            up_arr = np.full_like(e_arr, up_arr[0])
        else:
            raise ValueError("upstream shape does not match e")
    if not math.isfinite(t) or not np.all(np.isfinite(e_arr)) or not np.all(np.isfinite(up_arr)):
        raise ValueError("backward requires finite inputs")

    grad_theta = np.zeros_like(params.theta)
    layers = layer_views(params.theta, params.layer_sizes)
    grad_layers = layer_views(grad_theta, params.layer_sizes)
    grad_e = _backward_layers(layers, grad_layers, norm, t, e_arr, up_arr)
    return grad_theta, (float(grad_e[0]) if scalar_in else grad_e)


# -- checkpoint format --------------------------------------------------------


@dataclass
class Checkpoint:
    params: MlpParams
    norm: InputNormalizer
    seed: int
    iterations_trained: int


def save_checkpoint(
    path,
    params: MlpParams,
    norm: InputNormalizer,
    seed: int,
    iterations_trained: int,
) -> None:
    """Write a JSON checkpoint; float values round-trip exactly."""
    doc = {
        "layer_sizes": list(params.layer_sizes),
        "theta": params.theta.tolist(),
        "t_scale": norm.t_scale,
        "e_scale": norm.e_scale,
        "seed": int(seed),
        "iterations_trained": int(iterations_trained),
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r") as fh:
        doc = json.load(fh)
    for key in ("layer_sizes", "theta", "t_scale", "e_scale", "seed", "iterations_trained"):
        if key not in doc:
            raise ValueError(f"checkpoint {path} is missing field {key!r}")
    params = MlpParams(layer_sizes=tuple(doc["layer_sizes"]), theta=np.array(doc["theta"]))
    norm = InputNormalizer(t_scale=float(doc["t_scale"]), e_scale=float(doc["e_scale"]))
    return Checkpoint(
        params=params,
        norm=norm,
        seed=int(doc["seed"]),
        iterations_trained=int(doc["iterations_trained"]),
    )
