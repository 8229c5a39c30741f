"""Physics (ZIP polynomial), neural, and blended load models.

All forward functions are written against plain arithmetic so they accept
either floats/``numpy`` arrays or autodiff :class:`~neurozip.autodiff.Node`
objects as parameters. Per-sample quantities are column vectors (N x 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .errors import ModelError, OperatingPointError

ACTIVATIONS = ("tanh", "relu")
FEATURE_MODES = ("relative", "raw")

# column selectors for the two network outputs
_PICK_P = np.array([[1.0], [0.0]])
_PICK_Q = np.array([[0.0], [1.0]])


@dataclass
class ZipParams:
    alpha_p: float = 1 / 3
    alpha_i: float = 1 / 3
    alpha_z: float = 1 / 3
    beta_p: float = 1 / 3
    beta_i: float = 1 / 3
    beta_z: float = 1 / 3

    @property
    def alpha(self):
        return (self.alpha_p, self.alpha_i, self.alpha_z)

    @property
    def beta(self):
        return (self.beta_p, self.beta_i, self.beta_z)

    @classmethod
    def from_triples(cls, alpha, beta):
        return cls(*alpha, *beta)


@dataclass
class OperatingPoint:
    """Pre-disturbance state of the boundary bus (per unit, radians)."""

    v0: float
    p0: float
    q0: float
    theta0: float = 0.0

    def __post_init__(self):
        if not np.all(np.asarray(self.v0) > 0):
            raise OperatingPointError(f"operating-point voltage must be positive, got v0={self.v0}")


@dataclass
class MixingWeights:
    a: float = 0.5
    b: float = 0.5


@dataclass
class MlpModel:
    """Feed-forward network ``(2 features) -> hidden layers -> (P, Q)``.

    ``layers`` holds ``(weight, bias)`` pairs with weight shape
    ``(fan_in, fan_out)`` and bias shape ``(1, fan_out)``.
    """

    layers: list = field(default_factory=list)
    activation: str = "tanh"
    input_dim: int = 2
    output_dim: int = 2

    def validate(self):
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"unknown activation {self.activation!r}")
        if not self.layers:
            raise ModelError("network has no layers")
        width = self.input_dim
        for k, (w, b) in enumerate(self.layers):
            w_shape, b_shape = np.shape(ad.value_of(w)), np.shape(ad.value_of(b))
            if len(w_shape) != 2 or w_shape[0] != width:
                raise ModelError(f"layer {k}: weight shape {w_shape} does not accept width {width}")
            if tuple(b_shape) != (1, w_shape[1]):
                raise ModelError(f"layer {k}: bias shape {b_shape}, expected {(1, w_shape[1])}")
            width = w_shape[1]
        if width != self.output_dim:
            raise ModelError(f"network output width {width}, expected {self.output_dim}")
        return self

    @property
    def hidden(self):
        return tuple(np.shape(ad.value_of(w))[1] for w, _ in self.layers[:-1])


def init_mlp(rng: np.random.Generator, hidden=(20, 20, 20, 20), activation="tanh") -> MlpModel:
    """Scaled-uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases."""
    dims = [2, *hidden, 2]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-s, s, size=(fan_in, fan_out)), np.zeros((1, fan_out))))
    return MlpModel(layers, activation).validate()


def zip_forward(zip: ZipParams, op: OperatingPoint, v_t):
    """Static ZIP load response at voltage ``v_t``; returns ``(p_hat, q_hat)``."""
    if not np.all(np.asarray(op.v0) > 0):
        raise OperatingPointError(f"operating-point voltage must be positive, got v0={op.v0}")
    r = v_t / op.v0
    r2 = ad.square(r)
    p0, q0 = op.p0, op.q0
    p_hat = zip.alpha_p * p0 + zip.alpha_i * p0 * r + zip.alpha_z * p0 * r2
    q_hat = zip.beta_p * q0 + zip.beta_i * q0 * r + zip.beta_z * q0 * r2
    return p_hat, q_hat


def _affine(x, w, b):
    z = x @ w
    if isinstance(z, Node):
        # bias row replicated by a ones column; keeps broadcasting out of the tape
        return z + np.ones((z.shape[0], 1)) @ b
    return z + b


def mlp_forward(mlp: MlpModel, features):
    """Network outputs ``(p_tilde, q_tilde)`` for an N x 2 feature matrix.

    A single feature 2-vector returns two floats.
    """
    single = np.ndim(features) == 1
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != mlp.input_dim:
        raise ModelError(f"expected {mlp.input_dim} input features, got shape {x.shape}")
    act = ad.tanh if mlp.activation == "tanh" else ad.relu
    h = x
    last = len(mlp.layers) - 1
    for k, (w, b) in enumerate(mlp.layers):
        if np.shape(ad.value_of(w))[0] != np.shape(ad.value_of(h))[1]:
            raise ModelError(f"layer {k}: weight shape {np.shape(ad.value_of(w))} "
                             f"incompatible with input width {np.shape(ad.value_of(h))[1]}")
        h = _affine(h, w, b)
        if k != last:
            h = act(h)
    if np.shape(ad.value_of(h))[1] != mlp.output_dim:
        raise ModelError(f"network output width {np.shape(ad.value_of(h))[1]}, expected {mlp.output_dim}")
    p, q = h @ _PICK_P, h @ _PICK_Q
    if single:
        return float(ad.value_of(p)[0, 0]), float(ad.value_of(q)[0, 0])
    return p, q


def make_features(v, theta_v, op: OperatingPoint, mode="relative"):
    """Network inputs: ``(V/V0, theta - theta0)`` (relative) or ``(V, theta)`` (raw)."""
    v = np.asarray(v, dtype=np.float64).reshape(-1, 1)
    theta_v = np.asarray(theta_v, dtype=np.float64).reshape(-1, 1)
    if mode == "relative":
        v0 = np.asarray(op.v0, dtype=np.float64).reshape(-1, 1)
        th0 = np.asarray(op.theta0, dtype=np.float64).reshape(-1, 1)
        return np.hstack([v / v0, theta_v - th0])
    if mode == "raw":
        return np.hstack([v, theta_v])
    raise ModelError(f"unknown feature mode {mode!r}")


def combine(mix: MixingWeights, physics, neural):
    """Blend ``a * physics + (1 - a) * neural`` for P (weight ``a``) and Q (weight ``b``)."""
    p_hat, q_hat = physics
    p_tilde, q_tilde = neural
    p_fit = mix.a * p_hat + (1 - mix.a) * p_tilde
    q_fit = mix.b * q_hat + (1 - mix.b) * q_tilde
    return p_fit, q_fit


# flat parameter naming used by the optimizer and checkpoints

ZIP_NAMES = ("alpha_p", "alpha_i", "alpha_z", "beta_p", "beta_i", "beta_z")
MIX_NAMES = ("a", "b")


def pack(zip: ZipParams, mix: MixingWeights, mlp: MlpModel) -> dict[str, np.ndarray]:
    """Flatten the three components into ``{name: 2-D array}`` (copies)."""
    params = {f"zip.{n}": np.array([[getattr(zip, n)]], dtype=np.float64) for n in ZIP_NAMES}
    params.update({f"mix.{n}": np.array([[getattr(mix, n)]], dtype=np.float64) for n in MIX_NAMES})
    for k, (w, b) in enumerate(mlp.layers):
        params[f"mlp.{k}.weight"] = np.array(w, dtype=np.float64)
        params[f"mlp.{k}.bias"] = np.array(b, dtype=np.float64)
    return params


def unpack(params, activation="tanh"):
    """Inverse of :func:`pack`. Values may be arrays or tape nodes."""
    def scalar(v):
        return v if isinstance(v, Node) else float(np.asarray(v).reshape(-1)[0])

    zip = ZipParams(*(scalar(params[f"zip.{n}"]) for n in ZIP_NAMES))
    mix = MixingWeights(*(scalar(params[f"mix.{n}"]) for n in MIX_NAMES))
    n_layers = sum(1 for k in params if k.startswith("mlp.") and k.endswith(".weight"))
    layers = [(params[f"mlp.{k}.weight"], params[f"mlp.{k}.bias"]) for k in range(n_layers)]
    return zip, mix, MlpModel(layers, activation)


def is_weight_matrix(name: str) -> bool:
    """Names that receive decoupled weight decay: network weights only."""
    return name.startswith("mlp.") and name.endswith(".weight")
