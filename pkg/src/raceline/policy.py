"""Three-layer MLP driving policy, Gaussian mutation, and binary I/O.

A policy is an immutable bundle of three weight matrices and biases with
tanh activations throughout, so both outputs land in (-1, 1) and map
directly onto a ControlCommand. The forward pass shares its compiled
kernel with the rollout loop.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _sim
from .validation import check_seed
from .vehicle import ControlCommand

MAGIC = b"RLEV1"

DEFAULT_LAYER_SIZES = (7, 16, 16, 2)


@dataclass(frozen=True)
class MlpPolicy:
    """Dense [n_v, h1, h2, 2] network; weights row-major (out, in)."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) != 4:
            raise ValueError(f"expected 4 layer sizes (3 weight layers), got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] != 2:
            raise ValueError(f"output width must be 2 (steer, throttle), got {sizes[-1]}")
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("policy must hold exactly 3 weight and 3 bias arrays")
        ws = []
        bs = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if w.shape != (sizes[i + 1], sizes[i]):
                raise ValueError(
                    f"weights[{i}] shape {w.shape} != {(sizes[i + 1], sizes[i])}"
                )
            if b.shape != (sizes[i + 1],):
                raise ValueError(f"biases[{i}] shape {b.shape} != {(sizes[i + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} contains non-finite parameters")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params_flat(self) -> np.ndarray:
        """All parameters as one vector, weights before biases per layer."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)


def forward(policy: MlpPolicy, distances) -> ControlCommand:
    """Map a (pre-scaled) distance vector to a steering/throttle command."""
    x = np.ascontiguousarray(distances, dtype=np.float64)
    if x.shape != (policy.n_inputs,):
        raise ValueError(
            f"expected {policy.n_inputs} inputs, got shape {x.shape}"
        )
    w0, w1, w2 = policy.weights
    b0, b1, b2 = policy.biases
    h0 = np.empty(w0.shape[0])
    h1 = np.empty(w1.shape[0])
    out = np.empty(2)
    _sim._forward_into(w0, b0, w1, b1, w2, b2, x, h0, h1, out)
    return ControlCommand(steer=float(out[0]), throttle=float(out[1]))


def random_init(seed, layer_sizes=DEFAULT_LAYER_SIZES) -> MlpPolicy:
    """Fresh policy with Normal(0, 1/fan_in) weights and zero biases."""
    seed = check_seed(seed)
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = 1.0 / np.sqrt(fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpPolicy(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))


def mutate(policy: MlpPolicy, sigma: float, rng_seed) -> MlpPolicy:
    """Independent Gaussian perturbation of every parameter; input untouched."""
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    rng_seed = check_seed(rng_seed)
    if sigma == 0.0:
        return policy
    rng = np.random.default_rng(rng_seed)
    weights = tuple(w + rng.normal(0.0, sigma, size=w.shape) for w in policy.weights)
    biases = tuple(b + rng.normal(0.0, sigma, size=b.shape) for b in policy.biases)
    return MlpPolicy(layer_sizes=policy.layer_sizes, weights=weights, biases=biases)


def save_policy(path, policy: MlpPolicy) -> None:
    """Versioned little-endian binary: magic, u32 sizes, f64 W then b per layer."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(policy.layer_sizes)))
        fh.write(np.asarray(policy.layer_sizes, dtype="<u4").tobytes())
        for w, b in zip(policy.weights, policy.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_policy(path) -> MlpPolicy:
    """Inverse of save_policy; bit-exact round trip."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: bad magic, not a policy file")
    pos = len(MAGIC)
    (n_sizes,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if n_sizes != 4:
        raise ValueError(f"{path}: expected 4 layer sizes, got {n_sizes}")
    sizes = np.frombuffer(data, dtype="<u4", count=n_sizes, offset=pos)
    pos += 4 * n_sizes
    sizes = tuple(int(s) for s in sizes)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_out * fan_in, offset=pos)
        pos += 8 * fan_out * fan_in
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=pos)
        pos += 8 * fan_out
        weights.append(w.reshape(fan_out, fan_in).copy())
        biases.append(b.copy())
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return MlpPolicy(layer_sizes=sizes, weights=tuple(weights), biases=tuple(biases))
