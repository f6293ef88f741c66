"""Feedforward ReLU networks and their per-pattern affine structure.

Hidden layers use ReLU, the last layer is affine.  An activation pattern is
a flat ``uint8`` array over all hidden neurons, layer-major.  For a fixed
pattern every hidden preactivation is an affine function of the input, which
gives one halfspace per neuron and one affine map for the whole network.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .config import resolve
from .geometry import AffineMap, Halfspace

__all__ = [
    "ReluNetwork",
    "NeuronHalfspace",
    "random_network",
    "pattern_key",
    "pattern_to_str",
    "pattern_from_str",
]


def pattern_key(bits) -> bytes:
    return np.asarray(bits, dtype=np.uint8).tobytes()


def pattern_to_str(bits) -> str:
    return "".join("1" if v else "0" for v in np.asarray(bits).reshape(-1))


def pattern_from_str(s: str) -> np.ndarray:
    return np.array([1 if ch == "1" else 0 for ch in s], dtype=np.uint8)


@dataclass(frozen=True)
class NeuronHalfspace:
    neuron: Tuple[int, int]
    raw_normal: np.ndarray
    raw_offset: float
    normalized: Halfspace


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Weights and biases per layer; ``weights[i]`` has shape (l_i, l_{i-1})."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        Ws = tuple(np.atleast_2d(np.asarray(W, dtype=float)) for W in self.weights)
        bs = tuple(np.asarray(b, dtype=float).reshape(-1) for b in self.biases)
        if len(Ws) != len(bs) or not Ws:
            raise ValueError("need the same, nonzero number of weight matrices and bias vectors")
        for i, (W, b) in enumerate(zip(Ws, bs)):
            if W.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weights have {W.shape[0]} rows but bias has {b.shape[0]}")
            if i and W.shape[1] != Ws[i - 1].shape[0]:
                raise ValueError(
                    f"layer {i}: expects {W.shape[1]} inputs but previous layer has {Ws[i - 1].shape[0]} outputs"
                )
        for W in Ws:
            W.setflags(write=False)
        for b in bs:
            b.setflags(write=False)
        object.__setattr__(self, "weights", Ws)
        object.__setattr__(self, "biases", bs)

    @classmethod
    def from_layers(cls, layers: Sequence[Tuple[np.ndarray, np.ndarray]]) -> "ReluNetwork":
        return cls(tuple(W for W, _ in layers), tuple(b for _, b in layers))

    # -- shape ------------------------------------------------------------
    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_sizes(self) -> List[int]:
        return [W.shape[0] for W in self.weights[:-1]]

    @property
    def n_hidden(self) -> int:
        return sum(self.hidden_sizes)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def homogeneous(self) -> List[np.ndarray]:
        """Parameter matrices in homogeneous form (bias folded into an extra column)."""
        out = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            top = np.hstack([W, b[:, None]])
            if i < self.n_layers - 1:
                bottom = np.zeros((1, top.shape[1]))
                bottom[0, -1] = 1.0
                top = np.vstack([top, bottom])
            out.append(top)
        return out

    # -- evaluation -------------------------------------------------------
    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"expected input of dimension {self.input_dim}, got {x.shape[-1]}")
        return x

    def preactivations(self, x) -> List[np.ndarray]:
        z = self._check_input(x)
        out = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            pre = z @ W.T + b
            out.append(pre)
            z = np.maximum(pre, 0.0)
        return out

    def evaluate(self, x) -> np.ndarray:
        z = self._check_input(x)
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = np.maximum(z @ W.T + b, 0.0)
        return z @ self.weights[-1].T + self.biases[-1]

    __call__ = evaluate

    def activation_pattern(self, x) -> np.ndarray:
        """1 where the preactivation is strictly positive; zero preactivation maps to 0."""
        pres = self.preactivations(x)
        if not pres:
            shape = np.asarray(x).shape[:-1] + (0,)
            return np.zeros(shape, dtype=np.uint8)
        return (np.concatenate(pres, axis=-1) > 0).astype(np.uint8)

    def _split(self, bits):
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
        if bits.shape[0] != self.n_hidden:
            raise ValueError(f"pattern has {bits.shape[0]} bits, network has {self.n_hidden} hidden neurons")
        out, k = [], 0
        for size in self.hidden_sizes:
            out.append(bits[k:k + size])
            k += size
        return out

    # -- pattern structure ------------------------------------------------
    def halfspace_arrays(self, bits, tol=None):
        """Per-neuron halfspaces for a pattern, as stacked arrays.

        Returns ``(raw_A, raw_b, A, b, degenerate)``.  The raw row satisfies
        ``preactivation(x) = raw_A @ x - raw_b`` on the pattern's region; the
        normalized row ``A @ x <= b`` is the side of that hyperplane the
        pattern selects, with unit normal.  Zero-normal rows are flagged in
        ``degenerate`` and carry the signed offset.
        """
        tol = resolve(tol)
        n = self.input_dim
        G, g = np.eye(n), np.zeros(n)
        raw_A, raw_b = [], []
        lams = self._split(bits)
        for lam, W, b in zip(lams, self.weights[:-1], self.biases[:-1]):
            pre_G = W @ G
            pre_g = W @ g + b
            raw_A.append(pre_G)
            raw_b.append(-pre_g)
            G = lam[:, None] * pre_G
            g = lam * pre_g
        if not raw_A:
            z = np.zeros((0, n))
            return z, np.zeros(0), z, np.zeros(0), np.zeros(0, dtype=bool)
        raw_A = np.vstack(raw_A)
        raw_b = np.concatenate(raw_b)
        lam = np.concatenate(lams).astype(float)
        sign = 1.0 - 2.0 * lam
        norms = np.linalg.norm(raw_A, axis=1)
        degenerate = norms <= tol.norm
        scale = np.where(degenerate, 1.0, norms)
        A = sign[:, None] * raw_A / scale[:, None]
        A[degenerate] = 0.0
        b = sign * raw_b / scale
        return raw_A, raw_b, A, b, degenerate

    def neuron_halfspaces(self, bits, tol=None) -> List[NeuronHalfspace]:
        raw_A, raw_b, A, b, _ = self.halfspace_arrays(bits, tol)
        out, k = [], 0
        for i, size in enumerate(self.hidden_sizes):
            for j in range(size):
                out.append(NeuronHalfspace((i, j), raw_A[k], float(raw_b[k]), Halfspace(A[k], float(b[k]))))
                k += 1
        return out

    def affine_map_for(self, bits) -> AffineMap:
        """The affine map the network reduces to on the pattern's region."""
        G, g = np.eye(self.input_dim), np.zeros(self.input_dim)
        for lam, W, b in zip(self._split(bits), self.weights[:-1], self.biases[:-1]):
            G = lam[:, None] * (W @ G)
            g = lam * (W @ g + b)
        return AffineMap(self.weights[-1] @ G, self.weights[-1] @ g + self.biases[-1])

    def neighbor_pattern(self, bits, normal, offset, tol=None) -> np.ndarray:
        """Pattern of the region across the facet ``normal @ x <= offset``.

        Layers are processed in order under the partially updated pattern:
        a neuron whose normalized halfspace equals the facet is flipped, a
        neuron whose preactivation has become identically zero is set to 0,
        and every other neuron keeps its bit.
        """
        tol = resolve(tol)
        normal = np.asarray(normal, dtype=float)
        new = np.array(bits, dtype=np.uint8).reshape(-1).copy()
        n = self.input_dim
        G, g = np.eye(n), np.zeros(n)
        k = 0
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            size = W.shape[0]
            lam = new[k:k + size]
            pre_G = W @ G
            pre_g = W @ g + b
            norms = np.linalg.norm(pre_G, axis=1)
            degenerate = norms <= tol.norm
            sign = 1.0 - 2.0 * lam
            scale = np.where(degenerate, 1.0, norms)
            A = sign[:, None] * pre_G / scale[:, None]
            off = sign * (-pre_g) / scale
            match = (
                ~degenerate
                & np.all(np.abs(A - normal[None, :]) <= tol.dup, axis=1)
                & (np.abs(off - offset) <= tol.dup)
            )
            zero = degenerate & (np.abs(pre_g) <= tol.dup)
            lam[match] ^= 1
            lam[zero] = 0
            G = lam[:, None] * pre_G
            g = lam * pre_g
            k += size
        return new

    # -- composition ------------------------------------------------------
    def concatenate(self, steps: int) -> "ReluNetwork":
        """Network computing ``steps`` iterations of this one."""
        if steps < 1:
            raise ValueError("steps must be a positive integer")
        if self.input_dim != self.output_dim:
            raise ValueError("concatenation needs equal input and output dimensions")
        Ws, bs = list(self.weights), list(self.biases)
        for _ in range(steps - 1):
            W_last, b_last = Ws.pop(), bs.pop()
            Ws.append(self.weights[0] @ W_last)
            bs.append(self.weights[0] @ b_last + self.biases[0])
            Ws.extend(self.weights[1:])
            bs.extend(self.biases[1:])
        return ReluNetwork(tuple(Ws), tuple(bs))

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {"layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in zip(self.weights, self.biases)]}

    @classmethod
    def from_dict(cls, data: dict) -> "ReluNetwork":
        layers = data["layers"]
        return cls(tuple(np.asarray(l["weights"], float) for l in layers), tuple(np.asarray(l["bias"], float) for l in layers))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "ReluNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self):
        sizes = [self.input_dim] + [W.shape[0] for W in self.weights]
        return f"ReluNetwork({'-'.join(map(str, sizes))})"


def random_network(sizes: Sequence[int], seed: int = 0, bias_scale: float = 1.0) -> ReluNetwork:
    """Gaussian weights scaled by ``1/sqrt(fan_in)`` and Gaussian biases."""
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        Ws.append(rng.normal(size=(fan_out, fan_in)) / np.sqrt(fan_in))
        bs.append(bias_scale * rng.normal(size=fan_out))
    return ReluNetwork(tuple(Ws), tuple(bs))
