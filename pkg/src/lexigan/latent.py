"""Latent space: uninformative noise plus a one-hot or binary code block.

The code block always comes first in the concatenated latent vector; the
order is recorded in each generator's fingerprint.  Binary codes are
written as bit-strings with feature 1 as the leading character, so code
"011" means feature1=0, feature2=1, feature3=1, and feature indices in
all public surfaces are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ONE_HOT = "one_hot"
BINARY = "binary"


@dataclass(frozen=True)
class LatentSpec:
    """Shape and scaling of the latent code + noise."""

    kind: str
    size: int
    noise_dim: int = 90
    train_scale: float = 1.0
    marginal_scale: float = 3.0

    def __post_init__(self):
        if self.kind not in (ONE_HOT, BINARY):
            raise ValueError(f"unknown code kind {self.kind!r}")
        if self.kind == ONE_HOT and self.size < 2:
            raise ValueError("one-hot codes need at least 2 classes")
        if self.kind == BINARY and self.size < 1:
            raise ValueError("binary codes need at least 1 feature")
        if self.noise_dim < 1:
            raise ValueError("noise_dim must be positive")

    @property
    def code_dim(self) -> int:
        return self.size

    @property
    def total_dim(self) -> int:
        return self.size + self.noise_dim

    @property
    def n_codes(self) -> int:
        """Number of addressable hard codes (k, or 2**n for n bits)."""
        return self.size if self.kind == ONE_HOT else 2**self.size

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "size": self.size,
            "noise_dim": self.noise_dim,
            "train_scale": self.train_scale,
            "marginal_scale": self.marginal_scale,
        }

    @staticmethod
    def from_dict(d: dict) -> "LatentSpec":
        return LatentSpec(
            kind=d["kind"],
            size=int(d["size"]),
            noise_dim=int(d["noise_dim"]),
            train_scale=float(d.get("train_scale", 1.0)),
            marginal_scale=float(d.get("marginal_scale", 3.0)),
        )


@dataclass
class LatentVector:
    """One latent draw: code block c and noise block z."""

    c: np.ndarray
    z: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.c, self.z])


def sample_noise(spec: LatentSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(size, spec.noise_dim)).astype(np.float32)


def sample_codes(spec: LatentSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Training-time code block: uniform class or i.i.d. fair bits, scaled."""
    if spec.kind == ONE_HOT:
        classes = rng.integers(0, spec.size, size=size)
        c = np.zeros((size, spec.size), dtype=np.float32)
        c[np.arange(size), classes] = spec.train_scale
        return c
    bits = rng.integers(0, 2, size=(size, spec.size))
    return (bits * spec.train_scale).astype(np.float32)


def sample_latent(spec: LatentSpec, rng: np.random.Generator) -> LatentVector:
    c = sample_codes(spec, rng, 1)[0]
    z = sample_noise(spec, rng, 1)[0]
    return LatentVector(c=c, z=z)


def sample_latent_batch(
    spec: LatentSpec, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Batched draw; returns (codes [size, code_dim], noise [size, noise_dim])."""
    return sample_codes(spec, rng, size), sample_noise(spec, rng, size)


def enumerate_hard_codes(spec: LatentSpec) -> list:
    """All addressable hard codes: class indices, or bit-strings in integer order."""
    if spec.kind == ONE_HOT:
        return list(range(spec.size))
    n = spec.size
    return [format(i, f"0{n}b") for i in range(2**n)]


def code_vector(spec: LatentSpec, code, scale: float | None = None) -> np.ndarray:
    """Code block for a hard code, with active entries at the given scale."""
    s = spec.train_scale if scale is None else scale
    out = np.zeros(spec.size, dtype=np.float32)
    if spec.kind == ONE_HOT:
        idx = int(code)
        if not 0 <= idx < spec.size:
            raise ValueError(f"class index {idx} out of range for {spec.size} classes")
        out[idx] = s
        return out
    bits = str(code)
    if len(bits) != spec.size or any(ch not in "01" for ch in bits):
        raise ValueError(f"bad bit-string {code!r} for {spec.size} features")
    for i, ch in enumerate(bits):
        if ch == "1":
            out[i] = s
    return out


def code_bits(spec: LatentSpec, code) -> np.ndarray:
    """Bit vector {0,1} for a hard code (one-hot codes are class indicators)."""
    if spec.kind == ONE_HOT:
        out = np.zeros(spec.size, dtype=np.int64)
        out[int(code)] = 1
        return out
    return np.array([int(ch) for ch in str(code)], dtype=np.int64)


def binarize_code_block(spec: LatentSpec, c: np.ndarray) -> np.ndarray:
    """Recover {0,1} targets from a (possibly scaled) training code block."""
    return (c > spec.train_scale / 2).astype(np.int64)


def decode_hard(spec: LatentSpec, posterior: np.ndarray):
    """Hard code from a posterior: argmax class, or per-bit threshold at 0.5.

    A bit posterior of exactly 0.5 decodes to 1.
    """
    p = np.asarray(posterior)
    if spec.kind == ONE_HOT:
        if p.shape[-1] != spec.size:
            raise ValueError(f"posterior width {p.shape[-1]} != {spec.size} classes")
        return int(np.argmax(p))
    if p.shape[-1] != spec.size:
        raise ValueError(f"posterior width {p.shape[-1]} != {spec.size} features")
    return "".join("1" if q >= 0.5 else "0" for q in p)
