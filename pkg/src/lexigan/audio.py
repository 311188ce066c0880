"""WAV I/O and fixed-length slicing for training clips.

Files are 16-bit PCM mono.  Samples are mapped to float32 by dividing by
32768, so a read/write round trip at the same rate is bit-exact.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PCM_SCALE = 32768.0


@dataclass
class AudioClip:
    samples: np.ndarray  # float32, nominally in [-1, 1]
    rate: int

    @property
    def duration(self) -> float:
        return self.samples.shape[-1] / self.rate


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM mono WAV file."""
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * fh.getsampwidth()}-bit")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioClip(samples=(ints / PCM_SCALE).astype(np.float32), rate=rate)


def write_wav(path, samples, rate: int) -> None:
    """Write float samples as 16-bit PCM mono, clipping to the valid range."""
    if isinstance(samples, AudioClip):
        rate = samples.rate
        samples = samples.samples
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    ints = np.clip(np.round(x * PCM_SCALE), -32768, 32767).astype("<i2")
    path = Path(path)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(ints.tobytes())


def slice_and_pad(samples: np.ndarray, slice_len: int, over: str = "error") -> np.ndarray:
    """Force a 1-D signal to exactly slice_len samples.

    Shorter signals are zero-padded at the end so onsets stay aligned
    across clips.  Longer ones raise by default; ``over="crop"`` keeps
    the first slice_len samples instead.
    """
    x = np.asarray(samples, dtype=np.float32).reshape(-1)
    if x.shape[0] > slice_len:
        if over == "crop":
            return x[:slice_len].copy()
        raise ValueError(
            f"signal of {x.shape[0]} samples exceeds slice length {slice_len}"
        )
    if x.shape[0] == slice_len:
        return x.copy()
    out = np.zeros(slice_len, dtype=np.float32)
    out[: x.shape[0]] = x
    return out
