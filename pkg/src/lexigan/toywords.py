"""Procedural toy word corpus with acoustically separable classes.

Each class is a short synthetic "word": an optional fricative-like noise
burst followed by a harmonic vowel with a class-specific fundamental and
formant pair.  Per-token jitter (pitch, formants, duration, amplitude)
keeps classes non-degenerate while leaving them trivially separable in
the log-band-energy domain, which the template classifier below exploits.
That classifier doubles as the label oracle for generated audio.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import write_wav

VOWEL_TABLE = [
    ("ee", (310, 2500)),
    ("ah", (780, 1150)),
    ("oo", (340, 830)),
    ("eh", (560, 1900)),
    ("oh", (500, 950)),
    ("ih", (420, 2100)),
    ("aw", (680, 1050)),
    ("uh", (640, 1350)),
]

FRIC_BAND = (3600.0, 7600.0)


@dataclass(frozen=True)
class ToyClass:
    name: str
    f0: float
    formants: tuple[float, float]
    fricative: bool


def toy_classes(n_classes: int) -> list[ToyClass]:
    """Class inventory laid out as a (vowel x frication) grid.

    Consecutive pairs share a vowel and fundamental and differ only in
    the noise-burst onset, so with four classes the corpus factorizes
    into two independent dimensions — the shape a featural code can
    exploit.  Noise-initial classes carry an "s" name prefix.
    """
    if not 1 <= n_classes <= 2 * len(VOWEL_TABLE):
        raise ValueError(f"n_classes must be in [1, {2 * len(VOWEL_TABLE)}], got {n_classes}")
    out = []
    for i in range(n_classes):
        vowel, formants = VOWEL_TABLE[i // 2]
        fric = i % 2 == 1
        out.append(
            ToyClass(
                name=("s" + vowel) if fric else vowel,
                f0=105.0 + 30.0 * (i // 2),
                formants=formants,
                fricative=fric,
            )
        )
    return out


def _envelope(n: int, rate: int, attack: float = 0.01, release: float = 0.03) -> np.ndarray:
    env = np.ones(n)
    na = min(n, max(1, int(attack * rate)))
    nr = min(n, max(1, int(release * rate)))
    env[:na] = 0.5 - 0.5 * np.cos(np.pi * np.arange(na) / na)
    env[n - nr:] = np.minimum(env[n - nr:], 0.5 + 0.5 * np.cos(np.pi * np.arange(nr) / nr))
    return env


def _vowel(cls: ToyClass, dur: float, rate: int, rng: np.random.Generator) -> np.ndarray:
    n = int(dur * rate)
    t = np.arange(n) / rate
    f0 = cls.f0 * (1 + rng.uniform(-0.04, 0.04))
    formants = [f * (1 + rng.uniform(-0.03, 0.03)) for f in cls.formants]
    bandwidths = [90.0, 140.0]
    top = min(5000.0, 0.45 * rate)
    x = np.zeros(n)
    k = 1
    while k * f0 < top:
        f = k * f0
        amp = sum(1.0 / (1.0 + ((f - fc) / bw) ** 2) for fc, bw in zip(formants, bandwidths))
        x += amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        k += 1
    return x * _envelope(n, rate)


def _fricative(dur: float, rate: int, rng: np.random.Generator) -> np.ndarray:
    n = int(dur * rate)
    noise = rng.standard_normal(n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    lo, hi = FRIC_BAND
    hi = min(hi, 0.95 * rate / 2)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    x = np.fft.irfft(spec, n)
    return x * _envelope(n, rate, attack=0.005, release=0.01)


def synth_token(cls: ToyClass, rate: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered token of a toy class, peak-normalized, float32."""
    vowel_dur = 0.14 * (1 + rng.uniform(-0.1, 0.1))
    parts = []
    if cls.fricative:
        fric_dur = 0.06 * (1 + rng.uniform(-0.1, 0.1))
        parts.append(0.6 * _fricative(fric_dur, rate, rng))
        parts.append(np.zeros(int(0.005 * rate)))
    parts.append(_vowel(cls, vowel_dur, rate, rng))
    x = np.concatenate(parts)
    peak = np.abs(x).max()
    if peak > 0:
        x = x / peak * rng.uniform(0.5, 0.7)
    return x.astype(np.float32)


def make_toy_tokens(
    n_classes: int = 4,
    tokens_per_class: int = 64,
    rate: int = 16000,
    seed: int = 0,
) -> tuple[list[np.ndarray], list[str], list[ToyClass]]:
    """Synthesize the corpus in memory: (tokens, labels, class inventory)."""
    rng = np.random.default_rng(seed)
    classes = toy_classes(n_classes)
    tokens, labels = [], []
    for cls in classes:
        for _ in range(tokens_per_class):
            tokens.append(synth_token(cls, rate, rng))
            labels.append(cls.name)
    return tokens, labels, classes


def make_toy_corpus(
    n_classes: int = 4,
    tokens_per_class: int = 500,
    slice_len: int = 4096,
    rate: int = 16000,
    seed: int = 0,
    over: str = "error",
) -> tuple[np.ndarray, list[str], list[ToyClass]]:
    """Sliced corpus ready for training: ([N, slice_len] clips, labels, classes)."""
    from .audio import slice_and_pad

    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    tokens, labels, classes = make_toy_tokens(n_classes, tokens_per_class, rate, seed)
    clips = np.stack([slice_and_pad(t, slice_len, over=over) for t in tokens])
    return clips, labels, classes


def write_toy_corpus(
    out_dir,
    n_classes: int = 4,
    tokens_per_class: int = 64,
    rate: int = 16000,
    seed: int = 0,
) -> list[ToyClass]:
    """Write the corpus as out_dir/<word>/<word>_<i>.wav (one dir per class)."""
    tokens, labels, classes = make_toy_tokens(n_classes, tokens_per_class, rate, seed)
    out = Path(out_dir)
    counts: dict[str, int] = {}
    for token, label in zip(tokens, labels):
        i = counts.get(label, 0)
        counts[label] = i + 1
        write_wav(out / label / f"{label}_{i:04d}.wav", token, rate)
    return classes


def log_band_energies(
    x: np.ndarray, rate: int, n_bands: int = 24, fmin: float = 100.0
) -> np.ndarray:
    """Mean-removed log energies in geometrically spaced frequency bands."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    mag = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(x.shape[0], d=1.0 / rate)
    edges = np.geomspace(fmin, rate / 2, n_bands + 1)
    out = np.empty(n_bands)
    for i in range(n_bands):
        sel = (freqs >= edges[i]) & (freqs < edges[i + 1])
        out[i] = np.log10(mag[sel].sum() + 1e-9)
    return out - out.mean()


@dataclass
class TemplateClassifier:
    """Nearest-template labeling in log-band-energy space."""

    labels: list[str]
    templates: np.ndarray  # [n_classes, n_bands]
    rate: int
    n_bands: int

    def features(self, clips: np.ndarray) -> np.ndarray:
        clips = np.atleast_2d(np.asarray(clips))
        return np.stack([log_band_energies(c, self.rate, self.n_bands) for c in clips])

    def predict(self, clips: np.ndarray) -> list[str]:
        feats = self.features(clips)
        d = ((feats[:, None, :] - self.templates[None, :, :]) ** 2).sum(axis=2)
        return [self.labels[i] for i in np.argmin(d, axis=1)]

    def accuracy(self, clips: np.ndarray, labels) -> float:
        pred = self.predict(clips)
        return float(np.mean([p == t for p, t in zip(pred, labels)]))


def fit_template_classifier(
    clips, labels, rate: int, n_bands: int = 24
) -> TemplateClassifier:
    """Average the band-energy features of each class into its template."""
    names = sorted(set(labels))
    feats = np.stack([log_band_energies(np.asarray(c), rate, n_bands) for c in clips])
    labels = list(labels)
    templates = np.stack(
        [feats[[i for i, l in enumerate(labels) if l == name]].mean(axis=0) for name in names]
    )
    return TemplateClassifier(labels=names, templates=templates, rate=rate, n_bands=n_bands)
