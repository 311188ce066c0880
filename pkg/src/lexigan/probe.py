"""Probing a trained model: code recovery, conditional generation, sweeps.

Three probes, all deterministic in eval mode for a given seed:

* classify held-out real audio with the trained classifier and record the
  full code-probability vector per token;
* generate batches with the code channel pinned (typically above its
  training scale) and the rest of the latent vector random;
* sweep one or more code entries over a grid with everything else frozen
  and track an acoustic measurement of each output.

The acoustic proxy for frication is the short-time energy fraction in a
high-frequency band, averaged over the clip onset — a stand-in for a
listener judging a word-initial [s].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats as sstats

from .latent import LatentSpec, code_vector, decode_hard, enumerate_hard_codes, sample_noise
from .layers import Network
from .models import q_forward

FRIC_BAND = (4000.0, 8000.0)


@dataclass
class ClassificationRecord:
    index: int
    label: str
    probs: np.ndarray  # [code_dim] posterior (one-hot) or per-bit prob (binary)
    decoded: object  # int class or bit string

    def prob_list(self) -> list[float]:
        return [float(p) for p in self.probs]


def classify_clips(
    Q: Network, clips: np.ndarray, spec: LatentSpec, labels=None, batch: int = 64
) -> list[ClassificationRecord]:
    """Run the classifier over [N, L] clips in eval mode."""
    clips = np.asarray(clips, dtype=np.float32)
    if clips.ndim != 2:
        raise ValueError(f"expected [N, L] clips, got {clips.shape}")
    records = []
    for start in range(0, clips.shape[0], batch):
        block = clips[start : start + batch]
        probs = q_forward(Q, spec, block)
        for j in range(block.shape[0]):
            i = start + j
            records.append(
                ClassificationRecord(
                    index=i,
                    label="" if labels is None else str(labels[i]),
                    probs=probs[j].astype(np.float64),
                    decoded=decode_hard(spec, probs[j]),
                )
            )
    return records


def classify_corpus(Q: Network, corpus, spec: LatentSpec, batch: int = 64):
    """Classifier posteriors over a prepared corpus's held-out tokens only."""
    return classify_clips(Q, corpus.test_x, spec, labels=corpus.test_y, batch=batch)


def write_classification_csv(
    path, records: list[ClassificationRecord], property_prefix: str | None = "s"
) -> None:
    """Records CSV: index, label, decoded code, optional property flag, posteriors.

    ``property_prefix`` adds an ``s_initial`` 0/1 column marking labels
    that start with the prefix (the noise-initial naming convention).
    """
    if not records:
        raise ValueError("no records to write")
    width = records[0].probs.shape[0]
    cols = ["index", "label", "decoded"]
    if property_prefix is not None:
        cols.append("s_initial")
    cols += [f"q{i}" for i in range(width)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            row = [r.index, r.label, r.decoded]
            if property_prefix is not None:
                row.append(int(r.label.startswith(property_prefix)))
            w.writerow(row + [f"{p:.8g}" for p in r.prob_list()])


def read_classification_csv(path) -> tuple[list[dict], list[str]]:
    """Rows as dicts (numeric fields parsed) plus the column order."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = list(reader.fieldnames)
        rows = []
        for raw in reader:
            row = dict(raw)
            row["index"] = int(raw["index"])
            for c in cols:
                if c.startswith("q") and c != "q":
                    row[c] = float(raw[c])
            if "s_initial" in row:
                row["s_initial"] = int(raw["s_initial"])
            rows.append(row)
    return rows, cols


def generate_with_code(
    G: Network,
    spec: LatentSpec,
    code,
    n: int,
    rng: np.random.Generator,
    scale: float | None = None,
) -> np.ndarray:
    """[n, L] outputs with the code block pinned and fresh noise per row.

    The default scale is the marginal scale, i.e. the code channel is
    driven above the range seen in training.
    """
    if scale is None:
        scale = spec.marginal_scale
    c = np.tile(code_vector(spec, code, scale=scale), (n, 1))
    z = sample_noise(spec, rng, n)
    lat = np.concatenate([c, z], axis=1).astype(np.float32)
    out = G.forward(lat, train=False)
    return out[:, 0, :]


def generate_marginal(
    G: Network,
    spec: LatentSpec,
    n_per_code: int,
    rng: np.random.Generator,
    scale: float | None = None,
) -> dict:
    """Marginal generation for every hard code: {code: [n_per_code, L] audio}."""
    return {
        code: generate_with_code(G, spec, code, n_per_code, rng, scale=scale)
        for code in enumerate_hard_codes(spec)
    }


# kept as an alias; some call sites read better with this name
generate_code_table = generate_marginal


def band_energy_ratio(
    x: np.ndarray,
    rate: int,
    lo_hz: float = FRIC_BAND[0],
    hi_hz: float = FRIC_BAND[1],
    frame: int = 512,
    hop: int = 256,
) -> np.ndarray:
    """Per-frame fraction of spectral energy inside [lo_hz, hi_hz].

    Hann-windowed short-time frames; silent frames get ratio 0.  The
    series is invariant to scaling the clip by any positive constant.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty clip")
    if not 0 <= lo_hz < hi_hz <= rate / 2:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] outside [0, {rate / 2}]")
    if x.shape[0] < frame:
        frame = x.shape[0]
        hop = max(1, frame // 2)
    window = np.hanning(frame)
    freqs = np.fft.rfftfreq(frame, d=1.0 / rate)
    sel = (freqs >= lo_hz) & (freqs <= hi_hz)
    ratios = []
    for start in range(0, x.shape[0] - frame + 1, hop):
        mag = np.abs(np.fft.rfft(x[start : start + frame] * window)) ** 2
        total = mag.sum()
        ratios.append(0.0 if total == 0 else float(mag[sel].sum() / total))
    return np.array(ratios)


def onset_band_ratio(
    x: np.ndarray,
    rate: int,
    lo_hz: float = FRIC_BAND[0],
    hi_hz: float = FRIC_BAND[1],
    onset_fraction: float = 0.25,
    silence_rel: float = 0.02,
) -> float:
    """Mean band-energy ratio over the first part of the non-silent region.

    The non-silent region runs to the last sample whose magnitude exceeds
    ``silence_rel`` times the clip peak; its first ``onset_fraction`` is
    the onset window.  All-silent clips return 0.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    peak = np.abs(x).max()
    if peak == 0:
        return 0.0
    active = np.flatnonzero(np.abs(x) > silence_rel * peak)
    start, end = int(active[0]), int(active[-1]) + 1
    span = max(256, int(onset_fraction * (end - start)))
    onset = x[start : start + span]
    frames = band_energy_ratio(onset, rate, lo_hz, hi_hz)
    return float(frames.mean())


@dataclass
class InterpolationSweep:
    z: np.ndarray  # the frozen noise vector
    swept: tuple[int, ...]  # 1-based code entries swept jointly
    base_code: object  # source of the fixed entries
    values: np.ndarray  # grid, strictly monotone
    clips: np.ndarray  # [n_grid, L]
    metrics: np.ndarray  # one measurement per clip


@dataclass
class TrendSummary:
    values: np.ndarray
    metrics: np.ndarray
    rho: float  # Spearman rank correlation, 0.0 when degenerate
    delta: float  # last metric minus first


def interpolation_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive monotone grid: 0..3 by 0.2 gives 16 values."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"grid end {stop} below start {start}")
    n = int(np.floor((stop - start) / step + 0.5)) + 1
    return start + step * np.arange(n)


def interpolate_features(
    G: Network,
    spec: LatentSpec,
    z: np.ndarray,
    swept,
    start: float,
    stop: float,
    step: float,
    base_code=None,
    measure: Callable[[np.ndarray, int], float] | None = None,
    rate: int = 16000,
) -> InterpolationSweep:
    """Set the swept code entries jointly to each grid value, z frozen.

    Entries not swept take their values from ``base_code`` at the
    marginal scale.  Every clip equals single-shot generation at that
    latent vector exactly.  Indices are 1-based.
    """
    swept = tuple(int(s) for s in (swept if np.iterable(swept) else [swept]))
    if not swept:
        raise ValueError("need at least one swept entry")
    for s in swept:
        if not 1 <= s <= spec.code_dim:
            raise ValueError(f"swept index {s} outside 1..{spec.code_dim}")
    z = np.asarray(z, dtype=np.float32).reshape(-1)
    if z.shape[0] != spec.noise_dim:
        raise ValueError(f"z has {z.shape[0]} entries, spec wants {spec.noise_dim}")
    values = interpolation_grid(start, stop, step)
    if measure is None:
        measure = onset_band_ratio
    if base_code is None:
        base_code = "0" * spec.size if spec.kind == "binary" else 0
    base_vec = code_vector(spec, base_code, scale=spec.marginal_scale)
    # one forward per grid point, so each clip is bit-identical to what a
    # single-shot generation at that latent vector returns
    rows = []
    for v in values:
        c = base_vec.copy()
        for s in swept:
            c[s - 1] = v
        lat = np.concatenate([c, z])[None, :]
        rows.append(G.forward(lat, train=False)[0, 0, :])
    clips = np.stack(rows)
    metrics = np.array([measure(row, rate) for row in clips])
    return InterpolationSweep(
        z=z, swept=swept, base_code=base_code, values=values, clips=clips, metrics=metrics
    )


def sweep_trend(sweep: InterpolationSweep) -> TrendSummary:
    """Spearman correlation of metric against grid plus endpoint delta."""
    if sweep.values.shape[0] < 2:
        raise ValueError("trend needs at least two grid points")
    if np.ptp(sweep.metrics) == 0.0:
        # constant metric: no trend, and spearmanr would warn about it
        rho = np.nan
    else:
        rho = sstats.spearmanr(sweep.values, sweep.metrics).statistic
    return TrendSummary(
        values=sweep.values,
        metrics=sweep.metrics,
        rho=0.0 if np.isnan(rho) else float(rho),
        delta=float(sweep.metrics[-1] - sweep.metrics[0]),
    )


def random_z_sweeps(
    G: Network,
    spec: LatentSpec,
    swept,
    rng: np.random.Generator,
    n_sweeps: int = 10,
    start: float = 0.0,
    stop: float = 3.0,
    step: float = 0.2,
    base_code=None,
    rate: int = 16000,
) -> list[InterpolationSweep]:
    """Repeat one joint sweep across fresh noise draws."""
    return [
        interpolate_features(
            G, spec, sample_noise(spec, rng, 1)[0], swept, start, stop, step,
            base_code=base_code, rate=rate,
        )
        for _ in range(n_sweeps)
    ]


def trend_pass_count(sweeps: list[InterpolationSweep], threshold: float = 0.6) -> int:
    """How many sweeps show a monotone trend at least as strong as threshold."""
    return sum(1 for s in sweeps if abs(sweep_trend(s).rho) >= threshold)
