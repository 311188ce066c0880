"""Corpus preparation: WAV tree -> fixed-length arrays with a held-out split.

A corpus on disk is a directory per word class containing that class's
token WAVs.  Preparation slices every token to the configured length,
splits train/test stratified by label with a seeded shuffle, and records
a content hash so a prepared corpus can be verified after reload.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import load_wav, slice_and_pad

FORMAT_VERSION = 1


def token_hash(samples: np.ndarray) -> str:
    """Content hash of one prepared clip (float32 byte identity)."""
    return hashlib.sha1(
        np.ascontiguousarray(samples, dtype=np.float32).tobytes()
    ).hexdigest()


class CorpusError(ValueError):
    """Corpus files are missing, inconsistent, or corrupted."""


@dataclass
class PreparedCorpus:
    train_x: np.ndarray  # [n_train, slice_len] float32
    train_y: list[str]
    test_x: np.ndarray  # [n_test, slice_len] float32
    test_y: list[str]
    rate: int
    slice_len: int
    test_fraction: float
    seed: int
    sources: list[dict] | None = None

    @property
    def labels(self) -> list[str]:
        return sorted(set(self.train_y) | set(self.test_y))

    def label_counts(self) -> dict[str, dict[str, int]]:
        out = {}
        for name in self.labels:
            out[name] = {
                "train": sum(1 for l in self.train_y if l == name),
                "test": sum(1 for l in self.test_y if l == name),
            }
        return out

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(b"prepared-corpus-v1")
        h.update(np.int64([self.rate, self.slice_len]).tobytes())
        h.update(np.ascontiguousarray(self.train_x, dtype=np.float32).tobytes())
        h.update(np.ascontiguousarray(self.test_x, dtype=np.float32).tobytes())
        h.update("\x00".join(self.train_y).encode())
        h.update(b"\x01")
        h.update("\x00".join(self.test_y).encode())
        return h.hexdigest()


def scan_wav_tree(root) -> list[tuple[Path, str]]:
    """All (path, label) pairs under root, label = parent directory name."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a directory")
    pairs = sorted(
        (p, p.parent.name) for p in root.rglob("*.wav") if p.parent != root
    )
    if not pairs:
        raise CorpusError(f"no labeled WAV files under {root}")
    return pairs


def split_indices(
    labels: list[str], test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified held-out split; deterministic for a given seed."""
    if not 0.0 <= test_fraction < 1.0:
        raise CorpusError(f"test_fraction must be in [0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for name in sorted(set(labels)):
        idx = np.array([i for i, l in enumerate(labels) if l == name])
        if idx.shape[0] < 2 and test_fraction > 0:
            warnings.warn(f"class {name!r} has one token; kept in train, not stratified")
        perm = idx[rng.permutation(idx.shape[0])]
        n_test = int(round(test_fraction * idx.shape[0]))
        n_test = min(n_test, idx.shape[0] - 1)
        test.extend(perm[:n_test])
        train.extend(perm[n_test:])
    return np.sort(np.array(train, dtype=int)), np.sort(np.array(test, dtype=int))


def prepare_from_arrays(
    tokens,
    labels,
    slice_len: int,
    rate: int,
    test_fraction: float = 0.2,
    seed: int = 0,
    sources: list[dict] | None = None,
    over: str = "error",
) -> PreparedCorpus:
    if len(tokens) != len(labels):
        raise CorpusError(f"{len(tokens)} tokens but {len(labels)} labels")
    try:
        x = np.stack([slice_and_pad(t, slice_len, over=over) for t in tokens])
    except ValueError as e:
        raise CorpusError(str(e)) from e
    tr, te = split_indices(list(labels), test_fraction, seed)
    # Duplicate-content guard: a clip byte-identical to a training clip
    # must not sit in the held-out split, or evaluation leaks.
    hashes = [token_hash(row) for row in x]
    train_hashes = {hashes[i] for i in tr}
    leaked = [i for i in te if hashes[i] in train_hashes]
    if leaked:
        warnings.warn(
            f"{len(leaked)} held-out token(s) duplicate training content; moved to train"
        )
        te = np.array([i for i in te if hashes[i] not in train_hashes], dtype=int)
        tr = np.sort(np.concatenate([tr, np.array(leaked, dtype=int)]))
    labels = list(labels)
    return PreparedCorpus(
        train_x=x[tr],
        train_y=[labels[i] for i in tr],
        test_x=x[te] if te.size else np.zeros((0, slice_len), dtype=np.float32),
        test_y=[labels[i] for i in te],
        rate=rate,
        slice_len=slice_len,
        test_fraction=test_fraction,
        seed=seed,
        sources=sources,
    )


def verify_no_leakage(pc: PreparedCorpus) -> None:
    """Raise if any held-out clip is byte-identical to a training clip."""
    train_hashes = {token_hash(row) for row in pc.train_x}
    for i, row in enumerate(pc.test_x):
        if token_hash(row) in train_hashes:
            raise CorpusError(f"held-out token {i} duplicates training content")


def prepare_corpus(
    root, slice_len: int, test_fraction: float = 0.2, seed: int = 0,
    over: str = "error",
) -> PreparedCorpus:
    """Load a WAV tree and produce the sliced, split corpus."""
    pairs = scan_wav_tree(root)
    tokens, labels, sources, rate = [], [], [], None
    for path, label in pairs:
        clip = load_wav(path)
        if rate is None:
            rate = clip.rate
        elif clip.rate != rate:
            raise CorpusError(f"{path}: rate {clip.rate} != corpus rate {rate}")
        tokens.append(clip.samples)
        labels.append(label)
        sources.append({"path": str(path), "label": label})
    return prepare_from_arrays(
        tokens, labels, slice_len, rate, test_fraction, seed, sources=sources,
        over=over,
    )


def save_prepared(out_dir, pc: PreparedCorpus) -> Path:
    """Write arrays.npz plus a manifest carrying the content hash."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(
        out / "arrays.npz",
        train_x=pc.train_x.astype(np.float32),
        test_x=pc.test_x.astype(np.float32),
        train_y=np.array(pc.train_y),
        test_y=np.array(pc.test_y),
    )
    manifest = {
        "format_version": FORMAT_VERSION,
        "rate": pc.rate,
        "slice_len": pc.slice_len,
        "test_fraction": pc.test_fraction,
        "seed": pc.seed,
        "n_train": int(pc.train_x.shape[0]),
        "n_test": int(pc.test_x.shape[0]),
        "labels": pc.labels,
        "label_counts": pc.label_counts(),
        "content_hash": pc.content_hash(),
        "sources": pc.sources,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_prepared(in_dir) -> PreparedCorpus:
    """Reload a prepared corpus, verifying shapes and the content hash."""
    root = Path(in_dir)
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except FileNotFoundError as e:
        raise CorpusError(f"{root}: no manifest.json") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CorpusError(f"{root}: unsupported format {manifest.get('format_version')}")
    with np.load(root / "arrays.npz") as z:
        pc = PreparedCorpus(
            train_x=z["train_x"],
            train_y=[str(s) for s in z["train_y"]],
            test_x=z["test_x"],
            test_y=[str(s) for s in z["test_y"]],
            rate=int(manifest["rate"]),
            slice_len=int(manifest["slice_len"]),
            test_fraction=float(manifest["test_fraction"]),
            seed=int(manifest["seed"]),
            sources=manifest.get("sources"),
        )
    if pc.train_x.shape[1] != pc.slice_len:
        raise CorpusError(
            f"{root}: array length {pc.train_x.shape[1]} != slice_len {pc.slice_len}"
        )
    if pc.content_hash() != manifest["content_hash"]:
        raise CorpusError(f"{root}: content hash mismatch; corpus files corrupted")
    return pc
