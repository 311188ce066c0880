"""Generator, critic, and code-classifier architectures plus checkpoint I/O.

The generator upsamples the latent vector to a waveform through stride-4
transposed convolutions; the critic downsamples with mirrored strided
convolutions to an unbounded score; the classifier shares the critic's
stack but ends in a code-width head.  Two built-in profiles: the full
16384-sample slice and a reduced 4096-sample profile for CPU runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ops
from .latent import LatentSpec
from .layers import (
    Conv1d,
    ConvTranspose1d,
    Dense,
    Flatten,
    LeakyReLU,
    Network,
    PhaseShuffle,
    ReLU,
    Reshape,
    Tanh,
)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Geometry shared by the three networks."""

    slice_len: int
    model_dim: int
    n_layers: int
    seed_len: int = 16
    kernel: int = 25
    stride: int = 4
    phase_shuffle: int = 2
    lrelu_slope: float = 0.2

    def __post_init__(self):
        if self.slice_len != self.seed_len * self.stride**self.n_layers:
            raise ValueError(
                f"slice_len {self.slice_len} != seed_len {self.seed_len} * "
                f"stride^{self.n_layers}"
            )
        if self.kernel < self.stride:
            raise ValueError("kernel must be at least the stride for exact resampling")

    @property
    def pad(self) -> tuple[int, int]:
        total = self.kernel - self.stride
        return total // 2, total - total // 2

    def to_dict(self) -> dict:
        return {
            "slice_len": self.slice_len,
            "model_dim": self.model_dim,
            "n_layers": self.n_layers,
            "seed_len": self.seed_len,
            "kernel": self.kernel,
            "stride": self.stride,
            "phase_shuffle": self.phase_shuffle,
            "lrelu_slope": self.lrelu_slope,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            slice_len=int(d["slice_len"]),
            model_dim=int(d["model_dim"]),
            n_layers=int(d["n_layers"]),
            seed_len=int(d.get("seed_len", 16)),
            kernel=int(d.get("kernel", 25)),
            stride=int(d.get("stride", 4)),
            phase_shuffle=int(d.get("phase_shuffle", 2)),
            lrelu_slope=float(d.get("lrelu_slope", 0.2)),
        )


def paper_model() -> ModelConfig:
    """1.024 s at 16 kHz: five 4x stages from a length-16 seed."""
    return ModelConfig(slice_len=16384, model_dim=64, n_layers=5)


def desk_model(model_dim: int = 16) -> ModelConfig:
    """0.256 s at 16 kHz: four 4x stages, sized for CPU training."""
    return ModelConfig(slice_len=4096, model_dim=model_dim, n_layers=4)


def build_generator(
    cfg: ModelConfig, spec: LatentSpec, rng: np.random.Generator, dtype=np.float32
) -> Network:
    c0 = cfg.model_dim * 2 ** (cfg.n_layers - 1)
    chans = [c0 // 2**i for i in range(cfg.n_layers)] + [1]
    layers: list = [
        Dense(spec.total_dim, cfg.seed_len * c0, rng, "g.in", dtype),
        Reshape(c0, cfg.seed_len),
    ]
    for i in range(cfg.n_layers):
        layers.append(ReLU())
        layers.append(
            ConvTranspose1d(
                chans[i], chans[i + 1], cfg.kernel, cfg.stride, cfg.pad, rng, f"g.up{i}", dtype
            )
        )
    layers.append(Tanh())
    note = f"code+z({spec.code_dim}+{spec.noise_dim})"
    return Network(layers, "generator", note)


def _conv_stack(cfg: ModelConfig, rng, prefix: str, dtype) -> tuple[list, int]:
    chans = [1] + [cfg.model_dim * 2**i for i in range(cfg.n_layers)]
    layers: list = []
    for i in range(cfg.n_layers):
        layers.append(
            Conv1d(chans[i], chans[i + 1], cfg.kernel, cfg.stride, cfg.pad, rng, f"{prefix}.down{i}", dtype)
        )
        layers.append(LeakyReLU(cfg.lrelu_slope))
        if i < cfg.n_layers - 1 and cfg.phase_shuffle > 0:
            layers.append(PhaseShuffle(cfg.phase_shuffle))
    layers.append(Flatten())
    return layers, cfg.seed_len * chans[-1]


def build_critic(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> Network:
    layers, feat = _conv_stack(cfg, rng, "d", dtype)
    layers.append(Dense(feat, 1, rng, "d.head", dtype))
    return Network(layers, "critic")


def build_qnet(
    cfg: ModelConfig, spec: LatentSpec, rng: np.random.Generator, dtype=np.float32
) -> Network:
    layers, feat = _conv_stack(cfg, rng, "q", dtype)
    layers.append(Dense(feat, spec.code_dim, rng, "q.head", dtype))
    return Network(layers, "qnet")


def heads_differ_only(a: Network, b: Network) -> bool:
    """True when two fingerprints agree on every layer except the final head."""
    fa, fb = a.layer_fingerprints(), b.layer_fingerprints()
    return len(fa) == len(fb) and fa[:-1] == fb[:-1]


# ---------------------------------------------------------------------------
# forward wrappers
# ---------------------------------------------------------------------------

def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def generate(G: Network, latent: np.ndarray) -> np.ndarray:
    """Waveform(s) for latent vector(s); output values lie in [-1, 1]."""
    lat, single = _as_batch(latent)
    y = G.forward(lat, train=False)
    out = y[:, 0, :]
    return out[0] if single else out


def discriminate(D: Network, clip: np.ndarray):
    """Unbounded critic score for clip(s); no squashing."""
    x, single = _as_batch(clip)
    y = D.forward(x[:, None, :], train=False)
    scores = y[:, 0]
    return float(scores[0]) if single else scores


def q_logits(Q: Network, clip: np.ndarray) -> np.ndarray:
    x, single = _as_batch(clip)
    y = Q.forward(x[:, None, :], train=False)
    return y[0] if single else y


def q_forward(Q: Network, spec: LatentSpec, clip: np.ndarray) -> np.ndarray:
    """Code posterior: softmax over classes, or independent per-bit sigmoids."""
    logits = q_logits(Q, clip)
    if spec.kind == "one_hot":
        return ops.softmax(logits)
    return ops.sigmoid(logits)


# ---------------------------------------------------------------------------
# checkpoints: manifest + one raw little-endian float32 file per tensor
# ---------------------------------------------------------------------------

class CheckpointError(ValueError):
    """A checkpoint directory is missing pieces or inconsistent."""


def _tensor_files(nets: dict[str, Network]):
    for net_name, net in sorted(nets.items()):
        for i, layer in enumerate(net.layers):
            for tensor in layer.params():
                suffix = tensor.name.rsplit(".", 1)[-1]
                yield f"{net_name}/{i:02d}.{layer.kind}.{suffix}.f32", tensor


def save_checkpoint(
    path, nets: dict[str, Network], spec: LatentSpec, model_cfg: ModelConfig, step: int
) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    index = {}
    for rel, tensor in _tensor_files(nets):
        target = path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        data = np.ascontiguousarray(tensor.data, dtype="<f4")
        target.write_bytes(data.tobytes())
        index[rel] = list(tensor.shape)
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "step": step,
        "latent_spec": spec.to_dict(),
        "model": model_cfg.to_dict(),
        "fingerprints": {name: net.fingerprint for name, net in sorted(nets.items())},
        "tensors": index,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


@dataclass
class Checkpoint:
    nets: dict[str, Network]
    spec: LatentSpec
    model_cfg: ModelConfig
    step: int

    @property
    def generator(self) -> Network:
        return self.nets["generator"]

    @property
    def critic(self) -> Network:
        return self.nets["critic"]

    @property
    def qnet(self) -> Network:
        return self.nets["qnet"]


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError as e:
        raise CheckpointError(f"{path}: no checkpoint manifest") from e
    if manifest["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest['format_version']}")
    spec = LatentSpec.from_dict(manifest["latent_spec"])
    cfg = ModelConfig.from_dict(manifest["model"])
    rng = np.random.default_rng(0)  # structure only; every tensor is overwritten
    nets = {}
    for name in manifest["fingerprints"]:
        if name == "generator":
            nets[name] = build_generator(cfg, spec, rng)
        elif name == "critic":
            nets[name] = build_critic(cfg, rng)
        elif name == "qnet":
            nets[name] = build_qnet(cfg, spec, rng)
        else:
            raise CheckpointError(f"unknown network {name!r} in checkpoint")
    seen = set()
    for rel, tensor in _tensor_files(nets):
        shape = manifest["tensors"].get(rel)
        if shape is None:
            raise CheckpointError(f"checkpoint missing tensor {rel}")
        try:
            raw = np.frombuffer((path / rel).read_bytes(), dtype="<f4")
        except FileNotFoundError as e:
            raise CheckpointError(f"checkpoint tensor file missing: {rel}") from e
        if raw.size != int(np.prod(shape)):
            raise CheckpointError(f"tensor {rel} has {raw.size} values, expected shape {shape}")
        tensor.data = raw.reshape(shape).astype(np.float32)
        seen.add(rel)
    extra = set(manifest["tensors"]) - seen
    if extra:
        raise CheckpointError(f"checkpoint lists unused tensors: {sorted(extra)}")
    on_disk = {str(p.relative_to(path)) for p in path.rglob("*.f32")}
    stray = on_disk - seen
    if stray:
        raise CheckpointError(f"checkpoint has stray tensor files: {sorted(stray)}")
    for name, net in nets.items():
        if net.fingerprint != manifest["fingerprints"][name]:
            raise CheckpointError(f"fingerprint mismatch for {name}")
    return Checkpoint(nets=nets, spec=spec, model_cfg=cfg, step=int(manifest["step"]))
