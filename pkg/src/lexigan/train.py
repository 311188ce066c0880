"""Adversarial training loop: critic updates, joint generator/classifier update.

The critic estimates a Wasserstein distance (no squashing) and is kept
near 1-Lipschitz by a gradient penalty at random interpolates between
real and generated batches.  The generator is additionally trained, with
the classifier, to make the latent code recoverable from the generated
audio (negative log-likelihood of the code under the classifier head).
Runs are deterministic for a fixed seed: every random draw comes from one
generator consumed in a fixed order.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .latent import LatentSpec, binarize_code_block, sample_latent_batch
from .layers import Network
from .models import (
    ModelConfig,
    build_critic,
    build_generator,
    build_qnet,
    save_checkpoint,
)
from .ops import require_finite, sigmoid, softmax
from .tensor import Adam

PROB_FLOOR = 1e-7

LOG_COLUMNS = ["step", "d_loss", "g_loss", "q_loss", "gp", "seconds"]


class ConfigError(ValueError):
    """A training configuration field fails validation."""


class NumericalError(RuntimeError):
    """A loss or gradient went non-finite; the step was aborted."""


@dataclass(frozen=True)
class TrainConfig:
    latent: LatentSpec
    model: ModelConfig
    batch_size: int = 16
    total_steps: int = 1000
    n_critic: int = 5
    gp_weight: float = 10.0
    q_weight: float = 1.0
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 500

    def validate(self) -> None:
        checks = [
            ("batch_size", self.batch_size >= 1),
            ("total_steps", self.total_steps >= 0),
            ("n_critic", self.n_critic >= 1),
            ("gp_weight", self.gp_weight >= 0),
            ("q_weight", self.q_weight >= 0),
            ("lr", self.lr >= 0),
            ("beta1", 0 <= self.beta1 < 1),
            ("beta2", 0 <= self.beta2 < 1),
            ("checkpoint_every", self.checkpoint_every >= 0),
        ]
        bad = [name for name, ok in checks if not ok]
        if bad:
            raise ConfigError(f"invalid training config field(s): {', '.join(bad)}")

    def to_dict(self) -> dict:
        d = {
            "latent": self.latent.to_dict(),
            "model": self.model.to_dict(),
        }
        for name in (
            "batch_size total_steps n_critic gp_weight q_weight lr beta1 beta2 "
            "adam_eps seed checkpoint_every".split()
        ):
            d[name] = getattr(self, name)
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        known = {
            "batch_size", "total_steps", "n_critic", "gp_weight", "q_weight",
            "lr", "beta1", "beta2", "adam_eps", "seed", "checkpoint_every",
        }
        extra = set(d) - known - {"latent", "model"}
        if extra:
            raise ConfigError(f"unknown training config field(s): {', '.join(sorted(extra))}")
        try:
            latent = LatentSpec.from_dict(d["latent"])
            model = ModelConfig.from_dict(d["model"])
        except KeyError as e:
            raise ConfigError(f"training config missing section: {e}") from e
        kwargs = {k: d[k] for k in known if k in d}
        return TrainConfig(latent=latent, model=model, **kwargs)


@dataclass
class TrainLogRecord:
    step: int
    d_loss: float
    g_loss: float
    q_loss: float
    gp: float
    seconds: float

    def loss_fields(self) -> tuple:
        """Everything except wall time, for determinism comparisons."""
        return (self.step, self.d_loss, self.g_loss, self.q_loss, self.gp)


@dataclass
class DLossResult:
    total: float
    wasserstein: float
    gp: float


def gradient_penalty(
    D: Network,
    real: np.ndarray,
    fake: np.ndarray,
    rng: np.random.Generator,
    accumulate: bool = False,
    weight: float = 1.0,
) -> float:
    """Mean squared deviation of the critic's input-gradient norm from 1.

    Evaluated at per-example interpolates eps*real + (1-eps)*fake with
    eps ~ U[0,1].  With ``accumulate`` the derivative of weight*penalty
    w.r.t. the critic parameters is added to their gradient buffers.
    """
    if real.shape != fake.shape:
        raise ValueError(f"batch shapes differ: {real.shape} vs {fake.shape}")
    b = real.shape[0]
    eps = rng.uniform(0.0, 1.0, size=(b, 1, 1)).astype(real.dtype)
    xhat = eps * real + (1 - eps) * fake
    y, caches = D.forward(xhat, train=True, rng=rng, keep=True)
    seed = np.ones_like(y)
    g, us = D.input_gradient_pass(seed, caches)
    require_finite(g, "critic input gradient")
    norms = np.sqrt((g * g).sum(axis=(1, 2)))
    penalty = float(((norms - 1) ** 2).mean())
    if accumulate and weight != 0.0:
        coef = (2.0 * weight / b) * (norms - 1) / np.maximum(norms, 1e-12)
        v = (coef[:, None, None] * g).astype(g.dtype)
        D.penalty_second_pass(v, caches, us)
    return penalty


def d_loss(
    D: Network,
    real: np.ndarray,
    fake: np.ndarray,
    gp_weight: float,
    rng: np.random.Generator,
    accumulate: bool = True,
) -> DLossResult:
    """Critic objective mean D(fake) - mean D(real) + gp_weight * penalty."""
    if real.shape != fake.shape:
        raise ValueError(f"batch shapes differ: {real.shape} vs {fake.shape}")
    b = real.shape[0]
    yr, cr = D.forward(real, train=True, rng=rng, keep=True)
    yf, cf = D.forward(fake, train=True, rng=rng, keep=True)
    base = float(yf.mean() - yr.mean())
    if accumulate:
        D.backward(np.full_like(yf, 1.0 / b), cf, accumulate=True)
        D.backward(np.full_like(yr, -1.0 / b), cr, accumulate=True)
    gp = 0.0
    if gp_weight > 0:
        gp = gradient_penalty(D, real, fake, rng, accumulate=accumulate, weight=gp_weight)
    total = base + gp_weight * gp
    if not np.isfinite(total):
        raise NumericalError(f"non-finite critic loss: base={base}, gp={gp}")
    return DLossResult(total=total, wasserstein=base, gp=gp)


def q_loss_from_logits(
    spec: LatentSpec, logits: np.ndarray, codes: np.ndarray
) -> tuple[float, np.ndarray]:
    """Code negative log-likelihood and its gradient w.r.t. the head logits.

    One-hot codes: categorical cross-entropy against the class drawn for
    each example.  Binary codes: sum over features of binary
    cross-entropy.  Probabilities are floored at 1e-7 inside the logs.
    """
    b = logits.shape[0]
    if spec.kind == "one_hot":
        targets = np.argmax(codes, axis=1)
        p = softmax(logits)
        picked = np.clip(p[np.arange(b), targets], PROB_FLOOR, 1.0)
        value = float(-np.log(picked).mean())
        grad = p.copy()
        grad[np.arange(b), targets] -= 1.0
        return value, grad / b
    y = binarize_code_block(spec, codes).astype(logits.dtype)
    p = sigmoid(logits)
    pc = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    value = float(-(y * np.log(pc) + (1 - y) * np.log(1 - pc)).sum(axis=1).mean())
    return value, (p - y) / b


def q_loss(
    Q: Network,
    generated: np.ndarray,
    codes: np.ndarray,
    spec: LatentSpec,
    rng: np.random.Generator,
    accumulate: bool = True,
    want_input_grad: bool = False,
):
    """Classifier loss on a generated batch; optionally returns the audio gradient."""
    logits, caches = Q.forward(generated, train=True, rng=rng, keep=True)
    value, dlogits = q_loss_from_logits(spec, logits, codes)
    if not np.isfinite(value):
        raise NumericalError(f"non-finite classifier loss {value}")
    input_grad = None
    if accumulate or want_input_grad:
        input_grad = Q.backward(dlogits, caches, accumulate=accumulate)
    if want_input_grad:
        return value, input_grad
    return value


@dataclass
class TrainState:
    cfg: TrainConfig
    G: Network
    D: Network
    Q: Network
    opt_g: Adam
    opt_d: Adam
    opt_q: Adam
    rng: np.random.Generator
    train_x: np.ndarray  # [N, 1, slice_len] float32
    step: int = 0
    records: list[TrainLogRecord] = field(default_factory=list)


def init_state(cfg: TrainConfig, train_clips: np.ndarray) -> TrainState:
    cfg.validate()
    x = np.asarray(train_clips, dtype=np.float32)
    if x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3 or x.shape[1] != 1:
        raise ValueError(f"training clips must be [N, L] or [N, 1, L], got {x.shape}")
    if x.shape[2] != cfg.model.slice_len:
        raise ValueError(
            f"clip length {x.shape[2]} != configured slice length {cfg.model.slice_len}"
        )
    if x.shape[0] < cfg.batch_size:
        raise ValueError(f"corpus of {x.shape[0]} clips smaller than batch {cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)
    G = build_generator(cfg.model, cfg.latent, rng)
    D = build_critic(cfg.model, rng)
    Q = build_qnet(cfg.model, cfg.latent, rng)
    opts = {
        name: Adam(net.params(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
        for name, net in (("g", G), ("d", D), ("q", Q))
    }
    return TrainState(
        cfg=cfg, G=G, D=D, Q=Q,
        opt_g=opts["g"], opt_d=opts["d"], opt_q=opts["q"],
        rng=rng, train_x=x,
    )


def _draw_real(state: TrainState) -> np.ndarray:
    idx = state.rng.choice(state.train_x.shape[0], size=state.cfg.batch_size, replace=False)
    return state.train_x[idx]


def _draw_latent(state: TrainState) -> tuple[np.ndarray, np.ndarray]:
    codes, z = sample_latent_batch(state.cfg.latent, state.rng, state.cfg.batch_size)
    return codes, np.concatenate([codes, z], axis=1)


def train_step(state: TrainState) -> TrainLogRecord:
    """One global step: n_critic critic updates, then a joint G+Q update."""
    cfg = state.cfg
    t0 = time.perf_counter()

    d_totals, gps = [], []
    for _ in range(cfg.n_critic):
        real = _draw_real(state)
        _, lat = _draw_latent(state)
        fake = state.G.forward(lat, train=True, rng=state.rng)
        state.opt_d.zero_grad()
        res = d_loss(state.D, real, fake, cfg.gp_weight, state.rng, accumulate=True)
        state.opt_d.step()
        d_totals.append(res.total)
        gps.append(res.gp)

    codes, lat = _draw_latent(state)
    fake, g_caches = state.G.forward(lat, train=True, rng=state.rng, keep=True)
    yf, d_caches = state.D.forward(fake, train=True, rng=state.rng, keep=True)
    adv = float(-yf.mean())
    b = yf.shape[0]
    dfake = state.D.backward(np.full_like(yf, -1.0 / b), d_caches, accumulate=False)

    state.opt_q.zero_grad()
    q_val, dfake_q = q_loss(
        state.Q, fake, codes, cfg.latent, state.rng, accumulate=True, want_input_grad=True
    )
    state.opt_g.zero_grad()
    state.G.backward(dfake + cfg.q_weight * dfake_q, g_caches, accumulate=True)
    state.opt_q.step()
    state.opt_g.step()

    g_total = adv + cfg.q_weight * q_val
    if not np.isfinite(g_total):
        raise NumericalError(f"non-finite generator loss at step {state.step}: {g_total}")

    state.step += 1
    record = TrainLogRecord(
        step=state.step,
        d_loss=float(np.mean(d_totals)),
        g_loss=g_total,
        q_loss=q_val,
        gp=float(np.mean(gps)),
        seconds=time.perf_counter() - t0,
    )
    state.records.append(record)
    return record


def _append_log(path: Path, record: TrainLogRecord, header: bool) -> None:
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(LOG_COLUMNS)
        w.writerow(
            [record.step]
            + [f"{v:.7g}" for v in (record.d_loss, record.g_loss, record.q_loss, record.gp)]
            + [f"{record.seconds:.3f}"]
        )


@dataclass
class TrainResult:
    state: TrainState
    final_checkpoint: Path | None
    log_path: Path | None


def train(cfg: TrainConfig, corpus, out_dir=None, progress=None) -> TrainResult:
    """Run the full loop over a prepared corpus (or raw [N, L] clip array).

    Checkpoints land in ``out_dir/ckpt_<step>``; the step log appends to
    ``out_dir/train_log.csv``.  On a non-finite loss the last written
    checkpoint is left in place and the error re-raised.
    """
    clips = corpus.train_x if hasattr(corpus, "train_x") else corpus
    state = init_state(cfg, clips)
    out = Path(out_dir) if out_dir is not None else None
    log_path = None

    def checkpoint(step: int) -> Path | None:
        if out is None:
            return None
        target = out / f"ckpt_{step:06d}"
        save_checkpoint(
            target,
            {"generator": state.G, "critic": state.D, "qnet": state.Q},
            cfg.latent, cfg.model, step,
        )
        return target

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        log_path = out / "train_log.csv"
        if log_path.exists():
            log_path.unlink()
    last = checkpoint(0)

    for i in range(cfg.total_steps):
        record = train_step(state)
        if log_path is not None:
            _append_log(log_path, record, header=(i == 0))
        if progress is not None:
            progress(record)
        if (
            cfg.checkpoint_every > 0
            and state.step % cfg.checkpoint_every == 0
            and state.step != cfg.total_steps
        ):
            last = checkpoint(state.step)
    if cfg.total_steps > 0:
        last = checkpoint(cfg.total_steps)
    return TrainResult(state=state, final_checkpoint=last, log_path=log_path)
