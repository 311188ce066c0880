"""Parameter tensors and the adaptive-moment optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ops import ShapeError


@dataclass
class Tensor:
    """A named parameter array with an optional same-shape gradient accumulator."""

    data: np.ndarray
    grad: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.grad is not None and self.grad.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {self.grad.shape} != value shape {self.data.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        if self.grad is None or self.grad.shape != self.data.shape:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0)

    def add_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != value shape {self.data.shape} for {self.name!r}"
            )
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), None, self.name)


@dataclass
class Adam:
    """Adam with bias correction over a fixed parameter list.

    Moment slots are allocated lazily per parameter and always match the
    parameter shape.  ``step`` is deterministic: identical parameters,
    gradients, and state give identical updates.
    """

    params: list[Tensor]
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in self.params]
        if not self.v:
            self.v = [np.zeros_like(p.data) for p in self.params]
        for p, m in zip(self.params, self.m):
            if m.shape != p.shape:
                raise ShapeError(f"moment shape {m.shape} != param shape {p.shape}")

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1 - b1**self.t
        bc2 = 1 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape}")
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(
                p.data.dtype, copy=False
            )
