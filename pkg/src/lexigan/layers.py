"""Layer classes and the sequential network engine.

Networks here are plain ordered layer lists.  Three walks are supported:

* ``forward`` with per-layer caches,
* ``backward``, chaining each layer's explicit adjoint and optionally
  accumulating parameter gradients,
* an input-gradient pass plus a second pass that differentiates the
  input-gradient program itself w.r.t. the parameters.  The second pass
  is what a gradient-penalty term needs: the per-layer backward maps are
  linear in the flowing gradient, with coefficients given by the kernels
  and the cached activation masks, so differentiating them is another
  chain of the same conv/dense/mask primitives.  Activation masks are
  treated as locally constant (their derivative vanishes almost
  everywhere), matching standard double-backprop behaviour.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .ops import ShapeError
from .tensor import Tensor


def _glorot(rng: np.random.Generator, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    kind = "layer"

    def params(self) -> list[Tensor]:
        return []

    def fingerprint(self) -> str:
        return self.kind

    def forward(self, x, train: bool, rng):
        raise NotImplementedError

    def backward(self, grad_out, cache, accumulate: bool):
        raise NotImplementedError

    def gp_second(self, v, u_out, cache):
        """Continue the penalty flow through this layer's backward map.

        ``u_out`` is the pass-2 gradient at this layer's output, ``v`` the
        penalty flow at this layer's input (already weighted).  Parameter
        contributions are accumulated in place; the returned array is the
        flow at the output.
        """
        raise NotImplementedError(f"{self.kind} cannot sit inside a penalized critic")

    def clone(self, dtype) -> "Layer":
        raise NotImplementedError


class Dense(Layer):
    kind = "dense"

    def __init__(self, fin: int, fout: int, rng=None, name: str = "", dtype=np.float32):
        self.fin, self.fout = fin, fout
        self.name = name
        if rng is not None:
            w = _glorot(rng, (fin, fout), fin, fout, dtype)
        else:
            w = np.zeros((fin, fout), dtype=dtype)
        self.w = Tensor(w, name=f"{name}.w")
        self.b = Tensor(np.zeros(fout, dtype=dtype), name=f"{name}.b")

    def params(self):
        return [self.w, self.b]

    def fingerprint(self):
        return f"dense({self.fin}->{self.fout})"

    def forward(self, x, train, rng):
        return ops.dense(x, self.w.data, self.b.data), x

    def backward(self, grad_out, cache, accumulate):
        if accumulate:
            self.w.add_grad(ops.dense_weight_grad(cache, grad_out))
            self.b.add_grad(grad_out.sum(axis=0))
        return ops.dense_input_grad(grad_out, self.w.data)

    def gp_second(self, v, u_out, cache):
        # pass 2 computed u_in = u_out @ W^T; both factors vary.
        self.w.add_grad(v.T @ u_out)
        return v @ self.w.data

    def clone(self, dtype):
        out = Dense(self.fin, self.fout, None, self.name, dtype)
        out.w = self.w.astype(dtype)
        out.b = self.b.astype(dtype)
        return out


class Conv1d(Layer):
    kind = "conv"

    def __init__(self, cin, cout, kernel, stride, padding, rng=None, name="", dtype=np.float32):
        self.cin, self.cout, self.k = cin, cout, kernel
        self.stride = stride
        self.padding = ops._pad_pair(padding)
        self.name = name
        if rng is not None:
            w = _glorot(rng, (cout, cin, kernel), cin * kernel, cout * kernel, dtype)
        else:
            w = np.zeros((cout, cin, kernel), dtype=dtype)
        self.w = Tensor(w, name=f"{name}.w")
        self.b = Tensor(np.zeros(cout, dtype=dtype), name=f"{name}.b")

    def params(self):
        return [self.w, self.b]

    def fingerprint(self):
        pl, pr = self.padding
        return f"conv({self.cin}->{self.cout},k{self.k},s{self.stride},p{pl}:{pr})"

    def forward(self, x, train, rng):
        y = ops.conv1d(x, self.w.data, self.stride, self.padding)
        y += self.b.data[None, :, None]
        return y, x

    def backward(self, grad_out, cache, accumulate):
        if accumulate:
            self.w.add_grad(
                ops.conv1d_kernel_grad(cache, grad_out, self.stride, self.padding, self.w.shape)
            )
            self.b.add_grad(grad_out.sum(axis=(0, 2)))
        return ops.conv1d_input_grad(
            grad_out, self.w.data, self.stride, self.padding, cache.shape[2]
        )

    def gp_second(self, v, u_out, cache):
        # pass 2 computed u_in = convT(u_out, W), zero-extended to the input
        # length; the extension is constant, so only the raw span carries flow.
        raw_len = ops.conv1d_transpose_out_len(u_out.shape[2], self.k, self.stride, self.padding)
        vt = v[:, :, :raw_len]
        self.w.add_grad(
            ops.conv1d_transpose_kernel_grad(u_out, vt, self.stride, self.padding, self.w.shape)
        )
        return ops.conv1d(vt, self.w.data, self.stride, self.padding)

    def clone(self, dtype):
        out = Conv1d(self.cin, self.cout, self.k, self.stride, self.padding, None, self.name, dtype)
        out.w = self.w.astype(dtype)
        out.b = self.b.astype(dtype)
        return out


class ConvTranspose1d(Layer):
    kind = "convt"

    def __init__(self, cin, cout, kernel, stride, padding, rng=None, name="", dtype=np.float32):
        self.cin, self.cout, self.k = cin, cout, kernel
        self.stride = stride
        self.padding = ops._pad_pair(padding)
        self.name = name
        if rng is not None:
            w = _glorot(rng, (cin, cout, kernel), cin * kernel, cout * kernel, dtype)
        else:
            w = np.zeros((cin, cout, kernel), dtype=dtype)
        self.w = Tensor(w, name=f"{name}.w")
        self.b = Tensor(np.zeros(cout, dtype=dtype), name=f"{name}.b")

    def params(self):
        return [self.w, self.b]

    def fingerprint(self):
        pl, pr = self.padding
        return f"convt({self.cin}->{self.cout},k{self.k},s{self.stride},p{pl}:{pr})"

    def forward(self, x, train, rng):
        y = ops.conv1d_transpose(x, self.w.data, self.stride, self.padding)
        y += self.b.data[None, :, None]
        return y, x

    def backward(self, grad_out, cache, accumulate):
        if accumulate:
            self.w.add_grad(
                ops.conv1d_transpose_kernel_grad(
                    cache, grad_out, self.stride, self.padding, self.w.shape
                )
            )
            self.b.add_grad(grad_out.sum(axis=(0, 2)))
        return ops.conv1d_transpose_input_grad(grad_out, self.w.data, self.stride, self.padding)

    def clone(self, dtype):
        out = ConvTranspose1d(
            self.cin, self.cout, self.k, self.stride, self.padding, None, self.name, dtype
        )
        out.w = self.w.astype(dtype)
        out.b = self.b.astype(dtype)
        return out


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train, rng):
        return ops.relu(x), x

    def backward(self, grad_out, cache, accumulate):
        return ops.relu_backward(grad_out, cache)

    def gp_second(self, v, u_out, cache):
        return ops.relu_backward(v, cache)

    def clone(self, dtype):
        return ReLU()


class LeakyReLU(Layer):
    kind = "lrelu"

    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def fingerprint(self):
        return f"lrelu({self.slope:g})"

    def forward(self, x, train, rng):
        return ops.leaky_relu(x, self.slope), x

    def backward(self, grad_out, cache, accumulate):
        return ops.leaky_relu_backward(grad_out, cache, self.slope)

    def gp_second(self, v, u_out, cache):
        return ops.leaky_relu_backward(v, cache, self.slope)

    def clone(self, dtype):
        return LeakyReLU(self.slope)


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x, train, rng):
        y = ops.tanh(x)
        return y, y

    def backward(self, grad_out, cache, accumulate):
        return ops.tanh_backward(grad_out, cache)

    def clone(self, dtype):
        return Tanh()


class PhaseShuffle(Layer):
    """Random per-example time shift; active only in train mode."""

    kind = "pshuffle"

    def __init__(self, n: int):
        self.n = n

    def fingerprint(self):
        return f"pshuffle({self.n})"

    def forward(self, x, train, rng):
        if not train or self.n == 0:
            return x, None
        if rng is None:
            raise ValueError("phase shuffle in train mode needs an rng")
        shifts = ops.sample_phase_shifts(x.shape[0], self.n, rng)
        return ops.phase_shuffle_apply(x, shifts), shifts

    def backward(self, grad_out, cache, accumulate):
        if cache is None:
            return grad_out
        return ops.phase_shuffle_adjoint(grad_out, cache)

    def gp_second(self, v, u_out, cache):
        if cache is None:
            return v
        return ops.phase_shuffle_apply(v, cache)

    def clone(self, dtype):
        return PhaseShuffle(self.n)


class Reshape(Layer):
    """[B, F] <-> [B, C, L] between the latent projection and the conv stack."""

    kind = "reshape"

    def __init__(self, channels: int, length: int):
        self.channels, self.length = channels, length

    def fingerprint(self):
        return f"reshape({self.channels}x{self.length})"

    def forward(self, x, train, rng):
        return x.reshape(x.shape[0], self.channels, self.length), x.shape

    def backward(self, grad_out, cache, accumulate):
        return grad_out.reshape(cache)

    def clone(self, dtype):
        return Reshape(self.channels, self.length)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, train, rng):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out, cache, accumulate):
        return grad_out.reshape(cache)

    def gp_second(self, v, u_out, cache):
        return v.reshape(v.shape[0], -1)

    def clone(self, dtype):
        return Flatten()


class Network:
    """Ordered layer list with an architecture fingerprint."""

    def __init__(self, layers: list[Layer], name: str, input_note: str = ""):
        self.layers = layers
        self.name = name
        self.input_note = input_note

    def params(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def zero_grad(self) -> None:
        for p in self.params():
            p.zero_grad()

    def layer_fingerprints(self) -> list[str]:
        return [layer.fingerprint() for layer in self.layers]

    @property
    def fingerprint(self) -> str:
        head = f"{self.name}[{self.input_note}]" if self.input_note else self.name
        return head + ":" + ";".join(self.layer_fingerprints())

    def forward(self, x, train: bool = False, rng=None, keep: bool = False):
        caches = [] if keep else None
        for layer in self.layers:
            x, cache = layer.forward(x, train, rng)
            if keep:
                caches.append(cache)
        if keep:
            return x, caches
        return x

    def backward(self, grad_out, caches, accumulate: bool = True):
        g = grad_out
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            g = layer.backward(g, cache, accumulate)
        return g

    def input_gradient_pass(self, seed, caches):
        """Gradient of <seed, output> w.r.t. the network input.

        Returns the input gradient and the list of per-layer output
        gradients needed by :meth:`penalty_second_pass`.
        """
        us = [None] * len(self.layers)
        g = seed
        for i in range(len(self.layers) - 1, -1, -1):
            us[i] = g
            g = self.layers[i].backward(g, caches[i], accumulate=False)
        return g, us

    def penalty_second_pass(self, v, caches, us):
        """Accumulate d<v, input_gradient>/d(params); activation masks held fixed."""
        for layer, cache, u in zip(self.layers, caches, us):
            v = layer.gp_second(v, u, cache)
        return v

    def astype(self, dtype) -> "Network":
        return Network([l.clone(dtype) for l in self.layers], self.name, self.input_note)
