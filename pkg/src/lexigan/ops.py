"""Differentiable numpy primitives with hand-written backward passes.

Every op is a pure function: same inputs (including rng) give bitwise
identical outputs.  There is no graph or tape; each primitive exposes its
forward together with explicit ``*_grad`` companions, and the layer stack
in :mod:`lexigan.layers` chains them.  All ops preserve the input dtype,
so the same code runs in float32 for training and float64 for gradient
checking.
"""

from __future__ import annotations

import numpy as np

Padding = "int | tuple[int, int]"


class ShapeError(ValueError):
    """An operand dimension does not match the op contract."""


def _pad_pair(padding) -> tuple[int, int]:
    if isinstance(padding, (tuple, list)):
        left, right = int(padding[0]), int(padding[1])
    else:
        left = right = int(padding)
    if left < 0 or right < 0:
        raise ShapeError(f"padding must be non-negative, got ({left}, {right})")
    return left, right


def conv1d_out_len(length: int, kernel: int, stride: int, padding) -> int:
    """Output length of conv1d: floor((L + pl + pr - K) / stride) + 1."""
    left, right = _pad_pair(padding)
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    span = length + left + right - kernel
    if span < 0:
        raise ShapeError(
            f"kernel size {kernel} exceeds padded input length {length + left + right}"
        )
    return span // stride + 1


def conv1d_transpose_out_len(length: int, kernel: int, stride: int, padding) -> int:
    """Output length of conv1d_transpose: (L - 1) * stride + K - pl - pr."""
    left, right = _pad_pair(padding)
    if stride < 1:
        raise ShapeError(f"stride must be >= 1, got {stride}")
    out = (length - 1) * stride + kernel - left - right
    if out < 1:
        raise ShapeError(
            f"transpose output length {out} < 1 (L={length}, K={kernel}, "
            f"stride={stride}, padding=({left},{right}))"
        )
    return out


def _sliding_view(xp: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Strided [B, C, Lout, K] window view over a padded [B, C, Lp] array."""
    b, c, lp = xp.shape
    lout = (lp - kernel) // stride + 1
    sb, sc, sl = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, shape=(b, c, lout, kernel), strides=(sb, sc, sl * stride, sl)
    )


def _check_3d(x: np.ndarray, what: str) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{what} must be 3-dimensional, got shape {x.shape}")


def conv1d(x: np.ndarray, kernel: np.ndarray, stride: int = 1, padding=0) -> np.ndarray:
    """Strided cross-correlation of [B, Cin, L] with a [Cout, Cin, K] kernel."""
    _check_3d(x, "conv1d input")
    _check_3d(kernel, "conv1d kernel")
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError(
            f"conv1d channel mismatch: input has Cin={x.shape[1]}, "
            f"kernel expects Cin={kernel.shape[1]}"
        )
    left, right = _pad_pair(padding)
    conv1d_out_len(x.shape[2], kernel.shape[2], stride, (left, right))
    xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x
    view = _sliding_view(xp, kernel.shape[2], stride)
    y = np.tensordot(view, kernel, axes=((1, 3), (1, 2)))  # [B, Lout, Cout]
    return np.ascontiguousarray(y.transpose(0, 2, 1))


def conv1d_kernel_grad(
    x: np.ndarray, grad_out: np.ndarray, stride: int, padding, kernel_shape
) -> np.ndarray:
    """Gradient of conv1d w.r.t. its kernel."""
    left, right = _pad_pair(padding)
    xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if left or right else x
    view = _sliding_view(xp, kernel_shape[2], stride)
    lout = grad_out.shape[2]
    # The view can cover more windows than conv1d produced when the stride
    # does not divide the span; restrict to the produced ones.
    dw = np.tensordot(grad_out, view[:, :, :lout, :], axes=((0, 2), (0, 2)))
    return np.ascontiguousarray(dw)


def conv1d_input_grad(
    grad_out: np.ndarray, kernel: np.ndarray, stride: int, padding, in_len: int
) -> np.ndarray:
    """Gradient of conv1d w.r.t. its input (the adjoint map).

    The unpadded scatter covers padded positions [0, (Lout-1)*stride + K);
    the input's gradient is that array shifted by the left padding, with
    zeros on any trailing samples no window reached.  When the stride
    tiles the padded input exactly, this equals conv1d_transpose with the
    same padding — the layer stack relies on that to share kernels.
    """
    left, _ = _pad_pair(padding)
    full = conv1d_transpose(grad_out, kernel, stride=stride, padding=0)
    g = full[:, :, left : left + in_len]
    if g.shape[2] < in_len:
        g = np.pad(g, ((0, 0), (0, 0), (0, in_len - g.shape[2])))
    return np.ascontiguousarray(g)


def conv1d_transpose(
    x: np.ndarray, kernel: np.ndarray, stride: int = 1, padding=0
) -> np.ndarray:
    """Transposed conv of [B, Cin, L] with a [Cin, Cout, K] kernel.

    Forward here is exactly the adjoint of :func:`conv1d` with the same
    kernel array and geometry, so the pair satisfies
    <conv1d(x), y> == <x, conv1d_transpose(y)>.
    """
    _check_3d(x, "conv1d_transpose input")
    _check_3d(kernel, "conv1d_transpose kernel")
    if x.shape[1] != kernel.shape[0]:
        raise ShapeError(
            f"conv1d_transpose channel mismatch: input has Cin={x.shape[1]}, "
            f"kernel expects Cin={kernel.shape[0]}"
        )
    left, right = _pad_pair(padding)
    k = kernel.shape[2]
    conv1d_transpose_out_len(x.shape[2], k, stride, (left, right))
    if stride > 1:
        b, c, l = x.shape
        up = np.zeros((b, c, (l - 1) * stride + 1), dtype=x.dtype)
        up[:, :, ::stride] = x
    else:
        up = x
    # Equivalent stride-1 correlation with the flipped, channel-swapped kernel.
    wconv = np.ascontiguousarray(kernel[:, :, ::-1].transpose(1, 0, 2))
    pl, pr = k - 1 - left, k - 1 - right
    if pl < 0:
        up = up[:, :, -pl:]
        pl = 0
    if pr < 0:
        up = up[:, :, :pr]
        pr = 0
    return conv1d(up, wconv, stride=1, padding=(pl, pr))


def conv1d_transpose_input_grad(
    grad_out: np.ndarray, kernel: np.ndarray, stride: int, padding
) -> np.ndarray:
    """Gradient of conv1d_transpose w.r.t. its input."""
    return conv1d(grad_out, kernel, stride=stride, padding=padding)


def conv1d_transpose_kernel_grad(
    x: np.ndarray, grad_out: np.ndarray, stride: int, padding, kernel_shape
) -> np.ndarray:
    """Gradient of conv1d_transpose w.r.t. its kernel."""
    left, right = _pad_pair(padding)
    k = kernel_shape[2]
    if stride > 1:
        b, c, l = x.shape
        up = np.zeros((b, c, (l - 1) * stride + 1), dtype=x.dtype)
        up[:, :, ::stride] = x
    else:
        up = x
    pl, pr = k - 1 - left, k - 1 - right
    if pl < 0:
        up = up[:, :, -pl:]
        pl = 0
    if pr < 0:
        up = up[:, :, :pr]
        pr = 0
    wconv_shape = (kernel_shape[1], kernel_shape[0], k)
    dwconv = conv1d_kernel_grad(up, grad_out, 1, (pl, pr), wconv_shape)
    return np.ascontiguousarray(dwconv.transpose(1, 0, 2)[:, :, ::-1])


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map [B, F] @ [F, G] + [G]."""
    if x.ndim != 2 or weights.ndim != 2:
        raise ShapeError(
            f"dense expects 2-d input and weights, got {x.shape} and {weights.shape}"
        )
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"dense inner dimension mismatch: input F={x.shape[1]}, weights F={weights.shape[0]}"
        )
    if bias.shape != (weights.shape[1],):
        raise ShapeError(
            f"dense bias shape {bias.shape} does not match output width {weights.shape[1]}"
        )
    return x @ weights + bias


def dense_input_grad(grad_out: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return grad_out @ weights.T


def dense_weight_grad(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return x.T @ grad_out


# ---------------------------------------------------------------------------
# elementwise activations
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(grad_out: np.ndarray, x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    return grad_out * np.where(x > 0, np.asarray(1, dtype=x.dtype), np.asarray(slope, dtype=x.dtype))


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(grad_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward from the forward output y = tanh(x)."""
    return grad_out * (1 - y * y)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Computed from exp(-|x|) in both branches so it never overflows.
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1 / (1 + t), t / (1 + t))


def sigmoid_backward(grad_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward from the forward output y = sigmoid(x)."""
    return grad_out * y * (1 - y)


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the last dimension, max-subtracted for stability."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(grad_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward from the forward output y = softmax(x)."""
    dot = (grad_out * y).sum(axis=-1, keepdims=True)
    return y * (grad_out - dot)


# ---------------------------------------------------------------------------
# phase shuffle
# ---------------------------------------------------------------------------

def sample_phase_shifts(batch: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Per-example integer shifts drawn uniformly from [-n, n]."""
    return rng.integers(-n, n + 1, size=batch)


def _shift_index(length: int, shifts: np.ndarray) -> np.ndarray:
    """Index matrix [B, L]: row b reads sample t from index t - shift_b, reflected."""
    idx = np.arange(length)[None, :] - np.asarray(shifts)[:, None]
    idx = np.where(idx < 0, -idx, idx)
    idx = np.where(idx > length - 1, 2 * (length - 1) - idx, idx)
    return idx


def phase_shuffle_apply(x: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Shift each example along time by its own amount, reflecting at the edges."""
    idx = _shift_index(x.shape[2], shifts)
    full = np.broadcast_to(idx[:, None, :], x.shape)
    return np.take_along_axis(x, full, axis=2)


def phase_shuffle_adjoint(grad_out: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Transpose of the linear map applied by :func:`phase_shuffle_apply`."""
    b, c, length = grad_out.shape
    idx = _shift_index(length, shifts)
    out = np.zeros_like(grad_out)
    bi = np.arange(b)[:, None, None]
    ci = np.arange(c)[None, :, None]
    np.add.at(out, (bi, ci, idx[:, None, :]), grad_out)
    return out


def phase_shuffle(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Randomly time-shift each example by up to n samples with reflection padding."""
    _check_3d(x, "phase_shuffle input")
    if n < 0:
        raise ShapeError(f"phase_shuffle n must be non-negative, got {n}")
    if n >= x.shape[2]:
        raise ShapeError(f"phase_shuffle n={n} must be smaller than length {x.shape[2]}")
    if n == 0:
        return x.copy()
    shifts = sample_phase_shifts(x.shape[0], n, rng)
    return phase_shuffle_apply(x, shifts)


def require_finite(x: np.ndarray, what: str) -> np.ndarray:
    """Raise if the array holds NaN or Inf; used at loss boundaries."""
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x
