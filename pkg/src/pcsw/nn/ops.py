"""Primitive differentiable operations: dense/conv layers, pooling, reductions.

Each primitive computes with plain numpy and, when a tape is active and any
input requires a gradient, records a closure that maps the output gradient to
input gradients. Convolutions use an im2col formulation so both directions
run as matrix products.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, accumulate_grad, active_tape, as_tensor

# Optional sink used by the gradient checker to observe relu activation signs
# (kink detection) without recording a full tape.
_RELU_SIGN_SINKS: list[list] = []


class relu_sign_probe:
    """Context manager collecting the boolean (x > 0) mask of every relu."""

    def __init__(self):
        self.masks: list[np.ndarray] = []

    def __enter__(self):
        _RELU_SIGN_SINKS.append(self.masks)
        return self

    def __exit__(self, exc_type, exc, tb):
        _RELU_SIGN_SINKS.remove(self.masks)
        return False


def _record(out: Tensor, inputs: tuple, backward_fn) -> Tensor:
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, backward_fn)
    return out


# ---------------------------------------------------------------------------
# elementwise and linear algebra
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)

    def backward(g):
        accumulate_grad(a, g)
        accumulate_grad(b, g)

    return _record(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)

    def backward(g):
        accumulate_grad(a, g)
        accumulate_grad(b, -g)

    return _record(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)

    def backward(g):
        accumulate_grad(a, g * b.data)
        accumulate_grad(b, g * a.data)

    return _record(out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)

    def backward(g):
        accumulate_grad(a, -g)

    return _record(out, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward(g):
        accumulate_grad(a, g @ b.data.T)
        accumulate_grad(b, a.data.T @ g)

    return _record(out, (a, b), backward)


def dense(x, W, b) -> Tensor:
    """Affine map y = x W + b for x of shape [batch, in]."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.data.ndim != 2 or W.data.ndim != 2:
        raise ValueError(f"dense expects 2-D x and W, got {x.shape}, {W.shape}")
    if x.shape[1] != W.shape[0]:
        raise ValueError(f"dense shape mismatch: x {x.shape} vs W {W.shape}")
    if b.shape != (W.shape[1],):
        raise ValueError(f"dense bias shape {b.shape} != ({W.shape[1]},)")
    out = Tensor(x.data @ W.data + b.data)

    def backward(g):
        accumulate_grad(x, g @ W.data.T)
        accumulate_grad(W, x.data.T @ g)
        accumulate_grad(b, g.sum(axis=0))

    return _record(out, (x, W, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0.0
    for sink in _RELU_SIGN_SINKS:
        sink.append(mask)
    out = Tensor(np.where(mask, x.data, 0.0))

    def backward(g):
        accumulate_grad(x, g * mask)

    return _record(out, (x,), backward)


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"transpose expects a 2-D tensor, got shape {x.shape}")
    out = Tensor(x.data.T)

    def backward(g):
        accumulate_grad(x, g.T)

    return _record(out, (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape))
    in_shape = x.data.shape

    def backward(g):
        accumulate_grad(x, g.reshape(in_shape))

    return _record(out, (x,), backward)


def sum_(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.sum(axis=axis))
    in_shape = x.data.shape

    def backward(g):
        if axis is None:
            accumulate_grad(x, np.broadcast_to(g, in_shape))
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g_keep = np.expand_dims(g, axes)
            accumulate_grad(x, np.broadcast_to(g_keep, in_shape))

    return _record(out, (x,), backward)


def mean_(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.mean(axis=axis))
    in_shape = x.data.shape
    if axis is None:
        count = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([in_shape[a] for a in axes]))

    def backward(g):
        if axis is None:
            accumulate_grad(x, np.broadcast_to(g / count, in_shape))
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g_keep = np.expand_dims(g / count, axes)
            accumulate_grad(x, np.broadcast_to(g_keep, in_shape))

    return _record(out, (x,), backward)


def mse(pred, target) -> Tensor:
    """Mean squared error against a constant target."""
    pred = as_tensor(pred)
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if pred.shape != t.shape:
        raise ValueError(f"mse shape mismatch: {pred.shape} vs {t.shape}")
    diff = pred.data - t
    out = Tensor(np.mean(diff * diff))

    def backward(g):
        accumulate_grad(pred, g * 2.0 * diff / diff.size)

    return _record(out, (pred,), backward)


# ---------------------------------------------------------------------------
# spatial operations (NHWC layout)
# ---------------------------------------------------------------------------


def _pad_amount(k: int, padding: str) -> int:
    if padding == "same":
        return (k - 1) // 2
    if padding == "valid":
        return 0
    raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")


def _im2col(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    """Extract [N, Ho, Wo, k, k, C] patches from a padded NHWC array."""
    n, hp, wp, c = xp.shape
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, ho, wo, k, k, c),
        strides=(s0, s1 * stride, s2 * stride, s1, s2, s3),
        writeable=False,
    )
    return view.reshape(n * ho * wo, k * k * c)


def conv2d(x, K, b=None, stride: int = 1, padding: str = "same") -> Tensor:
    """Cross-correlation convolution of NHWC ``x`` with kernel [k, k, Cin, Cout]."""
    x, K = as_tensor(x), as_tensor(K)
    if x.data.ndim != 4:
        raise ValueError(f"conv2d expects NHWC input, got shape {x.shape}")
    k = K.shape[0]
    if K.data.ndim != 4 or K.shape[1] != k:
        raise ValueError(f"conv2d kernel must be [k, k, Cin, Cout], got {K.shape}")
    if k % 2 != 1:
        raise ValueError(f"conv2d kernel size must be odd, got {k}")
    if K.shape[2] != x.shape[3]:
        raise ValueError(f"channel mismatch: input {x.shape[3]} vs kernel {K.shape[2]}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    cin, cout = K.shape[2], K.shape[3]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (cout,):
            raise ValueError(f"conv2d bias shape {b.shape} != ({cout},)")

    p = _pad_amount(k, padding)
    n, h, w, _ = x.shape
    xp = np.pad(x.data, ((0, 0), (p, p), (p, p), (0, 0))) if p else x.data
    ho = (h + 2 * p - k) // stride + 1
    wo = (w + 2 * p - k) // stride + 1
    cols = _im2col(xp, k, stride)
    kmat = K.data.reshape(k * k * cin, cout)
    y = cols @ kmat
    if b is not None:
        y += b.data
    out = Tensor(y.reshape(n, ho, wo, cout))

    def backward(g):
        gflat = g.reshape(n * ho * wo, cout)
        if K.requires_grad:
            accumulate_grad(K, (cols.T @ gflat).reshape(K.shape))
        if b is not None and b.requires_grad:
            accumulate_grad(b, gflat.sum(axis=0))
        if x.requires_grad:
            if stride == 1:
                gd = g
            else:
                # dilate the output gradient back to unit stride
                gd = np.zeros((n, (ho - 1) * stride + 1, (wo - 1) * stride + 1, cout))
                gd[:, ::stride, ::stride, :] = g
            # full correlation of the (dilated) gradient with the flipped kernel
            kf = K.data[::-1, ::-1, :, :].transpose(0, 1, 3, 2)  # [k,k,Cout,Cin]
            pg = k - 1
            gp = np.pad(gd, ((0, 0), (pg, pg), (pg, pg), (0, 0)))
            gcols = _im2col(gp, k, 1)
            dxp = gcols @ kf.reshape(k * k * cout, cin)
            dxp = dxp.reshape(n, gp.shape[1] - k + 1, gp.shape[2] - k + 1, cin)
            hp, wp = h + 2 * p, w + 2 * p
            canvas = np.zeros((n, hp, wp, cin))
            canvas[:, : dxp.shape[1], : dxp.shape[2], :] = dxp
            accumulate_grad(x, canvas[:, p : p + h, p : p + w, :])

    return _record(out, (x, K) if b is None else (x, K, b), backward)


def max_pool2(x) -> Tensor:
    """2x2 max pooling with stride 2; spatial dims must be even."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ValueError(f"max_pool2 expects NHWC input, got shape {x.shape}")
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"max_pool2 requires even spatial dims, got {h}x{w}")
    blocks = x.data.reshape(n, h // 2, 2, w // 2, 2, c)
    flat = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(n, h // 2, w // 2, c, 4)
    arg = flat.argmax(axis=-1)
    out = Tensor(np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0])

    def backward(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, arg[..., None], g[..., None], axis=-1)
        dx = dflat.reshape(n, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        accumulate_grad(x, dx.reshape(n, h, w, c))

    return _record(out, (x,), backward)


def upsample_nearest2(x) -> Tensor:
    """2x nearest-neighbour enlargement of the spatial dims."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ValueError(f"upsample_nearest2 expects NHWC input, got shape {x.shape}")
    n, h, w, c = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2))

    def backward(g):
        dx = g.reshape(n, h, 2, w, 2, c).sum(axis=(2, 4))
        accumulate_grad(x, dx)

    return _record(out, (x,), backward)
