"""Forward and backward passes for every layer kind in the pipeline.

Feature maps use axis order (channels, spectral, height, width); batched
calls prepend a sample axis.  The volumetric convolution is implemented as
a patch-gather (im2col over the three sliding axes) followed by one matrix
product, so a single code path serves 3D kernels, spectral-only 1x1xk
kernels, and the stride-2 "ConvPool" downsampling layers.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidGeometryError, ShapeMismatchError
from .tensor import F32, Tensor

Triple = tuple[int, int, int]


def size_out(size_in: int, kernel: int, pad: int, stride: int) -> int:
    """Output length of one convolution axis: floor((in - k + 2*pad)/stride) + 1."""
    if size_in < 1 or kernel < 1 or stride < 1 or pad < 0:
        raise InvalidGeometryError(
            f"invalid axis geometry: size_in={size_in} kernel={kernel} pad={pad} stride={stride}"
        )
    if kernel > size_in + 2 * pad:
        raise InvalidGeometryError(
            f"kernel {kernel} larger than padded input {size_in} + 2*{pad}"
        )
    return (size_in - kernel + 2 * pad) // stride + 1


class Conv3d:
    """Volumetric convolution over (spectral, height, width) with zero padding.

    weights: [filters, in_channels, k_spec, k_h, k_w], bias: [filters].
    ``forward`` accepts [N, C, F, H, W]; set ``cache=True`` during training so
    ``backward`` can reuse the gathered patches.
    """

    def __init__(self, in_channels: int, filters: int, kernel: Triple,
                 stride: Triple = (1, 1, 1), pad: Triple = (0, 0, 0)):
        self.in_channels = int(in_channels)
        self.filters = int(filters)
        self.kernel = tuple(int(k) for k in kernel)
        self.stride = tuple(int(s) for s in stride)
        self.pad = tuple(int(p) for p in pad)
        self.weights = np.zeros((self.filters, self.in_channels) + self.kernel, F32)
        self.bias = np.zeros(self.filters, F32)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def out_shape(self, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
        return tuple(
            size_out(in_shape[a], self.kernel[a], self.pad[a], self.stride[a])
            for a in range(3)
        )

    def param_count(self) -> int:
        return self.weights.size + self.bias.size

    def _padded(self, x: Tensor) -> Tensor:
        """Zero-pad the three sliding axes (cheaper than np.pad, copies once)."""
        if self.pad == (0, 0, 0) and x.flags.c_contiguous:
            return x
        pf, ph, pw = self.pad
        n, c, f, h, w = x.shape
        xp = np.zeros((n, c, f + 2 * pf, h + 2 * ph, w + 2 * pw), F32)
        xp[:, :, pf: pf + f, ph: ph + h, pw: pw + w] = x
        return xp

    def _gather(self, xp: Tensor, out_dims: tuple[int, int, int]) -> Tensor:
        """im2col: [N, Cin, Fp, Hp, Wp] -> [N, Cin*kf*kh*kw, Fo*Ho*Wo]."""
        n = xp.shape[0]
        kf, kh, kw = self.kernel
        sf, sh, sw = self.stride
        fo, ho, wo = out_dims
        cols = np.empty((n, self.in_channels, kf, kh, kw, fo, ho, wo), F32)
        for i in range(kf):
            for j in range(kh):
                for l in range(kw):
                    cols[:, :, i, j, l] = xp[
                        :, :,
                        i: i + (fo - 1) * sf + 1: sf,
                        j: j + (ho - 1) * sh + 1: sh,
                        l: l + (wo - 1) * sw + 1: sw,
                    ]
        return cols.reshape(n, self.in_channels * kf * kh * kw, fo * ho * wo)

    def forward(self, x: Tensor, cache: bool = False) -> Tensor:
        if x.ndim != 5 or x.shape[1] != self.in_channels:
            raise ShapeMismatchError(
                f"expected input [N, {self.in_channels}, F, H, W], got {tuple(x.shape)}"
            )
        out_dims = self.out_shape(x.shape[2:])
        xp = self._padded(x)
        cols = self._gather(xp, out_dims)
        w_mat = self.weights.reshape(self.filters, -1)
        out = np.matmul(w_mat, cols)                      # [N, filters, positions]
        out += self.bias[None, :, None]
        out = out.reshape((x.shape[0], self.filters) + out_dims)
        self._cache = (xp.shape, cols, out_dims) if cache else None
        return out

    def backward(self, grad_out: Tensor) -> Tensor:
        """Accumulate weight/bias gradients and return the input gradient."""
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        xp_shape, cols, out_dims = self._cache
        n = xp_shape[0]
        expected = (n, self.filters) + out_dims
        if tuple(grad_out.shape) != expected:
            raise ShapeMismatchError(f"grad_out {tuple(grad_out.shape)} != forward output {expected}")

        kf, kh, kw = self.kernel
        sf, sh, sw = self.stride
        fo, ho, wo = out_dims
        g_mat = grad_out.reshape(n, self.filters, -1).astype(F32, copy=False)

        self.grad_bias += g_mat.sum(axis=(0, 2))
        gw = np.matmul(g_mat, cols.transpose(0, 2, 1)).sum(axis=0)
        self.grad_weights += gw.reshape(self.weights.shape)

        w_mat = self.weights.reshape(self.filters, -1)
        gcols = np.matmul(w_mat.T, g_mat)                 # [N, Cin*k, positions]
        gcols = gcols.reshape(n, self.in_channels, kf, kh, kw, fo, ho, wo)

        grad_xp = np.zeros(xp_shape, F32)
        for i in range(kf):
            for j in range(kh):
                for l in range(kw):
                    grad_xp[
                        :, :,
                        i: i + (fo - 1) * sf + 1: sf,
                        j: j + (ho - 1) * sh + 1: sh,
                        l: l + (wo - 1) * sw + 1: sw,
                    ] += gcols[:, :, i, j, l]
        pf, ph, pw = self.pad
        return grad_xp[
            :, :,
            pf: xp_shape[2] - pf,
            ph: xp_shape[3] - ph,
            pw: xp_shape[4] - pw,
        ]


def conv3d_forward(x: Tensor, layer: Conv3d, cache: bool = False) -> Tensor:
    """Single-sample convolution: [C, F, H, W] -> [filters, F', H', W']."""
    return layer.forward(x[None], cache=cache)[0]


def conv3d_backward(layer: Conv3d, grad_out: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Single-sample gradients (grad_input, grad_weights, grad_bias).

    Gradients w.r.t. parameters are also accumulated on the layer.
    """
    before_w = layer.grad_weights.copy()
    before_b = layer.grad_bias.copy()
    grad_in = layer.backward(grad_out[None])[0]
    return grad_in, layer.grad_weights - before_w, layer.grad_bias - before_b


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0)


def relu_backward(grad: Tensor, x: Tensor) -> Tensor:
    """Mask the gradient where the forward input was <= 0."""
    return np.where(x > 0, grad, 0).astype(grad.dtype, copy=False)


class Dense:
    """Fully connected layer: y = x @ weights + bias."""

    def __init__(self, in_dim: int, out_dim: int):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.weights = np.zeros((self.in_dim, self.out_dim), F32)
        self.bias = np.zeros(self.out_dim, F32)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    def param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim

    def forward(self, x: Tensor, cache: bool = False) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"expected input [N, {self.in_dim}], got {tuple(x.shape)}")
        out = x @ self.weights + self.bias
        self._cache = x if cache else None
        return out

    def backward(self, grad_out: Tensor) -> Tensor:
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        x = self._cache
        if grad_out.shape != (x.shape[0], self.out_dim):
            raise ShapeMismatchError(f"grad_out {tuple(grad_out.shape)} != [N, {self.out_dim}]")
        self.grad_weights += x.T @ grad_out
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weights.T


class Dropout:
    """Inverted dropout: scale kept activations by 1/(1-rate) at train time.

    In ``infer`` mode the forward pass is the identity, so inference never
    depends on the random stream.
    """

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.mode = "train"
        self.mask: Tensor | None = None

    def forward(self, x: Tensor, p) -> Tensor:
        if self.mode == "infer" or self.rate == 0.0:
            self.mask = None
            return x
        keep = 1.0 - self.rate
        self.mask = (p.uniform(x.shape) >= self.rate).astype(F32) / F32(keep)
        return x * self.mask

    def backward(self, grad: Tensor) -> Tensor:
        if self.mask is None:
            return grad
        return grad * self.mask


def dropout_forward(x: Tensor, layer: Dropout, p) -> Tensor:
    return layer.forward(x, p)


def softmax(logits: Tensor) -> Tensor:
    """Shift-invariant softmax along the last axis (max subtracted for stability)."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: Tensor, label: int) -> float:
    """-log(probs[label]) for one sample."""
    if not 0 <= label < probs.shape[-1]:
        raise IndexError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[label]), 1e-30)))


def softmax_cross_entropy_grad(probs: Tensor, label: int) -> Tensor:
    """Gradient of -log softmax(logits)[label] w.r.t. the logits: probs - onehot."""
    if not 0 <= label < probs.shape[-1]:
        raise IndexError(f"label {label} out of range for {probs.shape[-1]} classes")
    grad = probs.copy()
    grad[label] -= 1.0
    return grad


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> tuple[float, Tensor]:
    """Mean cross-entropy over a batch and its gradient w.r.t. the logits.

    logits: [N, nclass], labels: [N] int class indices.  The returned gradient
    is already divided by N, matching the mean loss.
    """
    n, nclass = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ShapeMismatchError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= nclass:
        raise IndexError(f"labels out of range for {nclass} classes")
    probs = softmax(logits)
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, 1e-30)).mean())
    grad = probs
    grad[np.arange(n), labels] -= 1.0
    grad /= F32(n)
    return loss, grad.astype(F32, copy=False)
