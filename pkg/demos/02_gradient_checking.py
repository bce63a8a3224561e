"""Check analytic gradients against double-precision central differences.

Run:  python demos/02_gradient_checking.py
"""

import numpy as np

from cubenn import Conv3d
from cubenn.layers import conv3d_backward, conv3d_forward, softmax_cross_entropy

rng = np.random.default_rng(0)

print("=== Volumetric convolution, stride (2,1,1), spectral padding ===\n")
layer = Conv3d(2, 3, kernel=(3, 3, 3), stride=(2, 1, 1), pad=(1, 0, 0))
layer.weights[...] = rng.uniform(-0.5, 0.5, layer.weights.shape).astype(np.float32)
layer.bias[...] = rng.uniform(-0.5, 0.5, layer.bias.shape).astype(np.float32)
x = rng.uniform(-0.5, 0.5, (2, 7, 3, 3)).astype(np.float32)

out = conv3d_forward(x, layer, cache=True)
probe = rng.uniform(-1, 1, out.shape).astype(np.float32)
grad_in, grad_w, grad_b = conv3d_backward(layer, probe)


def loss_at(x64, w64, b64):
    """Linear probe of the convolution output, evaluated in float64."""
    total = 0.0
    fo, ho, wo = out.shape[1:]
    xp = np.pad(x64, ((0, 0), (1, 1), (0, 0), (0, 0)))
    for k in range(3):
        for a in range(fo):
            for b_ in range(ho):
                for c in range(wo):
                    window = xp[:, 2 * a: 2 * a + 3, b_: b_ + 3, c: c + 3]
                    total += (float((window * w64[k]).sum()) + b64[k]) * probe[k, a, b_, c]
    return total


h = 1e-3
x64 = x.astype(np.float64)
w64 = layer.weights.astype(np.float64)
b64 = layer.bias.astype(np.float64)

flat = w64.reshape(-1)
worst = 0.0
for i in range(0, flat.size, 7):  # spot-check every 7th weight
    orig = flat[i]
    flat[i] = orig + h
    fp = loss_at(x64, w64, b64)
    flat[i] = orig - h
    fm = loss_at(x64, w64, b64)
    flat[i] = orig
    fd = (fp - fm) / (2 * h)
    analytic = grad_w.reshape(-1)[i]
    rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-2)
    worst = max(worst, rel)
print(f"weight gradients vs finite differences: worst relative error {worst:.2e}")

print("\n=== Softmax + cross-entropy ===\n")
logits = rng.normal(size=(4, 9)).astype(np.float32)
labels = rng.integers(0, 9, 4)
loss, grad = softmax_cross_entropy(logits.copy(), labels)
l64 = logits.astype(np.float64)
worst = 0.0
for i in range(l64.size):
    orig = l64.reshape(-1)[i]
    for sign, store in ((+1, "fp"), (-1, "fm")):
        l64.reshape(-1)[i] = orig + sign * h
        z = l64 - l64.max(axis=1, keepdims=True)
        p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        val = float(-np.log(p[np.arange(4), labels]).mean())
        if sign > 0:
            fp = val
        else:
            fm = val
    l64.reshape(-1)[i] = orig
    fd = (fp - fm) / (2 * h)
    rel = abs(grad.reshape(-1)[i] - fd) / max(abs(fd), 1e-2)
    worst = max(worst, rel)
print(f"logit gradients vs finite differences: worst relative error {worst:.2e}")
print(f"batch loss {loss:.4f}")
print("\nThe full randomized battery lives in tests/test_acceptance.py.")
