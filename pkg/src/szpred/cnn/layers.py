"""Forward/backward pairs for the layers of the network.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit


def conv_forward(x, w, b, stride=1):
    """Valid 2-D cross-correlation.

    x: (N, C, H, W), w: (F, C, kh, kw), b: (F,).  Output is
    (N, F, (H - kh) // stride + 1, (W - kw) // stride + 1).
    """
    _, _, kh, kw = w.shape
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("nchwij,fcij->nfhw", cols, w, optimize=True)
    out += b[None, :, None, None]
    return out, (x, w, stride)


def conv_backward(dout, cache):
    x, w, stride = cache
    _, _, kh, kw = w.shape
    _, _, ho, wo = dout.shape
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 2, 3]))
    db = dout.sum(axis=(0, 2, 3))
    # gradient per input patch, then scatter-add each kernel offset back
    dcols = np.tensordot(dout, w, axes=([1], [0])).transpose(0, 3, 4, 5, 1, 2)
    dx = np.zeros_like(x)
    hspan = stride * (ho - 1) + 1
    wspan = stride * (wo - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i:i + hspan:stride, j:j + wspan:stride] += dcols[:, :, i, j]
    return dx, dw, db


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(dout, x):
    return dout * (x > 0)


def maxpool_forward(x, size=2):
    """Non-overlapping ``size x size`` max pooling; trailing rows/cols are dropped."""
    if size == 1:
        return x, None
    n, c, h, w = x.shape
    ho, wo = h // size, w // size
    blocks = (x[:, :, :ho * size, :wo * size]
              .reshape(n, c, ho, size, wo, size)
              .transpose(0, 1, 2, 4, 3, 5)
              .reshape(n, c, ho, wo, size * size))
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, arg, size)


def maxpool_backward(dout, cache):
    if cache is None:
        return dout
    shape, arg, size = cache
    n, c, h, w = shape
    ho, wo = arg.shape[2:]
    blocks = np.zeros((n, c, ho, wo, size * size), dtype=dout.dtype)
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(shape, dtype=dout.dtype)
    dx[:, :, :ho * size, :wo * size] = (blocks.reshape(n, c, ho, wo, size, size)
                                        .transpose(0, 1, 2, 4, 3, 5)
                                        .reshape(n, c, ho * size, wo * size))
    return dx


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode,
                      eps=1e-5, momentum=0.9, update=True):
    """Spatial batch norm over (N, H, W) per channel.

    In train mode batch statistics are used and the running averages are
    updated in place (``running = momentum * running + (1 - momentum) * batch``).
    """
    if mode == "train":
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        if update:
            running_mean *= momentum
            running_mean += (1 - momentum) * mu
            running_var *= momentum
            running_var += (1 - momentum) * var
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
    out = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return out, (xhat, inv, gamma, mode)


def batchnorm_backward(dout, cache):
    xhat, inv, gamma, mode = cache
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * gamma[None, :, None, None]
    if mode != "train":
        return dxhat * inv[None, :, None, None], dgamma, dbeta
    m = xhat.shape[0] * xhat.shape[2] * xhat.shape[3]
    s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
    s2 = np.sum(dxhat * xhat, axis=(0, 2, 3))[None, :, None, None]
    dx = (inv[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


def affine_forward(x, w, b):
    flat = x.reshape(x.shape[0], -1)
    return flat @ w + b, (x, w)


def affine_backward(dout, cache):
    x, w = cache
    flat = x.reshape(x.shape[0], -1)
    return (dout @ w.T).reshape(x.shape), flat.T @ dout, dout.sum(axis=0)


def sigmoid_forward(x):
    out = expit(x)
    return out, out


def sigmoid_backward(dout, out):
    return dout * out * (1 - out)


def dropout_forward(x, rate, rng):
    """Inverted dropout; ``rng=None`` or ``rate=0`` is the identity."""
    if rng is None or rate <= 0:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1 - rate)
    return x * mask, mask


def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    n = probs.shape[0]
    p = probs[np.arange(n), labels]
    loss = -np.mean(np.log(np.maximum(p, np.finfo(probs.dtype).tiny)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1
    return float(loss), dlogits / n
