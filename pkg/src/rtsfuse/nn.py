"""Minimal neural-network kernels with exact analytic gradients.

Everything trains at desk scale on the CPU: dense, causal 1-D convolution,
and GRU layers, a stable softmax, summed categorical cross-entropy, and a
bias-corrected Adam optimizer.  Arrays are plain numpy ndarrays; float32 is
the working precision, float64 exists for gradient checking only.

Conventions fixed here and relied on by the checkpoint format:

* GRU uses two bias vectors (``b_ih`` and ``b_hh``) and gate order
  reset, update, candidate within each ``3h`` block.  The reset gate is
  applied to ``W_hh @ h + b_hh`` before mixing into the candidate.
  Parameter count is ``3h*i + 3h*h + 6h``.
* Convolutions are causal: ``kernel - 1`` frames of left padding, stride 1,
  output length equals input length.
* Weights initialize uniform in ``±sqrt(6 / (fan_in + fan_out))``, biases
  to zero, from a caller-supplied seeded generator.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, NumericFailureError

__all__ = [
    "softmax",
    "cross_entropy",
    "relu",
    "relu_grad",
    "Dense",
    "Conv1D",
    "GRU",
    "Adam",
    "count_parameters",
    "finite_difference_check",
]


def softmax(logits, axis=-1):
    """Stable softmax along ``axis`` (max subtraction before exponentiation).

    Raises InvalidInputError if any input is non-finite.
    """
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("softmax: non-finite logits")
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(logits, axis=-1):
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("log_softmax: non-finite logits")
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def cross_entropy(logits, labels, class_weights=None):
    """Summed categorical cross-entropy over a batch of labeled frames.

    ``logits`` and ``labels`` share a shape ``[..., K]`` where ``labels``
    rows are one-hot.  The loss is the plain sum over every frame (no
    averaging), and the returned gradient with respect to the logits is
    ``softmax(logits) - labels`` per frame (scaled by the frame's class
    weight when ``class_weights`` is given).

    Returns ``(loss, dlogits)``.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.shape != labels.shape:
        raise InvalidInputError(
            f"cross_entropy: logits shape {logits.shape} != labels shape {labels.shape}"
        )
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_labels = labels.reshape(-1, labels.shape[-1])
    if not np.all(np.isfinite(flat_logits)):
        raise InvalidInputError("cross_entropy: non-finite logits")
    # Same arithmetic as softmax() so that the returned gradient equals
    # softmax(logits) - labels bit-for-bit.
    shifted = flat_logits - np.max(flat_logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    z = np.sum(e, axis=-1, keepdims=True)
    probs = e / z
    logs = shifted - np.log(z)
    if class_weights is None:
        frame_w = np.ones(flat_labels.shape[0], dtype=logs.dtype)
    else:
        class_weights = np.asarray(class_weights, dtype=logs.dtype)
        if class_weights.shape != (logits.shape[-1],):
            raise InvalidInputError("cross_entropy: class_weights must have one entry per class")
        frame_w = flat_labels @ class_weights
    loss = -float(np.sum(frame_w * np.sum(flat_labels * logs, axis=-1)))
    dlogits = frame_w[:, None] * (probs - flat_labels)
    return loss, dlogits.reshape(logits.shape).astype(logits.dtype, copy=False)


def relu(x):
    return np.maximum(x, 0)


def relu_grad(dy, x):
    return dy * (x > 0)


def _glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _check_finite_grads(name, grad):
    if not np.all(np.isfinite(grad)):
        raise NumericFailureError(f"non-finite gradient for parameter '{name}'")


class Dense:
    """Fully connected layer ``y = x @ W.T + b``.

    ``x`` may carry any number of leading batch dims; the last dim must be
    ``in_dim``.  Gradients accumulate into ``.grads`` until ``zero_grads``.
    """

    kind = "dense"

    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        if rng is None:
            self.W = np.zeros((out_dim, in_dim), dtype=dtype)
        else:
            self.W = _glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim, dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self.zero_grads()
        self._x = None

    def named_parameters(self):
        return [("W", self.W), ("b", self.b)]

    def named_gradients(self):
        return [("W", self.grads["W"]), ("b", self.grads["b"])]

    def zero_grads(self):
        self.grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}

    def forward(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.in_dim:
            raise InvalidInputError(
                f"dense: input dim {x.shape[-1]} != layer in_dim {self.in_dim}"
            )
        self._x = x
        return x @ self.W.T + self.b

    def infer(self, x):
        """Forward pass whose result is independent of the batch size.

        BLAS matmuls pick different reduction orders for different shapes;
        einsum keeps one order, so streaming (one window) and batch (many
        windows) inference agree bit-for-bit.  No cache, no backward.
        """
        x = np.asarray(x)
        if x.shape[-1] != self.in_dim:
            raise InvalidInputError(
                f"dense: input dim {x.shape[-1]} != layer in_dim {self.in_dim}"
            )
        return np.einsum("...i,oi->...o", x, self.W) + self.b

    def backward(self, dy):
        x = self._x
        if x is None:
            raise RuntimeError("dense backward called before forward")
        x2 = x.reshape(-1, self.in_dim)
        dy2 = np.asarray(dy).reshape(-1, self.out_dim)
        self.grads["W"] += dy2.T @ x2
        self.grads["b"] += dy2.sum(axis=0)
        return (dy2 @ self.W).reshape(x.shape)

    @property
    def param_count(self):
        return self.W.size + self.b.size

    def astype(self, dtype):
        out = Dense(self.in_dim, self.out_dim, dtype=dtype)
        out.W[...] = self.W.astype(dtype)
        out.b[...] = self.b.astype(dtype)
        return out


class Conv1D:
    """Causal 1-D convolution along the time axis, stride 1.

    Input ``[B, T, C]`` (or ``[T, C]``), output ``[B, T, F]``.  ``kernel-1``
    zero frames are implicitly prepended, so the output at time t sees only
    inputs at times ``<= t`` and output length equals input length.
    """

    kind = "conv1d"

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float32):
        self.in_channels = int(in_channels)
        self.filters = int(filters)
        self.kernel = int(kernel)
        shape = (filters, kernel, in_channels)
        if rng is None:
            self.W = np.zeros(shape, dtype=dtype)
        else:
            self.W = _glorot_uniform(
                rng, shape, kernel * in_channels, kernel * filters, dtype
            )
        self.b = np.zeros(filters, dtype=dtype)
        self.zero_grads()
        self._xpad = None
        self._squeeze = False

    def named_parameters(self):
        return [("W", self.W), ("b", self.b)]

    def named_gradients(self):
        return [("W", self.grads["W"]), ("b", self.grads["b"])]

    def zero_grads(self):
        self.grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}

    def forward(self, x):
        x = np.asarray(x)
        self._squeeze = x.ndim == 2
        if self._squeeze:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.in_channels:
            raise InvalidInputError(
                f"conv1d: expected [..., T, {self.in_channels}], got {x.shape}"
            )
        B, T, C = x.shape
        k = self.kernel
        xpad = np.zeros((B, T + k - 1, C), dtype=x.dtype)
        xpad[:, k - 1 :, :] = x
        self._xpad = xpad
        y = np.broadcast_to(self.b, (B, T, self.filters)).copy()
        for j in range(k):
            y += xpad[:, j : j + T, :] @ self.W[:, j, :].T
        return y[0] if self._squeeze else y

    def infer(self, x):
        """Batch-size-invariant forward (einsum, no cache); see Dense.infer."""
        x = np.asarray(x)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.ndim != 3 or x.shape[-1] != self.in_channels:
            raise InvalidInputError(
                f"conv1d: expected [..., T, {self.in_channels}], got {x.shape}"
            )
        B, T, C = x.shape
        k = self.kernel
        xpad = np.zeros((B, T + k - 1, C), dtype=x.dtype)
        xpad[:, k - 1 :, :] = x
        y = np.broadcast_to(self.b, (B, T, self.filters)).copy()
        for j in range(k):
            y += np.einsum("btc,fc->btf", xpad[:, j : j + T, :], self.W[:, j, :])
        return y[0] if squeeze else y

    def backward(self, dy):
        xpad = self._xpad
        if xpad is None:
            raise RuntimeError("conv1d backward called before forward")
        dy = np.asarray(dy)
        if self._squeeze:
            dy = dy[None]
        B, Tp, C = xpad.shape
        k = self.kernel
        T = Tp - (k - 1)
        self.grads["b"] += dy.sum(axis=(0, 1))
        dxpad = np.zeros_like(xpad)
        dy2 = dy.reshape(-1, self.filters)
        for j in range(k):
            xs = xpad[:, j : j + T, :].reshape(-1, C)
            self.grads["W"][:, j, :] += dy2.T @ xs
            dxpad[:, j : j + T, :] += dy @ self.W[:, j, :]
        dx = dxpad[:, k - 1 :, :]
        return dx[0] if self._squeeze else dx

    @property
    def param_count(self):
        return self.W.size + self.b.size

    def astype(self, dtype):
        out = Conv1D(self.in_channels, self.filters, self.kernel, dtype=dtype)
        out.W[...] = self.W.astype(dtype)
        out.b[...] = self.b.astype(dtype)
        return out


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class GRU:
    """Single GRU layer with dual biases, batch-first sequences.

    Gate blocks within the ``3h`` axis are ordered reset, update, candidate:

        r = sigmoid(Wi_r x + bi_r + Wh_r h + bh_r)
        z = sigmoid(Wi_z x + bi_z + Wh_z h + bh_z)
        n = tanh(Wi_n x + bi_n + r * (Wh_n h + bh_n))
        h' = (1 - z) * n + z * h
    """

    kind = "gru"

    def __init__(self, input_dim, hidden_dim, rng=None, dtype=np.float32):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        i, h = self.input_dim, self.hidden_dim
        if rng is None:
            self.W_ih = np.zeros((3 * h, i), dtype=dtype)
            self.W_hh = np.zeros((3 * h, h), dtype=dtype)
        else:
            self.W_ih = _glorot_uniform(rng, (3 * h, i), i, 3 * h, dtype)
            self.W_hh = _glorot_uniform(rng, (3 * h, h), h, 3 * h, dtype)
        self.b_ih = np.zeros(3 * h, dtype=dtype)
        self.b_hh = np.zeros(3 * h, dtype=dtype)
        self.zero_grads()
        self._cache = None

    def named_parameters(self):
        return [
            ("W_ih", self.W_ih),
            ("W_hh", self.W_hh),
            ("b_ih", self.b_ih),
            ("b_hh", self.b_hh),
        ]

    def named_gradients(self):
        return [(k, self.grads[k]) for k, _ in self.named_parameters()]

    def zero_grads(self):
        self.grads = {
            "W_ih": np.zeros_like(self.W_ih),
            "W_hh": np.zeros_like(self.W_hh),
            "b_ih": np.zeros_like(self.b_ih),
            "b_hh": np.zeros_like(self.b_hh),
        }

    def initial_state(self, batch=None, dtype=None):
        dtype = dtype or self.W_ih.dtype
        if batch is None:
            return np.zeros(self.hidden_dim, dtype=dtype)
        return np.zeros((batch, self.hidden_dim), dtype=dtype)

    def step(self, x, h):
        """One recurrence step; ``x``/``h`` may be 1-D or ``[B, ...]``.

        1-D inputs are promoted to a batch of one so the matmul shapes
        match the unrolled ``forward`` exactly (bit-identical streaming).
        """
        x = np.asarray(x)
        h = np.asarray(h)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None]
            h = h[None]
        h_new, _ = self._step_full(x, h)
        return h_new[0] if squeeze else h_new

    def _step_full(self, x, h):
        hd = self.hidden_dim
        gi = x @ self.W_ih.T + self.b_ih
        gh = h @ self.W_hh.T + self.b_hh
        r = _sigmoid(gi[..., :hd] + gh[..., :hd])
        z = _sigmoid(gi[..., hd : 2 * hd] + gh[..., hd : 2 * hd])
        ghn = gh[..., 2 * hd :]
        n = np.tanh(gi[..., 2 * hd :] + r * ghn)
        h_new = (1.0 - z) * n + z * h
        return h_new, (r, z, n, ghn)

    def forward(self, xs, h0=None):
        """Unroll over ``xs`` of shape ``[B, T, input_dim]``.

        Returns hidden states ``[B, T, hidden_dim]`` and caches the
        intermediates needed by ``backward``.
        """
        xs = np.asarray(xs)
        if xs.ndim != 3 or xs.shape[-1] != self.input_dim:
            raise InvalidInputError(
                f"gru: expected [B, T, {self.input_dim}], got {xs.shape}"
            )
        B, T, _ = xs.shape
        h = self.initial_state(B, dtype=xs.dtype) if h0 is None else np.asarray(h0)
        hs = np.empty((B, T, self.hidden_dim), dtype=xs.dtype)
        cache = []
        for t in range(T):
            h_prev = h
            h, (r, z, n, ghn) = self._step_full(xs[:, t, :], h_prev)
            hs[:, t, :] = h
            cache.append((h_prev, r, z, n, ghn))
        self._cache = (xs, cache)
        return hs

    def backward(self, dhs):
        """Backprop through time given upstream gradients ``[B, T, h]``."""
        if self._cache is None:
            raise RuntimeError("gru backward called before forward")
        xs, cache = self._cache
        B, T, _ = xs.shape
        hd = self.hidden_dim
        dxs = np.zeros_like(xs)
        carry = np.zeros((B, hd), dtype=xs.dtype)
        dW_ih = self.grads["W_ih"]
        dW_hh = self.grads["W_hh"]
        for t in range(T - 1, -1, -1):
            h_prev, r, z, n, ghn = cache[t]
            dh = dhs[:, t, :] + carry
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dn_pre = dn * (1.0 - n * n)
            dr = dn_pre * ghn
            dgi = np.concatenate(
                [dr * r * (1.0 - r), dz * z * (1.0 - z), dn_pre], axis=-1
            )
            dgh = np.concatenate(
                [dgi[..., :hd], dgi[..., hd : 2 * hd], dn_pre * r], axis=-1
            )
            dW_ih += dgi.T @ xs[:, t, :]
            dW_hh += dgh.T @ h_prev
            self.grads["b_ih"] += dgi.sum(axis=0)
            self.grads["b_hh"] += dgh.sum(axis=0)
            dxs[:, t, :] = dgi @ self.W_ih
            carry = dh * z + dgh @ self.W_hh
        return dxs

    @property
    def param_count(self):
        return self.W_ih.size + self.W_hh.size + self.b_ih.size + self.b_hh.size

    def astype(self, dtype):
        out = GRU(self.input_dim, self.hidden_dim, dtype=dtype)
        out.W_ih[...] = self.W_ih.astype(dtype)
        out.W_hh[...] = self.W_hh.astype(dtype)
        out.b_ih[...] = self.b_ih.astype(dtype)
        out.b_hh[...] = self.b_hh.astype(dtype)
        return out


class Adam:
    """Bias-corrected Adam over a list of named parameter arrays.

    Parameters update in place.  Two optimizers built over identical
    parameters and fed identical gradients produce bit-identical updates.
    """

    def __init__(self, named_params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.named_params = list(named_params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p) for _, p in self.named_params]
        self.v = [np.zeros_like(p) for _, p in self.named_params]

    def step(self, grads, lr=None):
        """Apply one update given gradients aligned with the parameter list."""
        lr = self.lr if lr is None else float(lr)
        if len(grads) != len(self.named_params):
            raise InvalidInputError(
                f"adam: got {len(grads)} gradients for {len(self.named_params)} parameters"
            )
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for i, (name, p) in enumerate(self.named_params):
            g = np.asarray(grads[i])
            if g.shape != p.shape:
                raise InvalidInputError(
                    f"adam: gradient shape {g.shape} != parameter '{name}' shape {p.shape}"
                )
            _check_finite_grads(name, g)
            m = self.m[i]
            v = self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= (lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)).astype(p.dtype)


def count_parameters(model):
    """Exact number of trainable scalars in a layer, model, or list of them."""
    if isinstance(model, (list, tuple)):
        return sum(count_parameters(m) for m in model)
    if hasattr(model, "named_parameters"):
        return int(sum(p.size for _, p in model.named_parameters()))
    raise TypeError(f"cannot count parameters of {type(model)!r}")


def finite_difference_check(model, loss_fn, n_samples=100, step=1e-5, rng=None):
    """Compare analytic gradients against float64 central differences.

    ``loss_fn(model)`` must run a forward and backward pass and return the
    scalar loss; analytic gradients are then read from
    ``model.named_gradients()``.  ``n_samples`` parameters are sampled
    uniformly across all arrays (all of them if the model is smaller).
    Returns the maximum relative error observed.
    """
    params = model.named_parameters()
    for name, p in params:
        if p.dtype != np.float64:
            raise InvalidInputError(
                f"finite_difference_check requires float64 parameters ('{name}' is {p.dtype})"
            )
    if rng is None:
        rng = np.random.default_rng(0)

    model.zero_grads()
    loss_fn(model)
    analytic = {name: g.copy() for name, g in model.named_gradients()}

    sizes = [p.size for _, p in params]
    total = int(np.sum(sizes))
    flat_idx = rng.choice(total, size=min(n_samples, total), replace=False)
    bounds = np.cumsum([0] + sizes)

    max_rel = 0.0
    for fi in flat_idx:
        which = int(np.searchsorted(bounds, fi, side="right") - 1)
        name, p = params[which]
        local = int(fi - bounds[which])
        orig = p.flat[local]
        p.flat[local] = orig + step
        loss_plus = loss_fn(model)
        p.flat[local] = orig - step
        loss_minus = loss_fn(model)
        p.flat[local] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        ana = analytic[name].flat[local]
        rel = abs(ana - numeric) / max(abs(ana) + abs(numeric), 1e-3)
        max_rel = max(max_rel, rel)
    return max_rel
