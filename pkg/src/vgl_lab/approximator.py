"""Smooth value-function approximators with analytic derivatives.

Both families multiply a raw parametric output by the state's normalized
remaining-time component, so the approximate value and its weight gradient
vanish identically at episode end (time component 0). Everything downstream
leans on that: backups never need special cases for the terminal value.

Derivative surface (orientation matches model.py: D[i, j] = d out_j / d in_i):

  value(x, w)                              scalar  V(x, w)
  state_gradient(x, w)                     (n,)    dV/dx
  weight_gradient(x, w)                    (dw,)   dV/dw
  state_hessian(x, w)                      (n, n)  d2V/dx2
  full_gradient_weight_jacobian(x, w)      (dw, n) d(dV/dx)/dw
  gradient_weight_jacobian_product(x,w,v)  (dw,)   the above times v, computed
                                                   directly in O(dw) work

The product form is what the batch learner consumes; the full matrix exists
for the online trace and for cross-checking the product path.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import DimensionMismatchError

WEIGHTS_MAGIC = b"VGLW"
WEIGHTS_VERSION = 1
WEIGHTS_JSON_FORMAT = "vgl-lab weights v1"
INIT_SCALE = 0.1  # initial weights drawn uniformly from [-INIT_SCALE, INIT_SCALE]


class ValueApproximator:
    kind = "base"

    def __init__(self, state_dim: int, time_index: int | None = None):
        self.state_dim = int(state_dim)
        self.time_index = self.state_dim - 1 if time_index is None else int(time_index)

    @property
    def dim_w(self) -> int:
        raise NotImplementedError

    def init_weights(self, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(-INIT_SCALE, INIT_SCALE, self.dim_w)

    def _check(self, x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if x.shape != (self.state_dim,):
            raise DimensionMismatchError(
                f"{self.kind}: state has shape {x.shape}, expected ({self.state_dim},)")
        if w.shape != (self.dim_w,):
            raise DimensionMismatchError(
                f"{self.kind}: weights have shape {w.shape}, expected ({self.dim_w},)")
        return x, w

    # single-point API ---------------------------------------------------------

    def value(self, x, w) -> float:
        raise NotImplementedError

    def state_gradient(self, x, w) -> np.ndarray:
        raise NotImplementedError

    def weight_gradient(self, x, w) -> np.ndarray:
        raise NotImplementedError

    def state_hessian(self, x, w) -> np.ndarray:
        raise NotImplementedError

    def full_gradient_weight_jacobian(self, x, w) -> np.ndarray:
        raise NotImplementedError

    def gradient_weight_jacobian_product(self, x, w, v) -> np.ndarray:
        raise NotImplementedError

    # batched API (one weight vector, many states) -----------------------------

    def value_many(self, X, w) -> np.ndarray:
        return np.array([self.value(x, w) for x in X])

    def state_gradient_many(self, X, w) -> np.ndarray:
        return np.array([self.state_gradient(x, w) for x in X])

    def state_hessian_many(self, X, w) -> np.ndarray:
        return np.array([self.state_hessian(x, w) for x in X])

    def full_gradient_weight_jacobian_many(self, X, w) -> np.ndarray:
        return np.array([self.full_gradient_weight_jacobian(x, w) for x in X])


class QuadraticValue(ValueApproximator):
    """Masked quadratic: V = (w . phi(x)) * tau with phi = (1, x_i, x_i x_j)."""

    kind = "quadratic"

    def __init__(self, state_dim, time_index=None):
        super().__init__(state_dim, time_index)
        n = self.state_dim
        self.pairs = [(i, j) for i in range(n) for j in range(i, n)]
        self._dim = 1 + n + len(self.pairs)
        # constant per-feature state Hessians (only quadratic features curve)
        hess_basis = np.zeros((self._dim, n, n))
        for k, (i, j) in enumerate(self.pairs):
            hess_basis[1 + n + k, i, j] += 1.0
            hess_basis[1 + n + k, j, i] += 1.0
        self._hess_basis = hess_basis

    @property
    def dim_w(self):
        return self._dim

    def _features(self, x):
        quad = np.array([x[i] * x[j] for (i, j) in self.pairs])
        return np.concatenate([[1.0], x, quad])

    def _feature_jacobian(self, x):
        # (dim_w, n): row k holds d phi_k / dx
        n = self.state_dim
        J = np.zeros((self._dim, n))
        J[1:n + 1] = np.eye(n)
        for k, (i, j) in enumerate(self.pairs):
            J[1 + n + k, i] += x[j]
            J[1 + n + k, j] += x[i]
        return J

    def value(self, x, w):
        x, w = self._check(x, w)
        return float((self._features(x) @ w) * x[self.time_index])

    def state_gradient(self, x, w):
        x, w = self._check(x, w)
        tau = x[self.time_index]
        raw = self._features(x) @ w
        raw_grad = self._feature_jacobian(x).T @ w
        g = tau * raw_grad
        g[self.time_index] += raw
        return g

    def weight_gradient(self, x, w):
        x, w = self._check(x, w)
        return x[self.time_index] * self._features(x)

    def state_hessian(self, x, w):
        x, w = self._check(x, w)
        tau = x[self.time_index]
        raw_grad = self._feature_jacobian(x).T @ w
        raw_hess = np.einsum("k,kij->ij", w, self._hess_basis)
        H = tau * raw_hess
        H[self.time_index, :] += raw_grad
        H[:, self.time_index] += raw_grad
        return H

    def full_gradient_weight_jacobian(self, x, w):
        x, w = self._check(x, w)
        tau = x[self.time_index]
        out = tau * self._feature_jacobian(x)
        out[:, self.time_index] += self._features(x)
        return out

    def gradient_weight_jacobian_product(self, x, w, v):
        x, w = self._check(x, w)
        v = np.asarray(v, dtype=float)
        tau = x[self.time_index]
        return tau * (self._feature_jacobian(x) @ v) + self._features(x) * v[self.time_index]

    def value_many(self, X, w):
        X = np.asarray(X, dtype=float)
        feats = np.empty((X.shape[0], self._dim))
        feats[:, 0] = 1.0
        feats[:, 1:self.state_dim + 1] = X
        for k, (i, j) in enumerate(self.pairs):
            feats[:, 1 + self.state_dim + k] = X[:, i] * X[:, j]
        return (feats @ w) * X[:, self.time_index]


class TanhNetValue(ValueApproximator):
    """Masked one-hidden-layer tanh network, linear output head.

    raw(x) = w2 . tanh(W1 x + b1) + b2,  V = raw * tau.
    Weight layout: W1 rows (hidden, n) flattened, then b1, w2, b2.
    """

    kind = "mlp"

    def __init__(self, state_dim, time_index=None, hidden=12):
        super().__init__(state_dim, time_index)
        self.hidden = int(hidden)

    @property
    def dim_w(self):
        return self.hidden * (self.state_dim + 2) + 1

    def _unpack(self, w):
        H, n = self.hidden, self.state_dim
        W1 = w[:H * n].reshape(H, n)
        b1 = w[H * n:H * n + H]
        w2 = w[H * n + H:H * n + 2 * H]
        b2 = w[-1]
        return W1, b1, w2, b2

    def _forward(self, x, w):
        W1, b1, w2, b2 = self._unpack(w)
        h = np.tanh(W1 @ x + b1)
        g = 1.0 - h * h          # tanh'
        raw = w2 @ h + b2
        return W1, b1, w2, h, g, raw

    def value(self, x, w):
        x, w = self._check(x, w)
        *_, raw = self._forward(x, w)
        return float(raw * x[self.time_index])

    def state_gradient(self, x, w):
        x, w = self._check(x, w)
        W1, _, w2, h, g, raw = self._forward(x, w)
        tau = x[self.time_index]
        out = tau * (W1.T @ (w2 * g))
        out[self.time_index] += raw
        return out

    def weight_gradient(self, x, w):
        x, w = self._check(x, w)
        W1, _, w2, h, g, raw = self._forward(x, w)
        tau = x[self.time_index]
        wg = w2 * g
        return tau * np.concatenate([np.outer(wg, x).ravel(), wg, h, [1.0]])

    def state_hessian(self, x, w):
        x, w = self._check(x, w)
        W1, _, w2, h, g, raw = self._forward(x, w)
        tau = x[self.time_index]
        gp = -2.0 * h * g        # tanh''
        raw_grad = W1.T @ (w2 * g)
        H = tau * (W1.T * (w2 * gp)) @ W1
        H[self.time_index, :] += raw_grad
        H[:, self.time_index] += raw_grad
        return H

    def full_gradient_weight_jacobian(self, x, w):
        x, w = self._check(x, w)
        W1, _, w2, h, g, raw = self._forward(x, w)
        n, H, ti = self.state_dim, self.hidden, self.time_index
        tau = x[ti]
        gp = -2.0 * h * g
        out = np.zeros((self.dim_w, n))
        # W1 block: tau*(w2 g) on the matching input/output slot, plus the
        # curvature and mask terms
        blk = np.zeros((H, n, n))
        idx = np.arange(n)
        blk[:, idx, idx] = tau * (w2 * g)[:, None]
        blk += tau * np.einsum("j,i,jl->jil", w2 * gp, x, W1)
        blk[:, :, ti] += np.outer(w2 * g, x)
        out[:H * n] = blk.reshape(H * n, n)
        # b1 block
        b1_blk = tau * (w2 * gp)[:, None] * W1
        b1_blk[:, ti] += w2 * g
        out[H * n:H * n + H] = b1_blk
        # w2 block
        w2_blk = tau * g[:, None] * W1
        w2_blk[:, ti] += h
        out[H * n + H:H * n + 2 * H] = w2_blk
        # b2
        out[-1, ti] = 1.0
        return out

    def gradient_weight_jacobian_product(self, x, w, v):
        x, w = self._check(x, w)
        v = np.asarray(v, dtype=float)
        W1, _, w2, h, g, raw = self._forward(x, w)
        tau = x[self.time_index]
        vt = v[self.time_index]
        gp = -2.0 * h * g
        q = W1 @ v
        w1_blk = (tau * np.outer(w2 * gp * q, x)
                  + tau * np.outer(w2 * g, v)
                  + vt * np.outer(w2 * g, x))
        b1_blk = tau * w2 * gp * q + vt * w2 * g
        w2_blk = tau * g * q + vt * h
        return np.concatenate([w1_blk.ravel(), b1_blk, w2_blk, [vt]])

    def value_many(self, X, w):
        X = np.asarray(X, dtype=float)
        W1, b1, w2, b2 = self._unpack(np.asarray(w, dtype=float))
        raw = np.tanh(X @ W1.T + b1) @ w2 + b2
        return raw * X[:, self.time_index]

    def state_gradient_many(self, X, w):
        X = np.asarray(X, dtype=float)
        W1, b1, w2, b2 = self._unpack(np.asarray(w, dtype=float))
        h = np.tanh(X @ W1.T + b1)
        raw = h @ w2 + b2
        out = ((1.0 - h * h) * w2) @ W1 * X[:, [self.time_index]]
        out[:, self.time_index] += raw
        return out

    def state_hessian_many(self, X, w):
        X = np.asarray(X, dtype=float)
        W1, b1, w2, b2 = self._unpack(np.asarray(w, dtype=float))
        h = np.tanh(X @ W1.T + b1)
        g = 1.0 - h * h
        raw = h @ w2 + b2
        raw_grad = (g * w2) @ W1
        H = np.einsum("bj,ji,jl->bil", -2.0 * h * g * w2, W1, W1)
        H *= X[:, [[self.time_index]]]
        H[:, self.time_index, :] += raw_grad
        H[:, :, self.time_index] += raw_grad
        return H

    def full_gradient_weight_jacobian_many(self, X, w):
        X = np.asarray(X, dtype=float)
        W1, b1, w2, b2 = self._unpack(np.asarray(w, dtype=float))
        B = X.shape[0]
        n, H, ti = self.state_dim, self.hidden, self.time_index
        h = np.tanh(X @ W1.T + b1)
        g = 1.0 - h * h
        gp = -2.0 * h * g
        tau = X[:, ti]
        out = np.zeros((B, self.dim_w, n))
        blk = np.zeros((B, H, n, n))
        idx = np.arange(n)
        blk[:, :, idx, idx] = (tau[:, None] * (g * w2))[:, :, None]
        blk += np.einsum("bj,bi,jl->bjil", tau[:, None] * gp * w2, X, W1)
        blk[:, :, :, ti] += np.einsum("bj,bi->bji", g * w2, X)
        out[:, :H * n] = blk.reshape(B, H * n, n)
        b1_blk = (tau[:, None] * gp * w2)[:, :, None] * W1
        b1_blk[:, :, ti] += g * w2
        out[:, H * n:H * n + H] = b1_blk
        w2_blk = (tau[:, None] * g)[:, :, None] * W1
        w2_blk[:, :, ti] += h
        out[:, H * n + H:H * n + 2 * H] = w2_blk
        out[:, -1, ti] = 1.0
        return out


def make_approximator(kind: str, state_dim: int, time_index: int | None = None,
                      hidden: int = 12) -> ValueApproximator:
    if kind == "quadratic":
        return QuadraticValue(state_dim, time_index)
    if kind == "mlp":
        return TanhNetValue(state_dim, time_index, hidden)
    raise DimensionMismatchError(f"unknown approximator kind {kind!r}")


# -- weight persistence --------------------------------------------------------

def save_weights(path, w) -> None:
    """Flat little-endian float64 file with a 16-byte header."""
    w = np.ascontiguousarray(np.asarray(w, dtype="<f8"))
    header = WEIGHTS_MAGIC + struct.pack("<IQ", WEIGHTS_VERSION, w.size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(w.tobytes())


def load_weights(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != WEIGHTS_MAGIC:
        raise DimensionMismatchError(f"{path}: not a vgl-lab weights file")
    version, dim = struct.unpack("<IQ", blob[4:16])
    if version != WEIGHTS_VERSION:
        raise DimensionMismatchError(f"{path}: unsupported weights version {version}")
    w = np.frombuffer(blob[16:], dtype="<f8")
    if w.size != dim:
        raise DimensionMismatchError(
            f"{path}: header says {dim} weights, file holds {w.size}")
    return w.astype(float)


def weights_to_json(w) -> str:
    w = np.asarray(w, dtype=float)
    return json.dumps({"format": WEIGHTS_JSON_FORMAT, "dim": int(w.size),
                       "values": [float(v) for v in w]}, indent=2)


def weights_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    if doc.get("format") != WEIGHTS_JSON_FORMAT:
        raise DimensionMismatchError("not a vgl-lab weights JSON document")
    w = np.asarray(doc["values"], dtype=float)
    if w.size != int(doc["dim"]):
        raise DimensionMismatchError("weights JSON dim field disagrees with values")
    return w
