"""Small numpy neural toolkit: LSTM with BPTT, dense, embedding, softmax/CE,
inverted dropout, SGD with momentum and a finite-difference gradient checker.

Every layer is a pair of pure functions, ``*_forward`` returning the output and
a cache, ``*_backward`` consuming that cache.  Parameters live in small
dataclasses whose arrays are float32 in production and may be cast to float64
("shadow mode") for gradient checking.

LSTM gate order inside the stacked matrices is ``i, f, g, o``::

    z   = x @ Wx.T + h_prev @ Wh.T + b        # (B, 4H)
    i   = sigmoid(z[:, 0H:1H])
    f   = sigmoid(z[:, 1H:2H])
    g   = tanh   (z[:, 2H:3H])
    o   = sigmoid(z[:, 3H:4H])
    c   = f * c_prev + i * g
    h   = o * tanh(c)
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import NumericError, ShapeError, UsageError

DTYPE = np.float32
RNG_ALGORITHM = "PCG64"


# --------------------------------------------------------------------- rng

def make_rng(seed: int) -> np.random.Generator:
    """Return the project-wide generator (numpy PCG64) for ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_rng(seed: int, key: str) -> np.random.Generator:
    """Independent stream for ``(seed, key)``, e.g. one per utterance id."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words])
    return np.random.Generator(np.random.PCG64(ss))


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in)).astype(DTYPE)


# ------------------------------------------------------------------ params

class _Params:
    """Mixin giving parameter dataclasses dict-like helpers."""

    def arrays(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def astype(self, dtype):
        return replace(self, **{k: v.astype(dtype) for k, v in self.arrays().items()})

    def copy(self):
        return replace(self, **{k: v.copy() for k, v in self.arrays().items()})

    def zeros_like(self):
        return replace(self, **{k: np.zeros_like(v) for k, v in self.arrays().items()})


@dataclass
class DenseParams(_Params):
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"dense bias {self.bias.shape} does not match weight rows {self.weight.shape}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def init(cls, rng, in_dim: int, out_dim: int) -> "DenseParams":
        return cls(glorot_uniform(rng, out_dim, in_dim), np.zeros(out_dim, DTYPE))

    @classmethod
    def zeros(cls, in_dim: int, out_dim: int) -> "DenseParams":
        return cls(np.zeros((out_dim, in_dim), DTYPE), np.zeros(out_dim, DTYPE))


@dataclass
class EmbeddingParams(_Params):
    table: np.ndarray  # (vocab, dim)

    @classmethod
    def init(cls, rng, vocab: int, dim: int) -> "EmbeddingParams":
        return cls(rng.uniform(-0.1, 0.1, size=(vocab, dim)).astype(DTYPE))


@dataclass
class LstmParams(_Params):
    Wx: np.ndarray  # (4H, D)
    Wh: np.ndarray  # (4H, H)
    b: np.ndarray   # (4H,)

    def __post_init__(self):
        h4 = self.Wh.shape[0]
        if (h4 % 4 or self.Wh.shape != (h4, h4 // 4) or self.Wx.shape[0] != h4
                or self.b.shape != (h4,)):
            raise ShapeError(
                f"inconsistent LSTM shapes Wx={self.Wx.shape} Wh={self.Wh.shape} b={self.b.shape}")

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.Wh.shape[1]

    @classmethod
    def init(cls, rng, input_dim: int, hidden_dim: int) -> "LstmParams":
        H = hidden_dim
        Wx = np.concatenate([glorot_uniform(rng, H, input_dim) for _ in range(4)])
        Wh = np.concatenate([glorot_uniform(rng, H, H) for _ in range(4)])
        b = np.zeros(4 * H, DTYPE)
        b[H:2 * H] = 1.0
        return cls(Wx, Wh, b)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        H = hidden_dim
        return cls(np.zeros((4 * H, input_dim), DTYPE), np.zeros((4 * H, H), DTYPE),
                   np.zeros(4 * H, DTYPE))


# ------------------------------------------------------------ activations

def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    v = np.asarray(v)
    if v.size == 0 or v.shape[-1] == 0:
        raise ShapeError("softmax of an empty vector")
    z = v - v.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p: np.ndarray, target) -> float:
    """Mean negative log-likelihood of ``target`` under probabilities ``p``."""
    p = np.atleast_2d(p)
    target = np.atleast_1d(np.asarray(target))
    if target.shape[0] != p.shape[0]:
        raise ShapeError(f"{target.shape[0]} targets for {p.shape[0]} distributions")
    if np.any(target < 0) or np.any(target >= p.shape[1]):
        raise ShapeError(f"target index out of range for {p.shape[1]} classes")
    picked = p[np.arange(p.shape[0]), target]
    return float(-np.mean(np.log(np.maximum(picked, np.finfo(p.dtype).tiny))))


def softmax_cross_entropy(logits: np.ndarray, target: np.ndarray,
                          weights: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Loss and d(loss)/d(logits) for rows of ``logits``.

    ``weights`` (per row) defaults to 1/N, i.e. a mean over rows.
    """
    logits = np.atleast_2d(logits)
    n = logits.shape[0]
    target = np.asarray(target)
    if weights is None:
        weights = np.full(n, 1.0 / n, dtype=logits.dtype)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = float(-(weights * logp[rows, target]).sum())
    d = np.exp(logp)
    d[rows, target] -= 1.0
    d *= weights[:, None]
    return loss, d.astype(logits.dtype)


def dropout(v: np.ndarray, rate: float, rng: Optional[np.random.Generator],
            train_mode: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Inverted dropout.  Returns ``(output, mask)``; mask is None in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train_mode or rate == 0.0:
        return v, None
    keep = (rng.random(v.shape) >= rate).astype(v.dtype) / (1.0 - rate)
    return v * keep, keep


# ------------------------------------------------------------------ dense

def dense_forward(p: DenseParams, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if x.shape[-1] != p.in_dim:
        raise ShapeError(f"dense expects input dim {p.in_dim}, got {x.shape[-1]}")
    return x @ p.weight.T + p.bias, x


def dense_backward(p: DenseParams, x: np.ndarray, dy: np.ndarray) -> Tuple[DenseParams, np.ndarray]:
    x2 = x.reshape(-1, p.in_dim)
    dy2 = dy.reshape(-1, p.out_dim)
    grads = DenseParams(dy2.T @ x2, dy2.sum(axis=0))
    return grads, dy @ p.weight


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(x, dy):
    return dy * (x > 0)


# -------------------------------------------------------------- embedding

def embedding_forward(p: EmbeddingParams, ids: np.ndarray) -> np.ndarray:
    return p.table[ids]


def embedding_backward(p: EmbeddingParams, ids: np.ndarray, dy: np.ndarray) -> EmbeddingParams:
    g = np.zeros_like(p.table)
    np.add.at(g, ids.reshape(-1), dy.reshape(-1, p.table.shape[1]))
    return EmbeddingParams(g)


# ------------------------------------------------------------------- lstm

@dataclass
class LstmCache:
    x: np.ndarray
    mask: Optional[np.ndarray]
    h0: np.ndarray
    c0: np.ndarray
    hs: np.ndarray = field(repr=False)
    cs: np.ndarray = field(repr=False)
    gates: np.ndarray = field(repr=False)
    tanh_c: np.ndarray = field(repr=False)


def lstm_forward(p: LstmParams, x: np.ndarray, h0: Optional[np.ndarray] = None,
                 c0: Optional[np.ndarray] = None, mask: Optional[np.ndarray] = None):
    """Run one LSTM layer over ``x`` of shape (T, B, D) or (T, D).

    ``mask`` (T, B) marks valid steps; on masked steps the state is carried
    through unchanged.  Returns ``(hs, (h_T, c_T), cache)``.
    """
    single = x.ndim == 2
    if single:
        x = x[:, None, :]
        h0 = None if h0 is None else h0[None]
        c0 = None if c0 is None else c0[None]
        mask = None if mask is None else mask[:, None]
    T, B, D = x.shape
    H = p.hidden_dim
    if D != p.input_dim:
        raise ShapeError(f"LSTM expects input dim {p.input_dim}, got {D}")
    dt = p.Wx.dtype
    h0 = np.zeros((B, H), dt) if h0 is None else np.asarray(h0, dt)
    c0 = np.zeros((B, H), dt) if c0 is None else np.asarray(c0, dt)
    if h0.shape != (B, H) or c0.shape != (B, H):
        raise ShapeError(f"LSTM state must be ({B}, {H}), got {h0.shape}/{c0.shape}")
    if mask is not None and mask.shape != (T, B):
        raise ShapeError(f"mask must be ({T}, {B}), got {mask.shape}")

    hs = np.empty((T, B, H), dt)
    cs = np.empty((T, B, H), dt)
    gates = np.empty((T, B, 4 * H), dt)
    tanh_c = np.empty((T, B, H), dt)
    xw = x.reshape(T * B, D) @ p.Wx.T
    xw = xw.reshape(T, B, 4 * H) + p.b
    h, c = h0, c0
    for t in range(T):
        z = xw[t] + h @ p.Wh.T
        a = np.empty_like(z)
        a[:, :2 * H] = sigmoid(z[:, :2 * H])
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        a[:, 3 * H:] = sigmoid(z[:, 3 * H:])
        c_new = a[:, H:2 * H] * c + a[:, :H] * a[:, 2 * H:3 * H]
        tc = np.tanh(c_new)
        h_new = a[:, 3 * H:] * tc
        if mask is not None:
            m = mask[t][:, None].astype(dt)
            c_new = m * c_new + (1 - m) * c
            h_new = m * h_new + (1 - m) * h
        gates[t], tanh_c[t], hs[t], cs[t] = a, tc, h_new, c_new
        h, c = h_new, c_new
    cache = LstmCache(x, mask, h0, c0, hs, cs, gates, tanh_c)
    if single:
        return hs[:, 0], (h[0], c[0]), cache
    return hs, (h, c), cache


def lstm_backward(p: LstmParams, cache: Optional[LstmCache], dhs: Optional[np.ndarray],
                  dh_last: Optional[np.ndarray] = None, dc_last: Optional[np.ndarray] = None):
    """Backprop through time for one layer.

    ``dhs`` is the gradient w.r.t. every output step (same shape as the
    forward output, or None); ``dh_last``/``dc_last`` add gradient on the
    final state.  Returns ``(grads, dx, (dh0, dc0))``.
    """
    if cache is None:
        raise UsageError("lstm_backward needs the cache from lstm_forward")
    x = cache.x
    T, B, D = x.shape
    H = p.hidden_dim
    dt = p.Wx.dtype
    single = dhs is not None and dhs.ndim == 2
    if dhs is None:
        dhs = np.zeros((T, B, H), dt)
    elif single:
        dhs = dhs[:, None, :]
    if dh_last is not None and dh_last.ndim == 1:
        dh_last = dh_last[None]
    if dc_last is not None and dc_last.ndim == 1:
        dc_last = dc_last[None]
    dh = np.zeros((B, H), dt) if dh_last is None else dh_last.astype(dt).copy()
    dc = np.zeros((B, H), dt) if dc_last is None else dc_last.astype(dt).copy()
    dz_all = np.empty((T, B, 4 * H), dt)
    dWh = np.zeros_like(p.Wh)
    for t in range(T - 1, -1, -1):
        dh = dh + dhs[t]
        h_prev = cache.hs[t - 1] if t > 0 else cache.h0
        c_prev = cache.cs[t - 1] if t > 0 else cache.c0
        a = cache.gates[t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        tc = cache.tanh_c[t]
        if cache.mask is not None:
            m = cache.mask[t][:, None].astype(dt)
            dh_pass, dc_pass = (1 - m) * dh, (1 - m) * dc
            dh, dc = m * dh, m * dc
        do = dh * tc
        dc = dc + dh * o * (1 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_prev = dc * f
        dz = np.empty((B, 4 * H), dt)
        dz[:, :H] = di * i * (1 - i)
        dz[:, H:2 * H] = df * f * (1 - f)
        dz[:, 2 * H:3 * H] = dg * (1 - g * g)
        dz[:, 3 * H:] = do * o * (1 - o)
        dz_all[t] = dz
        dWh += dz.T @ h_prev
        dh = dz @ p.Wh
        dc = dc_prev
        if cache.mask is not None:
            dh = dh + dh_pass
            dc = dc + dc_pass
    dz2 = dz_all.reshape(T * B, 4 * H)
    grads = LstmParams(dz2.T @ x.reshape(T * B, D), dWh, dz2.sum(axis=0))
    dx = (dz2 @ p.Wx).reshape(T, B, D)
    if single:
        return grads, dx[:, 0], (dh[0], dc[0])
    return grads, dx, (dh, dc)


# -------------------------------------------------------------- optimizer

@dataclass
class SgdState:
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float,
             momentum: float = 0.0, state: Optional[SgdState] = None,
             clip_norm: Optional[float] = None) -> Tuple[Dict[str, np.ndarray], SgdState]:
    """One SGD-with-momentum update, in place on ``params``.

    ``v = momentum * v + g``; ``p = p - lr * v``.  With ``clip_norm`` the
    global gradient norm is rescaled to at most that value first.
    """
    state = state if state is not None else SgdState()
    if set(params) != set(grads):
        raise ShapeError(f"param/grad keys differ: {sorted(set(params) ^ set(grads))}")
    scale = 1.0
    if clip_norm is not None:
        norm = np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
        if not np.isfinite(norm):
            raise NumericError("non-finite gradient norm")
        if norm > clip_norm:
            scale = clip_norm / norm
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"{name}: grad {g.shape} vs param {p.shape}")
        g = g * scale if scale != 1.0 else g
        if momentum:
            v = state.velocity.get(name)
            v = g.astype(p.dtype) if v is None else momentum * v + g
            state.velocity[name] = v
            p -= (lr * v).astype(p.dtype)
        else:
            p -= (lr * g).astype(p.dtype)
    return params, state


# ------------------------------------------------------------- grad check

@dataclass
class GradCheckReport:
    max_rel_error: float
    name: Optional[str]
    index: Optional[Tuple[int, ...]]
    checked: int

    def ok(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def grad_check(loss_fn: Callable[[Dict[str, np.ndarray]], Tuple[float, Dict[str, np.ndarray]]],
               params: Dict[str, np.ndarray], eps: float = 1e-3, tolerance: float = 1e-3,
               analytic_dtype=np.float64, max_per_param: Optional[int] = None,
               rng: Optional[np.random.Generator] = None, floor: float = 1e-8,
               scale_floor: float = 0.0) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``loss_fn(params) -> (loss, grads)`` must be pure.  The analytic gradient is
    taken at ``params`` cast to ``analytic_dtype`` (float32 for the production
    path); the numeric gradient is always evaluated on a float64 shadow copy.
    Relative error per entry is ``|a - n| / max(|a|, |n|, floor, s)`` where
    ``s = scale_floor * rms(analytic gradient of that parameter)``; a nonzero
    ``scale_floor`` keeps entries that cancel to far below their parameter's
    typical gradient from reporting pure float32 accumulation noise.
    ``tolerance`` is only carried for :meth:`GradCheckReport.ok`.
    """
    shadow = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, analytic = loss_fn({k: v.astype(analytic_dtype) for k, v in shadow.items()})
    worst = (0.0, None, None)
    checked = 0
    for name, arr in shadow.items():
        flat_idx = np.arange(arr.size)
        if max_per_param is not None and arr.size > max_per_param:
            rng = rng if rng is not None else make_rng(0)
            flat_idx = np.sort(rng.choice(arr.size, max_per_param, replace=False))
        a_grad = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        den_floor = max(floor, scale_floor * float(np.sqrt(np.mean(a_grad ** 2)))) if a_grad.size else floor
        for fi in flat_idx:
            idx = np.unravel_index(fi, arr.shape)
            old = arr[idx]
            arr[idx] = old + eps
            fp, _ = loss_fn(shadow)
            arr[idx] = old - eps
            fm, _ = loss_fn(shadow)
            arr[idx] = old
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while perturbing {name}{idx}")
            num = (fp - fm) / (2 * eps)
            a = a_grad[fi]
            rel = abs(a - num) / max(abs(a), abs(num), den_floor)
            checked += 1
            if rel > worst[0]:
                worst = (rel, name, tuple(int(i) for i in idx))
    return GradCheckReport(worst[0], worst[1], worst[2], checked)


def assert_finite(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite values in {name}")
