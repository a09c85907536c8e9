"""Acoustic-only language classifier: stacked unidirectional LSTM over LFBE
frames, frame-wise language targets supervised every N frames, trained first
on overlapping 36-frame chunks and then on full utterances.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .checkpoint import Checkpoint, vector
from .errors import ConfigError, DataError, ShapeError
from .features import chunk_starts

log = logging.getLogger(__name__)


@dataclass
class AcousticTrainConfig:
    hidden: Tuple[int, ...] = (64, 64)
    feature_dim: int = 64
    backprop_every_n: int = 10
    chunk_len: int = 36
    chunk_hop: int = 18
    chunk_epochs: int = 10
    full_epochs: int = 3
    chunks_per_utterance: Optional[int] = None
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    lr_decay: float = 1.0
    clip_norm: Optional[float] = None
    dropout: float = 0.5
    seed: int = 7

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if self.backprop_every_n < 1:
            raise ConfigError("backprop_every_n must be >= 1")
        if not self.hidden:
            raise ConfigError("at least one LSTM layer is required")


@dataclass
class AcousticModel:
    languages: List[str]
    layers: List[nn.LstmParams]
    head: nn.DenseParams

    def __post_init__(self):
        dims = [self.layers[0].input_dim] + [l.hidden_dim for l in self.layers]
        for l, (din, p) in enumerate(zip(dims[:-1], self.layers)):
            if p.input_dim != din:
                raise ShapeError(f"layer {l} input dim {p.input_dim} != {din}")
        if self.head.in_dim != dims[-1] or self.head.out_dim != len(self.languages):
            raise ShapeError("acoustic head does not match last layer / language set")

    @property
    def feature_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def embedding_dim(self) -> int:
        return self.layers[-1].hidden_dim

    @classmethod
    def init(cls, languages: Sequence[str], feature_dim: int, hidden: Sequence[int],
             rng: np.random.Generator) -> "AcousticModel":
        layers, d = [], feature_dim
        for h in hidden:
            layers.append(nn.LstmParams.init(rng, d, h))
            d = h
        return cls(list(languages), layers, nn.DenseParams.init(rng, d, len(languages)))

    def params(self) -> Dict[str, np.ndarray]:
        out = OrderedDict()
        for i, p in enumerate(self.layers):
            for k, v in p.arrays().items():
                out[f"lstm{i}.{k}"] = v
        out["head.weight"] = self.head.weight
        out["head.bias"] = self.head.bias
        return out

    def to_checkpoint(self, meta: Optional[dict] = None) -> Checkpoint:
        m = {"languages": self.languages, "hidden": [p.hidden_dim for p in self.layers],
             "feature_dim": self.feature_dim}
        m.update(meta or {})
        return Checkpoint("acoustic", OrderedDict(self.params()), m)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "AcousticModel":
        if ckpt.kind != "acoustic":
            raise DataError(f"expected an acoustic checkpoint, got {ckpt.kind!r}")
        t = ckpt.tensors
        layers = [nn.LstmParams(t[f"lstm{i}.Wx"].copy(), t[f"lstm{i}.Wh"].copy(),
                                vector(t[f"lstm{i}.b"]))
                  for i in range(len(ckpt.meta["hidden"]))]
        head = nn.DenseParams(t["head.weight"].copy(), vector(t["head.bias"]))
        return cls(list(ckpt.meta["languages"]), layers, head)


# ------------------------------------------------------------- inference

def _check_frames(model: AcousticModel, frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim != 2 or frames.shape[1] != model.feature_dim:
        raise ShapeError(f"expected (n, {model.feature_dim}) frames, got {frames.shape}")
    return frames


class AcousticStream:
    """Incremental encoder state for one streaming session."""

    def __init__(self, model: AcousticModel):
        self.model = model
        self.state = [(np.zeros(p.hidden_dim, np.float32), np.zeros(p.hidden_dim, np.float32))
                      for p in model.layers]
        self.frames_consumed = 0

    def feed(self, frames: np.ndarray) -> np.ndarray:
        frames = _check_frames(self.model, frames)
        if len(frames):
            x = frames
            for i, p in enumerate(self.model.layers):
                x, self.state[i], _ = nn.lstm_forward(p, x, *self.state[i])
            self.frames_consumed += len(frames)
        return self.embedding

    @property
    def embedding(self) -> np.ndarray:
        return self.state[-1][0].copy()

    def posterior(self) -> np.ndarray:
        logits, _ = nn.dense_forward(self.model.head, self.state[-1][0])
        return nn.softmax(logits)


def acoustic_embed_stream(model: AcousticModel, frames: np.ndarray,
                          stream: Optional[AcousticStream] = None) -> Tuple[AcousticStream, np.ndarray]:
    """Feed ``frames`` into ``stream`` (a fresh one if None); return it and the embedding."""
    stream = stream if stream is not None else AcousticStream(model)
    return stream, stream.feed(frames)


def _pad(seqs: Sequence[np.ndarray]):
    lengths = np.array([len(s) for s in seqs])
    T, B = int(lengths.max()), len(seqs)
    x = np.zeros((T, B, seqs[0].shape[1]), np.float32)
    mask = np.zeros((T, B), bool)
    for b, s in enumerate(seqs):
        x[:len(s), b] = s
        mask[:len(s), b] = True
    return x, mask, lengths


def acoustic_embed_batch(model: AcousticModel, seqs: Sequence[np.ndarray],
                         batch_size: int = 256) -> np.ndarray:
    """Final last-layer hidden state for each sequence, shape (N, H)."""
    out = np.zeros((len(seqs), model.embedding_dim), np.float32)
    order = np.argsort([len(s) for s in seqs], kind="stable")
    for s in range(0, len(order), batch_size):
        idx = order[s:s + batch_size]
        x, mask, _ = _pad([_check_frames(model, seqs[i]) for i in idx])
        for p in model.layers:
            x, (h, _), _ = nn.lstm_forward(p, x, mask=mask)
        out[idx] = h
    return out


def acoustic_posterior(model: AcousticModel, frames: np.ndarray) -> np.ndarray:
    frames = _check_frames(model, frames)
    if len(frames) == 0:
        raise DataError("acoustic_posterior needs at least one frame")
    stream = AcousticStream(model)
    stream.feed(frames)
    return stream.posterior()


def acoustic_posterior_batch(model: AcousticModel, seqs: Sequence[np.ndarray]) -> np.ndarray:
    emb = acoustic_embed_batch(model, seqs)
    logits, _ = nn.dense_forward(model.head, emb)
    return nn.softmax(logits)


# -------------------------------------------------------------- training

def supervised_steps(length: int, every_n: int) -> np.ndarray:
    """Frame indices carrying a loss: ``(t+1) % N == 0`` plus the last frame."""
    t = np.arange(length)
    sel = (t + 1) % every_n == 0
    if length:
        sel[-1] = True
    return np.flatnonzero(sel)


def batch_loss_and_grads(model: AcousticModel, x: np.ndarray, mask: np.ndarray, labels: np.ndarray,
                         every_n: int, dropout: float = 0.0, rng=None, train: bool = False):
    """Masked every-N cross-entropy over a padded batch (T, B, D)."""
    T, B, _ = x.shape
    lengths = mask.sum(axis=0)
    sup = np.zeros((T, B), bool)
    for b in range(B):
        sup[supervised_steps(int(lengths[b]), every_n), b] = True
    caches, drops = [], []
    h = x
    for i, p in enumerate(model.layers):
        if i > 0:
            h, m = nn.dropout(h, dropout, rng, train)
            drops.append(m)
        h, _, cache = nn.lstm_forward(p, h, mask=mask)
        caches.append(cache)
    tt, bb = np.nonzero(sup)
    feats = h[tt, bb]
    logits, _ = nn.dense_forward(model.head, feats)
    loss, dlogits = nn.softmax_cross_entropy(logits, labels[bb])
    gh, dfeats = nn.dense_backward(model.head, feats, dlogits)
    dh = np.zeros_like(h)
    dh[tt, bb] = dfeats
    grads = OrderedDict()
    for i in range(len(model.layers) - 1, -1, -1):
        g, dh, _ = nn.lstm_backward(model.layers[i], caches[i], dh)
        for k, v in g.arrays().items():
            grads[f"lstm{i}.{k}"] = v
        if i > 0 and drops[i - 1] is not None:
            dh = dh * drops[i - 1]
    grads["head.weight"] = gh.weight
    grads["head.bias"] = gh.bias
    correct = int((logits.argmax(axis=1) == labels[bb]).sum())
    return loss, grads, correct, len(tt)


def _stratified_order(labels: np.ndarray, rng) -> np.ndarray:
    """Interleave per-class shuffles so every batch is (near) class balanced."""
    pools = [rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)]
    total = sum(len(p) for p in pools)
    keys = np.concatenate([(np.arange(len(p)) + rng.random()) / len(p) for p in pools])
    idx = np.concatenate(pools)
    return idx[np.argsort(keys, kind="stable")][:total]


@dataclass
class TrainReport:
    epoch_loss: List[float] = field(default_factory=list)
    epoch_stage: List[str] = field(default_factory=list)
    epoch_accuracy: List[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def _labels(utts, languages) -> np.ndarray:
    if not utts:
        raise DataError("empty training manifest")
    lab = []
    for u in utts:
        if u.language not in languages:
            raise DataError(f"{u.id}: label {u.language!r} not in language set {languages}")
        lab.append(languages.index(u.language))
    return np.array(lab)


def train_acoustic(utts, languages: Sequence[str], config: AcousticTrainConfig = None,
                   model: Optional[AcousticModel] = None) -> Tuple[AcousticModel, TrainReport]:
    """Two-stage training: chunked epochs, then full-sequence epochs."""
    cfg = config or AcousticTrainConfig()
    languages = list(languages)
    labels = _labels(utts, languages)
    seqs = [u.load_frames() for u in utts]
    rng = nn.make_rng(cfg.seed)
    if model is None:
        model = AcousticModel.init(languages, cfg.feature_dim, cfg.hidden, rng)
    params = model.params()
    state = nn.SgdState()
    report = TrainReport()
    lr = cfg.lr

    def step(x, mask, lab):
        nonlocal state
        loss, grads, correct, n = batch_loss_and_grads(
            model, x, mask, lab, cfg.backprop_every_n, cfg.dropout, rng, train=True)
        if not np.isfinite(loss):
            raise nn.NumericError("non-finite training loss")
        nn.sgd_step(params, grads, lr, cfg.momentum, state, cfg.clip_norm)
        return loss * n, correct, n

    for epoch in range(cfg.chunk_epochs + cfg.full_epochs):
        chunked = epoch < cfg.chunk_epochs
        tot_loss = tot_corr = tot_n = 0
        if chunked:
            items = []
            for i, s in enumerate(seqs):
                starts = chunk_starts(len(s), cfg.chunk_len, cfg.chunk_hop)
                if cfg.chunks_per_utterance is not None and len(starts) > cfg.chunks_per_utterance:
                    starts = sorted(rng.choice(starts, cfg.chunks_per_utterance, replace=False))
                items.extend((i, st) for st in starts)
            item_lab = np.array([labels[i] for i, _ in items])
            order = _stratified_order(item_lab, rng)
            for b in range(0, len(order), cfg.batch_size):
                sel = order[b:b + cfg.batch_size]
                x = np.stack([seqs[items[k][0]][items[k][1]:items[k][1] + cfg.chunk_len]
                              for k in sel], axis=1)
                mask = np.ones(x.shape[:2], bool)
                l, c, n = step(x, mask, item_lab[sel])
                tot_loss += l; tot_corr += c; tot_n += n
        else:
            order = _stratified_order(labels, rng)
            group = cfg.batch_size * 8
            batches = []
            for g in range(0, len(order), group):
                grp = order[g:g + group]
                grp = grp[np.argsort([len(seqs[i]) for i in grp], kind="stable")]
                batches.extend(grp[b:b + cfg.batch_size] for b in range(0, len(grp), cfg.batch_size))
            for bi in rng.permutation(len(batches)):
                sel = batches[bi]
                x, mask, _ = _pad([seqs[i] for i in sel])
                l, c, n = step(x, mask, labels[sel])
                tot_loss += l; tot_corr += c; tot_n += n
        report.epoch_loss.append(tot_loss / max(tot_n, 1))
        report.epoch_accuracy.append(tot_corr / max(tot_n, 1))
        report.epoch_stage.append("chunk" if chunked else "full")
        log.info("acoustic epoch %d (%s): loss %.4f acc %.3f", epoch,
                 report.epoch_stage[-1], report.epoch_loss[-1], report.epoch_accuracy[-1])
        lr *= cfg.lr_decay
    return model, report
