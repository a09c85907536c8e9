"""AcousText fusion head over frozen acoustic and text embeddings.

Input is ``[acoustic | text_1 | ... | text_n]`` in the fusion model's language
order; the head is FC(64) -> ReLU -> FC(32) -> ReLU -> FC(n) -> softmax with
dropout on the acoustic part of the input and after each hidden layer during
training.  Upstream encoders never receive gradients.
"""

from __future__ import annotations

import hashlib
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .acoustic import (
    AcousticModel, AcousticStream, TrainReport, _labels, _stratified_order, acoustic_embed_batch)
from .checkpoint import Checkpoint, vector
from .errors import ConfigError, DataError, ShapeError
from .features import n_frames_for
from .text import TextLidModel, encode_text, encode_texts

log = logging.getLogger(__name__)


@dataclass
class FusionTrainConfig:
    hidden: Tuple[int, ...] = (64, 32)
    dropout: float = 0.5
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.02
    momentum: float = 0.9
    lr_decay: float = 1.0
    clip_norm: Optional[float] = None
    interval_snapshots: bool = False
    interval_ms: int = 600
    window_ms: float = 25.0
    hop_ms: float = 10.0
    seed: int = 7
    cache_dir: Optional[str] = None

    def __post_init__(self):
        self.hidden = tuple(self.hidden)


@dataclass
class EmbeddingSnapshot:
    interval: int
    acoustic: np.ndarray
    text: List[np.ndarray]
    time_ms: int = 0

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError("interval index starts at 1")


@dataclass
class FusionModel:
    languages: List[str]
    acoustic_dim: int
    text_dims: List[int]
    layers: List[nn.DenseParams]
    dropout: float = 0.5
    upstream: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        d = self.input_dim
        for i, p in enumerate(self.layers):
            if p.in_dim != d:
                raise ShapeError(f"fusion layer {i} expects {p.in_dim} inputs, chain gives {d}")
            d = p.out_dim
        if d != len(self.languages):
            raise ShapeError("fusion output size must equal the number of languages")

    @property
    def input_dim(self) -> int:
        return self.acoustic_dim + sum(self.text_dims)

    @classmethod
    def init(cls, languages, acoustic_dim, text_dims, hidden, rng, dropout=0.5) -> "FusionModel":
        dims = [acoustic_dim + sum(text_dims), *hidden, len(languages)]
        layers = [nn.DenseParams.init(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
        return cls(list(languages), acoustic_dim, list(text_dims), layers, dropout)

    def params(self) -> Dict[str, np.ndarray]:
        out = OrderedDict()
        for i, p in enumerate(self.layers):
            out[f"fc{i}.weight"] = p.weight
            out[f"fc{i}.bias"] = p.bias
        return out

    def to_checkpoint(self, meta: Optional[dict] = None) -> Checkpoint:
        m = {"languages": self.languages, "acoustic_dim": self.acoustic_dim,
             "text_dims": self.text_dims, "dropout": self.dropout, "n_layers": len(self.layers),
             "upstream": self.upstream}
        m.update(meta or {})
        return Checkpoint("fusion", OrderedDict(self.params()), m)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, acoustic_sha: str = None,
                        text_sha: str = None) -> "FusionModel":
        """Load, checking upstream hashes when they are given."""
        if ckpt.kind != "fusion":
            raise DataError(f"expected a fusion checkpoint, got {ckpt.kind!r}")
        up = ckpt.meta.get("upstream", {})
        for name, sha in (("acoustic", acoustic_sha), ("text", text_sha)):
            if sha is not None and up.get(name) not in (None, sha):
                raise ConfigError(f"fusion checkpoint was trained on a different {name} model "
                                  f"({up.get(name)[:12]} != {sha[:12]})")
        t = ckpt.tensors
        layers = [nn.DenseParams(t[f"fc{i}.weight"].copy(), vector(t[f"fc{i}.bias"]))
                  for i in range(ckpt.meta["n_layers"])]
        m = ckpt.meta
        return cls(list(m["languages"]), m["acoustic_dim"], list(m["text_dims"]), layers,
                   m["dropout"], dict(up))


def snapshot_vector(model: FusionModel, snap: EmbeddingSnapshot) -> np.ndarray:
    if len(snap.acoustic) != model.acoustic_dim:
        raise ShapeError(f"acoustic embedding has {len(snap.acoustic)} dims, "
                         f"fusion expects {model.acoustic_dim}")
    if len(snap.text) != len(model.text_dims):
        raise ShapeError(f"{len(snap.text)} text embeddings, fusion expects {len(model.text_dims)}")
    for lang, e, d in zip(model.languages, snap.text, model.text_dims):
        if len(e) != d:
            raise ShapeError(f"text embedding for {lang} has {len(e)} dims, fusion expects {d}")
    return np.concatenate([snap.acoustic, *snap.text]).astype(np.float32)


def _forward(model: FusionModel, x: np.ndarray, rng=None, train=False):
    caches = []
    h = x
    if train and model.dropout:
        a = model.acoustic_dim
        ha, m = nn.dropout(h[..., :a], model.dropout, rng, True)
        h = np.concatenate([ha, h[..., a:]], axis=-1)
        in_mask = np.concatenate([m, np.ones_like(h[..., a:])], axis=-1)
    else:
        in_mask = None
    for i, p in enumerate(model.layers):
        z, inp = nn.dense_forward(p, h)
        if i < len(model.layers) - 1:
            h = np.maximum(z, 0)
            h, m = nn.dropout(h, model.dropout, rng, train)
            caches.append((inp, z, m))
        else:
            caches.append((inp, None, None))
            h = z
    return h, caches, in_mask


def fuse_logits(model: FusionModel, x: np.ndarray) -> np.ndarray:
    return _forward(model, x)[0]


def fuse_posterior(model: FusionModel, snap: EmbeddingSnapshot) -> np.ndarray:
    return nn.softmax(fuse_logits(model, snapshot_vector(model, snap)))


def fusion_batch_loss(model: FusionModel, x: np.ndarray, labels: np.ndarray, rng=None, train=False):
    logits, caches, _ = _forward(model, x, rng, train)
    loss, d = nn.softmax_cross_entropy(logits, labels)
    grads = OrderedDict()
    for i in range(len(model.layers) - 1, -1, -1):
        inp, z, m = caches[i]
        g, d = nn.dense_backward(model.layers[i], inp, d)
        grads[f"fc{i}.weight"], grads[f"fc{i}.bias"] = g.weight, g.bias
        if i > 0:
            _, zp, mp = caches[i - 1]
            if mp is not None:
                d = d * mp
            d = d * (zp > 0)
    grads = OrderedDict((k, grads[k]) for k in model.params())
    correct = int((logits.argmax(axis=1) == labels).sum())
    return loss, grads, correct


# -------------------------------------------------------- embedding cache

def model_sha(model) -> str:
    return model.to_checkpoint().sha256()


def _final_texts(utts, lang):
    return [u.final_hypothesis(lang) for u in utts]


def final_embeddings(utts, acoustic: AcousticModel, text: TextLidModel) -> np.ndarray:
    """Fusion inputs from final states, rows in ``utts`` order."""
    ac = acoustic_embed_batch(acoustic, [u.load_frames() for u in utts])
    tx = [encode_texts(e, _final_texts(utts, e.language)) for e in text.encoders]
    return np.concatenate([ac, *tx], axis=1)


def interval_embeddings(utts, acoustic: AcousticModel, text: TextLidModel, interval_ms: int,
                        window_ms: float = 25.0, hop_ms: float = 10.0):
    """Fusion inputs at every interval where all decoders have emitted (rtf 1)."""
    rows, owners = [], []
    for j, u in enumerate(utts):
        frames = u.load_frames()
        stream = AcousticStream(acoustic)
        done = 0
        t = interval_ms
        while True:
            t_eff = min(t, u.duration_ms)
            texts = []
            for e in text.encoders:
                avail = [s for tt, s in u.hypotheses[e.language] if tt <= t_eff]
                texts.append(avail[-1] if avail else None)
            n = n_frames_for(t_eff, window_ms, hop_ms, len(frames))
            stream.feed(frames[done:n])
            done = n
            if all(s is not None for s in texts):
                rows.append(np.concatenate([stream.embedding] + [
                    encode_text(e, s) for e, s in zip(text.encoders, texts)]))
                owners.append(j)
            if t >= u.duration_ms:
                break
            t += interval_ms
    return np.array(rows, np.float32), np.array(owners)


def _cached(cache_dir, key, fn):
    if cache_dir is None:
        return fn()
    path = Path(cache_dir) / f"emb-{key}.npy"
    if path.exists():
        return np.load(path)
    out = fn()
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, out)
    return out


def train_fusion(utts, acoustic: AcousticModel, text: TextLidModel,
                 config: FusionTrainConfig = None) -> Tuple[FusionModel, TrainReport]:
    """Train only the fusion head; the upstream models are read, never written."""
    cfg = config or FusionTrainConfig()
    if acoustic.languages != text.languages:
        raise ConfigError(f"acoustic languages {acoustic.languages} != text {text.languages}")
    languages = list(acoustic.languages)
    labels = _labels(utts, languages)
    ac_sha, tx_sha = model_sha(acoustic), model_sha(text)
    ids = hashlib.sha256("\n".join(u.id for u in utts).encode()).hexdigest()[:16]
    if cfg.interval_snapshots:
        key = f"{ac_sha[:16]}-{tx_sha[:16]}-{ids}-iv{cfg.interval_ms}-{cfg.window_ms}-{cfg.hop_ms}"

        def build():
            rows, owners = interval_embeddings(utts, acoustic, text, cfg.interval_ms,
                                               cfg.window_ms, cfg.hop_ms)
            return np.concatenate([owners[:, None].astype(np.float32), rows], axis=1)

        both = _cached(cfg.cache_dir, key, build)
        owners, X = both[:, 0].astype(int), both[:, 1:]
        y = labels[owners]
    else:
        key = f"{ac_sha[:16]}-{tx_sha[:16]}-{ids}"
        X = _cached(cfg.cache_dir, key, lambda: final_embeddings(utts, acoustic, text))
        y = labels
    rng = nn.make_rng(cfg.seed)
    model = FusionModel.init(languages, acoustic.embedding_dim, text.embedding_dims,
                             cfg.hidden, rng, cfg.dropout)
    model.upstream = {"acoustic": ac_sha, "text": tx_sha}
    params = model.params()
    state = nn.SgdState()
    report = TrainReport()
    lr = cfg.lr
    for epoch in range(cfg.epochs):
        order = _stratified_order(y, rng)
        tot_loss = tot_corr = 0.0
        for b in range(0, len(order), cfg.batch_size):
            sel = order[b:b + cfg.batch_size]
            loss, grads, correct = fusion_batch_loss(model, X[sel], y[sel], rng, train=True)
            if not np.isfinite(loss):
                raise nn.NumericError("non-finite training loss")
            nn.sgd_step(params, grads, lr, cfg.momentum, state, cfg.clip_norm)
            tot_loss += loss * len(sel)
            tot_corr += correct
        report.epoch_loss.append(tot_loss / len(y))
        report.epoch_accuracy.append(tot_corr / len(y))
        report.epoch_stage.append("fusion")
        log.info("fusion epoch %d: loss %.4f acc %.3f", epoch, report.epoch_loss[-1],
                 report.epoch_accuracy[-1])
        lr *= cfg.lr_decay
    return model, report


def fuse_posterior_batch(model: FusionModel, X: np.ndarray) -> np.ndarray:
    return nn.softmax(fuse_logits(model, X))
