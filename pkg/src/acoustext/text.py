"""Text-based LID over ASR 1-best hypotheses.

One character encoder (embedding + LSTM) per language.  Each selected
language's hypothesis goes through its own encoder; unselected languages
contribute a zero vector.  The embeddings are concatenated in the model's
fixed language order and classified by FC -> ReLU -> FC -> softmax.
"""

from __future__ import annotations

import logging
import re
from collections import Counter, OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .acoustic import TrainReport, _labels, _stratified_order
from .checkpoint import Checkpoint, vector
from .errors import ConfigError, DataError, ShapeError

log = logging.getLogger(__name__)

PAD, UNK = 0, 1
_WS = re.compile(r"\s+")


def normalize_text(s: str) -> str:
    return _WS.sub(" ", s.lower()).strip()


def build_vocabulary(texts: Iterable[str], min_count: int = 2) -> List[str]:
    """Code points seen at least ``min_count`` times, sorted."""
    counts = Counter()
    for t in texts:
        counts.update(normalize_text(t))
    return sorted(ch for ch, c in counts.items() if c >= min_count)


@dataclass
class TextTrainConfig:
    embed_dim: int = 32
    hidden_dim: int = 48
    fc_dim: int = 32
    dropout: float = 0.5
    epochs: int = 8
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    lr_decay: float = 1.0
    clip_norm: Optional[float] = None
    min_char_count: int = 2
    prefix_augment: float = 0.0
    seed: int = 7

    def __post_init__(self):
        if not 0.0 <= self.prefix_augment <= 1.0:
            raise ConfigError("prefix_augment is a probability")


@dataclass
class TextEncoder:
    language: str
    vocab: List[str]
    embedding: nn.EmbeddingParams
    lstm: nn.LstmParams

    def __post_init__(self):
        self._index = {ch: i + 2 for i, ch in enumerate(self.vocab)}
        if self.embedding.table.shape[0] != len(self.vocab) + 2:
            raise ShapeError("embedding rows must equal |vocab| + PAD + UNK")

    @property
    def hidden_dim(self) -> int:
        return self.lstm.hidden_dim

    def ids(self, text: str) -> np.ndarray:
        return np.array([self._index.get(ch, UNK) for ch in normalize_text(text)], dtype=np.int64)


def _encode_ids(enc: TextEncoder, id_seqs: Sequence[np.ndarray]):
    """Batched masked encoding; returns (final h (B, H), caches for backward)."""
    B = len(id_seqs)
    T = max((len(s) for s in id_seqs), default=0)
    ids = np.zeros((T, B), np.int64)
    mask = np.zeros((T, B), bool)
    for b, s in enumerate(id_seqs):
        ids[:len(s), b] = s
        mask[:len(s), b] = True
    if T == 0:
        return np.zeros((B, enc.hidden_dim), enc.lstm.Wx.dtype), None
    x = nn.embedding_forward(enc.embedding, ids)
    _, (h, _), cache = nn.lstm_forward(enc.lstm, x, mask=mask)
    return h, (ids, cache)


def encode_text(encoder: TextEncoder, hypothesis: str) -> np.ndarray:
    """Final LSTM hidden state over the characters of ``hypothesis``."""
    h, _ = _encode_ids(encoder, [encoder.ids(hypothesis)])
    return h[0]


def encode_texts(encoder: TextEncoder, texts: Sequence[str], batch_size: int = 256) -> np.ndarray:
    out = np.zeros((len(texts), encoder.hidden_dim), np.float32)
    seqs = [encoder.ids(t) for t in texts]
    order = np.argsort([len(s) for s in seqs], kind="stable")
    for s in range(0, len(order), batch_size):
        idx = order[s:s + batch_size]
        out[idx], _ = _encode_ids(encoder, [seqs[i] for i in idx])
    return out


@dataclass
class TextLidModel:
    languages: List[str]
    encoders: List[TextEncoder]
    hidden: nn.DenseParams
    out: nn.DenseParams
    dropout: float = 0.5

    def __post_init__(self):
        if [e.language for e in self.encoders] != list(self.languages):
            raise ShapeError("one encoder per language, in language order")
        if self.hidden.in_dim != self.embedding_dim or self.out.out_dim != len(self.languages):
            raise ShapeError("text head does not match encoders / language set")

    @property
    def embedding_dims(self) -> List[int]:
        return [e.hidden_dim for e in self.encoders]

    @property
    def embedding_dim(self) -> int:
        return sum(self.embedding_dims)

    def encoder(self, language: str) -> TextEncoder:
        try:
            return self.encoders[self.languages.index(language)]
        except ValueError:
            raise DataError(f"language {language!r} not in text model set {self.languages}") from None

    def params(self) -> Dict[str, np.ndarray]:
        out = OrderedDict()
        for i, e in enumerate(self.encoders):
            out[f"enc{i}.embedding"] = e.embedding.table
            for k, v in e.lstm.arrays().items():
                out[f"enc{i}.lstm.{k}"] = v
        for name, d in (("hidden", self.hidden), ("out", self.out)):
            out[f"{name}.weight"] = d.weight
            out[f"{name}.bias"] = d.bias
        return out

    def to_checkpoint(self, meta: Optional[dict] = None) -> Checkpoint:
        tensors = OrderedDict(self.params())
        for i, e in enumerate(self.encoders):
            block = "".join(e.vocab).encode("utf-8")
            # vocabulary as a UTF-8 byte block plus per-char end offsets
            tensors[f"enc{i}.vocab_utf8"] = np.frombuffer(block, np.uint8).astype(np.float32)
            ends = np.cumsum([len(c.encode("utf-8")) for c in e.vocab]).astype(np.float32)
            tensors[f"enc{i}.vocab_index"] = ends
        m = {"languages": self.languages, "dropout": self.dropout,
             "embed_dims": [e.embedding.table.shape[1] for e in self.encoders],
             "hidden_dims": self.embedding_dims}
        m.update(meta or {})
        return Checkpoint("text", tensors, m)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TextLidModel":
        if ckpt.kind != "text":
            raise DataError(f"expected a text checkpoint, got {ckpt.kind!r}")
        t = ckpt.tensors
        encs = []
        for i, lang in enumerate(ckpt.meta["languages"]):
            block = vector(t[f"enc{i}.vocab_utf8"]).astype(np.uint8).tobytes()
            ends = vector(t[f"enc{i}.vocab_index"]).astype(np.int64)
            starts = np.concatenate([[0], ends[:-1]])
            vocab = [block[s:e].decode("utf-8") for s, e in zip(starts, ends)]
            lstm = nn.LstmParams(t[f"enc{i}.lstm.Wx"].copy(), t[f"enc{i}.lstm.Wh"].copy(),
                                 vector(t[f"enc{i}.lstm.b"]))
            encs.append(TextEncoder(lang, vocab, nn.EmbeddingParams(t[f"enc{i}.embedding"].copy()), lstm))
        return cls(list(ckpt.meta["languages"]), encs,
                   nn.DenseParams(t["hidden.weight"].copy(), vector(t["hidden.bias"])),
                   nn.DenseParams(t["out.weight"].copy(), vector(t["out.bias"])),
                   float(ckpt.meta["dropout"]))


def _selected(model: TextLidModel, hypotheses: Mapping[str, str],
              selected: Optional[Sequence[str]]) -> List[str]:
    selected = list(hypotheses) if selected is None else list(selected)
    for lang in selected:
        if lang not in model.languages:
            raise DataError(f"selected language {lang!r} not in {model.languages}")
        if lang not in hypotheses:
            raise DataError(f"no hypothesis supplied for selected language {lang!r}")
    return selected


def text_embeddings(model: TextLidModel, hypotheses: Mapping[str, str],
                    selected: Optional[Sequence[str]] = None) -> List[np.ndarray]:
    """Per-language embeddings in model order; zeros for unselected languages."""
    selected = _selected(model, hypotheses, selected)
    return [encode_text(e, hypotheses[e.language]) if e.language in selected
            else np.zeros(e.hidden_dim, np.float32) for e in model.encoders]


def head_posterior(model: TextLidModel, concat: np.ndarray) -> np.ndarray:
    z, _ = nn.dense_forward(model.hidden, concat)
    z = np.maximum(z, 0)
    logits, _ = nn.dense_forward(model.out, z)
    return nn.softmax(logits)


def text_posterior(model: TextLidModel, hypotheses: Mapping[str, str],
                   selected: Optional[Sequence[str]] = None) -> np.ndarray:
    """Posterior over ``model.languages``; dropout is off at inference."""
    return head_posterior(model, np.concatenate(text_embeddings(model, hypotheses, selected)))


def text_posterior_batch(model: TextLidModel, hyps: Sequence[Mapping[str, str]]) -> np.ndarray:
    """Batched posteriors with every language selected."""
    embs = [encode_texts(e, [h[e.language] for h in hyps]) for e in model.encoders]
    return head_posterior(model, np.concatenate(embs, axis=1))


# -------------------------------------------------------------- training

def init_text_model(languages: Sequence[str], vocabs: Sequence[List[str]], cfg: TextTrainConfig,
                    rng) -> TextLidModel:
    encs = [TextEncoder(lang, list(v), nn.EmbeddingParams.init(rng, len(v) + 2, cfg.embed_dim),
                        nn.LstmParams.init(rng, cfg.embed_dim, cfg.hidden_dim))
            for lang, v in zip(languages, vocabs)]
    total = cfg.hidden_dim * len(languages)
    return TextLidModel(list(languages), encs, nn.DenseParams.init(rng, total, cfg.fc_dim),
                        nn.DenseParams.init(rng, cfg.fc_dim, len(languages)), cfg.dropout)


def text_batch_loss(model: TextLidModel, id_batches: Sequence[Sequence[np.ndarray]],
                    labels: np.ndarray, rng=None, train: bool = False):
    """Loss and grads for one batch; ``id_batches[i]`` holds encoder i's sequences."""
    embs, caches = [], []
    for enc, seqs in zip(model.encoders, id_batches):
        h, cache = _encode_ids(enc, seqs)
        embs.append(h)
        caches.append(cache)
    concat = np.concatenate(embs, axis=1)
    d0, m0 = nn.dropout(concat, model.dropout, rng, train)
    z, _ = nn.dense_forward(model.hidden, d0)
    a = np.maximum(z, 0)
    d1, m1 = nn.dropout(a, model.dropout, rng, train)
    logits, _ = nn.dense_forward(model.out, d1)
    loss, dlogits = nn.softmax_cross_entropy(logits, labels)
    g_out, dd1 = nn.dense_backward(model.out, d1, dlogits)
    da = dd1 if m1 is None else dd1 * m1
    dz = da * (z > 0)
    g_hid, dd0 = nn.dense_backward(model.hidden, d0, dz)
    dconcat = dd0 if m0 is None else dd0 * m0
    grads = OrderedDict()
    off = 0
    for i, (enc, cache) in enumerate(zip(model.encoders, caches)):
        dh = dconcat[:, off:off + enc.hidden_dim]
        off += enc.hidden_dim
        if cache is None:
            g_emb = np.zeros_like(enc.embedding.table)
            g_lstm = enc.lstm.zeros_like()
        else:
            ids, lc = cache
            g_lstm, dx, _ = nn.lstm_backward(enc.lstm, lc, None, dh)
            g_emb = nn.embedding_backward(enc.embedding, ids, dx).table
        grads[f"enc{i}.embedding"] = g_emb
        for k, v in g_lstm.arrays().items():
            grads[f"enc{i}.lstm.{k}"] = v
    grads["hidden.weight"], grads["hidden.bias"] = g_hid.weight, g_hid.bias
    grads["out.weight"], grads["out.bias"] = g_out.weight, g_out.bias
    correct = int((logits.argmax(axis=1) == labels).sum())
    return loss, grads, correct


def train_text_lid(utts, languages: Sequence[str], config: TextTrainConfig = None
                   ) -> Tuple[TextLidModel, TrainReport]:
    """Train encoders and head end to end on FINAL 1-best hypotheses."""
    cfg = config or TextTrainConfig()
    languages = list(languages)
    labels = _labels(utts, languages)
    for u in utts:
        for lang in languages:
            if lang not in u.hypotheses:
                raise DataError(f"{u.id}: missing hypothesis for {lang}")
    rng = nn.make_rng(cfg.seed)
    vocabs = [build_vocabulary((u.final_hypothesis(l) for u in utts), cfg.min_char_count)
              for l in languages]
    model = init_text_model(languages, vocabs, cfg, rng)
    params = model.params()
    finals = [[e.ids(u.final_hypothesis(e.language)) for u in utts] for e in model.encoders]
    state = nn.SgdState()
    report = TrainReport()
    lr = cfg.lr
    for epoch in range(cfg.epochs):
        order = _stratified_order(labels, rng)
        tot_loss = tot_corr = 0.0
        for b in range(0, len(order), cfg.batch_size):
            sel = order[b:b + cfg.batch_size]
            batches = [[f[i] for i in sel] for f in finals]
            if cfg.prefix_augment:
                for j, i in enumerate(sel):
                    if rng.random() < cfg.prefix_augment:
                        u = utts[i]
                        n_ent = min(len(u.hypotheses[l]) for l in languages)
                        k = int(rng.integers(n_ent))
                        for e, bt in zip(model.encoders, batches):
                            bt[j] = e.ids(u.hypotheses[e.language][k][1])
            loss, grads, correct = text_batch_loss(model, batches, labels[sel], rng, train=True)
            if not np.isfinite(loss):
                raise nn.NumericError("non-finite training loss")
            nn.sgd_step(params, grads, lr, cfg.momentum, state, cfg.clip_norm)
            tot_loss += loss * len(sel)
            tot_corr += correct
        report.epoch_loss.append(tot_loss / len(utts))
        report.epoch_accuracy.append(tot_corr / len(utts))
        report.epoch_stage.append("full")
        log.info("text epoch %d: loss %.4f acc %.3f", epoch, report.epoch_loss[-1],
                 report.epoch_accuracy[-1])
        lr *= cfg.lr_decay
    return model, report
